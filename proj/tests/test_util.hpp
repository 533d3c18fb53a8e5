#pragma once

#include <filesystem>
#include <memory>
#include <random>
#include <string>

#include "lightxml/config.hpp"
#include "lightxml/corpus.hpp"
#include "lightxml/label_cluster.hpp"
#include "lightxml/synthetic.hpp"

namespace lightxml::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("lightxml_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

struct TinyCorpus {
  SyntheticCorpus raw;
  std::shared_ptr<const Vocab> vocab;
  XmcDataset train;
  XmcDataset test;
};

inline TinyCorpus tiny_corpus(std::size_t labels = 16, std::size_t topics = 4, std::size_t train_docs = 96,
                              std::size_t test_docs = 32, std::uint64_t seed = 3, std::size_t max_len = 24) {
  SyntheticSpec spec;
  spec.num_labels = labels;
  spec.num_topics = topics;
  spec.train_docs = train_docs;
  spec.test_docs = test_docs;
  spec.noise_words = 40;
  spec.seed = seed;
  TinyCorpus c;
  c.raw = generate_synthetic(spec);
  c.vocab = std::make_shared<const Vocab>(Vocab::build(c.raw.train_text, 1));
  c.train = make_dataset(c.raw.train_sparse, c.raw.train_text, c.vocab, max_len, Split::train);
  c.test = make_dataset(c.raw.test_sparse, c.raw.test_text, c.vocab, max_len, Split::test);
  return c;
}

// Small, fast model settings for trainer tests.
inline TrainConfig tiny_config() {
  TrainConfig c;
  c.epochs = 2;
  c.batch_size = 8;
  c.hidden = 16;
  c.layers = 2;
  c.heads = 2;
  c.ffn = 32;
  c.embed_dim = 8;
  c.max_len = 24;
  c.cluster_size = 4;
  c.b_top = 2;
  c.learning_rate = 1e-3;
  c.checkpoint_every_epoch = false;
  return c;
}

}  // namespace lightxml::testing
