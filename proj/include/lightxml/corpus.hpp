#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lightxml/sparse.hpp"

namespace lightxml {

enum class Split { train, test };

/// Contents of a sparse XMC file: per-row sorted label ids and sparse features.
struct SparseLabeledData {
  std::size_t feature_dim = 0;
  std::size_t num_labels = 0;
  std::vector<SparseVec> features;
  std::vector<std::vector<std::uint32_t>> labels;

  std::size_t size() const { return features.size(); }
};

/// Parses the sparse XMC format:
///   N D L
///   l1,l2,... i:v i:v ...
/// Label and feature ids are 0-based. Rows of a train split must carry at least one
/// label. Throws ParseError (with the offending line) on malformed input.
SparseLabeledData parse_sparse(std::istream& in, Split split, const std::string& source = "<stream>");
SparseLabeledData load_sparse(const std::filesystem::path& path, Split split);
void write_sparse(std::ostream& out, const SparseLabeledData& data);
void save_sparse(const std::filesystem::path& path, const SparseLabeledData& data);

/// One document per line.
std::vector<std::string> read_lines(const std::filesystem::path& path);

/// Lowercased words; ASCII whitespace separates, ASCII punctuation forms single-char tokens.
std::vector<std::string> split_words(std::string_view text);

/// Token <-> id map with reserved ids 0=[PAD], 1=[CLS], 2=[UNK]. Ids of regular tokens
/// are assigned by descending frequency, then lexicographically.
class Vocab {
 public:
  static constexpr std::uint32_t kPad = 0;
  static constexpr std::uint32_t kCls = 1;
  static constexpr std::uint32_t kUnk = 2;
  static constexpr std::uint32_t kReserved = 3;

  Vocab();

  /// Throws ConfigError on an empty corpus.
  static Vocab build(const std::vector<std::string>& texts, std::size_t min_freq);
  static Vocab build_from_file(const std::filesystem::path& raw_text, std::size_t min_freq);

  std::uint32_t id(std::string_view token) const;
  const std::string& token(std::uint32_t id) const { return tokens_.at(id); }
  std::size_t size() const { return tokens_.size(); }
  std::size_t min_freq() const { return min_freq_; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // One token per line; the line number is the id.
  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::uint32_t> ids_;
  std::size_t min_freq_ = 1;
};

/// [CLS] followed by word ids, truncated to `max_len` ids in total. Never emits [PAD].
std::vector<std::uint32_t> tokenize(std::string_view text, const Vocab& vocab, std::size_t max_len);

struct Document {
  std::size_t id = 0;
  std::vector<std::uint32_t> tokens;
  std::vector<std::uint32_t> labels;
  SparseVec sparse;
};

struct XmcDataset {
  std::vector<Document> documents;
  std::size_t num_labels = 0;
  std::size_t feature_dim = 0;
  Split split = Split::train;
  std::shared_ptr<const Vocab> vocab;

  std::size_t size() const { return documents.size(); }
  /// Throws ContractError if a label id, token id, or train-time label set is invalid.
  void validate() const;
  /// Re-packs label sets and sparse rows into the file representation.
  SparseLabeledData sparse_view() const;
};

/// Joins aligned raw text and sparse rows into a dataset. Throws ConfigError when the
/// two sources disagree on the number of documents.
XmcDataset make_dataset(const SparseLabeledData& sparse, const std::vector<std::string>& texts,
                        std::shared_ptr<const Vocab> vocab, std::size_t max_len, Split split);

/// Smoothed TF-IDF over token id sequences with L2-normalized rows. Reserved ids are
/// ignored. Used for corpora that ship without sparse features.
std::vector<SparseVec> build_tfidf(const std::vector<std::vector<std::uint32_t>>& docs, std::size_t dim);

/// Padded mini-batch. tokens/mask are batch_size x seq_len, row-major.
struct Batch {
  std::vector<std::size_t> doc_indices;
  std::size_t batch_size = 0;
  std::size_t seq_len = 0;
  std::vector<std::size_t> tokens;
  std::vector<std::uint8_t> mask;
  std::vector<std::vector<std::uint32_t>> labels;
};

/// Pads the given documents to their longest sequence.
Batch make_batch(const XmcDataset& dataset, const std::vector<std::size_t>& doc_indices);

/// Iterates one epoch in an order determined by (seed, epoch); the last batch may be
/// short. With shuffle off the dataset order is kept.
class BatchIterator {
 public:
  BatchIterator(const XmcDataset& dataset, std::size_t batch_size, std::uint64_t seed, std::uint64_t epoch,
                bool shuffle = true);

  std::optional<Batch> next();
  std::size_t num_batches() const;
  const std::vector<std::size_t>& order() const { return order_; }

 private:
  const XmcDataset* dataset_;
  std::size_t batch_size_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

/// Mixes two 64-bit values into a seed (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace lightxml
