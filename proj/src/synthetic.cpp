#include "lightxml/synthetic.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <random>
#include <sstream>

#include "lightxml/errors.hpp"

namespace lightxml {

namespace {

struct WordTable {
  std::vector<std::string> words;
  std::map<std::string, std::uint32_t> ids;

  std::uint32_t add(std::string w) {
    auto [it, inserted] = ids.emplace(w, static_cast<std::uint32_t>(words.size()));
    if (inserted) words.push_back(std::move(w));
    return it->second;
  }
};

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
  if (spec.num_topics == 0 || spec.num_labels < spec.num_topics || spec.num_labels % spec.num_topics != 0) {
    throw ConfigError("num_labels must be a positive multiple of num_topics");
  }
  if (spec.min_labels == 0 || spec.max_labels < spec.min_labels || spec.max_noise < spec.min_noise) {
    throw ConfigError("invalid synthetic label/noise ranges");
  }
  const std::size_t per_topic = spec.num_labels / spec.num_topics;
  SyntheticCorpus corpus;
  corpus.label_topic.resize(spec.num_labels);
  for (std::size_t l = 0; l < spec.num_labels; ++l) corpus.label_topic[l] = l / per_topic;

  WordTable table;
  std::vector<std::uint32_t> topic_word(spec.num_topics);
  std::vector<std::array<std::uint32_t, 2>> label_words(spec.num_labels);
  for (std::size_t t = 0; t < spec.num_topics; ++t) topic_word[t] = table.add("topic" + std::to_string(t));
  for (std::size_t l = 0; l < spec.num_labels; ++l) {
    label_words[l] = {table.add("tag" + std::to_string(l) + "a"), table.add("tag" + std::to_string(l) + "b")};
  }
  std::vector<std::uint32_t> noise(spec.noise_words);
  for (std::size_t i = 0; i < spec.noise_words; ++i) noise[i] = table.add("filler" + std::to_string(i));

  std::mt19937_64 rng(spec.seed);
  auto uniform = [&rng](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };

  auto make_doc = [&](std::vector<std::uint32_t>& labels, std::vector<std::uint32_t>& words) {
    const std::size_t topic = uniform(0, spec.num_topics - 1);
    const std::size_t n_labels = std::min(uniform(spec.min_labels, spec.max_labels), per_topic);
    std::vector<std::uint32_t> pool(per_topic);
    for (std::size_t j = 0; j < per_topic; ++j) pool[j] = static_cast<std::uint32_t>(topic * per_topic + j);
    std::shuffle(pool.begin(), pool.end(), rng);
    labels.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_labels));
    if (spec.num_topics > 1 && std::uniform_real_distribution<double>(0.0, 1.0)(rng) < spec.cross_topic_rate) {
      std::size_t other = uniform(0, spec.num_topics - 2);
      if (other >= topic) ++other;
      labels.push_back(static_cast<std::uint32_t>(other * per_topic + uniform(0, per_topic - 1)));
    }
    std::sort(labels.begin(), labels.end());
    words.clear();
    words.push_back(topic_word[topic]);
    for (auto l : labels) {
      const std::size_t reps = uniform(1, 2);
      for (std::size_t r = 0; r < reps; ++r) words.push_back(label_words[l][uniform(0, 1)]);
    }
    const std::size_t n_noise = uniform(spec.min_noise, spec.max_noise);
    for (std::size_t i = 0; i < n_noise && !noise.empty(); ++i) words.push_back(noise[uniform(0, noise.size() - 1)]);
    std::shuffle(words.begin(), words.end(), rng);
  };

  auto fill = [&](std::size_t n, std::vector<std::string>& texts, SparseLabeledData& sparse,
                  std::vector<std::vector<std::uint32_t>>& word_ids) {
    sparse.num_labels = spec.num_labels;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::uint32_t> labels, words;
      make_doc(labels, words);
      std::ostringstream text;
      for (std::size_t w = 0; w < words.size(); ++w) text << (w ? " " : "") << table.words[words[w]];
      texts.push_back(text.str());
      sparse.labels.push_back(std::move(labels));
      // offset past the reserved ids so build_tfidf keeps every word
      for (auto& w : words) w += Vocab::kReserved;
      word_ids.push_back(std::move(words));
    }
  };

  std::vector<std::vector<std::uint32_t>> train_ids, test_ids;
  fill(spec.train_docs, corpus.train_text, corpus.train_sparse, train_ids);
  fill(spec.test_docs, corpus.test_text, corpus.test_sparse, test_ids);

  const std::size_t dim = table.words.size() + Vocab::kReserved;
  auto shift = [&](std::vector<SparseVec> rows) {
    // feature id = word id in the generator's table
    for (auto& r : rows) {
      for (auto& idx : r.indices) idx -= Vocab::kReserved;
      r.dim = static_cast<std::uint32_t>(table.words.size());
    }
    return rows;
  };
  corpus.train_sparse.features = shift(build_tfidf(train_ids, dim));
  corpus.test_sparse.features = shift(build_tfidf(test_ids, dim));
  corpus.train_sparse.feature_dim = table.words.size();
  corpus.test_sparse.feature_dim = table.words.size();
  return corpus;
}

}  // namespace lightxml
