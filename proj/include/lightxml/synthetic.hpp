#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lightxml/corpus.hpp"

namespace lightxml {

/// Generator settings for a block-structured toy XMC corpus. Labels are grouped into
/// topics; every document names its labels through label-specific words, mentions its
/// topic, and carries filler noise.
struct SyntheticSpec {
  std::size_t num_labels = 64;
  std::size_t num_topics = 8;
  std::size_t train_docs = 2000;
  std::size_t test_docs = 500;
  std::size_t noise_words = 200;
  std::size_t min_labels = 1;
  std::size_t max_labels = 3;
  std::size_t min_noise = 4;
  std::size_t max_noise = 10;
  // Chance that a document also carries one label from a second topic.
  double cross_topic_rate = 0.1;
  std::uint64_t seed = 7;
};

struct SyntheticCorpus {
  std::vector<std::string> train_text;
  std::vector<std::string> test_text;
  SparseLabeledData train_sparse;
  SparseLabeledData test_sparse;
  // label id -> topic id
  std::vector<std::size_t> label_topic;
};

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec);

}  // namespace lightxml
