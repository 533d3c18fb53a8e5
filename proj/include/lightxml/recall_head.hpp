#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lightxml/label_cluster.hpp"
#include "lightxml/optim.hpp"
#include "lightxml/tensor.hpp"

namespace lightxml {

/// Cluster scorer G(e) = sigmoid(W_g e + b_g), one independent probability per cluster.
template <typename T>
class RecallHead {
 public:
  RecallHead(std::size_t num_clusters, std::size_t rep_width, ParameterSet<T>& params, std::mt19937_64& init_rng,
             const std::string& prefix = "generator.");

  std::size_t num_clusters() const { return weight_.dim(0); }
  std::size_t rep_width() const { return weight_.dim(1); }

  /// e[batch x rep_width] -> probabilities [batch x K]. Throws DimensionError on a
  /// width mismatch.
  Tensor<T> scores(const Tensor<T>& e) const;

  const Tensor<T>& weight() const { return weight_; }
  const Tensor<T>& bias() const { return bias_; }

 private:
  Tensor<T> weight_;
  Tensor<T> bias_;
};

/// Summed BCE over clusters, averaged over the batch rows of `scores`. Throws
/// ContractError when a target is not 0 or 1.
template <typename T>
Tensor<T> recall_loss(const Tensor<T>& scores, const Tensor<T>& targets);

/// Multi-hot cluster targets [batch x K] for the given label sets.
template <typename T>
Tensor<T> cluster_target_matrix(const std::vector<std::vector<std::uint32_t>>& labels, const ClusterMap& map);

/// Candidate labels of one instance, in deterministic order: clusters by descending
/// generator score, labels in member order, then injected positives.
struct Candidates {
  std::vector<std::uint32_t> labels;
  std::vector<std::uint8_t> positive;
  std::vector<std::uint32_t> source_cluster;
  // Number of leading entries that came from the selected clusters.
  std::size_t num_sampled = 0;
  // Selected clusters, best first.
  std::vector<std::uint32_t> clusters;

  std::size_t size() const { return labels.size(); }
};

struct CandidateSet {
  std::vector<Candidates> rows;

  std::size_t total() const;
  bool operator==(const CandidateSet& o) const;
};

/// The `b_top` best clusters of one score row; ties go to the lower cluster id.
template <typename T>
std::vector<std::uint32_t> top_clusters(std::span<const T> scores, std::size_t b_top);

/// Candidate sets from the current scores [batch x K]. With `positives` (training),
/// every positive label is flagged and missing ones are appended. Throws ConfigError
/// unless 1 <= b_top <= K.
template <typename T>
CandidateSet sample_candidates(const Tensor<T>& scores, const ClusterMap& map, std::size_t b_top,
                               const std::vector<std::vector<std::uint32_t>>* positives);

/// ceil(15 * mean labels per instance), clamped to [5, K] (to [1, K] when K < 5).
std::size_t default_b_top(double mean_labels_per_instance, std::size_t num_clusters);

extern template class RecallHead<float>;
extern template class RecallHead<double>;

}  // namespace lightxml
