#pragma once

#include <random>
#include <string>
#include <vector>

#include "lightxml/optim.hpp"
#include "lightxml/recall_head.hpp"
#include "lightxml/tensor.hpp"

namespace lightxml {

enum class Bottleneck { sigmoid, relu };

/// Label scorer: h = act(W_h e + b_h), score(l) = sigmoid(E[l] . h).
template <typename T>
class RankHead {
 public:
  RankHead(std::size_t num_labels, std::size_t embed_dim, std::size_t rep_width, ParameterSet<T>& params,
           std::mt19937_64& init_rng, Bottleneck bottleneck = Bottleneck::sigmoid,
           const std::string& prefix = "discriminator.");

  std::size_t num_labels() const { return embedding_.dim(0); }
  std::size_t embed_dim() const { return embedding_.dim(1); }
  std::size_t rep_width() const { return weight_.dim(1); }
  Bottleneck bottleneck() const { return bottleneck_; }
  /// L * embed_dim + embed_dim * (rep_width + 1).
  std::size_t parameter_count() const;

  /// [batch x embed_dim].
  Tensor<T> hidden(const Tensor<T>& e) const;
  /// Probabilities for every candidate, flattened row by row: [candidates.total()].
  /// Throws DimensionError on a width mismatch and ContractError on a bad label id.
  Tensor<T> scores(const Tensor<T>& e, const CandidateSet& candidates) const;

  const Tensor<T>& embedding() const { return embedding_; }
  const Tensor<T>& weight() const { return weight_; }
  const Tensor<T>& bias() const { return bias_; }

 private:
  Tensor<T> embedding_;
  Tensor<T> weight_;
  Tensor<T> bias_;
  Bottleneck bottleneck_;
};

/// Rows of E for the flattened candidate ids.
template <typename T>
Tensor<T> gather_embeddings(const Tensor<T>& embedding, const CandidateSet& candidates);

/// Flattened positive flags as 0/1 targets. With `inverted`, positives map to 0 and
/// negatives to 1 (debug comparison only).
template <typename T>
Tensor<T> rank_targets(const CandidateSet& candidates, bool inverted = false);

/// Summed BCE over all candidates divided by `batch`.
template <typename T>
Tensor<T> rank_loss(const Tensor<T>& scores, const Tensor<T>& targets, std::size_t batch);

extern template class RankHead<float>;
extern template class RankHead<double>;

}  // namespace lightxml
