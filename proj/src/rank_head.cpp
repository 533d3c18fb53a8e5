#include "lightxml/rank_head.hpp"

#include <cmath>

#include "lightxml/errors.hpp"
#include "lightxml/init.hpp"
#include "lightxml/ops.hpp"

namespace lightxml {

template <typename T>
RankHead<T>::RankHead(std::size_t num_labels, std::size_t embed_dim, std::size_t rep_width, ParameterSet<T>& params,
                      std::mt19937_64& init_rng, Bottleneck bottleneck, const std::string& prefix)
    : bottleneck_(bottleneck) {
  if (num_labels == 0 || embed_dim == 0 || rep_width == 0) throw ConfigError("discriminator sizes must be positive");
  embedding_ = params.add(prefix + "E", random_normal<T>({num_labels, embed_dim},
                                                         1.0 / std::sqrt(static_cast<double>(embed_dim)), init_rng));
  weight_ = params.add(prefix + "W_h", random_normal<T>({embed_dim, rep_width}, 0.02, init_rng));
  bias_ = params.add(prefix + "b_h", Tensor<T>::zeros({embed_dim}), true);
}

template <typename T>
std::size_t RankHead<T>::parameter_count() const {
  return embedding_.numel() + weight_.numel() + bias_.numel();
}

template <typename T>
Tensor<T> RankHead<T>::hidden(const Tensor<T>& e) const {
  if (e.rank() != 2 || e.dim(1) != rep_width()) {
    throw DimensionError("discriminator expects representation width " + std::to_string(rep_width()) + ", got " +
                         shape_str(e.shape()));
  }
  auto pre = ops::linear(e, weight_, bias_);
  return bottleneck_ == Bottleneck::sigmoid ? ops::sigmoid(pre) : ops::relu(pre);
}

template <typename T>
Tensor<T> gather_embeddings(const Tensor<T>& embedding, const CandidateSet& candidates) {
  std::vector<std::size_t> ids;
  ids.reserve(candidates.total());
  for (const auto& row : candidates.rows) ids.insert(ids.end(), row.labels.begin(), row.labels.end());
  return ops::gather_rows(embedding, ids);
}

template <typename T>
Tensor<T> RankHead<T>::scores(const Tensor<T>& e, const CandidateSet& candidates) const {
  auto h = hidden(e);
  if (candidates.rows.size() != e.dim(0)) {
    throw DimensionError("candidate rows (" + std::to_string(candidates.rows.size()) + ") do not match batch " +
                         std::to_string(e.dim(0)));
  }
  std::vector<std::size_t> owner;
  owner.reserve(candidates.total());
  for (std::size_t i = 0; i < candidates.rows.size(); ++i) owner.insert(owner.end(), candidates.rows[i].size(), i);
  if (owner.empty()) return Tensor<T>::zeros({0});
  auto m = gather_embeddings(embedding_, candidates);
  return ops::sigmoid(ops::row_sum(ops::mul(m, ops::gather_rows(h, owner))));
}

template <typename T>
Tensor<T> rank_targets(const CandidateSet& candidates, bool inverted) {
  std::vector<T> y;
  y.reserve(candidates.total());
  for (const auto& row : candidates.rows)
    for (auto p : row.positive) y.push_back((p != 0) != inverted ? T(1) : T(0));
  const std::size_t n = y.size();
  return Tensor<T>::from({n}, std::move(y));
}

template <typename T>
Tensor<T> rank_loss(const Tensor<T>& scores, const Tensor<T>& targets, std::size_t batch) {
  if (batch == 0) throw ContractError("rank loss on an empty batch");
  return ops::scale(ops::bce_loss(scores, targets), static_cast<T>(1.0 / static_cast<double>(batch)));
}

#define LIGHTXML_INSTANTIATE_RANK(T)                                              \
  template class RankHead<T>;                                                     \
  template Tensor<T> gather_embeddings(const Tensor<T>&, const CandidateSet&);    \
  template Tensor<T> rank_targets<T>(const CandidateSet&, bool);                  \
  template Tensor<T> rank_loss(const Tensor<T>&, const Tensor<T>&, std::size_t);

LIGHTXML_INSTANTIATE_RANK(float)
LIGHTXML_INSTANTIATE_RANK(double)

}  // namespace lightxml
