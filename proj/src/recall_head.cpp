#include "lightxml/recall_head.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lightxml/errors.hpp"
#include "lightxml/init.hpp"
#include "lightxml/ops.hpp"

namespace lightxml {

template <typename T>
RecallHead<T>::RecallHead(std::size_t num_clusters, std::size_t rep_width, ParameterSet<T>& params,
                          std::mt19937_64& init_rng, const std::string& prefix) {
  if (num_clusters == 0 || rep_width == 0) throw ConfigError("generator needs K > 0 and a non-empty representation");
  weight_ = params.add(prefix + "W_g", random_normal<T>({num_clusters, rep_width}, 0.02, init_rng));
  bias_ = params.add(prefix + "b_g", Tensor<T>::zeros({num_clusters}), true);
}

template <typename T>
Tensor<T> RecallHead<T>::scores(const Tensor<T>& e) const {
  if (e.rank() != 2 || e.dim(1) != rep_width()) {
    throw DimensionError("generator expects representation width " + std::to_string(rep_width()) + ", got " +
                         shape_str(e.shape()));
  }
  return ops::sigmoid(ops::linear(e, weight_, bias_));
}

template <typename T>
Tensor<T> recall_loss(const Tensor<T>& scores, const Tensor<T>& targets) {
  for (T y : targets.data()) {
    if (y != T(0) && y != T(1)) throw ContractError("cluster targets must be 0 or 1");
  }
  if (scores.rank() == 0 || scores.dim(0) == 0) throw ContractError("recall loss on an empty batch");
  return ops::scale(ops::bce_loss(scores, targets), static_cast<T>(1.0 / static_cast<double>(scores.dim(0))));
}

template <typename T>
Tensor<T> cluster_target_matrix(const std::vector<std::vector<std::uint32_t>>& labels, const ClusterMap& map) {
  const std::size_t k = map.num_clusters();
  std::vector<T> y(labels.size() * k, T(0));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto row = cluster_targets(labels[i], map);
    for (std::size_t c = 0; c < k; ++c) y[i * k + c] = static_cast<T>(row[c]);
  }
  return Tensor<T>::from({labels.size(), k}, std::move(y));
}

std::size_t CandidateSet::total() const {
  std::size_t n = 0;
  for (const auto& r : rows) n += r.size();
  return n;
}

bool CandidateSet::operator==(const CandidateSet& o) const {
  if (rows.size() != o.rows.size()) return false;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto &a = rows[i], &b = o.rows[i];
    if (a.labels != b.labels || a.positive != b.positive || a.source_cluster != b.source_cluster ||
        a.num_sampled != b.num_sampled || a.clusters != b.clusters) {
      return false;
    }
  }
  return true;
}

template <typename T>
std::vector<std::uint32_t> top_clusters(std::span<const T> scores, std::size_t b_top) {
  if (b_top == 0 || b_top > scores.size()) {
    throw ConfigError("b_top must lie in [1, " + std::to_string(scores.size()) + "], got " + std::to_string(b_top));
  }
  std::vector<std::uint32_t> ids(scores.size());
  std::iota(ids.begin(), ids.end(), 0u);
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(b_top), ids.end(),
                    [&](std::uint32_t a, std::uint32_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  ids.resize(b_top);
  return ids;
}

template <typename T>
CandidateSet sample_candidates(const Tensor<T>& scores, const ClusterMap& map, std::size_t b_top,
                               const std::vector<std::vector<std::uint32_t>>* positives) {
  if (scores.rank() != 2 || scores.dim(1) != map.num_clusters()) {
    throw DimensionError("cluster scores " + shape_str(scores.shape()) + " do not match K=" +
                         std::to_string(map.num_clusters()));
  }
  const std::size_t batch = scores.dim(0), k = scores.dim(1);
  if (b_top == 0 || b_top > k) {
    throw ConfigError("b_top must lie in [1, " + std::to_string(k) + "], got " + std::to_string(b_top));
  }
  if (positives && positives->size() != batch) throw ContractError("positive label sets do not match the batch");

  CandidateSet out;
  out.rows.resize(batch);
  std::vector<std::uint8_t> is_pos(map.num_labels(), 0);
  for (std::size_t i = 0; i < batch; ++i) {
    auto& row = out.rows[i];
    if (positives) {
      for (auto l : (*positives)[i]) is_pos.at(l) = 1;
    }
    row.clusters = top_clusters(scores.data().subspan(i * k, k), b_top);
    for (auto c : row.clusters) {
      for (auto l : map.members(c)) {
        row.labels.push_back(l);
        row.positive.push_back(is_pos[l]);
        row.source_cluster.push_back(c);
        // 2 = positive already present; it is not appended again.
        if (is_pos[l]) is_pos[l] = 2;
      }
    }
    row.num_sampled = row.labels.size();
    if (positives) {
      for (auto l : (*positives)[i]) {
        if (is_pos[l] == 1) {
          row.labels.push_back(l);
          row.positive.push_back(1);
          row.source_cluster.push_back(map.cluster_of(l));
        }
        is_pos[l] = 0;
      }
    }
  }
  return out;
}

std::size_t default_b_top(double mean_labels_per_instance, std::size_t num_clusters) {
  if (num_clusters == 0) throw ConfigError("no clusters");
  const auto raw = static_cast<std::size_t>(std::ceil(15.0 * mean_labels_per_instance));
  return std::min(std::max<std::size_t>(raw, 5), num_clusters);
}

#define LIGHTXML_INSTANTIATE_RECALL(T)                                                                      \
  template class RecallHead<T>;                                                                             \
  template Tensor<T> recall_loss(const Tensor<T>&, const Tensor<T>&);                                       \
  template Tensor<T> cluster_target_matrix<T>(const std::vector<std::vector<std::uint32_t>>&, const ClusterMap&); \
  template std::vector<std::uint32_t> top_clusters(std::span<const T>, std::size_t);                        \
  template CandidateSet sample_candidates(const Tensor<T>&, const ClusterMap&, std::size_t,                 \
                                          const std::vector<std::vector<std::uint32_t>>*);

LIGHTXML_INSTANTIATE_RECALL(float)
LIGHTXML_INSTANTIATE_RECALL(double)

}  // namespace lightxml
