#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lightxml/corpus.hpp"
#include "lightxml/sparse.hpp"

namespace lightxml {

/// Normalized sum of the sparse features of the training documents carrying `label`;
/// the zero vector when the label never occurs.
struct LabelRep {
  std::uint32_t label = 0;
  SparseVec rep;
};

/// Result of one balanced bisection. Both sides keep ascending label order.
struct Bisection {
  std::vector<std::uint32_t> left;
  std::vector<std::uint32_t> right;
};

/// Flat two-level label tree: every label belongs to exactly one cluster.
class ClusterMap {
 public:
  ClusterMap() = default;

  /// Builds the inverse assignment and validates the partition (each label in
  /// [0, num_labels) exactly once). Throws ContractError otherwise.
  static ClusterMap from_members(std::vector<std::vector<std::uint32_t>> members, std::size_t num_labels,
                                 std::size_t max_size, std::uint64_t seed);
  /// One cluster per label.
  static ClusterMap identity(std::size_t num_labels, std::uint64_t seed = 0);

  std::size_t num_clusters() const { return members_.size(); }
  std::size_t num_labels() const { return assign_.size(); }
  std::size_t max_size() const { return max_size_; }
  std::uint64_t seed() const { return seed_; }

  /// Throws ContractError for an unknown label.
  std::uint32_t cluster_of(std::uint32_t label) const;
  const std::vector<std::uint32_t>& members(std::size_t cluster) const { return members_.at(cluster); }
  const std::vector<std::vector<std::uint32_t>>& all_members() const { return members_; }
  const std::vector<std::uint32_t>& assignment() const { return assign_; }
  std::size_t largest_cluster() const;

  /// s/2 < |members(c)| <= s for every cluster, or a single cluster when L <= s.
  bool satisfies_size_bound() const;
  /// Re-checks that assignment and members are exact inverses.
  void validate() const;

  // Text format: header "K L s seed", then line c lists the labels of cluster c.
  void save(const std::filesystem::path& path) const;
  static ClusterMap load(const std::filesystem::path& path);

  bool operator==(const ClusterMap& o) const {
    return members_ == o.members_ && max_size_ == o.max_size_ && seed_ == o.seed_;
  }

 private:
  std::vector<std::vector<std::uint32_t>> members_;
  std::vector<std::uint32_t> assign_;
  std::size_t max_size_ = 0;
  std::uint64_t seed_ = 0;
};

/// One LabelRep per label id in [0, data.num_labels).
std::vector<LabelRep> build_label_reps(const SparseLabeledData& data);
std::vector<LabelRep> build_label_reps(const XmcDataset& dataset);

inline constexpr std::size_t kBisectionMaxIters = 50;
inline constexpr std::size_t kSeedSampleSize = 32;

/// Balanced 2-means on unit (or zero) label reps, splitting ceil(n/2) / floor(n/2).
/// Centroids start at the least similar pair within a seeded sample of at most 32
/// labels. Each round scores labels by cos(rep, c_left) - cos(rep, c_right), sorts
/// descending with zero reps last and ties by ascending id, and gives the top part to
/// the left. Stops when the partition repeats or after max_iters rounds.
/// Throws ContractError for fewer than two labels.
Bisection balanced_2means(std::span<const LabelRep> reps, std::uint64_t seed,
                          std::size_t max_iters = kBisectionMaxIters);

/// Same procedure with an explicit left-side size in [1, n-1].
Bisection balanced_split(std::span<const LabelRep> reps, std::size_t left_size, std::uint64_t seed,
                         std::size_t max_iters = kBisectionMaxIters);

/// Whether `n` labels can be partitioned into clusters with sizes in (s/2, s].
bool size_bound_feasible(std::size_t n, std::size_t max_size);

/// Left-side size used when splitting a node of n > s labels: ceil(n/2) whenever both
/// halves can still reach the size bound, otherwise the most balanced split for which
/// they can. Falls back to ceil(n/2) when n itself is infeasible.
std::size_t split_left_size(std::size_t n, std::size_t max_size);

/// Recursively bisects until every leaf holds at most `max_size` labels; leaves are
/// numbered depth-first, left before right. max_size == 1 yields the identity map.
/// `reps[i].label` must equal i.
ClusterMap build_cluster_map(const std::vector<LabelRep>& reps, std::size_t max_size, std::uint64_t seed);

/// Multi-hot over clusters: bit c is set iff some label of `labels` lies in cluster c.
std::vector<std::uint8_t> cluster_targets(std::span<const std::uint32_t> labels, const ClusterMap& map);

}  // namespace lightxml
