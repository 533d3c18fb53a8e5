#include "lightxml/label_cluster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "lightxml/errors.hpp"

namespace lightxml {

namespace {

// Dense accumulator that only clears the entries it touched.
class DenseAccumulator {
 public:
  void reset(std::size_t dim) {
    if (values_.size() < dim) values_.assign(dim, 0.0);
    for (auto i : touched_) values_[i] = 0.0;
    touched_.clear();
  }
  void add(const SparseVec& v) {
    for (std::size_t i = 0; i < v.nnz(); ++i) {
      const auto idx = v.indices[i];
      if (values_[idx] == 0.0) touched_.push_back(idx);
      values_[idx] += v.values[i];
    }
  }
  double norm() const {
    double s = 0.0;
    for (auto i : touched_) s += values_[i] * values_[i];
    return std::sqrt(s);
  }
  std::span<const double> values() const { return values_; }
  SparseVec to_sparse(std::uint32_t dim) {
    std::sort(touched_.begin(), touched_.end());
    touched_.erase(std::unique(touched_.begin(), touched_.end()), touched_.end());
    SparseVec v;
    v.dim = dim;
    for (auto i : touched_) {
      if (values_[i] == 0.0) continue;
      v.indices.push_back(i);
      v.values.push_back(static_cast<float>(values_[i]));
    }
    return v;
  }

 private:
  std::vector<double> values_;
  std::vector<std::uint32_t> touched_;
};

struct Centroid {
  DenseAccumulator acc;
  double norm = 0.0;

  double cosine(const SparseVec& unit_rep) const {
    return norm > 0.0 ? dot(unit_rep, acc.values()) / norm : 0.0;
  }
};

std::uint32_t common_dim(const std::vector<const LabelRep*>& reps) {
  std::uint32_t dim = 0;
  for (const auto* r : reps) dim = std::max(dim, r->rep.dim);
  return dim;
}

Bisection split_impl(std::vector<const LabelRep*> reps, std::size_t left_size, std::uint64_t seed,
                     std::size_t max_iters) {
  const std::size_t n = reps.size();
  if (n < 2) throw ContractError("balanced 2-means needs at least 2 labels, got " + std::to_string(n));
  if (left_size == 0 || left_size >= n) {
    throw ContractError("split size " + std::to_string(left_size) + " invalid for " + std::to_string(n) + " labels");
  }
  std::sort(reps.begin(), reps.end(), [](const auto* a, const auto* b) { return a->label < b->label; });
  const std::uint32_t dim = common_dim(reps);

  std::vector<std::size_t> nonzero;
  for (std::size_t i = 0; i < n; ++i)
    if (!reps[i]->rep.empty() && reps[i]->rep.norm() > 0.0) nonzero.push_back(i);

  Centroid centroids[2];
  centroids[0].acc.reset(dim);
  centroids[1].acc.reset(dim);
  if (nonzero.size() >= 2) {
    std::vector<std::size_t> sample;
    if (nonzero.size() <= kSeedSampleSize) {
      sample = nonzero;
    } else {
      std::mt19937_64 rng(seed);
      std::sample(nonzero.begin(), nonzero.end(), std::back_inserter(sample), kSeedSampleSize, rng);
    }
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = sample[0], bj = sample[1];
    for (std::size_t a = 0; a < sample.size(); ++a) {
      for (std::size_t b = a + 1; b < sample.size(); ++b) {
        const double c = dot(reps[sample[a]]->rep, reps[sample[b]]->rep);
        if (c < best) {
          best = c;
          bi = sample[a];
          bj = sample[b];
        }
      }
    }
    centroids[0].acc.add(reps[bi]->rep);
    centroids[1].acc.add(reps[bj]->rep);
    centroids[0].norm = centroids[0].acc.norm();
    centroids[1].norm = centroids[1].acc.norm();
  }

  std::vector<std::uint8_t> side(n, 2), previous;
  std::vector<double> score(n);
  std::vector<std::size_t> order(n);
  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    for (std::size_t i = 0; i < n; ++i) score[i] = centroids[0].cosine(reps[i]->rep) - centroids[1].cosine(reps[i]->rep);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const bool za = reps[a]->rep.empty(), zb = reps[b]->rep.empty();
      if (za != zb) return zb;
      if (score[a] != score[b]) return score[a] > score[b];
      return reps[a]->label < reps[b]->label;
    });
    previous = side;
    for (std::size_t r = 0; r < n; ++r) side[order[r]] = r < left_size ? 0 : 1;
    if (side == previous) break;
    for (int c = 0; c < 2; ++c) centroids[c].acc.reset(dim);
    for (std::size_t i = 0; i < n; ++i) centroids[side[i]].acc.add(reps[i]->rep);
    for (auto& c : centroids) c.norm = c.acc.norm();
  }

  Bisection out;
  for (std::size_t i = 0; i < n; ++i) (side[i] == 0 ? out.left : out.right).push_back(reps[i]->label);
  return out;
}

void build_recursive(const std::vector<LabelRep>& reps, std::vector<std::uint32_t> labels, std::size_t max_size,
                     std::uint64_t seed, std::vector<std::vector<std::uint32_t>>& leaves) {
  if (labels.size() <= max_size) {
    leaves.push_back(std::move(labels));
    return;
  }
  std::vector<const LabelRep*> subset;
  subset.reserve(labels.size());
  for (auto l : labels) subset.push_back(&reps[l]);
  auto halves = split_impl(std::move(subset), split_left_size(labels.size(), max_size), seed, kBisectionMaxIters);
  labels.clear();
  labels.shrink_to_fit();
  build_recursive(reps, std::move(halves.left), max_size, mix_seed(seed, 1), leaves);
  build_recursive(reps, std::move(halves.right), max_size, mix_seed(seed, 2), leaves);
}

}  // namespace

ClusterMap ClusterMap::from_members(std::vector<std::vector<std::uint32_t>> members, std::size_t num_labels,
                                    std::size_t max_size, std::uint64_t seed) {
  ClusterMap m;
  m.members_ = std::move(members);
  m.max_size_ = max_size;
  m.seed_ = seed;
  constexpr auto kUnassigned = std::numeric_limits<std::uint32_t>::max();
  m.assign_.assign(num_labels, kUnassigned);
  for (std::size_t c = 0; c < m.members_.size(); ++c) {
    auto& mem = m.members_[c];
    if (mem.empty()) throw ContractError("cluster " + std::to_string(c) + " is empty");
    std::sort(mem.begin(), mem.end());
    for (auto l : mem) {
      if (l >= num_labels) throw ContractError("cluster label " + std::to_string(l) + " out of range");
      if (m.assign_[l] != kUnassigned) throw ContractError("label " + std::to_string(l) + " in two clusters");
      m.assign_[l] = static_cast<std::uint32_t>(c);
    }
  }
  for (std::size_t l = 0; l < num_labels; ++l) {
    if (m.assign_[l] == kUnassigned) throw ContractError("label " + std::to_string(l) + " has no cluster");
  }
  return m;
}

ClusterMap ClusterMap::identity(std::size_t num_labels, std::uint64_t seed) {
  std::vector<std::vector<std::uint32_t>> members(num_labels);
  for (std::size_t l = 0; l < num_labels; ++l) members[l] = {static_cast<std::uint32_t>(l)};
  return from_members(std::move(members), num_labels, 1, seed);
}

std::uint32_t ClusterMap::cluster_of(std::uint32_t label) const {
  if (label >= assign_.size()) {
    throw ContractError("label " + std::to_string(label) + " unknown to a cluster map over " +
                        std::to_string(assign_.size()) + " labels");
  }
  return assign_[label];
}

std::size_t ClusterMap::largest_cluster() const {
  std::size_t m = 0;
  for (const auto& c : members_) m = std::max(m, c.size());
  return m;
}

bool ClusterMap::satisfies_size_bound() const {
  if (members_.size() == 1) return members_[0].size() <= max_size_;
  for (const auto& c : members_) {
    if (c.size() > max_size_ || 2 * c.size() <= max_size_) return false;
  }
  return true;
}

void ClusterMap::validate() const {
  std::size_t total = 0;
  for (std::size_t c = 0; c < members_.size(); ++c) {
    total += members_[c].size();
    for (auto l : members_[c]) {
      if (l >= assign_.size() || assign_[l] != c) throw ContractError("cluster map assignment is not the inverse of members");
    }
  }
  if (total != assign_.size()) throw ContractError("cluster map does not cover every label exactly once");
}

void ClusterMap::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write cluster map " + path.string());
  out << members_.size() << ' ' << assign_.size() << ' ' << max_size_ << ' ' << seed_ << '\n';
  for (const auto& c : members_) {
    for (std::size_t i = 0; i < c.size(); ++i) out << (i ? " " : "") << c[i];
    out << '\n';
  }
}

ClusterMap ClusterMap::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open cluster map " + path.string());
  std::string line;
  std::size_t k = 0, l = 0, s = 0;
  std::uint64_t seed = 0;
  if (!std::getline(in, line)) throw ParseError("empty cluster map " + path.string(), 1);
  {
    std::istringstream hs(line);
    if (!(hs >> k >> l >> s >> seed)) throw ParseError("cluster map header must be \"K L s seed\"", 1);
  }
  std::vector<std::vector<std::uint32_t>> members;
  std::size_t line_no = 1;
  while (members.size() < k && std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::vector<std::uint32_t> c;
    std::uint32_t id = 0;
    while (ls >> id) c.push_back(id);
    if (!ls.eof()) throw ParseError("bad label id in cluster map", line_no);
    members.push_back(std::move(c));
  }
  if (members.size() != k) throw ParseError("cluster map declares " + std::to_string(k) + " clusters", line_no);
  try {
    return from_members(std::move(members), l, s, seed);
  } catch (const ContractError& e) {
    throw ParseError(std::string("invalid cluster map: ") + e.what());
  }
}

std::vector<LabelRep> build_label_reps(const SparseLabeledData& data) {
  std::vector<std::vector<std::size_t>> docs_of(data.num_labels);
  for (std::size_t i = 0; i < data.size(); ++i)
    for (auto l : data.labels[i]) docs_of.at(l).push_back(i);
  const auto dim = static_cast<std::uint32_t>(data.feature_dim);
  std::vector<LabelRep> reps(data.num_labels);
  DenseAccumulator acc;
  for (std::size_t l = 0; l < data.num_labels; ++l) {
    reps[l].label = static_cast<std::uint32_t>(l);
    acc.reset(dim);
    for (auto d : docs_of[l]) acc.add(data.features[d]);
    reps[l].rep = normalized(acc.to_sparse(dim));
  }
  return reps;
}

std::vector<LabelRep> build_label_reps(const XmcDataset& dataset) { return build_label_reps(dataset.sparse_view()); }

Bisection balanced_split(std::span<const LabelRep> reps, std::size_t left_size, std::uint64_t seed,
                         std::size_t max_iters) {
  std::vector<const LabelRep*> ptrs;
  ptrs.reserve(reps.size());
  for (const auto& r : reps) ptrs.push_back(&r);
  return split_impl(std::move(ptrs), left_size, seed, max_iters);
}

Bisection balanced_2means(std::span<const LabelRep> reps, std::uint64_t seed, std::size_t max_iters) {
  if (reps.size() < 2) throw ContractError("balanced 2-means needs at least 2 labels");
  return balanced_split(reps, (reps.size() + 1) / 2, seed, max_iters);
}

bool size_bound_feasible(std::size_t n, std::size_t max_size) {
  if (n == 0 || max_size == 0) return false;
  const std::size_t lo = max_size / 2 + 1;
  const std::size_t k_min = (n + max_size - 1) / max_size;
  const std::size_t k_max = n / lo;
  return k_min <= k_max;
}

std::size_t split_left_size(std::size_t n, std::size_t max_size) {
  const std::size_t half = (n + 1) / 2;
  if (!size_bound_feasible(n, max_size)) return half;
  for (std::size_t left = half; left < n; ++left) {
    if (size_bound_feasible(left, max_size) && size_bound_feasible(n - left, max_size)) return left;
  }
  return half;
}

ClusterMap build_cluster_map(const std::vector<LabelRep>& reps, std::size_t max_size, std::uint64_t seed) {
  if (max_size == 0) throw ConfigError("cluster size must be at least 1");
  for (std::size_t i = 0; i < reps.size(); ++i) {
    if (reps[i].label != i) throw ContractError("label reps must be indexed by label id");
  }
  if (max_size == 1) return ClusterMap::identity(reps.size(), seed);
  if (reps.empty()) throw ConfigError("cannot cluster an empty label set");
  std::vector<std::uint32_t> all(reps.size());
  std::iota(all.begin(), all.end(), 0u);
  std::vector<std::vector<std::uint32_t>> leaves;
  build_recursive(reps, std::move(all), max_size, seed, leaves);
  return ClusterMap::from_members(std::move(leaves), reps.size(), max_size, seed);
}

std::vector<std::uint8_t> cluster_targets(std::span<const std::uint32_t> labels, const ClusterMap& map) {
  std::vector<std::uint8_t> y(map.num_clusters(), 0);
  for (auto l : labels) y[map.cluster_of(l)] = 1;
  return y;
}

}  // namespace lightxml
