#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace lightxml {

/// Sparse feature vector: strictly increasing indices below `dim`, parallel values.
struct SparseVec {
  std::vector<std::uint32_t> indices;
  std::vector<float> values;
  std::uint32_t dim = 0;

  std::size_t nnz() const { return indices.size(); }
  bool empty() const { return indices.empty(); }
  double norm() const;
  /// Throws ContractError if an invariant does not hold.
  void validate() const;

  /// Sorts by index and merges duplicate indices by summation.
  static SparseVec from_pairs(std::uint32_t dim, std::vector<std::pair<std::uint32_t, float>> pairs);
};

/// Unit-L2 copy; the zero vector stays zero.
SparseVec normalized(const SparseVec& v);

double dot(const SparseVec& a, const SparseVec& b);
double dot(const SparseVec& a, std::span<const double> dense);

}  // namespace lightxml
