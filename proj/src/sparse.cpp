#include "lightxml/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lightxml/errors.hpp"

namespace lightxml {

double SparseVec::norm() const {
  double s = 0.0;
  for (float v : values) s += static_cast<double>(v) * v;
  return std::sqrt(s);
}

void SparseVec::validate() const {
  if (indices.size() != values.size()) throw ContractError("sparse vector index/value length mismatch");
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= dim) {
      throw ContractError("sparse index " + std::to_string(indices[i]) + " >= dim " + std::to_string(dim));
    }
    if (i > 0 && indices[i] <= indices[i - 1]) throw ContractError("sparse indices not strictly increasing");
  }
  if (!std::isfinite(norm())) throw ContractError("sparse vector has non-finite norm");
}

SparseVec SparseVec::from_pairs(std::uint32_t dim, std::vector<std::pair<std::uint32_t, float>> pairs) {
  std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  SparseVec v;
  v.dim = dim;
  for (const auto& [idx, val] : pairs) {
    if (!v.indices.empty() && v.indices.back() == idx) {
      v.values.back() += val;
    } else {
      v.indices.push_back(idx);
      v.values.push_back(val);
    }
  }
  return v;
}

SparseVec normalized(const SparseVec& v) {
  SparseVec out = v;
  const double n = v.norm();
  if (n > 0.0) {
    for (auto& x : out.values) x = static_cast<float>(x / n);
  }
  return out;
}

double dot(const SparseVec& a, const SparseVec& b) {
  double s = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.indices.size() && j < b.indices.size()) {
    if (a.indices[i] == b.indices[j]) {
      s += static_cast<double>(a.values[i]) * b.values[j];
      ++i;
      ++j;
    } else if (a.indices[i] < b.indices[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return s;
}

double dot(const SparseVec& a, std::span<const double> dense) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.indices.size(); ++i) s += a.values[i] * dense[a.indices[i]];
  return s;
}

}  // namespace lightxml
