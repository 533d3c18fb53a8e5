#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "lightxml/tensor.hpp"

// Differentiable ops. Each op records its backward closure on the active tape when
// a tape is active and at least one input requires grad; otherwise it is a plain
// forward computation.
namespace lightxml::ops {

/// Clamp applied to probabilities before taking logs in bce_loss.
inline constexpr double kProbEpsilon = 1e-12;

/// a[m x k] * b[k x n].
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

/// x[n x in] * weight[out x in]^T + bias[out]. `bias` may be undefined.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

/// Elementwise product.
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);

/// 1 / (1 + exp(-x)), evaluated without overflow for large |x|.
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

/// Exact (erf) GELU.
template <typename T>
Tensor<T> gelu(const Tensor<T>& x);

/// Row-wise layer normalization of x[n x d] with affine gamma[d], beta[d].
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, double eps = 1e-5);

/// Multi-head scaled dot-product self-attention over a padded batch.
/// q, k, v: [batch*seq x width], rows ordered (b, position). mask[b*seq + j] == 0 marks
/// key j of sequence b as padding; padded keys receive exactly zero weight and are
/// never read, so outputs at real positions do not depend on them.
template <typename T>
Tensor<T> masked_self_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                                std::span<const std::uint8_t> mask, std::size_t batch,
                                std::size_t seq, std::size_t heads);

/// out[i] = table[ids[i]]. Backward scatters into the gathered rows only.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, std::span<const std::size_t> ids);

/// Column-wise concatenation of matrices sharing the row count.
template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts);

/// x[n x d] -> [n].
template <typename T>
Tensor<T> row_sum(const Tensor<T>& x);

/// Sum of all elements -> [1].
template <typename T>
Tensor<T> sum(const Tensor<T>& x);

/// Summed binary cross-entropy, sum_i -(y_i log p_i + (1 - y_i) log(1 - p_i)), with p
/// clamped to [kProbEpsilon, 1 - kProbEpsilon]. Targets carry no gradient.
template <typename T>
Tensor<T> bce_loss(const Tensor<T>& p, const Tensor<T>& y);

/// Inverted dropout. Identity when !training or rate == 0. rate must lie in [0, 1).
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, bool training, std::mt19937_64& rng);

}  // namespace lightxml::ops
