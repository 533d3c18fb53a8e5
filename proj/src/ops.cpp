#include "lightxml/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "lightxml/errors.hpp"

namespace lightxml::ops {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

template <typename T>
CMapMat<T> as_mat(std::span<const T> s, std::size_t r, std::size_t c) {
  return CMapMat<T>(s.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}
template <typename T>
MapMat<T> as_mat(std::span<T> s, std::size_t r, std::size_t c) {
  return MapMat<T>(s.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

void require_matrix(const Shape& s, const char* op) {
  if (s.size() != 2) throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_str(s));
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

template <typename T>
void check_finite(const std::vector<T>& values, const char* op) {
  if (!check_finite_enabled()) return;
  for (T v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite output");
  }
}

template <typename T>
Tape<T>* recording_tape(std::initializer_list<const Tensor<T>*> inputs) {
  Tape<T>* tape = Tape<T>::active();
  if (!tape) return nullptr;
  for (const auto* t : inputs) {
    if (t->defined() && t->requires_grad()) return tape;
  }
  return nullptr;
}

// Builds an op output; it requires grad iff a tape will record its backward.
template <typename T>
Tensor<T> make_output(Shape shape, std::vector<T> values, bool tracked, const char* op) {
  check_finite(values, op);
  return Tensor<T>::from(std::move(shape), std::move(values), tracked);
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T(0)) {
    const T z = std::exp(-x);
    return T(1) / (T(1) + z);
  }
  const T z = std::exp(x);
  return z / (T(1) + z);
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_matrix(a.shape(), "matmul");
  require_matrix(b.shape(), "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  std::vector<T> out(m * n);
  as_mat(std::span<T>(out), m, n).noalias() = as_mat(a.data(), m, k) * as_mat(b.data(), k, n);
  Tape<T>* tape = recording_tape({&a, &b});
  auto result = make_output<T>({m, n}, std::move(out), tape != nullptr, "matmul");
  if (tape) {
    tape->record([a, b, result, m, k, n]() mutable {
      auto g = as_mat(std::span<const T>(result.grad()), m, n);
      if (a.requires_grad()) as_mat(a.grad_mut(), m, k).noalias() += g * as_mat(b.data(), k, n).transpose();
      if (b.requires_grad()) as_mat(b.grad_mut(), k, n).noalias() += as_mat(a.data(), m, k).transpose() * g;
    });
  }
  return result;
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_matrix(x.shape(), "linear");
  require_matrix(weight.shape(), "linear");
  const std::size_t n = x.dim(0), in = x.dim(1), out_dim = weight.dim(0);
  if (weight.dim(1) != in) {
    throw DimensionError("linear: input " + shape_str(x.shape()) + " incompatible with weight " +
                         shape_str(weight.shape()));
  }
  if (bias.defined() && bias.numel() != out_dim) {
    throw DimensionError("linear: bias " + shape_str(bias.shape()) + " incompatible with weight " +
                         shape_str(weight.shape()));
  }
  std::vector<T> out(n * out_dim);
  auto y = as_mat(std::span<T>(out), n, out_dim);
  y.noalias() = as_mat(x.data(), n, in) * as_mat(weight.data(), out_dim, in).transpose();
  if (bias.defined()) {
    const auto bv = Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias.data().data(),
                                                                          static_cast<Eigen::Index>(out_dim));
    y.rowwise() += bv;
  }
  Tape<T>* tape = recording_tape({&x, &weight, &bias});
  auto result = make_output<T>({n, out_dim}, std::move(out), tape != nullptr, "linear");
  if (tape) {
    tape->record([x, weight, bias, result, n, in, out_dim]() mutable {
      auto g = as_mat(std::span<const T>(result.grad()), n, out_dim);
      if (x.requires_grad()) as_mat(x.grad_mut(), n, in).noalias() += g * as_mat(weight.data(), out_dim, in);
      if (weight.requires_grad()) {
        as_mat(weight.grad_mut(), out_dim, in).noalias() += g.transpose() * as_mat(x.data(), n, in);
      }
      if (bias.defined() && bias.requires_grad()) {
        auto gb = bias.grad_mut();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < out_dim; ++j) gb[j] += g(i, j);
      }
    });
  }
  return result;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  std::vector<T> out(a.numel());
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + bd[i];
  Tape<T>* tape = recording_tape({&a, &b});
  auto result = make_output<T>(a.shape(), std::move(out), tape != nullptr, "add");
  if (tape) {
    tape->record([a, b, result]() mutable {
      auto g = result.grad();
      if (a.requires_grad()) {
        auto ga = a.grad_mut();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad_mut();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      }
    });
  }
  return result;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  std::vector<T> out(a.numel());
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
  Tape<T>* tape = recording_tape({&a, &b});
  auto result = make_output<T>(a.shape(), std::move(out), tape != nullptr, "mul");
  if (tape) {
    tape->record([a, b, result]() mutable {
      auto g = result.grad();
      auto ad = a.data();
      auto bd = b.data();
      if (a.requires_grad()) {
        auto ga = a.grad_mut();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bd[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad_mut();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * ad[i];
      }
    });
  }
  return result;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  std::vector<T> out(x.data().begin(), x.data().end());
  for (auto& v : out) v *= factor;
  Tape<T>* tape = recording_tape({&x});
  auto result = make_output<T>(x.shape(), std::move(out), tape != nullptr, "scale");
  if (tape) {
    tape->record([x, result, factor]() mutable {
      auto g = result.grad();
      auto gx = x.grad_mut();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factor;
    });
  }
  return result;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  std::vector<T> out(x.numel());
  auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(xd[i]);
  Tape<T>* tape = recording_tape({&x});
  auto result = make_output<T>(x.shape(), std::move(out), tape != nullptr, "sigmoid");
  if (tape) {
    tape->record([x, result]() mutable {
      auto g = result.grad();
      auto y = result.data();
      auto gx = x.grad_mut();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (T(1) - y[i]);
    });
  }
  return result;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  std::vector<T> out(x.numel());
  auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] > T(0) ? xd[i] : T(0);
  Tape<T>* tape = recording_tape({&x});
  auto result = make_output<T>(x.shape(), std::move(out), tape != nullptr, "relu");
  if (tape) {
    tape->record([x, result]() mutable {
      auto g = result.grad();
      auto xd = x.data();
      auto gx = x.grad_mut();
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (xd[i] > T(0)) gx[i] += g[i];
      }
    });
  }
  return result;
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  std::vector<T> out(x.numel());
  auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = xd[i];
    out[i] = static_cast<T>(0.5 * v * (1.0 + std::erf(v * kInvSqrt2)));
  }
  Tape<T>* tape = recording_tape({&x});
  auto result = make_output<T>(x.shape(), std::move(out), tape != nullptr, "gelu");
  if (tape) {
    tape->record([x, result]() mutable {
      constexpr double kInvSqrt2Pi = 0.39894228040143267794;
      auto g = result.grad();
      auto xd = x.data();
      auto gx = x.grad_mut();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double v = xd[i];
        const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
        gx[i] += static_cast<T>(g[i] * (cdf + v * pdf));
      }
    });
  }
  return result;
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, double eps) {
  require_matrix(x.shape(), "layer_norm");
  const std::size_t n = x.dim(0), d = x.dim(1);
  if (gamma.numel() != d || beta.numel() != d) {
    throw DimensionError("layer_norm: affine params " + shape_str(gamma.shape()) + "/" +
                         shape_str(beta.shape()) + " incompatible with " + shape_str(x.shape()));
  }
  std::vector<T> out(n * d);
  std::vector<T> xhat(n * d);
  std::vector<T> inv_std(n);
  auto xd = x.data();
  auto gd = gamma.data();
  auto bd = beta.data();
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = xd.data() + i * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[i] = static_cast<T>(is);
    for (std::size_t j = 0; j < d; ++j) {
      const T h = static_cast<T>((row[j] - mean) * is);
      xhat[i * d + j] = h;
      out[i * d + j] = gd[j] * h + bd[j];
    }
  }
  Tape<T>* tape = recording_tape({&x, &gamma, &beta});
  auto result = make_output<T>(x.shape(), std::move(out), tape != nullptr, "layer_norm");
  if (tape) {
    tape->record([x, gamma, beta, result, xhat = std::move(xhat), inv_std = std::move(inv_std), n, d]() mutable {
      auto g = result.grad();
      auto gd = gamma.data();
      if (gamma.requires_grad() || beta.requires_grad()) {
        auto gg = gamma.requires_grad() ? gamma.grad_mut() : std::span<T>();
        auto gb = beta.requires_grad() ? beta.grad_mut() : std::span<T>();
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < d; ++j) {
            if (!gg.empty()) gg[j] += g[i * d + j] * xhat[i * d + j];
            if (!gb.empty()) gb[j] += g[i * d + j];
          }
        }
      }
      if (x.requires_grad()) {
        auto gx = x.grad_mut();
        for (std::size_t i = 0; i < n; ++i) {
          double mean_dh = 0.0, mean_dh_h = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            const double dh = static_cast<double>(g[i * d + j]) * gd[j];
            mean_dh += dh;
            mean_dh_h += dh * xhat[i * d + j];
          }
          mean_dh /= static_cast<double>(d);
          mean_dh_h /= static_cast<double>(d);
          for (std::size_t j = 0; j < d; ++j) {
            const double dh = static_cast<double>(g[i * d + j]) * gd[j];
            gx[i * d + j] += static_cast<T>(inv_std[i] * (dh - mean_dh - xhat[i * d + j] * mean_dh_h));
          }
        }
      }
    });
  }
  return result;
}

template <typename T>
Tensor<T> masked_self_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                                std::span<const std::uint8_t> mask, std::size_t batch,
                                std::size_t seq, std::size_t heads) {
  require_matrix(q.shape(), "attention");
  require_same_shape(q, k, "attention");
  require_same_shape(q, v, "attention");
  const std::size_t width = q.dim(1);
  if (q.dim(0) != batch * seq || mask.size() != batch * seq) {
    throw DimensionError("attention: expected " + std::to_string(batch * seq) + " rows, got " +
                         shape_str(q.shape()) + " with mask of " + std::to_string(mask.size()));
  }
  if (heads == 0 || width % heads != 0) {
    throw DimensionError("attention: width " + std::to_string(width) + " not divisible by " +
                         std::to_string(heads) + " heads");
  }
  const std::size_t hd = width / heads;
  const double scale_factor = 1.0 / std::sqrt(static_cast<double>(hd));
  // probs[((b*heads + h)*seq + i)*seq + j]
  std::vector<T> probs(batch * heads * seq * seq, T(0));
  std::vector<T> out(batch * seq * width, T(0));
  auto qd = q.data();
  auto kd = k.data();
  auto vd = v.data();
  std::vector<double> logits(seq);
  for (std::size_t b = 0; b < batch; ++b) {
    const std::uint8_t* m = mask.data() + b * seq;
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = 0; i < seq; ++i) {
        const T* qi = qd.data() + (b * seq + i) * width + h * hd;
        double max_logit = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < seq; ++j) {
          if (!m[j]) continue;
          const T* kj = kd.data() + (b * seq + j) * width + h * hd;
          double dot = 0.0;
          for (std::size_t t = 0; t < hd; ++t) dot += static_cast<double>(qi[t]) * kj[t];
          logits[j] = dot * scale_factor;
          max_logit = std::max(max_logit, logits[j]);
        }
        double denom = 0.0;
        for (std::size_t j = 0; j < seq; ++j) {
          if (!m[j]) continue;
          logits[j] = std::exp(logits[j] - max_logit);
          denom += logits[j];
        }
        T* p = probs.data() + ((b * heads + h) * seq + i) * seq;
        T* oi = out.data() + (b * seq + i) * width + h * hd;
        for (std::size_t j = 0; j < seq; ++j) {
          if (!m[j]) continue;
          p[j] = static_cast<T>(logits[j] / denom);
          const T* vj = vd.data() + (b * seq + j) * width + h * hd;
          for (std::size_t t = 0; t < hd; ++t) oi[t] += p[j] * vj[t];
        }
      }
    }
  }
  Tape<T>* tape = recording_tape({&q, &k, &v});
  auto result = make_output<T>(q.shape(), std::move(out), tape != nullptr, "attention");
  if (tape) {
    std::vector<std::uint8_t> mask_copy(mask.begin(), mask.end());
    tape->record([q, k, v, result, probs = std::move(probs), mask_copy = std::move(mask_copy), batch, seq,
                  heads, width, hd, scale_factor]() mutable {
      auto g = result.grad();
      auto qd = q.data();
      auto kd = k.data();
      auto vd = v.data();
      auto gq = q.requires_grad() ? q.grad_mut() : std::span<T>();
      auto gk = k.requires_grad() ? k.grad_mut() : std::span<T>();
      auto gv = v.requires_grad() ? v.grad_mut() : std::span<T>();
      std::vector<double> dp(seq);
      for (std::size_t b = 0; b < batch; ++b) {
        const std::uint8_t* m = mask_copy.data() + b * seq;
        for (std::size_t h = 0; h < heads; ++h) {
          for (std::size_t i = 0; i < seq; ++i) {
            const T* p = probs.data() + ((b * heads + h) * seq + i) * seq;
            const T* go = g.data() + (b * seq + i) * width + h * hd;
            double weighted = 0.0;
            for (std::size_t j = 0; j < seq; ++j) {
              if (!m[j]) continue;
              const T* vj = vd.data() + (b * seq + j) * width + h * hd;
              double s = 0.0;
              for (std::size_t t = 0; t < hd; ++t) s += static_cast<double>(go[t]) * vj[t];
              dp[j] = s;
              weighted += p[j] * s;
              if (!gv.empty()) {
                T* gvj = gv.data() + (b * seq + j) * width + h * hd;
                for (std::size_t t = 0; t < hd; ++t) gvj[t] += p[j] * go[t];
              }
            }
            const T* qi = qd.data() + (b * seq + i) * width + h * hd;
            T* gqi = gq.empty() ? nullptr : gq.data() + (b * seq + i) * width + h * hd;
            for (std::size_t j = 0; j < seq; ++j) {
              if (!m[j]) continue;
              const double ds = p[j] * (dp[j] - weighted) * scale_factor;
              const T* kj = kd.data() + (b * seq + j) * width + h * hd;
              if (gqi) {
                for (std::size_t t = 0; t < hd; ++t) gqi[t] += static_cast<T>(ds * kj[t]);
              }
              if (!gk.empty()) {
                T* gkj = gk.data() + (b * seq + j) * width + h * hd;
                for (std::size_t t = 0; t < hd; ++t) gkj[t] += static_cast<T>(ds * qi[t]);
              }
            }
          }
        }
      }
    });
  }
  return result;
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, std::span<const std::size_t> ids) {
  require_matrix(table.shape(), "gather_rows");
  const std::size_t rows = table.dim(0), d = table.dim(1);
  std::vector<T> out(ids.size() * d);
  auto td = table.data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= rows) {
      throw ContractError("gather_rows: id " + std::to_string(ids[i]) + " out of range for " +
                          shape_str(table.shape()));
    }
    std::copy_n(td.data() + ids[i] * d, d, out.data() + i * d);
  }
  Tape<T>* tape = recording_tape({&table});
  auto result = make_output<T>({ids.size(), d}, std::move(out), tape != nullptr, "gather_rows");
  if (tape) {
    tape->record([table, result, ids = std::vector<std::size_t>(ids.begin(), ids.end()), d]() mutable {
      auto g = result.grad();
      auto gt = table.grad_mut();
      for (std::size_t i = 0; i < ids.size(); ++i) {
        T* dst = gt.data() + ids[i] * d;
        const T* src = g.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
      }
    });
  }
  return result;
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t n = parts.front().rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_matrix(p.shape(), "concat_cols");
    if (p.dim(0) != n) {
      throw DimensionError("concat_cols: row mismatch " + shape_str(parts.front().shape()) + " vs " +
                           shape_str(p.shape()));
    }
    total += p.dim(1);
  }
  std::vector<T> out(n * total);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t d = p.dim(1);
    auto pd = p.data();
    for (std::size_t i = 0; i < n; ++i) std::copy_n(pd.data() + i * d, d, out.data() + i * total + offset);
    offset += d;
  }
  Tape<T>* tape = Tape<T>::active();
  bool any = false;
  for (const auto& p : parts) any = any || p.requires_grad();
  if (!any) tape = nullptr;
  auto result = make_output<T>({n, total}, std::move(out), tape != nullptr, "concat_cols");
  if (tape) {
    tape->record([parts, result, n, total]() mutable {
      auto g = result.grad();
      std::size_t offset = 0;
      for (auto& p : parts) {
        const std::size_t d = p.dim(1);
        if (p.requires_grad()) {
          auto gp = p.grad_mut();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) gp[i * d + j] += g[i * total + offset + j];
        }
        offset += d;
      }
    });
  }
  return result;
}

template <typename T>
Tensor<T> row_sum(const Tensor<T>& x) {
  require_matrix(x.shape(), "row_sum");
  const std::size_t n = x.dim(0), d = x.dim(1);
  std::vector<T> out(n, T(0));
  auto xd = x.data();
  for (std::size_t i = 0; i < n; ++i) {
    T s = T(0);
    for (std::size_t j = 0; j < d; ++j) s += xd[i * d + j];
    out[i] = s;
  }
  Tape<T>* tape = recording_tape({&x});
  auto result = make_output<T>({n}, std::move(out), tape != nullptr, "row_sum");
  if (tape) {
    tape->record([x, result, n, d]() mutable {
      auto g = result.grad();
      auto gx = x.grad_mut();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += g[i];
    });
  }
  return result;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  double s = 0.0;
  for (T v : x.data()) s += v;
  Tape<T>* tape = recording_tape({&x});
  auto result = make_output<T>({1}, {static_cast<T>(s)}, tape != nullptr, "sum");
  if (tape) {
    tape->record([x, result]() mutable {
      const T g = result.grad()[0];
      for (auto& gx : x.grad_mut()) gx += g;
    });
  }
  return result;
}

template <typename T>
Tensor<T> bce_loss(const Tensor<T>& p, const Tensor<T>& y) {
  if (p.numel() != y.numel()) {
    throw DimensionError("bce_loss: shape mismatch " + shape_str(p.shape()) + " vs " + shape_str(y.shape()));
  }
  auto pd = p.data();
  auto yd = y.data();
  double total = 0.0;
  for (std::size_t i = 0; i < pd.size(); ++i) {
    const double pi = std::clamp(static_cast<double>(pd[i]), kProbEpsilon, 1.0 - kProbEpsilon);
    const double yi = yd[i];
    total += -(yi * std::log(pi) + (1.0 - yi) * std::log(1.0 - pi));
  }
  Tape<T>* tape = recording_tape({&p});
  auto result = make_output<T>({1}, {static_cast<T>(total)}, tape != nullptr, "bce_loss");
  if (tape) {
    tape->record([p, y, result]() mutable {
      const double g = result.grad()[0];
      auto pd = p.data();
      auto yd = y.data();
      auto gp = p.grad_mut();
      for (std::size_t i = 0; i < pd.size(); ++i) {
        const double pi = pd[i];
        const double denom = std::max(pi * (1.0 - pi), kProbEpsilon);
        gp[i] += static_cast<T>(g * (pi - yd[i]) / denom);
      }
    });
  }
  return result;
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, bool training, std::mt19937_64& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return x;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  std::bernoulli_distribution keep(1.0 - rate);
  std::vector<T> factors(x.numel());
  for (auto& f : factors) f = keep(rng) ? keep_scale : T(0);
  std::vector<T> out(x.numel());
  auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] * factors[i];
  Tape<T>* tape = recording_tape({&x});
  auto result = make_output<T>(x.shape(), std::move(out), tape != nullptr, "dropout");
  if (tape) {
    tape->record([x, result, factors = std::move(factors)]() mutable {
      auto g = result.grad();
      auto gx = x.grad_mut();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factors[i];
    });
  }
  return result;
}

#define LIGHTXML_INSTANTIATE_OPS(T)                                                                        \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                            \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                               \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                               \
  template Tensor<T> scale(const Tensor<T>&, T);                                                            \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                             \
  template Tensor<T> relu(const Tensor<T>&);                                                                \
  template Tensor<T> gelu(const Tensor<T>&);                                                                \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, double);              \
  template Tensor<T> masked_self_attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,            \
                                           std::span<const std::uint8_t>, std::size_t, std::size_t,         \
                                           std::size_t);                                                    \
  template Tensor<T> gather_rows(const Tensor<T>&, std::span<const std::size_t>);                           \
  template Tensor<T> concat_cols(const std::vector<Tensor<T>>&);                                            \
  template Tensor<T> row_sum(const Tensor<T>&);                                                             \
  template Tensor<T> sum(const Tensor<T>&);                                                                 \
  template Tensor<T> bce_loss(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> dropout(const Tensor<T>&, double, bool, std::mt19937_64&);

LIGHTXML_INSTANTIATE_OPS(float)
LIGHTXML_INSTANTIATE_OPS(double)

}  // namespace lightxml::ops
