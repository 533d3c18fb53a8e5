#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lightxml/tensor.hpp"

namespace lightxml {

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> tensor;
  // Biases and normalization weights; skipped by weight decay unless overridden.
  bool decay_exempt = false;
  bool trainable = true;
};

/// Ordered, named collection of trainable tensors. Order is registration order and
/// is what checkpoints and optimizer state are keyed on.
template <typename T>
class ParameterSet {
 public:
  Tensor<T> add(std::string name, Tensor<T> tensor, bool decay_exempt = false);

  std::vector<Parameter<T>>& items() { return params_; }
  const std::vector<Parameter<T>>& items() const { return params_; }
  std::size_t size() const { return params_.size(); }

  Parameter<T>* find(const std::string& name);
  const Parameter<T>* find(const std::string& name) const;

  /// Total number of scalar values across the set.
  std::size_t scalar_count() const;
  /// Scalar count of parameters whose name starts with `prefix`.
  std::size_t scalar_count(const std::string& prefix) const;

  void zero_grad();
  /// Marks every parameter with the given name prefix as (non-)trainable.
  void set_trainable(const std::string& prefix, bool trainable);

 private:
  std::vector<Parameter<T>> params_;
};

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
template <typename T>
double clip_grad_norm(ParameterSet<T>& params, double max_norm);

struct AdamWConfig {
  double learning_rate = 1e-4;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Applies weight decay to biases and normalization weights as well.
  bool decay_bias_and_norm = false;
};

/// AdamW with bias-corrected moments and decoupled weight decay:
///   w <- w - lr * (m_hat / (sqrt(v_hat) + eps) + wd * w)
template <typename T>
class AdamW {
 public:
  AdamW() = default;
  explicit AdamW(AdamWConfig config) : config_(config) {}

  const AdamWConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }

  /// One update of every trainable parameter. Throws TrainingError when a trainable
  /// parameter has no gradient accumulator.
  void step(ParameterSet<T>& params);

  std::uint64_t step_count() const { return step_; }
  // Moment buffers, parallel to the parameter set once the first step ran.
  const std::vector<std::vector<T>>& first_moments() const { return m_; }
  const std::vector<std::vector<T>>& second_moments() const { return v_; }
  void restore(std::uint64_t step, std::vector<std::vector<T>> m, std::vector<std::vector<T>> v);

  bool is_decayed(const Parameter<T>& p) const { return config_.decay_bias_and_norm || !p.decay_exempt; }

 private:
  AdamWConfig config_;
  std::uint64_t step_ = 0;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
};

/// Stochastic weight averaging: running arithmetic mean of parameter snapshots,
/// accumulated in double precision.
template <typename T>
class SwaState {
 public:
  SwaState() = default;
  explicit SwaState(int start_epoch) : start_epoch_(start_epoch) {}

  int start_epoch() const { return start_epoch_; }
  std::size_t count() const { return count_; }
  bool empty() const { return count_ == 0; }

  /// avg <- avg + (current - avg) / (n + 1). Throws ContractError on a layout change.
  void update(const ParameterSet<T>& params);
  /// Updates only when `epoch >= start_epoch`. Returns whether a snapshot was taken.
  bool maybe_update(int epoch, const ParameterSet<T>& params);

  const std::vector<std::vector<double>>& average() const { return average_; }
  /// Copies the averaged values into `params` (same layout as the snapshots).
  void copy_to(ParameterSet<T>& params) const;
  void restore(std::size_t count, std::vector<std::vector<double>> average);

 private:
  int start_epoch_ = 1;
  std::size_t count_ = 0;
  std::vector<std::vector<double>> average_;
};

extern template class ParameterSet<float>;
extern template class ParameterSet<double>;
extern template class AdamW<float>;
extern template class AdamW<double>;
extern template class SwaState<float>;
extern template class SwaState<double>;

}  // namespace lightxml
