#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace lightxml {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Numeric mode for training and inference. f64 is the verification mode used by
/// gradient checks and byte-level determinism tests.
enum class Precision { f32, f64 };

/// When enabled, every op output is scanned for NaN/Inf and NumericError is thrown.
/// On by default in debug builds.
void set_check_finite(bool enabled);
bool check_finite_enabled();

/// Dense row-major tensor with shared-handle semantics: copies alias the same storage.
/// Op outputs are treated as immutable; only gradients accumulate in place.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<T> values, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const noexcept { return static_cast<bool>(impl_); }
  const Shape& shape() const { return impl_->shape; }
  std::size_t dim(std::size_t i) const { return impl_->shape.at(i); }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t numel() const { return impl_->data.size(); }
  // Leading dimension, and product of the remaining ones.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<T> data() { return impl_->data; }
  std::span<const T> data() const { return impl_->data; }
  T item() const;
  T at(std::size_t i) const { return impl_->data.at(i); }

  bool requires_grad() const noexcept { return impl_ && impl_->requires_grad; }
  void set_requires_grad(bool on);
  bool has_grad() const noexcept { return impl_ && !impl_->grad.empty(); }
  std::span<T> grad() { return impl_->grad; }
  std::span<const T> grad() const { return impl_->grad; }
  // Allocates the accumulator on first use.
  std::span<T> grad_mut() const;
  void zero_grad();

  // Deep copy of the values; the copy does not require grad.
  Tensor detach_copy() const;

  bool same_as(const Tensor& other) const noexcept { return impl_ == other.impl_; }

 private:
  struct Impl {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Impl> impl_;
};

/// Ordered record of differentiable ops. Backward replays the recorded closures
/// in exact reverse order. A tape is confined to the thread that created it.
template <typename T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::function<void()> backward_fn) { entries_.push_back(std::move(backward_fn)); }
  std::size_t size() const noexcept { return entries_.size(); }
  void clear() { entries_.clear(); }

  /// Seeds d(loss)/d(loss) = 1 and runs every recorded closure once, newest first.
  /// The tape is cleared afterwards. Throws ContractError for a non-scalar loss.
  void backward(Tensor<T>& loss);

  /// Tape that ops record into on this thread, or nullptr.
  static Tape* active() { return active_slot(); }

 private:
  template <typename>
  friend class TapeScope;
  static Tape*& active_slot() {
    thread_local Tape* slot = nullptr;
    return slot;
  }
  std::vector<std::function<void()>> entries_;
};

/// Makes `tape` the active tape for the current scope. A null tape suspends
/// recording (inference, finite-difference probes).
template <typename T>
class TapeScope {
 public:
  explicit TapeScope(Tape<T>* tape) : previous_(Tape<T>::active_slot()) { Tape<T>::active_slot() = tape; }
  explicit TapeScope(Tape<T>& tape) : TapeScope(&tape) {}
  ~TapeScope() { Tape<T>::active_slot() = previous_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape<T>* previous_;
};

template <typename T>
class NoGradScope : public TapeScope<T> {
 public:
  NoGradScope() : TapeScope<T>(nullptr) {}
};

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace lightxml
