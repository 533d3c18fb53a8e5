#include "lightxml/optim.hpp"

#include <cmath>

#include "lightxml/errors.hpp"

namespace lightxml {

template <typename T>
Tensor<T> ParameterSet<T>::add(std::string name, Tensor<T> tensor, bool decay_exempt) {
  if (find(name)) throw ContractError("duplicate parameter name: " + name);
  tensor.set_requires_grad(true);
  params_.push_back({std::move(name), tensor, decay_exempt, true});
  return tensor;
}

template <typename T>
Parameter<T>* ParameterSet<T>::find(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

template <typename T>
const Parameter<T>* ParameterSet<T>::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

template <typename T>
std::size_t ParameterSet<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

template <typename T>
std::size_t ParameterSet<T>::scalar_count(const std::string& prefix) const {
  std::size_t n = 0;
  for (const auto& p : params_)
    if (p.name.starts_with(prefix)) n += p.tensor.numel();
  return n;
}

template <typename T>
void ParameterSet<T>::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

template <typename T>
void ParameterSet<T>::set_trainable(const std::string& prefix, bool trainable) {
  for (auto& p : params_)
    if (p.name.starts_with(prefix)) p.trainable = trainable;
}

template <typename T>
double clip_grad_norm(ParameterSet<T>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params.items()) {
    if (!p.trainable || !p.tensor.has_grad()) continue;
    for (T g : p.tensor.grad()) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const T factor = static_cast<T>(max_norm / norm);
    for (auto& p : params.items()) {
      if (!p.trainable || !p.tensor.has_grad()) continue;
      for (T& g : p.tensor.grad()) g *= factor;
    }
  }
  return norm;
}

template <typename T>
void AdamW<T>::step(ParameterSet<T>& params) {
  auto& items = params.items();
  if (m_.size() != items.size()) {
    m_.assign(items.size(), {});
    v_.assign(items.size(), {});
    for (std::size_t i = 0; i < items.size(); ++i) {
      m_[i].assign(items[i].tensor.numel(), T(0));
      v_[i].assign(items[i].tensor.numel(), T(0));
    }
  }
  for (const auto& p : items) {
    if (p.trainable && !p.tensor.has_grad()) throw TrainingError("parameter '" + p.name + "' has no gradient");
  }
  ++step_;
  const double lr = config_.learning_rate;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto& p = items[i];
    if (!p.trainable) continue;
    if (m_[i].size() != p.tensor.numel()) throw ContractError("optimizer state does not match '" + p.name + "'");
    const double wd = is_decayed(p) ? config_.weight_decay : 0.0;
    auto w = p.tensor.data();
    auto g = p.tensor.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g[j];
      const double mj = b1 * m[j] + (1.0 - b1) * gj;
      const double vj = b2 * v[j] + (1.0 - b2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double update = (mj / bc1) / (std::sqrt(vj / bc2) + config_.epsilon);
      w[j] = static_cast<T>(w[j] - lr * (update + wd * w[j]));
    }
  }
}

template <typename T>
void AdamW<T>::restore(std::uint64_t step, std::vector<std::vector<T>> m, std::vector<std::vector<T>> v) {
  if (m.size() != v.size()) throw ContractError("optimizer moment buffers disagree");
  step_ = step;
  m_ = std::move(m);
  v_ = std::move(v);
}

template <typename T>
void SwaState<T>::update(const ParameterSet<T>& params) {
  const auto& items = params.items();
  if (count_ == 0) {
    average_.assign(items.size(), {});
    for (std::size_t i = 0; i < items.size(); ++i) {
      auto d = items[i].tensor.data();
      average_[i].assign(d.begin(), d.end());
    }
    count_ = 1;
    return;
  }
  if (average_.size() != items.size()) throw ContractError("SWA snapshot layout changed");
  const double n1 = static_cast<double>(count_ + 1);
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto d = items[i].tensor.data();
    auto& avg = average_[i];
    if (avg.size() != d.size()) throw ContractError("SWA snapshot layout changed at '" + items[i].name + "'");
    for (std::size_t j = 0; j < d.size(); ++j) avg[j] += (static_cast<double>(d[j]) - avg[j]) / n1;
  }
  ++count_;
}

template <typename T>
bool SwaState<T>::maybe_update(int epoch, const ParameterSet<T>& params) {
  if (epoch < start_epoch_) return false;
  update(params);
  return true;
}

template <typename T>
void SwaState<T>::copy_to(ParameterSet<T>& params) const {
  auto& items = params.items();
  if (average_.size() != items.size()) throw ContractError("SWA average does not match parameter set");
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto d = items[i].tensor.data();
    if (d.size() != average_[i].size()) throw ContractError("SWA average does not match '" + items[i].name + "'");
    for (std::size_t j = 0; j < d.size(); ++j) d[j] = static_cast<T>(average_[i][j]);
  }
}

template <typename T>
void SwaState<T>::restore(std::size_t count, std::vector<std::vector<double>> average) {
  count_ = count;
  average_ = std::move(average);
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template class AdamW<float>;
template class AdamW<double>;
template class SwaState<float>;
template class SwaState<double>;
template double clip_grad_norm(ParameterSet<float>&, double);
template double clip_grad_norm(ParameterSet<double>&, double);

}  // namespace lightxml
