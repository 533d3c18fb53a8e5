#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lightxml/optim.hpp"
#include "lightxml/tensor.hpp"

namespace lightxml {

struct GradCheckReport {
  // max over all checked scalars of |analytic - numeric| / max(1, |analytic|)
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

/// Compares reverse-mode gradients of `loss_fn` against central differences with step
/// `h` for every scalar of every parameter. `loss_fn` must rebuild the graph from the
/// current parameter values on each call and be deterministic. Runs in 64-bit only.
/// Throws ContractError when the loss is not a scalar.
GradCheckReport grad_check(const std::function<Tensor<double>()>& loss_fn, ParameterSet<double>& params,
                           double h = 1e-5);

/// Same, for loose tensors instead of a named parameter set.
GradCheckReport grad_check(const std::function<Tensor<double>()>& loss_fn, std::vector<Tensor<double>> inputs,
                           double h = 1e-5);

}  // namespace lightxml
