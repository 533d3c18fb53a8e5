#include "lightxml/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "lightxml/errors.hpp"

namespace lightxml {

GradCheckReport grad_check(const std::function<Tensor<double>()>& loss_fn, ParameterSet<double>& params,
                           double h) {
  params.zero_grad();
  Tape<double> tape;
  Tensor<double> loss;
  {
    TapeScope<double> scope(tape);
    loss = loss_fn();
  }
  if (!loss.defined() || loss.numel() != 1) throw ContractError("grad_check: loss must be a scalar");
  tape.backward(loss);

  GradCheckReport report;
  NoGradScope<double> no_grad;
  for (auto& p : params.items()) {
    if (!p.trainable) continue;
    std::vector<double> analytic(p.tensor.grad().begin(), p.tensor.grad().end());
    auto w = p.tensor.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double saved = w[i];
      w[i] = saved + h;
      const double up = loss_fn().item();
      w[i] = saved - h;
      const double down = loss_fn().item();
      w[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
      ++report.checked;
      if (report.worst_param.empty() || err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_param = p.name;
        report.worst_index = i;
        report.worst_analytic = analytic[i];
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

GradCheckReport grad_check(const std::function<Tensor<double>()>& loss_fn, std::vector<Tensor<double>> inputs,
                           double h) {
  ParameterSet<double> params;
  for (std::size_t i = 0; i < inputs.size(); ++i) params.add("input." + std::to_string(i), inputs[i]);
  return grad_check(loss_fn, params, h);
}

}  // namespace lightxml
