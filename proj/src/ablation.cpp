#include "lightxml/ablation.hpp"

#include <cstdio>
#include <sstream>

#include "lightxml/errors.hpp"

namespace lightxml {

const AblationRun& AblationResult::find(const std::string& name) const {
  for (const auto& r : runs)
    if (r.name == name) return r;
  throw ContractError("no ablation run named " + name);
}

double AblationResult::half_epoch_loss(const std::string& name) const {
  const auto& h = find(name).history;
  if (h.empty()) throw ContractError("ablation run " + name + " has no epochs");
  const std::size_t idx = static_cast<std::size_t>(std::max(1, epochs / 2)) - 1;
  return h.at(std::min(idx, h.size() - 1)).total();
}

std::string AblationResult::table() const {
  std::ostringstream os;
  char line[128];
  std::snprintf(line, sizeof line, "%-8s %-8s %6s %8s %8s %8s\n", "variant", "sampling", "layers", "P@1", "P@3",
                "P@5");
  os << line;
  for (const auto& r : runs) {
    std::snprintf(line, sizeof line, "%-8s %-8s %6zu %8.4f %8.4f %8.4f\n", r.name.c_str(),
                  to_string(r.sampling).c_str(), r.concat_layers, r.report.p1, r.report.p3, r.report.p5);
    os << line;
  }
  return os.str();
}

std::string AblationResult::loss_csv(const std::vector<std::string>& variants) const {
  std::ostringstream os;
  os.precision(8);
  os << "variant,epoch,loss_g,loss_d,total\n";
  for (const auto& name : variants) {
    for (const auto& m : find(name).history)
      os << name << ',' << m.epoch << ',' << m.loss_g << ',' << m.loss_d << ',' << m.total() << '\n';
  }
  return os.str();
}

std::string AblationResult::claims() const {
  std::ostringstream os;
  os.precision(6);
  const auto& d = find("D");
  const auto& s = find("S");
  os << "dynamic_p1=" << d.report.p1 << " static_p1=" << s.report.p1
     << " dynamic_ge_static=" << (d.report.p1 >= s.report.p1 ? "yes" : "no")
     << " within_tolerance=" << (d.report.p1 >= s.report.p1 - 0.02 ? "yes" : "no") << '\n';
  const double multi = half_epoch_loss("D");
  const double single = half_epoch_loss("concat1");
  os << "half_epoch=" << std::max(1, epochs / 2) << " multi_layer_loss=" << multi << " single_layer_loss=" << single
     << " multi_layer_lower=" << (multi < single ? "yes" : "no") << '\n';
  return os.str();
}

template <typename T>
AblationResult run_ablation(const TrainConfig& base, const XmcDataset& train, const XmcDataset& test,
                            const ClusterMap& clusters, const std::function<void(const std::string&)>& log) {
  AblationResult result;
  result.epochs = base.epochs;
  struct Variant {
    const char* name;
    SamplingMode sampling;
    std::size_t concat_layers;
  };
  const std::vector<Variant> variants = {
      {"D", SamplingMode::dynamic, base.resolved_concat_layers()},
      {"S", SamplingMode::stat, base.resolved_concat_layers()},
      {"concat1", SamplingMode::dynamic, 1},
  };
  for (const auto& v : variants) {
    TrainConfig config = base;
    config.sampling = v.sampling;
    config.concat_layers = v.concat_layers;
    if (log) log("ablation variant " + std::string(v.name));
    Trainer<T> trainer(config, train, clusters, nullptr);
    trainer.on_log = log;
    AblationRun run;
    run.name = v.name;
    run.sampling = v.sampling;
    run.concat_layers = v.concat_layers;
    run.history = trainer.train();
    if (config.weights != WeightSource::last) trainer.apply_swa();
    run.report = evaluate(trainer.bundle(), test, trainer.b_top(), config.eval_batch_size);
    result.runs.push_back(std::move(run));
  }
  return result;
}

template AblationResult run_ablation<float>(const TrainConfig&, const XmcDataset&, const XmcDataset&,
                                            const ClusterMap&, const std::function<void(const std::string&)>&);
template AblationResult run_ablation<double>(const TrainConfig&, const XmcDataset&, const XmcDataset&,
                                             const ClusterMap&, const std::function<void(const std::string&)>&);

}  // namespace lightxml
