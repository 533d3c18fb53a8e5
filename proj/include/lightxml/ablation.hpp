#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lightxml/config.hpp"
#include "lightxml/label_cluster.hpp"
#include "lightxml/predictor.hpp"
#include "lightxml/trainer.hpp"

namespace lightxml {

struct AblationRun {
  std::string name;  // "D", "S", "concat5", "concat1"
  SamplingMode sampling = SamplingMode::dynamic;
  std::size_t concat_layers = 0;
  EvalReport report;
  std::vector<EpochMetrics> history;
};

/// Paired runs sharing seed, data and cluster map. D doubles as the multi-layer run.
struct AblationResult {
  std::vector<AblationRun> runs;
  int epochs = 0;

  const AblationRun& find(const std::string& name) const;
  /// Training loss (L_g + L_d) of a run at epoch max(1, epochs / 2).
  double half_epoch_loss(const std::string& name) const;
  /// Rows D and S, then the layer rows, with P@{1,3,5} columns.
  std::string table() const;
  /// variant,epoch,loss_g,loss_d,total rows for the given variants.
  std::string loss_csv(const std::vector<std::string>& variants) const;
  /// Summary lines stating how the runs compare.
  std::string claims() const;
};

/// Trains D (dynamic, concat_layers from `base`), S (static) and a single-layer
/// representation variant, and evaluates each on `test` with its final weights
/// (SWA when available).
template <typename T>
AblationResult run_ablation(const TrainConfig& base, const XmcDataset& train, const XmcDataset& test,
                            const ClusterMap& clusters, const std::function<void(const std::string&)>& log = {});

}  // namespace lightxml
