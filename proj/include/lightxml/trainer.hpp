#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "lightxml/config.hpp"
#include "lightxml/corpus.hpp"
#include "lightxml/grad_check.hpp"
#include "lightxml/model.hpp"
#include "lightxml/predictor.hpp"
#include "lightxml/recall_head.hpp"

namespace lightxml {

struct LossOptions {
  bool use_recall = true;
  bool use_rank = true;
  // Encoder runs without recording; only the heads receive gradients.
  bool freeze_encoder = false;
  bool invert_rank_targets = false;
};

template <typename T>
struct JointLoss {
  Tensor<T> loss_g;
  Tensor<T> loss_d;
  // Sum of the enabled terms.
  Tensor<T> total;
  CandidateSet candidates;
  bool sampled = false;
};

/// L = L_g + L_d on one batch. Candidates are sampled from the current generator with
/// positive injection unless `fixed` is given.
template <typename T>
JointLoss<T> joint_loss(const ModelBundle<T>& bundle, const Batch& batch, std::size_t b_top, bool training,
                        std::mt19937_64& rng, const CandidateSet* fixed = nullptr, const LossOptions& options = {});

/// Candidate sets frozen from one generator snapshot, indexed by document.
struct StaticCandidateCache {
  std::vector<Candidates> rows;
  std::string snapshot;

  /// Candidates for the documents of `batch`. Throws ConfigError on an index outside
  /// the cache.
  CandidateSet lookup(const Batch& batch) const;
};

/// Throws ConfigError when the dataset is empty.
template <typename T>
StaticCandidateCache build_static_cache(const ModelBundle<T>& bundle, const XmcDataset& dataset, std::size_t b_top,
                                        std::size_t batch_size, std::string snapshot);

struct StepStats {
  double loss_g = 0.0;
  double loss_d = 0.0;
  double total = 0.0;
  double grad_norm = 0.0;
};

struct EpochMetrics {
  int epoch = 0;
  std::string phase;
  double loss_g = 0.0;
  double loss_d = 0.0;
  std::optional<EvalReport> dev;
  double wall_ms = 0.0;

  double total() const { return loss_g + loss_d; }
  /// One key=value record.
  std::string to_line() const;
};

/// Joint training of encoder, generator and discriminator.
///
/// Dynamic mode resamples candidates from the live generator at every step. Static
/// mode trains encoder and generator on L_g alone for the warm-up epochs, then
/// freezes the encoder, caches every instance's candidates once, and trains both
/// heads on cached candidates.
template <typename T>
class Trainer {
 public:
  /// Throws ConfigError when the dataset and cluster map disagree on L, or the dataset
  /// has no vocabulary.
  Trainer(TrainConfig config, const XmcDataset& train, ClusterMap clusters, const XmcDataset* dev = nullptr);

  ModelBundle<T>& bundle() { return *bundle_; }
  const ModelBundle<T>& bundle() const { return *bundle_; }
  const TrainConfig& config() const { return config_; }
  std::size_t b_top() const { return b_top_; }

  /// One optimizer step on `batch`. Throws TrainingError on a non-finite loss.
  StepStats train_step(const Batch& batch, const LossOptions& options = {});

  /// Runs the configured epochs. With a non-empty `run_dir`, writes per-epoch and
  /// final checkpoints plus metrics.log there.
  std::vector<EpochMetrics> train(const std::filesystem::path& run_dir = {});

  /// Copies the SWA average into the live parameters. No-op when SWA is empty.
  void apply_swa();

  void build_static_cache();
  const StaticCandidateCache* static_cache() const { return cache_ ? &*cache_ : nullptr; }
  std::uint64_t sample_calls() const { return sample_calls_; }
  std::uint64_t steps() const { return bundle_->optimizer().step_count(); }

  // Progress messages and per-epoch metrics.
  std::function<void(const std::string&)> on_log;
  std::function<void(const EpochMetrics&)> on_epoch;

 private:
  void log(const std::string& message) const;
  EpochMetrics run_epoch(int epoch, const std::string& phase, const LossOptions& options);

  TrainConfig config_;
  const XmcDataset* train_;
  const XmcDataset* dev_;
  std::unique_ptr<ModelBundle<T>> bundle_;
  std::size_t b_top_ = 0;
  std::mt19937_64 dropout_rng_;
  std::optional<StaticCandidateCache> cache_;
  std::uint64_t sample_calls_ = 0;
};

/// Mean number of labels per document.
double mean_labels(const XmcDataset& dataset);

/// b_top from the config, or the default rule when the config leaves it at 0.
std::size_t resolve_b_top(const TrainConfig& config, const XmcDataset& train, const ClusterMap& clusters);

/// Finite-difference check of the joint loss on a micro-model (vocab 50, l=8,
/// 2 layers, 2 heads, K=4, L=8, embed_dim=4, batch 2 with one padded row) in 64-bit.
/// Candidates are sampled once and held fixed so the loss is smooth in the parameters.
GradCheckReport micro_joint_grad_check(std::uint64_t seed, double h = 1e-5);

extern template class Trainer<float>;
extern template class Trainer<double>;

}  // namespace lightxml
