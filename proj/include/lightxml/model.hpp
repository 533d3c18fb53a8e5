#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "lightxml/checkpoint.hpp"
#include "lightxml/config.hpp"
#include "lightxml/encoder.hpp"
#include "lightxml/label_cluster.hpp"
#include "lightxml/optim.hpp"
#include "lightxml/rank_head.hpp"
#include "lightxml/recall_head.hpp"

namespace lightxml {

struct ModelDims {
  EncoderConfig encoder;
  std::size_t num_clusters = 0;
  std::size_t num_labels = 0;
  std::size_t embed_dim = 0;
  Bottleneck bottleneck = Bottleneck::sigmoid;

  bool operator==(const ModelDims&) const = default;
};

/// Encoder, generator and discriminator over one parameter set, together with the
/// cluster map and optimizer / SWA state. Parameters register in that order under
/// the prefixes "encoder.", "generator." and "discriminator.".
template <typename T>
class ModelBundle {
 public:
  /// Throws ConfigError when the cluster map disagrees with `dims`.
  ModelBundle(const ModelDims& dims, ClusterMap clusters, std::uint64_t init_seed, AdamWConfig optim = {},
              int swa_start_epoch = 1);
  ModelBundle(const ModelBundle&) = delete;
  ModelBundle& operator=(const ModelBundle&) = delete;

  const ModelDims& dims() const { return dims_; }
  const ClusterMap& clusters() const { return clusters_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }
  const Encoder<T>& encoder() const { return encoder_; }
  const RecallHead<T>& generator() const { return generator_; }
  const RankHead<T>& discriminator() const { return discriminator_; }
  AdamW<T>& optimizer() { return optimizer_; }
  const AdamW<T>& optimizer() const { return optimizer_; }
  SwaState<T>& swa() { return swa_; }
  const SwaState<T>& swa() const { return swa_; }

  int epoch() const { return epoch_; }
  void set_epoch(int epoch) { epoch_ = epoch; }
  // True when the live parameters were loaded from SWA averages.
  bool swa_weights_loaded() const { return swa_weights_loaded_; }
  void set_swa_weights_loaded(bool on) { swa_weights_loaded_ = on; }

  /// Parameters, SWA averages (".swa"), optimizer moments and metadata.
  std::vector<NamedArray> to_records() const;
  void save(const std::filesystem::path& path) const;

 private:
  ModelDims dims_;
  ClusterMap clusters_;
  ParameterSet<T> params_;
  std::mt19937_64 init_rng_;
  Encoder<T> encoder_;
  RecallHead<T> generator_;
  RankHead<T> discriminator_;
  AdamW<T> optimizer_;
  SwaState<T> swa_;
  int epoch_ = 0;
  bool swa_weights_loaded_ = false;
};

/// Dimensions recorded in a checkpoint.
ModelDims read_model_dims(const std::vector<NamedArray>& records);

/// Rebuilds a bundle from checkpoint records. `weights` selects the SWA average
/// (automatic: when present) or the last parameters; optimizer state is restored when
/// present. Throws ConfigError when the records disagree with `clusters`.
template <typename T>
std::unique_ptr<ModelBundle<T>> load_bundle(const std::vector<NamedArray>& records, ClusterMap clusters,
                                            WeightSource weights = WeightSource::automatic);
template <typename T>
std::unique_ptr<ModelBundle<T>> load_bundle(const std::filesystem::path& checkpoint, ClusterMap clusters,
                                            WeightSource weights = WeightSource::automatic);

extern template class ModelBundle<float>;
extern template class ModelBundle<double>;

}  // namespace lightxml
