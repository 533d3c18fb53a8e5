#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "lightxml/encoder.hpp"
#include "lightxml/optim.hpp"
#include "lightxml/rank_head.hpp"
#include "lightxml/tensor.hpp"

namespace lightxml {

inline constexpr const char* kToolVersion = "0.1.0";

enum class SamplingMode { dynamic, stat };
enum class WeightSource { automatic, swa, last };

/// Resolved training configuration. Zero / negative sentinels are resolved by
/// `resolve()` against the dataset.
struct TrainConfig {
  std::string preset;
  int epochs = 20;
  std::size_t batch_size = 16;
  std::size_t b_top = 0;  // 0: derived from the mean label count
  std::size_t embed_dim = 300;
  std::size_t cluster_size = 1;
  std::size_t max_len = 512;
  double learning_rate = 1e-4;
  double weight_decay = 0.01;
  bool decay_bias_norm = false;
  double rep_dropout = 0.5;
  double block_dropout = 0.1;
  SamplingMode sampling = SamplingMode::dynamic;
  int static_warmup_epochs = -1;  // -1: half of the epochs
  int swa_start_epoch = -1;       // -1: epochs / 2 + 1; 0 disables SWA
  std::uint64_t seed = 1;
  double clip_norm = 5.0;  // 0 disables clipping
  std::size_t hidden = 64;
  std::size_t layers = 5;
  std::size_t heads = 4;
  std::size_t ffn = 256;
  std::size_t concat_layers = 0;  // 0: min(5, layers)
  std::size_t min_freq = 1;
  Bottleneck bottleneck = Bottleneck::sigmoid;
  bool invert_rank_targets = false;
  Precision precision = Precision::f32;
  WeightSource weights = WeightSource::automatic;
  std::size_t eval_batch_size = 64;
  bool checkpoint_every_epoch = true;

  /// Throws ConfigError on out-of-range values.
  void validate() const;

  std::size_t resolved_concat_layers() const;
  int resolved_static_warmup() const;
  int resolved_swa_start() const;

  EncoderConfig encoder_config(std::size_t vocab_size) const;
};

/// Table 1 hyperparameters. Names: eurlex-4k, amazoncat-13k, wiki10-31k, wiki-500k,
/// amazon-670k. Throws ConfigError for an unknown name.
void apply_preset(TrainConfig& config, const std::string& name);
std::vector<std::string> preset_names();
/// Label count of the benchmark a preset was tuned for.
std::size_t preset_num_labels(const std::string& name);

using KeyValues = std::map<std::string, std::string>;

/// `key=value` lines; blank lines and lines starting with '#' are skipped. Throws
/// ParseError on a line without '='.
KeyValues parse_key_values(std::istream& in);
KeyValues load_key_values(const std::filesystem::path& path);
void save_key_values(const std::filesystem::path& path, const KeyValues& kv);

/// Applies every key of `kv` to `config`. Throws ConfigError on an unknown key or an
/// unparsable value.
void apply_key_values(TrainConfig& config, const KeyValues& kv);
KeyValues to_key_values(const TrainConfig& config);

std::string to_string(SamplingMode mode);
std::string to_string(WeightSource source);
std::string to_string(Bottleneck b);
std::string to_string(Precision p);

/// Everything needed to reproduce an artifact.
struct RunManifest {
  std::string command;
  TrainConfig config;
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> artifacts;
  std::map<std::string, std::string> notes;
  std::string tool_version = kToolVersion;

  void save(const std::filesystem::path& path) const;
  static RunManifest load(const std::filesystem::path& path);
};

}  // namespace lightxml
