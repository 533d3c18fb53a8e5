#include "lightxml/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "lightxml/errors.hpp"

namespace lightxml {

namespace {

template <typename V>
V parse_number(const std::string& key, const std::string& text) {
  V value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError("invalid value for " + key + ": '" + text + "'");
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("invalid boolean for " + key + ": '" + text + "'");
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

struct Field {
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

template <typename V>
Field number_field(V TrainConfig::*member, const char* key) {
  return {[member](const TrainConfig& c) {
            if constexpr (std::is_floating_point_v<V>) {
              return format_double(c.*member);
            } else {
              return std::to_string(c.*member);
            }
          },
          [member, key](TrainConfig& c, const std::string& v) { c.*member = parse_number<V>(key, v); }};
}

Field bool_field(bool TrainConfig::*member, const char* key) {
  return {[member](const TrainConfig& c) { return std::string(c.*member ? "true" : "false"); },
          [member, key](TrainConfig& c, const std::string& v) { c.*member = parse_bool(key, v); }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
    t["preset"] = {[](const TrainConfig& c) { return c.preset; },
                   [](TrainConfig& c, const std::string& v) { c.preset = v; }};
    t["epochs"] = number_field(&TrainConfig::epochs, "epochs");
    t["batch_size"] = number_field(&TrainConfig::batch_size, "batch_size");
    t["b_top"] = number_field(&TrainConfig::b_top, "b_top");
    t["embed_dim"] = number_field(&TrainConfig::embed_dim, "embed_dim");
    t["cluster_size"] = number_field(&TrainConfig::cluster_size, "cluster_size");
    t["max_len"] = number_field(&TrainConfig::max_len, "max_len");
    t["learning_rate"] = number_field(&TrainConfig::learning_rate, "learning_rate");
    t["weight_decay"] = number_field(&TrainConfig::weight_decay, "weight_decay");
    t["decay_bias_norm"] = bool_field(&TrainConfig::decay_bias_norm, "decay_bias_norm");
    t["rep_dropout"] = number_field(&TrainConfig::rep_dropout, "rep_dropout");
    t["block_dropout"] = number_field(&TrainConfig::block_dropout, "block_dropout");
    t["sampling"] = {[](const TrainConfig& c) { return to_string(c.sampling); },
                     [](TrainConfig& c, const std::string& v) {
                       if (v == "dynamic") c.sampling = SamplingMode::dynamic;
                       else if (v == "static") c.sampling = SamplingMode::stat;
                       else throw ConfigError("sampling must be dynamic or static, got '" + v + "'");
                     }};
    t["static_warmup_epochs"] = number_field(&TrainConfig::static_warmup_epochs, "static_warmup_epochs");
    t["swa_start_epoch"] = number_field(&TrainConfig::swa_start_epoch, "swa_start_epoch");
    t["seed"] = number_field(&TrainConfig::seed, "seed");
    t["clip_norm"] = number_field(&TrainConfig::clip_norm, "clip_norm");
    t["hidden"] = number_field(&TrainConfig::hidden, "hidden");
    t["layers"] = number_field(&TrainConfig::layers, "layers");
    t["heads"] = number_field(&TrainConfig::heads, "heads");
    t["ffn"] = number_field(&TrainConfig::ffn, "ffn");
    t["concat_layers"] = number_field(&TrainConfig::concat_layers, "concat_layers");
    t["min_freq"] = number_field(&TrainConfig::min_freq, "min_freq");
    t["bottleneck"] = {[](const TrainConfig& c) { return to_string(c.bottleneck); },
                       [](TrainConfig& c, const std::string& v) {
                         if (v == "sigmoid") c.bottleneck = Bottleneck::sigmoid;
                         else if (v == "relu") c.bottleneck = Bottleneck::relu;
                         else throw ConfigError("bottleneck must be sigmoid or relu, got '" + v + "'");
                       }};
    t["invert_rank_targets"] = bool_field(&TrainConfig::invert_rank_targets, "invert_rank_targets");
    t["precision"] = {[](const TrainConfig& c) { return to_string(c.precision); },
                      [](TrainConfig& c, const std::string& v) {
                        if (v == "f32") c.precision = Precision::f32;
                        else if (v == "f64") c.precision = Precision::f64;
                        else throw ConfigError("precision must be f32 or f64, got '" + v + "'");
                      }};
    t["weights"] = {[](const TrainConfig& c) { return to_string(c.weights); },
                    [](TrainConfig& c, const std::string& v) {
                      if (v == "auto") c.weights = WeightSource::automatic;
                      else if (v == "swa") c.weights = WeightSource::swa;
                      else if (v == "last") c.weights = WeightSource::last;
                      else throw ConfigError("weights must be auto, swa or last, got '" + v + "'");
                    }};
    t["eval_batch_size"] = number_field(&TrainConfig::eval_batch_size, "eval_batch_size");
    t["checkpoint_every_epoch"] = bool_field(&TrainConfig::checkpoint_every_epoch, "checkpoint_every_epoch");
    return t;
  }();
  return table;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size == 0 || eval_batch_size == 0) throw ConfigError("batch size must be >= 1");
  if (embed_dim == 0) throw ConfigError("embed_dim must be >= 1");
  if (cluster_size == 0) throw ConfigError("cluster_size must be >= 1");
  if (max_len < 2) throw ConfigError("max_len must be >= 2");
  if (learning_rate < 0.0 || weight_decay < 0.0) throw ConfigError("learning rate and weight decay must be >= 0");
  if (clip_norm < 0.0) throw ConfigError("clip_norm must be >= 0");
  if (swa_start_epoch < -1) throw ConfigError("swa_start_epoch must be -1, 0 or a 1-based epoch");
  if (static_warmup_epochs < -1) throw ConfigError("static_warmup_epochs must be -1 or >= 0");
  if (concat_layers > layers) throw ConfigError("concat_layers exceeds layers");
  encoder_config(1).validate();
}

std::size_t TrainConfig::resolved_concat_layers() const {
  return concat_layers == 0 ? std::min<std::size_t>(5, layers) : concat_layers;
}

int TrainConfig::resolved_static_warmup() const {
  return static_warmup_epochs < 0 ? epochs / 2 : std::min(static_warmup_epochs, epochs);
}

int TrainConfig::resolved_swa_start() const { return swa_start_epoch < 0 ? epochs / 2 + 1 : swa_start_epoch; }

EncoderConfig TrainConfig::encoder_config(std::size_t vocab_size) const {
  EncoderConfig e;
  e.vocab_size = vocab_size;
  e.hidden = hidden;
  e.layers = layers;
  e.heads = heads;
  e.ffn = ffn;
  e.max_positions = max_len;
  e.block_dropout = block_dropout;
  e.rep_dropout = rep_dropout;
  e.concat_layers = resolved_concat_layers();
  return e;
}

void apply_preset(TrainConfig& config, const std::string& name) {
  struct Row {
    int epochs;
    std::size_t batch, embed_dim, cluster_size, max_len;
  };
  // embed_dim 0: the preset leaves the default untouched.
  static const std::map<std::string, Row> rows = {
      {"eurlex-4k", {20, 16, 0, 1, 512}},   {"amazoncat-13k", {5, 16, 0, 1, 512}},
      {"wiki10-31k", {30, 16, 0, 1, 512}},  {"wiki-500k", {10, 32, 500, 60, 128}},
      {"amazon-670k", {15, 16, 400, 80, 128}},
  };
  auto it = rows.find(name);
  if (it == rows.end()) throw ConfigError("unknown preset '" + name + "'");
  const Row& r = it->second;
  config.preset = name;
  config.epochs = r.epochs;
  config.batch_size = r.batch;
  if (r.embed_dim) config.embed_dim = r.embed_dim;
  config.cluster_size = r.cluster_size;
  config.max_len = r.max_len;
}

std::vector<std::string> preset_names() {
  return {"eurlex-4k", "amazoncat-13k", "wiki10-31k", "wiki-500k", "amazon-670k"};
}

std::size_t preset_num_labels(const std::string& name) {
  static const std::map<std::string, std::size_t> labels = {
      {"eurlex-4k", 3956},     {"amazoncat-13k", 13330}, {"wiki10-31k", 30938},
      {"wiki-500k", 501008},   {"amazon-670k", 670091},
  };
  auto it = labels.find(name);
  if (it == labels.end()) throw ConfigError("unknown preset '" + name + "'");
  return it->second;
}

KeyValues parse_key_values(std::istream& in) {
  KeyValues kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key=value, got '" + line + "'", line_no);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues load_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path.string());
  return parse_key_values(in);
}

void save_key_values(const std::filesystem::path& path, const KeyValues& kv) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
}

void apply_key_values(TrainConfig& config, const KeyValues& kv) {
  const auto& table = fields();
  // A preset applies first so explicit keys in the same file override it.
  if (auto it = kv.find("preset"); it != kv.end() && !it->second.empty()) apply_preset(config, it->second);
  for (const auto& [key, value] : kv) {
    if (key == "preset") continue;
    auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second.set(config, value);
  }
}

KeyValues to_key_values(const TrainConfig& config) {
  KeyValues kv;
  for (const auto& [key, field] : fields()) kv[key] = field.get(config);
  return kv;
}

std::string to_string(SamplingMode mode) { return mode == SamplingMode::dynamic ? "dynamic" : "static"; }

std::string to_string(WeightSource source) {
  switch (source) {
    case WeightSource::swa: return "swa";
    case WeightSource::last: return "last";
    default: return "auto";
  }
}

std::string to_string(Bottleneck b) { return b == Bottleneck::sigmoid ? "sigmoid" : "relu"; }

std::string to_string(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

void RunManifest::save(const std::filesystem::path& path) const {
  KeyValues kv;
  kv["command"] = command;
  kv["tool_version"] = tool_version;
  for (const auto& [k, v] : to_key_values(config)) kv["config." + k] = v;
  for (const auto& [k, v] : inputs) kv["input." + k] = v;
  for (const auto& [k, v] : artifacts) kv["artifact." + k] = v;
  for (const auto& [k, v] : notes) kv["note." + k] = v;
  save_key_values(path, kv);
}

RunManifest RunManifest::load(const std::filesystem::path& path) {
  RunManifest m;
  KeyValues config_kv;
  for (const auto& [k, v] : load_key_values(path)) {
    if (k == "command") m.command = v;
    else if (k == "tool_version") m.tool_version = v;
    else if (k.starts_with("config.")) config_kv[k.substr(7)] = v;
    else if (k.starts_with("input.")) m.inputs[k.substr(6)] = v;
    else if (k.starts_with("artifact.")) m.artifacts[k.substr(9)] = v;
    else if (k.starts_with("note.")) m.notes[k.substr(5)] = v;
    else throw ConfigError("unknown manifest key '" + k + "'");
  }
  // Every field is materialized, so the preset must not re-apply over them.
  const std::string preset = config_kv.count("preset") ? config_kv["preset"] : "";
  config_kv.erase("preset");
  apply_key_values(m.config, config_kv);
  m.config.preset = preset;
  return m;
}

}  // namespace lightxml
