#include "lightxml/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "lightxml/ablation.hpp"
#include "lightxml/config.hpp"
#include "lightxml/corpus.hpp"
#include "lightxml/errors.hpp"
#include "lightxml/grad_check.hpp"
#include "lightxml/label_cluster.hpp"
#include "lightxml/model.hpp"
#include "lightxml/predictor.hpp"
#include "lightxml/synthetic.hpp"
#include "lightxml/trainer.hpp"

namespace lightxml {

namespace fs = std::filesystem;

namespace {

struct GlobalOptions {
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  bool verify = false;
  std::string config_file;
};

// Flags that map onto TrainConfig keys. Only flags given on the command line are
// applied, so they override the config file and the preset.
class ConfigFlags {
 public:
  void attach(CLI::App* app) {
    add(app, "--preset", "preset", "Dataset preset: eurlex-4k, amazoncat-13k, wiki10-31k, wiki-500k, amazon-670k");
    add(app, "--epochs", "epochs", "Training epochs");
    add(app, "--batch-size", "batch_size", "Mini-batch size");
    add(app, "--b-top", "b_top", "Clusters recalled per instance (0: derived from label density)");
    add(app, "--embed-dim", "embed_dim", "Label embedding dimension");
    add(app, "--max-size", "cluster_size", "Maximum labels per cluster (1: one cluster per label)");
    add(app, "--max-len", "max_len", "Maximum input tokens including [CLS]");
    add(app, "--lr", "learning_rate", "Constant learning rate");
    add(app, "--weight-decay", "weight_decay", "Decoupled weight decay");
    add(app, "--rep-dropout", "rep_dropout", "Dropout on the text representation");
    add(app, "--block-dropout", "block_dropout", "Dropout inside transformer blocks");
    add(app, "--sampling", "sampling", "Negative sampling: dynamic or static");
    add(app, "--static-warmup", "static_warmup_epochs", "Generator-only epochs before the static cache is built");
    add(app, "--swa-start", "swa_start_epoch", "First epoch averaged by SWA (0 disables)");
    add(app, "--clip-norm", "clip_norm", "Global gradient norm bound (0 disables)");
    add(app, "--hidden", "hidden", "Encoder hidden size");
    add(app, "--layers", "layers", "Encoder layers");
    add(app, "--heads", "heads", "Attention heads");
    add(app, "--ffn", "ffn", "Feed-forward width");
    add(app, "--concat-layers", "concat_layers", "Layers whose [CLS] states form the representation");
    add(app, "--min-freq", "min_freq", "Vocabulary frequency threshold");
    add(app, "--bottleneck", "bottleneck", "Bottleneck activation: sigmoid or relu");
    add(app, "--weights", "weights", "Inference weights: auto, swa or last");
    add(app, "--eval-batch-size", "eval_batch_size", "Batch size for evaluation");
    flag(app, "--decay-bias-norm", "decay_bias_norm", "true", "Apply weight decay to biases and norm weights too");
    flag(app, "--no-clip", "clip_norm", "0", "Disable gradient clipping");
    flag(app, "--invert-rank-targets", "invert_rank_targets", "true", "Debug: positives get target 0");
    flag(app, "--no-epoch-checkpoints", "checkpoint_every_epoch", "false", "Only write the final checkpoint");
  }

  KeyValues given() const {
    KeyValues kv;
    for (const auto& [key, opt] : options_)
      if (opt->count() > 0) kv[key] = values_.at(key);
    for (const auto& [key, value] : flags_) kv[key] = value;
    return kv;
  }

 private:
  void add(CLI::App* app, const std::string& name, const std::string& key, const std::string& help) {
    options_.emplace_back(key, app->add_option(name, values_[key], help));
  }
  void flag(CLI::App* app, const std::string& name, const std::string& key, std::string value,
            const std::string& help) {
    app->add_flag_callback(name, [this, key, value] { flags_[key] = value; }, help);
  }

  std::map<std::string, std::string> values_;
  std::vector<std::pair<std::string, CLI::Option*>> options_;
  KeyValues flags_;
};

TrainConfig resolve_config(const GlobalOptions& g, const ConfigFlags& flags) {
  KeyValues file;
  if (!g.config_file.empty()) file = load_key_values(g.config_file);
  KeyValues cli = flags.given();
  std::string preset;
  if (cli.count("preset")) preset = cli["preset"];
  else if (file.count("preset")) preset = file["preset"];
  file.erase("preset");
  cli.erase("preset");

  TrainConfig config;
  if (!preset.empty()) apply_preset(config, preset);
  apply_key_values(config, file);
  apply_key_values(config, cli);
  config.preset = preset;
  if (g.seed_opt && g.seed_opt->count() > 0) config.seed = g.seed;
  if (g.verify) config.precision = Precision::f64;
  config.validate();
  return config;
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw UsageError(what + " is required");
  if (!fs::exists(path)) throw UsageError(what + " not found: " + path);
}

XmcDataset load_split(const std::string& sparse_path, const std::string& text_path,
                      std::shared_ptr<const Vocab> vocab, std::size_t max_len, Split split) {
  require_file(sparse_path, "sparse file");
  require_file(text_path, "raw text file");
  auto sparse = load_sparse(sparse_path, split);
  if (sparse.size() == 0) throw UsageError("dataset is empty: " + sparse_path);
  return make_dataset(sparse, read_lines(text_path), std::move(vocab), max_len, split);
}

// Text-only documents for prediction.
XmcDataset text_dataset(const std::vector<std::string>& texts, std::shared_ptr<const Vocab> vocab,
                        std::size_t max_len, std::size_t num_labels) {
  XmcDataset d;
  d.split = Split::test;
  d.num_labels = num_labels;
  d.vocab = vocab;
  d.documents.resize(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    d.documents[i].id = i;
    d.documents[i].tokens = tokenize(texts[i], *vocab, max_len);
  }
  return d;
}

void warn_preset_mismatch(const TrainConfig& config, std::size_t num_labels, std::ostream& err) {
  if (config.preset.empty()) return;
  const std::size_t expected = preset_num_labels(config.preset);
  if (expected != num_labels) {
    err << "warning: preset " << config.preset << " targets " << expected << " labels, dataset has " << num_labels
        << '\n';
  }
}

ClusterMap make_clusters(const SparseLabeledData& train, std::size_t max_size, std::uint64_t seed) {
  if (max_size == 1) return ClusterMap::identity(train.num_labels, seed);
  auto map = build_cluster_map(build_label_reps(train), max_size, seed);
  map.validate();
  if (!map.satisfies_size_bound()) {
    throw ContractError("cluster sizes violate the (s/2, s] bound for L=" + std::to_string(train.num_labels) +
                        ", s=" + std::to_string(max_size) + " (largest " + std::to_string(map.largest_cluster()) +
                        ")");
  }
  return map;
}

// Artifacts next to a checkpoint: vocab.txt, clusters.txt and config.txt.
template <typename T>
struct LoadedModel {
  std::unique_ptr<ModelBundle<T>> bundle;
  std::shared_ptr<const Vocab> vocab;
  TrainConfig config;
  fs::path checkpoint;
};

fs::path checkpoint_path(const std::string& spec) {
  fs::path p(spec);
  if (fs::is_directory(p)) p /= "final.ckpt";
  require_file(p.string(), "checkpoint");
  return p;
}

template <typename T>
LoadedModel<T> load_model(const std::string& spec, WeightSource weights) {
  LoadedModel<T> m;
  m.checkpoint = checkpoint_path(spec);
  const fs::path dir = m.checkpoint.parent_path().empty() ? fs::path(".") : m.checkpoint.parent_path();
  require_file((dir / "vocab.txt").string(), "vocabulary");
  require_file((dir / "clusters.txt").string(), "cluster map");
  m.vocab = std::make_shared<const Vocab>(Vocab::load(dir / "vocab.txt"));
  if (fs::exists(dir / "config.txt")) apply_key_values(m.config, load_key_values(dir / "config.txt"));
  m.bundle = load_bundle<T>(m.checkpoint, ClusterMap::load(dir / "clusters.txt"), weights);
  if (m.bundle->dims().encoder.vocab_size != m.vocab->size()) {
    throw ConfigError("vocabulary in " + dir.string() + " does not match the checkpoint");
  }
  return m;
}

template <typename T>
std::size_t model_b_top(const LoadedModel<T>& m, std::size_t requested) {
  std::size_t b = requested ? requested : m.config.b_top;
  if (b == 0) b = std::min<std::size_t>(5, m.bundle->clusters().num_clusters());
  if (b > m.bundle->clusters().num_clusters()) {
    throw ConfigError("b_top " + std::to_string(b) + " exceeds " +
                      std::to_string(m.bundle->clusters().num_clusters()) + " clusters");
  }
  return b;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

// ---- synth ----

struct SynthArgs {
  std::string out;
  SyntheticSpec spec;
};

int cmd_synth(const GlobalOptions& g, const SynthArgs& a, std::ostream& out) {
  if (a.out.empty()) throw UsageError("--out is required");
  SyntheticSpec spec = a.spec;
  if (g.seed_opt && g.seed_opt->count() > 0) spec.seed = g.seed;
  auto corpus = generate_synthetic(spec);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  save_sparse(dir / "train.txt", corpus.train_sparse);
  save_sparse(dir / "test.txt", corpus.test_sparse);
  auto write_lines = [](const fs::path& p, const std::vector<std::string>& lines) {
    std::ofstream f(p);
    for (const auto& l : lines) f << l << '\n';
  };
  write_lines(dir / "train_raw.txt", corpus.train_text);
  write_lines(dir / "test_raw.txt", corpus.test_text);
  RunManifest m;
  m.command = "synth";
  m.config.seed = spec.seed;
  m.notes["labels"] = std::to_string(spec.num_labels);
  m.notes["topics"] = std::to_string(spec.num_topics);
  m.notes["train_docs"] = std::to_string(spec.train_docs);
  m.notes["test_docs"] = std::to_string(spec.test_docs);
  m.artifacts = {{"train_sparse", (dir / "train.txt").string()},
                 {"test_sparse", (dir / "test.txt").string()},
                 {"train_text", (dir / "train_raw.txt").string()},
                 {"test_text", (dir / "test_raw.txt").string()}};
  m.save(dir / "manifest.txt");
  out << "wrote synthetic corpus to " << dir.string() << '\n';
  return kExitOk;
}

// ---- cluster ----

struct ClusterArgs {
  std::string sparse;
  std::size_t max_size = 0;
  std::string out;
};

int cmd_cluster(const GlobalOptions& g, const ClusterArgs& a, std::ostream& out) {
  require_file(a.sparse, "sparse file");
  if (a.out.empty()) throw UsageError("--out is required");
  if (a.max_size == 0) throw UsageError("--max-size must be >= 1");
  const std::uint64_t seed = g.seed_opt && g.seed_opt->count() > 0 ? g.seed : 1;
  auto train = load_sparse(a.sparse, Split::train);
  auto map = make_clusters(train, a.max_size, seed);
  map.save(a.out);
  RunManifest m;
  m.command = "cluster";
  m.config.cluster_size = a.max_size;
  m.config.seed = seed;
  m.inputs["sparse"] = a.sparse;
  m.artifacts["clusters"] = a.out;
  m.notes["num_clusters"] = std::to_string(map.num_clusters());
  m.save(a.out + ".manifest");
  out << "clusters=" << map.num_clusters() << " labels=" << map.num_labels() << " largest=" << map.largest_cluster()
      << '\n';
  return kExitOk;
}

// ---- train ----

struct DataArgs {
  std::string train_sparse, train_text, test_sparse, test_text;
};

struct TrainArgs {
  DataArgs data;
  std::string clusters;
  std::string out;
};

template <typename T>
int train_impl(const TrainConfig& base, const TrainArgs& a, std::ostream& out, std::ostream& err) {
  TrainConfig config = base;
  require_file(a.data.train_text, "--train-text");
  auto vocab = std::make_shared<const Vocab>(Vocab::build_from_file(a.data.train_text, config.min_freq));
  auto train = load_split(a.data.train_sparse, a.data.train_text, vocab, config.max_len, Split::train);
  std::optional<XmcDataset> dev;
  if (!a.data.test_sparse.empty()) {
    dev = load_split(a.data.test_sparse, a.data.test_text, vocab, config.max_len, Split::test);
  }
  warn_preset_mismatch(config, train.num_labels, err);

  ClusterMap clusters;
  if (!a.clusters.empty()) {
    require_file(a.clusters, "--clusters");
    clusters = ClusterMap::load(a.clusters);
  } else {
    clusters = make_clusters(train.sparse_view(), config.cluster_size, config.seed);
  }

  const fs::path dir(a.out);
  fs::create_directories(dir);
  Trainer<T> trainer(config, train, clusters, dev ? &*dev : nullptr);
  trainer.on_log = [&err](const std::string& msg) { err << msg << '\n'; };
  config.b_top = trainer.b_top();
  vocab->save(dir / "vocab.txt");
  trainer.bundle().clusters().save(dir / "clusters.txt");
  save_key_values(dir / "config.txt", to_key_values(config));

  trainer.train(dir);

  RunManifest m;
  m.command = "train";
  m.config = config;
  m.inputs = {{"train_sparse", a.data.train_sparse}, {"train_text", a.data.train_text}};
  if (dev) {
    m.inputs["test_sparse"] = a.data.test_sparse;
    m.inputs["test_text"] = a.data.test_text;
  }
  if (!a.clusters.empty()) m.inputs["clusters"] = a.clusters;
  m.artifacts = {{"vocab", (dir / "vocab.txt").string()},
                 {"clusters", (dir / "clusters.txt").string()},
                 {"config", (dir / "config.txt").string()},
                 {"metrics", (dir / "metrics.log").string()},
                 {"final_checkpoint", (dir / "final.ckpt").string()}};
  m.notes["sampling"] = to_string(config.sampling);
  m.notes["b_top"] = std::to_string(trainer.b_top());
  m.notes["num_clusters"] = std::to_string(trainer.bundle().clusters().num_clusters());
  if (const auto* cache = trainer.static_cache()) m.notes["static_cache_snapshot"] = cache->snapshot;
  m.notes["swa_snapshots"] = std::to_string(trainer.bundle().swa().count());
  m.save(dir / "manifest.txt");
  out << "trained " << config.epochs << " epochs; checkpoint " << (dir / "final.ckpt").string() << '\n';
  return kExitOk;
}

// ---- predict / eval ----

struct InferArgs {
  std::string checkpoint;
  std::string ensemble;
  std::string text;
  DataArgs data;
  std::size_t k = 5;
  std::string ks = "1,3,5";
  std::size_t b_top = 0;  // 0: the value stored with the run
  std::string out;
};

std::vector<std::string> model_specs(const InferArgs& a) {
  auto specs = a.ensemble.empty() ? std::vector<std::string>{} : split_list(a.ensemble);
  if (!a.checkpoint.empty()) specs.insert(specs.begin(), a.checkpoint);
  if (specs.empty()) throw UsageError("--checkpoint or --ensemble is required");
  return specs;
}

template <typename T>
int predict_impl(const TrainConfig& config, InferArgs a, std::ostream& out) {
  a.b_top = config.b_top;
  require_file(a.text, "--text");
  if (a.k == 0) throw UsageError("--k must be >= 1");
  const auto texts = read_lines(a.text);
  std::vector<ModelOutput> outputs;
  std::size_t num_labels = 0;
  for (const auto& spec : model_specs(a)) {
    auto m = load_model<T>(spec, config.weights);
    if (num_labels && m.bundle->dims().num_labels != num_labels) throw ConfigError("ensemble label spaces differ");
    num_labels = m.bundle->dims().num_labels;
    auto data = text_dataset(texts, m.vocab, m.bundle->dims().encoder.max_positions, num_labels);
    outputs.push_back(score_dataset(*m.bundle, data, model_b_top(m, a.b_top), config.eval_batch_size));
  }
  auto rows = ensemble_combine(outputs, a.k);
  if (a.out.empty()) {
    write_predictions(out, rows);
  } else {
    std::ofstream f(a.out);
    if (!f) throw UsageError("cannot write " + a.out);
    write_predictions(f, rows);
  }
  return kExitOk;
}

template <typename T>
int eval_impl(const TrainConfig& config, InferArgs a, std::ostream& out) {
  a.b_top = config.b_top;
  std::vector<std::size_t> ks;
  for (const auto& k : split_list(a.ks)) {
    const auto v = std::stoul(k);
    if (v == 0) throw UsageError("--k values must be >= 1");
    ks.push_back(v);
  }
  if (ks.empty()) throw UsageError("--k needs at least one value");
  std::vector<ModelOutput> outputs;
  double recall = 0.0;
  std::size_t b_top = 0, num_labels = 0;
  std::optional<XmcDataset> first;
  const auto specs = model_specs(a);
  for (const auto& spec : specs) {
    auto m = load_model<T>(spec, config.weights);
    if (num_labels && m.bundle->dims().num_labels != num_labels) throw ConfigError("ensemble label spaces differ");
    num_labels = m.bundle->dims().num_labels;
    auto data = load_split(a.data.test_sparse, a.data.test_text, m.vocab, m.bundle->dims().encoder.max_positions,
                           Split::test);
    b_top = model_b_top(m, a.b_top);
    outputs.push_back(score_dataset(*m.bundle, data, b_top, config.eval_batch_size));
    recall += mean_cluster_recall(outputs.back(), data, m.bundle->clusters());
    if (!first) first = std::move(data);
  }
  const std::size_t depth = std::max<std::size_t>(5, *std::max_element(ks.begin(), ks.end()));
  auto report = evaluate_rows(ensemble_combine(outputs, depth), *first, ks);
  report.cluster_recall = recall / static_cast<double>(specs.size());
  report.b_top = b_top;
  // Only the requested cut-offs are printed.
  std::map<std::size_t, double> requested;
  for (auto k : ks) requested[k] = report.precision[k];
  report.precision = requested;
  print_report(out, report);
  return kExitOk;
}

// ---- ablate ----

struct AblateArgs {
  DataArgs data;
  std::string out;
};

template <typename T>
int ablate_impl(const TrainConfig& config, const AblateArgs& a, std::ostream& out, std::ostream& err) {
  require_file(a.data.train_text, "--train-text");
  auto vocab = std::make_shared<const Vocab>(Vocab::build_from_file(a.data.train_text, config.min_freq));
  auto train = load_split(a.data.train_sparse, a.data.train_text, vocab, config.max_len, Split::train);
  auto test = load_split(a.data.test_sparse, a.data.test_text, vocab, config.max_len, Split::test);
  auto clusters = make_clusters(train.sparse_view(), config.cluster_size, config.seed);
  auto result = run_ablation<T>(config, train, test, clusters, [&err](const std::string& m) { err << m << '\n'; });

  const auto table = result.table();
  const auto claims = result.claims();
  out << table << claims;
  if (!a.out.empty()) {
    const fs::path dir(a.out);
    fs::create_directories(dir);
    std::ofstream(dir / "table.txt") << table;
    std::ofstream(dir / "claims.txt") << claims;
    std::ofstream(dir / "sampling_loss.csv") << result.loss_csv({"D", "S"});
    std::ofstream(dir / "layers_loss.csv") << result.loss_csv({"D", "concat1"});
    RunManifest m;
    m.command = "ablate";
    m.config = config;
    m.inputs = {{"train_sparse", a.data.train_sparse},
                {"train_text", a.data.train_text},
                {"test_sparse", a.data.test_sparse},
                {"test_text", a.data.test_text}};
    m.artifacts = {{"table", (dir / "table.txt").string()},
                   {"claims", (dir / "claims.txt").string()},
                   {"sampling_loss", (dir / "sampling_loss.csv").string()},
                   {"layers_loss", (dir / "layers_loss.csv").string()}};
    m.save(dir / "manifest.txt");
  }
  return kExitOk;
}

// ---- gradcheck ----

int cmd_gradcheck(const GlobalOptions& g, double h, double tolerance, std::ostream& out) {
  const std::uint64_t seed = g.seed_opt && g.seed_opt->count() > 0 ? g.seed : 1;
  auto r = micro_joint_grad_check(seed, h);
  out << "checked=" << r.checked << "\nmax_rel_error=" << r.max_rel_error << "\nworst_param=" << r.worst_param
      << "\nworst_index=" << r.worst_index << "\nanalytic=" << r.worst_analytic << "\nnumeric=" << r.worst_numeric
      << "\nstatus=" << (r.max_rel_error < tolerance ? "pass" : "fail") << '\n';
  return r.max_rel_error < tolerance ? kExitOk : kExitInternal;
}

template <template <typename> class F, typename... Args>
int dispatch(const TrainConfig& config, Args&&... args) {
  if (config.precision == Precision::f64) return F<double>::run(config, std::forward<Args>(args)...);
  return F<float>::run(config, std::forward<Args>(args)...);
}

template <typename T>
struct TrainCmd {
  static int run(const TrainConfig& c, const TrainArgs& a, std::ostream& o, std::ostream& e) {
    return train_impl<T>(c, a, o, e);
  }
};
template <typename T>
struct PredictCmd {
  static int run(const TrainConfig& c, const InferArgs& a, std::ostream& o) { return predict_impl<T>(c, a, o); }
};
template <typename T>
struct EvalCmd {
  static int run(const TrainConfig& c, const InferArgs& a, std::ostream& o) { return eval_impl<T>(c, a, o); }
};
template <typename T>
struct AblateCmd {
  static int run(const TrainConfig& c, const AblateArgs& a, std::ostream& o, std::ostream& e) {
    return ablate_impl<T>(c, a, o, e);
  }
};

void add_data_options(CLI::App* app, DataArgs& d, bool test_required) {
  app->add_option("--train-sparse", d.train_sparse, "Sparse training file (N D L header)");
  app->add_option("--train-text", d.train_text, "Raw training text, one document per line");
  auto* ts = app->add_option("--test-sparse", d.test_sparse, "Sparse test file");
  auto* tt = app->add_option("--test-text", d.test_text, "Raw test text");
  if (test_required) {
    ts->required();
    tt->required();
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"LightXML extreme multi-label text classification"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  g.seed_opt = app.add_option("--seed", g.seed, "Seed for clustering, initialization and batching");
  app.add_flag("--verify", g.verify, "64-bit deterministic verification mode");
  app.add_option("--config", g.config_file, "key=value config file (flags > file > preset > defaults)");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate the block-structured synthetic corpus");
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--labels", synth.spec.num_labels, "Number of labels");
  synth_cmd->add_option("--topics", synth.spec.num_topics, "Number of topics");
  synth_cmd->add_option("--train-docs", synth.spec.train_docs, "Training documents");
  synth_cmd->add_option("--test-docs", synth.spec.test_docs, "Test documents");

  ClusterArgs cluster;
  auto* cluster_cmd = app.add_subcommand("cluster", "Build the balanced label cluster map");
  cluster_cmd->add_option("--sparse", cluster.sparse, "Sparse training file")->required();
  cluster_cmd->add_option("--max-size", cluster.max_size, "Maximum labels per cluster")->required();
  cluster_cmd->add_option("--out", cluster.out, "Output cluster map")->required();

  TrainArgs train;
  ConfigFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  add_data_options(train_cmd, train.data, false);
  train_cmd->add_option("--clusters", train.clusters, "Existing cluster map (built inline otherwise)");
  train_cmd->add_option("--out", train.out, "Run directory")->required();
  train_flags.attach(train_cmd);

  InferArgs predict;
  ConfigFlags predict_flags;
  auto* predict_cmd = app.add_subcommand("predict", "Top-K labels for raw text");
  predict_cmd->add_option("--checkpoint,--run", predict.checkpoint, "Checkpoint file or run directory");
  predict_cmd->add_option("--ensemble", predict.ensemble, "Comma-separated checkpoints to average");
  predict_cmd->add_option("--text", predict.text, "Raw text, one document per line")->required();
  predict_cmd->add_option("--k", predict.k, "Labels per document");
  predict_cmd->add_option("--out", predict.out, "Output file (stdout by default)");
  predict_flags.attach(predict_cmd);

  InferArgs eval;
  ConfigFlags eval_flags;
  auto* eval_cmd = app.add_subcommand("eval", "P@k and cluster recall on a labeled split");
  eval_cmd->add_option("--checkpoint,--run", eval.checkpoint, "Checkpoint file or run directory");
  eval_cmd->add_option("--ensemble", eval.ensemble, "Comma-separated checkpoints to average");
  eval_cmd->add_option("--test-sparse", eval.data.test_sparse, "Sparse test file")->required();
  eval_cmd->add_option("--test-text", eval.data.test_text, "Raw test text")->required();
  eval_cmd->add_option("--k", eval.ks, "Comma-separated cut-offs");
  eval_flags.attach(eval_cmd);

  AblateArgs ablate;
  ConfigFlags ablate_flags;
  auto* ablate_cmd = app.add_subcommand("ablate", "Dynamic vs static sampling and 5 vs 1 layer representation");
  add_data_options(ablate_cmd, ablate.data, true);
  ablate_cmd->add_option("--out", ablate.out, "Directory for the table and loss curves");
  ablate_flags.attach(ablate_cmd);

  double gc_h = 1e-5, gc_tol = 1e-4;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of the joint loss on a micro-model");
  gc_cmd->add_option("--step", gc_h, "Central difference step");
  gc_cmd->add_option("--tol", gc_tol, "Maximum relative error");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth_cmd->parsed()) return cmd_synth(g, synth, out);
    if (cluster_cmd->parsed()) return cmd_cluster(g, cluster, out);
    if (train_cmd->parsed()) return dispatch<TrainCmd>(resolve_config(g, train_flags), train, out, err);
    if (predict_cmd->parsed()) return dispatch<PredictCmd>(resolve_config(g, predict_flags), predict, out);
    if (eval_cmd->parsed()) return dispatch<EvalCmd>(resolve_config(g, eval_flags), eval, out);
    if (ablate_cmd->parsed()) return dispatch<AblateCmd>(resolve_config(g, ablate_flags), ablate, out, err);
    if (gc_cmd->parsed()) return cmd_gradcheck(g, gc_h, gc_tol, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitUsage;
}

}  // namespace lightxml
