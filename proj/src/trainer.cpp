#include "lightxml/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "lightxml/errors.hpp"
#include "lightxml/ops.hpp"
#include "lightxml/rank_head.hpp"

namespace lightxml {

template <typename T>
JointLoss<T> joint_loss(const ModelBundle<T>& bundle, const Batch& batch, std::size_t b_top, bool training,
                        std::mt19937_64& rng, const CandidateSet* fixed, const LossOptions& options) {
  JointLoss<T> out;
  Tensor<T> e;
  if (options.freeze_encoder) {
    NoGradScope<T> no_grad;
    e = bundle.encoder().encode(batch, training, rng);
  } else {
    e = bundle.encoder().encode(batch, training, rng);
  }
  auto recall = bundle.generator().scores(e);
  out.loss_g = recall_loss(recall, cluster_target_matrix<T>(batch.labels, bundle.clusters()));

  if (options.use_rank || !options.use_recall) {
    if (fixed) {
      out.candidates = *fixed;
    } else {
      out.candidates = sample_candidates(recall, bundle.clusters(), b_top, &batch.labels);
      out.sampled = true;
    }
    auto rank = bundle.discriminator().scores(e, out.candidates);
    out.loss_d = rank_loss(rank, rank_targets<T>(out.candidates, options.invert_rank_targets), batch.batch_size);
  } else {
    out.loss_d = Tensor<T>::scalar(T(0));
  }

  if (options.use_recall && options.use_rank) {
    out.total = ops::add(out.loss_g, out.loss_d);
  } else if (options.use_recall) {
    out.total = out.loss_g;
  } else if (options.use_rank) {
    out.total = out.loss_d;
  } else {
    throw ConfigError("at least one loss term must be enabled");
  }
  return out;
}

CandidateSet StaticCandidateCache::lookup(const Batch& batch) const {
  CandidateSet set;
  set.rows.reserve(batch.doc_indices.size());
  for (auto d : batch.doc_indices) {
    if (d >= rows.size()) throw ConfigError("document " + std::to_string(d) + " is not in the static cache");
    set.rows.push_back(rows[d]);
  }
  return set;
}

template <typename T>
StaticCandidateCache build_static_cache(const ModelBundle<T>& bundle, const XmcDataset& dataset, std::size_t b_top,
                                        std::size_t batch_size, std::string snapshot) {
  if (dataset.size() == 0) throw ConfigError("cannot build a candidate cache for an empty dataset");
  NoGradScope<T> no_grad;
  StaticCandidateCache cache;
  cache.snapshot = std::move(snapshot);
  cache.rows.resize(dataset.size());
  std::mt19937_64 unused_rng(0);
  BatchIterator it(dataset, batch_size, 0, 0, false);
  while (auto batch = it.next()) {
    auto e = bundle.encoder().encode(*batch, false, unused_rng);
    auto set = sample_candidates(bundle.generator().scores(e), bundle.clusters(), b_top, &batch->labels);
    for (std::size_t i = 0; i < batch->batch_size; ++i) cache.rows[batch->doc_indices[i]] = std::move(set.rows[i]);
  }
  return cache;
}

std::string EpochMetrics::to_line() const {
  std::ostringstream os;
  os.precision(8);
  os << "epoch=" << epoch << " phase=" << phase << " loss_g=" << loss_g << " loss_d=" << loss_d;
  if (dev) {
    os << " p1=" << dev->p1 << " p3=" << dev->p3 << " p5=" << dev->p5 << " cluster_recall=" << dev->cluster_recall;
  }
  os << " wall_ms=" << static_cast<long long>(wall_ms);
  return os.str();
}

double mean_labels(const XmcDataset& dataset) {
  if (dataset.size() == 0) return 0.0;
  std::size_t n = 0;
  for (const auto& d : dataset.documents) n += d.labels.size();
  return static_cast<double>(n) / static_cast<double>(dataset.size());
}

std::size_t resolve_b_top(const TrainConfig& config, const XmcDataset& train, const ClusterMap& clusters) {
  if (config.b_top == 0) return default_b_top(mean_labels(train), clusters.num_clusters());
  if (config.b_top > clusters.num_clusters()) {
    throw ConfigError("b_top " + std::to_string(config.b_top) + " exceeds the " +
                      std::to_string(clusters.num_clusters()) + " clusters");
  }
  return config.b_top;
}

template <typename T>
Trainer<T>::Trainer(TrainConfig config, const XmcDataset& train, ClusterMap clusters, const XmcDataset* dev)
    : config_(std::move(config)), train_(&train), dev_(dev), dropout_rng_(mix_seed(config_.seed, 2)) {
  config_.validate();
  if (!train.vocab) throw ConfigError("training dataset has no vocabulary");
  if (train.num_labels != clusters.num_labels()) {
    throw ConfigError("dataset has " + std::to_string(train.num_labels) + " labels but the cluster map covers " +
                      std::to_string(clusters.num_labels()));
  }
  if (dev && dev->num_labels != train.num_labels) throw ConfigError("dev split label count differs from train");
  b_top_ = resolve_b_top(config_, train, clusters);

  ModelDims dims;
  dims.encoder = config_.encoder_config(train.vocab->size());
  dims.num_clusters = clusters.num_clusters();
  dims.num_labels = clusters.num_labels();
  dims.embed_dim = config_.embed_dim;
  dims.bottleneck = config_.bottleneck;
  AdamWConfig optim;
  optim.learning_rate = config_.learning_rate;
  optim.weight_decay = config_.weight_decay;
  optim.decay_bias_and_norm = config_.decay_bias_norm;
  bundle_ = std::make_unique<ModelBundle<T>>(dims, std::move(clusters), mix_seed(config_.seed, 1), optim,
                                             config_.resolved_swa_start());
}

template <typename T>
void Trainer<T>::log(const std::string& message) const {
  if (on_log) on_log(message);
}

template <typename T>
StepStats Trainer<T>::train_step(const Batch& batch, const LossOptions& options) {
  auto& params = bundle_->params();
  params.zero_grad();
  LossOptions opts = options;
  opts.invert_rank_targets = config_.invert_rank_targets;

  Tape<T> tape;
  JointLoss<T> loss;
  {
    TapeScope<T> scope(tape);
    if (cache_) {
      auto cached = cache_->lookup(batch);
      loss = joint_loss(*bundle_, batch, b_top_, true, dropout_rng_, &cached, opts);
    } else {
      loss = joint_loss(*bundle_, batch, b_top_, true, dropout_rng_, nullptr, opts);
    }
  }
  if (loss.sampled) ++sample_calls_;

  StepStats stats;
  stats.loss_g = loss.loss_g.item();
  stats.loss_d = loss.loss_d.item();
  stats.total = loss.total.item();
  if (!std::isfinite(stats.total)) {
    std::ostringstream os;
    os << "non-finite loss at step " << bundle_->optimizer().step_count() + 1
       << " (lr=" << bundle_->optimizer().config().learning_rate << ", loss_g=" << stats.loss_g
       << ", loss_d=" << stats.loss_d << ")";
    throw TrainingError(os.str());
  }
  tape.backward(loss.total);
  if (config_.clip_norm > 0.0) stats.grad_norm = clip_grad_norm(params, config_.clip_norm);
  bundle_->optimizer().step(params);
  return stats;
}

template <typename T>
EpochMetrics Trainer<T>::run_epoch(int epoch, const std::string& phase, const LossOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  EpochMetrics m;
  m.epoch = epoch;
  m.phase = phase;
  std::size_t seen = 0;
  BatchIterator it(*train_, config_.batch_size, config_.seed, static_cast<std::uint64_t>(epoch));
  while (auto batch = it.next()) {
    auto s = train_step(*batch, options);
    const double w = static_cast<double>(batch->batch_size);
    m.loss_g += s.loss_g * w;
    m.loss_d += s.loss_d * w;
    seen += batch->batch_size;
  }
  if (seen) {
    m.loss_g /= static_cast<double>(seen);
    m.loss_d /= static_cast<double>(seen);
  }
  bundle_->set_epoch(epoch);
  if (config_.resolved_swa_start() > 0) bundle_->swa().maybe_update(epoch, bundle_->params());
  if (dev_ && dev_->size() > 0) m.dev = evaluate(*bundle_, *dev_, b_top_, config_.eval_batch_size);
  m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return m;
}

template <typename T>
void Trainer<T>::build_static_cache() {
  const std::string snapshot = "epoch" + std::to_string(bundle_->epoch());
  log("building static candidate cache from the " +
      std::string(bundle_->epoch() == 0 ? "untrained" : "warmed-up") + " generator (" + snapshot + ")");
  cache_ = lightxml::build_static_cache(*bundle_, *train_, b_top_, config_.eval_batch_size, snapshot);
}

template <typename T>
std::vector<EpochMetrics> Trainer<T>::train(const std::filesystem::path& run_dir) {
  const bool write = !run_dir.empty();
  std::ofstream metrics_log;
  if (write) {
    std::filesystem::create_directories(run_dir);
    metrics_log.open(run_dir / "metrics.log");
    if (!metrics_log) throw ConfigError("cannot write " + (run_dir / "metrics.log").string());
  }
  log("b_top=" + std::to_string(b_top_) + " K=" + std::to_string(bundle_->clusters().num_clusters()) +
      " L=" + std::to_string(bundle_->dims().num_labels) + " sampling=" + to_string(config_.sampling));

  const bool is_static = config_.sampling == SamplingMode::stat;
  const int warmup = is_static ? config_.resolved_static_warmup() : 0;
  std::vector<EpochMetrics> history;
  for (int epoch = 1; epoch <= config_.epochs; ++epoch) {
    LossOptions options;
    std::string phase = "joint";
    if (is_static && epoch <= warmup) {
      phase = "warmup";
      options.use_rank = false;
      bundle_->params().set_trainable("discriminator.", false);
    } else if (is_static) {
      if (!cache_) {
        bundle_->params().set_trainable("discriminator.", true);
        bundle_->params().set_trainable("encoder.", false);
        build_static_cache();
        sample_calls_ = 0;
      }
      phase = "static";
      options.freeze_encoder = true;
    }
    auto m = run_epoch(epoch, phase, options);
    if (write) {
      metrics_log << m.to_line() << '\n' << std::flush;
      if (config_.checkpoint_every_epoch) bundle_->save(run_dir / ("epoch_" + std::to_string(epoch) + ".ckpt"));
    }
    log(m.to_line());
    if (on_epoch) on_epoch(m);
    history.push_back(std::move(m));
  }
  bundle_->params().set_trainable("", true);
  if (write) bundle_->save(run_dir / "final.ckpt");
  return history;
}

template <typename T>
void Trainer<T>::apply_swa() {
  if (bundle_->swa().empty()) return;
  bundle_->swa().copy_to(bundle_->params());
  bundle_->set_swa_weights_loaded(true);
}

GradCheckReport micro_joint_grad_check(std::uint64_t seed, double h) {
  constexpr std::size_t kVocab = 50, kSeq = 5, kLabels = 8;
  ModelDims dims;
  dims.encoder.vocab_size = kVocab;
  dims.encoder.hidden = 8;
  dims.encoder.layers = 2;
  dims.encoder.heads = 2;
  dims.encoder.ffn = 16;
  dims.encoder.max_positions = 8;
  dims.encoder.concat_layers = 2;
  dims.num_clusters = 4;
  dims.num_labels = kLabels;
  dims.embed_dim = 4;
  auto clusters = ClusterMap::from_members({{0, 1}, {2, 3}, {4, 5}, {6, 7}}, kLabels, 2, seed);
  ModelBundle<double> bundle(dims, clusters, seed);

  std::mt19937_64 rng(mix_seed(seed, 3));
  std::uniform_int_distribution<std::size_t> token(Vocab::kReserved, kVocab - 1);
  Batch batch;
  batch.batch_size = 2;
  batch.seq_len = kSeq;
  batch.doc_indices = {0, 1};
  batch.tokens.assign(2 * kSeq, Vocab::kPad);
  batch.mask.assign(2 * kSeq, 0);
  const std::size_t lengths[2] = {kSeq, 3};
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t j = 0; j < lengths[b]; ++j) {
      batch.tokens[b * kSeq + j] = j == 0 ? Vocab::kCls : token(rng);
      batch.mask[b * kSeq + j] = 1;
    }
  }
  batch.labels = {{1, 6}, {3}};

  std::mt19937_64 unused(0);
  CandidateSet candidates;
  {
    NoGradScope<double> no_grad;
    candidates = joint_loss(bundle, batch, 2, false, unused).candidates;
  }
  auto loss_fn = [&] { return joint_loss(bundle, batch, 2, false, unused, &candidates).total; };
  return grad_check(loss_fn, bundle.params(), h);
}

#define LIGHTXML_INSTANTIATE_TRAINER(T)                                                                        \
  template class Trainer<T>;                                                                                   \
  template JointLoss<T> joint_loss(const ModelBundle<T>&, const Batch&, std::size_t, bool, std::mt19937_64&,   \
                                   const CandidateSet*, const LossOptions&);                                   \
  template StaticCandidateCache build_static_cache(const ModelBundle<T>&, const XmcDataset&, std::size_t,      \
                                                   std::size_t, std::string);

LIGHTXML_INSTANTIATE_TRAINER(float)
LIGHTXML_INSTANTIATE_TRAINER(double)

}  // namespace lightxml
