// One PASS/FAIL line per acceptance criterion. Criterion 9 needs real data and is
// skipped unless LIGHTXML_EURLEX_DIR points at a directory holding train.txt, test.txt,
// train_raw.txt and test_raw.txt.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lightxml/ablation.hpp"
#include "lightxml/label_cluster.hpp"
#include "lightxml/predictor.hpp"
#include "lightxml/synthetic.hpp"
#include "lightxml/trainer.hpp"

using namespace lightxml;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
  bool skipped = false;
  // A failure the ledger documents as unattainable; it does not fail the run.
  bool tolerated = false;
};

// ---- 1 ----

Outcome gradient_fidelity() {
  const auto start = Clock::now();
  auto r = micro_joint_grad_check(1);
  const double t = seconds_since(start);
  std::ostringstream os;
  os << "max_rel_error=" << r.max_rel_error << " checked=" << r.checked << " worst=" << r.worst_param << " time=" << t
     << "s";
  return {r.max_rel_error < 1e-4 && t < 30.0, os.str()};
}

// ---- 2 ----

std::vector<LabelRep> random_reps(std::size_t n, std::mt19937_64& rng) {
  constexpr std::uint32_t kDim = 64, kNnz = 6;
  std::uniform_int_distribution<std::uint32_t> feature(0, kDim - 1);
  std::uniform_real_distribution<float> weight(0.1f, 1.0f);
  std::vector<LabelRep> reps(n);
  for (std::uint32_t l = 0; l < n; ++l) {
    std::vector<std::pair<std::uint32_t, float>> pairs;
    for (std::uint32_t j = 0; j < kNnz; ++j) pairs.emplace_back(feature(rng), weight(rng));
    reps[l] = {l, normalized(SparseVec::from_pairs(kDim, std::move(pairs)))};
  }
  return reps;
}

bool inverse_exact(const ClusterMap& map) {
  std::vector<int> seen(map.num_labels(), 0);
  for (std::size_t c = 0; c < map.num_clusters(); ++c) {
    for (auto l : map.members(c)) {
      if (l >= map.num_labels() || map.cluster_of(l) != c) return false;
      ++seen[l];
    }
  }
  return std::all_of(seen.begin(), seen.end(), [](int n) { return n == 1; });
}

bool size_bound(const ClusterMap& map, std::size_t s) {
  if (map.num_clusters() == 1) return true;
  for (const auto& m : map.all_members())
    if (2 * m.size() <= s || m.size() > s) return false;
  return true;
}

Outcome clustering_invariants() {
  const auto start = Clock::now();
  std::mt19937_64 rng(7);
  std::size_t bound_fail = 0, bound_fail_infeasible = 0, inverse_fail = 0, replay_fail = 0;
  std::ostringstream examples;
  for (int i = 0; i < 200; ++i) {
    const auto n = std::uniform_int_distribution<std::size_t>(10, 2000)(rng);
    const auto s = std::uniform_int_distribution<std::size_t>(2, 64)(rng);
    const auto seed = rng();
    auto reps = random_reps(n, rng);
    auto map = build_cluster_map(reps, s, seed);
    if (!size_bound(map, s)) {
      ++bound_fail;
      if (!size_bound_feasible(n, s)) {
        ++bound_fail_infeasible;
        if (bound_fail_infeasible <= 3) examples << " (L=" << n << ",s=" << s << ")";
      }
    }
    if (!inverse_exact(map)) ++inverse_fail;
    if (!(build_cluster_map(reps, s, seed) == map)) ++replay_fail;
  }
  const double t = seconds_since(start);
  std::ostringstream os;
  os << "size_bound_violations=" << bound_fail << " (on infeasible L,s: " << bound_fail_infeasible << examples.str()
     << ") inverse_violations=" << inverse_fail << " replay_mismatches=" << replay_fail << " time=" << t << "s";
  Outcome o{bound_fail == 0 && inverse_fail == 0 && replay_fail == 0 && t < 60.0, os.str()};
  // No partition of an infeasible L can meet the bound; every other check must hold.
  o.tolerated = !o.pass && bound_fail == bound_fail_infeasible && inverse_fail == 0 && replay_fail == 0 && t < 60.0;
  return o;
}

// ---- 3 ----

ClusterMap random_partition(std::size_t labels, std::size_t s, std::mt19937_64& rng) {
  std::vector<std::uint32_t> ids(labels);
  std::iota(ids.begin(), ids.end(), 0u);
  std::shuffle(ids.begin(), ids.end(), rng);
  std::vector<std::vector<std::uint32_t>> members;
  std::size_t at = 0;
  while (at < labels) {
    const auto size = std::min(labels - at, std::uniform_int_distribution<std::size_t>(1, s)(rng));
    std::vector<std::uint32_t> m(ids.begin() + static_cast<std::ptrdiff_t>(at),
                                 ids.begin() + static_cast<std::ptrdiff_t>(at + size));
    std::sort(m.begin(), m.end());
    members.push_back(std::move(m));
    at += size;
  }
  return ClusterMap::from_members(std::move(members), labels, s, 0);
}

Outcome candidate_properties() {
  const auto start = Clock::now();
  std::mt19937_64 rng(7);
  std::size_t subset_fail = 0, size_fail = 0, prefix_fail = 0, flag_fail = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto labels = std::uniform_int_distribution<std::size_t>(2, 300)(rng);
    const auto s = std::uniform_int_distribution<std::size_t>(1, 16)(rng);
    auto map = random_partition(labels, s, rng);
    const std::size_t k = map.num_clusters();
    const auto b_top = std::uniform_int_distribution<std::size_t>(1, k)(rng);
    const std::size_t batch = 3;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> values(batch * k);
    // Coarse scores so ties are common.
    for (auto& v : values) v = std::round(u(rng) * 8.0) / 8.0;
    auto scores = Tensor<double>::from({batch, k}, values);
    std::vector<std::vector<std::uint32_t>> pos(batch);
    for (auto& p : pos) {
      const auto n = std::uniform_int_distribution<std::size_t>(0, std::min<std::size_t>(labels, 6))(rng);
      std::set<std::uint32_t> chosen;
      while (chosen.size() < n) chosen.insert(std::uniform_int_distribution<std::uint32_t>(0, labels - 1)(rng));
      p.assign(chosen.begin(), chosen.end());
    }
    auto train = sample_candidates(scores, map, b_top, &pos);
    auto smaller = sample_candidates(scores, map, b_top, nullptr);
    auto larger = b_top < k ? sample_candidates(scores, map, b_top + 1, nullptr) : smaller;
    for (std::size_t r = 0; r < batch; ++r) {
      const auto& row = train.rows[r];
      std::set<std::uint32_t> present(row.labels.begin(), row.labels.end());
      for (auto l : pos[r]) {
        if (!present.count(l)) ++subset_fail;
      }
      for (std::size_t j = 0; j < row.size(); ++j) {
        const bool truth = std::find(pos[r].begin(), pos[r].end(), row.labels[j]) != pos[r].end();
        if (truth != (row.positive[j] != 0)) ++flag_fail;
      }
      if (row.size() > b_top * s + pos[r].size()) ++size_fail;
      const auto& a = smaller.rows[r].labels;
      const auto& b = larger.rows[r].labels;
      if (b.size() < a.size() || !std::equal(a.begin(), a.end(), b.begin())) ++prefix_fail;
      if (!std::equal(smaller.rows[r].clusters.begin(), smaller.rows[r].clusters.end(),
                      larger.rows[r].clusters.begin()))
        ++prefix_fail;
    }
  }
  const double t = seconds_since(start);
  std::ostringstream os;
  os << "positives_missing=" << subset_fail << " flag_errors=" << flag_fail << " size_violations=" << size_fail
     << " prefix_violations=" << prefix_fail << " time=" << t << "s";
  return {subset_fail + flag_fail + size_fail + prefix_fail == 0 && t < 10.0, os.str()};
}

// ---- 4 ----

double oracle_precision(std::vector<std::uint32_t> ranking, std::vector<std::uint32_t> truth, std::size_t k) {
  ranking.resize(std::min(k, ranking.size()));
  std::sort(ranking.begin(), ranking.end());
  std::sort(truth.begin(), truth.end());
  std::vector<std::uint32_t> both;
  std::set_intersection(ranking.begin(), ranking.end(), truth.begin(), truth.end(), std::back_inserter(both));
  return static_cast<double>(both.size()) / static_cast<double>(k);
}

Outcome precision_oracle() {
  const std::vector<std::uint32_t> ranking = {1, 3, 2, 4, 5}, truth = {1, 2};
  const bool worked = precision_at_k(ranking, truth, 1) == 1.0 && precision_at_k(ranking, truth, 3) == 2.0 / 3.0 &&
                      precision_at_k(ranking, truth, 5) == 2.0 / 5.0;
  std::mt19937_64 rng(7);
  std::size_t mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto universe = std::uniform_int_distribution<std::uint32_t>(1, 60)(rng);
    std::vector<std::uint32_t> all(universe);
    std::iota(all.begin(), all.end(), 0u);
    std::shuffle(all.begin(), all.end(), rng);
    std::vector<std::uint32_t> r(all.begin(), all.begin() + std::uniform_int_distribution<std::ptrdiff_t>(0, universe)(rng));
    std::shuffle(all.begin(), all.end(), rng);
    std::vector<std::uint32_t> t(all.begin(), all.begin() + std::uniform_int_distribution<std::ptrdiff_t>(0, universe)(rng));
    const auto k = std::uniform_int_distribution<std::size_t>(1, 20)(rng);
    if (precision_at_k(r, t, k) != oracle_precision(r, t, k)) ++mismatches;
  }
  std::ostringstream os;
  os << "worked_example=" << (worked ? "ok" : "wrong") << " mismatches=" << mismatches << "/1000";
  return {worked && mismatches == 0, os.str()};
}

// ---- 5 ----

std::vector<std::uint32_t> brute_force_order(const ModelBundle<double>& m, const Batch& batch, std::size_t row) {
  std::mt19937_64 unused(0);
  NoGradScope<double> no_grad;
  auto e = m.encoder().encode(batch, false, unused);
  const std::size_t w = e.dim(1), k = m.clusters().num_clusters(), d = m.dims().embed_dim;
  const auto& wg = m.generator().weight();
  const auto& bg = m.generator().bias();
  const auto& wh = m.discriminator().weight();
  const auto& bh = m.discriminator().bias();
  const auto& table = m.discriminator().embedding();
  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  std::vector<double> recall(k), h(d);
  for (std::size_t c = 0; c < k; ++c) {
    double z = bg.at(c);
    for (std::size_t j = 0; j < w; ++j) z += wg.at(c * w + j) * e.at(row * w + j);
    recall[c] = sig(z);
  }
  for (std::size_t a = 0; a < d; ++a) {
    double z = bh.at(a);
    for (std::size_t j = 0; j < w; ++j) z += wh.at(a * w + j) * e.at(row * w + j);
    h[a] = sig(z);
  }
  std::vector<std::pair<double, std::uint32_t>> scored;
  for (std::uint32_t l = 0; l < m.dims().num_labels; ++l) {
    double z = 0;
    for (std::size_t a = 0; a < d; ++a) z += table.at(l * d + a) * h[a];
    scored.emplace_back(recall[m.clusters().cluster_of(l)] * sig(z), l);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
    return x.first != y.first ? x.first > y.first : x.second < y.second;
  });
  std::vector<std::uint32_t> order;
  for (const auto& [score, l] : scored) order.push_back(l);
  return order;
}

Outcome exhaustive_equivalence() {
  const auto start = Clock::now();
  std::mt19937_64 rng(7);
  std::size_t mismatched_models = 0;
  for (int i = 0; i < 100; ++i) {
    const auto labels = std::uniform_int_distribution<std::size_t>(2, 64)(rng);
    const auto s = std::uniform_int_distribution<std::size_t>(1, 8)(rng);
    auto map = random_partition(labels, s, rng);
    ModelDims dims;
    dims.encoder.vocab_size = 40;
    dims.encoder.hidden = 8;
    dims.encoder.layers = 2;
    dims.encoder.heads = 2;
    dims.encoder.ffn = 16;
    dims.encoder.max_positions = 12;
    dims.encoder.concat_layers = 2;
    dims.num_clusters = map.num_clusters();
    dims.num_labels = labels;
    dims.embed_dim = std::uniform_int_distribution<std::size_t>(2, 12)(rng);
    ModelBundle<double> bundle(dims, map, rng());
    // Spread the weights beyond the init scale so scores are well separated.
    std::normal_distribution<double> g(0.0, 0.5);
    for (auto& p : bundle.params().items())
      for (auto& v : p.tensor.data()) v += g(rng);
    Batch batch;
    batch.batch_size = 2;
    batch.seq_len = 8;
    batch.doc_indices = {0, 1};
    batch.labels.resize(2);
    std::uniform_int_distribution<std::size_t> tok(3, 39);
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t j = 0; j < 8; ++j) {
        const bool real = j < (r == 0 ? 8u : 5u);
        batch.tokens.push_back(j == 0 ? Vocab::kCls : (real ? tok(rng) : Vocab::kPad));
        batch.mask.push_back(real ? 1 : 0);
      }
    auto rows = predict(bundle, batch, map.num_clusters(), labels);
    bool ok = true;
    for (std::size_t r = 0; r < 2; ++r) {
      auto oracle = brute_force_order(bundle, batch, r);
      if (rows[r].labels.size() != oracle.size()) ok = false;
      for (std::size_t j = 0; ok && j < oracle.size(); ++j) ok = rows[r].labels[j].label == oracle[j];
    }
    if (!ok) ++mismatched_models;
  }
  const double t = seconds_since(start);
  std::ostringstream os;
  os << "mismatched_models=" << mismatched_models << "/100 time=" << t << "s";
  return {mismatched_models == 0 && t < 30.0, os.str()};
}

// ---- 6 and 7 ----

struct Synthetic {
  std::shared_ptr<const Vocab> vocab;
  XmcDataset train, test;
  ClusterMap clusters;
};

// 64 labels in 8 topics, 2000 / 500 documents, seed 7, s = 8.
TrainConfig synthetic_config() {
  TrainConfig c;
  c.seed = 7;
  c.epochs = 20;
  c.layers = 5;
  c.heads = 4;
  c.hidden = 64;
  c.ffn = 128;
  c.embed_dim = 300;
  c.max_len = 32;
  c.cluster_size = 8;
  c.b_top = 3;
  c.learning_rate = 1e-3;
  c.checkpoint_every_epoch = false;
  return c;
}

Synthetic make_synthetic(const TrainConfig& c) {
  SyntheticSpec spec;
  spec.seed = c.seed;
  auto corpus = generate_synthetic(spec);
  Synthetic s;
  s.vocab = std::make_shared<const Vocab>(Vocab::build(corpus.train_text, c.min_freq));
  s.train = make_dataset(corpus.train_sparse, corpus.train_text, s.vocab, c.max_len, Split::train);
  s.test = make_dataset(corpus.test_sparse, corpus.test_text, s.vocab, c.max_len, Split::test);
  s.clusters = build_cluster_map(build_label_reps(corpus.train_sparse), c.cluster_size, c.seed);
  return s;
}

Outcome synthetic_convergence(const Synthetic& data, const TrainConfig& config) {
  const auto start = Clock::now();
  Trainer<float> trainer(config, data.train, data.clusters);
  auto history = trainer.train();
  trainer.apply_swa();
  auto report = evaluate(trainer.bundle(), data.test, trainer.b_top(), config.eval_batch_size);
  const double t = seconds_since(start);
  std::ostringstream os;
  os << "P@1=" << report.p1 << " P@3=" << report.p3 << " P@5=" << report.p5
     << " cluster_recall@" << report.b_top << "=" << report.cluster_recall << " K=" << data.clusters.num_clusters()
     << " loss " << history.front().total() << "->" << history.back().total() << " time=" << t << "s";
  return {report.p1 >= 0.95 && report.cluster_recall >= 0.99 && t < 600.0, os.str()};
}

Outcome ablation_fidelity(const Synthetic& data, const TrainConfig& config) {
  const auto start = Clock::now();
  auto result = run_ablation<float>(config, data.train, data.test, data.clusters);
  const double t = seconds_since(start);
  std::cout << result.table() << result.claims();
  const auto& d = result.find("D");
  const auto& s = result.find("S");
  std::ostringstream os;
  os << "dynamic P@1=" << d.report.p1 << " static P@1=" << s.report.p1 << " single-layer P@1="
     << result.find("concat1").report.p1 << " time=" << t << "s";
  return {d.report.p1 >= s.report.p1 - 0.02, os.str()};
}

// ---- 8 ----

Outcome discriminator_size() {
  std::mt19937_64 rng(7);
  std::size_t wrong = 0;
  std::ostringstream os;
  for (int i = 0; i < 5; ++i) {
    const auto labels = std::uniform_int_distribution<std::size_t>(1, 5000)(rng);
    const auto embed = std::uniform_int_distribution<std::size_t>(1, 512)(rng);
    const auto width = 64 * std::uniform_int_distribution<std::size_t>(1, 5)(rng);
    ParameterSet<float> params;
    RankHead<float> head(labels, embed, width, params, rng);
    const std::size_t formula = labels * embed + embed * (width + 1);
    if (head.parameter_count() != formula || params.scalar_count("discriminator.") != formula) ++wrong;
    os << (i ? " " : "") << "(L=" << labels << ",b=" << embed << ",w=" << width << ")=" << formula;
  }
  return {wrong == 0, os.str()};
}

// ---- 9 ----

Outcome eurlex_smoke() {
  const char* dir_env = std::getenv("LIGHTXML_EURLEX_DIR");
  if (!dir_env) {
    Outcome o;
    o.skipped = true;
    o.detail = "LIGHTXML_EURLEX_DIR not set";
    return o;
  }
  const fs::path dir(dir_env);
  TrainConfig c;
  apply_preset(c, "eurlex-4k");
  c.hidden = 128;
  c.layers = 4;
  c.checkpoint_every_epoch = false;
  auto vocab = std::make_shared<const Vocab>(Vocab::build_from_file(dir / "train_raw.txt", c.min_freq));
  auto train = make_dataset(load_sparse(dir / "train.txt", Split::train), read_lines(dir / "train_raw.txt"), vocab,
                            c.max_len, Split::train);
  auto test = make_dataset(load_sparse(dir / "test.txt", Split::test), read_lines(dir / "test_raw.txt"), vocab,
                           c.max_len, Split::test);
  auto clusters = build_cluster_map(build_label_reps(train), c.cluster_size, c.seed);
  const auto start = Clock::now();
  Trainer<float> trainer(c, train, clusters);
  trainer.on_log = [](const std::string& m) { std::cout << "  " << m << '\n'; };
  trainer.train();
  trainer.apply_swa();
  auto report = evaluate(trainer.bundle(), test, trainer.b_top(), c.eval_batch_size);
  std::ostringstream os;
  os << "P@1=" << report.p1 << " time=" << seconds_since(start) << "s";
  return {report.p1 >= 0.55, os.str()};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const char* verdict = o.skipped ? "SKIP" : (o.pass ? "PASS" : "FAIL");
    std::cout << verdict << " " << id << " " << name << ": " << o.detail;
    if (o.tolerated) std::cout << " [documented: infeasible size bound]";
    std::cout << std::endl;
    if (!o.pass && !o.skipped && !o.tolerated) ++failures;
  };

  report(1, "gradient fidelity", gradient_fidelity);
  report(2, "clustering invariants", clustering_invariants);
  report(3, "candidate-set properties", candidate_properties);
  report(4, "P@k oracle", precision_oracle);
  report(5, "exhaustive-ranking equivalence", exhaustive_equivalence);

  const auto config = synthetic_config();
  std::unique_ptr<Synthetic> data;
  try {
    data = std::make_unique<Synthetic>(make_synthetic(config));
  } catch (const std::exception& e) {
    std::cout << "synthetic corpus failed: " << e.what() << std::endl;
  }
  report(6, "synthetic convergence", [&] {
    if (!data) return Outcome{false, "no corpus"};
    return synthetic_convergence(*data, config);
  });
  report(7, "ablation harness", [&] {
    if (!data) return Outcome{false, "no corpus"};
    return ablation_fidelity(*data, config);
  });
  report(8, "discriminator size formula", discriminator_size);
  report(9, "Eurlex-4K smoke", eurlex_smoke);
  return failures == 0 ? 0 : 1;
}
