#include <gtest/gtest.h>

#include <fstream>
#include <iterator>

#include "lightxml/errors.hpp"
#include "lightxml/trainer.hpp"
#include "test_util.hpp"

namespace lightxml {
namespace {

using testing::TempDir;
using testing::tiny_config;
using testing::tiny_corpus;

ClusterMap clusters_for(const XmcDataset& train, std::size_t s) {
  return build_cluster_map(build_label_reps(train), s, 7);
}

std::vector<std::vector<double>> snapshot(const ParameterSet<double>& params) {
  std::vector<std::vector<double>> out;
  for (const auto& p : params.items()) out.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

std::string file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

TEST(Trainer, ZeroLearningRateLeavesParametersUnchanged) {
  auto c = tiny_corpus();
  auto config = tiny_config();
  config.learning_rate = 0.0;
  config.precision = Precision::f64;
  Trainer<double> trainer(config, c.train, clusters_for(c.train, 4));
  const auto before = snapshot(trainer.bundle().params());
  auto batch = make_batch(c.train, {0, 1, 2, 3});
  auto stats = trainer.train_step(batch);
  EXPECT_TRUE(std::isfinite(stats.total));
  EXPECT_EQ(snapshot(trainer.bundle().params()), before);
}

TEST(Trainer, JointLossGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed : {1u, 2u}) {
    auto report = micro_joint_grad_check(seed);
    EXPECT_LT(report.max_rel_error, 1e-4) << report.worst_param << "[" << report.worst_index << "]";
    EXPECT_GT(report.checked, 1000u);
  }
}

TEST(Trainer, RecallOffLeavesGeneratorWithoutGradient) {
  auto c = tiny_corpus();
  auto config = tiny_config();
  Trainer<double> trainer(config, c.train, clusters_for(c.train, 4));
  auto& bundle = trainer.bundle();
  auto batch = make_batch(c.train, {0, 1, 2});
  bundle.params().zero_grad();
  Tape<double> tape;
  JointLoss<double> loss;
  std::mt19937_64 rng(1);
  LossOptions options;
  options.use_recall = false;
  {
    TapeScope<double> scope(tape);
    loss = joint_loss(bundle, batch, 2, false, rng, nullptr, options);
  }
  tape.backward(loss.total);
  const auto* wg = bundle.params().find("generator.W_g");
  double gen = 0.0;
  for (double g : wg->tensor.grad()) gen += std::abs(g);
  EXPECT_EQ(gen, 0.0);
  double enc = 0.0;
  for (double g : bundle.params().find("encoder.token_embedding")->tensor.grad()) enc += std::abs(g);
  EXPECT_GT(enc, 0.0);
}

TEST(Trainer, ZeroEpochsReturnsInitialBundle) {
  auto c = tiny_corpus();
  auto config = tiny_config();
  config.epochs = 0;
  Trainer<double> trainer(config, c.train, clusters_for(c.train, 4));
  const auto before = snapshot(trainer.bundle().params());
  TempDir dir("train0");
  auto history = trainer.train(dir.path());
  EXPECT_TRUE(history.empty());
  EXPECT_EQ(snapshot(trainer.bundle().params()), before);
  EXPECT_TRUE(std::filesystem::exists(dir / "final.ckpt"));
  EXPECT_EQ(trainer.bundle().swa().count(), 0u);
}

TEST(Trainer, SameSeedGivesByteIdenticalCheckpoints) {
  auto c = tiny_corpus();
  auto config = tiny_config();
  config.precision = Precision::f64;
  TempDir a("det_a"), b("det_b");
  {
    Trainer<double> t(config, c.train, clusters_for(c.train, 4));
    t.train(a.path());
  }
  {
    Trainer<double> t(config, c.train, clusters_for(c.train, 4));
    t.train(b.path());
  }
  const auto bytes = file_bytes(a / "final.ckpt");
  EXPECT_FALSE(bytes.empty());
  EXPECT_EQ(bytes, file_bytes(b / "final.ckpt"));
  EXPECT_EQ(file_bytes(a / "metrics.log").empty(), false);
}

TEST(Trainer, DatasetClusterMismatchIsConfigError) {
  auto c = tiny_corpus();
  EXPECT_THROW(Trainer<float>(tiny_config(), c.train, ClusterMap::identity(c.train.num_labels + 1)), ConfigError);
}

TEST(Trainer, LossDecreases) {
  auto c = tiny_corpus();
  auto config = tiny_config();
  config.epochs = 6;
  Trainer<float> trainer(config, c.train, clusters_for(c.train, 4));
  auto history = trainer.train();
  ASSERT_EQ(history.size(), 6u);
  EXPECT_LT(history.back().total(), history.front().total());
}

TEST(StaticCache, CoversEveryDocumentAndMatchesDynamicAtBuildTime) {
  auto c = tiny_corpus();
  auto config = tiny_config();
  Trainer<double> trainer(config, c.train, clusters_for(c.train, 4));
  auto cache = build_static_cache(trainer.bundle(), c.train, 2, 16, "init");
  ASSERT_EQ(cache.rows.size(), c.train.size());
  for (const auto& row : cache.rows) EXPECT_FALSE(row.labels.empty());

  auto batch = make_batch(c.train, {5, 9, 40});
  std::mt19937_64 rng(0);
  CandidateSet dynamic;
  {
    NoGradScope<double> no_grad;
    dynamic = joint_loss(trainer.bundle(), batch, 2, false, rng).candidates;
  }
  EXPECT_EQ(cache.lookup(batch), dynamic);

  // After an update the live generator resamples while the cache stays frozen.
  for (int i = 0; i < 30; ++i) trainer.train_step(make_batch(c.train, {5, 9, 40, 1, 2, 3}));
  CandidateSet after;
  {
    NoGradScope<double> no_grad;
    after = joint_loss(trainer.bundle(), batch, 2, false, rng).candidates;
  }
  EXPECT_NE(after, dynamic);
  EXPECT_EQ(cache.lookup(batch), dynamic);

  Batch outside;
  outside.doc_indices = {c.train.size()};
  EXPECT_THROW(cache.lookup(outside), ConfigError);
}

TEST(StaticCache, StaticModeSamplesOnlyOnce) {
  auto c = tiny_corpus();
  auto config = tiny_config();
  config.epochs = 2;
  config.sampling = SamplingMode::stat;
  config.static_warmup_epochs = 1;
  Trainer<float> trainer(config, c.train, clusters_for(c.train, 4));
  trainer.train();
  ASSERT_NE(trainer.static_cache(), nullptr);
  EXPECT_EQ(trainer.static_cache()->snapshot, "epoch1");
  EXPECT_EQ(trainer.sample_calls(), 0u);

  auto dyn_config = tiny_config();
  Trainer<float> dynamic(dyn_config, c.train, clusters_for(c.train, 4));
  dynamic.train();
  EXPECT_EQ(dynamic.static_cache(), nullptr);
  EXPECT_EQ(dynamic.sample_calls(), dynamic.steps());
}

}  // namespace
}  // namespace lightxml
