#include <gtest/gtest.h>

#include "lightxml/encoder.hpp"
#include "lightxml/errors.hpp"
#include "lightxml/grad_check.hpp"
#include "lightxml/init.hpp"
#include "lightxml/ops.hpp"

namespace lightxml {
namespace {

EncoderConfig micro_config() {
  EncoderConfig c;
  c.vocab_size = 30;
  c.hidden = 8;
  c.layers = 2;
  c.heads = 2;
  c.ffn = 16;
  c.max_positions = 6;
  c.concat_layers = 2;
  return c;
}

struct Inputs {
  std::vector<std::size_t> tokens;
  std::vector<std::uint8_t> mask;
};

// Row b has lengths[b] real tokens, then padding.
Inputs make_inputs(std::size_t seq, const std::vector<std::size_t>& lengths, std::size_t seed) {
  Inputs in;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> tok(3, 29);
  for (auto len : lengths)
    for (std::size_t j = 0; j < seq; ++j) {
      in.tokens.push_back(j == 0 ? 1 : (j < len ? tok(rng) : 0));
      in.mask.push_back(j < len ? 1 : 0);
    }
  return in;
}

TEST(EncoderConfig, Validation) {
  auto c = micro_config();
  EXPECT_NO_THROW(c.validate());
  c.heads = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = micro_config();
  c.concat_layers = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = micro_config();
  c.rep_dropout = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Encoder, WidthIsConcatLayersTimesHidden) {
  EncoderConfig c;
  c.vocab_size = 10;
  c.hidden = 64;
  c.layers = 5;
  c.concat_layers = 5;
  EXPECT_EQ(c.rep_width(), 320u);

  ParameterSet<float> params;
  std::mt19937_64 rng(1);
  Encoder<float> enc(micro_config(), params, rng);
  auto in = make_inputs(5, {5, 3}, 2);
  auto e = enc.encode(in.tokens, in.mask, 2, 5, false, rng);
  EXPECT_EQ(e.shape(), (Shape{2, 16}));
}

TEST(Encoder, IdenticalRowsGiveIdenticalOutputs) {
  ParameterSet<double> params;
  std::mt19937_64 rng(1);
  Encoder<double> enc(micro_config(), params, rng);
  auto one = make_inputs(5, {4}, 3);
  Inputs two;
  for (int r = 0; r < 2; ++r) {
    two.tokens.insert(two.tokens.end(), one.tokens.begin(), one.tokens.end());
    two.mask.insert(two.mask.end(), one.mask.begin(), one.mask.end());
  }
  auto e = enc.encode(two.tokens, two.mask, 2, 5, false, rng);
  for (std::size_t j = 0; j < 16; ++j) EXPECT_EQ(e.at(j), e.at(16 + j));
  auto again = enc.encode(two.tokens, two.mask, 2, 5, false, rng);
  for (std::size_t j = 0; j < 32; ++j) EXPECT_EQ(e.at(j), again.at(j));
}

TEST(Encoder, PadTokenIdsDoNotMatter) {
  ParameterSet<double> params;
  std::mt19937_64 rng(1);
  Encoder<double> enc(micro_config(), params, rng);
  auto in = make_inputs(6, {6, 2}, 4);
  auto before = enc.encode(in.tokens, in.mask, 2, 6, false, rng);
  for (std::size_t j = 2; j < 6; ++j) in.tokens[6 + j] = 7 + j;
  auto after = enc.encode(in.tokens, in.mask, 2, 6, false, rng);
  for (std::size_t j = 0; j < before.numel(); ++j) EXPECT_EQ(before.at(j), after.at(j));
}

TEST(Encoder, TooLongSequenceIsContractError) {
  ParameterSet<float> params;
  std::mt19937_64 rng(1);
  Encoder<float> enc(micro_config(), params, rng);
  auto in = make_inputs(7, {7}, 1);
  EXPECT_THROW(enc.encode(in.tokens, in.mask, 1, 7, false, rng), ContractError);
  EXPECT_THROW(enc.encode(in.tokens, in.mask, 1, 6, false, rng), ContractError);
}

TEST(Encoder, ClsOnlySequenceRuns) {
  ParameterSet<float> params;
  std::mt19937_64 rng(1);
  Encoder<float> enc(micro_config(), params, rng);
  std::vector<std::size_t> tokens = {1};
  std::vector<std::uint8_t> mask = {1};
  EXPECT_NO_THROW(enc.encode(tokens, mask, 1, 1, true, rng));
}

TEST(Encoder, ZeroAttentionProjectionIsIdentityResidual) {
  // With wo = bo = 0 the attention sub-block adds nothing, so a one-layer model equals
  // the same model with attention replaced by identity: changing wq/wk/wv is invisible.
  auto c = micro_config();
  c.layers = 1;
  c.concat_layers = 1;
  ParameterSet<double> params;
  std::mt19937_64 rng(3);
  Encoder<double> enc(c, params, rng);
  for (auto* name : {"encoder.layer0.attn.wo", "encoder.layer0.attn.bo"})
    for (auto& v : params.find(name)->tensor.data()) v = 0.0;
  auto in = make_inputs(5, {5}, 6);
  auto before = enc.encode(in.tokens, in.mask, 1, 5, false, rng);
  for (auto* name : {"encoder.layer0.attn.wq", "encoder.layer0.attn.wv"})
    for (auto& v : params.find(name)->tensor.data()) v += 0.3;
  auto after = enc.encode(in.tokens, in.mask, 1, 5, false, rng);
  for (std::size_t j = 0; j < before.numel(); ++j) EXPECT_EQ(before.at(j), after.at(j));
}

TEST(Encoder, SingleLayerConcatIsLastLayerCls) {
  auto c = micro_config();
  ParameterSet<double> p5, p1;
  std::mt19937_64 r5(8), r1(8);
  Encoder<double> full(c, p5, r5);
  c.concat_layers = 1;
  Encoder<double> last(c, p1, r1);
  // Share every weight the single-layer variant has.
  for (auto& item : p1.items()) {
    auto* src = p5.find(item.name);
    ASSERT_NE(src, nullptr) << item.name;
    std::copy(src->tensor.data().begin(), src->tensor.data().end(), item.tensor.data().begin());
  }
  auto in = make_inputs(5, {5, 4}, 2);
  auto e5 = full.encode(in.tokens, in.mask, 2, 5, false, r5);
  auto e1 = last.encode(in.tokens, in.mask, 2, 5, false, r1);
  ASSERT_EQ(e1.dim(1), 8u);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(e1.at(b * 8 + j), e5.at(b * 16 + 8 + j));
}

TEST(Encoder, GradientMatchesFiniteDifferences) {
  ParameterSet<double> params;
  std::mt19937_64 rng(1);
  auto c = micro_config();
  Encoder<double> enc(c, params, rng);
  // Larger weights than the init scale so every path carries signal.
  std::mt19937_64 perturb(2);
  std::normal_distribution<double> g(0.0, 0.3);
  for (auto& p : params.items())
    for (auto& v : p.tensor.data()) v += g(perturb);
  auto in = make_inputs(5, {5, 3}, 9);
  auto w = random_normal<double>({2, 16}, 1.0, perturb);
  auto report = grad_check(
      [&] { return ops::sum(ops::sigmoid(ops::mul(enc.encode(in.tokens, in.mask, 2, 5, false, rng), w))); }, params);
  EXPECT_LT(report.max_rel_error, 1e-4) << report.worst_param << "[" << report.worst_index << "]";
  EXPECT_GT(report.checked, 0u);
}

TEST(Encoder, TrainingDropoutChangesOutputOnlyWhenTraining) {
  auto c = micro_config();
  c.rep_dropout = 0.5;
  ParameterSet<float> params;
  std::mt19937_64 rng(1);
  Encoder<float> enc(c, params, rng);
  auto in = make_inputs(5, {5}, 2);
  std::mt19937_64 a(5), b(6);
  auto eval1 = enc.encode(in.tokens, in.mask, 1, 5, false, a);
  auto eval2 = enc.encode(in.tokens, in.mask, 1, 5, false, b);
  for (std::size_t j = 0; j < eval1.numel(); ++j) EXPECT_EQ(eval1.at(j), eval2.at(j));
  auto train = enc.encode(in.tokens, in.mask, 1, 5, true, a);
  std::size_t zeros = 0;
  for (std::size_t j = 0; j < train.numel(); ++j) zeros += train.at(j) == 0.0f;
  EXPECT_GT(zeros, 0u);
}

}  // namespace
}  // namespace lightxml
