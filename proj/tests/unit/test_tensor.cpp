#include <gtest/gtest.h>

#include "lightxml/errors.hpp"
#include "lightxml/ops.hpp"
#include "lightxml/tensor.hpp"

namespace lightxml {
namespace {

TEST(Tensor, FactoriesFillShapeAndValues) {
  auto z = Tensor<float>::zeros({2, 3});
  EXPECT_EQ(z.numel(), 6u);
  EXPECT_EQ(z.rows(), 2u);
  EXPECT_EQ(z.cols(), 3u);
  for (float v : z.data()) EXPECT_EQ(v, 0.0f);

  auto f = Tensor<double>::full({4}, 2.5);
  for (double v : f.data()) EXPECT_EQ(v, 2.5);

  auto s = Tensor<double>::scalar(7.0);
  EXPECT_EQ(s.item(), 7.0);
}

TEST(Tensor, FromRejectsMismatchedShape) {
  EXPECT_THROW(Tensor<float>::from({2, 2}, {1, 2, 3}), DimensionError);
}

TEST(Tensor, ItemRequiresSingleElement) {
  EXPECT_THROW(Tensor<float>::zeros({2}).item(), ContractError);
}

TEST(Tensor, CopiesShareStorage) {
  auto a = Tensor<double>::zeros({3});
  auto b = a;
  b.data()[1] = 4.0;
  EXPECT_EQ(a.at(1), 4.0);
  EXPECT_TRUE(a.same_as(b));

  auto c = a.detach_copy();
  c.data()[1] = 9.0;
  EXPECT_EQ(a.at(1), 4.0);
  EXPECT_FALSE(c.requires_grad());
}

TEST(Tape, BackwardRequiresScalarLoss) {
  auto x = Tensor<double>::from({2}, {1.0, 2.0}, true);
  Tape<double> tape;
  Tensor<double> y;
  {
    TapeScope<double> scope(tape);
    y = ops::scale(x, 2.0);
  }
  EXPECT_THROW(tape.backward(y), ContractError);
}

TEST(Tape, ReplaysInReverseAndClears) {
  auto x = Tensor<double>::from({2}, {1.0, -3.0}, true);
  Tape<double> tape;
  Tensor<double> loss;
  {
    TapeScope<double> scope(tape);
    loss = ops::sum(ops::mul(x, x));
  }
  EXPECT_GT(tape.size(), 0u);
  tape.backward(loss);
  EXPECT_EQ(tape.size(), 0u);
  EXPECT_DOUBLE_EQ(x.grad()[0], 2.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], -6.0);
}

TEST(Tape, NoGradScopeSuspendsRecording) {
  auto x = Tensor<double>::from({2}, {1.0, 2.0}, true);
  Tape<double> tape;
  TapeScope<double> scope(tape);
  {
    NoGradScope<double> off;
    auto y = ops::sum(ops::mul(x, x));
    EXPECT_EQ(Tape<double>::active(), nullptr);
    EXPECT_FALSE(y.requires_grad());
  }
  EXPECT_EQ(Tape<double>::active(), &tape);
  EXPECT_EQ(tape.size(), 0u);
}

TEST(Tape, GradientsAccumulateAcrossUses) {
  auto x = Tensor<double>::from({1}, {3.0}, true);
  Tape<double> tape;
  Tensor<double> loss;
  {
    TapeScope<double> scope(tape);
    loss = ops::sum(ops::add(x, ops::add(x, x)));
  }
  tape.backward(loss);
  EXPECT_DOUBLE_EQ(x.grad()[0], 3.0);
  x.zero_grad();
  EXPECT_DOUBLE_EQ(x.grad()[0], 0.0);
}

TEST(Tensor, FiniteCheckRaisesNumericError) {
  const bool before = check_finite_enabled();
  set_check_finite(true);
  auto a = Tensor<double>::from({1}, {1e308});
  EXPECT_THROW(ops::scale(a, 10.0), NumericError);
  set_check_finite(before);
}

}  // namespace
}  // namespace lightxml
