#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "grad_cases.hpp"
#include "gradcheck.hpp"
#include "sval/checkpoint.hpp"
#include "sval/errors.hpp"
#include "sval/tensor.hpp"

namespace sval {
namespace {

using testing::random_tensor;

// Scalar-loop cross-correlation used as the conv2d reference.
std::vector<double> conv_reference(const Tensor& x, const Tensor& w, std::size_t stride,
                                   std::size_t pad) {
  const std::size_t ci = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const std::size_t co = w.dim(0), k = w.dim(2);
  const std::size_t oh = (h + 2 * pad - k) / stride + 1, ow = (wd + 2 * pad - k) / stride + 1;
  std::vector<double> out(co * oh * ow, 0.0);
  for (std::size_t o = 0; o < co; ++o)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xx = 0; xx < ow; ++xx) {
        double acc = 0.0;
        for (std::size_t c = 0; c < ci; ++c)
          for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx) {
              const long iy = static_cast<long>(y * stride + ky) - static_cast<long>(pad);
              const long ix = static_cast<long>(xx * stride + kx) - static_cast<long>(pad);
              if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(wd)) continue;
              acc += x.at((c * h + iy) * wd + ix) * w.at(((o * ci + c) * k + ky) * k + kx);
            }
        out[(o * oh + y) * ow + xx] = acc;
      }
  return out;
}

TEST(Conv2d, ZeroInputGivesZeroOutput) {
  Rng rng = derive_rng(1);
  const Tensor y = conv2d(Tensor::zeros({1, 3, 3}), random_tensor({2, 1, 2, 2}, rng), Tensor{});
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(Conv2d, IdentityKernelCopiesInput) {
  Rng rng = derive_rng(2);
  const Tensor x = random_tensor({1, 4, 5}, rng);
  const Tensor y = conv2d(x, Tensor({1, 1, 1, 1}, {1.0}), Tensor{});
  ASSERT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y.at(i), x.at(i));
}

TEST(Conv2d, OnesKernelGivesWindowSums) {
  const Tensor x({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  const Tensor w = Tensor::full({1, 1, 2, 2}, 1.0);
  const Tensor y = conv2d(x, w, Tensor{});
  ASSERT_EQ(y.shape(), (Shape{1, 2, 2}));
  const auto ref = conv_reference(x, w, 1, 0);
  const std::vector<double> expected{12, 16, 24, 28};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(y.at(i), expected[i]);
    EXPECT_EQ(ref[i], expected[i]);
  }
}

TEST(Conv2d, MatchesScalarLoopOnRandomShapes) {
  Rng rng = derive_rng(3);
  for (std::size_t stride : {1u, 2u}) {
    for (std::size_t pad : {0u, 1u}) {
      const Tensor x = random_tensor({3, 7, 6}, rng);
      const Tensor w = random_tensor({4, 3, 3, 3}, rng);
      const Tensor y = conv2d(x, w, Tensor{}, stride, pad);
      EXPECT_EQ(y.dim(1), (7 + 2 * pad - 3) / stride + 1);
      const auto ref = conv_reference(x, w, stride, pad);
      for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y.at(i), ref[i], 1e-12);
    }
  }
}

TEST(Conv2d, IsLinearWithoutBias) {
  Rng rng = derive_rng(4);
  const Tensor x = random_tensor({2, 5, 5}, rng);
  const Tensor w = random_tensor({3, 2, 3, 3}, rng);
  const Tensor a = conv2d(scale(x, 2.5), w, Tensor{}, 1, 1);
  const Tensor b = conv2d(x, w, Tensor{}, 1, 1);
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a.at(i), 2.5 * b.at(i), 1e-12);
}

TEST(Conv2d, ChannelMismatchIsDimensionError) {
  EXPECT_THROW(conv2d(Tensor::zeros({2, 4, 4}), Tensor::zeros({1, 3, 3, 3}), Tensor{}),
               DimensionError);
}

TEST(FullyConnected, Examples) {
  const Tensor x = Tensor::vector({1, 1});
  const Tensor y = fully_connected(x, Tensor({2, 2}, {1, 2, 3, 4}), Tensor::vector({0, 0}));
  EXPECT_EQ(y.at(0), 3.0);
  EXPECT_EQ(y.at(1), 7.0);

  const Tensor v = Tensor::vector({0.3, -2.0});
  const Tensor id = fully_connected(v, Tensor({2, 2}, {1, 0, 0, 1}), Tensor::vector({0, 0}));
  EXPECT_EQ(id.at(0), 0.3);
  EXPECT_EQ(id.at(1), -2.0);

  const Tensor b = fully_connected(v, Tensor::zeros({2, 2}), Tensor::vector({5, -1}));
  EXPECT_EQ(b.at(0), 5.0);
  EXPECT_EQ(b.at(1), -1.0);

  EXPECT_THROW(fully_connected(Tensor::vector({1, 2, 3}), Tensor::zeros({2, 2}), Tensor{}),
               DimensionError);
}

TEST(Activations, Examples) {
  const Tensor s = softmax(Tensor::vector({0, 0, 0}));
  for (double v : s.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);

  const Tensor n = l2_normalize(Tensor::vector({3, 4}));
  EXPECT_NEAR(n.at(0), 0.6, 1e-15);
  EXPECT_NEAR(n.at(1), 0.8, 1e-15);

  const Tensor r = relu(Tensor::vector({-1, 2}));
  EXPECT_EQ(r.at(0), 0.0);
  EXPECT_EQ(r.at(1), 2.0);
}

TEST(Activations, ZeroVectorNormalizationIsFlagged) {
  const NormalizeResult r = l2_normalize_checked(Tensor::zeros({4}));
  EXPECT_TRUE(r.degenerate);
  for (double v : r.value.data()) EXPECT_EQ(v, 0.0);
  EXPECT_FALSE(l2_normalize_checked(Tensor::vector({1, 0})).degenerate);
}

TEST(Activations, SoftmaxRowsArePositiveAndSumToOne) {
  Rng rng = derive_rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor x = random_tensor({3, 6}, rng, -30.0, 30.0);
    const Tensor s = softmax(x);
    for (std::size_t row = 0; row < 3; ++row) {
      double total = 0.0;
      for (std::size_t j = 0; j < 6; ++j) {
        EXPECT_GT(s.at(row * 6 + j), 0.0);
        total += s.at(row * 6 + j);
      }
      EXPECT_NEAR(total, 1.0, 1e-9);
    }
  }
}

TEST(Pooling, MaxAndMean) {
  const Tensor x({1, 2, 4}, {1, 5, 2, 0, 3, 4, 8, 1});
  const Tensor m = max_pool(x, 2);
  ASSERT_EQ(m.shape(), (Shape{1, 1, 2}));
  EXPECT_EQ(m.at(0), 5.0);
  EXPECT_EQ(m.at(1), 8.0);
  const Tensor a = mean_pool(x);
  ASSERT_EQ(a.shape(), (Shape{1}));
  EXPECT_DOUBLE_EQ(a.at(0), 24.0 / 8.0);
}

TEST(Backward, IdentityAndSquare) {
  Tensor x = Tensor::scalar(2.0, true);
  x.backward();
  EXPECT_EQ(x.grad()[0], 1.0);

  Tensor y = Tensor::scalar(3.0, true);
  mul(y, y).backward();
  EXPECT_EQ(y.grad()[0], 6.0);
}

TEST(Backward, NonScalarLossIsContractError) {
  Tensor x = Tensor::vector({1, 2}, true);
  EXPECT_THROW(scale(x, 2.0).backward(), ContractError);
}

TEST(Backward, SecondCallIsContractError) {
  Tensor x = Tensor::vector({1, 2}, true);
  Tensor loss = sum(mul(x, x));
  loss.backward();
  EXPECT_THROW(loss.backward(), ContractError);
}

TEST(Backward, SharedSubexpressionAccumulates) {
  Tensor x = Tensor::vector({1.5, -2.0}, true);
  Tensor s = sum(x);
  mul(s, s).backward();  // d/dx (x0+x1)^2 = 2(x0+x1)
  EXPECT_DOUBLE_EQ(x.grad()[0], -1.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], -1.0);
}

TEST(Backward, ReplayIsBitIdentical) {
  auto run = [] {
    Rng rng = derive_rng(6);
    Tensor x = random_tensor({2, 6, 6}, rng);
    Tensor w = random_tensor({3, 2, 3, 3}, rng);
    w.set_requires_grad(true);
    Tensor loss = testing::random_projection(relu(conv2d(x, w, Tensor{}, 1, 1)));
    loss.backward();
    return std::make_pair(loss.item(), std::vector<double>(w.grad().begin(), w.grad().end()));
  };
  EXPECT_EQ(run(), run());
}

class OpGradient : public ::testing::TestWithParam<testing::GradCase> {};

TEST_P(OpGradient, MatchesCentralDifferences) {
  EXPECT_LT(testing::worst_gradient_error(GetParam(), 5, 11), 1e-4);
}

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradient, ::testing::ValuesIn(testing::op_gradient_cases()),
                         [](const auto& info) { return info.param.name; });

TEST(Checkpoint, RoundTripAndErrors) {
  std::vector<NamedTensor> tensors{{"a", {2, 2}, {1.0, -0.5, 3.25, 1e-300}},
                                   {"scalar", {1}, {42.0}}};
  std::stringstream buf;
  write_checkpoint(buf, tensors);
  const auto back = read_checkpoint(buf);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].name, "a");
  EXPECT_EQ(back[0].shape, (Shape{2, 2}));
  EXPECT_EQ(back[0].values, tensors[0].values);
  EXPECT_EQ(back[1].values, tensors[1].values);

  std::stringstream bad("NOTACKPT");
  EXPECT_THROW(read_checkpoint(bad), IoError);

  std::string truncated = [&] {
    std::stringstream s;
    write_checkpoint(s, tensors);
    return s.str();
  }();
  truncated.resize(truncated.size() - 3);
  std::stringstream cut(truncated);
  EXPECT_THROW(read_checkpoint(cut), IoError);

  EXPECT_THROW(index_by_name({{"x", {1}, {1.0}}, {"x", {1}, {2.0}}}), ValidationError);
}

}  // namespace
}  // namespace sval
