#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "support.hpp"
#include "voxtok/lfq.hpp"
#include "voxtok/nn/grad_check.hpp"

using namespace voxtok;
using testing_support::error_of;
using testing_support::random_tensor;
using testing_support::random_vector;

namespace {

Tensor4<double> as_tensor(std::span<const double> v, Shape4 s) {
  Tensor4<double> t(s);
  std::copy(v.begin(), v.end(), t.values().begin());
  return t;
}

}  // namespace

TEST(Quantize, SignConventionAndPacking) {
  Tensor4<float> y(1, 1, 1, 3);
  y(0, 0, 0, 0) = 0.3f;
  y(0, 0, 0, 1) = -1.2f;
  y(0, 0, 0, 2) = 0.0f;
  const auto q = quantize(y, 3);
  EXPECT_EQ(q.codes.codes.at(0), 5u);
  EXPECT_EQ(q.e(0, 0, 0, 0), 1.0f);
  EXPECT_EQ(q.e(0, 0, 0, 1), -1.0f);
  EXPECT_EQ(q.e(0, 0, 0, 2), 1.0f);

  Tensor4<float> neg(2, 2, 2, 4, -0.5f);
  for (auto c : quantize(neg, 4).codes.codes) EXPECT_EQ(c, 0u);
}

TEST(Quantize, IdempotentOnSigns) {
  Rng rng(1);
  const auto y = random_tensor<float>(rng, {3, 2, 2, 6});
  const auto q = quantize(y, 6);
  const auto q2 = quantize(q.e, 6);
  EXPECT_EQ(q2.e, q.e);
  EXPECT_EQ(q2.codes, q.codes);
}

TEST(Quantize, ChannelMismatch) {
  Tensor4<float> y(1, 1, 1, 3);
  EXPECT_EQ(error_of([&] { quantize(y, 4); }), Errc::ChannelMismatch);
}

TEST(PackBits, TwoBitEnumeration) {
  EXPECT_EQ(pack_bits(std::vector<float>{-1, -1}), 0u);
  EXPECT_EQ(pack_bits(std::vector<float>{+1, -1}), 1u);
  EXPECT_EQ(pack_bits(std::vector<float>{-1, +1}), 2u);
  EXPECT_EQ(pack_bits(std::vector<float>{+1, +1}), 3u);
}

TEST(PackBits, ExhaustiveBijectionUpTo16Bits) {
  for (int d = 1; d <= 16; ++d) {
    const std::uint32_t n = 1u << d;
    std::vector<bool> seen(n, false);
    for (std::uint32_t c = 0; c < n; ++c) {
      const auto bits = unpack_bits<float>(c, d);
      ASSERT_EQ(static_cast<int>(bits.size()), d);
      const auto back = pack_bits(bits);
      ASSERT_EQ(back, c);
      ASSERT_FALSE(seen[back]);
      seen[back] = true;
      ASSERT_EQ(unpack_bits<float>(back, d), bits);
    }
  }
}

TEST(PackBits, EighteenBitBoundary) {
  const auto ones = unpack_bits<float>(262143, 18);
  for (float b : ones) EXPECT_EQ(b, 1.0f);
  EXPECT_EQ(error_of([] { unpack_bits<float>(262144, 18); }), Errc::CodeOutOfRange);
  Rng rng(2);
  for (int i = 0; i < 5000; ++i) {
    const auto c = static_cast<std::uint32_t>(rng.integer(0, 262143));
    ASSERT_EQ(pack_bits(unpack_bits<double>(c, 18)), c);
  }
}

TEST(ExpandCodes, InverseOfQuantize) {
  Rng rng(3);
  const auto y = random_tensor<float>(rng, {2, 3, 3, 8});
  const auto q = quantize(y, 8);
  EXPECT_EQ(expand_codes<float>(q.codes), q.e);
  TokenGrid bad = q.codes;
  bad.codes[4] = 256;
  EXPECT_EQ(error_of([&] { expand_codes<float>(bad); }), Errc::CodeOutOfRange);
}

TEST(VqLoss, ValuesAndGradient) {
  Tensor4<double> signs(2, 1, 1, 3);
  for (int i = 0; i < 6; ++i) signs.values()[i] = i % 2 ? 1.0 : -1.0;
  EXPECT_EQ(vq_loss(signs, quantize(signs, 3).e, 0.25), 0.0);

  Tensor4<double> zero(1, 1, 1, 3);
  EXPECT_DOUBLE_EQ(vq_loss(zero, quantize(zero, 3).e, 0.25), 3.75);

  Rng rng(4);
  const Shape4 s{2, 2, 2, 4};
  for (int i = 0; i < 20; ++i) {
    const auto y = random_tensor<double>(rng, s);
    const auto e = quantize(y, 4).e;
    Tensor4<double> g;
    const double loss = vq_loss(y, e, 0.25, &g);
    EXPECT_GE(loss, 0.0);
    for (std::size_t k = 0; k < y.size(); ++k) {
      EXPECT_NEAR(g.values()[k], 2 * 0.25 * (y.values()[k] - e.values()[k]) / 8.0, 1e-15);
    }
    // finite differences with e held fixed (stop-gradient); only the beta term moves
    nn::DifferentiableFn fn;
    fn.value = [&](std::span<const double> p) {
      const auto t = as_tensor(p, s);
      double sq = 0;
      for (std::size_t k = 0; k < t.size(); ++k) sq += (t.values()[k] - e.values()[k]) * (t.values()[k] - e.values()[k]);
      return 0.25 * sq / 8.0;
    };
    fn.gradient = [&](std::span<const double> p) {
      Tensor4<double> gg;
      vq_loss(as_tensor(p, s), e, 0.25, &gg);
      return gg.storage();
    };
    EXPECT_LE(nn::grad_check(fn, y.storage(), random_vector(rng, y.size())), 1e-4);
  }
}

TEST(EntropyLoss, SymmetricPointIsZero) {
  Tensor4<double> zero(3, 2, 2, 6);
  EXPECT_NEAR(entropy_loss(zero), 0.0, 1e-12);
}

TEST(EntropyLoss, CollapsedBatchScoresWorseThanBalanced) {
  Tensor4<double> collapsed(1, 2, 2, 4, 5.0);
  Tensor4<double> balanced(1, 2, 2, 4);
  for (int p = 0; p < 4; ++p)
    for (int i = 0; i < 4; ++i) balanced.values()[p * 4 + i] = ((p >> (i % 2)) & 1) ? 5.0 : -5.0;
  const double lc = entropy_loss(collapsed), lb = entropy_loss(balanced);
  EXPECT_NEAR(lc, 0.0, 1e-2);
  EXPECT_NEAR(lb, -4 * std::log(2.0), 1e-2);
  EXPECT_GT(lc, lb);
}

TEST(EntropyLoss, NonPositiveByConcavity) {
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const auto y = random_tensor<double>(rng, {2, 2, 2, 5}, -3, 3);
    EXPECT_LE(entropy_loss(y), 1e-12);
  }
}

TEST(EntropyLoss, GradientCheck) {
  Rng rng(6);
  const Shape4 s{2, 2, 3, 5};
  nn::DifferentiableFn fn;
  fn.value = [&](std::span<const double> p) { return entropy_loss(as_tensor(p, s)); };
  fn.gradient = [&](std::span<const double> p) {
    Tensor4<double> g;
    entropy_loss(as_tensor(p, s), &g);
    return g.storage();
  };
  for (int i = 0; i < 20; ++i) {
    const auto y = random_vector(rng, s.numel(), -2, 2);
    EXPECT_LE(nn::grad_check(fn, y, random_vector(rng, y.size())), 1e-4);
  }
}
