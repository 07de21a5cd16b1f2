#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "support.hpp"
#include "voxtok/phantom.hpp"
#include "voxtok/tiling.hpp"

using namespace voxtok;
using testing_support::error_of;

namespace {

CodecConfig deep_small() {
  CodecConfig c;
  c.base_channels = 8;
  c.d = 6;
  c.groups = 4;
  c.disc_channels = 4;
  return c;
}

CodecConfig local_small() {
  auto c = CodecConfig::window_local();
  c.base_channels = 8;
  c.d = 6;
  c.groups = 4;
  c.disc_channels = 4;
  return c;
}

template <typename Real>
CodecParams<Real> busy_params(const Codec<Real>& codec, std::uint64_t seed) {
  auto p = codec.init_params(seed);
  Rng rng(seed);
  for (auto* v : {&p.encoder, &p.decoder})
    for (auto& x : *v) x += static_cast<Real>(rng.uniform(-0.1, 0.1));
  return p;
}

}  // namespace

TEST(PlanWindows, SmallCases) {
  const auto p9 = plan_windows(9);
  ASSERT_EQ(p9.windows.size(), 1u);
  EXPECT_EQ(p9.windows[0], std::make_pair(1, 9));
  EXPECT_EQ(p9.retained_tokens(), 2);

  const auto p17 = plan_windows(17);
  ASSERT_EQ(p17.windows.size(), 2u);
  EXPECT_EQ(p17.windows[1], std::make_pair(9, 17));
  EXPECT_EQ(p17.retained_tokens(), 3);
  EXPECT_TRUE(p17.retention[0][0] && p17.retention[0][1]);
  EXPECT_TRUE(!p17.retention[1][0] && p17.retention[1][1]);

  const auto p241 = plan_windows(241);
  EXPECT_EQ(p241.windows.size(), 30u);
  EXPECT_EQ(p241.retained_tokens(), 31);
  EXPECT_EQ(p241.windows.back(), std::make_pair(233, 241));
}

TEST(PlanWindows, EnumeratedInvariants) {
  for (int depth = 9; depth <= 401; depth += 8) {
    const auto plan = plan_windows(depth);
    EXPECT_EQ(plan.retained_tokens(), 1 + (depth - 1) / 8);
    EXPECT_EQ(plan.windows.front().first, 1);
    EXPECT_EQ(plan.windows.back().second, depth);
    for (std::size_t i = 0; i < plan.windows.size(); ++i) {
      EXPECT_EQ(plan.windows[i].second - plan.windows[i].first + 1, kWindowSlices);
      if (i > 0) {
        EXPECT_EQ(plan.windows[i].first, plan.windows[i - 1].second);  // one shared slice
      }
      EXPECT_EQ(plan.retention[i][0], i == 0);
      EXPECT_TRUE(plan.retention[i][1]);
    }
  }
}

TEST(PlanWindows, RejectsInvalidLengths) {
  for (int depth : {1, 8, 10, 16, 18, 240}) EXPECT_EQ(error_of([&] { plan_windows(depth); }), Errc::InvalidLength);
}

TEST(TiledEncode, SingleWindowEqualsOneShot) {
  Codec<float> codec(deep_small());
  const auto p = busy_params(codec, 1);
  const auto v = make_phantom(2, {9, 32, 32});
  EXPECT_EQ(tiled_encode(codec, p, v), one_shot_encode(codec, p, v));
}

TEST(TiledEncode, TokenCountsMatchOneShot) {
  Codec<float> codec(deep_small());
  const auto p = busy_params(codec, 2);
  for (int depth : {9, 17, 25, 33}) {
    const auto v = make_phantom(depth, {depth, 16, 16});
    const auto a = tiled_encode(codec, p, v);
    const auto b = one_shot_encode(codec, p, v);
    EXPECT_EQ(a.t, 1 + (depth - 1) / 8);
    EXPECT_EQ(b.t, a.t);
    EXPECT_EQ(a.h, b.h);
    EXPECT_EQ(a.w, b.w);
  }
}

TEST(TiledEncode, WindowLocalConfigMatchesOneShotExactly) {
  Codec<float> codec(local_small());
  const auto p = busy_params(codec, 3);
  for (int depth : {9, 17, 33, 41}) {
    const auto v = make_phantom(100 + depth, {depth, 32, 32});
    EXPECT_EQ(tiled_encode(codec, p, v), one_shot_encode(codec, p, v)) << depth;
  }
}

TEST(TiledEncode, WindowsCarryNoHiddenState) {
  Codec<float> codec(deep_small());
  const auto p = busy_params(codec, 4);
  const auto v = make_phantom(5, {33, 16, 16});
  const auto full = tiled_encode_full(codec, p, v, false);
  const auto plan = plan_windows(33);
  std::vector<int> order(plan.windows.size());
  std::iota(order.begin(), order.end(), 0);
  std::reverse(order.begin(), order.end());
  std::vector<Tensor4<float>> per_window(order.size());
  for (int w : order) {
    const auto [first, last] = plan.windows[w];
    per_window[w] = encode(codec, p, haar_forward(crop_slices(v, first - 1, last - first + 1), PadMode::CausalReplicate)).y;
  }
  int next = 0;
  for (std::size_t w = 0; w < per_window.size(); ++w) {
    for (int tok = 0; tok < 2; ++tok) {
      if (!plan.retention[w][tok]) continue;
      EXPECT_TRUE(std::equal(per_window[w].frame(tok).begin(), per_window[w].frame(tok).end(),
                             full.y.frame(next).begin()));
      ++next;
    }
  }
  EXPECT_EQ(next, full.y.frames());
}

TEST(TiledEncode, DeepConfigDisagreementIsAFraction) {
  Codec<float> codec(deep_small());
  const auto p = busy_params(codec, 6);
  const auto v = make_phantom(6, {33, 16, 16});
  const double rate = hamming_disagreement(tiled_encode(codec, p, v), one_shot_encode(codec, p, v));
  EXPECT_GE(rate, 0.0);
  EXPECT_LE(rate, 1.0);
}

TEST(TiledEncode, DeterministicAndRejectsBadDepth) {
  Codec<float> codec(deep_small());
  const auto p = busy_params(codec, 7);
  const auto v = make_phantom(7, {17, 16, 16});
  EXPECT_EQ(one_shot_encode(codec, p, v), one_shot_encode(codec, p, v));
  EXPECT_EQ(tiled_encode(codec, p, v), tiled_encode(codec, p, v));
  const auto bad = make_phantom(7, {16, 16, 16});
  EXPECT_EQ(error_of([&] { tiled_encode(codec, p, bad); }), Errc::InvalidLength);
}

TEST(Reconstruct, ShapeAndRange) {
  Codec<float> codec(deep_small());
  const auto p = busy_params(codec, 8);
  const auto v = make_phantom(8, {25, 32, 32});
  const auto x = reconstruct(codec, p, tiled_encode(codec, p, v));
  EXPECT_EQ(x.shape(), v.shape());
  EXPECT_EQ(x.domain(), Domain::Normalized);
  for (float value : x.values()) {
    ASSERT_TRUE(std::isfinite(value));
    ASSERT_LE(std::abs(value), 1.0f);
  }
}

TEST(TiledBackward, MatchesPerWindowBackward) {
  Codec<double> codec(deep_small());
  const auto p = busy_params(codec, 9);
  BasicVolume<double> v(17, 16, 16);
  Rng rng(10);
  for (auto& x : v.values()) x = rng.uniform(-1, 1);
  auto enc = tiled_encode_full(codec, p, v, true);
  Tensor4<double> dy(enc.y.shape());
  for (auto& x : dy.values()) x = rng.uniform(-1, 1);
  std::vector<double> grads(p.encoder.size(), 0.0);
  tiled_encode_backward(codec, p, enc, dy, grads);

  // directional derivative check of <dy, y_seq(params)>
  std::vector<double> u(p.encoder.size());
  for (auto& x : u) x = rng.uniform(-1, 1);
  auto value = [&](double h) {
    auto q = p;
    for (std::size_t i = 0; i < u.size(); ++i) q.encoder[i] += h * u[i];
    const auto e = tiled_encode_full(codec, q, v, false);
    double s = 0;
    for (std::size_t i = 0; i < dy.size(); ++i) s += dy.values()[i] * e.y.values()[i];
    return s;
  };
  const double fd = (value(1e-5) - value(-1e-5)) / 2e-5;
  double analytic = 0;
  for (std::size_t i = 0; i < u.size(); ++i) analytic += grads[i] * u[i];
  EXPECT_LE(std::abs(fd - analytic) / std::max(1.0, std::abs(fd)), 1e-4);
}
