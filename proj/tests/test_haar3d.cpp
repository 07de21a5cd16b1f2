#include <gtest/gtest.h>

#include <cmath>

#include "voxtok/haar3d.hpp"
#include "voxtok/rng.hpp"

using namespace voxtok;

namespace {

template <typename Real>
BasicVolume<Real> random_volume(Rng& rng, int d, int h, int w) {
  BasicVolume<Real> v(d, h, w);
  for (auto& x : v.values()) x = static_cast<Real>(rng.uniform(-1.0, 1.0));
  return v;
}

// Signed-sum oracle: channel c = sum over the 8 block corners of
// sign * value / (2*sqrt 2), where each axis bit set in c contributes
// + for the second sample of the pair and - for the first.
double signed_sum(const double (&block)[2][2][2], int c) {
  double acc = 0.0;
  for (int t = 0; t < 2; ++t) {
    for (int y = 0; y < 2; ++y) {
      for (int x = 0; x < 2; ++x) {
        double s = 1.0;
        if ((c & 4) && t == 0) s = -s;
        if ((c & 2) && y == 0) s = -s;
        if ((c & 1) && x == 0) s = -s;
        acc += s * block[t][y][x];
      }
    }
  }
  return acc / (2.0 * std::sqrt(2.0));
}

}  // namespace

TEST(Haar3d, ConstantBlock) {
  BasicVolume<double> v(2, 2, 2, Domain::Normalized, 1.0);
  const auto w = haar_forward(v, PadMode::NoPad);
  ASSERT_EQ(w.frames(), 1);
  EXPECT_NEAR(w.coeffs(0, 0, 0, 0), 2.0 * std::sqrt(2.0), 1e-12);
  for (int c = 1; c < 8; ++c) EXPECT_EQ(w.coeffs(0, 0, 0, c), 0.0);
}

TEST(Haar3d, MatchesSignedSumOracle) {
  BasicVolume<double> v(2, 2, 2, Domain::HU);
  double block[2][2][2];
  for (int i = 0; i < 8; ++i) {
    v.values()[i] = i + 1;
    block[i >> 2][(i >> 1) & 1][i & 1] = i + 1;
  }
  const auto w = haar_forward(v, PadMode::NoPad);
  EXPECT_NEAR(w.coeffs(0, 0, 0, 0), 36.0 / (2.0 * std::sqrt(2.0)), 1e-12);
  for (int c = 0; c < 8; ++c) EXPECT_NEAR(w.coeffs(0, 0, 0, c), signed_sum(block, c), 1e-12) << c;

  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto r = random_volume<double>(rng, 4, 4, 6);
    const auto wr = haar_forward(r, PadMode::NoPad);
    for (int f = 0; f < 2; ++f) {
      for (int y = 0; y < 2; ++y) {
        for (int x = 0; x < 3; ++x) {
          double b[2][2][2];
          for (int i = 0; i < 8; ++i) b[i >> 2][(i >> 1) & 1][i & 1] = r(2 * f + (i >> 2), 2 * y + ((i >> 1) & 1), 2 * x + (i & 1));
          for (int c = 0; c < 8; ++c) ASSERT_NEAR(wr.coeffs(f, y, x, c), signed_sum(b, c), 1e-12);
        }
      }
    }
  }
}

TEST(Haar3d, SingleSliceHasNoTemporalHighBand) {
  Rng rng(2);
  const auto v = random_volume<float>(rng, 1, 6, 4);
  const auto w = haar_forward(v, PadMode::CausalReplicate);
  ASSERT_EQ(w.frames(), 1);
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 2; ++x) {
      for (int c = 4; c < 8; ++c) EXPECT_EQ(w.coeffs(0, y, x, c), 0.0f);
    }
  }
}

TEST(Haar3d, InverseOfSingleLowBandIsConstant) {
  WaveletVolume<double> w{Tensor4<double>(1, 1, 1, 8), PadMode::NoPad, 2, {}};
  w.coeffs(0, 0, 0, 0) = 2.0 * std::sqrt(2.0);
  const auto v = haar_inverse(w);
  for (double x : v.values()) EXPECT_NEAR(x, 1.0, 1e-12);
  WaveletVolume<double> zero{Tensor4<double>(3, 2, 2, 8), PadMode::CausalReplicate, 5, {}};
  const auto zv = haar_inverse(zero);
  for (double x : zv.values()) EXPECT_EQ(x, 0.0);
}

TEST(Haar3d, RoundTripBothModesBothPrecisions) {
  Rng rng(5);
  double worst32 = 0, worst64 = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 1 + static_cast<int>(rng.integer(0, 9));
    const auto mode = d % 2 ? PadMode::CausalReplicate : PadMode::NoPad;
    const int h = 2 * static_cast<int>(rng.integer(1, 4)), w = 2 * static_cast<int>(rng.integer(1, 4));
    const auto v32 = random_volume<float>(rng, d, h, w);
    const auto back32 = haar_inverse(haar_forward(v32, mode));
    ASSERT_EQ(back32.shape(), v32.shape());
    const auto v64 = volume_cast<double>(v32);
    const auto back64 = haar_inverse(haar_forward(v64, mode));
    for (std::size_t i = 0; i < v32.size(); ++i) {
      worst32 = std::max(worst32, std::abs(double(back32.values()[i]) - v32.values()[i]));
      worst64 = std::max(worst64, std::abs(back64.values()[i] - v64.values()[i]));
    }
  }
  EXPECT_LE(worst32, 1e-5);
  EXPECT_LE(worst64, 1e-12);
}

TEST(Haar3d, ParsevalInNoPadMode) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto v = random_volume<double>(rng, 4, 6, 8);
    const auto w = haar_forward(v, PadMode::NoPad);
    double ex = 0, ew = 0;
    for (double x : v.values()) ex += x * x;
    for (double x : w.coeffs.values()) ew += x * x;
    EXPECT_LE(std::abs(ew - ex), 1e-6 * ex);
  }
}

TEST(Haar3d, Linearity) {
  Rng rng(9);
  const auto a = random_volume<double>(rng, 5, 4, 4);
  const auto b = random_volume<double>(rng, 5, 4, 4);
  auto mix = a;
  for (std::size_t i = 0; i < mix.size(); ++i) mix.values()[i] = 0.7 * a.values()[i] - 1.3 * b.values()[i];
  const auto wa = haar_forward(a, PadMode::CausalReplicate);
  const auto wb = haar_forward(b, PadMode::CausalReplicate);
  const auto wm = haar_forward(mix, PadMode::CausalReplicate);
  for (std::size_t i = 0; i < wm.coeffs.size(); ++i) {
    const double expect = 0.7 * wa.coeffs.values()[i] - 1.3 * wb.coeffs.values()[i];
    EXPECT_NEAR(wm.coeffs.values()[i], expect, 1e-6 * std::max(1.0, std::abs(expect)));
  }
}

TEST(Haar3d, TemporalCausality) {
  Rng rng(10);
  for (int trial = 0; trial < 30; ++trial) {
    const int d = 1 + 2 * static_cast<int>(rng.integer(1, 5));
    const auto v = random_volume<float>(rng, d, 4, 4);
    const auto base = haar_forward(v, PadMode::CausalReplicate);
    const int s = static_cast<int>(rng.integer(1, d));  // 1-based slice to perturb
    auto p = v;
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) p(s - 1, y, x) += 0.5f;
    const auto pert = haar_forward(p, PadMode::CausalReplicate);
    for (int f = 1; f <= base.frames(); ++f) {
      if (s <= std::max(1, 2 * f - 1)) continue;
      for (std::size_t i = 0; i < base.coeffs.frame_size(); ++i) {
        ASSERT_EQ(base.coeffs.frame(f - 1)[i], pert.coeffs.frame(f - 1)[i]) << "frame " << f << " slice " << s;
      }
    }
  }
}

TEST(Haar3d, InverseBackwardIsAdjoint) {
  Rng rng(12);
  for (auto mode : {PadMode::CausalReplicate, PadMode::NoPad}) {
    const int d = mode == PadMode::CausalReplicate ? 5 : 6;
    WaveletVolume<double> w{Tensor4<double>(wavelet_frames(d, mode), 2, 3, 8), mode, d, {}};
    for (auto& x : w.coeffs.values()) x = rng.uniform(-1, 1);
    const auto g = random_volume<double>(rng, d, 4, 6);
    const auto x = haar_inverse(w);
    const auto gw = haar_inverse_backward(g, mode);
    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < x.size(); ++i) lhs += x.values()[i] * g.values()[i];
    for (std::size_t i = 0; i < gw.size(); ++i) rhs += gw.values()[i] * w.coeffs.values()[i];
    EXPECT_NEAR(lhs, rhs, 1e-10);
  }
}

TEST(Haar3d, Errors) {
  auto code = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::IoFailure;
  };
  BasicVolume<float> odd_hw(2, 3, 4);
  EXPECT_EQ(code([&] { haar_forward(odd_hw, PadMode::NoPad); }), Errc::OddSpatialDim);
  BasicVolume<float> even_d(4, 2, 2);
  EXPECT_EQ(code([&] { haar_forward(even_d, PadMode::CausalReplicate); }), Errc::ParityMismatch);
  BasicVolume<float> odd_d(3, 2, 2);
  EXPECT_EQ(code([&] { haar_forward(odd_d, PadMode::NoPad); }), Errc::ParityMismatch);
}
