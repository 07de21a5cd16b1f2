#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "voxtok/nn/conv.hpp"

namespace voxtok::nn {

enum class ConvKind { Spatial1kk, TemporalK11, TemporalTransposedK11 };

struct ConvSpec {
  ConvKind kind = ConvKind::Spatial1kk;
  int k = 3;
  int stride = 1;
  int in_ch = 1, out_ch = 1;
};

/// 1 x k x k convolution with symmetric "same" zero padding floor(k/2).
inline Conv3dGeometry spatial_geometry(const ConvSpec& s) {
  if (s.kind != ConvKind::Spatial1kk || s.k < 1 || s.k % 2 == 0 || (s.stride != 1 && s.stride != 2)) {
    throw Error(Errc::InvalidSpec, "spatial conv needs an odd kernel and stride 1 or 2");
  }
  Conv3dGeometry g;
  g.kh = g.kw = s.k;
  g.sh = g.sw = s.stride;
  g.pad_h = g.pad_w = s.k / 2;
  g.in_ch = s.in_ch;
  g.out_ch = s.out_ch;
  return g;
}

/// k x 1 x 1 convolution with k - 1 zero frames of left padding and none on the right.
inline Conv3dGeometry temporal_causal_geometry(const ConvSpec& s) {
  if (s.kind != ConvKind::TemporalK11 || s.k < 1 || (s.stride != 1 && s.stride != 2)) {
    throw Error(Errc::InvalidSpec, "temporal conv needs k >= 1 and stride 1 or 2");
  }
  Conv3dGeometry g;
  g.kt = s.k;
  g.st = s.stride;
  g.pad_t_lo = s.k - 1;
  g.in_ch = s.in_ch;
  g.out_ch = s.out_ch;
  return g;
}

inline TemporalTransposedGeometry temporal_transposed_geometry(const ConvSpec& s) {
  if (s.kind != ConvKind::TemporalTransposedK11 || s.k < 1 || s.stride != 2) {
    throw Error(Errc::InvalidSpec, "transposed temporal conv needs k >= 1 and stride 2");
  }
  return {s.k, s.stride, s.in_ch, s.out_ch};
}

template <typename Real>
Tensor4<Real> conv_spatial(const Tensor4<Real>& x, const ConvSpec& spec, std::span<const Real> weight,
                           std::span<const Real> bias) {
  if (x.height() % spec.stride != 0 || x.width() % spec.stride != 0) {
    throw Error(Errc::ShapeMismatch, "spatial dims must be divisible by the stride");
  }
  return conv3d_forward(x, spatial_geometry(spec), weight, bias);
}

template <typename Real>
Tensor4<Real> conv_temporal_causal(const Tensor4<Real>& x, const ConvSpec& spec, std::span<const Real> weight,
                                   std::span<const Real> bias) {
  return conv3d_forward(x, temporal_causal_geometry(spec), weight, bias);
}

template <typename Real>
Tensor4<Real> conv_temporal_transposed(const Tensor4<Real>& x, const ConvSpec& spec, std::span<const Real> weight,
                                       std::span<const Real> bias) {
  return conv_transposed_forward(x, temporal_transposed_geometry(spec), weight, bias);
}

// ---------------------------------------------------------------------------
// Per-frame group normalization. Statistics never cross a temporal index.

struct GroupNormStats {
  std::vector<double> inv_std;  // [t][group]
};

template <typename Real>
Tensor4<Real> group_norm_forward(const Tensor4<Real>& x, int groups, double eps, std::span<const Real> gamma,
                                 std::span<const Real> beta, Tensor4<Real>* xhat_out, GroupNormStats* stats) {
  const Shape4 s = x.shape();
  if (s.c % groups != 0) throw Error(Errc::ShapeMismatch, "channels not divisible by group count");
  const int cg = s.c / groups;
  const std::size_t pixels = static_cast<std::size_t>(s.h) * s.w;
  const double n = static_cast<double>(pixels) * cg;
  Tensor4<Real> y(s);
  if (xhat_out) *xhat_out = Tensor4<Real>(s);
  if (stats) stats->inv_std.assign(static_cast<std::size_t>(s.t) * groups, 0.0);

  for (int t = 0; t < s.t; ++t) {
    const Real* src = x.frame(t).data();
    Real* dst = y.frame(t).data();
    Real* xh = xhat_out ? xhat_out->frame(t).data() : nullptr;
    for (int g = 0; g < groups; ++g) {
      double sum = 0.0, sq = 0.0;
      for (std::size_t p = 0; p < pixels; ++p) {
        const Real* v = src + p * s.c + g * cg;
        for (int c = 0; c < cg; ++c) sum += v[c];
      }
      const double mean = sum / n;
      for (std::size_t p = 0; p < pixels; ++p) {
        const Real* v = src + p * s.c + g * cg;
        for (int c = 0; c < cg; ++c) {
          const double d = v[c] - mean;
          sq += d * d;
        }
      }
      const double inv = 1.0 / std::sqrt(sq / n + eps);
      if (stats) stats->inv_std[static_cast<std::size_t>(t) * groups + g] = inv;
      for (std::size_t p = 0; p < pixels; ++p) {
        const std::size_t base = p * s.c + g * cg;
        for (int c = 0; c < cg; ++c) {
          const Real nh = static_cast<Real>((src[base + c] - mean) * inv);
          if (xh) xh[base + c] = nh;
          dst[base + c] = nh * gamma[g * cg + c] + beta[g * cg + c];
        }
      }
    }
  }
  return y;
}

template <typename Real>
Tensor4<Real> group_norm_backward(const Tensor4<Real>& xhat, const GroupNormStats& stats, int groups,
                                  std::span<const Real> gamma, const Tensor4<Real>& dy, std::span<Real> dgamma,
                                  std::span<Real> dbeta) {
  const Shape4 s = xhat.shape();
  const int cg = s.c / groups;
  const std::size_t pixels = static_cast<std::size_t>(s.h) * s.w;
  const double n = static_cast<double>(pixels) * cg;
  Tensor4<Real> dx(s);
  for (int t = 0; t < s.t; ++t) {
    const Real* xh = xhat.frame(t).data();
    const Real* go = dy.frame(t).data();
    Real* gi = dx.frame(t).data();
    for (int g = 0; g < groups; ++g) {
      double sum_d = 0.0, sum_dx = 0.0;
      for (std::size_t p = 0; p < pixels; ++p) {
        const std::size_t base = p * s.c + g * cg;
        for (int c = 0; c < cg; ++c) {
          const int ch = g * cg + c;
          dgamma[ch] += go[base + c] * xh[base + c];
          dbeta[ch] += go[base + c];
          const double d = static_cast<double>(go[base + c]) * gamma[ch];
          sum_d += d;
          sum_dx += d * xh[base + c];
        }
      }
      const double inv = stats.inv_std[static_cast<std::size_t>(t) * groups + g];
      for (std::size_t p = 0; p < pixels; ++p) {
        const std::size_t base = p * s.c + g * cg;
        for (int c = 0; c < cg; ++c) {
          const int ch = g * cg + c;
          const double d = static_cast<double>(go[base + c]) * gamma[ch];
          gi[base + c] = static_cast<Real>(inv * (d - sum_d / n - xh[base + c] * sum_dx / n));
        }
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Pointwise activations.

template <typename Real>
inline Real sigmoid(Real x) {
  return x >= 0 ? Real(1) / (Real(1) + std::exp(-x)) : std::exp(x) / (Real(1) + std::exp(x));
}

template <typename Real>
Tensor4<Real> silu_forward(const Tensor4<Real>& x) {
  Tensor4<Real> y(x.shape());
  auto in = x.values();
  auto out = y.values();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] * sigmoid(in[i]);
  return y;
}

template <typename Real>
Tensor4<Real> silu_backward(const Tensor4<Real>& x, const Tensor4<Real>& dy) {
  Tensor4<Real> dx(x.shape());
  auto in = x.values();
  auto go = dy.values();
  auto gi = dx.values();
  for (std::size_t i = 0; i < in.size(); ++i) {
    const Real s = sigmoid(in[i]);
    gi[i] = go[i] * s * (Real(1) + in[i] * (Real(1) - s));
  }
  return dx;
}

template <typename Real>
Tensor4<Real> leaky_relu_forward(const Tensor4<Real>& x, Real slope) {
  Tensor4<Real> y(x.shape());
  auto in = x.values();
  auto out = y.values();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] >= 0 ? in[i] : slope * in[i];
  return y;
}

template <typename Real>
Tensor4<Real> leaky_relu_backward(const Tensor4<Real>& x, const Tensor4<Real>& dy, Real slope) {
  Tensor4<Real> dx(x.shape());
  auto in = x.values();
  auto go = dy.values();
  auto gi = dx.values();
  for (std::size_t i = 0; i < in.size(); ++i) gi[i] = in[i] >= 0 ? go[i] : slope * go[i];
  return dx;
}

// ---------------------------------------------------------------------------
// Resampling helpers without parameters.

template <typename Real>
Tensor4<Real> upsample_nearest2_forward(const Tensor4<Real>& x) {
  const Shape4 s = x.shape();
  Tensor4<Real> y(s.t, 2 * s.h, 2 * s.w, s.c);
  for (int t = 0; t < s.t; ++t) {
    for (int yy = 0; yy < 2 * s.h; ++yy) {
      for (int xx = 0; xx < 2 * s.w; ++xx) std::copy_n(x.at(t, yy / 2, xx / 2), s.c, y.at(t, yy, xx));
    }
  }
  return y;
}

template <typename Real>
Tensor4<Real> upsample_nearest2_backward(const Tensor4<Real>& dy) {
  const Shape4 s = dy.shape();
  Tensor4<Real> dx(s.t, s.h / 2, s.w / 2, s.c);
  for (int t = 0; t < s.t; ++t) {
    for (int yy = 0; yy < s.h; ++yy) {
      for (int xx = 0; xx < s.w; ++xx) {
        const Real* go = dy.at(t, yy, xx);
        Real* gi = dx.at(t, yy / 2, xx / 2);
        for (int c = 0; c < s.c; ++c) gi[c] += go[c];
      }
    }
  }
  return dx;
}

/// Drops the first `n` frames (used after causal temporal upsampling so that
/// T latent frames map to 2T - 1 output frames).
template <typename Real>
Tensor4<Real> drop_leading_frames(const Tensor4<Real>& x, int n) {
  return slice_frames(x, n, x.frames() - n);
}

template <typename Real>
Tensor4<Real> drop_leading_frames_backward(const Tensor4<Real>& dy, int n) {
  Shape4 s = dy.shape();
  s.t += n;
  Tensor4<Real> dx(s);
  std::copy(dy.values().begin(), dy.values().end(), dx.values().begin() + n * dx.frame_size());
  return dx;
}

template <typename Real>
void add_inplace(Tensor4<Real>& y, const Tensor4<Real>& x) {
  require_same_shape(y, x, "add");
  auto a = y.values();
  auto b = x.values();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

}  // namespace voxtok::nn
