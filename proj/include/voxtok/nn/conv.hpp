#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "voxtok/error.hpp"
#include "voxtok/tensor.hpp"

namespace voxtok::nn {

/// Geometry of a dense 3D convolution. Temporal padding is asymmetric so the
/// same kernel serves causal (pad_t_lo = k - 1, pad_t_hi = 0) and centred use;
/// spatial padding is symmetric. Weights are laid out [kt][kh][kw][in][out].
struct Conv3dGeometry {
  int kt = 1, kh = 1, kw = 1;
  int st = 1, sh = 1, sw = 1;
  int pad_t_lo = 0, pad_t_hi = 0, pad_h = 0, pad_w = 0;
  int in_ch = 1, out_ch = 1;

  std::size_t weight_count() const noexcept {
    return static_cast<std::size_t>(kt) * kh * kw * in_ch * out_ch;
  }
  int fan_in() const noexcept { return kt * kh * kw * in_ch; }

  Shape4 output_shape(const Shape4& in) const {
    if (in.c != in_ch) {
      throw Error(Errc::ShapeMismatch, "conv expects " + std::to_string(in_ch) + " input channels, got " + in.str());
    }
    Shape4 out{(in.t + pad_t_lo + pad_t_hi - kt) / st + 1, (in.h + 2 * pad_h - kh) / sh + 1,
               (in.w + 2 * pad_w - kw) / sw + 1, out_ch};
    if (in.t + pad_t_lo + pad_t_hi < kt || in.h + 2 * pad_h < kh || in.w + 2 * pad_w < kw || out.t < 1 ||
        out.h < 1 || out.w < 1) {
      throw Error(Errc::ShapeMismatch, "input " + in.str() + " too small for kernel");
    }
    return out;
  }
};

namespace detail {

template <typename Real>
inline void axpy(Real* __restrict y, const Real* __restrict x, Real a, int n) {
  for (int i = 0; i < n; ++i) y[i] += a * x[i];
}

// [tap][in][out] -> [tap][out][in]
template <typename Real>
std::vector<Real> transpose_taps(std::span<const Real> w, int taps, int in_ch, int out_ch) {
  std::vector<Real> t(w.size());
  for (int k = 0; k < taps; ++k) {
    const Real* src = w.data() + static_cast<std::size_t>(k) * in_ch * out_ch;
    Real* dst = t.data() + static_cast<std::size_t>(k) * in_ch * out_ch;
    for (int i = 0; i < in_ch; ++i) {
      for (int o = 0; o < out_ch; ++o) dst[o * in_ch + i] = src[i * out_ch + o];
    }
  }
  return t;
}

template <typename Real>
void check_params(const Conv3dGeometry& g, std::span<const Real> weight, std::span<const Real> bias) {
  if (weight.size() != g.weight_count() || (!bias.empty() && bias.size() != static_cast<std::size_t>(g.out_ch))) {
    throw Error(Errc::ShapeMismatch, "conv parameter size mismatch");
  }
}

}  // namespace detail

template <typename Real>
Tensor4<Real> conv3d_forward(const Tensor4<Real>& x, const Conv3dGeometry& g, std::span<const Real> weight,
                             std::span<const Real> bias) {
  detail::check_params(g, weight, bias);
  const Shape4 in = x.shape();
  const Shape4 os = g.output_shape(in);
  Tensor4<Real> y(os);
  const std::size_t tap_stride = static_cast<std::size_t>(g.in_ch) * g.out_ch;

  for (int to = 0; to < os.t; ++to) {
    for (int oy = 0; oy < os.h; ++oy) {
      for (int ox = 0; ox < os.w; ++ox) {
        Real* __restrict o = y.at(to, oy, ox);
        if (!bias.empty()) std::copy(bias.begin(), bias.end(), o);
        for (int a = 0; a < g.kt; ++a) {
          const int ti = to * g.st + a - g.pad_t_lo;
          if (ti < 0 || ti >= in.t) continue;
          for (int b = 0; b < g.kh; ++b) {
            const int yi = oy * g.sh + b - g.pad_h;
            if (yi < 0 || yi >= in.h) continue;
            for (int c = 0; c < g.kw; ++c) {
              const int xi = ox * g.sw + c - g.pad_w;
              if (xi < 0 || xi >= in.w) continue;
              const Real* src = x.at(ti, yi, xi);
              const Real* wk = weight.data() + ((a * g.kh + b) * g.kw + c) * tap_stride;
              for (int ci = 0; ci < g.in_ch; ++ci) detail::axpy(o, wk + ci * g.out_ch, src[ci], g.out_ch);
            }
          }
        }
      }
    }
  }
  return y;
}

/// Accumulates weight and bias gradients; returns the input gradient when
/// `want_input_grad` is set (an empty tensor otherwise).
template <typename Real>
Tensor4<Real> conv3d_backward(const Tensor4<Real>& x, const Conv3dGeometry& g, std::span<const Real> weight,
                              const Tensor4<Real>& dy, std::span<Real> dweight, std::span<Real> dbias,
                              bool want_input_grad = true) {
  const Shape4 in = x.shape();
  const Shape4 os = g.output_shape(in);
  if (dy.shape() != os) throw Error(Errc::ShapeMismatch, "conv output gradient shape " + dy.shape().str());
  if (dweight.size() != g.weight_count()) throw Error(Errc::ShapeMismatch, "conv weight gradient size");

  const int taps = g.kt * g.kh * g.kw;
  const std::size_t tap_stride = static_cast<std::size_t>(g.in_ch) * g.out_ch;
  std::vector<Real> wt;
  Tensor4<Real> dx;
  if (want_input_grad) {
    wt = detail::transpose_taps<Real>(weight, taps, g.in_ch, g.out_ch);
    dx = Tensor4<Real>(in);
  }

  for (int to = 0; to < os.t; ++to) {
    for (int oy = 0; oy < os.h; ++oy) {
      for (int ox = 0; ox < os.w; ++ox) {
        const Real* go = dy.at(to, oy, ox);
        if (!dbias.empty()) {
          for (int co = 0; co < g.out_ch; ++co) dbias[co] += go[co];
        }
        for (int a = 0; a < g.kt; ++a) {
          const int ti = to * g.st + a - g.pad_t_lo;
          if (ti < 0 || ti >= in.t) continue;
          for (int b = 0; b < g.kh; ++b) {
            const int yi = oy * g.sh + b - g.pad_h;
            if (yi < 0 || yi >= in.h) continue;
            for (int c = 0; c < g.kw; ++c) {
              const int xi = ox * g.sw + c - g.pad_w;
              if (xi < 0 || xi >= in.w) continue;
              const std::size_t tap = (a * g.kh + b) * g.kw + c;
              const Real* src = x.at(ti, yi, xi);
              Real* dwk = dweight.data() + tap * tap_stride;
              for (int ci = 0; ci < g.in_ch; ++ci) detail::axpy(dwk + ci * g.out_ch, go, src[ci], g.out_ch);
              if (want_input_grad) {
                Real* gi = dx.at(ti, yi, xi);
                const Real* wtk = wt.data() + tap * tap_stride;
                for (int co = 0; co < g.out_ch; ++co) detail::axpy(gi, wtk + co * g.in_ch, go[co], g.in_ch);
              }
            }
          }
        }
      }
    }
  }
  return dx;
}

/// Causal transposed temporal convolution with stride s: input frame i writes
/// to output frames s*i + a for a < k, truncated to s*T frames. Output frame f
/// (1-based) therefore only sees inputs <= ceil(f / s). Weights [k][in][out].
struct TemporalTransposedGeometry {
  int k = 3;
  int stride = 2;
  int in_ch = 1, out_ch = 1;

  std::size_t weight_count() const noexcept { return static_cast<std::size_t>(k) * in_ch * out_ch; }
  int fan_in() const noexcept { return std::max(1, (k + stride - 1) / stride) * in_ch; }
};

template <typename Real>
Tensor4<Real> conv_transposed_forward(const Tensor4<Real>& x, const TemporalTransposedGeometry& g,
                                      std::span<const Real> weight, std::span<const Real> bias) {
  if (x.channels() != g.in_ch) throw Error(Errc::ShapeMismatch, "transposed conv input channels");
  if (weight.size() != g.weight_count() || (!bias.empty() && bias.size() != static_cast<std::size_t>(g.out_ch))) {
    throw Error(Errc::ShapeMismatch, "transposed conv parameter size mismatch");
  }
  const int t_out = g.stride * x.frames();
  Tensor4<Real> y(t_out, x.height(), x.width(), g.out_ch);
  const std::size_t tap_stride = static_cast<std::size_t>(g.in_ch) * g.out_ch;
  for (int t = 0; t < t_out; ++t) {
    for (int yy = 0; yy < x.height(); ++yy) {
      for (int xx = 0; xx < x.width(); ++xx) {
        Real* o = y.at(t, yy, xx);
        if (!bias.empty()) std::copy(bias.begin(), bias.end(), o);
      }
    }
  }
  for (int i = 0; i < x.frames(); ++i) {
    for (int a = 0; a < g.k; ++a) {
      const int t = g.stride * i + a;
      if (t >= t_out) break;
      const Real* wk = weight.data() + a * tap_stride;
      for (int yy = 0; yy < x.height(); ++yy) {
        for (int xx = 0; xx < x.width(); ++xx) {
          const Real* src = x.at(i, yy, xx);
          Real* o = y.at(t, yy, xx);
          for (int ci = 0; ci < g.in_ch; ++ci) detail::axpy(o, wk + ci * g.out_ch, src[ci], g.out_ch);
        }
      }
    }
  }
  return y;
}

template <typename Real>
Tensor4<Real> conv_transposed_backward(const Tensor4<Real>& x, const TemporalTransposedGeometry& g,
                                       std::span<const Real> weight, const Tensor4<Real>& dy,
                                       std::span<Real> dweight, std::span<Real> dbias) {
  const int t_out = g.stride * x.frames();
  if (dy.shape() != Shape4{t_out, x.height(), x.width(), g.out_ch}) {
    throw Error(Errc::ShapeMismatch, "transposed conv output gradient shape");
  }
  const std::size_t tap_stride = static_cast<std::size_t>(g.in_ch) * g.out_ch;
  const auto wt = detail::transpose_taps<Real>(weight, g.k, g.in_ch, g.out_ch);
  Tensor4<Real> dx(x.shape());
  if (!dbias.empty()) {
    for (std::size_t p = 0; p < dy.size(); p += g.out_ch) {
      for (int co = 0; co < g.out_ch; ++co) dbias[co] += dy.values()[p + co];
    }
  }
  for (int i = 0; i < x.frames(); ++i) {
    for (int a = 0; a < g.k; ++a) {
      const int t = g.stride * i + a;
      if (t >= t_out) break;
      Real* dwk = dweight.data() + a * tap_stride;
      const Real* wtk = wt.data() + a * tap_stride;
      for (int yy = 0; yy < x.height(); ++yy) {
        for (int xx = 0; xx < x.width(); ++xx) {
          const Real* src = x.at(i, yy, xx);
          const Real* go = dy.at(t, yy, xx);
          Real* gi = dx.at(i, yy, xx);
          for (int ci = 0; ci < g.in_ch; ++ci) detail::axpy(dwk + ci * g.out_ch, go, src[ci], g.out_ch);
          for (int co = 0; co < g.out_ch; ++co) detail::axpy(gi, wtk + co * g.in_ch, go[co], g.in_ch);
        }
      }
    }
  }
  return dx;
}

}  // namespace voxtok::nn
