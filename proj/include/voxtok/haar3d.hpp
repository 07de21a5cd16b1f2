#pragma once

#include <numbers>

#include "voxtok/error.hpp"
#include "voxtok/tensor.hpp"
#include "voxtok/volume.hpp"

namespace voxtok {

enum class PadMode { CausalReplicate, NoPad };

/// Eight Haar subbands per 2x2x2 block, stored as an F x H/2 x W/2 x 8 tensor.
///
/// Channel index = (temporal_high << 2) | (vertical_high << 1) | horizontal_high,
/// so channel 0 is LLL. Under CausalReplicate a copy of slice 1 is prepended,
/// making frame 1 a function of slice 1 alone.
template <typename Real>
struct WaveletVolume {
  Tensor4<Real> coeffs;
  PadMode pad_mode = PadMode::NoPad;
  int original_depth = 0;
  Spacing spacing{};

  int frames() const noexcept { return coeffs.frames(); }
};

inline constexpr int kSubbands = 8;

inline int wavelet_frames(int depth, PadMode mode) {
  if (mode == PadMode::CausalReplicate) {
    if (depth % 2 != 1) throw Error(Errc::ParityMismatch, "CausalReplicate needs odd depth, got " + std::to_string(depth));
    return (depth + 1) / 2;
  }
  if (depth % 2 != 0) throw Error(Errc::ParityMismatch, "NoPad needs even depth, got " + std::to_string(depth));
  return depth / 2;
}

namespace detail {

// Butterflies run unscaled and the 1/(2 sqrt 2) factor is applied once at the
// end, so no product feeds a later subtraction (keeps FMA contraction from
// leaving residue in bands that should cancel exactly).
template <typename Real>
inline constexpr Real kBlockScale = std::numbers::sqrt2_v<Real> / 4;

// In-place separable transform of one block laid out as x[t][y][x] -> band[(t<<2)|(y<<1)|x].
template <typename Real>
inline void forward_block(Real (&v)[8]) {
  for (int s : {4, 2, 1}) {
    for (int i = 0; i < 8; ++i) {
      if (i & s) continue;
      const Real a = v[i], b = v[i | s];
      v[i] = a + b;
      v[i | s] = b - a;
    }
  }
  for (auto& x : v) x *= kBlockScale<Real>;
}

template <typename Real>
inline void inverse_block(Real (&v)[8]) {
  for (int s : {1, 2, 4}) {
    for (int i = 0; i < 8; ++i) {
      if (i & s) continue;
      const Real lo = v[i], hi = v[i | s];
      v[i] = lo - hi;
      v[i | s] = lo + hi;
    }
  }
  for (auto& x : v) x *= kBlockScale<Real>;
}

}  // namespace detail

template <typename Real>
WaveletVolume<Real> haar_forward(const BasicVolume<Real>& v, PadMode mode) {
  if (v.height() % 2 != 0 || v.width() % 2 != 0) {
    throw Error(Errc::OddSpatialDim, "H and W must be even, got " + v.shape().str());
  }
  const int frames = wavelet_frames(v.depth(), mode);
  const int shift = mode == PadMode::CausalReplicate ? 1 : 0;
  const int h2 = v.height() / 2, w2 = v.width() / 2;

  WaveletVolume<Real> out{Tensor4<Real>(frames, h2, w2, kSubbands), mode, v.depth(), v.spacing()};
  for (int f = 0; f < frames; ++f) {
    const int s0 = std::max(0, 2 * f - shift);
    const int s1 = 2 * f + 1 - shift;
    for (int y = 0; y < h2; ++y) {
      for (int x = 0; x < w2; ++x) {
        Real b[8];
        for (int i = 0; i < 8; ++i) {
          const int s = (i & 4) ? s1 : s0;
          b[i] = v(s, 2 * y + ((i >> 1) & 1), 2 * x + (i & 1));
        }
        detail::forward_block(b);
        Real* dst = out.coeffs.at(f, y, x);
        for (int i = 0; i < 8; ++i) dst[i] = b[i];
      }
    }
  }
  return out;
}

/// Inverse transform; the synthetic slice of CausalReplicate is discarded.
template <typename Real>
BasicVolume<Real> haar_inverse(const WaveletVolume<Real>& w, Domain domain = Domain::Normalized) {
  const auto& c = w.coeffs;
  if (c.channels() != kSubbands) throw Error(Errc::ChannelMismatch, "wavelet volume needs 8 subbands");
  if (wavelet_frames(w.original_depth, w.pad_mode) != c.frames()) {
    throw Error(Errc::ShapeMismatch, "frame count does not match original depth");
  }
  const int shift = w.pad_mode == PadMode::CausalReplicate ? 1 : 0;
  BasicVolume<Real> out(VolumeShape{w.original_depth, 2 * c.height(), 2 * c.width()}, w.spacing, domain);
  for (int f = 0; f < c.frames(); ++f) {
    for (int y = 0; y < c.height(); ++y) {
      for (int x = 0; x < c.width(); ++x) {
        Real b[8];
        const Real* src = c.at(f, y, x);
        for (int i = 0; i < 8; ++i) b[i] = src[i];
        detail::inverse_block(b);
        for (int i = 0; i < 8; ++i) {
          const int s = 2 * f + ((i >> 2) & 1) - shift;
          if (s < 0) continue;
          out(s, 2 * y + ((i >> 1) & 1), 2 * x + (i & 1)) = b[i];
        }
      }
    }
  }
  return out;
}

/// Adjoint of haar_inverse: maps a gradient on the reconstructed volume back
/// onto the subbands. The dropped synthetic slice receives zero gradient.
template <typename Real>
Tensor4<Real> haar_inverse_backward(const BasicVolume<Real>& grad, PadMode mode) {
  if (mode == PadMode::NoPad) return haar_forward(grad, PadMode::NoPad).coeffs;
  BasicVolume<Real> padded(VolumeShape{grad.depth() + 1, grad.height(), grad.width()}, grad.spacing(), grad.domain());
  std::copy(grad.values().begin(), grad.values().end(), padded.values().begin() + grad.slice_size());
  return haar_forward(padded, PadMode::NoPad).coeffs;
}

}  // namespace voxtok
