#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <type_traits>
#include <utility>
#include <vector>

#include "voxtok/codec.hpp"

namespace voxtok {

inline constexpr int kWindowSlices = 9;

/// Overlapping 9-slice windows (1,9), (9,17), ... and which of each window's
/// two tokens survive: both for the first window, only the second afterwards.
struct WindowPlan {
  std::vector<std::pair<int, int>> windows;  // inclusive, 1-based slice ranges
  std::vector<std::array<bool, 2>> retention;

  int retained_tokens() const {
    int n = 0;
    for (const auto& r : retention) n += static_cast<int>(r[0]) + static_cast<int>(r[1]);
    return n;
  }
};

inline void check_tiled_depth(int depth) {
  if (depth < kWindowSlices || (depth - 1) % 8 != 0) {
    throw Error(Errc::InvalidLength, "depth " + std::to_string(depth) +
                                         " is not a valid tiled length (need D >= 9 and D = 1 (mod 8))");
  }
}

inline WindowPlan plan_windows(int depth) {
  check_tiled_depth(depth);
  WindowPlan plan;
  const int count = (depth - 1) / 8;
  for (int w = 0; w < count; ++w) {
    plan.windows.emplace_back(8 * w + 1, 8 * w + 9);
    plan.retention.push_back({w == 0, true});
  }
  return plan;
}

/// Per-window encoder passes plus the retained token sequence
/// [z1^1, z2^1, z2^2, ..., z2^T]. Caches are filled only when requested.
template <typename Real>
struct TiledEncoding {
  WindowPlan plan;
  std::vector<nn::Cache<Real>> caches;
  Tensor4<Real> y;  // retained pre-quantization latents, (1 + T) frames
  Quantized<Real> q;
};

template <typename Real>
TiledEncoding<Real> tiled_encode_full(const Codec<Real>& codec, const CodecParams<Real>& params,
                                      const BasicVolume<Real>& v, bool record) {
  TiledEncoding<Real> out;
  out.plan = plan_windows(v.depth());
  const int n = static_cast<int>(out.plan.windows.size());
  if (record) out.caches.resize(n);

  Tensor4<Real> seq;
  int next = 0;
  for (int w = 0; w < n; ++w) {
    const auto [first, last] = out.plan.windows[w];
    const auto window = crop_slices(v, first - 1, last - first + 1);
    const auto wav = haar_forward(window, PadMode::CausalReplicate);
    codec.check_wavelet_input(wav);
    const auto y = codec.encoder().forward(wav.coeffs, params.encoder, record ? &out.caches[w] : nullptr);
    if (w == 0) {
      Shape4 s = y.shape();
      s.t = out.plan.retained_tokens();
      seq = Tensor4<Real>(s);
    }
    for (int tok = 0; tok < 2; ++tok) {
      if (!out.plan.retention[w][tok]) continue;
      std::copy_n(y.frame(tok).begin(), y.frame_size(), seq.frame(next++).begin());
    }
  }
  out.q = quantize(seq, codec.config().d);
  out.q.codes.config_id = codec.config().id();
  out.y = std::move(seq);
  return out;
}

/// Routes a gradient on the retained latent sequence back through every
/// window's encoder pass; discarded tokens receive zero gradient.
template <typename Real>
void tiled_encode_backward(const Codec<Real>& codec, const CodecParams<Real>& params, const TiledEncoding<Real>& enc,
                           const Tensor4<Real>& dy_seq, std::span<std::type_identity_t<Real>> grads) {
  require_same_shape(dy_seq, enc.y, "tiled gradient");
  int next = 0;
  for (std::size_t w = 0; w < enc.plan.windows.size(); ++w) {
    Shape4 s = dy_seq.shape();
    s.t = 2;
    Tensor4<Real> dy(s);
    for (int tok = 0; tok < 2; ++tok) {
      if (!enc.plan.retention[w][tok]) continue;
      std::copy_n(dy_seq.frame(next++).begin(), dy_seq.frame_size(), dy.frame(tok).begin());
    }
    codec.encoder().backward(dy, params.encoder, enc.caches.at(w), grads, false);
  }
}

template <typename Real>
TokenGrid tiled_encode(const Codec<Real>& codec, const CodecParams<Real>& params, const BasicVolume<Real>& v) {
  return tiled_encode_full(codec, params, v, false).q.codes;
}

template <typename Real>
TokenGrid one_shot_encode(const Codec<Real>& codec, const CodecParams<Real>& params, const BasicVolume<Real>& v) {
  return encode(codec, params, haar_forward(v, PadMode::CausalReplicate)).q.codes;
}

/// Fraction of token bits on which the two grids disagree.
inline double hamming_disagreement(const TokenGrid& a, const TokenGrid& b) {
  if (a.t != b.t || a.h != b.h || a.w != b.w || a.d != b.d) throw Error(Errc::ShapeMismatch, "token grids differ in shape");
  std::size_t diff = 0;
  for (std::size_t i = 0; i < a.codes.size(); ++i) diff += std::popcount(a.codes[i] ^ b.codes[i]);
  return static_cast<double>(diff) / (static_cast<double>(a.codes.size()) * a.d);
}

/// x_hat = W^-1(G(z)) from the full token sequence in a single decoder pass,
/// clamped to the normalized range.
template <typename Real>
BasicVolume<Real> reconstruct(const Codec<Real>& codec, const CodecParams<Real>& params, const TokenGrid& grid) {
  auto w = decode(codec, params, grid);
  auto v = haar_inverse(w, Domain::Normalized);
  for (auto& x : v.values()) {
    if (!std::isfinite(static_cast<double>(x))) throw Error(Errc::NonFiniteLoss, "non-finite reconstruction");
    x = std::clamp(x, Real(-1), Real(1));
  }
  return v;
}

}  // namespace voxtok
