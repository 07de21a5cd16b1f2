#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "voxtok/error.hpp"
#include "voxtok/nn/ops.hpp"
#include "voxtok/tensor.hpp"

namespace voxtok {

struct QuantizerConfig {
  int d = 18;
  double beta = 0.25;
  double entropy_weight = 0.1;

  std::uint64_t codebook_size() const { return std::uint64_t{1} << d; }
  void validate() const {
    if (d < 1 || d > 30) throw Error(Errc::InvalidSpec, "token bits must lie in [1, 30]");
    if (beta < 0 || entropy_weight < 0) throw Error(Errc::InvalidSpec, "loss weights must be non-negative");
  }
};

/// T' x H' x W' grid of packed codes, each < 2^d.
struct TokenGrid {
  int t = 0, h = 0, w = 0;
  int d = 0;
  std::string config_id;
  std::vector<std::uint32_t> codes;

  std::uint32_t& operator()(int i, int y, int x) { return codes[(static_cast<std::size_t>(i) * h + y) * w + x]; }
  std::uint32_t operator()(int i, int y, int x) const { return codes[(static_cast<std::size_t>(i) * h + y) * w + x]; }
  std::size_t size() const noexcept { return codes.size(); }
  bool operator==(const TokenGrid&) const = default;
};

/// Bit i of the code is set when channel i is +1 (channel 0 is the LSB).
template <typename Real>
std::uint32_t pack_bits(std::span<const Real> bits) {
  if (bits.empty() || bits.size() > 30) throw Error(Errc::InvalidSpec, "token bits must lie in [1, 30]");
  std::uint32_t code = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] > 0) code |= (std::uint32_t{1} << i);
  }
  return code;
}

template <typename Real>
std::uint32_t pack_bits(const std::vector<Real>& bits) {
  return pack_bits(std::span<const Real>(bits));
}

template <typename Real = float>
std::vector<Real> unpack_bits(std::uint32_t code, int d) {
  if (d < 1 || d > 30) throw Error(Errc::InvalidSpec, "token bits must lie in [1, 30]");
  if (code >= (std::uint32_t{1} << d)) {
    throw Error(Errc::CodeOutOfRange, "code " + std::to_string(code) + " needs more than " + std::to_string(d) + " bits");
  }
  std::vector<Real> bits(d);
  for (int i = 0; i < d; ++i) bits[i] = (code >> i) & 1u ? Real(1) : Real(-1);
  return bits;
}

template <typename Real>
struct Quantized {
  TokenGrid codes;
  Tensor4<Real> e;  // +/-1 per channel
};

/// Per-channel sign with sign(0) = +1. The backward pass is the identity
/// (straight-through), so callers pass dL/de straight on as dL/dy.
template <typename Real>
Quantized<Real> quantize(const Tensor4<Real>& y, int d) {
  if (y.channels() != d) {
    throw Error(Errc::ChannelMismatch, "quantizer expects " + std::to_string(d) + " channels, got " +
                                           std::to_string(y.channels()));
  }
  Quantized<Real> q{TokenGrid{y.frames(), y.height(), y.width(), d, {}, {}}, Tensor4<Real>(y.shape())};
  q.codes.codes.resize(static_cast<std::size_t>(y.frames()) * y.height() * y.width());
  const auto in = y.values();
  auto out = q.e.values();
  for (std::size_t p = 0; p < q.codes.codes.size(); ++p) {
    std::uint32_t code = 0;
    for (int i = 0; i < d; ++i) {
      const bool pos = in[p * d + i] >= Real(0);
      out[p * d + i] = pos ? Real(1) : Real(-1);
      if (pos) code |= (std::uint32_t{1} << i);
    }
    q.codes.codes[p] = code;
  }
  return q;
}

/// Binary expansion of a token grid, the decoder-side inverse of packing.
template <typename Real>
Tensor4<Real> expand_codes(const TokenGrid& g) {
  if (g.d < 1 || g.d > 30) throw Error(Errc::InvalidSpec, "token bits must lie in [1, 30]");
  if (g.codes.size() != static_cast<std::size_t>(g.t) * g.h * g.w) {
    throw Error(Errc::ShapeMismatch, "token grid size does not match its shape");
  }
  Tensor4<Real> e(g.t, g.h, g.w, g.d);
  auto out = e.values();
  const std::uint32_t limit = std::uint32_t{1} << g.d;
  for (std::size_t p = 0; p < g.codes.size(); ++p) {
    const std::uint32_t c = g.codes[p];
    if (c >= limit) throw Error(Errc::CodeOutOfRange, "code " + std::to_string(c) + " >= 2^" + std::to_string(g.d));
    for (int i = 0; i < g.d; ++i) out[p * g.d + i] = (c >> i) & 1u ? Real(1) : Real(-1);
  }
  return e;
}

/// mean_positions ||sg[y] - e||^2 + beta ||y - sg[e]||^2. Only the second term
/// carries gradient: dL/dy = 2 beta (y - e) / positions.
template <typename Real>
double vq_loss(const Tensor4<Real>& y, const Tensor4<Real>& e, double beta, Tensor4<Real>* grad = nullptr) {
  require_same_shape(y, e, "vq_loss");
  const double positions = static_cast<double>(y.frames()) * y.height() * y.width();
  double sq = 0.0;
  const auto a = y.values();
  const auto b = e.values();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    sq += d * d;
  }
  if (grad) {
    *grad = Tensor4<Real>(y.shape());
    auto g = grad->values();
    for (std::size_t i = 0; i < a.size(); ++i) g[i] = static_cast<Real>(2.0 * beta * (a[i] - b[i]) / positions);
  }
  return (1.0 + beta) * sq / positions;
}

namespace detail {

inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// Binary entropy (nats) of p = sigmoid(z), stable for large |z|.
inline double binary_entropy_logit(double z) {
  const double p = nn::sigmoid(z);
  return p * softplus(-z) + (1.0 - p) * softplus(z);
}

inline double binary_entropy(double p) {
  double h = 0.0;
  if (p > 0.0) h -= p * std::log(p);
  if (p < 1.0) h -= (1.0 - p) * std::log1p(-p);
  return h;
}

}  // namespace detail

/// Bitwise factorized entropy regularizer. With p = sigmoid(2y) the soft
/// probability of each bit being +1:
///   mean_positions sum_i H(p_i) - sum_i H(mean_positions p_i)
/// Low when each position is confident but bits are balanced across the batch.
template <typename Real>
double entropy_loss(const Tensor4<Real>& y, Tensor4<Real>* grad = nullptr) {
  const int d = y.channels();
  const std::size_t positions = y.size() / d;
  const auto v = y.values();
  std::vector<double> mean_p(d, 0.0);
  double per_sample = 0.0;
  for (std::size_t p = 0; p < positions; ++p) {
    for (int i = 0; i < d; ++i) {
      const double z = 2.0 * v[p * d + i];
      per_sample += detail::binary_entropy_logit(z);
      mean_p[i] += nn::sigmoid(z);
    }
  }
  per_sample /= positions;
  double batch = 0.0;
  std::vector<double> dbatch(d);
  for (int i = 0; i < d; ++i) {
    mean_p[i] /= positions;
    batch += detail::binary_entropy(mean_p[i]);
    // dH/dp at the batch mean; clamp keeps the log finite when a bit saturates
    const double pm = std::clamp(mean_p[i], 1e-12, 1.0 - 1e-12);
    dbatch[i] = std::log1p(-pm) - std::log(pm);
  }
  if (grad) {
    *grad = Tensor4<Real>(y.shape());
    auto g = grad->values();
    for (std::size_t p = 0; p < positions; ++p) {
      for (int i = 0; i < d; ++i) {
        const double z = 2.0 * v[p * d + i];
        const double s = nn::sigmoid(z);
        const double dp_dy = 2.0 * s * (1.0 - s);
        // dH(sigmoid(z))/dp = -z
        g[p * d + i] = static_cast<Real>((-z - dbatch[i]) * dp_dy / positions);
      }
    }
  }
  return per_sample - batch;
}

}  // namespace voxtok
