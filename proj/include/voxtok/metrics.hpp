#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <vector>

#include "voxtok/lfq.hpp"
#include "voxtok/volume.hpp"

namespace voxtok {

// All image metrics compare (x + 1) / 2, i.e. intensities mapped to [0, 1].

struct MetricReport {
  double psnr = 0.0;  // +inf when mse == 0
  double ssim = 0.0;
  double mse = 0.0;
  std::size_t unique_codes = 0;
  double perplexity = 0.0;
};

namespace detail {

template <typename Real>
void check_metric_shapes(const BasicVolume<Real>& a, const BasicVolume<Real>& b) {
  if (a.shape() != b.shape()) throw Error(Errc::ShapeMismatch, "metric inputs differ: " + a.shape().str() + " vs " + b.shape().str());
}

inline std::vector<double> unit_range(const auto& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (static_cast<double>(v.values()[i]) + 1.0) * 0.5;
  return out;
}

// Normalized Gaussian taps; at borders the in-bounds taps are renormalized.
inline std::vector<double> gaussian_filter3d(const std::vector<double>& in, VolumeShape s, int radius, double sigma) {
  std::vector<double> taps(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) taps[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  auto pass = [&](const std::vector<double>& src, int axis) {
    std::vector<double> dst(src.size());
    const int n[3] = {s.d, s.h, s.w};
    const std::size_t stride[3] = {static_cast<std::size_t>(s.h) * s.w, static_cast<std::size_t>(s.w), 1};
    for (int z = 0; z < s.d; ++z) {
      for (int y = 0; y < s.h; ++y) {
        for (int x = 0; x < s.w; ++x) {
          const int pos[3] = {z, y, x};
          const std::size_t idx = z * stride[0] + y * stride[1] + x;
          double acc = 0.0, wsum = 0.0;
          for (int k = -radius; k <= radius; ++k) {
            const int q = pos[axis] + k;
            if (q < 0 || q >= n[axis]) continue;
            acc += taps[k + radius] * src[idx + static_cast<std::ptrdiff_t>(k) * static_cast<std::ptrdiff_t>(stride[axis])];
            wsum += taps[k + radius];
          }
          dst[idx] = acc / wsum;
        }
      }
    }
    return dst;
  };
  return pass(pass(pass(in, 0), 1), 2);
}

}  // namespace detail

template <typename Real>
double mse(const BasicVolume<Real>& a, const BasicVolume<Real>& b) {
  detail::check_metric_shapes(a, b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = (static_cast<double>(a.values()[i]) - static_cast<double>(b.values()[i])) * 0.5;
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

inline double psnr_from_mse(double m) {
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / m);
}

template <typename Real>
double psnr(const BasicVolume<Real>& a, const BasicVolume<Real>& b) {
  return psnr_from_mse(mse(a, b));
}

/// Mean 3D SSIM: 7x7x7 Gaussian window, sigma 1.5, K1 = 0.01, K2 = 0.03, L = 1.
template <typename Real>
double ssim(const BasicVolume<Real>& a, const BasicVolume<Real>& b) {
  detail::check_metric_shapes(a, b);
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const auto x = detail::unit_range(a);
  const auto y = detail::unit_range(b);
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto s = a.shape();
  const auto mx = detail::gaussian_filter3d(x, s, 3, 1.5);
  const auto my = detail::gaussian_filter3d(y, s, 3, 1.5);
  const auto sxx = detail::gaussian_filter3d(xx, s, 3, 1.5);
  const auto syy = detail::gaussian_filter3d(yy, s, 3, 1.5);
  const auto sxy = detail::gaussian_filter3d(xy, s, 3, 1.5);
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i];
    const double vy = syy[i] - my[i] * my[i];
    const double cxy = sxy[i] - mx[i] * my[i];
    acc += ((2 * mx[i] * my[i] + c1) * (2 * cxy + c2)) / ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return acc / static_cast<double>(x.size());
}

struct CodeUsage {
  std::size_t unique_count = 0;
  double perplexity = 0.0;
};

/// Histogram over all codes; perplexity = exp(entropy) of the empirical distribution.
class CodeUsageCounter {
 public:
  void add(const TokenGrid& g) {
    if (d_ == 0) d_ = g.d;
    if (g.d != d_) throw Error(Errc::MixedBitWidth, "grids with d=" + std::to_string(d_) + " and d=" + std::to_string(g.d));
    for (auto c : g.codes) ++hist_[c];
    total_ += g.codes.size();
  }

  CodeUsage result() const {
    CodeUsage u;
    u.unique_count = hist_.size();
    if (total_ == 0) return u;
    double h = 0.0;
    for (const auto& [code, n] : hist_) {
      const double p = static_cast<double>(n) / static_cast<double>(total_);
      h -= p * std::log(p);
    }
    u.perplexity = std::exp(h);
    return u;
  }

 private:
  int d_ = 0;
  std::size_t total_ = 0;
  std::map<std::uint32_t, std::size_t> hist_;
};

inline CodeUsage code_usage(const std::vector<TokenGrid>& grids) {
  CodeUsageCounter c;
  for (const auto& g : grids) c.add(g);
  return c.result();
}

template <typename Real>
MetricReport evaluate_pair(const BasicVolume<Real>& reference, const BasicVolume<Real>& reconstruction,
                           const TokenGrid* tokens = nullptr) {
  MetricReport r;
  r.mse = mse(reference, reconstruction);
  r.psnr = psnr_from_mse(r.mse);
  r.ssim = ssim(reference, reconstruction);
  if (tokens) {
    const auto u = code_usage({*tokens});
    r.unique_codes = u.unique_count;
    r.perplexity = u.perplexity;
  }
  return r;
}

}  // namespace voxtok
