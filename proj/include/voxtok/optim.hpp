#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "voxtok/error.hpp"

namespace voxtok {

struct AdamConfig {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
};

template <typename Real>
struct AdamState {
  std::vector<Real> m, v;
  std::uint64_t step = 0;

  void reset(std::size_t n) {
    m.assign(n, Real(0));
    v.assign(n, Real(0));
    step = 0;
  }
  bool operator==(const AdamState&) const = default;
};

/// One bias-corrected Adam update. Moments are accumulated in double and
/// stored back in Real, so a state reloaded from disk continues bit-exactly.
template <typename Real>
void adam_step(std::span<Real> params, std::span<const Real> grads, AdamState<Real>& s, const AdamConfig& cfg) {
  if (params.size() != grads.size() || s.m.size() != params.size() || s.v.size() != params.size()) {
    throw Error(Errc::ShapeMismatch, "adam state does not match parameters");
  }
  ++s.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    const double m = cfg.beta1 * s.m[i] + (1.0 - cfg.beta1) * g;
    const double v = cfg.beta2 * s.v[i] + (1.0 - cfg.beta2) * g * g;
    s.m[i] = static_cast<Real>(m);
    s.v[i] = static_cast<Real>(v);
    params[i] = static_cast<Real>(params[i] - cfg.lr * (m / c1) / (std::sqrt(v / c2) + cfg.eps));
  }
}

template <typename Real>
double global_norm(std::initializer_list<std::span<const Real>> groups) {
  double sq = 0.0;
  for (auto g : groups)
    for (Real x : g) sq += static_cast<double>(x) * x;
  return std::sqrt(sq);
}

/// Rescales all groups jointly so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
template <typename Real>
double clip_grad_norm(std::initializer_list<std::span<Real>> groups, double max_norm) {
  double sq = 0.0;
  for (auto g : groups)
    for (Real x : g) sq += static_cast<double>(x) * x;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && std::isfinite(norm)) {
    const double scale = max_norm / norm;
    for (auto g : groups)
      for (Real& x : g) x = static_cast<Real>(x * scale);
  }
  return norm;
}

}  // namespace voxtok
