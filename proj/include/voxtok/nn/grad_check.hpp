#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "voxtok/nn/module.hpp"

namespace voxtok::nn {

/// A scalar function of a flat 64-bit point together with its analytic gradient.
struct DifferentiableFn {
  std::function<double(std::span<const double>)> value;
  std::function<std::vector<double>(std::span<const double>)> gradient;
};

/// |<grad f(p), u> - (f(p + h u) - f(p - h u)) / 2h| / max(1, |FD|).
inline double grad_check(const DifferentiableFn& op, std::span<const double> point, std::span<const double> direction,
                         double h = 1e-5) {
  const auto grad = op.gradient(point);
  double analytic = 0.0;
  for (std::size_t i = 0; i < grad.size(); ++i) analytic += grad[i] * direction[i];

  std::vector<double> plus(point.begin(), point.end()), minus(point.begin(), point.end());
  for (std::size_t i = 0; i < plus.size(); ++i) {
    plus[i] += h * direction[i];
    minus[i] -= h * direction[i];
  }
  const double fd = (op.value(plus) - op.value(minus)) / (2.0 * h);
  return std::abs(analytic - fd) / std::max(1.0, std::abs(fd));
}

/// <r, m(x)> as a function of the module input x, parameters held fixed.
inline DifferentiableFn module_input_fn(const Module<double>& m, std::vector<double> params, Shape4 in_shape,
                                        std::vector<double> projection) {
  auto eval = [&m, params, in_shape](std::span<const double> x) {
    Tensor4<double> t(in_shape);
    std::copy(x.begin(), x.end(), t.values().begin());
    return m.forward(t, params, nullptr);
  };
  DifferentiableFn fn;
  fn.value = [eval, projection](std::span<const double> x) {
    const auto y = eval(x);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += projection[i] * y.values()[i];
    return s;
  };
  fn.gradient = [&m, params, in_shape, projection](std::span<const double> x) {
    Tensor4<double> t(in_shape);
    std::copy(x.begin(), x.end(), t.values().begin());
    Cache<double> cache;
    const auto y = m.forward(t, params, &cache);
    Tensor4<double> dy(y.shape());
    std::copy(projection.begin(), projection.end(), dy.values().begin());
    std::vector<double> grads(params.size(), 0.0);
    const auto dx = m.backward(dy, params, cache, grads, true);
    return dx.storage();
  };
  return fn;
}

/// <r, m(x)> as a function of the module parameters, input held fixed.
inline DifferentiableFn module_param_fn(const Module<double>& m, Tensor4<double> x, std::vector<double> projection) {
  DifferentiableFn fn;
  fn.value = [&m, x, projection](std::span<const double> p) {
    const auto y = m.forward(x, p, nullptr);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += projection[i] * y.values()[i];
    return s;
  };
  fn.gradient = [&m, x, projection](std::span<const double> p) {
    Cache<double> cache;
    const auto y = m.forward(x, p, &cache);
    Tensor4<double> dy(y.shape());
    std::copy(projection.begin(), projection.end(), dy.values().begin());
    std::vector<double> grads(p.size(), 0.0);
    m.backward(dy, p, cache, grads, false);
    return grads;
  };
  return fn;
}

}  // namespace voxtok::nn
