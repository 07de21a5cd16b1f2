#pragma once

#include <gtest/gtest.h>

#include <cstdint>
#include <vector>

#include "voxtok/error.hpp"
#include "voxtok/rng.hpp"
#include "voxtok/tensor.hpp"

namespace testing_support {

template <typename Real>
voxtok::Tensor4<Real> random_tensor(voxtok::Rng& rng, voxtok::Shape4 s, double lo = -1.0, double hi = 1.0) {
  voxtok::Tensor4<Real> t(s);
  for (auto& x : t.values()) x = static_cast<Real>(rng.uniform(lo, hi));
  return t;
}

inline std::vector<double> random_vector(voxtok::Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

template <typename Fn>
voxtok::Errc error_of(Fn&& fn) {
  try {
    fn();
  } catch (const voxtok::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected a voxtok::Error";
  return voxtok::Errc::IoFailure;
}

}  // namespace testing_support
