#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "voxtok/error.hpp"

namespace voxtok {

struct Shape4 {
  int t = 0, h = 0, w = 0, c = 0;

  std::size_t numel() const noexcept {
    return static_cast<std::size_t>(t) * h * w * c;
  }
  bool operator==(const Shape4&) const = default;

  std::string str() const {
    return std::to_string(t) + "x" + std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(c);
  }
};

/// Dense T x H x W x C activation tensor, channels innermost.
template <typename Real>
class Tensor4 {
 public:
  using value_type = Real;

  Tensor4() = default;
  explicit Tensor4(Shape4 s, Real fill = Real(0)) : shape_(s) {
    if (s.t < 1 || s.h < 1 || s.w < 1 || s.c < 1) {
      throw Error(Errc::ShapeMismatch, "tensor shape must be positive, got " + s.str());
    }
    data_.assign(s.numel(), fill);
  }
  Tensor4(int t, int h, int w, int c, Real fill = Real(0)) : Tensor4(Shape4{t, h, w, c}, fill) {}

  const Shape4& shape() const noexcept { return shape_; }
  int frames() const noexcept { return shape_.t; }
  int height() const noexcept { return shape_.h; }
  int width() const noexcept { return shape_.w; }
  int channels() const noexcept { return shape_.c; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t offset(int t, int y, int x, int c) const noexcept {
    return ((static_cast<std::size_t>(t) * shape_.h + y) * shape_.w + x) * shape_.c + c;
  }
  Real& operator()(int t, int y, int x, int c) noexcept { return data_[offset(t, y, x, c)]; }
  const Real& operator()(int t, int y, int x, int c) const noexcept { return data_[offset(t, y, x, c)]; }

  Real* at(int t, int y, int x) noexcept { return data_.data() + offset(t, y, x, 0); }
  const Real* at(int t, int y, int x) const noexcept { return data_.data() + offset(t, y, x, 0); }

  std::size_t frame_size() const noexcept { return static_cast<std::size_t>(shape_.h) * shape_.w * shape_.c; }
  std::span<Real> frame(int t) noexcept { return {data_.data() + t * frame_size(), frame_size()}; }
  std::span<const Real> frame(int t) const noexcept { return {data_.data() + t * frame_size(), frame_size()}; }

  std::span<Real> values() noexcept { return data_; }
  std::span<const Real> values() const noexcept { return data_; }
  std::vector<Real>& storage() noexcept { return data_; }
  const std::vector<Real>& storage() const noexcept { return data_; }

  void fill(Real v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const Tensor4& o) const { return shape_ == o.shape_ && data_ == o.data_; }

 private:
  Shape4 shape_{};
  std::vector<Real> data_;
};

template <typename To, typename From>
Tensor4<To> tensor_cast(const Tensor4<From>& src) {
  Tensor4<To> out(src.shape());
  std::transform(src.values().begin(), src.values().end(), out.values().begin(),
                 [](From v) { return static_cast<To>(v); });
  return out;
}

/// Copies frames [first, first + count) into a new tensor.
template <typename Real>
Tensor4<Real> slice_frames(const Tensor4<Real>& src, int first, int count) {
  if (first < 0 || count < 1 || first + count > src.frames()) {
    throw Error(Errc::ShapeMismatch, "frame slice out of range");
  }
  Shape4 s = src.shape();
  s.t = count;
  Tensor4<Real> out(s);
  std::copy_n(src.values().begin() + first * src.frame_size(), count * src.frame_size(), out.values().begin());
  return out;
}

template <typename Real>
void require_same_shape(const Tensor4<Real>& a, const Tensor4<Real>& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw Error(Errc::ShapeMismatch, std::string(what) + ": " + a.shape().str() + " vs " + b.shape().str());
  }
}

}  // namespace voxtok
