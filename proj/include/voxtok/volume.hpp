#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "voxtok/error.hpp"
#include "voxtok/tensor.hpp"

namespace voxtok {

enum class Domain { HU, Normalized };

inline std::string_view to_string(Domain d) noexcept { return d == Domain::HU ? "HU" : "Normalized"; }

inline Domain parse_domain(std::string_view s) {
  if (s == "HU") return Domain::HU;
  if (s == "Normalized") return Domain::Normalized;
  throw Error(Errc::MalformedHeader, "unknown domain '" + std::string(s) + "'");
}

/// Voxel size in millimetres: x runs along W, y along H, z along the slice axis D.
struct Spacing {
  double x = 1.0, y = 1.0, z = 1.0;
  bool operator==(const Spacing&) const = default;
};

struct VolumeShape {
  int d = 0, h = 0, w = 0;
  bool operator==(const VolumeShape&) const = default;
  std::size_t numel() const noexcept { return static_cast<std::size_t>(d) * h * w; }
  std::string str() const { return std::to_string(d) + "x" + std::to_string(h) + "x" + std::to_string(w); }
};

/// A D x H x W scalar grid, row-major with D outermost.
template <typename Real>
class BasicVolume {
 public:
  BasicVolume() = default;
  BasicVolume(VolumeShape shape, Spacing spacing, Domain domain, Real fill = Real(0))
      : shape_(shape), spacing_(spacing), domain_(domain) {
    if (shape.d < 1 || shape.h < 1 || shape.w < 1) {
      throw Error(Errc::ShapeMismatch, "volume dimensions must be >= 1, got " + shape.str());
    }
    if (!(spacing.x > 0 && spacing.y > 0 && spacing.z > 0)) {
      throw Error(Errc::InvalidSpec, "voxel spacing must be positive");
    }
    data_.assign(shape.numel(), fill);
  }
  BasicVolume(int d, int h, int w, Domain domain = Domain::Normalized, Real fill = Real(0))
      : BasicVolume(VolumeShape{d, h, w}, Spacing{}, domain, fill) {}

  const VolumeShape& shape() const noexcept { return shape_; }
  int depth() const noexcept { return shape_.d; }
  int height() const noexcept { return shape_.h; }
  int width() const noexcept { return shape_.w; }
  const Spacing& spacing() const noexcept { return spacing_; }
  Domain domain() const noexcept { return domain_; }
  void set_spacing(Spacing s) { spacing_ = s; }
  void set_domain(Domain d) noexcept { domain_ = d; }

  std::size_t size() const noexcept { return data_.size(); }
  std::size_t slice_size() const noexcept { return static_cast<std::size_t>(shape_.h) * shape_.w; }

  Real& operator()(int z, int y, int x) noexcept { return data_[(static_cast<std::size_t>(z) * shape_.h + y) * shape_.w + x]; }
  const Real& operator()(int z, int y, int x) const noexcept {
    return data_[(static_cast<std::size_t>(z) * shape_.h + y) * shape_.w + x];
  }

  std::vector<Real>& values() noexcept { return data_; }
  const std::vector<Real>& values() const noexcept { return data_; }

  bool operator==(const BasicVolume& o) const {
    return shape_ == o.shape_ && spacing_ == o.spacing_ && domain_ == o.domain_ && data_ == o.data_;
  }

 private:
  VolumeShape shape_{};
  Spacing spacing_{};
  Domain domain_ = Domain::Normalized;
  std::vector<Real> data_;
};

using Volume = BasicVolume<float>;

/// Throws MalformedHeader if a Normalized volume leaves [-1, 1] or holds non-finite values.
template <typename Real>
void check_domain(const BasicVolume<Real>& v) {
  for (Real x : v.values()) {
    if (!std::isfinite(static_cast<double>(x))) throw Error(Errc::MalformedHeader, "non-finite voxel value");
    if (v.domain() == Domain::Normalized && (x < Real(-1) || x > Real(1))) {
      throw Error(Errc::MalformedHeader, "Normalized volume holds value " + std::to_string(static_cast<double>(x)) +
                                             " outside [-1, 1]");
    }
  }
}

/// Single-channel tensor view (D -> T, C = 1), used where a volume feeds the discriminator.
template <typename To, typename Real>
Tensor4<To> to_tensor(const BasicVolume<Real>& v) {
  Tensor4<To> t(v.depth(), v.height(), v.width(), 1);
  std::transform(v.values().begin(), v.values().end(), t.values().begin(), [](Real x) { return static_cast<To>(x); });
  return t;
}

template <typename Real, typename From>
BasicVolume<Real> volume_from_tensor(const Tensor4<From>& t, Spacing spacing, Domain domain) {
  if (t.channels() != 1) throw Error(Errc::ChannelMismatch, "volume tensors carry one channel");
  BasicVolume<Real> v(VolumeShape{t.frames(), t.height(), t.width()}, spacing, domain);
  std::transform(t.values().begin(), t.values().end(), v.values().begin(), [](From x) { return static_cast<Real>(x); });
  return v;
}

template <typename To, typename From>
BasicVolume<To> volume_cast(const BasicVolume<From>& v) {
  BasicVolume<To> out(v.shape(), v.spacing(), v.domain());
  std::transform(v.values().begin(), v.values().end(), out.values().begin(), [](From x) { return static_cast<To>(x); });
  return out;
}

/// Slices [first, first + count), zero-based.
template <typename Real>
BasicVolume<Real> crop_slices(const BasicVolume<Real>& v, int first, int count) {
  if (first < 0 || count < 1 || first + count > v.depth()) {
    throw Error(Errc::ShapeMismatch, "slice range out of bounds");
  }
  BasicVolume<Real> out(VolumeShape{count, v.height(), v.width()}, v.spacing(), v.domain());
  std::copy_n(v.values().begin() + first * v.slice_size(), count * v.slice_size(), out.values().begin());
  return out;
}

}  // namespace voxtok
