#pragma once

#include <algorithm>
#include <cmath>

#include "voxtok/error.hpp"
#include "voxtok/volume.hpp"

namespace voxtok {

struct PreprocessSpec {
  double clip_lo = -1000.0;
  double clip_hi = 1000.0;
  Spacing target_spacing{0.75, 0.75, 1.5};
  VolumeShape target_shape{241, 512, 512};
  bool normalize = true;
};

namespace detail {

// Sample positions map voxel centres: new index i sits at old coordinate
// (i + 0.5) * new/old - 0.5, clamped to the valid range.
struct AxisResampler {
  int out_n = 0;
  std::vector<int> lo;
  std::vector<double> frac;

  AxisResampler(int in_n, double in_sp, double out_sp) {
    out_n = std::max(1, static_cast<int>(std::lround(in_n * in_sp / out_sp)));
    lo.resize(out_n);
    frac.resize(out_n);
    const double ratio = out_sp / in_sp;
    for (int i = 0; i < out_n; ++i) {
      const double pos = std::clamp((i + 0.5) * ratio - 0.5, 0.0, static_cast<double>(in_n - 1));
      const int l = std::min(static_cast<int>(std::floor(pos)), in_n - 1);
      lo[i] = l;
      frac[i] = pos - l;
    }
  }
  int hi(int i, int in_n) const { return std::min(lo[i] + 1, in_n - 1); }
};

inline Volume resample_trilinear(const Volume& v, Spacing target) {
  if (v.spacing() == target) return v;
  const AxisResampler az(v.depth(), v.spacing().z, target.z);
  const AxisResampler ay(v.height(), v.spacing().y, target.y);
  const AxisResampler ax(v.width(), v.spacing().x, target.x);
  Volume out(VolumeShape{az.out_n, ay.out_n, ax.out_n}, target, v.domain());
  for (int z = 0; z < az.out_n; ++z) {
    const int z0 = az.lo[z], z1 = az.hi(z, v.depth());
    const double fz = az.frac[z];
    for (int y = 0; y < ay.out_n; ++y) {
      const int y0 = ay.lo[y], y1 = ay.hi(y, v.height());
      const double fy = ay.frac[y];
      for (int x = 0; x < ax.out_n; ++x) {
        const int x0 = ax.lo[x], x1 = ax.hi(x, v.width());
        const double fx = ax.frac[x];
        auto lerp = [](double a, double b, double t) { return a + (b - a) * t; };
        const double c00 = lerp(v(z0, y0, x0), v(z0, y0, x1), fx);
        const double c01 = lerp(v(z0, y1, x0), v(z0, y1, x1), fx);
        const double c10 = lerp(v(z1, y0, x0), v(z1, y0, x1), fx);
        const double c11 = lerp(v(z1, y1, x0), v(z1, y1, x1), fx);
        out(z, y, x) = static_cast<float>(lerp(lerp(c00, c01, fy), lerp(c10, c11, fy), fz));
      }
    }
  }
  return out;
}

// Centre crop or symmetric pad; an odd remainder of padding goes to the far end.
inline Volume crop_or_pad(const Volume& v, VolumeShape target, float fill) {
  if (v.shape() == target) return v;
  Volume out(target, v.spacing(), v.domain(), fill);
  // src index = dst index + offset; negative offsets pad, positive offsets crop.
  auto off = [](int src_n, int dst_n) { return src_n >= dst_n ? (src_n - dst_n) / 2 : -((dst_n - src_n) / 2); };
  const int dz = off(v.depth(), target.d), dy = off(v.height(), target.h), dx = off(v.width(), target.w);
  for (int z = 0; z < target.d; ++z) {
    const int sz = z + dz;
    if (sz < 0 || sz >= v.depth()) continue;
    for (int y = 0; y < target.h; ++y) {
      const int sy = y + dy;
      if (sy < 0 || sy >= v.height()) continue;
      for (int x = 0; x < target.w; ++x) {
        const int sx = x + dx;
        if (sx < 0 || sx >= v.width()) continue;
        out(z, y, x) = v(sz, sy, sx);
      }
    }
  }
  return out;
}

}  // namespace detail

/// Clip to the HU window, resample to the target spacing, crop/pad to the
/// target shape with the clip floor, then optionally map HU -> HU / 1000.
inline Volume preprocess(const Volume& v, const PreprocessSpec& spec) {
  if (v.domain() != Domain::HU) throw Error(Errc::InvalidSpec, "preprocess expects an HU volume");
  if (!(spec.clip_lo < spec.clip_hi)) throw Error(Errc::InvalidSpec, "clip_lo must be below clip_hi");
  if (!(spec.target_spacing.x > 0 && spec.target_spacing.y > 0 && spec.target_spacing.z > 0)) {
    throw Error(Errc::InvalidSpec, "target spacing must be positive");
  }
  if (spec.target_shape.d < 1 || spec.target_shape.h < 1 || spec.target_shape.w < 1) {
    throw Error(Errc::InvalidSpec, "target shape must be positive");
  }
  if (spec.normalize && (spec.clip_lo < -1000.0 || spec.clip_hi > 1000.0)) {
    throw Error(Errc::InvalidSpec, "normalization needs the clip window inside [-1000, 1000]");
  }

  Volume clipped = v;
  const auto lo = static_cast<float>(spec.clip_lo), hi = static_cast<float>(spec.clip_hi);
  for (float& x : clipped.values()) x = std::clamp(x, lo, hi);

  Volume out = detail::crop_or_pad(detail::resample_trilinear(clipped, spec.target_spacing), spec.target_shape, lo);
  if (spec.normalize) {
    for (float& x : out.values()) x = std::clamp(x / 1000.0f, -1.0f, 1.0f);
    out.set_domain(Domain::Normalized);
  }
  return out;
}

}  // namespace voxtok
