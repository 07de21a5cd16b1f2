#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "voxtok/rng.hpp"
#include "voxtok/volume.hpp"

namespace voxtok {

namespace detail {

struct Blob {
  double cz, cy, cx;      // centre at slice cz
  double vy, vx;          // in-plane drift per slice, |v| <= 1 voxel
  double wy, wx;          // slow sinusoidal wobble amplitude
  double rz, ry, rx;
  double intensity;
};

}  // namespace detail

/// Seeded synthetic scan: background -1, 2-5 soft-edged ellipsoids in
/// [-0.2, 1.0] whose centres drift smoothly across slices, plus uniform noise
/// of amplitude 0.02. A pure function of (seed, shape).
inline Volume make_phantom(std::uint64_t seed, VolumeShape shape) {
  Volume v(shape, Spacing{}, Domain::Normalized, -1.0f);
  Rng rng(mix_seed(seed, 0x5048414E544F4Dull));

  const int n_blobs = static_cast<int>(rng.integer(2, 5));
  std::vector<detail::Blob> blobs;
  for (int i = 0; i < n_blobs; ++i) {
    detail::Blob b{};
    b.cz = rng.uniform(0.0, shape.d - 1.0);
    b.cy = rng.uniform(0.25, 0.75) * shape.h;
    b.cx = rng.uniform(0.25, 0.75) * shape.w;
    b.vy = rng.uniform(-0.35, 0.35);
    b.vx = rng.uniform(-0.35, 0.35);
    b.wy = rng.uniform(0.0, 0.25);
    b.wx = rng.uniform(0.0, 0.25);
    b.rz = std::max(1.0, rng.uniform(0.4, 1.0) * shape.d);
    b.ry = std::max(1.0, rng.uniform(0.08, 0.25) * shape.h);
    b.rx = std::max(1.0, rng.uniform(0.08, 0.25) * shape.w);
    b.intensity = rng.uniform(-0.2, 1.0);
    blobs.push_back(b);
  }

  constexpr double edge = 1.5;  // soft edge width in voxels
  for (int z = 0; z < shape.d; ++z) {
    for (const auto& b : blobs) {
      const double dz = (z - b.cz) / b.rz;
      if (std::abs(dz) >= 1.0) continue;
      // drift <= |v| + |w| < 1 voxel per slice
      const double cy = b.cy + b.vy * (z - b.cz) + b.wy * std::sin(0.3 * z) * 1.5;
      const double cx = b.cx + b.vx * (z - b.cz) + b.wx * std::cos(0.3 * z) * 1.5;
      const double shrink = std::sqrt(1.0 - dz * dz);
      const double ry = b.ry * shrink, rx = b.rx * shrink;
      const double rmin = std::max(std::min(ry, rx), 1e-6);
      for (int y = 0; y < shape.h; ++y) {
        for (int x = 0; x < shape.w; ++x) {
          const double ny = (y - cy) / std::max(ry, 1e-6), nx = (x - cx) / std::max(rx, 1e-6);
          const double rho = std::sqrt(ny * ny + nx * nx);
          const double wgt = std::clamp((1.0 - rho) * rmin / edge, 0.0, 1.0);
          if (wgt <= 0.0) continue;
          float& out = v(z, y, x);
          out = static_cast<float>(out * (1.0 - wgt) + b.intensity * wgt);
        }
      }
    }
  }
  for (float& x : v.values()) {
    const double noise = rng.uniform(-0.02, 0.02);
    x = static_cast<float>(std::clamp(x + noise, -1.0, 1.0));
  }
  return v;
}

}  // namespace voxtok
