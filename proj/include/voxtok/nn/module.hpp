#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "voxtok/nn/ops.hpp"
#include "voxtok/rng.hpp"

namespace voxtok::nn {

enum class Init { FanInUniform, Zeros, Ones };

struct ParamEntry {
  std::string name;
  std::size_t offset = 0;
  std::size_t count = 0;
  Init init = Init::Zeros;
  int fan_in = 1;
};

/// Named segments of one flat parameter vector. Shapes are implied by the
/// modules that registered them, so config + flat vector fully reconstruct a network.
class ParamLayout {
 public:
  std::size_t add(std::string name, std::size_t count, Init init, int fan_in = 1) {
    entries_.push_back({std::move(name), total_, count, init, fan_in});
    total_ += count;
    return entries_.back().offset;
  }

  std::size_t size() const noexcept { return total_; }
  const std::vector<ParamEntry>& entries() const noexcept { return entries_; }

  /// Fan-in scaled uniform U(-sqrt(3/fan_in), sqrt(3/fan_in)) for weights, zeros/ones elsewhere.
  template <typename Real>
  std::vector<Real> initialize(std::uint64_t seed) const {
    std::vector<Real> p(total_, Real(0));
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& e = entries_[i];
      if (e.init == Init::Ones) {
        std::fill_n(p.begin() + e.offset, e.count, Real(1));
      } else if (e.init == Init::FanInUniform) {
        Rng rng(mix_seed(seed, i));
        const double bound = std::sqrt(3.0 / e.fan_in);
        for (std::size_t j = 0; j < e.count; ++j) p[e.offset + j] = static_cast<Real>(rng.uniform(-bound, bound));
      }
    }
    return p;
  }

 private:
  std::vector<ParamEntry> entries_;
  std::size_t total_ = 0;
};

template <typename Real>
struct Cache {
  std::vector<Tensor4<Real>> tensors;
  GroupNormStats stats;
  std::vector<Cache> children;
};

/// A differentiable layer. Parameters live outside the module in a flat
/// vector; the module only remembers its offsets. Passing a null cache runs
/// inference without recording anything for backward.
template <typename Real>
class Module {
 public:
  virtual ~Module() = default;

  virtual Tensor4<Real> forward(const Tensor4<Real>& x, std::span<const Real> params, Cache<Real>* cache) const = 0;

  /// Accumulates into `grads` (same layout as params) and returns dL/dx, or
  /// an empty tensor when `need_input_grad` is false.
  virtual Tensor4<Real> backward(const Tensor4<Real>& dy, std::span<const Real> params, const Cache<Real>& cache,
                                 std::span<Real> grads, bool need_input_grad) const = 0;

  /// Largest 1-based input frame that output frame j can depend on.
  virtual int temporal_coverage(int j) const { return j; }
};

template <typename Real>
class Conv final : public Module<Real> {
 public:
  Conv(ParamLayout& layout, const std::string& name, const Conv3dGeometry& g, Init weight_init = Init::FanInUniform)
      : g_(g) {
    w_ = layout.add(name + ".weight", g.weight_count(), weight_init, g.fan_in());
    b_ = layout.add(name + ".bias", g.out_ch, Init::Zeros);
  }

  const Conv3dGeometry& geometry() const noexcept { return g_; }

  Tensor4<Real> forward(const Tensor4<Real>& x, std::span<const Real> p, Cache<Real>* cache) const override {
    if (cache) cache->tensors = {x};
    return conv3d_forward(x, g_, p.subspan(w_, g_.weight_count()), p.subspan(b_, g_.out_ch));
  }

  Tensor4<Real> backward(const Tensor4<Real>& dy, std::span<const Real> p, const Cache<Real>& cache,
                         std::span<Real> grads, bool need_input_grad) const override {
    return conv3d_backward(cache.tensors.at(0), g_, p.subspan(w_, g_.weight_count()), dy,
                           grads.subspan(w_, g_.weight_count()), grads.subspan(b_, g_.out_ch), need_input_grad);
  }

  int temporal_coverage(int j) const override {
    // output j reads padded frames st*(j-1) .. st*(j-1)+kt-1, i.e. inputs up to st*(j-1)+kt-pad_lo
    return g_.st * (j - 1) + g_.kt - g_.pad_t_lo;
  }

 private:
  Conv3dGeometry g_;
  std::size_t w_ = 0, b_ = 0;
};

/// Causal 2x temporal upsampling: transposed conv to 2T frames, then the
/// first frame is dropped so F = 2T - 1 (the inverse of ceil(F / 2)).
template <typename Real>
class TemporalUpsample final : public Module<Real> {
 public:
  TemporalUpsample(ParamLayout& layout, const std::string& name, int k, int in_ch, int out_ch)
      : g_{k, 2, in_ch, out_ch} {
    w_ = layout.add(name + ".weight", g_.weight_count(), Init::FanInUniform, g_.fan_in());
    b_ = layout.add(name + ".bias", out_ch, Init::Zeros);
  }

  Tensor4<Real> forward(const Tensor4<Real>& x, std::span<const Real> p, Cache<Real>* cache) const override {
    if (cache) cache->tensors = {x};
    auto y = conv_transposed_forward(x, g_, p.subspan(w_, g_.weight_count()), p.subspan(b_, g_.out_ch));
    return drop_leading_frames(y, 1);
  }

  Tensor4<Real> backward(const Tensor4<Real>& dy, std::span<const Real> p, const Cache<Real>& cache,
                         std::span<Real> grads, bool) const override {
    return conv_transposed_backward(cache.tensors.at(0), g_, p.subspan(w_, g_.weight_count()),
                                    drop_leading_frames_backward(dy, 1), grads.subspan(w_, g_.weight_count()),
                                    grads.subspan(b_, g_.out_ch));
  }

  int temporal_coverage(int j) const override { return (j + 2) / 2; }  // ceil((j + 1) / 2)

 private:
  TemporalTransposedGeometry g_;
  std::size_t w_ = 0, b_ = 0;
};

template <typename Real>
class SpatialUpsample final : public Module<Real> {
 public:
  Tensor4<Real> forward(const Tensor4<Real>& x, std::span<const Real>, Cache<Real>*) const override {
    return upsample_nearest2_forward(x);
  }
  Tensor4<Real> backward(const Tensor4<Real>& dy, std::span<const Real>, const Cache<Real>&, std::span<Real>,
                         bool) const override {
    return upsample_nearest2_backward(dy);
  }
};

template <typename Real>
class GroupNorm final : public Module<Real> {
 public:
  GroupNorm(ParamLayout& layout, const std::string& name, int channels, int groups, double eps = 1e-5)
      : channels_(channels), groups_(groups), eps_(eps) {
    if (channels % groups != 0) throw Error(Errc::InvalidSpec, name + ": channels not divisible by groups");
    gamma_ = layout.add(name + ".gamma", channels, Init::Ones);
    beta_ = layout.add(name + ".beta", channels, Init::Zeros);
  }

  Tensor4<Real> forward(const Tensor4<Real>& x, std::span<const Real> p, Cache<Real>* cache) const override {
    if (!cache) {
      return group_norm_forward<Real>(x, groups_, eps_, p.subspan(gamma_, channels_), p.subspan(beta_, channels_),
                                      nullptr, nullptr);
    }
    cache->tensors.resize(1);
    return group_norm_forward<Real>(x, groups_, eps_, p.subspan(gamma_, channels_), p.subspan(beta_, channels_),
                                    &cache->tensors[0], &cache->stats);
  }

  Tensor4<Real> backward(const Tensor4<Real>& dy, std::span<const Real> p, const Cache<Real>& cache,
                         std::span<Real> grads, bool) const override {
    return group_norm_backward<Real>(cache.tensors.at(0), cache.stats, groups_, p.subspan(gamma_, channels_), dy,
                                     grads.subspan(gamma_, channels_), grads.subspan(beta_, channels_));
  }

 private:
  int channels_, groups_;
  double eps_;
  std::size_t gamma_ = 0, beta_ = 0;
};

enum class Activation { SiLU, LeakyReLU };

template <typename Real>
class Act final : public Module<Real> {
 public:
  explicit Act(Activation kind, Real slope = Real(0.2)) : kind_(kind), slope_(slope) {}

  Tensor4<Real> forward(const Tensor4<Real>& x, std::span<const Real>, Cache<Real>* cache) const override {
    if (cache) cache->tensors = {x};
    return kind_ == Activation::SiLU ? silu_forward(x) : leaky_relu_forward(x, slope_);
  }
  Tensor4<Real> backward(const Tensor4<Real>& dy, std::span<const Real>, const Cache<Real>& cache, std::span<Real>,
                         bool) const override {
    const auto& x = cache.tensors.at(0);
    return kind_ == Activation::SiLU ? silu_backward(x, dy) : leaky_relu_backward(x, dy, slope_);
  }

 private:
  Activation kind_;
  Real slope_;
};

template <typename Real>
class Sequential final : public Module<Real> {
 public:
  Sequential() = default;
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  template <typename M, typename... Args>
  M& emplace(Args&&... args) {
    auto m = std::make_unique<M>(std::forward<Args>(args)...);
    M& ref = *m;
    layers_.push_back(std::move(m));
    return ref;
  }

  std::size_t size() const noexcept { return layers_.size(); }
  const Module<Real>& layer(std::size_t i) const { return *layers_.at(i); }

  Tensor4<Real> forward(const Tensor4<Real>& x, std::span<const Real> p, Cache<Real>* cache) const override {
    if (cache) cache->children.assign(layers_.size(), {});
    Tensor4<Real> h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) h = layers_[i]->forward(h, p, cache ? &cache->children[i] : nullptr);
    return h;
  }

  Tensor4<Real> backward(const Tensor4<Real>& dy, std::span<const Real> p, const Cache<Real>& cache,
                         std::span<Real> grads, bool need_input_grad) const override {
    Tensor4<Real> g = dy;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      g = layers_[i]->backward(g, p, cache.children.at(i), grads, i > 0 || need_input_grad);
    }
    return g;
  }

  int temporal_coverage(int j) const override {
    for (std::size_t i = layers_.size(); i-- > 0;) j = layers_[i]->temporal_coverage(j);
    return j;
  }

 private:
  std::vector<std::unique_ptr<Module<Real>>> layers_;
};

/// y = skip(x) + f(x), f = norm -> SiLU -> 1xkxk conv -> norm -> SiLU -> causal kx1x1 conv.
/// The last conv starts at zero so a fresh block is the identity (or its projection).
template <typename Real>
class ResidualBlock final : public Module<Real> {
 public:
  ResidualBlock(ParamLayout& layout, const std::string& name, int in_ch, int out_ch, int k_spatial, int k_temporal,
                int groups) {
    body_.template emplace<GroupNorm<Real>>(layout, name + ".norm1", in_ch, std::min(groups, in_ch));
    body_.template emplace<Act<Real>>(Activation::SiLU);
    body_.template emplace<Conv<Real>>(layout, name + ".conv_spatial",
                                       spatial_geometry({ConvKind::Spatial1kk, k_spatial, 1, in_ch, out_ch}));
    body_.template emplace<GroupNorm<Real>>(layout, name + ".norm2", out_ch, std::min(groups, out_ch));
    body_.template emplace<Act<Real>>(Activation::SiLU);
    body_.template emplace<Conv<Real>>(layout, name + ".conv_temporal",
                                       temporal_causal_geometry({ConvKind::TemporalK11, k_temporal, 1, out_ch, out_ch}),
                                       Init::Zeros);
    if (in_ch != out_ch) {
      skip_ = std::make_unique<Conv<Real>>(layout, name + ".skip",
                                           spatial_geometry({ConvKind::Spatial1kk, 1, 1, in_ch, out_ch}));
    }
  }

  Tensor4<Real> forward(const Tensor4<Real>& x, std::span<const Real> p, Cache<Real>* cache) const override {
    if (cache) cache->children.assign(2, {});
    Tensor4<Real> y = body_.forward(x, p, cache ? &cache->children[0] : nullptr);
    if (skip_) {
      add_inplace(y, skip_->forward(x, p, cache ? &cache->children[1] : nullptr));
    } else {
      add_inplace(y, x);
    }
    return y;
  }

  Tensor4<Real> backward(const Tensor4<Real>& dy, std::span<const Real> p, const Cache<Real>& cache,
                         std::span<Real> grads, bool need_input_grad) const override {
    Tensor4<Real> dx = body_.backward(dy, p, cache.children.at(0), grads, true);
    if (skip_) {
      add_inplace(dx, skip_->backward(dy, p, cache.children.at(1), grads, true));
    } else {
      add_inplace(dx, dy);
    }
    if (!need_input_grad) return {};
    return dx;
  }

  int temporal_coverage(int j) const override { return body_.temporal_coverage(j); }

 private:
  Sequential<Real> body_;
  std::unique_ptr<Conv<Real>> skip_;
};

}  // namespace voxtok::nn
