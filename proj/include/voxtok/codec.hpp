#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "voxtok/haar3d.hpp"
#include "voxtok/lfq.hpp"
#include "voxtok/nn/module.hpp"

namespace voxtok {

enum class Variant { C8, C16 };

inline std::string to_string(Variant v) { return v == Variant::C8 ? "C8" : "C16"; }

/// Architecture description. Only the stride/causality skeleton is fixed;
/// widths and kernel sizes are free parameters.
struct CodecConfig {
  Variant variant = Variant::C8;
  int base_channels = 32;
  int res_blocks_per_stage = 1;
  int k = 3;                // spatial kernel
  int temporal_k = 3;       // causal kernel inside residual blocks
  int down_temporal_k = 3;  // strided temporal kernel; the decoder's transposed kernel matches it
  int d = 8;                // token bits
  int disc_channels = 16;
  int groups = 8;

  int spatial_downsamples() const noexcept { return variant == Variant::C8 ? 2 : 3; }
  static constexpr int temporal_downsamples() noexcept { return 2; }
  /// Total spatial reduction from input voxels to tokens, wavelet included.
  int spatial_factor() const noexcept { return 2 << spatial_downsamples(); }

  void validate() const {
    auto bad = [](const std::string& m) { throw Error(Errc::InvalidSpec, "codec config: " + m); };
    if (base_channels < 1) bad("base_channels must be >= 1");
    if (res_blocks_per_stage < 0) bad("res_blocks_per_stage must be >= 0");
    if (k < 1 || k % 2 == 0) bad("k must be odd");
    if (temporal_k < 1) bad("temporal_k must be >= 1");
    if (down_temporal_k < 2) bad("down_temporal_k must be >= 2");
    if (d < 1 || d > 30) bad("d must lie in [1, 30]");
    if (disc_channels < 1) bad("disc_channels must be >= 1");
    if (groups < 1 || base_channels % std::min(groups, base_channels) != 0) bad("groups must divide base_channels");
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["variant"] = to_string(variant);
    j["base_channels"] = base_channels;
    j["res_blocks_per_stage"] = res_blocks_per_stage;
    j["k"] = k;
    j["temporal_k"] = temporal_k;
    j["down_temporal_k"] = down_temporal_k;
    j["d"] = d;
    j["disc_channels"] = disc_channels;
    j["groups"] = groups;
    return j;
  }

  /// Strict: unknown keys and wrong types are rejected with the key named.
  static CodecConfig from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(Errc::ConfigError, "codec: expected an object");
    CodecConfig c;
    for (const auto& [key, val] : j.items()) {
      auto as_int = [&]() {
        if (!val.is_number_integer()) throw Error(Errc::ConfigError, "codec." + key + ": expected an integer");
        return val.get<int>();
      };
      if (key == "variant") {
        const auto s = val.is_string() ? val.get<std::string>() : std::string();
        if (s == "C8") c.variant = Variant::C8;
        else if (s == "C16") c.variant = Variant::C16;
        else throw Error(Errc::ConfigError, "codec.variant: expected \"C8\" or \"C16\"");
      } else if (key == "base_channels") c.base_channels = as_int();
      else if (key == "res_blocks_per_stage") c.res_blocks_per_stage = as_int();
      else if (key == "k") c.k = as_int();
      else if (key == "temporal_k") c.temporal_k = as_int();
      else if (key == "down_temporal_k") c.down_temporal_k = as_int();
      else if (key == "d") c.d = as_int();
      else if (key == "disc_channels") c.disc_channels = as_int();
      else if (key == "groups") c.groups = as_int();
      else throw Error(Errc::ConfigError, "codec: unknown key '" + key + "'");
    }
    try {
      c.validate();
    } catch (const Error& e) {
      throw Error(Errc::ConfigError, e.detail());
    }
    return c;
  }

  /// Stable identifier: FNV-1a of the canonical JSON.
  std::string id() const {
    const std::string s = to_json().dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }

  bool operator==(const CodecConfig&) const = default;

  /// Desk-scale reference: 64x64x33 volumes, 8-bit tokens.
  static CodecConfig desk() { return {}; }

  /// Temporal receptive field confined to one 9-slice window: residual blocks
  /// do not mix frames and the strided kernels do not overlap, so tiled and
  /// one-shot encodings coincide.
  static CodecConfig window_local() {
    CodecConfig c;
    c.base_channels = 16;
    c.temporal_k = 1;
    c.down_temporal_k = 2;
    return c;
  }
};

template <typename Real>
struct CodecParams {
  std::vector<Real> encoder, decoder, discriminator;
  std::string config_id;
};

/// Encoder E, decoder G and patch discriminator D built from one config.
template <typename Real>
class Codec {
 public:
  explicit Codec(const CodecConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    build_encoder();
    build_decoder();
    build_discriminator();
  }

  const CodecConfig& config() const noexcept { return cfg_; }
  const nn::Sequential<Real>& encoder() const noexcept { return encoder_; }
  const nn::Sequential<Real>& decoder() const noexcept { return decoder_; }
  const nn::Sequential<Real>& discriminator() const noexcept { return disc_; }
  const nn::ParamLayout& encoder_layout() const noexcept { return enc_layout_; }
  const nn::ParamLayout& decoder_layout() const noexcept { return dec_layout_; }
  const nn::ParamLayout& discriminator_layout() const noexcept { return disc_layout_; }

  CodecParams<Real> init_params(std::uint64_t seed) const {
    return {enc_layout_.initialize<Real>(mix_seed(seed, 1)), dec_layout_.initialize<Real>(mix_seed(seed, 2)),
            disc_layout_.initialize<Real>(mix_seed(seed, 3)), cfg_.id()};
  }

  std::vector<Real> init_discriminator(std::uint64_t seed) const { return disc_layout_.initialize<Real>(seed); }

  void check_params(const CodecParams<Real>& p) const {
    if (p.encoder.size() != enc_layout_.size() || p.decoder.size() != dec_layout_.size() ||
        p.discriminator.size() != disc_layout_.size()) {
      throw Error(Errc::ShapeMismatch, "parameter vectors do not match the codec layout");
    }
  }

  /// Encoder coverage: the last slice (1-based) that can influence token m.
  static int slice_coverage(int m) { return m <= 1 ? 1 : 8 * (m - 1) + 1; }
  static int tokens_for_depth(int depth) { return 1 + (depth - 1) / 8; }

  void check_wavelet_input(const WaveletVolume<Real>& w) const {
    if (w.pad_mode != PadMode::CausalReplicate) {
      throw Error(Errc::ParityMismatch, "codec input must use causal wavelet padding");
    }
    const int f = w.frames();
    if (f % 4 != 1) {
      throw Error(Errc::ParityMismatch, "frame count " + std::to_string(f) + " is not 1 mod 4 (depth must be 1 mod 8)");
    }
    const int s = 1 << cfg_.spatial_downsamples();
    if (w.coeffs.height() % s != 0 || w.coeffs.width() % s != 0) {
      throw Error(Errc::ShapeMismatch, "spatial size must be divisible by " + std::to_string(cfg_.spatial_factor()));
    }
  }

 private:
  void build_encoder() {
    const int ch = cfg_.base_channels;
    const int groups = std::min(cfg_.groups, ch);
    auto& L = enc_layout_;
    auto& E = encoder_;
    E.template emplace<nn::Conv<Real>>(L, "enc.conv_in",
                                       nn::spatial_geometry({nn::ConvKind::Spatial1kk, cfg_.k, 1, kSubbands, ch}));
    for (int s = 0; s < cfg_.spatial_downsamples(); ++s) {
      const std::string p = "enc.stage" + std::to_string(s);
      E.template emplace<nn::Conv<Real>>(L, p + ".down_spatial",
                                         nn::spatial_geometry({nn::ConvKind::Spatial1kk, cfg_.k, 2, ch, ch}));
      add_res(E, L, p + ".res_a", ch, groups);
      if (s < temporal_downsamples()) {
        E.template emplace<nn::Conv<Real>>(
            L, p + ".down_temporal",
            nn::temporal_causal_geometry({nn::ConvKind::TemporalK11, cfg_.down_temporal_k, 2, ch, ch}));
        add_res(E, L, p + ".res_b", ch, groups);
      }
    }
    E.template emplace<nn::GroupNorm<Real>>(L, "enc.norm_out", ch, groups);
    E.template emplace<nn::Act<Real>>(nn::Activation::SiLU);
    E.template emplace<nn::Conv<Real>>(L, "enc.conv_out",
                                       nn::spatial_geometry({nn::ConvKind::Spatial1kk, cfg_.k, 1, ch, cfg_.d}));
  }

  void build_decoder() {
    const int ch = cfg_.base_channels;
    const int groups = std::min(cfg_.groups, ch);
    auto& L = dec_layout_;
    auto& G = decoder_;
    G.template emplace<nn::Conv<Real>>(L, "dec.conv_in",
                                       nn::spatial_geometry({nn::ConvKind::Spatial1kk, cfg_.k, 1, cfg_.d, ch}));
    for (int s = cfg_.spatial_downsamples(); s-- > 0;) {
      const std::string p = "dec.stage" + std::to_string(s);
      if (s < temporal_downsamples()) {
        add_res(G, L, p + ".res_b", ch, groups);
        G.template emplace<nn::TemporalUpsample<Real>>(L, p + ".up_temporal", cfg_.down_temporal_k, ch, ch);
      }
      add_res(G, L, p + ".res_a", ch, groups);
      G.template emplace<nn::SpatialUpsample<Real>>();
      G.template emplace<nn::Conv<Real>>(L, p + ".up_spatial",
                                         nn::spatial_geometry({nn::ConvKind::Spatial1kk, cfg_.k, 1, ch, ch}));
    }
    G.template emplace<nn::GroupNorm<Real>>(L, "dec.norm_out", ch, groups);
    G.template emplace<nn::Act<Real>>(nn::Activation::SiLU);
    G.template emplace<nn::Conv<Real>>(L, "dec.conv_out",
                                       nn::spatial_geometry({nn::ConvKind::Spatial1kk, cfg_.k, 1, ch, kSubbands}));
  }

  // Three stride-2 3x3x3 convs with LeakyReLU(0.2) and no normalization, then a
  // stride-1 conv emitting one logit per patch; that last layer starts at zero.
  void build_discriminator() {
    const int c = cfg_.disc_channels;
    auto& L = disc_layout_;
    auto& D = disc_;
    auto layer = [](int in, int out, int stride) {
      nn::Conv3dGeometry g;
      g.kt = g.kh = g.kw = 3;
      g.st = g.sh = g.sw = stride;
      g.pad_t_lo = g.pad_t_hi = g.pad_h = g.pad_w = 1;
      g.in_ch = in;
      g.out_ch = out;
      return g;
    };
    D.template emplace<nn::Conv<Real>>(L, "disc.conv0", layer(1, c, 2));
    D.template emplace<nn::Act<Real>>(nn::Activation::LeakyReLU, Real(0.2));
    D.template emplace<nn::Conv<Real>>(L, "disc.conv1", layer(c, 2 * c, 2));
    D.template emplace<nn::Act<Real>>(nn::Activation::LeakyReLU, Real(0.2));
    D.template emplace<nn::Conv<Real>>(L, "disc.conv2", layer(2 * c, 4 * c, 2));
    D.template emplace<nn::Act<Real>>(nn::Activation::LeakyReLU, Real(0.2));
    D.template emplace<nn::Conv<Real>>(L, "disc.logits", layer(4 * c, 1, 1), nn::Init::Zeros);
  }

  void add_res(nn::Sequential<Real>& net, nn::ParamLayout& L, const std::string& name, int ch, int groups) {
    for (int i = 0; i < cfg_.res_blocks_per_stage; ++i) {
      net.template emplace<nn::ResidualBlock<Real>>(L, name + std::to_string(i), ch, ch, cfg_.k, cfg_.temporal_k,
                                                    groups);
    }
  }

  static constexpr int temporal_downsamples() { return CodecConfig::temporal_downsamples(); }

  CodecConfig cfg_;
  nn::ParamLayout enc_layout_, dec_layout_, disc_layout_;
  nn::Sequential<Real> encoder_, decoder_, disc_;
};

template <typename Real>
struct EncodeResult {
  Tensor4<Real> y;
  Quantized<Real> q;
};

/// y = E(W(x)) and its packed codes.
template <typename Real>
EncodeResult<Real> encode(const Codec<Real>& codec, const CodecParams<Real>& params, const WaveletVolume<Real>& w,
                          nn::Cache<Real>* cache = nullptr) {
  codec.check_wavelet_input(w);
  auto y = codec.encoder().forward(w.coeffs, params.encoder, cache);
  auto q = quantize(y, codec.config().d);
  q.codes.config_id = codec.config().id();
  return {std::move(y), std::move(q)};
}

/// G(e): wavelet-domain reconstruction from a +/-1 code tensor.
template <typename Real>
WaveletVolume<Real> decode(const Codec<Real>& codec, const CodecParams<Real>& params, const Tensor4<Real>& e,
                           nn::Cache<Real>* cache = nullptr) {
  if (e.channels() != codec.config().d) throw Error(Errc::ChannelMismatch, "code tensor width differs from d");
  auto out = codec.decoder().forward(e, params.decoder, cache);
  const int depth = 2 * out.frames() - 1;
  return {std::move(out), PadMode::CausalReplicate, depth, Spacing{}};
}

template <typename Real>
WaveletVolume<Real> decode(const Codec<Real>& codec, const CodecParams<Real>& params, const TokenGrid& grid) {
  if (grid.d != codec.config().d) throw Error(Errc::ShapeMismatch, "token grid bit width differs from the codec");
  return decode(codec, params, expand_codes<Real>(grid));
}

/// Patch logits for a normalized-domain volume.
template <typename Real>
Tensor4<Real> discriminate(const Codec<Real>& codec, std::span<const std::type_identity_t<Real>> disc_params, const Tensor4<Real>& x,
                           nn::Cache<Real>* cache = nullptr) {
  if (x.channels() != 1) throw Error(Errc::ShapeMismatch, "discriminator takes single-channel volumes");
  return codec.discriminator().forward(x, disc_params, cache);
}

}  // namespace voxtok
