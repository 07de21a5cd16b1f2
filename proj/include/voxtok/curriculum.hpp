#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "voxtok/losses.hpp"
#include "voxtok/optim.hpp"
#include "voxtok/tiling.hpp"

namespace voxtok {

enum class Stage { S1, S2, S3 };

inline std::string to_string(Stage s) { return s == Stage::S1 ? "S1" : s == Stage::S2 ? "S2" : "S3"; }

inline Stage parse_stage(const std::string& s) {
  if (s == "S1") return Stage::S1;
  if (s == "S2") return Stage::S2;
  if (s == "S3") return Stage::S3;
  throw Error(Errc::ConfigError, "unknown stage '" + s + "'");
}

/// S1: short crops (seq_len 9, alternating with single slices) trained end to end.
/// S2: tiled 9-slice windows over seq_len-slice segments, one decoder pass.
/// S3: decoder only on full-length volumes; encoder and quantizer frozen.
struct StageConfig {
  Stage stage = Stage::S1;
  int iters = 0;
  int batch = 1;
  int seq_len = 9;
  bool alternate_single_slice = true;
  AdamConfig adam{};
  double clip_norm = 0.5;
  double lambda_adv = 0.1;
  std::uint64_t adv_start_iter = 2000;  // compared with the global iteration counter

  void validate() const {
    auto bad = [&](const std::string& m) { throw Error(Errc::InvalidSpec, to_string(stage) + ": " + m); };
    if (iters < 0) bad("iters must be >= 0");
    if (batch < 1) bad("batch must be >= 1");
    if (stage == Stage::S1 && seq_len != 1 && seq_len != 9) bad("S1 seq_len must be 1 or 9");
    if (stage != Stage::S1) {
      if (seq_len < 9 || (seq_len - 1) % 8 != 0) bad("seq_len must be >= 9 and 1 mod 8");
      if (batch != 1) bad("batch must be 1");
    }
    if (!(adam.lr > 0) || !(adam.beta1 >= 0 && adam.beta1 < 1) || !(adam.beta2 >= 0 && adam.beta2 < 1) ||
        !(adam.eps > 0)) {
      bad("invalid optimizer settings");
    }
    if (!(clip_norm > 0)) bad("clip_norm must be > 0");
    if (lambda_adv < 0) bad("lambda_adv must be >= 0");
  }
};

struct TrainState {
  CodecConfig config;
  QuantizerConfig quantizer;
  CodecParams<float> params;
  AdamState<float> enc_opt, dec_opt, disc_opt;
  std::uint64_t seed = 0;
  std::uint64_t iter = 0;        // generator steps over all stages
  std::uint64_t stage_iter = 0;  // generator steps inside `stage`
  Stage stage = Stage::S1;

  bool operator==(const TrainState& o) const {
    return config == o.config && quantizer.d == o.quantizer.d && quantizer.beta == o.quantizer.beta &&
           quantizer.entropy_weight == o.quantizer.entropy_weight && params.encoder == o.params.encoder &&
           params.decoder == o.params.decoder && params.discriminator == o.params.discriminator &&
           params.config_id == o.params.config_id && enc_opt == o.enc_opt && dec_opt == o.dec_opt &&
           disc_opt == o.disc_opt && seed == o.seed && iter == o.iter && stage_iter == o.stage_iter && stage == o.stage;
  }
};

inline TrainState init_train_state(const CodecConfig& cfg, QuantizerConfig q, std::uint64_t seed) {
  q.d = cfg.d;
  q.validate();
  const Codec<float> codec(cfg);
  TrainState s;
  s.config = cfg;
  s.quantizer = q;
  s.seed = seed;
  s.params = codec.init_params(seed);
  s.enc_opt.reset(s.params.encoder.size());
  s.dec_opt.reset(s.params.decoder.size());
  s.disc_opt.reset(s.params.discriminator.size());
  return s;
}

// ---------------------------------------------------------------------------
// Composite objective

struct LossTerms {
  double rec = 0, adv = 0, vq = 0, entropy = 0, total = 0;
};

template <typename Real>
struct LossGrads {
  BasicVolume<Real> x_hat;  // dL/dx_hat from reconstruction and adversarial terms
  Tensor4<Real> y;          // dL/dy from commitment and entropy terms
};

/// L = L_rec + lambda_adv L_adv + L_vq + entropy_weight L_entropy.
/// `disc_logits` may be null (adversarial term off); its gradient is returned
/// through `d_logits` for the caller to push back through the discriminator.
template <typename Real>
LossTerms total_loss(const BasicVolume<Real>& x, const BasicVolume<Real>& x_hat, const Tensor4<Real>& y,
                     const Tensor4<Real>& e, const Tensor4<Real>* disc_logits, double lambda_adv,
                     const QuantizerConfig& q, LossGrads<Real>* grads = nullptr, Tensor4<Real>* d_logits = nullptr) {
  LossTerms t;
  t.rec = l1_loss(x, x_hat, grads ? &grads->x_hat : nullptr);
  Tensor4<Real> g_vq, g_ent;
  t.vq = vq_loss(y, e, q.beta, grads ? &g_vq : nullptr);
  t.entropy = entropy_loss(y, grads ? &g_ent : nullptr);
  if (disc_logits && lambda_adv > 0) {
    Tensor4<Real> g_adv;
    t.adv = generator_adv_loss(*disc_logits, d_logits ? &g_adv : nullptr);
    if (d_logits) {
      for (auto& v : g_adv.values()) v = static_cast<Real>(v * lambda_adv);
      *d_logits = std::move(g_adv);
    }
  }
  t.total = t.rec + lambda_adv * t.adv + t.vq + q.entropy_weight * t.entropy;
  if (grads) {
    grads->y = std::move(g_vq);
    auto gy = grads->y.values();
    const auto ge = g_ent.values();
    for (std::size_t i = 0; i < gy.size(); ++i) gy[i] += static_cast<Real>(q.entropy_weight * ge[i]);
  }
  return t;
}

// ---------------------------------------------------------------------------
// One generator forward/backward on a single volume.

enum class EncodePath { OneShot, Tiled };

template <typename Real>
struct GeneratorPass {
  LossTerms loss;
  BasicVolume<Real> fake;
  TokenGrid codes;
};

/// Runs x -> W -> E -> Q -> G -> W^-1 -> x_hat, evaluates the composite loss and
/// accumulates `scale` times its gradient into genc / gdec. With a null genc
/// the encoder runs without recording and receives nothing (frozen).
template <typename Real>
GeneratorPass<Real> generator_pass(const Codec<Real>& codec, const CodecParams<Real>& params,
                                   const QuantizerConfig& q, const BasicVolume<Real>& x, EncodePath path,
                                   double lambda_adv, std::span<Real> genc, std::span<Real> gdec, double scale) {
  const bool train_encoder = !genc.empty();
  nn::Cache<Real> enc_cache;
  TiledEncoding<Real> tiled;
  Tensor4<Real> y;
  Quantized<Real> quant;
  if (path == EncodePath::Tiled) {
    tiled = tiled_encode_full(codec, params, x, train_encoder);
    y = tiled.y;
    quant = tiled.q;
  } else {
    auto r = encode(codec, params, haar_forward(x, PadMode::CausalReplicate), train_encoder ? &enc_cache : nullptr);
    y = std::move(r.y);
    quant = std::move(r.q);
  }

  nn::Cache<Real> dec_cache;
  const auto w_hat = decode(codec, params, quant.e, &dec_cache);
  auto x_hat = haar_inverse(w_hat, Domain::Normalized);
  x_hat.set_spacing(x.spacing());

  Tensor4<Real> logits;
  nn::Cache<Real> disc_cache;
  const bool adversarial = lambda_adv > 0;
  if (adversarial) logits = discriminate(codec, params.discriminator, to_tensor<Real>(x_hat), &disc_cache);

  LossGrads<Real> g;
  Tensor4<Real> d_logits;
  GeneratorPass<Real> out;
  out.loss = total_loss(x, x_hat, y, quant.e, adversarial ? &logits : nullptr, lambda_adv, q, &g, &d_logits);
  out.codes = std::move(quant.codes);

  auto dx = g.x_hat;
  if (adversarial) {
    std::vector<Real> scratch(params.discriminator.size(), Real(0));
    const auto d_img = codec.discriminator().backward(d_logits, params.discriminator, disc_cache, scratch, true);
    for (std::size_t i = 0; i < dx.size(); ++i) dx.values()[i] += d_img.values()[i];
  }
  for (auto& v : dx.values()) v = static_cast<Real>(v * scale);
  const auto dw = haar_inverse_backward(dx, PadMode::CausalReplicate);
  auto de = codec.decoder().backward(dw, params.decoder, dec_cache, gdec, train_encoder);

  if (train_encoder) {
    // straight-through: dL/de passes unchanged onto y
    auto dy = std::move(de);
    const auto gy = g.y.values();
    for (std::size_t i = 0; i < dy.size(); ++i) dy.values()[i] += static_cast<Real>(scale * gy[i]);
    if (path == EncodePath::Tiled) {
      tiled_encode_backward(codec, params, tiled, dy, genc);
    } else {
      codec.encoder().backward(dy, params.encoder, enc_cache, genc, false);
    }
  }
  out.fake = std::move(x_hat);
  return out;
}

/// One optimizer step of the discriminator on (real, detached fake) pairs.
/// Returns the batch-mean loss before the update.
template <typename Real>
double discriminator_step(const Codec<Real>& codec, std::vector<Real>& disc_params, AdamState<Real>& opt,
                          const AdamConfig& adam, double clip_norm, const std::vector<BasicVolume<Real>>& reals,
                          const std::vector<BasicVolume<Real>>& fakes, double* grad_norm = nullptr) {
  if (reals.size() != fakes.size() || reals.empty()) throw Error(Errc::ShapeMismatch, "real/fake batch mismatch");
  std::vector<Real> grads(disc_params.size(), Real(0));
  double loss = 0.0;
  const double scale = 1.0 / static_cast<double>(reals.size());
  for (std::size_t b = 0; b < reals.size(); ++b) {
    nn::Cache<Real> cr, cf;
    const auto lr = discriminate(codec, disc_params, to_tensor<Real>(reals[b]), &cr);
    const auto lf = discriminate(codec, disc_params, to_tensor<Real>(fakes[b]), &cf);
    Tensor4<Real> dr, df;
    loss += scale * discriminator_loss(lr, lf, &dr, &df);
    for (auto& v : dr.values()) v = static_cast<Real>(v * scale);
    for (auto& v : df.values()) v = static_cast<Real>(v * scale);
    codec.discriminator().backward(dr, disc_params, cr, grads, false);
    codec.discriminator().backward(df, disc_params, cf, grads, false);
  }
  const double norm = clip_grad_norm<Real>({std::span<Real>(grads)}, clip_norm);
  if (grad_norm) *grad_norm = norm;
  adam_step<Real>(disc_params, grads, opt, adam);
  return loss;
}

// ---------------------------------------------------------------------------
// Data sampling

struct Dataset {
  std::vector<Volume> volumes;
};

inline void check_stage_data(const StageConfig& cfg, const CodecConfig& codec, const Dataset& data) {
  if (data.volumes.empty()) throw Error(Errc::DataShapeMismatch, "no training volumes");
  const int f = codec.spatial_factor();
  for (std::size_t i = 0; i < data.volumes.size(); ++i) {
    const auto& v = data.volumes[i];
    const std::string who = "volume " + std::to_string(i) + " (" + v.shape().str() + ")";
    if (v.domain() != Domain::Normalized) throw Error(Errc::DataShapeMismatch, who + " is not normalized");
    if (v.height() % f != 0 || v.width() % f != 0) {
      throw Error(Errc::DataShapeMismatch, who + ": H and W must be multiples of " + std::to_string(f));
    }
    if (v.depth() < cfg.seq_len) {
      throw Error(Errc::DataShapeMismatch, who + " is shorter than seq_len " + std::to_string(cfg.seq_len));
    }
    if (cfg.stage == Stage::S3 && (v.depth() < 9 || (v.depth() - 1) % 8 != 0)) {
      throw Error(Errc::DataShapeMismatch, who + ": S3 needs full volumes with D = 1 mod 8");
    }
  }
}

/// The batch for one step, a pure function of (seed, global iteration).
inline std::vector<Volume> sample_batch(const StageConfig& cfg, const Dataset& data, std::uint64_t seed,
                                        std::uint64_t global_iter, std::uint64_t stage_iter) {
  Rng rng(mix_seed(mix_seed(seed, 0xDA7Aull), global_iter));
  int len = cfg.seq_len;
  if (cfg.stage == Stage::S1 && cfg.alternate_single_slice && stage_iter % 2 == 1) len = 1;
  std::vector<Volume> batch;
  for (int b = 0; b < cfg.batch; ++b) {
    const auto& v = data.volumes[rng.integer(0, static_cast<std::int64_t>(data.volumes.size()) - 1)];
    if (cfg.stage == Stage::S3) {
      batch.push_back(v);
      continue;
    }
    const int start = static_cast<int>(rng.integer(0, v.depth() - len));
    batch.push_back(crop_slices(v, start, len));
  }
  return batch;
}

// ---------------------------------------------------------------------------
// Stage driver

struct IterationRecord {
  std::uint64_t iter = 0;  // global step count after this step
  Stage stage = Stage::S1;
  LossTerms loss;
  double grad_norm = 0.0;
  double disc_loss = 0.0;  // NaN when the discriminator did not step
  bool adversarial = false;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["iter"] = iter;
    j["stage"] = to_string(stage);
    j["L_rec"] = loss.rec;
    j["L_adv"] = loss.adv;
    j["L_vq"] = loss.vq;
    j["L_entropy"] = loss.entropy;
    j["grad_norm"] = grad_norm;
    if (adversarial) j["L_disc"] = disc_loss;
    return j;
  }
};

struct TrainHooks {
  std::ostream* metrics = nullptr;  // one JSON record per line
  /// Called after every step; returning false stops the stage early.
  std::function<bool(const TrainState&, const IterationRecord&)> after_step;
};

inline std::uint64_t discriminator_seed(std::uint64_t seed, Stage s) {
  return mix_seed(mix_seed(seed, 0xD15Cull), static_cast<std::uint64_t>(s));
}

/// Enters `cfg.stage` (fresh discriminator, stage counter reset) unless the
/// state is already part-way through it, then runs the remaining steps.
inline void train_stage(TrainState& state, const StageConfig& cfg, const Dataset& data, const TrainHooks& hooks = {}) {
  cfg.validate();
  check_stage_data(cfg, state.config, data);
  const Codec<float> codec(state.config);
  codec.check_params(state.params);

  if (state.stage != cfg.stage) {
    state.stage = cfg.stage;
    state.stage_iter = 0;
  }
  if (state.stage_iter == 0) {
    state.params.discriminator = codec.init_discriminator(discriminator_seed(state.seed, cfg.stage));
    state.disc_opt.reset(state.params.discriminator.size());
  }

  const bool train_encoder = cfg.stage != Stage::S3;
  const EncodePath path = cfg.stage == Stage::S1 ? EncodePath::OneShot : EncodePath::Tiled;
  std::vector<float> genc, gdec;

  while (state.stage_iter < static_cast<std::uint64_t>(cfg.iters)) {
    const auto batch = sample_batch(cfg, data, state.seed, state.iter, state.stage_iter);
    const bool adversarial = cfg.lambda_adv > 0 && state.iter >= cfg.adv_start_iter;
    const double lambda = adversarial ? cfg.lambda_adv : 0.0;

    genc.assign(train_encoder ? state.params.encoder.size() : 0, 0.0f);
    gdec.assign(state.params.decoder.size(), 0.0f);
    IterationRecord rec;
    rec.stage = cfg.stage;
    rec.adversarial = adversarial;
    std::vector<Volume> fakes;
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (const auto& x : batch) {
      auto pass = generator_pass<float>(codec, state.params, state.quantizer, x, path, lambda, genc, gdec, scale);
      rec.loss.rec += scale * pass.loss.rec;
      rec.loss.adv += scale * pass.loss.adv;
      rec.loss.vq += scale * pass.loss.vq;
      rec.loss.entropy += scale * pass.loss.entropy;
      rec.loss.total += scale * pass.loss.total;
      if (adversarial) fakes.push_back(std::move(pass.fake));
    }

    rec.grad_norm = train_encoder ? clip_grad_norm<float>({std::span<float>(genc), std::span<float>(gdec)}, cfg.clip_norm)
                                  : clip_grad_norm<float>({std::span<float>(gdec)}, cfg.clip_norm);
    if (!std::isfinite(rec.loss.total) || !std::isfinite(rec.grad_norm)) {
      std::ostringstream msg;
      msg << "stage " << to_string(cfg.stage) << " iter " << state.iter << ": L_rec=" << rec.loss.rec
          << " L_adv=" << rec.loss.adv << " L_vq=" << rec.loss.vq << " L_entropy=" << rec.loss.entropy
          << " grad_norm=" << rec.grad_norm;
      throw Error(Errc::NonFiniteLoss, msg.str());
    }
    if (train_encoder) adam_step<float>(state.params.encoder, genc, state.enc_opt, cfg.adam);
    adam_step<float>(state.params.decoder, gdec, state.dec_opt, cfg.adam);

    rec.disc_loss = std::nan("");
    if (adversarial) {
      rec.disc_loss = discriminator_step<float>(codec, state.params.discriminator, state.disc_opt, cfg.adam,
                                                cfg.clip_norm, batch, fakes);
    }

    ++state.iter;
    ++state.stage_iter;
    rec.iter = state.iter;
    if (hooks.metrics) *hooks.metrics << rec.to_json().dump() << '\n';
    if (hooks.after_step && !hooks.after_step(state, rec)) return;
  }
}

}  // namespace voxtok
