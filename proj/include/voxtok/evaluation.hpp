#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "voxtok/metrics.hpp"
#include "voxtok/rtok.hpp"
#include "voxtok/tiling.hpp"

namespace voxtok {

template <typename Real>
TokenGrid encode_volume(const Codec<Real>& codec, const CodecParams<Real>& params, const BasicVolume<Real>& v,
                        EncodeMode mode) {
  if (mode == EncodeMode::Tiled) return tiled_encode(codec, params, v);
  check_tiled_depth(v.depth());  // same length contract for both modes
  return one_shot_encode(codec, params, v);
}

/// PSNR is +inf for identical volumes; JSON has no infinity, so it is written as "inf".
inline nlohmann::ordered_json psnr_json(double psnr) {
  if (std::isinf(psnr)) return "inf";
  return psnr;
}

inline nlohmann::ordered_json to_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["psnr"] = psnr_json(r.psnr);
  j["ssim"] = r.ssim;
  j["mse"] = r.mse;
  j["unique_codes"] = r.unique_codes;
  j["perplexity"] = r.perplexity;
  return j;
}

struct EvalSummary {
  std::vector<MetricReport> per_volume;
  MetricReport aggregate;  // means of psnr/ssim/mse; code usage pooled over all grids
};

/// Encodes (per `mode`), reconstructs and scores every volume.
template <typename Real>
EvalSummary evaluate_reconstruction(const Codec<Real>& codec, const CodecParams<Real>& params,
                                    const std::vector<BasicVolume<Real>>& volumes, EncodeMode mode) {
  EvalSummary s;
  CodeUsageCounter pooled;
  for (const auto& v : volumes) {
    const auto grid = encode_volume(codec, params, v, mode);
    const auto x_hat = reconstruct(codec, params, grid);
    s.per_volume.push_back(evaluate_pair(v, x_hat, &grid));
    pooled.add(grid);
  }
  const double n = static_cast<double>(volumes.size());
  for (const auto& r : s.per_volume) {
    s.aggregate.psnr += r.psnr / n;
    s.aggregate.ssim += r.ssim / n;
    s.aggregate.mse += r.mse / n;
  }
  const auto usage = pooled.result();
  s.aggregate.unique_codes = usage.unique_count;
  s.aggregate.perplexity = usage.perplexity;
  return s;
}

}  // namespace voxtok
