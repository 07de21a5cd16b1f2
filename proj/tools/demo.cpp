// Walks through the library end to end on a small phantom set: a short
// curriculum, tiled tokenization of a longer volume, reconstruction and metrics.

#include <cstdio>
#include <filesystem>

#include "voxtok/voxtok.hpp"

using namespace voxtok;

int main() {
  CodecConfig cfg;
  cfg.base_channels = 16;
  cfg.d = 8;
  QuantizerConfig quant;
  quant.d = cfg.d;

  Dataset data;
  for (int i = 0; i < 6; ++i) data.volumes.push_back(make_phantom(mix_seed(1, i), {17, 32, 32}));

  auto state = init_train_state(cfg, quant, 42);
  for (Stage s : {Stage::S1, Stage::S2, Stage::S3}) {
    StageConfig sc;
    sc.stage = s;
    sc.iters = s == Stage::S1 ? 150 : 40;
    sc.seq_len = s == Stage::S1 ? 9 : 17;
    sc.adam.lr = 1e-3;
    sc.adv_start_iter = 180;
    TrainHooks hooks;
    hooks.after_step = [](const TrainState& st, const IterationRecord& r) {
      if (st.stage_iter % 20 == 0) {
        std::printf("%s step %4llu  L_rec %.4f  L_vq %.4f  L_entropy %+.4f\n", to_string(r.stage).c_str(),
                    static_cast<unsigned long long>(r.iter), r.loss.rec, r.loss.vq, r.loss.entropy);
      }
      return true;
    };
    train_stage(state, sc, data, hooks);
  }

  const Codec<float> codec(cfg);
  const auto volume = make_phantom(99, {41, 32, 32});
  const auto tokens = tiled_encode(codec, state.params, volume);
  std::printf("\n%dx%dx%d volume -> %dx%dx%d tokens of %d bits\n", volume.depth(), volume.height(), volume.width(),
              tokens.t, tokens.h, tokens.w, tokens.d);

  const auto recon = reconstruct(codec, state.params, tokens);
  const auto report = evaluate_pair(volume, recon, &tokens);
  std::printf("PSNR %.2f dB  SSIM %.3f  unique codes %zu  perplexity %.1f\n", report.psnr, report.ssim,
              report.unique_codes, report.perplexity);

  const auto dir = std::filesystem::temp_directory_path() / "voxtok_demo";
  std::filesystem::create_directories(dir);
  save_tokens({tokens, EncodeMode::Tiled}, dir / "volume.rtok");
  save_volume(recon, dir / "recon.rvol");
  save_checkpoint(state, dir / "demo.ckpt");
  std::printf("wrote %s\n", dir.string().c_str());
}
