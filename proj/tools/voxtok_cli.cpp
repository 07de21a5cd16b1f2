#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "voxtok/voxtok.hpp"

namespace fs = std::filesystem;
using namespace voxtok;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInput = 3;
constexpr int kExitNumeric = 4;

int exit_code_for(Errc e) {
  switch (e) {
    case Errc::ConfigError:
    case Errc::InvalidSpec: return kExitConfig;
    case Errc::NonFiniteLoss: return kExitNumeric;
    default: return kExitInput;
  }
}

int report_error(const std::string& kind, const std::string& message, int code) {
  nlohmann::ordered_json j;
  j["error"] = kind;
  j["message"] = message;
  j["exit_code"] = code;
  std::cerr << j.dump() << '\n';
  return code;
}

// Execution is single-threaded with a fixed reduction order, so every run is
// deterministic; the variable is accepted and echoed for reproducibility logs.
bool deterministic_requested() {
  const char* v = std::getenv("VOXTOK_DETERMINISTIC");
  return v && std::string(v) != "0" && std::string(v) != "";
}

std::string stage_checkpoint_name(Stage s) { return "stage_" + to_string(s) + ".ckpt"; }

// Keeps the rows of an earlier run up to `iter` so a resumed log reads as one run.
void truncate_metrics(const fs::path& path, std::uint64_t iter) {
  std::vector<std::string> keep;
  {
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.contains("iter") || j["iter"].get<std::uint64_t>() > iter) break;
      keep.push_back(line);
    }
  }
  std::ofstream out(path, std::ios::trunc);
  for (const auto& l : keep) out << l << '\n';
}

struct TrainArgs {
  std::string config;
  std::string resume;
};

int cmd_train(const TrainArgs& args) {
  const auto cfg = load_run_config(args.config);
  const auto data = load_dataset(cfg.data);
  fs::create_directories(cfg.output_dir);

  TrainState state = init_train_state(cfg.codec, cfg.quantizer, cfg.seed);
  if (!args.resume.empty()) {
    state = load_checkpoint(args.resume);
    if (state.config.id() != cfg.codec.id() || state.seed != cfg.seed) {
      throw Error(Errc::ConfigError, "checkpoint " + args.resume + " was written by a different codec config or seed");
    }
    if (state.quantizer.beta != cfg.quantizer.beta || state.quantizer.entropy_weight != cfg.quantizer.entropy_weight) {
      throw Error(Errc::ConfigError, "checkpoint " + args.resume + " has different quantizer settings");
    }
  }

  const fs::path metrics_path = cfg.output_dir / "metrics.ndjson";
  if (args.resume.empty()) {
    std::ofstream(metrics_path, std::ios::trunc);
  } else {
    truncate_metrics(metrics_path, state.iter);
  }
  std::ofstream metrics(metrics_path, std::ios::app);

  TrainHooks hooks;
  hooks.metrics = &metrics;
  if (cfg.checkpoint_every > 0) {
    hooks.after_step = [&](const TrainState& s, const IterationRecord&) {
      if (s.iter % static_cast<std::uint64_t>(cfg.checkpoint_every) == 0) {
        metrics.flush();
        save_checkpoint(s, cfg.output_dir / ("iter_" + std::to_string(s.iter) + ".ckpt"));
      }
      return true;
    };
  }

  nlohmann::ordered_json summary;
  summary["deterministic"] = deterministic_requested();
  summary["resumed_from"] = args.resume.empty() ? nlohmann::ordered_json() : nlohmann::ordered_json(args.resume);
  summary["checkpoints"] = nlohmann::ordered_json::array();
  for (const auto& stage : cfg.stages) {
    if (static_cast<int>(stage.stage) < static_cast<int>(state.stage)) continue;  // finished before the resume point
    train_stage(state, stage, data, hooks);
    metrics.flush();
    const auto path = cfg.output_dir / stage_checkpoint_name(stage.stage);
    save_checkpoint(state, path);
    summary["checkpoints"].push_back(path.string());
  }
  summary["iter"] = state.iter;
  std::cout << summary.dump() << '\n';
  return kExitOk;
}

std::vector<fs::path> rvol_files(const fs::path& dir) {
  std::vector<fs::path> files;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(Errc::MissingFile, dir.string());
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".rvol") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(Errc::MissingFile, "no .rvol files in " + dir.string());
  return files;
}

Volume load_normalized(const fs::path& path) {
  auto v = load_volume(path);
  if (v.domain() != Domain::Normalized) throw Error(Errc::DataShapeMismatch, path.string() + " is not in the normalized domain");
  return v;
}

struct CodecArgs {
  std::string checkpoint, input, output, mode = "tiled";
};

int cmd_encode(const CodecArgs& a) {
  const auto state = load_checkpoint(a.checkpoint);
  const Codec<float> codec(state.config);
  const auto mode = parse_encode_mode(a.mode);
  const auto v = load_normalized(a.input);
  save_tokens({encode_volume(codec, state.params, v, mode), mode}, a.output);
  return kExitOk;
}

BasicVolume<float> decode_tokens(const TrainState& state, const TokenFile& f) {
  const Codec<float> codec(state.config);
  if (f.grid.config_id != state.config.id()) {
    throw Error(Errc::MalformedTokenFile, "tokens were written by config " + f.grid.config_id + ", checkpoint is " +
                                              state.config.id());
  }
  return reconstruct(codec, state.params, f.grid);
}

int cmd_decode(const CodecArgs& a) {
  const auto state = load_checkpoint(a.checkpoint);
  save_volume(decode_tokens(state, load_tokens(a.input)), a.output);
  return kExitOk;
}

int cmd_reconstruct(const CodecArgs& a) {
  const auto state = load_checkpoint(a.checkpoint);
  const Codec<float> codec(state.config);
  const auto v = load_normalized(a.input);
  save_volume(reconstruct(codec, state.params, encode_volume(codec, state.params, v, parse_encode_mode(a.mode))),
              a.output);
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoint, data_dir, reconstruction_dir, mode = "tiled";
};

// With a checkpoint every volume is encoded and reconstructed; with
// --reconstruction-dir the files there are scored against the same-named references.
int cmd_eval(const EvalArgs& a) {
  if (a.checkpoint.empty() == a.reconstruction_dir.empty()) {
    throw Error(Errc::ConfigError, "eval takes exactly one of --checkpoint, --reconstruction-dir");
  }
  const auto files = rvol_files(a.data_dir);
  std::vector<Volume> refs;
  for (const auto& f : files) refs.push_back(load_normalized(f));

  EvalSummary summary;
  const bool scored_codes = a.reconstruction_dir.empty();
  if (scored_codes) {
    const auto state = load_checkpoint(a.checkpoint);
    summary = evaluate_reconstruction(Codec<float>(state.config), state.params, refs, parse_encode_mode(a.mode));
  } else {
    const double n = static_cast<double>(refs.size());
    for (std::size_t i = 0; i < refs.size(); ++i) {
      const auto r = evaluate_pair(refs[i], load_normalized(fs::path(a.reconstruction_dir) / files[i].filename()));
      summary.per_volume.push_back(r);
      summary.aggregate.psnr += r.psnr / n;
      summary.aggregate.ssim += r.ssim / n;
      summary.aggregate.mse += r.mse / n;
    }
  }
  auto emit = [&](const MetricReport& r, const std::string& name) {
    auto j = to_json(r);
    if (!scored_codes) {
      j.erase("unique_codes");
      j.erase("perplexity");
    }
    j["volume"] = name;
    return j;
  };
  for (std::size_t i = 0; i < summary.per_volume.size(); ++i) {
    std::cout << emit(summary.per_volume[i], files[i].filename().string()).dump() << '\n';
  }
  auto agg = emit(summary.aggregate, "aggregate");
  agg["count"] = summary.per_volume.size();
  std::cout << agg.dump() << '\n';
  return kExitOk;
}

struct PhantomArgs {
  std::uint64_t seed = 0;
  std::vector<int> shape{33, 64, 64};
  int count = 1;
  std::string out_dir;
};

int cmd_phantom(const PhantomArgs& a) {
  if (a.shape.size() != 3) throw Error(Errc::ConfigError, "--shape takes D,H,W");
  const VolumeShape shape{a.shape[0], a.shape[1], a.shape[2]};
  fs::create_directories(a.out_dir);
  for (int i = 0; i < a.count; ++i) {
    std::ostringstream name;
    name << "phantom_" << std::setw(3) << std::setfill('0') << i << ".rvol";
    save_volume(make_phantom(mix_seed(a.seed, static_cast<std::uint64_t>(i)), shape), fs::path(a.out_dir) / name.str());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"voxtok: causal volumetric tokenizer"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Run the S1/S2/S3 curriculum from a JSON run config");
  train->add_option("--config", train_args.config, "Run config (JSON)")->required();
  train->add_option("--resume", train_args.resume, "Checkpoint to continue from");

  CodecArgs enc_args, dec_args, rec_args;
  auto* enc = app.add_subcommand("encode", "Volume (RVOL) to token file (RTOK)");
  auto* dec = app.add_subcommand("decode", "Token file (RTOK) to volume (RVOL)");
  auto* rec = app.add_subcommand("reconstruct", "Encode then decode a volume");
  for (auto [cmd, args] : {std::pair{enc, &enc_args}, std::pair{dec, &dec_args}, std::pair{rec, &rec_args}}) {
    cmd->add_option("--checkpoint", args->checkpoint, "Trained checkpoint")->required();
    cmd->add_option("--input", args->input)->required();
    cmd->add_option("--output", args->output)->required();
  }
  for (auto [cmd, args] : {std::pair{enc, &enc_args}, std::pair{rec, &rec_args}}) {
    cmd->add_option("--mode", args->mode, "tiled or oneshot")->check(CLI::IsMember({"tiled", "oneshot"}));
  }

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Reconstruction metrics over a directory of RVOL files (NDJSON)");
  eval->add_option("--checkpoint", eval_args.checkpoint);
  eval->add_option("--reconstruction-dir", eval_args.reconstruction_dir,
                                      "Score existing reconstructions instead of running the codec");
  eval->add_option("--data-dir", eval_args.data_dir)->required();
  eval->add_option("--mode", eval_args.mode, "tiled or oneshot")->check(CLI::IsMember({"tiled", "oneshot"}));

  PhantomArgs phantom_args;
  auto* phantom = app.add_subcommand("phantom", "Write seeded synthetic volumes");
  phantom->add_option("--seed", phantom_args.seed);
  phantom->add_option("--shape", phantom_args.shape, "D,H,W")->delimiter(',')->expected(3);
  phantom->add_option("--count", phantom_args.count)->check(CLI::PositiveNumber);
  phantom->add_option("--out-dir", phantom_args.out_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("UsageError", e.what(), kExitConfig);
  }

  try {
    if (*train) return cmd_train(train_args);
    if (*enc) return cmd_encode(enc_args);
    if (*dec) return cmd_decode(dec_args);
    if (*rec) return cmd_reconstruct(rec_args);
    if (*eval) return cmd_eval(eval_args);
    if (*phantom) return cmd_phantom(phantom_args);
  } catch (const Error& e) {
    return report_error(std::string(to_string(e.code())), e.detail(), exit_code_for(e.code()));
  } catch (const std::exception& e) {
    return report_error("IoFailure", e.what(), kExitInput);
  }
  return kExitOk;
}
