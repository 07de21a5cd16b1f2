#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "voxtok/curriculum.hpp"
#include "voxtok/phantom.hpp"
#include "voxtok/rvol.hpp"

namespace voxtok {

struct PhantomSpec {
  int count = 8;
  VolumeShape shape{33, 64, 64};
  std::uint64_t seed = 0;
};

struct DataSpec {
  std::optional<PhantomSpec> phantoms;
  std::filesystem::path directory;  // RVOL files, used when phantoms is empty
};

/// Everything `train` needs. Parsing is strict: unknown keys and wrong types
/// are rejected with the offending key path in the message.
struct RunConfig {
  CodecConfig codec;
  QuantizerConfig quantizer;
  std::vector<StageConfig> stages;
  DataSpec data;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "run";
  int checkpoint_every = 0;  // 0: only at stage ends
};

namespace detail {

class JsonReader {
 public:
  JsonReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  [[noreturn]] static void fail(const std::string& key, const std::string& msg) {
    throw Error(Errc::ConfigError, key + ": " + msg);
  }

  void allow(std::initializer_list<const char*> keys) const {
    for (const auto& [k, v] : j_.items()) {
      if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; })) {
        fail(key(k), "unknown key");
      }
    }
  }

  bool has(const char* k) const { return j_.contains(k); }
  const nlohmann::json& raw(const char* k) const {
    if (!j_.contains(k)) fail(key(k), "missing required key");
    return j_.at(k);
  }
  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

  double number(const char* k, double fallback) const {
    if (!has(k)) return fallback;
    if (!j_.at(k).is_number()) fail(key(k), "expected a number");
    return j_.at(k).get<double>();
  }
  std::int64_t integer(const char* k, std::int64_t fallback, std::int64_t lo = 0) const {
    if (!has(k)) return fallback;
    if (!j_.at(k).is_number_integer()) fail(key(k), "expected an integer");
    const auto v = j_.at(k).get<std::int64_t>();
    if (v < lo) fail(key(k), "must be >= " + std::to_string(lo));
    return v;
  }
  bool boolean(const char* k, bool fallback) const {
    if (!has(k)) return fallback;
    if (!j_.at(k).is_boolean()) fail(key(k), "expected true or false");
    return j_.at(k).get<bool>();
  }
  std::string string(const char* k) const {
    const auto& v = raw(k);
    if (!v.is_string()) fail(key(k), "expected a string");
    return v.get<std::string>();
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
};

inline StageConfig parse_stage_config(const nlohmann::json& j, const std::string& path) {
  JsonReader r(j, path);
  r.allow({"stage", "iters", "batch", "seq_len", "alternate_single_slice", "lr", "beta1", "beta2", "eps", "clip_norm",
           "lambda_adv", "adv_start_iter"});
  StageConfig s;
  try {
    s.stage = parse_stage(r.string("stage"));
  } catch (const Error& e) {
    JsonReader::fail(r.key("stage"), e.detail());
  }
  s.iters = static_cast<int>(r.integer("iters", 0));
  s.batch = static_cast<int>(r.integer("batch", 1, 1));
  s.seq_len = static_cast<int>(r.integer("seq_len", s.stage == Stage::S1 ? 9 : 33, 1));
  s.alternate_single_slice = r.boolean("alternate_single_slice", true);
  s.adam.lr = r.number("lr", s.adam.lr);
  s.adam.beta1 = r.number("beta1", s.adam.beta1);
  s.adam.beta2 = r.number("beta2", s.adam.beta2);
  s.adam.eps = r.number("eps", s.adam.eps);
  s.clip_norm = r.number("clip_norm", s.clip_norm);
  s.lambda_adv = r.number("lambda_adv", s.lambda_adv);
  s.adv_start_iter = static_cast<std::uint64_t>(r.integer("adv_start_iter", 2000));
  try {
    s.validate();
  } catch (const Error& e) {
    JsonReader::fail(path, e.detail());
  }
  return s;
}

}  // namespace detail

/// `base_dir` resolves a relative data directory (normally the config file's directory).
inline RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  detail::JsonReader r(j, "");
  r.allow({"codec", "quantizer", "stages", "data", "seed", "output_dir", "checkpoint_every"});
  RunConfig c;
  if (r.has("codec")) c.codec = CodecConfig::from_json(r.raw("codec"));
  if (r.has("quantizer")) {
    detail::JsonReader q(r.raw("quantizer"), "quantizer");
    q.allow({"beta", "entropy_weight"});
    c.quantizer.beta = q.number("beta", c.quantizer.beta);
    c.quantizer.entropy_weight = q.number("entropy_weight", c.quantizer.entropy_weight);
  }
  c.quantizer.d = c.codec.d;
  try {
    c.quantizer.validate();
  } catch (const Error& e) {
    detail::JsonReader::fail("quantizer", e.detail());
  }

  const auto& stages = r.raw("stages");
  if (!stages.is_array() || stages.empty()) detail::JsonReader::fail("stages", "expected a non-empty array");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    c.stages.push_back(detail::parse_stage_config(stages[i], "stages[" + std::to_string(i) + "]"));
    if (i > 0 && static_cast<int>(c.stages[i].stage) <= static_cast<int>(c.stages[i - 1].stage)) {
      detail::JsonReader::fail("stages[" + std::to_string(i) + "].stage", "stages must run in S1, S2, S3 order");
    }
  }

  detail::JsonReader d(r.raw("data"), "data");
  d.allow({"phantoms", "directory"});
  if (d.has("phantoms") == d.has("directory")) detail::JsonReader::fail("data", "give exactly one of phantoms, directory");
  if (d.has("phantoms")) {
    detail::JsonReader p(d.raw("phantoms"), "data.phantoms");
    p.allow({"count", "shape", "seed"});
    PhantomSpec ps;
    ps.count = static_cast<int>(p.integer("count", ps.count, 1));
    ps.seed = static_cast<std::uint64_t>(p.integer("seed", 0));
    if (p.has("shape")) {
      const auto& s = p.raw("shape");
      if (!s.is_array() || s.size() != 3 || !std::all_of(s.begin(), s.end(), [](const auto& x) {
            return x.is_number_integer() && x.template get<int>() >= 1;
          })) {
        detail::JsonReader::fail("data.phantoms.shape", "expected [D,H,W] positive integers");
      }
      ps.shape = {s[0].get<int>(), s[1].get<int>(), s[2].get<int>()};
    }
    c.data.phantoms = ps;
  } else {
    std::filesystem::path dir = d.string("directory");
    c.data.directory = dir.is_relative() && !base_dir.empty() ? base_dir / dir : dir;
  }

  c.seed = static_cast<std::uint64_t>(r.integer("seed", 0));
  if (r.has("output_dir")) {
    std::filesystem::path out = r.string("output_dir");
    c.output_dir = out.is_relative() && !base_dir.empty() ? base_dir / out : out;
  }
  c.checkpoint_every = static_cast<int>(r.integer("checkpoint_every", 0));
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  const std::string text = detail::read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ConfigError, std::string("not valid JSON: ") + e.what());
  }
  return parse_run_config(j, path.parent_path());
}

/// Volumes named by the data spec, in a fixed order (phantom index or file name).
inline Dataset load_dataset(const DataSpec& spec) {
  Dataset ds;
  if (spec.phantoms) {
    for (int i = 0; i < spec.phantoms->count; ++i) {
      ds.volumes.push_back(make_phantom(mix_seed(spec.phantoms->seed, static_cast<std::uint64_t>(i)), spec.phantoms->shape));
    }
    return ds;
  }
  std::error_code ec;
  if (!std::filesystem::is_directory(spec.directory, ec)) throw Error(Errc::MissingFile, spec.directory.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(spec.directory)) {
    if (entry.is_regular_file() && entry.path().extension() == ".rvol") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) ds.volumes.push_back(load_volume(f));
  if (ds.volumes.empty()) throw Error(Errc::MissingFile, "no .rvol files in " + spec.directory.string());
  return ds;
}

}  // namespace voxtok
