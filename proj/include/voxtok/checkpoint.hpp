#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "voxtok/curriculum.hpp"
#include "voxtok/rvol.hpp"

namespace voxtok {

// Checkpoint: one header line
//   RCKPT1 {manifest}\n
// followed by the tensors listed in manifest.tensors, in order, each as
// little-endian binary32 values. The manifest records the codec config and its
// id, quantizer weights, stage, counters, seed and Adam step counts.

namespace detail {

template <typename State>
auto checkpoint_tensors(State& s) {
  using Ptr = decltype(&s.params.encoder);
  return std::vector<std::pair<std::string, Ptr>>{{"encoder", &s.params.encoder},    {"decoder", &s.params.decoder},
          {"discriminator", &s.params.discriminator},
          {"encoder.adam_m", &s.enc_opt.m},  {"encoder.adam_v", &s.enc_opt.v},
          {"decoder.adam_m", &s.dec_opt.m},  {"decoder.adam_v", &s.dec_opt.v},
          {"discriminator.adam_m", &s.disc_opt.m}, {"discriminator.adam_v", &s.disc_opt.v}};
}

}  // namespace detail

inline std::string encode_checkpoint(const TrainState& s) {
  nlohmann::ordered_json m;
  m["config"] = s.config.to_json();
  m["config_id"] = s.config.id();
  m["quantizer"] = {{"beta", s.quantizer.beta}, {"entropy_weight", s.quantizer.entropy_weight}};
  m["stage"] = to_string(s.stage);
  m["iter"] = s.iter;
  m["stage_iter"] = s.stage_iter;
  m["seed"] = s.seed;
  m["adam_steps"] = {{"encoder", s.enc_opt.step}, {"decoder", s.dec_opt.step}, {"discriminator", s.disc_opt.step}};
  auto tensors = nlohmann::ordered_json::array();
  for (const auto& [name, vec] : detail::checkpoint_tensors(s)) tensors.push_back({{"name", name}, {"count", vec->size()}});
  m["tensors"] = tensors;
  std::string out = "RCKPT1 " + m.dump() + "\n";
  for (const auto& [name, vec] : detail::checkpoint_tensors(s)) {
    for (float x : *vec) detail::append_le32(out, std::bit_cast<std::uint32_t>(x));
  }
  return out;
}

inline TrainState decode_checkpoint(const std::string& bytes) {
  std::size_t off = 0;
  const auto m = detail::parse_header_line(bytes, "RCKPT1", Errc::MalformedCheckpoint, off);
  TrainState s;
  try {
    s.config = CodecConfig::from_json(m.at("config"));
    if (m.at("config_id").get<std::string>() != s.config.id()) {
      throw Error(Errc::MalformedCheckpoint, "config_id does not match the stored config");
    }
    s.quantizer.d = s.config.d;
    s.quantizer.beta = m.at("quantizer").at("beta").get<double>();
    s.quantizer.entropy_weight = m.at("quantizer").at("entropy_weight").get<double>();
    s.stage = parse_stage(m.at("stage").get<std::string>());
    s.iter = m.at("iter").get<std::uint64_t>();
    s.stage_iter = m.at("stage_iter").get<std::uint64_t>();
    s.seed = m.at("seed").get<std::uint64_t>();
    s.enc_opt.step = m.at("adam_steps").at("encoder").get<std::uint64_t>();
    s.dec_opt.step = m.at("adam_steps").at("decoder").get<std::uint64_t>();
    s.disc_opt.step = m.at("adam_steps").at("discriminator").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedCheckpoint, e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::MalformedCheckpoint) throw;
    throw Error(Errc::MalformedCheckpoint, e.detail());
  }
  s.params.config_id = s.config.id();

  const Codec<float> codec(s.config);
  const std::size_t expected[] = {codec.encoder_layout().size(), codec.decoder_layout().size(),
                                  codec.discriminator_layout().size()};
  const auto& listed = m.at("tensors");
  auto slots = detail::checkpoint_tensors(s);
  if (!listed.is_array() || listed.size() != slots.size()) {
    throw Error(Errc::MalformedCheckpoint, "tensor list does not match the checkpoint layout");
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  std::size_t pos = off;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto& [name, vec] = slots[i];
    std::size_t count = 0;
    try {
      if (listed[i].at("name").get<std::string>() != name) throw Error(Errc::MalformedCheckpoint, "unexpected tensor order");
      count = listed[i].at("count").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::MalformedCheckpoint, e.what());
    }
    if (count != expected[i < 3 ? i : (i - 3) / 2]) {
      throw Error(Errc::MalformedCheckpoint, name + " holds " + std::to_string(count) + " values, config needs " +
                                                 std::to_string(expected[i < 3 ? i : (i - 3) / 2]));
    }
    if (bytes.size() < pos + 4 * count) throw Error(Errc::MalformedCheckpoint, "truncated payload in " + name);
    vec->resize(count);
    for (std::size_t k = 0; k < count; ++k) (*vec)[k] = std::bit_cast<float>(detail::read_le32(p + pos + 4 * k));
    pos += 4 * count;
  }
  if (pos != bytes.size()) throw Error(Errc::MalformedCheckpoint, "trailing bytes after the last tensor");
  return s;
}

inline void save_checkpoint(const TrainState& s, const std::filesystem::path& path) {
  // write then rename so an interrupted save never leaves a torn checkpoint
  auto tmp = path;
  tmp += ".tmp";
  detail::write_file(tmp, encode_checkpoint(s));
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(Errc::IoFailure, "cannot move checkpoint into place: " + ec.message());
}

inline TrainState load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(detail::read_file(path)); }

}  // namespace voxtok
