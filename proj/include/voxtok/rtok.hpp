#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "voxtok/lfq.hpp"
#include "voxtok/rvol.hpp"

namespace voxtok {

// RTOK: one header line
//   RTOK1 {"grid":[T,H,W],"d":d,"config_id":"...","mode":"tiled|oneshot"}\n
// followed by T*H*W little-endian uint32 codes, row-major.

enum class EncodeMode { Tiled, OneShot };

inline std::string to_string(EncodeMode m) { return m == EncodeMode::Tiled ? "tiled" : "oneshot"; }

inline EncodeMode parse_encode_mode(const std::string& s) {
  if (s == "tiled") return EncodeMode::Tiled;
  if (s == "oneshot") return EncodeMode::OneShot;
  throw Error(Errc::ConfigError, "mode must be 'tiled' or 'oneshot', got '" + s + "'");
}

struct TokenFile {
  TokenGrid grid;
  EncodeMode mode = EncodeMode::Tiled;
  bool operator==(const TokenFile&) const = default;
};

inline std::string encode_rtok(const TokenFile& f) {
  const auto& g = f.grid;
  nlohmann::ordered_json h;
  h["grid"] = {g.t, g.h, g.w};
  h["d"] = g.d;
  h["config_id"] = g.config_id;
  h["mode"] = to_string(f.mode);
  std::string out = "RTOK1 " + h.dump() + "\n";
  for (auto c : g.codes) detail::append_le32(out, c);
  return out;
}

inline TokenFile decode_rtok(const std::string& bytes) {
  std::size_t off = 0;
  const auto h = detail::parse_header_line(bytes, "RTOK1", Errc::MalformedTokenFile, off);
  TokenFile f;
  auto& g = f.grid;
  try {
    const auto& shape = h.at("grid");
    if (!shape.is_array() || shape.size() != 3) throw Error(Errc::MalformedTokenFile, "grid must be [T,H,W]");
    g.t = shape[0].get<int>();
    g.h = shape[1].get<int>();
    g.w = shape[2].get<int>();
    g.d = h.at("d").get<int>();
    g.config_id = h.at("config_id").get<std::string>();
    const auto mode = h.at("mode").get<std::string>();
    if (mode != "tiled" && mode != "oneshot") throw Error(Errc::MalformedTokenFile, "unknown mode '" + mode + "'");
    f.mode = parse_encode_mode(mode);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedTokenFile, e.what());
  }
  if (g.t < 1 || g.h < 1 || g.w < 1) throw Error(Errc::MalformedTokenFile, "non-positive grid shape");
  if (g.d < 1 || g.d > 30) throw Error(Errc::MalformedTokenFile, "d must lie in [1, 30]");
  const std::size_t n = static_cast<std::size_t>(g.t) * g.h * g.w;
  if (bytes.size() - off != 4 * n) {
    throw Error(Errc::MalformedTokenFile, "expected " + std::to_string(4 * n) + " payload bytes, found " +
                                              std::to_string(bytes.size() - off));
  }
  g.codes.resize(n);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + off);
  const std::uint32_t limit = std::uint32_t{1} << g.d;
  for (std::size_t i = 0; i < n; ++i) {
    g.codes[i] = detail::read_le32(p + 4 * i);
    if (g.codes[i] >= limit) throw Error(Errc::CodeOutOfRange, "code " + std::to_string(g.codes[i]) + " at index " + std::to_string(i));
  }
  return f;
}

inline void save_tokens(const TokenFile& f, const std::filesystem::path& path) { detail::write_file(path, encode_rtok(f)); }

inline TokenFile load_tokens(const std::filesystem::path& path) { return decode_rtok(detail::read_file(path)); }

}  // namespace voxtok
