#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "voxtok/error.hpp"
#include "voxtok/volume.hpp"

namespace voxtok {

// RVOL: one UTF-8 header line
//   RVOL1 {"shape":[D,H,W],"spacing":[sx,sy,sz],"domain":"HU|Normalized"}\n
// followed by D*H*W little-endian IEEE-754 binary32 values, W innermost.

namespace detail {

inline void append_le32(std::string& out, std::uint32_t bits) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
}

inline std::uint32_t read_le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error(Errc::MissingFile, path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::MissingFile, path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw Error(Errc::IoFailure, "short write to " + path.string());
}

/// Splits "<MAGIC> <json>\n<payload>" and returns the parsed json; payload_offset points past '\n'.
inline nlohmann::json parse_header_line(const std::string& bytes, std::string_view magic, Errc err,
                                        std::size_t& payload_offset) {
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw Error(err, "missing header terminator");
  const std::string line = bytes.substr(0, nl);
  if (line.size() <= magic.size() || line.compare(0, magic.size(), magic) != 0 || line[magic.size()] != ' ') {
    throw Error(err, "bad magic, expected '" + std::string(magic) + "'");
  }
  payload_offset = nl + 1;
  try {
    return nlohmann::json::parse(line.substr(magic.size() + 1));
  } catch (const nlohmann::json::exception& e) {
    throw Error(err, std::string("header json: ") + e.what());
  }
}

}  // namespace detail

inline std::string encode_rvol(const Volume& v) {
  nlohmann::ordered_json header;
  header["shape"] = {v.depth(), v.height(), v.width()};
  header["spacing"] = {v.spacing().x, v.spacing().y, v.spacing().z};
  header["domain"] = std::string(to_string(v.domain()));
  std::string out = "RVOL1 " + header.dump() + "\n";
  out.reserve(out.size() + v.size() * 4);
  for (float x : v.values()) detail::append_le32(out, std::bit_cast<std::uint32_t>(x));
  return out;
}

inline Volume decode_rvol(const std::string& bytes) {
  std::size_t off = 0;
  const auto h = detail::parse_header_line(bytes, "RVOL1", Errc::MalformedHeader, off);
  VolumeShape shape;
  Spacing spacing;
  Domain domain;
  try {
    const auto& s = h.at("shape");
    const auto& sp = h.at("spacing");
    if (!s.is_array() || s.size() != 3 || !sp.is_array() || sp.size() != 3) {
      throw Error(Errc::MalformedHeader, "shape and spacing must be 3-element arrays");
    }
    shape = {s[0].get<int>(), s[1].get<int>(), s[2].get<int>()};
    spacing = {sp[0].get<double>(), sp[1].get<double>(), sp[2].get<double>()};
    domain = parse_domain(h.at("domain").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedHeader, e.what());
  }
  if (shape.d < 1 || shape.h < 1 || shape.w < 1) throw Error(Errc::MalformedHeader, "non-positive shape");
  if (!(spacing.x > 0 && spacing.y > 0 && spacing.z > 0)) throw Error(Errc::MalformedHeader, "non-positive spacing");

  const std::size_t expected = shape.numel() * 4;
  if (bytes.size() - off != expected) {
    throw Error(Errc::PayloadSizeMismatch, "expected " + std::to_string(expected) + " payload bytes, found " +
                                               std::to_string(bytes.size() - off));
  }
  Volume v(shape, spacing, domain);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + off);
  for (std::size_t i = 0; i < v.size(); ++i) v.values()[i] = std::bit_cast<float>(detail::read_le32(p + 4 * i));
  check_domain(v);
  return v;
}

inline Volume load_volume(const std::filesystem::path& path) { return decode_rvol(detail::read_file(path)); }

inline void save_volume(const Volume& v, const std::filesystem::path& path) { detail::write_file(path, encode_rvol(v)); }

}  // namespace voxtok
