#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "lane_emden/error.hpp"
#include "lane_emden/field.hpp"

namespace lane_emden {

namespace fs = std::filesystem;

/// Shortest round-trip form for finite values; nan/inf spelled out.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

using CsvCell = std::variant<double, long long, std::string>;

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string csv_cell(const CsvCell& c) {
  if (const auto* d = std::get_if<double>(&c)) return format_number(*d);
  if (const auto* i = std::get_if<long long>(&c)) return std::to_string(*i);
  return csv_escape(std::get<std::string>(c));
}

inline std::ofstream open_output(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream os(path, mode | std::ios::trunc);
  if (!os) fail(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  return os;
}

inline void write_csv(const fs::path& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<CsvCell>>& rows) {
  auto os = open_output(path, std::ios::out | std::ios::binary);
  auto line = [&](auto&& cells, auto&& fmt) {
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << fmt(cells[i]);
    os << "\r\n";
  };
  line(header, csv_escape);
  for (const auto& r : rows) {
    require(r.size() == header.size(), ErrorCode::InvalidArgument, "CSV row width differs from the header");
    line(r, csv_cell);
  }
  if (!os) fail(ErrorCode::IoError, "write failed: " + path.string());
}

/// One row per unknown: lattice indices, position and value.
inline void write_field_csv(const fs::path& path, const Field& u) {
  const Grid& g = u.grid();
  std::vector<std::vector<CsvCell>> rows;
  rows.reserve(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) {
    const std::size_t id = g.unknown_node(k);
    const Point x = g.position(k);
    rows.push_back({static_cast<long long>(g.node_i(id)), static_cast<long long>(g.node_j(id)), x.x, x.y, u[k]});
  }
  write_csv(path, {"i", "j", "x", "y", "u"}, rows);
}

struct Pgm {
  int width = 0, height = 0, maxval = 65535;
  std::vector<std::uint16_t> pixels;  // row-major, top row first
};

/// Heatmap of u / max u over the full node lattice, north up, 16-bit P5.
inline Pgm field_heatmap(const Field& u) {
  const Grid& g = u.grid();
  Pgm img;
  img.width = g.nx();
  img.height = g.ny();
  img.pixels.assign(static_cast<std::size_t>(img.width) * img.height, 0);
  const double top = u.max_value();
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      const double v = top > 0.0 ? std::clamp(u.node_value(i, j) / top, 0.0, 1.0) : 0.0;
      img.pixels[static_cast<std::size_t>(g.ny() - 1 - j) * img.width + i] =
          static_cast<std::uint16_t>(std::lround(v * img.maxval));
    }
  return img;
}

inline void write_pgm(const fs::path& path, const Pgm& img) {
  auto os = open_output(path, std::ios::out | std::ios::binary);
  os << "P5\n" << img.width << ' ' << img.height << '\n' << img.maxval << '\n';
  for (std::uint16_t v : img.pixels) {
    const char be[2] = {static_cast<char>(v >> 8), static_cast<char>(v & 0xff)};
    os.write(be, 2);
  }
  if (!os) fail(ErrorCode::IoError, "write failed: " + path.string());
}

inline Pgm read_pgm(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::IoError, "cannot open " + path.string());
  std::string magic;
  Pgm img;
  is >> magic >> img.width >> img.height >> img.maxval;
  is.get();
  require(is && magic == "P5" && img.maxval > 255 && img.maxval <= 65535, ErrorCode::IoError,
          "not a 16-bit P5 file: " + path.string());
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
  for (auto& v : img.pixels) {
    unsigned char be[2];
    is.read(reinterpret_cast<char*>(be), 2);
    v = static_cast<std::uint16_t>((be[0] << 8) | be[1]);
  }
  if (!is) fail(ErrorCode::IoError, "truncated PGM: " + path.string());
  return img;
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  auto os = open_output(path);
  os << j.dump(2) << '\n';
  if (!os) fail(ErrorCode::IoError, "write failed: " + path.string());
}

inline nlohmann::json read_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::IoError, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::ConfigInvalid, path.string() + ": " + e.what());
  }
}

}  // namespace lane_emden
