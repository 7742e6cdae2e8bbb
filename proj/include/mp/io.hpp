#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "mp/errors.hpp"
#include "mp/gp.hpp"
#include "mp/kernels.hpp"
#include "mp/metrics.hpp"
#include "mp/so3.hpp"

namespace mp {
namespace io {

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return data;
}

inline void write_file(const std::filesystem::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open " + path.string() + " for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw io_error("write failed for " + path.string());
}

// Splits into lines, tolerating a trailing '\r' per line and a missing final
// newline. Line numbers are 1-based.
inline std::vector<std::string_view> split_lines(const std::string& data) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= data.size()) {
    std::size_t nl = data.find('\n', start);
    if (nl == std::string::npos) {
      if (start < data.size()) lines.emplace_back(data.data() + start, data.size() - start);
      break;
    }
    std::size_t len = nl - start;
    lines.emplace_back(data.data() + start, len);
    start = nl + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  for (auto& l : lines) {
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
  }
  return lines;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

inline double parse_double(std::string_view field, const std::string& file, std::size_t line_no,
                           const char* column) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(value)) {
    throw io_error(file + ":" + std::to_string(line_no) + ": field '" + std::string(field) +
                   "' in column " + column + " is not a finite number");
  }
  return value;
}

inline std::int64_t parse_int(std::string_view field, const std::string& file, std::size_t line_no,
                              const char* column) {
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw io_error(file + ":" + std::to_string(line_no) + ": field '" + std::string(field) +
                   "' in column " + column + " is not an integer");
  }
  return value;
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Little-endian scalar encode/decode, independent of host byte order.
template <class T>
inline void append_le(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
inline T read_le(const unsigned char* p) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

inline void expect_header(const std::vector<std::string_view>& lines, const std::string& file,
                          std::string_view expected) {
  if (lines.empty())
    throw io_error(file + ":1: empty file, expected header '" + std::string(expected) + "'");
  if (lines[0] != expected)
    throw io_error(file + ":1: bad header '" + std::string(lines[0]) + "', expected '" +
                   std::string(expected) + "'");
}

}  // namespace detail

// --- sensor CSV streams ----------------------------------------------------

inline GyroLog read_gyro_csv(const std::filesystem::path& path) {
  std::string file = path.string();
  std::string data = detail::read_file(path);
  auto lines = detail::split_lines(data);
  detail::expect_header(lines, file, "t,wx,wy,wz");

  GyroLog log;
  log.reserve(lines.size() - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::size_t line_no = i + 1;
    auto f = detail::split_fields(lines[i]);
    if (f.size() != 4)
      throw io_error(file + ":" + std::to_string(line_no) + ": expected 4 fields, got " +
                     std::to_string(f.size()));
    GyroSample s;
    s.t = detail::parse_double(f[0], file, line_no, "t");
    s.omega = Vec3(detail::parse_double(f[1], file, line_no, "wx"),
                   detail::parse_double(f[2], file, line_no, "wy"),
                   detail::parse_double(f[3], file, line_no, "wz"));
    if (!log.empty() && !(s.t > log.back().t))
      throw io_error(file + ":" + std::to_string(line_no) +
                     ": timestamps must be strictly increasing (" + detail::fmt(log.back().t) +
                     " -> " + detail::fmt(s.t) + ")");
    log.push_back(s);
  }
  return log;
}

inline void write_gyro_csv(const std::filesystem::path& path, const GyroLog& log) {
  std::string out = "t,wx,wy,wz\n";
  for (const GyroSample& s : log) {
    out += detail::fmt(s.t) + "," + detail::fmt(s.omega.x()) + "," + detail::fmt(s.omega.y()) +
           "," + detail::fmt(s.omega.z()) + "\n";
  }
  detail::write_file(path, out);
}

inline PoseLog read_pose_csv(const std::filesystem::path& path) {
  std::string file = path.string();
  std::string data = detail::read_file(path);
  auto lines = detail::split_lines(data);
  detail::expect_header(lines, file, "t,px,py,pz,qw,qx,qy,qz");

  PoseLog log;
  log.reserve(lines.size() - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::size_t line_no = i + 1;
    auto f = detail::split_fields(lines[i]);
    if (f.size() != 8)
      throw io_error(file + ":" + std::to_string(line_no) + ": expected 8 fields, got " +
                     std::to_string(f.size()));
    PoseSample s;
    s.t = detail::parse_double(f[0], file, line_no, "t");
    s.p = Vec3(detail::parse_double(f[1], file, line_no, "px"),
               detail::parse_double(f[2], file, line_no, "py"),
               detail::parse_double(f[3], file, line_no, "pz"));
    s.q = {detail::parse_double(f[4], file, line_no, "qw"),
           detail::parse_double(f[5], file, line_no, "qx"),
           detail::parse_double(f[6], file, line_no, "qy"),
           detail::parse_double(f[7], file, line_no, "qz")};
    double n = s.q.norm();
    if (n < 0.999 || n > 1.001)
      throw io_error(file + ":" + std::to_string(line_no) + ": quaternion norm " + detail::fmt(n) +
                     " outside [0.999, 1.001]");
    // renormalize only when it matters; already-unit values round-trip bit-exactly
    if (std::abs(n - 1.0) > 1e-12) s.q = s.q.normalized();
    if (!log.empty() && !(s.t > log.back().t))
      throw io_error(file + ":" + std::to_string(line_no) +
                     ": timestamps must be strictly increasing (" + detail::fmt(log.back().t) +
                     " -> " + detail::fmt(s.t) + ")");
    log.push_back(s);
  }
  return log;
}

inline void write_pose_csv(const std::filesystem::path& path, const PoseLog& log) {
  std::string out = "t,px,py,pz,qw,qx,qy,qz\n";
  for (const PoseSample& s : log) {
    out += detail::fmt(s.t) + "," + detail::fmt(s.p.x()) + "," + detail::fmt(s.p.y()) + "," +
           detail::fmt(s.p.z()) + "," + detail::fmt(s.q.w) + "," + detail::fmt(s.q.x) + "," +
           detail::fmt(s.q.y) + "," + detail::fmt(s.q.z) + "\n";
  }
  detail::write_file(path, out);
}

inline FrameTimeline read_frames_csv(const std::filesystem::path& path) {
  std::string file = path.string();
  std::string data = detail::read_file(path);
  auto lines = detail::split_lines(data);
  detail::expect_header(lines, file, "frame_id,t");

  FrameTimeline frames;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::size_t line_no = i + 1;
    auto f = detail::split_fields(lines[i]);
    if (f.size() != 2)
      throw io_error(file + ":" + std::to_string(line_no) + ": expected 2 fields, got " +
                     std::to_string(f.size()));
    std::int64_t id = detail::parse_int(f[0], file, line_no, "frame_id");
    if (id < 0)
      throw io_error(file + ":" + std::to_string(line_no) + ": frame_id must be nonnegative");
    if (std::find(frames.frame_ids.begin(), frames.frame_ids.end(), id) != frames.frame_ids.end())
      throw io_error(file + ":" + std::to_string(line_no) + ": duplicate frame_id " +
                     std::to_string(id));
    double t = detail::parse_double(f[1], file, line_no, "t");
    if (!frames.t.empty() && !(t > frames.t.back()))
      throw io_error(file + ":" + std::to_string(line_no) +
                     ": timestamps must be strictly increasing (" + detail::fmt(frames.t.back()) +
                     " -> " + detail::fmt(t) + ")");
    frames.frame_ids.push_back(id);
    frames.t.push_back(t);
  }
  if (frames.t.empty()) throw io_error(file + ": no frames");
  return frames;
}

inline void write_frames_csv(const std::filesystem::path& path, const FrameTimeline& frames) {
  std::string out = "frame_id,t\n";
  for (std::size_t i = 0; i < frames.size(); ++i) {
    out += std::to_string(frames.frame_ids[i]) + "," + detail::fmt(frames.t[i]) + "\n";
  }
  detail::write_file(path, out);
}

// --- latent container (LSEQ) -----------------------------------------------
//
// magic 'LSEQ' | u32 LE version = 1 | u64 LE N | u64 LE D |
// N f64 LE timestamps | N*D f32 LE latent values, row-major.

inline void write_latents(const std::filesystem::path& path, const LatentSequence& seq) {
  validate(seq);
  const std::size_t n = seq.timestamps.size();
  const std::size_t d = static_cast<std::size_t>(seq.Y.cols());
  std::string out;
  out.reserve(20 + 8 * n + 4 * n * d);
  out += "LSEQ";
  detail::append_le<std::uint32_t>(out, 1);
  detail::append_le<std::uint64_t>(out, n);
  detail::append_le<std::uint64_t>(out, d);
  for (double t : seq.timestamps) detail::append_le<double>(out, t);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      detail::append_le<float>(out, static_cast<float>(seq.Y(static_cast<Eigen::Index>(i),
                                                             static_cast<Eigen::Index>(j))));
  detail::write_file(path, out);
}

inline LatentSequence read_latents(const std::filesystem::path& path) {
  std::string file = path.string();
  std::string data = detail::read_file(path);
  const unsigned char* p = reinterpret_cast<const unsigned char*>(data.data());

  if (data.size() < 24) {
    throw io_error(file + ": truncated header, expected at least 24 bytes, got " +
                   std::to_string(data.size()));
  }
  if (std::memcmp(p, "LSEQ", 4) != 0)
    throw io_error(file + ": bad magic, expected 'LSEQ'");
  std::uint32_t version = detail::read_le<std::uint32_t>(p + 4);
  if (version != 1)
    throw io_error(file + ": unsupported version " + std::to_string(version) + ", expected 1");
  std::uint64_t n = detail::read_le<std::uint64_t>(p + 8);
  std::uint64_t d = detail::read_le<std::uint64_t>(p + 16);
  std::uint64_t expected = 24 + 8 * n + 4 * n * d;
  if (data.size() != expected)
    throw io_error(file + ": truncated payload, expected " + std::to_string(expected) +
                   " bytes for N=" + std::to_string(n) + " D=" + std::to_string(d) + ", got " +
                   std::to_string(data.size()));
  if (n == 0 || d == 0) throw io_error(file + ": empty latent sequence (N=" + std::to_string(n) +
                                       ", D=" + std::to_string(d) + ")");

  LatentSequence seq;
  seq.timestamps.resize(n);
  const unsigned char* ts = p + 24;
  for (std::uint64_t i = 0; i < n; ++i) seq.timestamps[i] = detail::read_le<double>(ts + 8 * i);
  seq.Y.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  const unsigned char* vals = ts + 8 * n;
  for (std::uint64_t i = 0; i < n; ++i)
    for (std::uint64_t j = 0; j < d; ++j)
      seq.Y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          static_cast<double>(detail::read_le<float>(vals + 4 * (i * d + j)));
  validate(seq);
  return seq;
}

// --- matrix CSV (distance / covariance output) -------------------------------

inline void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += detail::fmt(m(i, j));
    }
    out += '\n';
  }
  detail::write_file(path, out);
}

inline Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path) {
  std::string file = path.string();
  std::string data = detail::read_file(path);
  auto lines = detail::split_lines(data);
  if (lines.empty()) throw io_error(file + ": empty matrix");
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto f = detail::split_fields(lines[i]);
    std::vector<double> row;
    row.reserve(f.size());
    for (auto& field : f) row.push_back(detail::parse_double(field, file, i + 1, "matrix"));
    if (!rows.empty() && row.size() != rows[0].size())
      throw io_error(file + ":" + std::to_string(i + 1) + ": ragged row, expected " +
                     std::to_string(rows[0].size()) + " fields");
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[0].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

// --- images ------------------------------------------------------------------

namespace detail {

// PNM header token reader: skips whitespace and '#' comments.
struct PnmCursor {
  const std::string& data;
  std::size_t pos = 0;
  const std::string& file;

  std::string token() {
    while (pos < data.size()) {
      char c = data[pos];
      if (c == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        ++pos;
      } else {
        break;
      }
    }
    std::size_t start = pos;
    while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
    if (start == pos) throw io_error(file + ": unexpected end of header at byte " +
                                     std::to_string(pos));
    return data.substr(start, pos - start);
  }

  // One whitespace byte separates the header from the raster.
  void expect_raster_start() {
    if (pos >= data.size() || !std::isspace(static_cast<unsigned char>(data[pos])))
      throw io_error(file + ": missing whitespace before raster at byte " + std::to_string(pos));
    ++pos;
  }
};

inline int parse_pnm_int(const std::string& tok, const std::string& file, const char* what) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || v <= 0)
    throw io_error(file + ": bad " + what + " '" + tok + "'");
  return v;
}

}  // namespace detail

// PFM, 'Pf' grayscale: negative scale means little-endian, raster stored
// bottom-up. Non-finite values become invalid pixels; negative finite
// disparities are rejected.
inline DisparityMap read_disparity_pfm(const std::filesystem::path& path) {
  std::string file = path.string();
  std::string data = detail::read_file(path);
  detail::PnmCursor cur{data, 0, file};
  std::string magic = cur.token();
  if (magic == "PF") throw io_error(file + ": color PFM not supported, expected grayscale 'Pf'");
  if (magic != "Pf") throw io_error(file + ": bad magic '" + magic + "', expected 'Pf'");
  int w = detail::parse_pnm_int(cur.token(), file, "width");
  int h = detail::parse_pnm_int(cur.token(), file, "height");
  std::string scale_tok = cur.token();
  double scale = 0.0;
  {
    auto [ptr, ec] = std::from_chars(scale_tok.data(), scale_tok.data() + scale_tok.size(), scale);
    if (ec != std::errc() || ptr != scale_tok.data() + scale_tok.size() || scale == 0.0)
      throw io_error(file + ": bad scale '" + scale_tok + "'");
  }
  cur.expect_raster_start();

  std::size_t count = static_cast<std::size_t>(w) * h;
  std::size_t expected = cur.pos + 4 * count;
  if (data.size() < expected)
    throw io_error(file + ": truncated raster, expected " + std::to_string(expected) +
                   " bytes, got " + std::to_string(data.size()));

  const bool file_le = scale < 0.0;
  DisparityMap map;
  map.width = w;
  map.height = h;
  map.values.resize(count);
  map.valid.resize(count);
  const unsigned char* raster = reinterpret_cast<const unsigned char*>(data.data()) + cur.pos;
  for (int row = 0; row < h; ++row) {
    int src_row = h - 1 - row;  // bottom-up storage
    for (int x = 0; x < w; ++x) {
      const unsigned char* p = raster + 4 * (static_cast<std::size_t>(src_row) * w + x);
      unsigned char bytes[4];
      std::memcpy(bytes, p, 4);
      if (file_le != (std::endian::native == std::endian::little))
        std::reverse(bytes, bytes + 4);
      float v;
      std::memcpy(&v, bytes, 4);
      std::size_t i = static_cast<std::size_t>(row) * w + x;
      if (!std::isfinite(v)) {
        map.values[i] = 0.0f;
        map.valid[i] = 0;
      } else if (v < 0.0f) {
        throw io_error(file + ": negative disparity " + std::to_string(v) + " at pixel (" +
                       std::to_string(x) + ", " + std::to_string(row) + ")");
      } else {
        map.values[i] = v;
        map.valid[i] = 1;
      }
    }
  }
  return map;
}

inline void write_disparity_pfm(const std::filesystem::path& path, const DisparityMap& map) {
  std::string out = "Pf\n" + std::to_string(map.width) + " " + std::to_string(map.height) + "\n-1.0\n";
  std::string raster;
  raster.reserve(4 * map.values.size());
  for (int row = map.height - 1; row >= 0; --row) {
    for (int x = 0; x < map.width; ++x) {
      std::size_t i = static_cast<std::size_t>(row) * map.width + x;
      float v = map.valid[i] ? map.values[i] : std::numeric_limits<float>::quiet_NaN();
      detail::append_le<float>(raster, v);
    }
  }
  detail::write_file(path, out + raster);
}

// 16-bit binary PGM, big-endian samples, disparity = raw / 256, raw 0 means
// invalid (the KITTI convention).
inline DisparityMap read_disparity_pgm16(const std::filesystem::path& path) {
  std::string file = path.string();
  std::string data = detail::read_file(path);
  detail::PnmCursor cur{data, 0, file};
  std::string magic = cur.token();
  if (magic != "P5") throw io_error(file + ": bad magic '" + magic + "', expected 'P5'");
  int w = detail::parse_pnm_int(cur.token(), file, "width");
  int h = detail::parse_pnm_int(cur.token(), file, "height");
  int maxval = detail::parse_pnm_int(cur.token(), file, "maxval");
  if (maxval <= 255 || maxval > 65535)
    throw io_error(file + ": maxval " + std::to_string(maxval) +
                   " is not a 16-bit range (256..65535)");
  cur.expect_raster_start();

  std::size_t count = static_cast<std::size_t>(w) * h;
  std::size_t expected = cur.pos + 2 * count;
  if (data.size() < expected)
    throw io_error(file + ": truncated raster, expected " + std::to_string(expected) +
                   " bytes, got " + std::to_string(data.size()));

  DisparityMap map;
  map.width = w;
  map.height = h;
  map.values.resize(count);
  map.valid.resize(count);
  const unsigned char* raster = reinterpret_cast<const unsigned char*>(data.data()) + cur.pos;
  for (std::size_t i = 0; i < count; ++i) {
    std::uint16_t raw = static_cast<std::uint16_t>((raster[2 * i] << 8) | raster[2 * i + 1]);
    map.values[i] = static_cast<float>(raw) / 256.0f;
    map.valid[i] = raw != 0;
  }
  return map;
}

inline void write_disparity_pgm16(const std::filesystem::path& path, const DisparityMap& map) {
  std::string out = "P5\n" + std::to_string(map.width) + " " + std::to_string(map.height) + "\n65535\n";
  std::string raster;
  raster.reserve(2 * map.values.size());
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    double scaled = map.valid[i] ? std::round(static_cast<double>(map.values[i]) * 256.0) : 0.0;
    std::uint16_t raw = static_cast<std::uint16_t>(std::clamp(scaled, 0.0, 65535.0));
    raster += static_cast<char>((raw >> 8) & 0xff);
    raster += static_cast<char>(raw & 0xff);
  }
  detail::write_file(path, out + raster);
}

// Dispatch on magic: 'Pf' -> PFM, 'P5' -> 16-bit PGM.
inline DisparityMap read_disparity(const std::filesystem::path& path) {
  std::string file = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + file);
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (magic[0] == 'P' && (magic[1] == 'f' || magic[1] == 'F')) return read_disparity_pfm(path);
  if (magic[0] == 'P' && magic[1] == '5') return read_disparity_pgm16(path);
  throw io_error(file + ": unrecognized disparity format, expected PFM ('Pf') or 16-bit PGM ('P5')");
}

// 8-bit binary PGM with maxval exactly 255; intensities normalized by 255.
inline GrayImage read_gray_image(const std::filesystem::path& path) {
  std::string file = path.string();
  std::string data = detail::read_file(path);
  detail::PnmCursor cur{data, 0, file};
  std::string magic = cur.token();
  if (magic == "P6") throw io_error(file + ": P6 (color) not supported, expected P5 grayscale");
  if (magic != "P5") throw io_error(file + ": bad magic '" + magic + "', expected 'P5'");
  int w = detail::parse_pnm_int(cur.token(), file, "width");
  int h = detail::parse_pnm_int(cur.token(), file, "height");
  int maxval = detail::parse_pnm_int(cur.token(), file, "maxval");
  if (maxval != 255)
    throw io_error(file + ": maxval " + std::to_string(maxval) + " unsupported, expected 255");
  cur.expect_raster_start();

  std::size_t count = static_cast<std::size_t>(w) * h;
  std::size_t expected = cur.pos + count;
  if (data.size() < expected)
    throw io_error(file + ": truncated raster, expected " + std::to_string(expected) +
                   " bytes, got " + std::to_string(data.size()));

  GrayImage img;
  img.width = w;
  img.height = h;
  img.values.resize(count);
  const unsigned char* raster = reinterpret_cast<const unsigned char*>(data.data()) + cur.pos;
  for (std::size_t i = 0; i < count; ++i) img.values[i] = raster[i] / 255.0;
  return img;
}

inline void write_gray_image(const std::filesystem::path& path, const GrayImage& img) {
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::string raster;
  raster.reserve(img.values.size());
  for (double v : img.values) {
    double scaled = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
    raster += static_cast<char>(static_cast<unsigned char>(scaled));
  }
  detail::write_file(path, out + raster);
}

}  // namespace io
}  // namespace mp
