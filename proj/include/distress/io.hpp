#pragma once

// Small file helpers shared by the readers and writers of each module.

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "distress/common.hpp"

namespace distress::io {

inline std::ifstream open_in(const std::filesystem::path& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

inline std::ofstream open_out(const std::filesystem::path& path, bool binary = false) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

inline void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

inline std::string read_text(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& path, std::string_view text) {
  auto out = open_out(path);
  out << text;
  finish(out, path);
}

// Shortest representation that reads back to the same double.
inline std::string format_double(double v) {
  char buf[40];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

// Plain comma splitting; none of the CSV schemas here admit quoted fields.
inline std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.emplace_back(trim(line.substr(start, comma == std::string_view::npos ? comma : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline double parse_double(const std::string& field, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (field.empty() || end != field.c_str() + field.size()) throw ParseError("not a number: '" + field + "'", line);
  return v;
}

// Binary container primitives (native little-endian layout, fixed-width).
template <class T>
  requires std::is_trivially_copyable_v<T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
  requires std::is_trivially_copyable_v<T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw ParseError("truncated binary container");
  return v;
}

inline void put_string(std::ostream& out, std::string_view s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& in) {
  const auto n = get<std::uint64_t>(in);
  if (n > (1ULL << 32)) throw ParseError("corrupt string length in binary container");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw ParseError("truncated binary container");
  return s;
}

inline void put_doubles(std::ostream& out, const double* data, std::size_t n) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

inline void get_doubles(std::istream& in, double* data, std::size_t n) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw ParseError("truncated binary container");
}

// Four-byte magic followed by a format version.
inline void put_header(std::ostream& out, std::string_view magic, std::uint32_t version) {
  out.write(magic.data(), 4);
  put<std::uint32_t>(out, version);
}

inline void expect_header(std::istream& in, std::string_view magic, std::uint32_t version) {
  char buf[4] = {};
  in.read(buf, 4);
  if (!in || std::string_view(buf, 4) != magic)
    throw ParseError("not a " + std::string(magic) + " container");
  const auto v = get<std::uint32_t>(in);
  if (v != version)
    throw ParseError("unsupported " + std::string(magic) + " version " + std::to_string(v) + " (expected " +
                     std::to_string(version) + ")");
}

}  // namespace distress::io
