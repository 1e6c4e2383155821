#pragma once

#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "durian/error.hpp"
#include "durian/linalg.hpp"

namespace durian {

// Feature-matrix files come in two flavours:
//   text:   "P d" on the first line, then P rows of d whitespace-separated reals
//   binary: any path ending in ".f64"; a little-endian uint32 P, uint32 d,
//           then P*d little-endian IEEE doubles in row-major order
namespace detail {

inline bool has_f64_extension(const std::filesystem::path& path) { return path.extension() == ".f64"; }

template <typename T>
T from_little_endian(const unsigned char* bytes) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, bytes, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
  }
  T out;
  std::memcpy(&out, buf, sizeof(T));
  return out;
}

template <typename T>
void append_little_endian(std::string& out, T value) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
  }
  out.append(reinterpret_cast<const char*>(buf), sizeof(T));
}

inline Matrix parse_text_features(std::istream& in, const std::string& name) {
  long long p = -1;
  long long d = -1;
  if (!(in >> p >> d) || p <= 0 || d <= 0) {
    throw Error(ErrorKind::invalid_input, name + ": bad header, expected 'P d'");
  }
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(p * d));
  // Parse through strtod so that "nan"/"inf" tokens are read and rejected
  // explicitly instead of silently stopping the stream.
  std::string token;
  while (in >> token) {
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (end != token.c_str() + token.size()) {
      throw Error(ErrorKind::invalid_input, name + ": cannot parse '" + token + "' as a number");
    }
    if (!std::isfinite(v)) {
      throw Error(ErrorKind::invalid_input, name + ": non-finite value '" + token + "'");
    }
    data.push_back(v);
  }
  if (data.size() != static_cast<std::size_t>(p * d)) {
    throw Error(ErrorKind::invalid_input, name + ": expected " + std::to_string(p * d) + " values, found " +
                                              std::to_string(data.size()));
  }
  return Matrix(static_cast<std::size_t>(p), static_cast<std::size_t>(d), std::move(data));
}

inline Matrix parse_binary_features(const std::string& bytes, const std::string& name) {
  if (bytes.size() < 8) {
    throw Error(ErrorKind::invalid_input, name + ": truncated header");
  }
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  const auto p = from_little_endian<std::uint32_t>(raw);
  const auto d = from_little_endian<std::uint32_t>(raw + 4);
  const std::size_t count = static_cast<std::size_t>(p) * d;
  if (p == 0 || d == 0 || bytes.size() != 8 + count * 8) {
    throw Error(ErrorKind::invalid_input, name + ": size does not match header " + std::to_string(p) + "x" +
                                              std::to_string(d));
  }
  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    data[i] = from_little_endian<double>(raw + 8 + 8 * i);
    if (!std::isfinite(data[i])) {
      throw Error(ErrorKind::invalid_input, name + ": non-finite value at index " + std::to_string(i));
    }
  }
  return Matrix(p, d, std::move(data));
}

}  // namespace detail

inline Matrix read_feature_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::io, "cannot open " + path.string());
  }
  if (detail::has_f64_extension(path)) {
    std::ostringstream buf;
    buf << in.rdbuf();
    return detail::parse_binary_features(buf.str(), path.string());
  }
  return detail::parse_text_features(in, path.string());
}

inline void write_feature_matrix(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorKind::io, "cannot write " + path.string());
  }
  if (detail::has_f64_extension(path)) {
    std::string bytes;
    detail::append_little_endian(bytes, static_cast<std::uint32_t>(m.rows()));
    detail::append_little_endian(bytes, static_cast<std::uint32_t>(m.cols()));
    for (double v : m.data()) detail::append_little_endian(bytes, v);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  } else {
    out << m.rows() << ' ' << m.cols() << '\n';
    out.precision(17);
    for (std::size_t r = 0; r < m.rows(); ++r) {
      for (std::size_t c = 0; c < m.cols(); ++c) out << (c ? " " : "") << m(r, c);
      out << '\n';
    }
  }
  if (!out) {
    throw Error(ErrorKind::io, "failed writing " + path.string());
  }
}

}  // namespace durian
