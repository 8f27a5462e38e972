#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dbcf/cf_solvers.hpp"
#include "dbcf/detection.hpp"
#include "dbcf/errors.hpp"

namespace dbcf {

/// FNV-1a over the canonical config string; embedded in every output so a
/// report can be traced back to its exact configuration.
inline std::uint64_t config_digest(const std::string& canonical) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  std::array<unsigned char, 4> b{static_cast<unsigned char>(v),
                                 static_cast<unsigned char>(v >> 8),
                                 static_cast<unsigned char>(v >> 16),
                                 static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b.data()), b.size());
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<unsigned char, 8> b;
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b.data()), b.size());
}

inline void put_f64(std::ostream& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

inline std::uint32_t get_u32(std::istream& in) {
  std::array<unsigned char, 4> b;
  in.read(reinterpret_cast<char*>(b.data()), b.size());
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> b;
  in.read(reinterpret_cast<char*>(b.data()), b.size());
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline double get_f64(std::istream& in) {
  return std::bit_cast<double>(get_u64(in));
}

}  // namespace detail

/// A trained filter plus everything needed to apply it.
struct FilterContainer {
  SpectralFilter filter;
  Method method = Method::kMccf;
  FeatureMode mode = FeatureMode::kHog;
  std::uint32_t cell_size = 5;
  std::uint32_t num_bins = 5;
  double label_variance = 2.0;
  std::uint64_t digest = 0;
};

inline constexpr char kFilterMagic[4] = {'D', 'B', 'C', 'F'};
inline constexpr std::uint32_t kFilterVersion = 1;

/// Binary layout: magic, version, K, W, H, method, feature mode, cell size,
/// bin count, label variance, config digest, then per channel the row-major
/// coefficients as little-endian f64 (real, imag) pairs.
inline void save_filter(const std::filesystem::path& path,
                        const FilterContainer& container) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("save_filter: cannot open " + path.string());
  out.write(kFilterMagic, 4);
  detail::put_u32(out, kFilterVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(container.filter.channels()));
  detail::put_u32(out, static_cast<std::uint32_t>(container.filter.cols()));
  detail::put_u32(out, static_cast<std::uint32_t>(container.filter.rows()));
  detail::put_u32(out, static_cast<std::uint32_t>(container.method));
  detail::put_u32(out, container.mode == FeatureMode::kHog ? 1u : 0u);
  detail::put_u32(out, container.cell_size);
  detail::put_u32(out, container.num_bins);
  detail::put_f64(out, container.label_variance);
  detail::put_u64(out, container.digest);
  for (int k = 0; k < container.filter.channels(); ++k)
    for (const std::complex<double>& v : container.filter.spectrum(k)) {
      detail::put_f64(out, v.real());
      detail::put_f64(out, v.imag());
    }
  if (!out) throw IoError("save_filter: short write to " + path.string());
}

inline FilterContainer load_filter(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_filter: cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kFilterMagic, 4) != 0)
    throw FormatError("load_filter: bad magic in " + path.string());
  const std::uint32_t version = detail::get_u32(in);
  if (version != kFilterVersion)
    throw FormatError("load_filter: unsupported version " +
                      std::to_string(version) + " in " + path.string());
  const std::uint32_t channels = detail::get_u32(in);
  const std::uint32_t cols = detail::get_u32(in);
  const std::uint32_t rows = detail::get_u32(in);
  const std::uint32_t method = detail::get_u32(in);
  const std::uint32_t mode = detail::get_u32(in);
  FilterContainer container;
  container.cell_size = detail::get_u32(in);
  container.num_bins = detail::get_u32(in);
  container.label_variance = detail::get_f64(in);
  container.digest = detail::get_u64(in);
  if (!in || channels == 0 || rows == 0 || cols == 0 || method > 3 || mode > 1)
    throw FormatError("load_filter: corrupt header in " + path.string());
  container.method = static_cast<Method>(method);
  container.mode = mode == 1 ? FeatureMode::kHog : FeatureMode::kIntensity;
  std::vector<Spectrum2D> spectra;
  spectra.reserve(channels);
  for (std::uint32_t k = 0; k < channels; ++k) {
    Spectrum2D s(static_cast<int>(rows), static_cast<int>(cols));
    for (std::complex<double>& v : s) {
      const double re = detail::get_f64(in);
      const double im = detail::get_f64(in);
      v = {re, im};
    }
    spectra.push_back(std::move(s));
  }
  if (!in) throw FormatError("load_filter: truncated payload in " + path.string());
  container.filter = SpectralFilter(std::move(spectra));
  return container;
}

}  // namespace dbcf
