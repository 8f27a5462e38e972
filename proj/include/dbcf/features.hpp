#pragma once

#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>
#include <utility>
#include <vector>

#include "dbcf/array2d.hpp"
#include "dbcf/errors.hpp"
#include "dbcf/geometry.hpp"
#include "dbcf/spectral.hpp"

namespace dbcf {

/// K-channel spatial feature array. Per-channel spectra are computed on
/// first use and shared between copies (planes are immutable after
/// construction).
class FeatureMap {
 public:
  explicit FeatureMap(std::vector<Plane> planes)
      : planes_(std::move(planes)), cache_(std::make_shared<SpectraCache>()) {
    if (planes_.empty()) throw DimensionError("FeatureMap: no channels");
    for (const Plane& p : planes_)
      if (!p.same_shape(planes_[0]))
        throw DimensionError("FeatureMap: channels disagree on shape");
  }

  int channels() const { return static_cast<int>(planes_.size()); }
  int rows() const { return planes_[0].rows(); }
  int cols() const { return planes_[0].cols(); }

  const Plane& plane(int k) const { return planes_[k]; }
  const std::vector<Plane>& planes() const { return planes_; }

  const std::vector<Spectrum2D>& spectra() const {
    std::call_once(cache_->once, [this] {
      cache_->spectra.reserve(planes_.size());
      for (const Plane& p : planes_) cache_->spectra.push_back(forward_fft(p));
    });
    return cache_->spectra;
  }

  const Spectrum2D& spectrum(int k) const { return spectra()[k]; }

 private:
  struct SpectraCache {
    std::once_flag once;
    std::vector<Spectrum2D> spectra;
  };

  std::vector<Plane> planes_;
  std::shared_ptr<SpectraCache> cache_;
};

/// Single-channel Gaussian label map with circular distance to the peak.
class DesiredResponse {
 public:
  DesiredResponse(Plane values, Index2 peak, double variance)
      : values_(std::move(values)),
        peak_(peak),
        variance_(variance),
        cache_(std::make_shared<SpectrumCache>()) {}

  int rows() const { return values_.rows(); }
  int cols() const { return values_.cols(); }
  Index2 peak() const { return peak_; }
  double variance() const { return variance_; }
  const Plane& values() const { return values_; }

  const Spectrum2D& spectrum() const {
    std::call_once(cache_->once,
                   [this] { cache_->spectrum = forward_fft(values_); });
    return cache_->spectrum;
  }

 private:
  struct SpectrumCache {
    std::once_flag once;
    Spectrum2D spectrum;
  };

  Plane values_;
  Index2 peak_;
  double variance_;
  std::shared_ptr<SpectrumCache> cache_;
};

/// Zero-mean, unit-deviation normalization. Constant images map to all
/// zeros so blank frames stay finite downstream.
inline Plane power_normalize(const Plane& image) {
  if (image.empty()) throw DimensionError("power_normalize: empty image");
  const double n = static_cast<double>(image.size());
  double mean = 0.0;
  for (double v : image) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : image) var += (v - mean) * (v - mean);
  var /= n;
  Plane out(image.rows(), image.cols());
  if (var < 1e-24) return out;
  const double inv_std = 1.0 / std::sqrt(var);
  for (std::size_t i = 0; i < image.size(); ++i)
    out[i] = (image[i] - mean) * inv_std;
  return out;
}

/// Single-channel intensity features: the power-normalized image.
inline FeatureMap extract_intensity(const Plane& image) {
  std::vector<Plane> planes;
  planes.push_back(power_normalize(image));
  return FeatureMap(std::move(planes));
}

struct HogConfig {
  int cell_size = 5;   // pixels per cell side
  int block_size = 5;  // cells per block side
  int num_bins = 5;    // unsigned orientation bins over [0, 180)
};

/// Histogram-of-oriented-gradients features at cell resolution.
///
/// Unsigned gradients, bin centers at j*(180/num_bins) degrees with bilinear
/// orientation voting, L2 block normalization (eps = 1e-5), block stride of
/// one cell, and per-cell values averaged over every covering block so the
/// output keeps one value per cell per bin. A vertical step edge lands
/// entirely in bin 0 under this bin-center convention.
inline FeatureMap extract_hog(const Plane& image, const HogConfig& cfg = {}) {
  const int cell = cfg.cell_size;
  if (image.rows() % cell != 0 || image.cols() % cell != 0)
    throw DimensionError("extract_hog: image " + std::to_string(image.rows()) +
                         "x" + std::to_string(image.cols()) +
                         " not divisible by cell size " + std::to_string(cell));
  const int cr = image.rows() / cell;
  const int cc = image.cols() / cell;
  const int bins = cfg.num_bins;

  // Per-cell orientation histograms from central-difference gradients
  // (borders replicate).
  std::vector<Plane> hist(bins, Plane(cr, cc));
  for (int r = 0; r < image.rows(); ++r) {
    const int rm = r > 0 ? r - 1 : r;
    const int rp = r < image.rows() - 1 ? r + 1 : r;
    for (int c = 0; c < image.cols(); ++c) {
      const int cm = c > 0 ? c - 1 : c;
      const int cp = c < image.cols() - 1 ? c + 1 : c;
      const double gr = image(rp, c) - image(rm, c);
      const double gc = image(r, cp) - image(r, cm);
      const double mag = std::hypot(gr, gc);
      if (mag == 0.0) continue;
      double theta = std::atan2(gr, gc) * 180.0 / std::numbers::pi;
      if (theta < 0.0) theta += 180.0;
      if (theta >= 180.0) theta -= 180.0;
      const double pos = theta / (180.0 / bins);
      const int b0 = static_cast<int>(pos) % bins;
      const int b1 = (b0 + 1) % bins;
      const double frac = pos - std::floor(pos);
      hist[b0](r / cell, c / cell) += mag * (1.0 - frac);
      hist[b1](r / cell, c / cell) += mag * frac;
    }
  }

  // L2 block normalization, one-cell stride; cells average the normalized
  // values over every block that covers them. Blocks clamp to the grid when
  // the grid is smaller than the configured block.
  const int block_r = std::min(cfg.block_size, cr);
  const int block_c = std::min(cfg.block_size, cc);
  constexpr double kEps = 1e-5;
  std::vector<Plane> out(bins, Plane(cr, cc));
  Plane cover(cr, cc);
  for (int br = 0; br + block_r <= cr; ++br) {
    for (int bc = 0; bc + block_c <= cc; ++bc) {
      double energy = 0.0;
      for (int b = 0; b < bins; ++b)
        for (int r = br; r < br + block_r; ++r)
          for (int c = bc; c < bc + block_c; ++c)
            energy += hist[b](r, c) * hist[b](r, c);
      const double inv_norm = 1.0 / std::sqrt(energy + kEps * kEps);
      for (int r = br; r < br + block_r; ++r)
        for (int c = bc; c < bc + block_c; ++c) {
          cover(r, c) += 1.0;
          for (int b = 0; b < bins; ++b)
            out[b](r, c) += hist[b](r, c) * inv_norm;
        }
    }
  }
  for (int r = 0; r < cr; ++r)
    for (int c = 0; c < cc; ++c)
      if (cover(r, c) > 0.0)
        for (int b = 0; b < bins; ++b) out[b](r, c) /= cover(r, c);

  return FeatureMap(std::move(out));
}

/// Gaussian label: exp(-d^2 / (2*variance)) with per-axis circular distance,
/// exactly 1 at the peak. `variance` is sigma^2 in (label-resolution) pixels^2.
inline DesiredResponse gaussian_response(int rows, int cols, Index2 peak,
                                         double variance = 2.0) {
  if (peak.row < 0 || peak.row >= rows || peak.col < 0 || peak.col >= cols)
    throw ArgumentError("gaussian_response: peak outside the grid");
  if (variance <= 0.0)
    throw ArgumentError("gaussian_response: variance must be positive");
  Plane values(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const double dr = std::min(std::abs(r - peak.row),
                               rows - std::abs(r - peak.row));
    for (int c = 0; c < cols; ++c) {
      const double dc = std::min(std::abs(c - peak.col),
                                 cols - std::abs(c - peak.col));
      values(r, c) = std::exp(-(dr * dr + dc * dc) / (2.0 * variance));
    }
  }
  return DesiredResponse(std::move(values), peak, variance);
}

}  // namespace dbcf
