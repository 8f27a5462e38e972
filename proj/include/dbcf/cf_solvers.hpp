#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dbcf/array2d.hpp"
#include "dbcf/errors.hpp"
#include "dbcf/features.hpp"
#include "dbcf/spectral.hpp"

namespace dbcf {

/// K-channel frequency-domain filter. Spectra follow the MOSSE storage
/// convention: they are the conjugate of the spatial template's transform,
/// so applying a trained filter multiplies spectra without conjugation while
/// correlate() conjugates (see spectral.hpp).
class SpectralFilter {
 public:
  SpectralFilter() = default;

  explicit SpectralFilter(std::vector<Spectrum2D> spectra)
      : spectra_(std::move(spectra)) {
    if (spectra_.empty()) throw DimensionError("SpectralFilter: no channels");
    for (const Spectrum2D& s : spectra_) {
      if (!s.same_shape(spectra_[0]))
        throw DimensionError("SpectralFilter: channels disagree on shape");
      for (const std::complex<double>& v : s)
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
          throw NumericError("SpectralFilter: non-finite coefficient");
    }
  }

  static SpectralFilter zero(int rows, int cols, int channels) {
    return SpectralFilter(std::vector<Spectrum2D>(channels, Spectrum2D(rows, cols)));
  }

  bool valid() const { return !spectra_.empty(); }
  int channels() const { return static_cast<int>(spectra_.size()); }
  int rows() const { return spectra_[0].rows(); }
  int cols() const { return spectra_[0].cols(); }
  std::size_t coefficient_count() const {
    return spectra_.size() * spectra_[0].size();
  }

  const Spectrum2D& spectrum(int k) const { return spectra_[k]; }
  const std::vector<Spectrum2D>& spectra() const { return spectra_; }

  /// Spatial-domain planes (inverse transform of the stored spectra), for
  /// inspection.
  std::vector<Plane> spatial() const {
    std::vector<Plane> planes;
    planes.reserve(spectra_.size());
    for (const Spectrum2D& s : spectra_) planes.push_back(inverse_fft(s));
    return planes;
  }

  /// The spatial correlation template this filter encodes: inverse transform
  /// of the conjugated spectra. Detection pads these planes to image size.
  std::vector<Plane> template_planes() const {
    std::vector<Plane> planes;
    planes.reserve(spectra_.size());
    for (const Spectrum2D& s : spectra_) {
      Spectrum2D conj_s(s.rows(), s.cols());
      for (std::size_t i = 0; i < s.size(); ++i) conj_s[i] = std::conj(s[i]);
      planes.push_back(inverse_fft(conj_s));
    }
    return planes;
  }

  /// Frequency-domain L2 norm over all channels.
  double norm() const {
    double sum = 0.0;
    for (const Spectrum2D& s : spectra_)
      for (const std::complex<double>& v : s) sum += std::norm(v);
    return std::sqrt(sum);
  }

  friend double distance(const SpectralFilter& a, const SpectralFilter& b) {
    double sum = 0.0;
    for (int k = 0; k < a.channels(); ++k)
      for (std::size_t i = 0; i < a.spectra_[k].size(); ++i)
        sum += std::norm(a.spectra_[k][i] - b.spectra_[k][i]);
    return std::sqrt(sum);
  }

 private:
  std::vector<Spectrum2D> spectra_;
};

struct TrainConfig {
  double lambda = 1e-4;         // ridge weight
  double label_variance = 2.0;  // Gaussian label sigma^2, label-map pixels^2
  int filter_rows = 60;         // training window, image pixels
  int filter_cols = 60;

  void validate() const {
    if (lambda < 0.0) throw ArgumentError("TrainConfig: lambda must be >= 0");
    if (label_variance <= 0.0)
      throw ArgumentError("TrainConfig: label variance must be positive");
  }
};

/// Per-frequency-bin normal equations for multi-channel ridge regression.
///
/// The DK x DK system decomposes into D independent K x K Hermitian solves
/// because each sample's spectral matrix is a stack of diagonal blocks; this
/// accumulator keeps the K x K Gram matrix and K-vector right-hand side per
/// bin and supports incremental growth of the sample set.
class NormalEquations {
 public:
  NormalEquations(int rows, int cols, int channels)
      : rows_(rows),
        cols_(cols),
        channels_(channels),
        gram_(static_cast<std::size_t>(rows) * cols * channels * channels),
        rhs_(static_cast<std::size_t>(rows) * cols * channels) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int channels() const { return channels_; }
  std::size_t sample_count() const { return samples_; }

  void accumulate(const FeatureMap& x, const DesiredResponse& y) {
    if (x.rows() != rows_ || x.cols() != cols_ || x.channels() != channels_)
      throw DimensionError("NormalEquations: sample shape mismatch");
    if (y.rows() != rows_ || y.cols() != cols_)
      throw DimensionError("NormalEquations: label shape mismatch");
    const auto& xs = x.spectra();
    const Spectrum2D& ys = y.spectrum();
    const std::size_t bins = static_cast<std::size_t>(rows_) * cols_;
    const int k_count = channels_;
    for (std::size_t w = 0; w < bins; ++w) {
      std::complex<double>* g = &gram_[w * k_count * k_count];
      std::complex<double>* b = &rhs_[w * k_count];
      for (int k = 0; k < k_count; ++k) {
        const std::complex<double> xk_conj = std::conj(xs[k][w]);
        b[k] += xk_conj * ys[w];
        for (int l = 0; l < k_count; ++l) g[k * k_count + l] += xk_conj * xs[l][w];
      }
    }
    ++samples_;
  }

  /// Solve (Gram + ridge*I) f = rhs per bin.
  SpectralFilter solve(double ridge) const {
    return solve_penalized(ridge, 0.0, nullptr);
  }

  /// Solve (Gram + (ridge + sigma)*I) f = rhs + sigma*f_prime per bin.
  SpectralFilter solve_penalized(double ridge, double sigma,
                                 const SpectralFilter* f_prime) const {
    if (sigma > 0.0) {
      if (f_prime == nullptr || !f_prime->valid())
        throw ArgumentError("solve_penalized: sigma > 0 requires f_prime");
      if (f_prime->rows() != rows_ || f_prime->cols() != cols_ ||
          f_prime->channels() != channels_)
        throw DimensionError("solve_penalized: f_prime shape mismatch");
    }
    using Mat = Eigen::MatrixXcd;
    using Vec = Eigen::VectorXcd;
    const int k_count = channels_;
    const std::size_t bins = static_cast<std::size_t>(rows_) * cols_;
    std::vector<Spectrum2D> out(k_count, Spectrum2D(rows_, cols_));
    Mat a(k_count, k_count);
    Vec b(k_count);
    for (std::size_t w = 0; w < bins; ++w) {
      const std::complex<double>* g = &gram_[w * k_count * k_count];
      for (int k = 0; k < k_count; ++k) {
        b(k) = rhs_[w * k_count + k];
        if (sigma > 0.0)
          b(k) += sigma * f_prime->spectrum(k)[w];
        for (int l = 0; l < k_count; ++l) a(k, l) = g[k * k_count + l];
        a(k, k) += ridge + sigma;
      }
      Vec f(k_count);
      if (ridge + sigma > 0.0) {
        f = a.ldlt().solve(b);
      } else {
        Eigen::FullPivLU<Mat> lu(a);
        if (!lu.isInvertible())
          throw NumericError("solve: singular system at bin (" +
                             std::to_string(w / cols_) + ", " +
                             std::to_string(w % cols_) + ") with zero ridge");
        f = lu.solve(b);
      }
      for (int k = 0; k < k_count; ++k) out[k][w] = f(k);
    }
    return SpectralFilter(std::move(out));
  }

 private:
  int rows_, cols_, channels_;
  std::size_t samples_ = 0;
  std::vector<std::complex<double>> gram_;  // bin-major, K*K per bin
  std::vector<std::complex<double>> rhs_;   // bin-major, K per bin
};

namespace detail {

inline void check_training_set(std::span<const FeatureMap> samples,
                               std::span<const DesiredResponse> labels) {
  if (samples.empty()) throw ArgumentError("train: empty sample list");
  if (samples.size() != labels.size())
    throw ArgumentError("train: need one label per sample");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].rows() != samples[0].rows() ||
        samples[i].cols() != samples[0].cols() ||
        samples[i].channels() != samples[0].channels())
      throw DimensionError("train: sample " + std::to_string(i) +
                           " shape mismatch");
    if (labels[i].rows() != samples[0].rows() ||
        labels[i].cols() != samples[0].cols())
      throw DimensionError("train: label " + std::to_string(i) +
                           " shape mismatch");
  }
}

}  // namespace detail

/// Multi-channel correlation filter, solved in closed form per frequency bin.
inline SpectralFilter train_mccf(std::span<const FeatureMap> samples,
                                 std::span<const DesiredResponse> labels,
                                 const TrainConfig& cfg = {}) {
  cfg.validate();
  detail::check_training_set(samples, labels);
  NormalEquations eq(samples[0].rows(), samples[0].cols(),
                     samples[0].channels());
  for (std::size_t i = 0; i < samples.size(); ++i)
    eq.accumulate(samples[i], labels[i]);
  return eq.solve(cfg.lambda);
}

/// Minimum-output-sum-of-squared-error filter (single channel): the per-bin
/// scalar ratio sum(conj(x)*y) / (sum |x|^2 + lambda).
inline SpectralFilter train_mosse(std::span<const FeatureMap> samples,
                                  std::span<const DesiredResponse> labels,
                                  double lambda) {
  detail::check_training_set(samples, labels);
  if (samples[0].channels() != 1)
    throw ArgumentError("train_mosse: expects single-channel features");
  const int rows = samples[0].rows(), cols = samples[0].cols();
  Spectrum2D num(rows, cols);
  Plane den(rows, cols);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Spectrum2D& xs = samples[i].spectrum(0);
    const Spectrum2D& ys = labels[i].spectrum();
    for (std::size_t w = 0; w < num.size(); ++w) {
      num[w] += std::conj(xs[w]) * ys[w];
      den[w] += std::norm(xs[w]);
    }
  }
  Spectrum2D f(rows, cols);
  for (std::size_t w = 0; w < f.size(); ++w) f[w] = num[w] / (den[w] + lambda);
  return SpectralFilter({std::move(f)});
}

/// Average of synthetic exact filters (single channel). A non-positive
/// epsilon selects the relative floor 1e-4 * mean(|x|^2) over all bins and
/// samples, which keeps dead bins from blowing up the division.
inline SpectralFilter train_asef(std::span<const FeatureMap> samples,
                                 std::span<const DesiredResponse> labels,
                                 double epsilon = 0.0) {
  detail::check_training_set(samples, labels);
  if (samples[0].channels() != 1)
    throw ArgumentError("train_asef: expects single-channel features");
  const int rows = samples[0].rows(), cols = samples[0].cols();
  if (epsilon <= 0.0) {
    double power = 0.0;
    for (const FeatureMap& s : samples)
      for (const std::complex<double>& v : s.spectrum(0)) power += std::norm(v);
    power /= static_cast<double>(samples.size()) * rows * cols;
    epsilon = 1e-4 * power;
    if (epsilon <= 0.0) epsilon = 1e-12;
  }
  Spectrum2D acc(rows, cols);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Spectrum2D& xs = samples[i].spectrum(0);
    const Spectrum2D& ys = labels[i].spectrum();
    for (std::size_t w = 0; w < acc.size(); ++w)
      acc[w] += std::conj(xs[w]) * ys[w] / (std::norm(xs[w]) + epsilon);
  }
  const double inv_n = 1.0 / static_cast<double>(samples.size());
  for (std::complex<double>& v : acc) v *= inv_n;
  return SpectralFilter({std::move(acc)});
}

/// Circular cross-correlation of a spatial-template filter with features,
/// summed over channels.
inline Plane correlate(const SpectralFilter& filter, const FeatureMap& features) {
  return correlate_spectra(filter.spectra(), features.spectra());
}

/// Response of a trained filter (conjugate-template storage convention).
inline Plane apply_filter(const SpectralFilter& filter, const FeatureMap& features) {
  return apply_spectra(filter.spectra(), features.spectra());
}

}  // namespace dbcf
