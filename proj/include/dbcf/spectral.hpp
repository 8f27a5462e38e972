#pragma once

#include <fftw3.h>

#include <complex>
#include <cstring>
#include <map>
#include <mutex>
#include <span>
#include <tuple>

#include "dbcf/array2d.hpp"
#include "dbcf/errors.hpp"

namespace dbcf {

namespace detail {

/// Process-wide FFTW plan cache. FFTW planning is not thread-safe and
/// execution on a plan's own buffers races, so every transform runs under
/// one lock and copies through plan-owned buffers. Results are therefore
/// identical no matter which threads call in.
class FftwEngine {
 public:
  static FftwEngine& instance() {
    static FftwEngine engine;
    return engine;
  }

  void transform(int rows, int cols, int sign, const std::complex<double>* src,
                 std::complex<double>* dst) {
    std::scoped_lock lock(mu_);
    Slot& slot = acquire(rows, cols, sign);
    const std::size_t n = static_cast<std::size_t>(rows) * cols;
    std::memcpy(slot.in, src, n * sizeof(std::complex<double>));
    fftw_execute(slot.plan);
    std::memcpy(dst, slot.out, n * sizeof(std::complex<double>));
  }

  FftwEngine(const FftwEngine&) = delete;
  FftwEngine& operator=(const FftwEngine&) = delete;

 private:
  struct Slot {
    fftw_plan plan = nullptr;
    fftw_complex* in = nullptr;
    fftw_complex* out = nullptr;
  };

  FftwEngine() = default;

  ~FftwEngine() {
    for (auto& [key, slot] : cache_) {
      fftw_destroy_plan(slot.plan);
      fftw_free(slot.in);
      fftw_free(slot.out);
    }
  }

  Slot& acquire(int rows, int cols, int sign) {
    const auto key = std::make_tuple(rows, cols, sign);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    Slot slot;
    const std::size_t n = static_cast<std::size_t>(rows) * cols;
    slot.in = fftw_alloc_complex(n);
    slot.out = fftw_alloc_complex(n);
    slot.plan = fftw_plan_dft_2d(rows, cols, slot.in, slot.out, sign, FFTW_ESTIMATE);
    if (!slot.plan) throw NumericError("fftw: failed to create plan");
    return cache_.emplace(key, slot).first->second;
  }

  std::mutex mu_;
  std::map<std::tuple<int, int, int>, Slot> cache_;
};

}  // namespace detail

/// Unnormalized forward 2-D DFT of a real plane.
inline Spectrum2D forward_fft(const Plane& image) {
  if (image.empty()) throw DimensionError("forward_fft: empty input");
  Spectrum2D in(image.rows(), image.cols());
  for (std::size_t i = 0; i < image.size(); ++i) in[i] = {image[i], 0.0};
  Spectrum2D out(image.rows(), image.cols());
  detail::FftwEngine::instance().transform(image.rows(), image.cols(),
                                           FFTW_FORWARD, in.data(), out.data());
  return out;
}

/// Inverse 2-D DFT carrying the 1/(W*H) factor; returns the real part.
inline Plane inverse_fft(const Spectrum2D& spec) {
  if (spec.empty()) throw DimensionError("inverse_fft: empty input");
  Spectrum2D out(spec.rows(), spec.cols());
  detail::FftwEngine::instance().transform(spec.rows(), spec.cols(),
                                           FFTW_BACKWARD, spec.data(), out.data());
  const double scale = 1.0 / (static_cast<double>(spec.rows()) * spec.cols());
  Plane result(spec.rows(), spec.cols());
  for (std::size_t i = 0; i < out.size(); ++i) result[i] = out[i].real() * scale;
  return result;
}

/// Multi-channel spectral cross-correlation: ifft( sum_k conj(f_k) .* x_k ).
/// Filter spectra are understood as transforms of spatial templates, so the
/// result equals circular spatial cross-correlation summed over channels.
inline Plane correlate_spectra(std::span<const Spectrum2D> filter,
                               std::span<const Spectrum2D> features) {
  if (filter.size() != features.size())
    throw DimensionError("correlate: channel count mismatch (" +
                         std::to_string(filter.size()) + " vs " +
                         std::to_string(features.size()) + ")");
  if (filter.empty()) throw DimensionError("correlate: no channels");
  const int rows = filter[0].rows(), cols = filter[0].cols();
  Spectrum2D acc(rows, cols);
  for (std::size_t k = 0; k < filter.size(); ++k) {
    if (!filter[k].same_shape(features[k]) || filter[k].rows() != rows ||
        filter[k].cols() != cols)
      throw DimensionError("correlate: plane shape mismatch");
    for (std::size_t i = 0; i < acc.size(); ++i)
      acc[i] += std::conj(filter[k][i]) * features[k][i];
  }
  return inverse_fft(acc);
}

/// Trained-filter response: ifft( sum_k f_k .* x_k ). Solver outputs store
/// the conjugate of the spatial template (the MOSSE convention), which makes
/// plain multiplication the correct application.
inline Plane apply_spectra(std::span<const Spectrum2D> filter,
                           std::span<const Spectrum2D> features) {
  if (filter.size() != features.size())
    throw DimensionError("apply: channel count mismatch");
  if (filter.empty()) throw DimensionError("apply: no channels");
  const int rows = filter[0].rows(), cols = filter[0].cols();
  Spectrum2D acc(rows, cols);
  for (std::size_t k = 0; k < filter.size(); ++k) {
    if (!filter[k].same_shape(features[k]) || filter[k].rows() != rows)
      throw DimensionError("apply: plane shape mismatch");
    for (std::size_t i = 0; i < acc.size(); ++i)
      acc[i] += filter[k][i] * features[k][i];
  }
  return inverse_fft(acc);
}

}  // namespace dbcf
