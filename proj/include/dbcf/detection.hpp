#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dbcf/cf_solvers.hpp"
#include "dbcf/dataset.hpp"
#include "dbcf/dbcf.hpp"
#include "dbcf/errors.hpp"
#include "dbcf/features.hpp"
#include "dbcf/geometry.hpp"
#include "dbcf/rng.hpp"

namespace dbcf {

enum class Method { kAsef, kMosse, kMccf, kDbcf };

enum class FeatureMode { kIntensity, kHog };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::kAsef: return "asef";
    case Method::kMosse: return "mosse";
    case Method::kMccf: return "mccf";
    case Method::kDbcf: return "dbcf";
  }
  return "?";
}

inline Method method_from_string(const std::string& s) {
  if (s == "asef") return Method::kAsef;
  if (s == "mosse") return Method::kMosse;
  if (s == "mccf") return Method::kMccf;
  if (s == "dbcf") return Method::kDbcf;
  throw ArgumentError("unknown method: " + s);
}

/// ASEF and MOSSE are single-channel, so they run on intensity; MCCF and
/// DBCF use HOG (the experimental protocol's pairing).
inline FeatureMode default_mode(Method m) {
  return (m == Method::kAsef || m == Method::kMosse) ? FeatureMode::kIntensity
                                                     : FeatureMode::kHog;
}

struct DetectorConfig {
  Method method = Method::kMccf;
  std::optional<FeatureMode> feature_mode;  // defaults per method
  HogConfig hog;
  TrainConfig train;        // lambda, label variance, filter window
  SolverConfig solver;      // DBCF knobs
  SubsetSchedule schedule;  // S0/St of 0 resolve from the training set
  double noise_aug_sigma = 0.1;  // variant-generation parameters
  double affine_max_deg = 5.0;
  double affine_max_scale = 0.05;

  FeatureMode mode() const {
    return feature_mode ? *feature_mode : default_mode(method);
  }
  int cell_size() const {
    return mode() == FeatureMode::kHog ? hog.cell_size : 1;
  }
};

namespace detail {

struct CropResult {
  Plane patch;
  Index2 top_left;
};

/// Center pixel of the label-peak cell for a window of `rows_px` pixels.
inline int window_anchor(int rows_px, int cell) {
  return (rows_px / cell / 2) * cell + (cell - 1) / 2;
}

/// Cell whose center pixel is nearest to `px`.
inline int nearest_cell(double px, int cell, int cell_count) {
  const int idx = static_cast<int>(std::lround((px + 0.5) / cell - 0.5));
  return std::clamp(idx, 0, cell_count - 1);
}

/// Fixed-size crop placed so the requested center lands on the window
/// anchor; shifted (not padded) when it would leave the image.
inline CropResult crop_centered(const Plane& image, const Point2& center,
                                int rows, int cols, int cell) {
  if (image.rows() < rows || image.cols() < cols)
    throw DimensionError("crop: image smaller than the requested window");
  int tl_r = static_cast<int>(std::lround(center.row)) - window_anchor(rows, cell);
  int tl_c = static_cast<int>(std::lround(center.col)) - window_anchor(cols, cell);
  tl_r = std::clamp(tl_r, 0, image.rows() - rows);
  tl_c = std::clamp(tl_c, 0, image.cols() - cols);
  Plane patch(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) patch(r, c) = image(tl_r + r, tl_c + c);
  return {std::move(patch), Index2{tl_r, tl_c}};
}

/// Fixed-size crop centered on the anchor with edge replication, for search
/// windows that may poke out of the frame.
inline Plane crop_replicated(const Plane& image, const Point2& center,
                             int rows, int cols, int cell) {
  const int tl_r =
      static_cast<int>(std::lround(center.row)) - window_anchor(rows, cell);
  const int tl_c =
      static_cast<int>(std::lround(center.col)) - window_anchor(cols, cell);
  Plane patch(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const int ir = std::clamp(tl_r + r, 0, image.rows() - 1);
    for (int c = 0; c < cols; ++c)
      patch(r, c) = image(ir, std::clamp(tl_c + c, 0, image.cols() - 1));
  }
  return patch;
}

inline FeatureMap extract_features(const Plane& patch, FeatureMode mode,
                                   const HogConfig& hog) {
  if (mode == FeatureMode::kIntensity) return extract_intensity(patch);
  return extract_hog(power_normalize(patch), hog);
}

/// Build the (features, label) pair for one annotated image: crop the
/// training window around the target and synthesize the Gaussian label at
/// feature-map resolution.
inline TrainingSample make_training_sample(const LabeledImage& item,
                                           const DetectorConfig& cfg) {
  const int cell = cfg.cell_size();
  CropResult crop = crop_centered(item.image, item.center, cfg.train.filter_rows,
                                  cfg.train.filter_cols, cell);
  FeatureMap features = extract_features(crop.patch, cfg.mode(), cfg.hog);
  const double peak_r = item.center.row - crop.top_left.row;
  const double peak_c = item.center.col - crop.top_left.col;
  const Index2 peak{nearest_cell(peak_r, cell, features.rows()),
                    nearest_cell(peak_c, cell, features.cols())};
  DesiredResponse label = gaussian_response(features.rows(), features.cols(),
                                            peak, cfg.train.label_variance);
  return {std::move(features), std::move(label)};
}

/// Variant of an original image for the DBCF subset schedule. Pass 0 over
/// the originals adds noise, pass 1 flips, pass 2 applies a small affine
/// map; further passes cycle.
inline LabeledImage make_variant(const LabeledImage& base, Augmentation kind,
                                 const DetectorConfig& cfg, std::uint64_t seed) {
  switch (kind) {
    case Augmentation::kGaussianNoise:
      return {add_gaussian_noise(base.image, cfg.noise_aug_sigma, seed),
              base.center, base.bbox};
    case Augmentation::kHorizontalFlip:
      return flip_horizontal(base);
    case Augmentation::kAffine: {
      Rng rng(seed);
      const double deg = rng.uniform(-cfg.affine_max_deg, cfg.affine_max_deg);
      const double scale =
          1.0 + rng.uniform(-cfg.affine_max_scale, cfg.affine_max_scale);
      return affine_perturb(base, deg, scale);
    }
  }
  throw ArgumentError("make_variant: unknown augmentation");
}

}  // namespace detail

struct TrainedDetector {
  SpectralFilter filter;
  Method method = Method::kMccf;
  FeatureMode mode = FeatureMode::kHog;
  int cell_size = 5;
  HogConfig hog;
  std::vector<IterationTrace> trace;  // DBCF only
};

/// Train one detector on annotated images. DBCF consumes the stream of
/// originals extended by augmentation passes, per its subset schedule.
inline TrainedDetector train_detector(std::span<const LabeledImage> images,
                                      const DetectorConfig& cfg,
                                      std::uint64_t seed = 0) {
  if (images.empty()) throw ArgumentError("train_detector: no training images");
  cfg.train.validate();

  TrainedDetector out;
  out.method = cfg.method;
  out.mode = cfg.mode();
  out.cell_size = cfg.cell_size();
  out.hog = cfg.hog;

  if (cfg.method == Method::kDbcf) {
    SubsetSchedule schedule = cfg.schedule;
    if (schedule.initial_size == 0)
      schedule.initial_size = std::max<std::size_t>(1, images.size() / 2);
    if (schedule.step_size == 0)
      schedule.step_size = std::max<std::size_t>(
          1, (schedule.initial_size + 4) / 5);
    const std::size_t n = images.size();
    const std::size_t passes = schedule.augmentations.size();
    SampleProvider provider = [&](std::size_t idx) -> std::optional<TrainingSample> {
      if (idx < n) return detail::make_training_sample(images[idx], cfg);
      const std::size_t v = idx - n;
      const std::size_t pass = v / n;
      if (pass >= passes) return std::nullopt;
      const Augmentation kind = schedule.augmentations[pass % passes];
      LabeledImage variant = detail::make_variant(images[v % n], kind, cfg,
                                                  derive_seed(seed, idx));
      return detail::make_training_sample(variant, cfg);
    };
    DbcfResult result = dbcf_train(provider, schedule, cfg.solver);
    out.filter = std::move(result.filter);
    out.trace = std::move(result.trace);
    return out;
  }

  std::vector<FeatureMap> samples;
  std::vector<DesiredResponse> labels;
  samples.reserve(images.size());
  labels.reserve(images.size());
  for (const LabeledImage& item : images) {
    TrainingSample s = detail::make_training_sample(item, cfg);
    samples.push_back(std::move(s.features));
    labels.push_back(std::move(s.label));
  }
  switch (cfg.method) {
    case Method::kAsef:
      out.filter = train_asef(samples, labels);
      break;
    case Method::kMosse:
      out.filter = train_mosse(samples, labels, cfg.train.lambda);
      break;
    case Method::kMccf:
      out.filter = train_mccf(samples, labels, cfg.train);
      break;
    case Method::kDbcf:
      break;  // handled above
  }
  return out;
}

struct DetectionResult {
  Point2 predicted;       // image pixel coordinates
  double peak_value = 0;  // response at the peak
  Plane response;         // feature-resolution response map
};

/// Correlate a trained filter over a whole test image and take the response
/// argmax as the predicted location. Filters smaller than the image pad
/// their spatial template to image size; peaks at cell resolution map back
/// to center-of-cell pixel coordinates.
inline DetectionResult detect(const SpectralFilter& filter, const Plane& image,
                              FeatureMode mode, const HogConfig& hog = {}) {
  const int cell = mode == FeatureMode::kHog ? hog.cell_size : 1;
  FeatureMap features = detail::extract_features(image, mode, hog);
  if (features.rows() < filter.rows() || features.cols() < filter.cols())
    throw DimensionError("detect: image smaller than the filter");
  if (features.channels() != filter.channels())
    throw DimensionError("detect: channel count mismatch");

  Plane response(1, 1);
  if (features.rows() == filter.rows() && features.cols() == filter.cols()) {
    response = apply_spectra(filter.spectra(), features.spectra());
  } else {
    // Embed the spatial template into an image-sized window and correlate.
    std::vector<Spectrum2D> padded;
    padded.reserve(filter.channels());
    for (Plane& tpl : filter.template_planes()) {
      Plane big(features.rows(), features.cols());
      for (int r = 0; r < tpl.rows(); ++r)
        for (int c = 0; c < tpl.cols(); ++c) big(r, c) = tpl(r, c);
      padded.push_back(forward_fft(big));
    }
    response = correlate_spectra(padded, features.spectra());
  }

  const std::size_t best = argmax(response);
  const int pr = static_cast<int>(best) / response.cols();
  const int pc = static_cast<int>(best) % response.cols();
  DetectionResult result;
  result.peak_value = response(pr, pc);
  result.predicted = {(pr + 0.5) * cell - 0.5, (pc + 0.5) * cell - 0.5};
  result.response = std::move(response);
  return result;
}

inline DetectionResult detect(const TrainedDetector& detector, const Plane& image) {
  return detect(detector.filter, image, detector.mode, detector.hog);
}

/// Fraction of predictions strictly within tau pixels of groundtruth.
inline double localization_rate(std::span<const Point2> predictions,
                                std::span<const Point2> groundtruth, double tau) {
  if (predictions.size() != groundtruth.size())
    throw ArgumentError("localization_rate: length mismatch");
  if (predictions.empty()) throw ArgumentError("localization_rate: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    if (distance(predictions[i], groundtruth[i]) < tau) ++hits;
  return static_cast<double>(hits) / predictions.size();
}

struct LocalizationReport {
  std::vector<double> noise_levels;
  std::vector<double> thresholds;
  // Indexed [noise][fold][tau].
  std::vector<std::vector<std::vector<double>>> fold_rates;
  // Indexed [noise]; one distance per test image, fold order.
  std::vector<std::vector<double>> distances;
  // Indexed [noise][tau]: arithmetic mean over folds.
  std::vector<std::vector<double>> mean_rates;
};

/// Seeded k-fold cross validation. Folds are a deterministic shuffle split;
/// each fold's detector trains on the remainder and is evaluated on noisy
/// copies of the held-out images at every requested noise level.
inline LocalizationReport cross_validate(std::span<const LabeledImage> images,
                                         const DetectorConfig& cfg, int folds,
                                         std::uint64_t seed,
                                         std::span<const double> noise_levels,
                                         std::span<const double> thresholds) {
  if (folds < 2) throw ArgumentError("cross_validate: need at least 2 folds");
  if (images.size() < static_cast<std::size_t>(folds))
    throw ArgumentError("cross_validate: dataset smaller than fold count");
  if (noise_levels.empty() || thresholds.empty())
    throw ArgumentError("cross_validate: need noise levels and thresholds");

  // Deterministic Fisher-Yates shuffle, then round-robin fold assignment.
  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, 0xF01D));
  for (std::size_t i = order.size() - 1; i > 0; --i)
    std::swap(order[i], order[rng.next_u64() % (i + 1)]);
  std::vector<int> fold_of(images.size());
  for (std::size_t i = 0; i < order.size(); ++i)
    fold_of[order[i]] = static_cast<int>(i % folds);

  LocalizationReport report;
  report.noise_levels.assign(noise_levels.begin(), noise_levels.end());
  report.thresholds.assign(thresholds.begin(), thresholds.end());
  report.fold_rates.assign(noise_levels.size(), {});
  report.distances.assign(noise_levels.size(), {});

  for (int fold = 0; fold < folds; ++fold) {
    std::vector<LabeledImage> train_set;
    std::vector<std::size_t> test_idx;
    for (std::size_t i = 0; i < images.size(); ++i) {
      if (fold_of[i] == fold)
        test_idx.push_back(i);
      else
        train_set.push_back(images[i]);
    }
    TrainedDetector detector =
        train_detector(train_set, cfg, derive_seed(seed, 100 + fold));

    for (std::size_t nz = 0; nz < noise_levels.size(); ++nz) {
      std::vector<Point2> predictions, truth;
      for (std::size_t i : test_idx) {
        const Plane noisy = add_gaussian_noise(
            images[i].image, noise_levels[nz], derive_seed(seed, i * 31 + nz));
        const DetectionResult r = detect(detector, noisy);
        predictions.push_back(r.predicted);
        truth.push_back(images[i].center);
        report.distances[nz].push_back(distance(r.predicted, images[i].center));
      }
      std::vector<double> rates;
      rates.reserve(thresholds.size());
      for (double tau : thresholds)
        rates.push_back(localization_rate(predictions, truth, tau));
      report.fold_rates[nz].push_back(std::move(rates));
    }
  }

  report.mean_rates.assign(noise_levels.size(),
                           std::vector<double>(thresholds.size(), 0.0));
  for (std::size_t nz = 0; nz < noise_levels.size(); ++nz)
    for (std::size_t f = 0; f < report.fold_rates[nz].size(); ++f)
      for (std::size_t t = 0; t < thresholds.size(); ++t)
        report.mean_rates[nz][t] += report.fold_rates[nz][f][t] / folds;
  return report;
}

}  // namespace dbcf
