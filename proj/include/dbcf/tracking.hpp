#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "dbcf/cf_solvers.hpp"
#include "dbcf/dataset.hpp"
#include "dbcf/dbcf.hpp"
#include "dbcf/detection.hpp"
#include "dbcf/errors.hpp"
#include "dbcf/features.hpp"
#include "dbcf/geometry.hpp"

namespace dbcf {

struct TrackerConfig {
  double lambda = 1e-4;
  double rho = 0.1;           // model interpolation weight
  double padding = 1.5;       // search window / target size
  double label_variance = 2.0;
  FeatureMode mode = FeatureMode::kHog;
  HogConfig hog;
  bool dbcf_enabled = true;
  std::size_t space_capacity = 5;  // ring buffer of recent per-frame filters
  std::size_t neighbors = 5;       // M cap for the projection
  DistanceMode distance_mode = DistanceMode::kDijkstra;
  bool squared_weights = false;

  void validate() const {
    if (rho < 0.0 || rho > 1.0)
      throw ArgumentError("TrackerConfig: rho must lie in [0, 1]");
    if (padding <= 1.0)
      throw ArgumentError("TrackerConfig: padding must exceed 1");
    if (lambda < 0.0) throw ArgumentError("TrackerConfig: lambda must be >= 0");
  }
};

/// Linear interpolation of filter spectra: (1 - rho) * a + rho * b.
inline SpectralFilter interpolate(const SpectralFilter& a,
                                  const SpectralFilter& b, double rho) {
  if (a.rows() != b.rows() || a.cols() != b.cols() ||
      a.channels() != b.channels())
    throw DimensionError("interpolate: filter shape mismatch");
  std::vector<Spectrum2D> out;
  out.reserve(a.channels());
  for (int k = 0; k < a.channels(); ++k) {
    Spectrum2D s(a.rows(), a.cols());
    for (std::size_t i = 0; i < s.size(); ++i)
      s[i] = (1.0 - rho) * a.spectrum(k)[i] + rho * b.spectrum(k)[i];
    out.push_back(std::move(s));
  }
  return SpectralFilter(std::move(out));
}

/// Frame-by-frame correlation tracker. The model filter trains on a padded
/// search window; each frame locates the peak displacement, then retrains a
/// per-frame filter at the new position. With DBCF enabled the per-frame
/// filter is projected into the ring buffer of recent sub-filters before it
/// is blended into the model.
class Tracker {
 public:
  Tracker(const Plane& first_frame, const BBox& bbox, TrackerConfig cfg = {})
      : cfg_(std::move(cfg)), space_(cfg_.neighbors, cfg_.space_capacity) {
    cfg_.validate();
    if (bbox.row < 0 || bbox.col < 0 ||
        bbox.row + bbox.height > first_frame.rows() ||
        bbox.col + bbox.width > first_frame.cols())
      throw ArgumentError("Tracker: bbox outside the frame");
    const int cell = cfg_.mode == FeatureMode::kHog ? cfg_.hog.cell_size : 1;
    win_rows_ = snap(cfg_.padding * bbox.height, cell);
    win_cols_ = snap(cfg_.padding * bbox.width, cell);
    cells_r_ = win_rows_ / cell;
    cells_c_ = win_cols_ / cell;
    cell_ = cell;
    target_h_ = bbox.height;
    target_w_ = bbox.width;
    position_ = bbox.center();
    label_peak_ = {cells_r_ / 2, cells_c_ / 2};
    label_.emplace(gaussian_response(cells_r_, cells_c_, label_peak_,
                                     cfg_.label_variance));

    // Initial model: single-window MCCF (penalty-free).
    FeatureMap features = window_features(first_frame);
    NormalEquations eq(cells_r_, cells_c_, features.channels());
    eq.accumulate(features, *label_);
    model_ = eq.solve(cfg_.lambda);
    space_.append(model_);
  }

  int window_rows() const { return win_rows_; }
  int window_cols() const { return win_cols_; }
  Point2 position() const { return position_; }
  BBox bounding_box() const {
    return BBox::centered(position_, target_h_, target_w_);
  }
  const SpectralFilter& model() const { return model_; }
  const ReconstructionSpace& space() const { return space_; }

  /// Locate the target in a new frame: correlate the model over the search
  /// window at the previous position and move by the peak displacement.
  /// A non-positive peak (no correlation evidence) holds the position.
  std::pair<Point2, double> track_step(const Plane& frame) {
    FeatureMap features = window_features(frame);
    const Plane response = apply_spectra(model_.spectra(), features.spectra());
    const std::size_t best = argmax(response);
    const double peak = response[best];
    if (peak > 0.0) {
      int dr = static_cast<int>(best) / response.cols() - label_peak_.row;
      int dc = static_cast<int>(best) % response.cols() - label_peak_.col;
      if (dr >= cells_r_ / 2) dr -= cells_r_;
      if (dr < -cells_r_ / 2) dr += cells_r_;
      if (dc >= cells_c_ / 2) dc -= cells_c_;
      if (dc < -cells_c_ / 2) dc += cells_c_;
      position_.row += dr * cell_;
      position_.col += dc * cell_;
      position_.row = std::clamp(position_.row, 0.0, frame.rows() - 1.0);
      position_.col = std::clamp(position_.col, 0.0, frame.cols() - 1.0);
    }
    return {position_, peak};
  }

  /// Train a per-frame filter at the current position and fold it into the
  /// model. The explicit flag overrides the configured DBCF switch.
  void model_update(const Plane& frame, std::optional<bool> dbcf = std::nullopt) {
    const bool enabled = dbcf.value_or(cfg_.dbcf_enabled);
    FeatureMap features = window_features(frame);
    NormalEquations eq(cells_r_, cells_c_, features.channels());
    eq.accumulate(features, *label_);
    SpectralFilter frame_filter = eq.solve(cfg_.lambda);

    SpectralFilter corrected = frame_filter;
    if (enabled) {
      if (space_.size() >= 2)
        corrected = reconstruct_projection(frame_filter, space_,
                                           cfg_.distance_mode,
                                           cfg_.squared_weights);
      space_.append(std::move(frame_filter));
    }
    model_ = interpolate(model_, corrected, cfg_.rho);
  }

 private:
  static int snap(double pixels, int cell) {
    const int snapped =
        static_cast<int>(std::lround(pixels / cell)) * cell;
    return std::max(snapped, 2 * cell);
  }

  FeatureMap window_features(const Plane& frame) const {
    const Plane patch =
        detail::crop_replicated(frame, position_, win_rows_, win_cols_, cell_);
    return detail::extract_features(patch, cfg_.mode, cfg_.hog);
  }

  TrackerConfig cfg_;
  int win_rows_ = 0, win_cols_ = 0;
  int cells_r_ = 0, cells_c_ = 0;
  int cell_ = 1;
  double target_h_ = 0, target_w_ = 0;
  Point2 position_;
  Index2 label_peak_;
  std::optional<DesiredResponse> label_;
  SpectralFilter model_;
  ReconstructionSpace space_;
};

/// Fraction of frames with center error strictly below each threshold.
inline std::vector<double> precision_curve(std::span<const Point2> predicted,
                                           std::span<const Point2> groundtruth,
                                           std::span<const double> thresholds) {
  if (predicted.size() != groundtruth.size())
    throw ArgumentError("precision_curve: length mismatch");
  if (predicted.empty()) throw ArgumentError("precision_curve: empty input");
  std::vector<double> curve;
  curve.reserve(thresholds.size());
  for (double thr : thresholds) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i)
      if (distance(predicted[i], groundtruth[i]) < thr) ++hits;
    curve.push_back(static_cast<double>(hits) / predicted.size());
  }
  return curve;
}

/// Fraction of frames with IoU strictly above each threshold.
inline std::vector<double> success_curve(std::span<const BBox> predicted,
                                         std::span<const BBox> groundtruth,
                                         std::span<const double> thresholds) {
  if (predicted.size() != groundtruth.size())
    throw ArgumentError("success_curve: length mismatch");
  if (predicted.empty()) throw ArgumentError("success_curve: empty input");
  std::vector<double> curve;
  curve.reserve(thresholds.size());
  for (double thr : thresholds) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i)
      if (iou(predicted[i], groundtruth[i]) > thr) ++hits;
    curve.push_back(static_cast<double>(hits) / predicted.size());
  }
  return curve;
}

struct TrackReport {
  std::vector<Point2> centers;
  std::vector<double> center_errors;
  std::vector<double> overlaps;
  std::vector<double> precision_thresholds;
  std::vector<double> precision;
  std::vector<double> success_thresholds;
  std::vector<double> success;
  double fps = 0.0;
};

/// One-pass evaluation of a sequence (OPE): initialize on the first frame's
/// groundtruth, then track. FPS counts tracking work only; frames are
/// already decoded.
inline TrackReport run_tracker(const Sequence& seq, const TrackerConfig& cfg) {
  if (seq.frames.empty()) throw ArgumentError("run_tracker: empty sequence");
  if (seq.frames.size() != seq.groundtruth.size())
    throw ArgumentError("run_tracker: groundtruth count mismatch");

  TrackReport report;
  const auto start = std::chrono::steady_clock::now();
  Tracker tracker(seq.frames[0], seq.groundtruth[0], cfg);
  report.centers.push_back(tracker.position());
  for (std::size_t f = 1; f < seq.frames.size(); ++f) {
    tracker.track_step(seq.frames[f]);
    tracker.model_update(seq.frames[f]);
    report.centers.push_back(tracker.position());
  }
  const std::chrono::duration<double> elapsed =
      std::chrono::steady_clock::now() - start;
  report.fps = static_cast<double>(seq.frames.size()) /
               std::max(elapsed.count(), 1e-9);

  const double h = seq.groundtruth[0].height, w = seq.groundtruth[0].width;
  std::vector<Point2> gt_centers;
  std::vector<BBox> pred_boxes;
  for (std::size_t f = 0; f < seq.frames.size(); ++f) {
    gt_centers.push_back(seq.groundtruth[f].center());
    pred_boxes.push_back(BBox::centered(report.centers[f], h, w));
    report.center_errors.push_back(
        distance(report.centers[f], gt_centers.back()));
    report.overlaps.push_back(iou(pred_boxes.back(), seq.groundtruth[f]));
  }
  for (int t = 1; t <= 50; ++t)
    report.precision_thresholds.push_back(static_cast<double>(t));
  report.precision =
      precision_curve(report.centers, gt_centers, report.precision_thresholds);
  for (int t = 0; t <= 20; ++t)
    report.success_thresholds.push_back(t * 0.05);
  report.success =
      success_curve(pred_boxes, seq.groundtruth, report.success_thresholds);
  return report;
}

}  // namespace dbcf
