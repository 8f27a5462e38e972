#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "dbcf/dataset.hpp"
#include "dbcf/detection.hpp"
#include "dbcf/rng.hpp"

using namespace dbcf;

namespace {

std::vector<LabeledImage> small_benchmark(int count, std::uint64_t seed,
                                          double clutter = 0.4,
                                          double illum = 0.1) {
  DetectionSynthConfig cfg;
  cfg.count = count;
  cfg.rows = 120;
  cfg.cols = 120;
  cfg.target_size = 40;
  cfg.clutter_density = clutter;
  cfg.illumination_jitter = illum;
  return synth_detection_set(cfg, seed);
}

DetectorConfig small_mccf() {
  DetectorConfig cfg;
  cfg.method = Method::kMccf;
  cfg.train.filter_rows = 40;
  cfg.train.filter_cols = 40;
  return cfg;
}

}  // namespace

TEST_CASE("localization rate counts strict hits", "[detection]") {
  std::vector<Point2> preds{{0, 0}, {10, 10}, {5, 5}, {30, 40}};
  std::vector<Point2> gts{{0, 0}, {10, 18}, {5, 25}, {30, 41}};
  REQUIRE(localization_rate(preds, gts, 10.0) == 0.5);
  REQUIRE(localization_rate(preds, preds, 0.5) == 1.0);
  std::vector<Point2> far{{100, 100}, {90, 90}, {80, 80}, {70, 70}};
  REQUIRE(localization_rate(far, gts, 10.0) == 0.0);
  REQUIRE_THROWS_AS(
      localization_rate(preds, std::vector<Point2>{{0, 0}}, 5.0),
      ArgumentError);
}

TEST_CASE("localization rate is monotone in the threshold", "[detection]") {
  Rng rng(131);
  std::vector<Point2> preds, gts;
  for (int i = 0; i < 30; ++i) {
    preds.push_back({rng.uniform(0, 50), rng.uniform(0, 50)});
    gts.push_back({rng.uniform(0, 50), rng.uniform(0, 50)});
  }
  double previous = 0.0;
  for (double tau : {1.0, 5.0, 10.0, 20.0, 40.0, 80.0}) {
    const double rate = localization_rate(preds, gts, tau);
    REQUIRE(rate >= previous);
    previous = rate;
  }
}

TEST_CASE("a zero filter predicts the origin with zero peak", "[detection]") {
  const SpectralFilter zero = SpectralFilter::zero(12, 12, 5);
  const auto set = small_benchmark(1, 31);
  const DetectionResult r = detect(zero, set[0].image, FeatureMode::kHog);
  REQUIRE(r.peak_value == 0.0);
  // First-index tie-break lands on cell (0, 0) -> center-of-cell pixels.
  REQUIRE(r.predicted.row == Catch::Approx(2.0));
  REQUIRE(r.predicted.col == Catch::Approx(2.0));

  const SpectralFilter zero_px = SpectralFilter::zero(60, 60, 1);
  const DetectionResult ri =
      detect(zero_px, set[0].image, FeatureMode::kIntensity);
  REQUIRE(ri.predicted.row == 0.0);
  REQUIRE(ri.predicted.col == 0.0);
}

TEST_CASE("self-detection lands within one cell of the target", "[detection]") {
  const auto set = small_benchmark(1, 33);
  for (Method method : {Method::kMccf, Method::kMosse, Method::kAsef}) {
    DetectorConfig cfg = small_mccf();
    cfg.method = method;
    const TrainedDetector det = train_detector(set, cfg, 1);
    const DetectionResult r = detect(det, set[0].image);
    const double err = distance(r.predicted, set[0].center);
    INFO("method " << to_string(method) << " error " << err);
    REQUIRE(err <= static_cast<double>(cfg.cell_size()) + 1e-9);
  }
}

TEST_CASE("detection is equivariant to circular shifts", "[detection]") {
  const auto set = small_benchmark(1, 35, /*clutter=*/0.2);
  DetectorConfig cfg = small_mccf();
  const TrainedDetector det = train_detector(set, cfg, 1);

  const Plane& img = set[0].image;
  const int dr = 25, dc = 40;  // multiples of the cell size
  Plane shifted(img.rows(), img.cols());
  for (int r = 0; r < img.rows(); ++r)
    for (int c = 0; c < img.cols(); ++c)
      shifted((r + dr) % img.rows(), (c + dc) % img.cols()) = img(r, c);

  const DetectionResult base = detect(det, img);
  const DetectionResult moved = detect(det, shifted);
  const double er = std::fmod(base.predicted.row + dr, img.rows());
  const double ec = std::fmod(base.predicted.col + dc, img.cols());
  REQUIRE(std::abs(moved.predicted.row - er) <= cfg.cell_size() + 1e-9);
  REQUIRE(std::abs(moved.predicted.col - ec) <= cfg.cell_size() + 1e-9);
}

TEST_CASE("images smaller than the filter are rejected", "[detection]") {
  const SpectralFilter filter = SpectralFilter::zero(12, 12, 5);
  REQUIRE_THROWS_AS(detect(filter, Plane(40, 40, 0.5), FeatureMode::kHog),
                    DimensionError);
}

TEST_CASE("clean benchmark self-detects perfectly", "[detection]") {
  // Clutter-free, illumination-free: every method should nail every image.
  const auto set = small_benchmark(8, 37, /*clutter=*/0.0, /*illum=*/0.0);
  DetectorConfig cfg = small_mccf();
  const TrainedDetector det = train_detector(set, cfg, 1);
  std::vector<Point2> preds, gts;
  for (const LabeledImage& item : set) {
    preds.push_back(detect(det, item.image).predicted);
    gts.push_back(item.center);
  }
  REQUIRE(localization_rate(preds, gts, 10.0) == 1.0);
}

TEST_CASE("cross validation is deterministic and averages fold rates", "[detection]") {
  const auto set = small_benchmark(20, 39);
  DetectorConfig cfg = small_mccf();
  const std::vector<double> noise{0.0};
  const std::vector<double> taus{5.0, 10.0, 20.0};
  const LocalizationReport a = cross_validate(set, cfg, 5, 77, noise, taus);
  const LocalizationReport b = cross_validate(set, cfg, 5, 77, noise, taus);
  REQUIRE(a.fold_rates == b.fold_rates);
  REQUIRE(a.distances == b.distances);

  REQUIRE(a.fold_rates[0].size() == 5);
  for (std::size_t t = 0; t < taus.size(); ++t) {
    double mean = 0.0;
    for (int f = 0; f < 5; ++f) mean += a.fold_rates[0][f][t] / 5.0;
    REQUIRE(a.mean_rates[0][t] == Catch::Approx(mean).margin(1e-12));
  }
  // Rates are monotone in tau for every fold.
  for (int f = 0; f < 5; ++f)
    for (std::size_t t = 1; t < taus.size(); ++t)
      REQUIRE(a.fold_rates[0][f][t] >= a.fold_rates[0][f][t - 1]);
}

TEST_CASE("ten-fold split of ten samples is leave-one-out", "[detection]") {
  const auto set = small_benchmark(10, 41);
  DetectorConfig cfg = small_mccf();
  const std::vector<double> noise{0.0};
  const std::vector<double> taus{10.0};
  const LocalizationReport rep = cross_validate(set, cfg, 10, 5, noise, taus);
  REQUIRE(rep.fold_rates[0].size() == 10);
  REQUIRE(rep.distances[0].size() == 10);  // one held-out image per fold
  for (int f = 0; f < 10; ++f) {
    const double rate = rep.fold_rates[0][f][0];
    REQUIRE((rate == 0.0 || rate == 1.0));
  }
}

TEST_CASE("cross validation rejects undersized datasets", "[detection]") {
  const auto set = small_benchmark(3, 43);
  DetectorConfig cfg = small_mccf();
  const std::vector<double> noise{0.0};
  const std::vector<double> taus{10.0};
  REQUIRE_THROWS_AS(cross_validate(set, cfg, 10, 5, noise, taus), ArgumentError);
}

TEST_CASE("detection rates degrade monotonically with heavy noise on average",
          "[detection]") {
  // Directional check over seeds: mean localization never improves when
  // severe noise is added.
  const std::vector<double> noise{0.0, 0.5};
  const std::vector<double> taus{10.0};
  double clean = 0.0, noisy = 0.0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto set = small_benchmark(16, 100 + seed);
    const LocalizationReport rep =
        cross_validate(set, small_mccf(), 4, seed, noise, taus);
    clean += rep.mean_rates[0][0];
    noisy += rep.mean_rates[1][0];
  }
  REQUIRE(noisy <= clean + 1e-9);
}
