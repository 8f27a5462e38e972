#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <map>
#include <vector>

#include "dbcf/dbcf.hpp"
#include "dbcf/rng.hpp"
#include "oracles.hpp"

using namespace dbcf;

namespace {

Plane random_plane(int rows, int cols, Rng& rng) {
  Plane p(rows, cols);
  for (double& v : p) v = rng.uniform(-1.0, 1.0);
  return p;
}

FeatureMap random_features(int rows, int cols, int channels, Rng& rng) {
  std::vector<Plane> planes;
  for (int k = 0; k < channels; ++k) planes.push_back(random_plane(rows, cols, rng));
  return FeatureMap(std::move(planes));
}

SpectralFilter random_filter(int rows, int cols, int channels, Rng& rng) {
  std::vector<Spectrum2D> spectra(channels, Spectrum2D(rows, cols));
  for (auto& s : spectra)
    for (std::complex<double>& v : s) v = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
  return SpectralFilter(std::move(spectra));
}

/// Single-coefficient filter helper for weight fixtures.
SpectralFilter scalar_filter(double re, double im = 0.0) {
  Spectrum2D s(1, 1);
  s[0] = {re, im};
  return SpectralFilter({s});
}

double max_rel_gap(const SpectralFilter& a, const SpectralFilter& b) {
  return distance(a, b) / b.norm();
}

}  // namespace

TEST_CASE("sigma gate keeps sigma when the residual improves", "[dbcf]") {
  SolverState state;
  state.sigma = 0.25;
  state.eps_best = 1.0;
  state.eta = 0.7;
  const SolverState next = sigma_step(0.5, state);
  REQUIRE(next.sigma == 0.25);
  REQUIRE(next.eps_best == 0.5);
}

TEST_CASE("sigma gate doubles sigma on a stalled residual", "[dbcf]") {
  SolverState state;
  state.sigma = 0.25;
  state.eps_best = 1.0;
  state.eta = 0.7;
  const SolverState next = sigma_step(0.8, state);
  REQUIRE(next.sigma == 0.5);
  REQUIRE(next.eps_best == 1.0);
}

TEST_CASE("any finite residual passes the first gate", "[dbcf]") {
  SolverState state;
  state.sigma = 0.25;
  state.eta = 0.7;
  REQUIRE(std::isinf(state.eps_best));
  const SolverState next = sigma_step(1e9, state);
  REQUIRE(next.sigma == 0.25);
  REQUIRE(next.eps_best == 1e9);
  REQUIRE_THROWS_AS(sigma_step(-1.0, state), ArgumentError);
}

TEST_CASE("update_filter with zero sigma is plain MCCF", "[dbcf]") {
  Rng rng(81);
  std::vector<FeatureMap> samples{random_features(6, 6, 2, rng),
                                  random_features(6, 6, 2, rng)};
  std::vector<DesiredResponse> labels{gaussian_response(6, 6, {3, 3}),
                                      gaussian_response(6, 6, {2, 4})};
  const SpectralFilter dummy = SpectralFilter::zero(6, 6, 2);
  const SpectralFilter a = update_filter(samples, labels, 0.0, dummy, 1e-4);
  TrainConfig cfg;
  cfg.lambda = 1e-4;
  const SpectralFilter b = train_mccf(samples, labels, cfg);
  REQUIRE(distance(a, b) < 1e-10 * b.norm() + 1e-14);
}

TEST_CASE("a dominating penalty pins the filter to f_prime", "[dbcf]") {
  Rng rng(83);
  std::vector<FeatureMap> samples{random_features(5, 5, 2, rng)};
  std::vector<DesiredResponse> labels{gaussian_response(5, 5, {2, 2})};
  const SpectralFilter f_prime = random_filter(5, 5, 2, rng);
  const SpectralFilter f = update_filter(samples, labels, 1e9, f_prime, 1e-4);
  REQUIRE(max_rel_gap(f, f_prime) < 1e-6);
}

TEST_CASE("penalized solve matches the dense augmented system", "[dbcf]") {
  Rng rng(85);
  std::vector<FeatureMap> samples{random_features(4, 4, 2, rng),
                                  random_features(4, 4, 2, rng)};
  std::vector<DesiredResponse> labels{gaussian_response(4, 4, {1, 1}),
                                      gaussian_response(4, 4, {2, 3})};
  const SpectralFilter f_prime = random_filter(4, 4, 2, rng);
  const double sigma = 0.25, lambda = 1e-4;
  const SpectralFilter fast = update_filter(samples, labels, sigma, f_prime, lambda);

  std::vector<std::vector<Spectrum2D>> xs;
  for (const FeatureMap& s : samples) xs.push_back(s.spectra());
  std::vector<Spectrum2D> ys;
  for (const DesiredResponse& l : labels) ys.push_back(l.spectrum());
  const std::vector<Spectrum2D> fp = f_prime.spectra();
  const auto dense = oracle::dense_mccf(xs, ys, lambda, sigma, &fp);
  double num = 0.0, den = 0.0;
  for (int k = 0; k < 2; ++k)
    for (std::size_t w = 0; w < dense[k].size(); ++w) {
      num += std::norm(fast.spectrum(k)[w] - dense[k][w]);
      den += std::norm(dense[k][w]);
    }
  REQUIRE(std::sqrt(num / den) < 1e-8);
}

TEST_CASE("update_filter validates shapes and sigma", "[dbcf]") {
  Rng rng(87);
  std::vector<FeatureMap> samples{random_features(4, 4, 1, rng)};
  std::vector<DesiredResponse> labels{gaussian_response(4, 4, {0, 0})};
  const SpectralFilter wrong = SpectralFilter::zero(4, 4, 2);
  REQUIRE_THROWS_AS(update_filter(samples, labels, 0.5, wrong, 1e-4),
                    DimensionError);
}

TEST_CASE("projection with a single sub-filter returns it exactly", "[dbcf]") {
  Rng rng(89);
  const SpectralFilter sub = random_filter(3, 3, 1, rng);
  ReconstructionSpace space(5);
  space.append(sub);
  ProjectionInfo info;
  const SpectralFilter out = reconstruct_projection(
      random_filter(3, 3, 1, rng), space, DistanceMode::kDijkstra, false, &info);
  REQUIRE(distance(out, sub) == 0.0);
  REQUIRE(info.weights == std::vector<double>{1.0});
}

TEST_CASE("distances one and two yield weights two-thirds and one-third", "[dbcf]") {
  // Sub-filters at 1 and 4 on the real axis, query at 2: distances 1 and 2.
  ReconstructionSpace space(5);
  space.append(scalar_filter(1.0));
  space.append(scalar_filter(4.0));
  ProjectionInfo info;
  const SpectralFilter out = reconstruct_projection(
      scalar_filter(2.0), space, DistanceMode::kDijkstra, false, &info);
  REQUIRE(info.distances[0] == Catch::Approx(1.0));
  REQUIRE(info.distances[1] == Catch::Approx(2.0));
  REQUIRE(info.weights[0] == Catch::Approx(2.0 / 3.0).epsilon(1e-12));
  REQUIRE(info.weights[1] == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
  // Combination: 2/3 * 1 + 1/3 * 4 = 2.
  REQUIRE(out.spectrum(0)[0].real() == Catch::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("a coincident sub-filter takes all the weight", "[dbcf]") {
  Rng rng(91);
  const SpectralFilter a = random_filter(4, 4, 2, rng);
  const SpectralFilter b = random_filter(4, 4, 2, rng);
  ReconstructionSpace space(5);
  space.append(a);
  space.append(b);
  ProjectionInfo info;
  const SpectralFilter out =
      reconstruct_projection(b, space, DistanceMode::kDijkstra, false, &info);
  REQUIRE(distance(out, b) == 0.0);
  REQUIRE(info.weights[0] == 0.0);
  REQUIRE(info.weights[1] == 1.0);
}

TEST_CASE("euclidean projection matches a hand-assembled weighted sum", "[dbcf]") {
  Rng rng(93);
  std::vector<SpectralFilter> subs;
  ReconstructionSpace space(5);
  for (int i = 0; i < 3; ++i) {
    subs.push_back(random_filter(4, 4, 1, rng));
    space.append(subs.back());
  }
  const SpectralFilter query = random_filter(4, 4, 1, rng);
  const SpectralFilter out =
      reconstruct_projection(query, space, DistanceMode::kEuclidean);

  // Independent weighted sum from first principles.
  std::vector<double> inv(3);
  double inv_sum = 0.0;
  for (int i = 0; i < 3; ++i) {
    double d2 = 0.0;
    for (int k = 0; k < 1; ++k)
      for (std::size_t w = 0; w < query.spectrum(k).size(); ++w)
        d2 += std::norm(query.spectrum(k)[w] - subs[i].spectrum(k)[w]);
    inv[i] = 1.0 / std::sqrt(d2);
    inv_sum += inv[i];
  }
  Spectrum2D expected(4, 4);
  for (int i = 0; i < 3; ++i)
    for (std::size_t w = 0; w < expected.size(); ++w)
      expected[w] += (inv[i] / inv_sum) * subs[i].spectrum(0)[w];
  for (std::size_t w = 0; w < expected.size(); ++w)
    REQUIRE(std::abs(out.spectrum(0)[w] - expected[w]) < 1e-12);
}

TEST_CASE("projection weights form a simplex ordered by distance", "[dbcf]") {
  Rng rng(95);
  for (int trial = 0; trial < 20; ++trial) {
    ReconstructionSpace space(3);
    const int count = rng.uniform_int(2, 6);
    for (int i = 0; i < count; ++i) space.append(random_filter(3, 3, 2, rng));
    ProjectionInfo info;
    reconstruct_projection(random_filter(3, 3, 2, rng), space,
                           trial % 2 ? DistanceMode::kDijkstra
                                     : DistanceMode::kEuclidean,
                           false, &info);
    double sum = 0.0;
    for (double w : info.weights) {
      REQUIRE(w >= 0.0);
      sum += w;
    }
    REQUIRE(sum == Catch::Approx(1.0).margin(1e-12));
    for (std::size_t i = 0; i < info.weights.size(); ++i)
      for (std::size_t j = 0; j < info.weights.size(); ++j)
        if (info.distances[i] < info.distances[j])
          REQUIRE(info.weights[i] >= info.weights[j]);
  }
}

TEST_CASE("squared-distance weighting sharpens toward near sub-filters", "[dbcf]") {
  ReconstructionSpace space(5);
  space.append(scalar_filter(1.0));
  space.append(scalar_filter(4.0));
  ProjectionInfo info;
  reconstruct_projection(scalar_filter(2.0), space, DistanceMode::kEuclidean,
                         true, &info);
  // Squared distances 1 and 4 normalize to 4/5 and 1/5.
  REQUIRE(info.weights[0] == Catch::Approx(0.8).epsilon(1e-12));
  REQUIRE(info.weights[1] == Catch::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("projection on an empty space is rejected", "[dbcf]") {
  ReconstructionSpace space(5);
  Rng rng(97);
  REQUIRE_THROWS_AS(reconstruct_projection(random_filter(2, 2, 1, rng), space,
                                           DistanceMode::kDijkstra),
                    ArgumentError);
}

TEST_CASE("initialize seeds the state and space from MCCF", "[dbcf]") {
  Rng rng(99);
  std::vector<FeatureMap> samples{random_features(4, 4, 1, rng)};
  std::vector<DesiredResponse> labels{gaussian_response(4, 4, {2, 2})};
  SolverConfig cfg;
  auto [state, space] = initialize(samples, labels, cfg);
  TrainConfig tc;
  tc.lambda = cfg.lambda;
  const SpectralFilter expected = train_mccf(samples, labels, tc);
  REQUIRE(distance(state.f_current, expected) == 0.0);
  REQUIRE(distance(state.f_prime, state.f_current) == 0.0);
  REQUIRE(state.t == 0);
  REQUIRE(state.sigma == 0.25);
  REQUIRE(std::isinf(state.eps_best));
  REQUIRE(space.size() == 1);
}

namespace {

/// Deterministic provider over a fixed pool of samples.
SampleProvider pool_provider(std::shared_ptr<std::vector<TrainingSample>> pool) {
  return [pool](std::size_t idx) -> std::optional<TrainingSample> {
    if (idx >= pool->size()) return std::nullopt;
    return (*pool)[idx];
  };
}

std::shared_ptr<std::vector<TrainingSample>> random_pool(int count, int rows,
                                                         int cols, int channels,
                                                         Rng& rng) {
  auto pool = std::make_shared<std::vector<TrainingSample>>();
  for (int i = 0; i < count; ++i)
    pool->push_back(TrainingSample{
        random_features(rows, cols, channels, rng),
        gaussian_response(rows, cols,
                          {rng.uniform_int(0, rows - 1), rng.uniform_int(0, cols - 1)})});
  return pool;
}

}  // namespace

TEST_CASE("dataset smaller than the initial subset is rejected", "[dbcf]") {
  Rng rng(101);
  auto pool = random_pool(3, 4, 4, 1, rng);
  SubsetSchedule schedule;
  schedule.initial_size = 5;
  schedule.step_size = 1;
  REQUIRE_THROWS_AS(dbcf_train(pool_provider(pool), schedule, SolverConfig{}),
                    ArgumentError);
}

TEST_CASE("zero iterations returns MCCF on the initial subset", "[dbcf]") {
  Rng rng(103);
  auto pool = random_pool(6, 4, 4, 2, rng);
  SubsetSchedule schedule;
  schedule.initial_size = 3;
  schedule.step_size = 1;
  schedule.max_iters = 0;
  SolverConfig cfg;
  cfg.sigma0 = 0.0;
  const DbcfResult result = dbcf_train(pool_provider(pool), schedule, cfg);
  std::vector<FeatureMap> samples;
  std::vector<DesiredResponse> labels;
  for (int i = 0; i < 3; ++i) {
    samples.push_back((*pool)[i].features);
    labels.push_back((*pool)[i].label);
  }
  TrainConfig tc;
  tc.lambda = cfg.lambda;
  const SpectralFilter expected = train_mccf(samples, labels, tc);
  REQUIRE(distance(result.filter, expected) <= 1e-10 * expected.norm());
  REQUIRE(result.trace.empty());
  REQUIRE(result.subfilter_count == 1);
}

TEST_CASE("identical samples reach a fixed point immediately", "[dbcf]") {
  Rng rng(105);
  const TrainingSample sample{random_features(4, 4, 1, rng),
                              gaussian_response(4, 4, {2, 2})};
  SampleProvider provider = [&](std::size_t) -> std::optional<TrainingSample> {
    return sample;
  };
  SubsetSchedule schedule;
  schedule.initial_size = 1;
  schedule.step_size = 1;
  schedule.max_iters = 10;
  SolverConfig cfg;
  cfg.lambda = 0.0;  // exact self-consistency needs no ridge drift
  const DbcfResult result = dbcf_train(provider, schedule, cfg);
  REQUIRE(result.trace.size() == 1);
  REQUIRE(result.trace[0].eps == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(result.subfilter_count == 2);
}

TEST_CASE("with sigma pinned to zero DBCF reduces to MCCF on the final subset",
          "[dbcf]") {
  Rng rng(107);
  auto pool = random_pool(10, 4, 4, 2, rng);
  SubsetSchedule schedule;
  schedule.initial_size = 4;
  schedule.step_size = 2;
  schedule.max_iters = 3;
  schedule.tolerance = 0.0;  // run all iterations
  SolverConfig cfg;
  cfg.sigma0 = 0.0;
  const DbcfResult result = dbcf_train(pool_provider(pool), schedule, cfg);
  std::vector<FeatureMap> samples;
  std::vector<DesiredResponse> labels;
  for (int i = 0; i < 10; ++i) {
    samples.push_back((*pool)[i].features);
    labels.push_back((*pool)[i].label);
  }
  TrainConfig tc;
  tc.lambda = cfg.lambda;
  const SpectralFilter expected = train_mccf(samples, labels, tc);
  REQUIRE(distance(result.filter, expected) <= 1e-10 * expected.norm());
}

TEST_CASE("sigma never decreases along the trace", "[dbcf]") {
  Rng rng(109);
  auto pool = random_pool(20, 4, 4, 1, rng);
  SubsetSchedule schedule;
  schedule.initial_size = 2;
  schedule.step_size = 2;
  schedule.max_iters = 9;
  schedule.tolerance = 0.0;
  const DbcfResult result = dbcf_train(pool_provider(pool), schedule, SolverConfig{});
  REQUIRE(result.trace.size() == 9);
  for (std::size_t i = 1; i < result.trace.size(); ++i)
    REQUIRE(result.trace[i].sigma >= result.trace[i - 1].sigma);
}

TEST_CASE("each sample is pulled exactly once in accumulated mode", "[dbcf]") {
  Rng rng(111);
  auto pool = random_pool(12, 4, 4, 1, rng);
  auto counts = std::make_shared<std::map<std::size_t, int>>();
  SampleProvider provider = [pool, counts](std::size_t idx)
      -> std::optional<TrainingSample> {
    ++(*counts)[idx];
    if (idx >= pool->size()) return std::nullopt;
    return (*pool)[idx];
  };
  SubsetSchedule schedule;
  schedule.initial_size = 4;
  schedule.step_size = 2;
  schedule.max_iters = 4;
  schedule.tolerance = 0.0;
  dbcf_train(provider, schedule, SolverConfig{});
  for (const auto& [idx, n] : *counts) REQUIRE(n == 1);
}

TEST_CASE("an exhausted stream stops early with the last filter", "[dbcf]") {
  Rng rng(113);
  auto pool = random_pool(5, 4, 4, 1, rng);
  SubsetSchedule schedule;
  schedule.initial_size = 3;
  schedule.step_size = 2;
  schedule.max_iters = 10;
  schedule.tolerance = 0.0;
  const DbcfResult result = dbcf_train(pool_provider(pool), schedule, SolverConfig{});
  REQUIRE(result.exhausted_early);
  REQUIRE(result.trace.size() == 1);  // one batch of two samples, then dry
  REQUIRE(result.filter.valid());
}

TEST_CASE("the space holds one sub-filter per iteration plus the seed", "[dbcf]") {
  Rng rng(115);
  auto pool = random_pool(40, 4, 4, 1, rng);
  for (std::size_t iters : {2ul, 4ul, 8ul}) {
    SubsetSchedule schedule;
    schedule.initial_size = 2;
    schedule.step_size = 1;
    schedule.max_iters = iters;
    schedule.tolerance = 0.0;
    const DbcfResult result =
        dbcf_train(pool_provider(pool), schedule, SolverConfig{});
    REQUIRE(result.subfilter_count == iters + 1);
    const std::size_t per_filter =
        2ul * 16ul * sizeof(double);  // 4x4 complex, one channel
    REQUIRE(result.retained_bytes == (iters + 1) * per_filter);
  }
}

TEST_CASE("incremental-only mode rebuilds the system from each batch", "[dbcf]") {
  Rng rng(117);
  auto pool = random_pool(8, 4, 4, 1, rng);
  SubsetSchedule schedule;
  schedule.initial_size = 2;
  schedule.step_size = 3;
  schedule.max_iters = 1;
  schedule.tolerance = 0.0;
  SolverConfig cfg;
  cfg.sigma0 = 0.0;
  cfg.incremental_only = true;
  const DbcfResult result = dbcf_train(pool_provider(pool), schedule, cfg);
  // With sigma = 0 the single iteration solves plain MCCF on samples 2..4.
  std::vector<FeatureMap> samples;
  std::vector<DesiredResponse> labels;
  for (int i = 2; i < 5; ++i) {
    samples.push_back((*pool)[i].features);
    labels.push_back((*pool)[i].label);
  }
  TrainConfig tc;
  tc.lambda = cfg.lambda;
  const SpectralFilter expected = train_mccf(samples, labels, tc);
  REQUIRE(distance(result.filter, expected) <= 1e-10 * expected.norm());
}
