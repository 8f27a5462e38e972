#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "dbcf/cf_solvers.hpp"
#include "dbcf/dijkstra.hpp"
#include "dbcf/errors.hpp"
#include "dbcf/features.hpp"

namespace dbcf {

enum class DistanceMode { kDijkstra, kEuclidean };

/// Variant kinds used to extend the training stream once the original
/// samples run out.
enum class Augmentation { kGaussianNoise, kHorizontalFlip, kAffine };

struct SolverConfig {
  double lambda = 1e-4;   // ridge weight
  double sigma0 = 0.25;   // initial penalty
  double eta = 0.7;       // gate threshold for the sigma schedule
  std::size_t neighbors = 5;  // M cap; effective M = min(neighbors, space size)
  DistanceMode distance_mode = DistanceMode::kDijkstra;
  bool squared_weights = false;   // use squared distances in the 1/D weighting
  bool incremental_only = false;  // each update sees only the newest batch

  void validate() const {
    if (lambda < 0.0) throw ArgumentError("SolverConfig: lambda must be >= 0");
    if (sigma0 < 0.0) throw ArgumentError("SolverConfig: sigma0 must be >= 0");
    if (eta <= 0.0 || eta >= 1.0)
      throw ArgumentError("SolverConfig: eta must lie in (0, 1)");
    if (neighbors < 1) throw ArgumentError("SolverConfig: neighbors must be >= 1");
  }
};

struct SubsetSchedule {
  std::size_t initial_size = 0;  // S0
  std::size_t step_size = 0;     // St, samples added per iteration
  std::size_t max_iters = 10;
  double tolerance = 1e-3;  // stop when eps < tolerance * ||f0||
  std::vector<Augmentation> augmentations = {Augmentation::kGaussianNoise,
                                             Augmentation::kHorizontalFlip,
                                             Augmentation::kAffine};

  void validate() const {
    if (initial_size < 1) throw ArgumentError("SubsetSchedule: S0 must be >= 1");
    if (step_size < 1) throw ArgumentError("SubsetSchedule: St must be >= 1");
    if (tolerance < 0.0)
      throw ArgumentError("SubsetSchedule: tolerance must be >= 0");
  }
};

/// Ordered collection of sub-filters. Unbounded during training (grows by
/// one per outer iteration); the tracker caps it as a ring buffer.
class ReconstructionSpace {
 public:
  explicit ReconstructionSpace(std::size_t neighbors, std::size_t capacity = 0)
      : neighbors_(neighbors), capacity_(capacity) {}

  void append(SpectralFilter f) {
    if (!subfilters_.empty()) {
      const SpectralFilter& head = subfilters_.front();
      if (f.rows() != head.rows() || f.cols() != head.cols() ||
          f.channels() != head.channels())
        throw DimensionError("ReconstructionSpace: sub-filter shape mismatch");
    }
    subfilters_.push_back(std::move(f));
    if (capacity_ > 0 && subfilters_.size() > capacity_) subfilters_.pop_front();
  }

  std::size_t size() const { return subfilters_.size(); }
  bool empty() const { return subfilters_.empty(); }
  std::size_t neighbors() const { return neighbors_; }
  std::size_t capacity() const { return capacity_; }
  const SpectralFilter& subfilter(std::size_t i) const { return subfilters_[i]; }

  /// Bytes held in sub-filter spectra; the solver's memory footprint is this
  /// plus constant-size state.
  std::size_t retained_bytes() const {
    std::size_t total = 0;
    for (const SpectralFilter& f : subfilters_)
      total += f.coefficient_count() * sizeof(std::complex<double>);
    return total;
  }

 private:
  std::deque<SpectralFilter> subfilters_;
  std::size_t neighbors_;
  std::size_t capacity_;
};

struct SolverState {
  std::size_t t = 0;
  double sigma = 0.25;
  double eps_best = std::numeric_limits<double>::infinity();
  double eta = 0.7;
  double lambda = 1e-4;
  SpectralFilter f_current;
  SpectralFilter f_prime;
};

/// Per-iteration record for the training trace.
struct IterationTrace {
  std::size_t t = 0;
  double eps = 0.0;
  double sigma = 0.0;  // penalty used by this iteration's solve
  std::vector<double> weights;
  bool euclidean_fallback = false;
};

/// Penalty gate from the sigma schedule: a sufficient residual drop keeps
/// sigma and records the new best; otherwise sigma doubles.
inline SolverState sigma_step(double eps, SolverState state) {
  if (eps < 0.0) throw ArgumentError("sigma_step: eps must be >= 0");
  if (eps < state.eta * state.eps_best) {
    state.eps_best = eps;
  } else {
    state.sigma *= 2.0;
  }
  return state;
}

/// One penalized solve: per bin, (sum x x^H + (lambda + sigma) I) f =
/// sum conj(x) y + sigma f_prime. With sigma = 0 this is plain MCCF.
inline SpectralFilter update_filter(std::span<const FeatureMap> samples,
                                    std::span<const DesiredResponse> labels,
                                    double sigma, const SpectralFilter& f_prime,
                                    double lambda) {
  detail::check_training_set(samples, labels);
  if (sigma < 0.0) throw ArgumentError("update_filter: sigma must be >= 0");
  NormalEquations eq(samples[0].rows(), samples[0].cols(),
                     samples[0].channels());
  for (std::size_t i = 0; i < samples.size(); ++i)
    eq.accumulate(samples[i], labels[i]);
  return eq.solve_penalized(lambda, sigma, &f_prime);
}

/// Filter -> point embedding: real and imaginary parts interleaved across
/// all channels, row-major.
inline PointVector flatten_filter(const SpectralFilter& f) {
  PointVector out;
  out.reserve(2 * f.coefficient_count());
  for (int k = 0; k < f.channels(); ++k)
    for (const std::complex<double>& v : f.spectrum(k)) {
      out.push_back(v.real());
      out.push_back(v.imag());
    }
  return out;
}

struct ProjectionInfo {
  std::vector<double> distances;
  std::vector<double> weights;
  bool euclidean_fallback = false;
};

/// Inverse-distance-weighted projection of a filter into the reconstruction
/// space: weights are Normalize(1/D_i), summing to 1, so near sub-filters
/// dominate. A zero distance short-circuits to the coincident sub-filter.
/// If every Dijkstra distance comes back infinite the projection falls back
/// to Euclidean distances and flags the event.
inline SpectralFilter reconstruct_projection(const SpectralFilter& f_new,
                                             const ReconstructionSpace& space,
                                             DistanceMode mode,
                                             bool squared_weights = false,
                                             ProjectionInfo* info = nullptr) {
  if (space.empty())
    throw ArgumentError("reconstruct_projection: empty reconstruction space");
  const std::size_t n = space.size();
  if (n == 1) {
    if (info) {
      info->distances = {0.0};
      info->weights = {1.0};
      info->euclidean_fallback = false;
    }
    return space.subfilter(0);
  }

  const PointVector target = flatten_filter(f_new);
  std::vector<PointVector> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    pts.push_back(flatten_filter(space.subfilter(i)));
  const PointSet point_set(std::move(pts));

  auto euclidean_all = [&] {
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i)
      d[i] = euclidean_distance(target, point_set[i]);
    return d;
  };

  std::vector<double> dist;
  bool fallback = false;
  if (mode == DistanceMode::kEuclidean) {
    dist = euclidean_all();
  } else {
    const std::size_t m = std::min(space.neighbors(), n);
    DistanceField field = dijkstra_distance(target, point_set, m);
    dist.assign(field.distances.begin(), field.distances.begin() + n);
    if (std::all_of(dist.begin(), dist.end(),
                    [](double d) { return std::isinf(d); })) {
      dist = euclidean_all();
      fallback = true;
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (dist[i] == 0.0) {
      if (info) {
        info->distances = dist;
        info->weights.assign(n, 0.0);
        info->weights[i] = 1.0;
        info->euclidean_fallback = fallback;
      }
      return space.subfilter(i);
    }
  }

  std::vector<double> weighting = dist;
  if (squared_weights)
    for (double& d : weighting) d *= d;
  std::vector<double> inv(n);
  double inv_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    inv[i] = 1.0 / weighting[i];  // 1/inf == 0 handles unreachable points
    inv_sum += inv[i];
  }
  const int rows = f_new.rows(), cols = f_new.cols(), channels = f_new.channels();
  std::vector<Spectrum2D> acc(channels, Spectrum2D(rows, cols));
  std::vector<double> weights(n);
  for (std::size_t i = 0; i < n; ++i) {
    weights[i] = inv[i] / inv_sum;
    if (weights[i] == 0.0) continue;
    const SpectralFilter& sub = space.subfilter(i);
    for (int k = 0; k < channels; ++k) {
      const Spectrum2D& s = sub.spectrum(k);
      for (std::size_t w = 0; w < s.size(); ++w) acc[k][w] += weights[i] * s[w];
    }
  }
  if (info) {
    info->distances = std::move(dist);
    info->weights = weights;
    info->euclidean_fallback = fallback;
  }
  return SpectralFilter(std::move(acc));
}

/// One training sample: features plus the matching Gaussian label.
struct TrainingSample {
  FeatureMap features;
  DesiredResponse label;
};

/// Ordered, deterministic sample source indexed from zero. Returns nullopt
/// once the stream (originals plus generated variants) is exhausted.
using SampleProvider =
    std::function<std::optional<TrainingSample>(std::size_t)>;

/// Seed state and space from MCCF on the initial subset: f0 = f0' =
/// train_mccf(first S0 samples), t = 0, eps_best = +inf.
inline std::pair<SolverState, ReconstructionSpace> initialize(
    std::span<const FeatureMap> samples, std::span<const DesiredResponse> labels,
    const SolverConfig& cfg) {
  cfg.validate();
  TrainConfig train_cfg;
  train_cfg.lambda = cfg.lambda;
  SpectralFilter f0 = train_mccf(samples, labels, train_cfg);
  SolverState state;
  state.t = 0;
  state.sigma = cfg.sigma0;
  state.eps_best = std::numeric_limits<double>::infinity();
  state.eta = cfg.eta;
  state.lambda = cfg.lambda;
  state.f_current = f0;
  state.f_prime = f0;
  ReconstructionSpace space(cfg.neighbors);
  space.append(std::move(f0));
  return {std::move(state), std::move(space)};
}

struct DbcfResult {
  SpectralFilter filter;
  std::vector<IterationTrace> trace;
  bool exhausted_early = false;  // stream ran out before max_iters
  std::size_t subfilter_count = 0;
  std::size_t retained_bytes = 0;  // sub-filter spectra held at completion
};

/// Iterative penalty-method training (the DBCF loop).
///
/// Each outer iteration grows the accumulated subset by St samples, solves
/// the penalized system against the previous projection f', measures the
/// iterate residual, runs the sigma gate, and projects the new filter into
/// the space of earlier sub-filters before appending it. Per-bin Gram
/// accumulators grow incrementally, so each sample is transformed exactly
/// once and memory stays at O(T D) for T sub-filters.
inline DbcfResult dbcf_train(const SampleProvider& provider,
                             const SubsetSchedule& schedule,
                             const SolverConfig& cfg) {
  cfg.validate();
  schedule.validate();

  std::vector<FeatureMap> init_samples;
  std::vector<DesiredResponse> init_labels;
  std::size_t cursor = 0;
  for (; cursor < schedule.initial_size; ++cursor) {
    std::optional<TrainingSample> s = provider(cursor);
    if (!s)
      throw ArgumentError("dbcf_train: dataset smaller than the initial subset (" +
                          std::to_string(schedule.initial_size) + ")");
    init_samples.push_back(std::move(s->features));
    init_labels.push_back(std::move(s->label));
  }

  auto [state, space] = initialize(init_samples, init_labels, cfg);
  const double f0_norm = state.f_current.norm();

  NormalEquations eq(init_samples[0].rows(), init_samples[0].cols(),
                     init_samples[0].channels());
  if (!cfg.incremental_only)
    for (std::size_t i = 0; i < init_samples.size(); ++i)
      eq.accumulate(init_samples[i], init_labels[i]);
  init_samples.clear();
  init_labels.clear();

  DbcfResult result;
  for (std::size_t t = 0; t < schedule.max_iters; ++t) {
    if (cfg.incremental_only)
      eq = NormalEquations(state.f_current.rows(), state.f_current.cols(),
                           state.f_current.channels());
    std::size_t added = 0;
    for (std::size_t i = 0; i < schedule.step_size; ++i) {
      std::optional<TrainingSample> s = provider(cursor);
      if (!s) break;
      eq.accumulate(s->features, s->label);
      ++cursor;
      ++added;
    }
    if (added == 0) {
      result.exhausted_early = true;
      break;
    }

    SpectralFilter f_next =
        eq.solve_penalized(cfg.lambda, state.sigma, &state.f_prime);
    const double eps = distance(f_next, state.f_current);
    const double sigma_used = state.sigma;
    state = sigma_step(eps, std::move(state));

    ProjectionInfo info;
    SpectralFilter f_prime_next = reconstruct_projection(
        f_next, space, cfg.distance_mode, cfg.squared_weights, &info);
    space.append(f_next);

    IterationTrace rec;
    rec.t = t;
    rec.eps = eps;
    rec.sigma = sigma_used;
    rec.weights = std::move(info.weights);
    rec.euclidean_fallback = info.euclidean_fallback;
    result.trace.push_back(std::move(rec));

    state.t = t + 1;
    state.f_current = std::move(f_next);
    state.f_prime = std::move(f_prime_next);

    if (eps < schedule.tolerance * f0_norm) break;
  }

  result.filter = std::move(state.f_current);
  result.subfilter_count = space.size();
  result.retained_bytes = space.retained_bytes();
  return result;
}

}  // namespace dbcf
