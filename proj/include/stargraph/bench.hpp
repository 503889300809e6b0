#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "json.hpp"
#include "stargraph/graph.hpp"
#include "stargraph/model.hpp"

namespace stargraph::bench {

struct ScalingPoint {
  std::size_t n_points = 0;
  double median_ns = 0.0;
  double mean_ns = 0.0;
  double stddev_ns = 0.0;
  std::size_t reps = 0;
  std::size_t builds_per_rep = 0;
};

struct ScalingReport {
  GraphType type = GraphType::DStar;
  std::vector<ScalingPoint> grid;
  double slope = 0.0;          // least squares of log(median) on log(n)
  double intercept = 0.0;
  double slope_ci_low = 0.0;   // 95% t interval
  double slope_ci_high = 0.0;
  std::vector<std::size_t> dropped_sizes;  // below timer resolution

  nlohmann::json to_json() const;
};

struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
};

/// Ordinary least squares of log(y) on log(x). Needs >= 2 points.
LogLogFit fit_loglog(std::span<const double> x, std::span<const double> y);

/// Uniform random points in a 4 m cube.
PointFrame random_frame(std::size_t n, std::uint64_t seed);

/// Times graph construction on random frames of every grid size. Each rep
/// times a batch of builds long enough to dwarf clock resolution; the
/// per-build median over reps feeds the log-log fit. Needs a strictly
/// increasing grid of at least 5 sizes, each >= 2, and reps >= 20.
ScalingReport time_construction(const GraphParams& params, std::span<const std::size_t> n_grid,
                                std::size_t reps, std::uint64_t seed);

/// Exact edge count for a random n-point frame.
std::size_t count_edges(const GraphParams& params, std::size_t n, std::uint64_t seed);

/// Closed-form edge count for types that have one (DStar, UStar, Fc, Empty).
std::size_t expected_edges(GraphType type, std::size_t n);

struct LatencyReport {
  std::vector<double> samples_ms;
  double mean_ms = 0.0;
  double p95_ms = 0.0;

  nlohmann::json to_json() const;
};

/// Inference-mode forward passes, one sequence at a time. One untimed
/// warmup pass over the set precedes `reps` timed passes.
LatencyReport time_inference(const DdgnnModel& model, const std::vector<GraphSequence>& data,
                             std::size_t reps);

void write_scaling_csv(std::ostream& out, std::span<const ScalingReport> reports);
void write_scaling_tsv(std::ostream& out, std::span<const ScalingReport> reports);

}  // namespace stargraph::bench
