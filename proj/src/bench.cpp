#include "stargraph/bench.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>

#include "stargraph/error.hpp"
#include "stargraph/nn.hpp"

namespace stargraph::bench {
namespace {

using clock = std::chrono::steady_clock;
using nlohmann::json;

// Target duration of one timed batch; far above steady_clock granularity.
constexpr double kMinBatchNs = 200'000.0;
constexpr std::size_t kMaxBuildsPerBatch = 1u << 20;

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double clock_resolution_ns() {
  double best = 1e9;
  for (int i = 0; i < 200; ++i) {
    const auto a = clock::now();
    auto b = clock::now();
    while (b == a) b = clock::now();
    best = std::min(best, std::chrono::duration<double, std::nano>(b - a).count());
  }
  return best;
}

double time_batch_ns(const PointFrame& frame, const GraphParams& params, std::size_t builds) {
  std::size_t sink = 0;
  const auto start = clock::now();
  for (std::size_t i = 0; i < builds; ++i) sink += build_graph(frame, params).edge_count();
  const auto stop = clock::now();
  // keep the builds observable
  volatile std::size_t keep = sink;
  (void)keep;
  return std::chrono::duration<double, std::nano>(stop - start).count();
}

}  // namespace

LogLogFit fit_loglog(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ConfigError("log-log fit needs >= 2 points");
  const std::size_t n = x.size();
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw ConfigError("log-log fit needs positive values");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx == 0.0) throw ConfigError("log-log fit needs distinct x values");
  LogLogFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (n > 2) {
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
      sse += r * r;
    }
    fit.slope_stderr = std::sqrt(sse / static_cast<double>(n - 2) / sxx);
  }
  return fit;
}

PointFrame random_frame(std::size_t n, std::uint64_t seed) {
  nn::Rng rng(seed);
  PointFrame f;
  f.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    f.points.push_back({4.0 * nn::uniform01(rng), 4.0 * nn::uniform01(rng),
                        4.0 * nn::uniform01(rng)});
  }
  return f;
}

ScalingReport time_construction(const GraphParams& params, std::span<const std::size_t> n_grid,
                                std::size_t reps, std::uint64_t seed) {
  params.validate();
  if (n_grid.size() < 5) throw ConfigError("scaling grid needs at least 5 sizes");
  if (reps < 20) throw ConfigError("scaling needs at least 20 reps per size");
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    if (n_grid[i] < 2) throw ConfigError("grid sizes must be >= 2 points");
    if (i > 0 && n_grid[i] <= n_grid[i - 1]) {
      throw ConfigError("scaling grid must be strictly increasing");
    }
  }
  const double resolution = clock_resolution_ns();

  ScalingReport report;
  report.type = params.type;
  for (std::size_t gi = 0; gi < n_grid.size(); ++gi) {
    const std::size_t n = n_grid[gi];
    const PointFrame frame = random_frame(n, nn::derive_seed(seed, n));

    // Calibrate the batch length, doubling until it is long enough.
    std::size_t builds = 1;
    double probe = time_batch_ns(frame, params, builds);
    while (probe < kMinBatchNs && builds < kMaxBuildsPerBatch) {
      builds *= 2;
      probe = time_batch_ns(frame, params, builds);
    }
    if (probe < 100.0 * resolution) {
      report.dropped_sizes.push_back(n);
      continue;
    }

    std::vector<double> per_build(reps);
    for (std::size_t r = 0; r < reps; ++r) {
      per_build[r] = time_batch_ns(frame, params, builds) / static_cast<double>(builds);
    }
    ScalingPoint pt;
    pt.n_points = n;
    pt.reps = reps;
    pt.builds_per_rep = builds;
    pt.median_ns = median(per_build);
    pt.mean_ns = std::accumulate(per_build.begin(), per_build.end(), 0.0) /
                 static_cast<double>(reps);
    double var = 0.0;
    for (double v : per_build) var += (v - pt.mean_ns) * (v - pt.mean_ns);
    pt.stddev_ns = reps > 1 ? std::sqrt(var / static_cast<double>(reps - 1)) : 0.0;
    report.grid.push_back(pt);
  }

  if (report.grid.size() >= 2) {
    std::vector<double> xs, ys;
    for (const auto& p : report.grid) {
      xs.push_back(static_cast<double>(p.n_points));
      ys.push_back(p.median_ns);
    }
    const LogLogFit fit = fit_loglog(xs, ys);
    report.slope = fit.slope;
    report.intercept = fit.intercept;
    double half = 0.0;
    if (xs.size() > 2) {
      const boost::math::students_t dist(static_cast<double>(xs.size() - 2));
      half = boost::math::quantile(boost::math::complement(dist, 0.025)) * fit.slope_stderr;
    }
    report.slope_ci_low = fit.slope - half;
    report.slope_ci_high = fit.slope + half;
  }
  return report;
}

std::size_t count_edges(const GraphParams& params, std::size_t n, std::uint64_t seed) {
  params.validate();
  return build_graph(random_frame(n, seed), params).edge_count();
}

std::size_t expected_edges(GraphType type, std::size_t n) {
  switch (type) {
    case GraphType::DStar: return n;
    case GraphType::UStar: return 2 * n;
    case GraphType::Fc: return n == 0 ? 0 : n * (n - 1);
    case GraphType::Empty: return 0;
    case GraphType::Knn:
    case GraphType::Radius:
      break;
  }
  throw ConfigError(std::string(to_string(type)) + " graphs have no closed-form edge count");
}

LatencyReport time_inference(const DdgnnModel& model, const std::vector<GraphSequence>& data,
                             std::size_t reps) {
  if (data.empty()) throw ConfigError("inference timing needs at least one sequence");
  if (reps < 1) throw ConfigError("inference timing needs reps >= 1");
  std::size_t sink = 0;
  for (const GraphSequence& gs : data) sink += predict(model, gs).label;
  LatencyReport report;
  for (std::size_t r = 0; r < reps; ++r) {
    for (const GraphSequence& gs : data) {
      const auto start = clock::now();
      sink += predict(model, gs).label;
      report.samples_ms.push_back(
          std::chrono::duration<double, std::milli>(clock::now() - start).count());
    }
  }
  volatile std::size_t keep = sink;
  (void)keep;
  report.mean_ms = std::accumulate(report.samples_ms.begin(), report.samples_ms.end(), 0.0) /
                   static_cast<double>(report.samples_ms.size());
  std::vector<double> sorted = report.samples_ms;
  std::sort(sorted.begin(), sorted.end());
  // nearest-rank percentile
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(sorted.size())));
  report.p95_ms = sorted[std::max<std::size_t>(rank, 1) - 1];
  return report;
}

json ScalingReport::to_json() const {
  json pts = json::array();
  for (const auto& p : grid) {
    pts.push_back({{"n_points", p.n_points},
                   {"median_ns", p.median_ns},
                   {"mean_ns", p.mean_ns},
                   {"stddev_ns", p.stddev_ns},
                   {"reps", p.reps},
                   {"builds_per_rep", p.builds_per_rep}});
  }
  return json{{"graph_type", to_string(type)},
              {"grid", std::move(pts)},
              {"slope", slope},
              {"intercept", intercept},
              {"slope_ci", {slope_ci_low, slope_ci_high}},
              {"dropped_sizes", dropped_sizes}};
}

json LatencyReport::to_json() const {
  return json{{"mean_ms", mean_ms}, {"p95_ms", p95_ms}, {"samples", samples_ms.size()}};
}

void write_scaling_csv(std::ostream& out, std::span<const ScalingReport> reports) {
  out << "graph_type,n_points,median_ns,mean_ns,stddev_ns,reps,slope\n";
  for (const auto& r : reports) {
    for (const auto& p : r.grid) {
      out << to_string(r.type) << ',' << p.n_points << ',' << p.median_ns << ',' << p.mean_ns
          << ',' << p.stddev_ns << ',' << p.reps << ',' << r.slope << '\n';
    }
  }
}

void write_scaling_tsv(std::ostream& out, std::span<const ScalingReport> reports) {
  // one gnuplot index block per graph type
  for (const auto& r : reports) {
    out << "# " << to_string(r.type) << " slope=" << r.slope << "\n";
    for (const auto& p : r.grid) out << p.n_points << '\t' << p.median_ns << '\n';
    out << "\n\n";
  }
}

}  // namespace stargraph::bench
