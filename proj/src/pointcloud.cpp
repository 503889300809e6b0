#include "stargraph/pointcloud.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stargraph/error.hpp"
#include "stargraph/kernels.hpp"

namespace stargraph {

bool Point3::finite() const noexcept {
  return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
}

bool RangeBounds::valid() const noexcept {
  return x_min < x_max && y_min < y_max && z_min < z_max;
}

bool RangeBounds::contains(const Point3& p) const noexcept {
  return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max &&
         p.z >= z_min && p.z <= z_max;
}

PointFrame range_filter(const PointFrame& frame, const RangeBounds& bounds) {
  if (!bounds.valid()) throw ConfigError("range bounds need min < max on every axis");
  PointFrame out;
  out.timestamp_index = frame.timestamp_index;
  std::copy_if(frame.points.begin(), frame.points.end(), std::back_inserter(out.points),
               [&](const Point3& p) { return bounds.contains(p); });
  return out;
}

DbscanResult dbscan(const PointFrame& frame, double eps, std::size_t min_pts) {
  if (!(eps > 0.0)) throw ConfigError("dbscan eps must be > 0");
  if (min_pts < 1) throw ConfigError("dbscan min_pts must be >= 1");

  const std::size_t n = frame.size();
  std::vector<double> xs(n), ys(n), zs(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = frame.points[i].x;
    ys[i] = frame.points[i].y;
    zs[i] = frame.points[i].z;
  }

  // Brute-force region queries; frames hold tens of points.
  const double eps2 = eps * eps;
  const auto& k = kernels::active();
  std::vector<double> d2(n);
  std::vector<std::vector<std::size_t>> neighborhoods(n);
  for (std::size_t i = 0; i < n; ++i) {
    k.squared_distances(xs[i], ys[i], zs[i], xs.data(), ys.data(), zs.data(), d2.data(), n);
    for (std::size_t j = 0; j < n; ++j) {
      if (d2[j] <= eps2) neighborhoods[i].push_back(j);
    }
  }

  constexpr std::size_t kUnassigned = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> label(n, kUnassigned);
  DbscanResult result;
  std::vector<std::size_t> frontier;
  for (std::size_t seed = 0; seed < n; ++seed) {
    if (label[seed] != kUnassigned || neighborhoods[seed].size() < min_pts) continue;
    const std::size_t cid = result.clusters.size();
    result.clusters.emplace_back();
    label[seed] = cid;
    frontier.assign(1, seed);
    while (!frontier.empty()) {
      const std::size_t p = frontier.back();
      frontier.pop_back();
      result.clusters[cid].push_back(p);
      if (neighborhoods[p].size() < min_pts) continue;  // border: no expansion
      for (std::size_t q : neighborhoods[p]) {
        if (label[q] != kUnassigned) continue;
        label[q] = cid;
        frontier.push_back(q);
      }
    }
    std::sort(result.clusters[cid].begin(), result.clusters[cid].end());
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (label[i] == kUnassigned) result.noise.push_back(i);
  }
  return result;
}

PointFrame largest_cluster(const DbscanResult& clusters, const PointFrame& frame) {
  PointFrame out;
  out.timestamp_index = frame.timestamp_index;
  const std::vector<std::size_t>* best = nullptr;
  for (const auto& c : clusters.clusters) {
    if (c.empty()) continue;
    if (best == nullptr || c.size() > best->size() ||
        (c.size() == best->size() && c.front() < best->front())) {
      best = &c;
    }
  }
  if (best == nullptr) return out;
  out.points.reserve(best->size());
  for (std::size_t idx : *best) {
    if (idx >= frame.size()) throw ConfigError("cluster index out of range for frame");
    out.points.push_back(frame.points[idx]);
  }
  return out;
}

PointSequence preprocess_sequence(const PointSequence& raw, const RangeBounds& bounds,
                                  double eps, std::size_t min_pts) {
  if (!bounds.valid()) throw ConfigError("range bounds need min < max on every axis");
  PointSequence out;
  out.label = raw.label;
  out.subject_id = raw.subject_id;
  out.frames.reserve(raw.frames.size());
  for (const PointFrame& frame : raw.frames) {
    PointFrame kept = range_filter(frame, bounds);
    out.frames.push_back(largest_cluster(dbscan(kept, eps, min_pts), kept));
  }
  return out;
}

}  // namespace stargraph
