#pragma once

#include <cstddef>
#include <vector>

namespace stargraph {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  bool finite() const noexcept;
  friend bool operator==(const Point3&, const Point3&) = default;
};

/// Points detected at one radar timestamp. The count varies frame to frame
/// and may be zero after preprocessing.
struct PointFrame {
  std::vector<Point3> points;
  std::size_t timestamp_index = 0;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }
  friend bool operator==(const PointFrame&, const PointFrame&) = default;
};

/// One labelled activity instance of a fixed number of frames.
struct PointSequence {
  std::vector<PointFrame> frames;
  int label = 0;
  int subject_id = 0;

  friend bool operator==(const PointSequence&, const PointSequence&) = default;
};

/// Axis-aligned detection volume. Bounds are inclusive on both ends.
struct RangeBounds {
  double x_min = 0.5;
  double x_max = 5.0;
  double y_min = -1.2;
  double y_max = 6.5;
  double z_min = -1.0;
  double z_max = 2.5;

  bool valid() const noexcept;
  bool contains(const Point3& p) const noexcept;
};

struct DbscanParams {
  double eps = 0.35;
  std::size_t min_pts = 2;
};

/// Clusters are listed in discovery order (ascending index of their first
/// core point); member indices within a cluster are ascending.
struct DbscanResult {
  std::vector<std::vector<std::size_t>> clusters;
  std::vector<std::size_t> noise;
};

PointFrame range_filter(const PointFrame& frame, const RangeBounds& bounds);

/// Euclidean DBSCAN. A point is core when at least `min_pts` points
/// (itself included) lie within `eps`. A border point reachable from several
/// clusters joins the one discovered first.
DbscanResult dbscan(const PointFrame& frame, double eps, std::size_t min_pts);

/// Points of the largest cluster in input order; empty if everything is
/// noise. Ties go to the cluster holding the lowest point index.
PointFrame largest_cluster(const DbscanResult& clusters, const PointFrame& frame);

/// range_filter -> dbscan -> largest_cluster on every frame. Frame count,
/// label and subject are preserved; frames may come out empty.
PointSequence preprocess_sequence(const PointSequence& raw, const RangeBounds& bounds,
                                  double eps, std::size_t min_pts);

}  // namespace stargraph
