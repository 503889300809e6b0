#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

#include "stargraph/pointcloud.hpp"
#include "stargraph/tensor.hpp"

namespace stargraph {

enum class GraphType { DStar, UStar, Knn, Radius, Fc, Empty };

std::string_view to_string(GraphType type);
std::optional<GraphType> parse_graph_type(std::string_view name);
/// "dstar, ustar, knn, radius, fc, empty"
std::string_view graph_type_names();

inline bool is_star(GraphType type) {
  return type == GraphType::DStar || type == GraphType::UStar;
}

/// Where the star center sits for a frame.
struct CenterMode {
  enum class Kind { Static, Mean, Zero };
  Kind kind = Kind::Static;
  Point3 fixed{0.0, 1.0, 0.0};
};

std::string_view to_string(CenterMode::Kind kind);
std::optional<CenterMode::Kind> parse_center_kind(std::string_view name);

/// Graph type plus the constructor parameters that apply to it.
struct GraphParams {
  GraphType type = GraphType::DStar;
  std::size_t k = 5;
  double radius = 0.5;
  CenterMode center;

  /// Throws ConfigError for k < 1 or radius <= 0.
  void validate() const;
};

/// Per-frame graph in compressed form. neighbors(i) lists the nodes whose
/// features are aggregated into node i. Self-loops are never stored; node 0
/// is the center when has_center() is true.
class FrameGraph {
 public:
  FrameGraph() { offsets_.push_back(0); }
  FrameGraph(std::vector<Point3> nodes, std::vector<std::uint32_t> offsets,
             std::vector<std::uint32_t> indices, bool has_center);

  static FrameGraph from_neighbor_sets(std::vector<Point3> nodes,
                                       const std::vector<std::vector<std::uint32_t>>& sets,
                                       bool has_center);

  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t edge_count() const noexcept { return indices_.size(); }
  bool has_center() const noexcept { return has_center_; }

  std::span<const Point3> nodes() const noexcept { return nodes_; }
  std::span<const std::uint32_t> neighbors(std::size_t i) const {
    return {indices_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }
  std::vector<std::vector<std::uint32_t>> neighbor_sets() const;

  /// Node coordinates as an n x 3 tensor.
  Tensor2 features() const;

  friend bool operator==(const FrameGraph&, const FrameGraph&) = default;

 private:
  std::vector<Point3> nodes_;
  std::vector<std::uint32_t> offsets_;
  std::vector<std::uint32_t> indices_;
  bool has_center_ = false;
};

struct GraphSequence {
  std::vector<FrameGraph> graphs;
  int label = 0;
  int subject_id = 0;
};

Point3 center_point(const PointFrame& frame, const CenterMode& mode);

FrameGraph build_dstar(const PointFrame& frame, const Point3& center);
FrameGraph build_ustar(const PointFrame& frame, const Point3& center);
/// Brute-force k nearest neighbors; distance ties go to the lower index.
/// Uses every other point when the frame has k or fewer points.
FrameGraph build_knn(const PointFrame& frame, std::size_t k);
/// Brute-force radius graph; d <= r connects.
FrameGraph build_radius(const PointFrame& frame, double r);
FrameGraph build_fc(const PointFrame& frame);
FrameGraph build_empty(const PointFrame& frame);

FrameGraph build_graph(const PointFrame& frame, const GraphParams& params);

/// Validates params, then builds every frame with the same constructor.
GraphSequence build_sequence(const PointSequence& seq, const GraphParams& params);

/// A(i, j) = 1 iff j is in neighbors(i).
Tensor2 adjacency_matrix(const FrameGraph& g);
std::vector<std::vector<std::uint32_t>> neighbor_sets_from_adjacency(const Tensor2& a);
void write_adjacency_csv(std::ostream& out, const FrameGraph& g);

}  // namespace stargraph
