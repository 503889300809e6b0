#include "stargraph/graph.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <string>

#include "stargraph/error.hpp"
#include "stargraph/kernels.hpp"

namespace stargraph {
namespace {

constexpr std::array<std::pair<std::string_view, GraphType>, 6> kGraphNames{{
    {"dstar", GraphType::DStar},
    {"ustar", GraphType::UStar},
    {"knn", GraphType::Knn},
    {"radius", GraphType::Radius},
    {"fc", GraphType::Fc},
    {"empty", GraphType::Empty},
}};

struct Coords {
  explicit Coords(std::span<const Point3> pts) : xs(pts.size()), ys(pts.size()), zs(pts.size()) {
    for (std::size_t i = 0; i < pts.size(); ++i) {
      xs[i] = pts[i].x;
      ys[i] = pts[i].y;
      zs[i] = pts[i].z;
    }
  }
  void distances_from(std::size_t i, std::vector<double>& out) const {
    kernels::active().squared_distances(xs[i], ys[i], zs[i], xs.data(), ys.data(),
                                        zs.data(), out.data(), xs.size());
  }
  std::vector<double> xs, ys, zs;
};

std::uint32_t as_index(std::size_t i) { return static_cast<std::uint32_t>(i); }

}  // namespace

std::string_view to_string(GraphType type) {
  for (const auto& [name, t] : kGraphNames) {
    if (t == type) return name;
  }
  return "unknown";
}

std::optional<GraphType> parse_graph_type(std::string_view name) {
  for (const auto& [n, t] : kGraphNames) {
    if (n == name) return t;
  }
  return std::nullopt;
}

std::string_view graph_type_names() { return "dstar, ustar, knn, radius, fc, empty"; }

std::string_view to_string(CenterMode::Kind kind) {
  switch (kind) {
    case CenterMode::Kind::Static: return "static";
    case CenterMode::Kind::Mean: return "mean";
    case CenterMode::Kind::Zero: return "zero";
  }
  return "unknown";
}

std::optional<CenterMode::Kind> parse_center_kind(std::string_view name) {
  if (name == "static") return CenterMode::Kind::Static;
  if (name == "mean") return CenterMode::Kind::Mean;
  if (name == "zero") return CenterMode::Kind::Zero;
  return std::nullopt;
}

void GraphParams::validate() const {
  if (type == GraphType::Knn && k < 1) throw ConfigError("knn graph needs k >= 1");
  if (type == GraphType::Radius && !(radius > 0.0)) {
    throw ConfigError("radius graph needs r > 0");
  }
  if (is_star(type) && center.kind == CenterMode::Kind::Static && !center.fixed.finite()) {
    throw ConfigError("static center must be finite");
  }
}

FrameGraph::FrameGraph(std::vector<Point3> nodes, std::vector<std::uint32_t> offsets,
                       std::vector<std::uint32_t> indices, bool has_center)
    : nodes_(std::move(nodes)),
      offsets_(std::move(offsets)),
      indices_(std::move(indices)),
      has_center_(has_center) {
  const std::size_t n = nodes_.size();
  if (offsets_.size() != n + 1 || offsets_.front() != 0 || offsets_.back() != indices_.size()) {
    throw ConfigError("frame graph offsets do not describe the index array");
  }
  if (has_center_ && n == 0) throw ConfigError("center graph needs a center node");
  for (std::size_t i = 0; i < n; ++i) {
    if (offsets_[i] > offsets_[i + 1]) throw ConfigError("frame graph offsets not monotone");
    for (std::uint32_t j : neighbors(i)) {
      if (j >= n) throw ConfigError("neighbor index out of range");
      if (j == i) throw ConfigError("self-loops are not stored as edges");
    }
  }
}

FrameGraph FrameGraph::from_neighbor_sets(std::vector<Point3> nodes,
                                          const std::vector<std::vector<std::uint32_t>>& sets,
                                          bool has_center) {
  if (sets.size() != nodes.size()) throw ConfigError("one neighbor set per node required");
  std::vector<std::uint32_t> offsets{0};
  std::vector<std::uint32_t> indices;
  for (const auto& s : sets) {
    indices.insert(indices.end(), s.begin(), s.end());
    offsets.push_back(as_index(indices.size()));
  }
  return FrameGraph(std::move(nodes), std::move(offsets), std::move(indices), has_center);
}

std::vector<std::vector<std::uint32_t>> FrameGraph::neighbor_sets() const {
  std::vector<std::vector<std::uint32_t>> sets(node_count());
  for (std::size_t i = 0; i < node_count(); ++i) {
    auto nb = neighbors(i);
    sets[i].assign(nb.begin(), nb.end());
  }
  return sets;
}

Tensor2 FrameGraph::features() const {
  Tensor2 out(node_count(), 3);
  for (std::size_t i = 0; i < node_count(); ++i) {
    out(i, 0) = nodes_[i].x;
    out(i, 1) = nodes_[i].y;
    out(i, 2) = nodes_[i].z;
  }
  return out;
}

Point3 center_point(const PointFrame& frame, const CenterMode& mode) {
  switch (mode.kind) {
    case CenterMode::Kind::Static:
      return mode.fixed;
    case CenterMode::Kind::Zero:
      return {};
    case CenterMode::Kind::Mean: {
      if (frame.empty()) return {};
      Point3 sum;
      for (const Point3& p : frame.points) {
        sum.x += p.x;
        sum.y += p.y;
        sum.z += p.z;
      }
      const double n = static_cast<double>(frame.size());
      return {sum.x / n, sum.y / n, sum.z / n};
    }
  }
  return mode.fixed;
}

namespace {

std::vector<Point3> star_nodes(const PointFrame& frame, const Point3& center) {
  std::vector<Point3> nodes;
  nodes.reserve(frame.size() + 1);
  nodes.push_back(center);
  nodes.insert(nodes.end(), frame.points.begin(), frame.points.end());
  return nodes;
}

}  // namespace

FrameGraph build_dstar(const PointFrame& frame, const Point3& center) {
  const std::size_t n = frame.size();
  std::vector<std::uint32_t> offsets(n + 2);
  offsets[0] = 0;
  offsets[1] = 0;  // center aggregates nothing
  for (std::size_t i = 1; i <= n; ++i) offsets[i + 1] = as_index(i);
  std::vector<std::uint32_t> indices(n, 0);
  return FrameGraph(star_nodes(frame, center), std::move(offsets), std::move(indices), true);
}

FrameGraph build_ustar(const PointFrame& frame, const Point3& center) {
  const std::size_t n = frame.size();
  std::vector<std::uint32_t> offsets(n + 2);
  std::vector<std::uint32_t> indices(2 * n);
  offsets[0] = 0;
  offsets[1] = as_index(n);
  std::iota(indices.begin(), indices.begin() + static_cast<std::ptrdiff_t>(n), 1u);
  for (std::size_t i = 1; i <= n; ++i) {
    offsets[i + 1] = as_index(n + i);
    indices[n + i - 1] = 0;
  }
  return FrameGraph(star_nodes(frame, center), std::move(offsets), std::move(indices), true);
}

FrameGraph build_knn(const PointFrame& frame, std::size_t k) {
  if (k < 1) throw ConfigError("knn graph needs k >= 1");
  const std::size_t n = frame.size();
  const std::size_t take = n == 0 ? 0 : std::min(k, n - 1);
  const Coords coords(frame.points);
  std::vector<double> d2(n);
  std::vector<std::uint32_t> order;
  order.reserve(n);
  std::vector<std::uint32_t> offsets{0};
  offsets.reserve(n + 1);
  std::vector<std::uint32_t> indices;
  indices.reserve(n * take);
  for (std::size_t i = 0; i < n; ++i) {
    coords.distances_from(i, d2);
    order.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) order.push_back(as_index(j));
    }
    const auto closer = [&](std::uint32_t a, std::uint32_t b) {
      return d2[a] < d2[b] || (d2[a] == d2[b] && a < b);
    };
    const auto mid = order.begin() + static_cast<std::ptrdiff_t>(take);
    std::nth_element(order.begin(), mid, order.end(), closer);
    std::sort(order.begin(), mid, closer);
    indices.insert(indices.end(), order.begin(), mid);
    offsets.push_back(as_index(indices.size()));
  }
  return FrameGraph(frame.points, std::move(offsets), std::move(indices), false);
}

FrameGraph build_radius(const PointFrame& frame, double r) {
  if (!(r > 0.0)) throw ConfigError("radius graph needs r > 0");
  const std::size_t n = frame.size();
  const double r2 = r * r;
  const Coords coords(frame.points);
  std::vector<double> d2(n);
  std::vector<std::uint32_t> offsets{0};
  offsets.reserve(n + 1);
  std::vector<std::uint32_t> indices;
  for (std::size_t i = 0; i < n; ++i) {
    coords.distances_from(i, d2);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && d2[j] <= r2) indices.push_back(as_index(j));
    }
    offsets.push_back(as_index(indices.size()));
  }
  return FrameGraph(frame.points, std::move(offsets), std::move(indices), false);
}

FrameGraph build_fc(const PointFrame& frame) {
  const std::size_t n = frame.size();
  std::vector<std::uint32_t> offsets(n + 1);
  std::vector<std::uint32_t> indices;
  indices.reserve(n == 0 ? 0 : n * (n - 1));
  offsets[0] = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) indices.push_back(as_index(j));
    }
    offsets[i + 1] = as_index(indices.size());
  }
  return FrameGraph(frame.points, std::move(offsets), std::move(indices), false);
}

FrameGraph build_empty(const PointFrame& frame) {
  return FrameGraph(frame.points, std::vector<std::uint32_t>(frame.size() + 1, 0), {}, false);
}

FrameGraph build_graph(const PointFrame& frame, const GraphParams& params) {
  switch (params.type) {
    case GraphType::DStar: return build_dstar(frame, center_point(frame, params.center));
    case GraphType::UStar: return build_ustar(frame, center_point(frame, params.center));
    case GraphType::Knn: return build_knn(frame, params.k);
    case GraphType::Radius: return build_radius(frame, params.radius);
    case GraphType::Fc: return build_fc(frame);
    case GraphType::Empty: return build_empty(frame);
  }
  throw ConfigError("unknown graph type");
}

GraphSequence build_sequence(const PointSequence& seq, const GraphParams& params) {
  params.validate();
  GraphSequence out;
  out.label = seq.label;
  out.subject_id = seq.subject_id;
  out.graphs.reserve(seq.frames.size());
  for (const PointFrame& frame : seq.frames) out.graphs.push_back(build_graph(frame, params));
  return out;
}

Tensor2 adjacency_matrix(const FrameGraph& g) {
  Tensor2 a(g.node_count(), g.node_count());
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    for (std::uint32_t j : g.neighbors(i)) a(i, j) = 1.0;
  }
  return a;
}

std::vector<std::vector<std::uint32_t>> neighbor_sets_from_adjacency(const Tensor2& a) {
  if (a.rows() != a.cols()) throw ShapeError("adjacency matrix must be square");
  std::vector<std::vector<std::uint32_t>> sets(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      if (a(i, j) != 0.0) sets[i].push_back(as_index(j));
    }
  }
  return sets;
}

void write_adjacency_csv(std::ostream& out, const FrameGraph& g) {
  const Tensor2 a = adjacency_matrix(g);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      if (j != 0) out << ',';
      out << static_cast<int>(a(i, j));
    }
    out << '\n';
  }
}

}  // namespace stargraph
