#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "stargraph/graph.hpp"
#include "stargraph/pointcloud.hpp"

namespace stargraph {

/// In-memory form of a `pcseq` JSON-lines file.
struct Dataset {
  std::size_t seq_len = 50;
  std::size_t class_count = 0;
  std::vector<PointSequence> sequences;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

inline constexpr int kDatasetVersion = 1;

/// Header line {"format":"pcseq","version":1,"seq_len":N,"classes":m}, then
/// one {"label","subject","frames":[[[x,y,z],...],...]} object per line.
void write_dataset(std::ostream& out, const Dataset& ds);
/// Validates the header and every record; errors carry the 1-based line.
Dataset read_dataset(std::istream& in);

/// Paths ending in ".gz" are gzip-compressed transparently.
void save_dataset(const std::filesystem::path& path, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& path);

struct SubjectSplit {
  Dataset train;
  Dataset val;
  Dataset test;
  std::set<int> unassigned_subjects;  // present in the data, in no split
};

/// Partitions records by subject id. Subject sets must be disjoint and all
/// three non-empty.
SubjectSplit split_by_subject(const Dataset& ds, const std::set<int>& train_subjects,
                              const std::set<int>& val_subjects,
                              const std::set<int>& test_subjects);

// ---------------------------------------------------------- graph export ---

/// `pcgraph` JSON-lines export of graph sequences, for inspection.
void write_graph_sequences(std::ostream& out, const std::vector<GraphSequence>& graphs,
                           const GraphParams& params);
std::vector<GraphSequence> read_graph_sequences(std::istream& in);

// ------------------------------------------------------------- synthetic ---

/// Centroid path: base + amplitude * sin(2 pi f t + phase) + drift * t per
/// axis, t in seconds.
struct CentroidTrajectory {
  Point3 base;
  Point3 amplitude;
  Point3 frequency_hz;
  Point3 phase;
  Point3 drift;
  double weight = 1.0;  // share of the frame's points
};

struct ClassSpec {
  std::string name;
  std::vector<CentroidTrajectory> centroids;
};

struct SynthSpec {
  std::vector<ClassSpec> classes;
  std::size_t min_points = 10;
  std::size_t max_points = 50;
  double scatter_sigma = 0.05;
  double frame_rate = 15.0;
  std::size_t seq_len = 50;
  std::size_t subject_count = 6;
  /// Per-subject body offset (uniform, meters) and height scale spread.
  double subject_offset = 0.1;
  double subject_scale = 0.05;
  /// Per-sequence random time shift (seconds) and speed spread.
  double time_jitter = 0.5;
  double speed_jitter = 0.1;
  /// Extra uniform clutter points per frame, drawn in [0, ghost_points_max].
  std::size_t ghost_points_max = 0;
  RangeBounds ghost_volume{-2.0, 8.0, -3.0, 9.0, -2.0, 4.0};

  void validate() const;
  nlohmann::json to_json() const;
  static SynthSpec from_json(const nlohmann::json& j);
};

/// Four activity classes with three body-part centroids each.
SynthSpec synth4_spec();

/// n_per_class sequences per class, class-major order. Subject of the k-th
/// generated sequence is k % subject_count. Every sequence draws from its
/// own stream derived from (seed, k).
Dataset synth_generate(const SynthSpec& spec, std::size_t n_per_class, std::uint64_t seed);

}  // namespace stargraph
