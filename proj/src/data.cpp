#include "stargraph/data.hpp"

#include <zlib.h>

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "stargraph/error.hpp"
#include "stargraph/nn.hpp"

namespace stargraph {
namespace {

using nlohmann::json;

bool has_gz_extension(const std::filesystem::path& path) { return path.extension() == ".gz"; }

json point_json(const Point3& p) { return json::array({p.x, p.y, p.z}); }

Point3 parse_point(const json& j, std::size_t line) {
  if (!j.is_array() || j.size() != 3) throw DataError("point must be [x, y, z]", line);
  for (const auto& v : j) {
    if (!v.is_number()) throw DataError("point coordinates must be numbers", line);
  }
  Point3 p{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
  if (!p.finite()) throw DataError("point coordinates must be finite", line);
  return p;
}

json parse_line(const std::string& text, std::size_t line) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("malformed JSON: ") + e.what(), line);
  }
}

std::string read_gzip(const std::filesystem::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (f == nullptr) throw DataError("cannot open " + path.string());
  std::string out;
  char buf[1 << 16];
  int n = 0;
  while ((n = gzread(f, buf, sizeof buf)) > 0) out.append(buf, static_cast<std::size_t>(n));
  const bool failed = n < 0;
  gzclose(f);
  if (failed) throw DataError("corrupt gzip stream in " + path.string());
  return out;
}

void write_gzip(const std::filesystem::path& path, const std::string& content) {
  gzFile f = gzopen(path.string().c_str(), "wb");
  if (f == nullptr) throw Error("cannot write " + path.string());
  const int written = content.empty()
                          ? 0
                          : gzwrite(f, content.data(), static_cast<unsigned>(content.size()));
  gzclose(f);
  if (static_cast<std::size_t>(written) != content.size()) {
    throw Error("short gzip write to " + path.string());
  }
}

int require_int(const json& record, const char* key, std::size_t line) {
  if (!record.contains(key) || !record[key].is_number_integer()) {
    throw DataError(std::string("record needs integer field '") + key + "'", line);
  }
  return record[key].get<int>();
}

}  // namespace

// ------------------------------------------------------------ dataset io ---

void write_dataset(std::ostream& out, const Dataset& ds) {
  out << json{{"format", "pcseq"},
              {"version", kDatasetVersion},
              {"seq_len", ds.seq_len},
              {"classes", ds.class_count}}
             .dump()
      << '\n';
  for (const PointSequence& seq : ds.sequences) {
    json frames = json::array();
    for (const PointFrame& f : seq.frames) {
      json pts = json::array();
      for (const Point3& p : f.points) pts.push_back(point_json(p));
      frames.push_back(std::move(pts));
    }
    out << json{{"label", seq.label}, {"subject", seq.subject_id}, {"frames", std::move(frames)}}
               .dump()
        << '\n';
  }
}

Dataset read_dataset(std::istream& in) {
  Dataset ds;
  std::string text;
  std::size_t line = 0;
  bool have_header = false;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = parse_line(text, line);
    if (!j.is_object()) throw DataError("each line must be a JSON object", line);
    if (!have_header) {
      if (j.value("format", std::string{}) != "pcseq") {
        throw DataError("header must declare format \"pcseq\"", line);
      }
      if (!j.contains("version") || j["version"] != kDatasetVersion) {
        throw DataError("unsupported dataset version " + j.value("version", json()).dump(), line);
      }
      const int seq_len = require_int(j, "seq_len", line);
      const int classes = require_int(j, "classes", line);
      if (seq_len < 1) throw DataError("seq_len must be >= 1", line);
      if (classes < 1) throw DataError("classes must be >= 1", line);
      ds.seq_len = static_cast<std::size_t>(seq_len);
      ds.class_count = static_cast<std::size_t>(classes);
      have_header = true;
      continue;
    }
    PointSequence seq;
    seq.label = require_int(j, "label", line);
    seq.subject_id = require_int(j, "subject", line);
    if (seq.label < 0 || static_cast<std::size_t>(seq.label) >= ds.class_count) {
      throw DataError("label " + std::to_string(seq.label) + " out of range [0, " +
                          std::to_string(ds.class_count) + ")",
                      line);
    }
    if (!j.contains("frames") || !j["frames"].is_array()) {
      throw DataError("record needs a 'frames' array", line);
    }
    const json& frames = j["frames"];
    if (frames.size() != ds.seq_len) {
      throw DataError("record has " + std::to_string(frames.size()) + " frames, header says " +
                          std::to_string(ds.seq_len),
                      line);
    }
    seq.frames.reserve(frames.size());
    for (std::size_t t = 0; t < frames.size(); ++t) {
      if (!frames[t].is_array()) throw DataError("frame must be an array of points", line);
      PointFrame f;
      f.timestamp_index = t;
      f.points.reserve(frames[t].size());
      for (const auto& p : frames[t]) f.points.push_back(parse_point(p, line));
      seq.frames.push_back(std::move(f));
    }
    ds.sequences.push_back(std::move(seq));
  }
  if (!have_header) throw DataError("missing pcseq header line", line == 0 ? 1 : line);
  return ds;
}

void save_dataset(const std::filesystem::path& path, const Dataset& ds) {
  if (has_gz_extension(path)) {
    std::ostringstream buf;
    write_dataset(buf, ds);
    write_gzip(path, buf.str());
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_dataset(out, ds);
  if (!out) throw Error("write failed for " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  if (has_gz_extension(path)) {
    std::istringstream in(read_gzip(path));
    return read_dataset(in);
  }
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return read_dataset(in);
}

// ------------------------------------------------------------ splitting ---

SubjectSplit split_by_subject(const Dataset& ds, const std::set<int>& train_subjects,
                              const std::set<int>& val_subjects,
                              const std::set<int>& test_subjects) {
  if (train_subjects.empty() || val_subjects.empty() || test_subjects.empty()) {
    throw ConfigError("train, val and test subject sets must all be non-empty");
  }
  auto overlaps = [](const std::set<int>& a, const std::set<int>& b) {
    for (int s : a) {
      if (b.count(s) != 0) return true;
    }
    return false;
  };
  if (overlaps(train_subjects, val_subjects) || overlaps(train_subjects, test_subjects) ||
      overlaps(val_subjects, test_subjects)) {
    throw ConfigError("subject sets must be disjoint");
  }
  SubjectSplit split;
  for (Dataset* part : {&split.train, &split.val, &split.test}) {
    part->seq_len = ds.seq_len;
    part->class_count = ds.class_count;
  }
  for (const PointSequence& seq : ds.sequences) {
    if (train_subjects.count(seq.subject_id)) {
      split.train.sequences.push_back(seq);
    } else if (val_subjects.count(seq.subject_id)) {
      split.val.sequences.push_back(seq);
    } else if (test_subjects.count(seq.subject_id)) {
      split.test.sequences.push_back(seq);
    } else {
      split.unassigned_subjects.insert(seq.subject_id);
    }
  }
  return split;
}

// ---------------------------------------------------------- graph export ---

void write_graph_sequences(std::ostream& out, const std::vector<GraphSequence>& graphs,
                           const GraphParams& params) {
  out << json{{"format", "pcgraph"},
              {"version", 1},
              {"graph_type", to_string(params.type)},
              {"k", params.k},
              {"radius", params.radius},
              {"center_mode", to_string(params.center.kind)},
              {"center", point_json(params.center.fixed)}}
             .dump()
      << '\n';
  for (const GraphSequence& gs : graphs) {
    json items = json::array();
    for (const FrameGraph& g : gs.graphs) {
      json nodes = json::array();
      for (const Point3& p : g.nodes()) nodes.push_back(point_json(p));
      items.push_back(
          {{"center", g.has_center()}, {"nodes", std::move(nodes)}, {"neighbors", g.neighbor_sets()}});
    }
    out << json{{"label", gs.label}, {"subject", gs.subject_id}, {"graphs", std::move(items)}}
               .dump()
        << '\n';
  }
}

std::vector<GraphSequence> read_graph_sequences(std::istream& in) {
  std::vector<GraphSequence> out;
  std::string text;
  std::size_t line = 0;
  bool have_header = false;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = parse_line(text, line);
    if (!have_header) {
      if (j.value("format", std::string{}) != "pcgraph" || j.value("version", 0) != 1) {
        throw DataError("expected a pcgraph version 1 header", line);
      }
      have_header = true;
      continue;
    }
    GraphSequence gs;
    gs.label = require_int(j, "label", line);
    gs.subject_id = require_int(j, "subject", line);
    try {
      for (const json& g : j.at("graphs")) {
        std::vector<Point3> nodes;
        for (const json& p : g.at("nodes")) nodes.push_back(parse_point(p, line));
        gs.graphs.push_back(FrameGraph::from_neighbor_sets(
            std::move(nodes), g.at("neighbors").get<std::vector<std::vector<std::uint32_t>>>(),
            g.at("center").get<bool>()));
      }
    } catch (const json::exception& e) {
      throw DataError(std::string("malformed graph record: ") + e.what(), line);
    } catch (const ConfigError& e) {
      throw DataError(e.what(), line);
    }
    out.push_back(std::move(gs));
  }
  if (!have_header) throw DataError("missing pcgraph header line", 1);
  return out;
}

// ------------------------------------------------------------- synthetic ---

void SynthSpec::validate() const {
  if (classes.size() < 2) throw ConfigError("synthetic spec needs at least 2 classes");
  for (const ClassSpec& c : classes) {
    if (c.centroids.empty()) throw ConfigError("class '" + c.name + "' has no centroids");
    double total_weight = 0.0;
    for (const CentroidTrajectory& t : c.centroids) {
      const Point3& a = t.amplitude;
      if (a.x < 0.0 || a.y < 0.0 || a.z < 0.0 || a.x + a.y + a.z <= 0.0) {
        throw ConfigError("class '" + c.name + "': amplitudes must be non-negative and not all 0");
      }
      if (!(t.weight > 0.0)) throw ConfigError("class '" + c.name + "': weights must be > 0");
      for (const Point3* p : {&t.base, &t.amplitude, &t.frequency_hz, &t.phase, &t.drift}) {
        if (!p->finite()) throw ConfigError("class '" + c.name + "': non-finite trajectory");
      }
      total_weight += t.weight;
    }
    if (!std::isfinite(total_weight)) throw ConfigError("class '" + c.name + "': bad weights");
  }
  if (min_points < 1 || min_points > max_points) {
    throw ConfigError("need 1 <= min_points <= max_points");
  }
  if (!(scatter_sigma > 0.0)) throw ConfigError("scatter_sigma must be > 0");
  if (!(frame_rate > 0.0)) throw ConfigError("frame_rate must be > 0");
  if (seq_len < 1) throw ConfigError("seq_len must be >= 1");
  if (subject_count < 1) throw ConfigError("subject_count must be >= 1");
  if (subject_offset < 0.0 || subject_scale < 0.0 || subject_scale >= 1.0 ||
      time_jitter < 0.0 || speed_jitter < 0.0 || speed_jitter >= 1.0) {
    throw ConfigError("jitter parameters out of range");
  }
  if (ghost_points_max > 0 && !ghost_volume.valid()) {
    throw ConfigError("ghost volume needs min < max on every axis");
  }
}

namespace {

json p3(const Point3& p) { return json::array({p.x, p.y, p.z}); }

Point3 read_p3(const json& j, const char* key, const Point3& fallback = {}) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_array() || v.size() != 3) {
    throw ConfigError(std::string("synthetic spec field '") + key + "' must be [x, y, z]");
  }
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

}  // namespace

json SynthSpec::to_json() const {
  json cls = json::array();
  for (const ClassSpec& c : classes) {
    json cents = json::array();
    for (const CentroidTrajectory& t : c.centroids) {
      cents.push_back({{"base", p3(t.base)},
                       {"amplitude", p3(t.amplitude)},
                       {"frequency_hz", p3(t.frequency_hz)},
                       {"phase", p3(t.phase)},
                       {"drift", p3(t.drift)},
                       {"weight", t.weight}});
    }
    cls.push_back({{"name", c.name}, {"centroids", std::move(cents)}});
  }
  return json{{"classes", std::move(cls)},
              {"min_points", min_points},
              {"max_points", max_points},
              {"scatter_sigma", scatter_sigma},
              {"frame_rate", frame_rate},
              {"seq_len", seq_len},
              {"subject_count", subject_count},
              {"subject_offset", subject_offset},
              {"subject_scale", subject_scale},
              {"time_jitter", time_jitter},
              {"speed_jitter", speed_jitter},
              {"ghost_points_max", ghost_points_max},
              {"ghost_volume",
               {ghost_volume.x_min, ghost_volume.x_max, ghost_volume.y_min, ghost_volume.y_max,
                ghost_volume.z_min, ghost_volume.z_max}}};
}

SynthSpec SynthSpec::from_json(const json& j) {
  try {
    SynthSpec s;
    for (const json& c : j.at("classes")) {
      ClassSpec cs;
      cs.name = c.value("name", std::string{});
      for (const json& t : c.at("centroids")) {
        CentroidTrajectory tr;
        tr.base = read_p3(t, "base");
        tr.amplitude = read_p3(t, "amplitude");
        tr.frequency_hz = read_p3(t, "frequency_hz");
        tr.phase = read_p3(t, "phase");
        tr.drift = read_p3(t, "drift");
        tr.weight = t.value("weight", 1.0);
        cs.centroids.push_back(tr);
      }
      s.classes.push_back(std::move(cs));
    }
    s.min_points = j.value("min_points", s.min_points);
    s.max_points = j.value("max_points", s.max_points);
    s.scatter_sigma = j.value("scatter_sigma", s.scatter_sigma);
    s.frame_rate = j.value("frame_rate", s.frame_rate);
    s.seq_len = j.value("seq_len", s.seq_len);
    s.subject_count = j.value("subject_count", s.subject_count);
    s.subject_offset = j.value("subject_offset", s.subject_offset);
    s.subject_scale = j.value("subject_scale", s.subject_scale);
    s.time_jitter = j.value("time_jitter", s.time_jitter);
    s.speed_jitter = j.value("speed_jitter", s.speed_jitter);
    s.ghost_points_max = j.value("ghost_points_max", s.ghost_points_max);
    if (j.contains("ghost_volume")) {
      const auto v = j.at("ghost_volume").get<std::vector<double>>();
      if (v.size() != 6) throw ConfigError("ghost_volume needs 6 numbers");
      s.ghost_volume = {v[0], v[1], v[2], v[3], v[4], v[5]};
    }
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid synthetic spec: ") + e.what());
  }
}

SynthSpec synth4_spec() {
  // Radar looks along +y; subject stands ~3 m away. z is height.
  const Point3 still{0.0, 0.0, 0.0};
  auto part = [](Point3 base, Point3 amp, Point3 freq, Point3 phase, Point3 drift,
                 double weight) {
    return CentroidTrajectory{base, amp, freq, phase, drift, weight};
  };
  const double tiny = 0.02;  // residual sway
  SynthSpec s;
  s.classes = {
      {"wave",
       {part({2.0, 3.0, 1.6}, {tiny, tiny, tiny}, {0.3, 0.3, 0.3}, still, still, 0.3),
        part({2.0, 3.0, 1.1}, {tiny, tiny, tiny}, {0.3, 0.3, 0.3}, still, still, 0.4),
        part({2.45, 3.0, 1.95}, {0.3, tiny, 0.1}, {1.0, 0.3, 2.0}, still, still, 0.3)}},
      {"squat",
       {part({2.0, 3.0, 1.4}, {tiny, tiny, 0.35}, {0.3, 0.3, 0.5}, still, still, 0.3),
        part({2.0, 3.0, 0.9}, {tiny, tiny, 0.3}, {0.3, 0.3, 0.5}, still, still, 0.4),
        part({2.0, 3.0, 0.4}, {tiny, 0.1, 0.05}, {0.3, 0.5, 0.5}, still, still, 0.3)}},
      {"walk",
       {part({2.0, 4.0, 1.6}, {tiny, tiny, 0.03}, {0.3, 0.3, 1.5}, still, {0.0, -0.5, 0.0}, 0.3),
        part({2.0, 4.0, 1.1}, {0.05, tiny, tiny}, {1.5, 0.3, 0.3}, still, {0.0, -0.5, 0.0}, 0.4),
        part({2.0, 4.0, 0.4}, {tiny, 0.3, 0.1}, {0.3, 1.5, 3.0}, still, {0.0, -0.5, 0.0}, 0.3)}},
      {"punch",
       {part({2.0, 2.85, 1.55}, {tiny, 0.05, tiny}, {0.3, 1.5, 0.3}, still, still, 0.3),
        part({2.0, 2.9, 1.1}, {tiny, 0.05, tiny}, {0.3, 1.5, 0.3}, still, still, 0.4),
        part({2.0, 2.5, 1.2}, {tiny, 0.35, tiny}, {0.3, 1.5, 0.3}, still, still, 0.3)}},
  };
  return s;
}

Dataset synth_generate(const SynthSpec& spec, std::size_t n_per_class, std::uint64_t seed) {
  spec.validate();
  Dataset ds;
  ds.seq_len = spec.seq_len;
  ds.class_count = spec.classes.size();

  struct SubjectBody {
    Point3 offset;
    double scale;
  };
  std::vector<SubjectBody> bodies;
  for (std::size_t s = 0; s < spec.subject_count; ++s) {
    nn::Rng rng(nn::derive_seed(seed, 0xB0D1E5ull + s));
    auto sym = [&](double half) { return (2.0 * nn::uniform01(rng) - 1.0) * half; };
    bodies.push_back({{sym(spec.subject_offset), sym(spec.subject_offset), 0.0},
                      1.0 + sym(spec.subject_scale)});
  }

  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  const std::size_t span = spec.max_points - spec.min_points + 1;
  std::size_t k = 0;
  for (std::size_t label = 0; label < spec.classes.size(); ++label) {
    const ClassSpec& cls = spec.classes[label];
    double total_weight = 0.0;
    for (const auto& c : cls.centroids) total_weight += c.weight;
    for (std::size_t n = 0; n < n_per_class; ++n, ++k) {
      nn::Rng rng(nn::derive_seed(seed, k));
      std::normal_distribution<double> scatter(0.0, spec.scatter_sigma);
      const int subject = static_cast<int>(k % spec.subject_count);
      const SubjectBody& body = bodies[static_cast<std::size_t>(subject)];
      const double t0 = nn::uniform01(rng) * spec.time_jitter;
      const double speed = 1.0 + (2.0 * nn::uniform01(rng) - 1.0) * spec.speed_jitter;

      PointSequence seq;
      seq.label = static_cast<int>(label);
      seq.subject_id = subject;
      seq.frames.resize(spec.seq_len);
      for (std::size_t f = 0; f < spec.seq_len; ++f) {
        const double t = t0 + speed * static_cast<double>(f) / spec.frame_rate;
        std::vector<Point3> centers;
        for (const CentroidTrajectory& c : cls.centroids) {
          auto axis = [&](double base, double amp, double freq, double phase, double drift) {
            return base + amp * std::sin(kTwoPi * freq * t + phase) + drift * t;
          };
          Point3 p{axis(c.base.x, c.amplitude.x, c.frequency_hz.x, c.phase.x, c.drift.x),
                   axis(c.base.y, c.amplitude.y, c.frequency_hz.y, c.phase.y, c.drift.y),
                   axis(c.base.z, c.amplitude.z, c.frequency_hz.z, c.phase.z, c.drift.z)};
          centers.push_back({p.x + body.offset.x, p.y + body.offset.y, p.z * body.scale});
        }
        PointFrame& frame = seq.frames[f];
        frame.timestamp_index = f;
        const std::size_t count = spec.min_points + static_cast<std::size_t>(rng() % span);
        frame.points.reserve(count);
        for (std::size_t i = 0; i < count; ++i) {
          double pick = nn::uniform01(rng) * total_weight;
          std::size_t ci = 0;
          while (ci + 1 < cls.centroids.size() && pick >= cls.centroids[ci].weight) {
            pick -= cls.centroids[ci].weight;
            ++ci;
          }
          const Point3& c = centers[ci];
          frame.points.push_back({c.x + scatter(rng), c.y + scatter(rng), c.z + scatter(rng)});
        }
        if (spec.ghost_points_max > 0) {
          const std::size_t ghosts = static_cast<std::size_t>(rng() % (spec.ghost_points_max + 1));
          const RangeBounds& g = spec.ghost_volume;
          for (std::size_t i = 0; i < ghosts; ++i) {
            frame.points.push_back({g.x_min + nn::uniform01(rng) * (g.x_max - g.x_min),
                                    g.y_min + nn::uniform01(rng) * (g.y_max - g.y_min),
                                    g.z_min + nn::uniform01(rng) * (g.z_max - g.z_min)});
          }
        }
      }
      ds.sequences.push_back(std::move(seq));
    }
  }
  return ds;
}

}  // namespace stargraph
