#include "cli.hpp"

#include <array>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "stargraph/bench.hpp"
#include "stargraph/data.hpp"
#include "stargraph/error.hpp"
#include "stargraph/graph.hpp"
#include "stargraph/model.hpp"

namespace stargraph::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- parsing ---

std::vector<std::string> split_on(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(text);
  while (std::getline(in, cur, sep)) parts.push_back(cur);
  if (!text.empty() && text.back() == sep) parts.emplace_back();
  return parts;
}

template <typename T>
T parse_number(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    T v{};
    if constexpr (std::is_floating_point_v<T>) {
      v = static_cast<T>(std::stod(s, &used));
    } else if constexpr (std::is_signed_v<T>) {
      v = static_cast<T>(std::stoll(s, &used));
    } else {
      if (!s.empty() && s[0] == '-') throw std::invalid_argument(s);
      v = static_cast<T>(std::stoull(s, &used));
    }
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw UsageError("bad " + what + " '" + s + "'");
  }
}

std::set<int> parse_subjects(const std::string& text) {
  std::set<int> out;
  for (const auto& p : split_on(text, ',')) {
    if (!p.empty()) out.insert(parse_number<int>(p, "subject id"));
  }
  return out;
}

// "0,1,2,3/4/5" -> train / val / test subject sets
std::array<std::set<int>, 3> parse_split(const std::string& text) {
  const auto parts = split_on(text, '/');
  if (parts.size() != 3) throw UsageError("--split wants TRAIN/VAL/TEST subject lists, e.g. 0,1,2,3/4/5");
  return {parse_subjects(parts[0]), parse_subjects(parts[1]), parse_subjects(parts[2])};
}

GraphType parse_graph(const std::string& name) {
  if (auto t = parse_graph_type(name)) return *t;
  throw UsageError("unknown graph type '" + name + "' (valid: " + std::string(graph_type_names()) +
                   ")");
}

// "static", "mean", "zero" or an explicit static point "x,y,z"
CenterMode parse_center(const std::string& text, CenterMode base) {
  if (auto kind = parse_center_kind(text)) {
    base.kind = *kind;
    return base;
  }
  const auto parts = split_on(text, ',');
  if (parts.size() != 3) throw UsageError("--center wants static|mean|zero or x,y,z");
  base.kind = CenterMode::Kind::Static;
  base.fixed = {parse_number<double>(parts[0], "center coordinate"),
                parse_number<double>(parts[1], "center coordinate"),
                parse_number<double>(parts[2], "center coordinate")};
  return base;
}

// ------------------------------------------------------------ json forms ---

json graph_to_json(const GraphParams& g) {
  return json{{"type", to_string(g.type)},
              {"k", g.k},
              {"radius", g.radius},
              {"center",
               {{"mode", to_string(g.center.kind)},
                {"point", {g.center.fixed.x, g.center.fixed.y, g.center.fixed.z}}}}};
}

GraphParams graph_from_json(const json& j, GraphParams g) {
  if (j.contains("type")) g.type = parse_graph(j.at("type").get<std::string>());
  g.k = j.value("k", g.k);
  g.radius = j.value("radius", g.radius);
  if (j.contains("center")) {
    const json& c = j.at("center");
    if (c.is_string()) {
      g.center = parse_center(c.get<std::string>(), g.center);
    } else {
      if (c.contains("mode")) g.center = parse_center(c.at("mode").get<std::string>(), g.center);
      if (c.contains("point")) {
        const auto p = c.at("point").get<std::array<double, 3>>();
        g.center.fixed = {p[0], p[1], p[2]};
      }
    }
  }
  return g;
}

bool same_graph(const GraphParams& a, const GraphParams& b) {
  return graph_to_json(a) == graph_to_json(b);
}

struct PreprocessOptions {
  bool enabled = false;
  RangeBounds bounds;
  DbscanParams dbscan;

  json to_json() const {
    return json{{"enabled", enabled},
                {"bounds",
                 {{"x", {bounds.x_min, bounds.x_max}},
                  {"y", {bounds.y_min, bounds.y_max}},
                  {"z", {bounds.z_min, bounds.z_max}}}},
                {"eps", dbscan.eps},
                {"min_pts", dbscan.min_pts}};
  }

  void overlay(const json& j) {
    enabled = j.value("enabled", enabled);
    dbscan.eps = j.value("eps", dbscan.eps);
    dbscan.min_pts = j.value("min_pts", dbscan.min_pts);
    if (j.contains("bounds")) {
      const json& b = j.at("bounds");
      auto axis = [&](const char* key, double& lo, double& hi) {
        if (!b.contains(key)) return;
        const auto v = b.at(key).get<std::array<double, 2>>();
        lo = v[0];
        hi = v[1];
      };
      axis("x", bounds.x_min, bounds.x_max);
      axis("y", bounds.y_min, bounds.y_max);
      axis("z", bounds.z_min, bounds.z_max);
    }
  }

  void validate() const {
    if (!bounds.valid()) throw ConfigError("range bounds need min < max on every axis");
    if (!(dbscan.eps > 0.0)) throw ConfigError("eps must be > 0");
    if (dbscan.min_pts < 1) throw ConfigError("min_pts must be >= 1");
  }
};

// Everything a run depends on, after defaults, --config and flags are merged.
struct RunConfig {
  std::string command;
  std::uint64_t seed = 0;
  GraphParams graph;
  DdgnnConfig model;
  PreprocessOptions preprocess;
  std::optional<std::array<std::set<int>, 3>> split;
  json inputs = json::object();

  json to_json() const {
    json j{{"command", command},
           {"seed", seed},
           {"graph", graph_to_json(graph)},
           {"model", model.to_json()},
           {"preprocess", preprocess.to_json()},
           {"inputs", inputs}};
    if (split) j["split"] = {{"train", (*split)[0]}, {"val", (*split)[1]}, {"test", (*split)[2]}};
    return j;
  }
};

// ----------------------------------------------------------------- output ---

// Writes to a sibling temp file first so a failed run never leaves a
// truncated artifact behind.
void write_atomically(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  try {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    body(out);
    out.close();
    if (!out) throw Error("write failed for " + path.string());
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
  fs::rename(tmp, path);
}

void write_json(const fs::path& path, const json& j) {
  write_atomically(path, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
}

// CSV outputs start with the resolved config as a comment line.
void write_csv(const fs::path& path, const RunConfig& rc,
               const std::function<void(std::ostream&)>& body) {
  write_atomically(path, [&](std::ostream& o) {
    o << "# config: " << rc.to_json().dump() << '\n';
    body(o);
  });
}

// ------------------------------------------------------------------ flags ---

struct CommonFlags {
  std::string config_path;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config_path, "JSON file with seed/graph/model/preprocess/split sections")
      ->check(CLI::ExistingFile);
  f.seed_opt = app->add_option("--seed", f.seed, "Random seed (default: $STARGRAPH_SEED or 0)");
}

struct GraphFlags {
  std::string type, center;
  std::size_t k = 5;
  double r = 0.5;
  CLI::Option *type_opt = nullptr, *k_opt = nullptr, *r_opt = nullptr, *center_opt = nullptr;

  bool any() const {
    return type_opt->count() + k_opt->count() + r_opt->count() + center_opt->count() > 0;
  }
};

void add_graph_flags(CLI::App* app, GraphFlags& f) {
  f.type_opt = app->add_option("--graph", f.type, "Graph type: dstar, ustar, knn, radius, fc, empty");
  f.k_opt = app->add_option("--k", f.k, "Neighbors for knn graphs")->check(CLI::PositiveNumber);
  f.r_opt = app->add_option("--r", f.r, "Radius for radius graphs")->check(CLI::PositiveNumber);
  f.center_opt = app->add_option("--center", f.center, "Star center: static, mean, zero or x,y,z");
}

GraphParams apply_graph_flags(const GraphFlags& f, GraphParams g) {
  if (f.type_opt->count()) g.type = parse_graph(f.type);
  if (f.k_opt->count()) g.k = f.k;
  if (f.r_opt->count()) g.radius = f.r;
  if (f.center_opt->count()) g.center = parse_center(f.center, g.center);
  return g;
}

struct ModelFlags {
  std::size_t epochs = 0, validate_every = 0, patience = 0, lstm_hidden = 0, fc_dim = 0;
  double lr = 0.0, dropout = 0.0;
  std::vector<CLI::Option*> opts;
};

void add_model_flags(CLI::App* app, ModelFlags& f) {
  f.opts = {app->add_option("--epochs", f.epochs, "Maximum training epochs"),
            app->add_option("--lr", f.lr, "Adam learning rate"),
            app->add_option("--dropout", f.dropout, "Dropout rate before pooling"),
            app->add_option("--validate-every", f.validate_every, "Epochs between validations"),
            app->add_option("--patience", f.patience, "Validation rounds without gain before stopping"),
            app->add_option("--lstm-hidden", f.lstm_hidden, "Bi-LSTM hidden units per direction"),
            app->add_option("--fc-dim", f.fc_dim, "Width of the per-point projection")};
}

DdgnnConfig apply_model_flags(const ModelFlags& f, DdgnnConfig c) {
  if (f.opts[0]->count()) c.max_epochs = f.epochs;
  if (f.opts[1]->count()) c.lr = f.lr;
  if (f.opts[2]->count()) c.dropout_rate = f.dropout;
  if (f.opts[3]->count()) c.validate_every = f.validate_every;
  if (f.opts[4]->count()) c.patience = f.patience;
  if (f.opts[5]->count()) c.lstm_hidden = f.lstm_hidden;
  if (f.opts[6]->count()) c.fc_dim = f.fc_dim;
  return c;
}

struct PreprocessFlags {
  bool enable = false, disable = false;
  double eps = 0.35;
  std::size_t min_pts = 2;
  CLI::Option *eps_opt = nullptr, *min_pts_opt = nullptr;
};

void add_preprocess_flags(CLI::App* app, PreprocessFlags& f, bool toggles) {
  if (toggles) {
    auto* on = app->add_flag("--preprocess", f.enable, "Range filter + DBSCAN before graph building");
    app->add_flag("--no-preprocess", f.disable, "Skip preprocessing")->excludes(on);
  }
  f.eps_opt = app->add_option("--eps", f.eps, "DBSCAN radius")->check(CLI::PositiveNumber);
  f.min_pts_opt = app->add_option("--min-pts", f.min_pts, "DBSCAN core threshold")->check(CLI::PositiveNumber);
}

PreprocessOptions apply_preprocess_flags(const PreprocessFlags& f, PreprocessOptions p) {
  if (f.enable) p.enabled = true;
  if (f.disable) p.enabled = false;
  if (f.eps_opt->count()) p.dbscan.eps = f.eps;
  if (f.min_pts_opt->count()) p.dbscan.min_pts = f.min_pts;
  return p;
}

json read_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  try {
    json j = json::parse(in);
    if (!j.is_object()) throw ConfigError("config " + path + " must hold a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
}

std::uint64_t env_seed() {
  const char* v = std::getenv("STARGRAPH_SEED");
  if (v == nullptr || *v == '\0') return 0;
  return parse_number<std::uint64_t>(v, "STARGRAPH_SEED");
}

// defaults < --config file < flags
RunConfig resolve(const std::string& command, const CommonFlags& common, const GraphFlags* graph,
                  const ModelFlags* model, const PreprocessFlags* pre,
                  const std::string* split_flag) {
  RunConfig rc;
  rc.command = command;
  const json file = read_config_file(common.config_path);
  try {
    rc.seed = file.value("seed", env_seed());
    if (file.contains("graph")) rc.graph = graph_from_json(file.at("graph"), rc.graph);
    if (file.contains("model")) {
      json m = rc.model.to_json();
      m.merge_patch(file.at("model"));
      rc.model = DdgnnConfig::from_json(m);
    }
    if (file.contains("preprocess")) rc.preprocess.overlay(file.at("preprocess"));
    if (file.contains("split")) {
      const json& s = file.at("split");
      rc.split = std::array<std::set<int>, 3>{s.at("train").get<std::set<int>>(),
                                              s.at("val").get<std::set<int>>(),
                                              s.at("test").get<std::set<int>>()};
    }
  } catch (const json::exception& e) {
    throw ConfigError("config " + common.config_path + ": " + e.what());
  }
  if (common.seed_opt->count()) rc.seed = common.seed;
  if (graph) rc.graph = apply_graph_flags(*graph, rc.graph);
  if (model) rc.model = apply_model_flags(*model, rc.model);
  if (pre) rc.preprocess = apply_preprocess_flags(*pre, rc.preprocess);
  if (split_flag && !split_flag->empty()) rc.split = parse_split(*split_flag);
  rc.model.seed = rc.seed;
  rc.graph.validate();
  rc.preprocess.validate();
  return rc;
}

// ------------------------------------------------------------------- data ---

Dataset load_input(const std::string& path, const PreprocessOptions& pre) {
  Dataset ds = load_dataset(path);
  if (pre.enabled) {
    for (auto& s : ds.sequences) {
      s = preprocess_sequence(s, pre.bounds, pre.dbscan.eps, pre.dbscan.min_pts);
    }
  }
  return ds;
}

std::vector<GraphSequence> to_graphs(const Dataset& ds, const GraphParams& g) {
  std::vector<GraphSequence> out;
  out.reserve(ds.sequences.size());
  for (const auto& s : ds.sequences) out.push_back(build_sequence(s, g));
  return out;
}

struct TrainingData {
  Dataset train, val, test;
  bool has_test = false;
};

TrainingData load_training_data(RunConfig& rc, const std::string& data, const std::string& train,
                                const std::string& val, std::ostream& err) {
  TrainingData td;
  if (!data.empty()) {
    if (!rc.split) throw UsageError("--data needs --split TRAIN/VAL/TEST (or a split in --config)");
    rc.inputs["data"] = data;
    const Dataset ds = load_input(data, rc.preprocess);
    SubjectSplit s = split_by_subject(ds, (*rc.split)[0], (*rc.split)[1], (*rc.split)[2]);
    for (int subject : s.unassigned_subjects) {
      err << "warning: subject " << subject << " is in no split and was left out\n";
    }
    td.train = std::move(s.train);
    td.val = std::move(s.val);
    td.test = std::move(s.test);
    td.has_test = true;
  } else {
    if (train.empty() || val.empty()) throw UsageError("give --data with --split, or --train and --val");
    rc.inputs["train"] = train;
    rc.inputs["val"] = val;
    td.train = load_input(train, rc.preprocess);
    td.val = load_input(val, rc.preprocess);
    if (td.train.seq_len != td.val.seq_len) {
      throw DataError("train and val files disagree on seq_len");
    }
  }
  if (td.train.sequences.empty()) throw DataError("training split is empty");
  if (td.val.sequences.empty()) throw DataError("validation split is empty");
  rc.model.class_count = std::max(td.train.class_count, td.val.class_count);
  rc.model.seq_len = td.train.seq_len;
  rc.model.validate();
  return td;
}

TrainProgress printer(std::ostream& out) {
  return [&out](const TrainLogRow& row) {
    out << "epoch " << row.epoch << "  loss " << row.train_loss;
    if (row.val_accuracy) out << "  val_acc " << *row.val_accuracy;
    out << '\n' << std::flush;
  };
}

// --------------------------------------------------------------- commands ---

struct GenerateArgs {
  std::string spec = "synth4";
  std::string output;
  std::size_t n_per_class = 75;
};

int cmd_generate(const GenerateArgs& a, const RunConfig& rc, std::ostream& out) {
  SynthSpec spec;
  if (a.spec == "synth4") {
    spec = synth4_spec();
  } else {
    std::ifstream in(a.spec);
    if (!in) throw UsageError("--spec is neither 'synth4' nor a readable file: " + a.spec);
    try {
      spec = SynthSpec::from_json(json::parse(in));
    } catch (const json::exception& e) {
      throw ConfigError("spec " + a.spec + ": " + e.what());
    }
  }
  spec.validate();
  if (a.n_per_class < 1) throw UsageError("--n-per-class must be >= 1");
  const Dataset ds = synth_generate(spec, a.n_per_class, rc.seed);
  fs::path path(a.output);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += path.extension() == ".gz" ? ".tmp.gz" : ".tmp";
  save_dataset(tmp, ds);
  fs::rename(tmp, path);

  std::size_t frames = 0, points = 0;
  for (const auto& s : ds.sequences) {
    frames += s.frames.size();
    for (const auto& f : s.frames) points += f.points.size();
  }
  out << "wrote " << path.string() << ": " << ds.class_count << " classes, "
      << ds.sequences.size() << " sequences, " << frames << " frames, " << points
      << " points (seed " << rc.seed << ")\n";
  return kOk;
}

struct PreprocessArgs {
  std::string input, output, graphs_out;
};

int cmd_preprocess(const PreprocessArgs& a, RunConfig rc, std::ostream& out) {
  rc.preprocess.enabled = true;
  rc.inputs["input"] = a.input;
  const Dataset ds = load_input(a.input, rc.preprocess);
  fs::path path(a.output);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += path.extension() == ".gz" ? ".tmp.gz" : ".tmp";
  save_dataset(tmp, ds);
  fs::rename(tmp, path);
  std::size_t empty = 0, frames = 0;
  for (const auto& s : ds.sequences)
    for (const auto& f : s.frames) {
      ++frames;
      empty += f.points.empty();
    }
  out << "wrote " << path.string() << ": " << ds.sequences.size() << " sequences, " << empty
      << " of " << frames << " frames empty after filtering\n";
  if (!a.graphs_out.empty()) {
    const auto graphs = to_graphs(ds, rc.graph);
    write_atomically(a.graphs_out, [&](std::ostream& o) { write_graph_sequences(o, graphs, rc.graph); });
    out << "wrote " << a.graphs_out << '\n';
  }
  return kOk;
}

struct TrainArgs {
  std::string data, train, val, out_dir, split;
};

int cmd_train(const TrainArgs& a, RunConfig rc, std::ostream& out, std::ostream& err) {
  const TrainingData td = load_training_data(rc, a.data, a.train, a.val, err);
  const auto train_graphs = to_graphs(td.train, rc.graph);
  const auto val_graphs = to_graphs(td.val, rc.graph);
  out << "training " << to_string(rc.graph.type) << " on " << train_graphs.size()
      << " sequences, validating on " << val_graphs.size() << '\n';
  const TrainResult r = train(DdgnnModel(rc.model), train_graphs, val_graphs, printer(out));
  const EvalReport report = evaluate(r.model, val_graphs);

  const fs::path dir(a.out_dir);
  const json config = rc.to_json();
  write_json(dir / "checkpoint.json", checkpoint_to_json(r.model, config, &r.adam));
  write_csv(dir / "train_log.csv", rc, [&](std::ostream& o) { write_train_log_csv(o, r.log); });
  write_json(dir / "eval.json", json{{"config", config},
                                     {"split", "val"},
                                     {"best_epoch", r.best_epoch},
                                     {"epochs_run", r.epochs_run},
                                     {"early_stopped", r.early_stopped},
                                     {"report", report.to_json()}});
  out << "best val accuracy " << r.best_val_accuracy << " at epoch " << r.best_epoch
      << "; wrote " << dir.string() << "/{checkpoint.json,train_log.csv,eval.json}\n";
  return kOk;
}

struct EvalArgs {
  std::string checkpoint, data, subjects, out_dir;
  bool confusion_csv = false;
};

int cmd_eval(const EvalArgs& a, const CommonFlags& common, const GraphFlags& gflags,
             const PreprocessFlags& pflags, std::ostream& out, std::ostream& err) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  RunConfig rc = resolve("eval", common, nullptr, nullptr, nullptr, nullptr);
  // Graph and preprocessing default to what the checkpoint was trained with.
  const json& recorded = ck.extra;
  GraphParams trained_graph = rc.graph;
  if (recorded.contains("graph")) trained_graph = graph_from_json(recorded.at("graph"), rc.graph);
  rc.graph = apply_graph_flags(gflags, trained_graph);
  rc.graph.validate();
  if (!same_graph(rc.graph, trained_graph)) {
    err << "warning: checkpoint was trained with graph " << graph_to_json(trained_graph).dump()
        << " but evaluating with " << graph_to_json(rc.graph).dump() << " as requested\n";
  }
  if (recorded.contains("preprocess")) rc.preprocess.overlay(recorded.at("preprocess"));
  rc.preprocess = apply_preprocess_flags(pflags, rc.preprocess);
  rc.preprocess.validate();
  rc.model = ck.model.config();
  if (!common.seed_opt->count() && recorded.contains("seed")) rc.seed = recorded.at("seed").get<std::uint64_t>();
  rc.inputs = {{"checkpoint", a.checkpoint}, {"data", a.data}};

  Dataset ds = load_input(a.data, rc.preprocess);
  if (!a.subjects.empty()) {
    const std::set<int> keep = parse_subjects(a.subjects);
    std::erase_if(ds.sequences, [&](const PointSequence& s) { return !keep.contains(s.subject_id); });
    rc.inputs["subjects"] = keep;
  }
  if (ds.sequences.empty()) throw DataError("no sequences to evaluate");
  if (ds.seq_len != rc.model.seq_len) {
    throw DataError("dataset has seq_len " + std::to_string(ds.seq_len) + ", checkpoint expects " +
                    std::to_string(rc.model.seq_len));
  }
  for (const auto& s : ds.sequences) {
    if (static_cast<std::size_t>(s.label) >= rc.model.class_count) {
      throw DataError("label " + std::to_string(s.label) + " is outside the checkpoint's " +
                      std::to_string(rc.model.class_count) + " classes");
    }
  }
  const EvalReport report = evaluate(ck.model, to_graphs(ds, rc.graph));
  const fs::path dir(a.out_dir);
  write_json(dir / "eval.json", json{{"config", rc.to_json()}, {"report", report.to_json()}});
  if (a.confusion_csv) {
    write_csv(dir / "confusion.csv", rc, [&](std::ostream& o) { write_confusion_csv(o, report); });
  }
  out << "accuracy " << report.overall_accuracy << " on " << report.sample_count
      << " sequences, " << report.avg_inference_ms << " ms per sequence\n";
  return kOk;
}

struct AblateArgs {
  std::string data, train, val, out_dir, split;
};

int cmd_ablate(const AblateArgs& a, RunConfig rc, std::ostream& out, std::ostream& err) {
  const TrainingData td = load_training_data(rc, a.data, a.train, a.val, err);
  std::vector<GraphParams> variants;
  for (GraphType t : {GraphType::DStar, GraphType::UStar}) {
    for (auto kind : {CenterMode::Kind::Static, CenterMode::Kind::Mean, CenterMode::Kind::Zero}) {
      GraphParams g = rc.graph;
      g.type = t;
      g.center.kind = kind;
      variants.push_back(g);
    }
  }
  for (GraphType t : {GraphType::Knn, GraphType::Radius, GraphType::Fc, GraphType::Empty}) {
    GraphParams g = rc.graph;
    g.type = t;
    variants.push_back(g);
  }

  json rows = json::array();
  std::ostringstream table;
  table << "graph,center,k,r,seed,val_accuracy,test_accuracy,best_epoch,epochs_run,avg_inference_ms\n";
  double dstar_acc = -1.0, fc_acc = -1.0;
  for (const GraphParams& g : variants) {
    const std::string center = is_star(g.type) ? std::string(to_string(g.center.kind)) : "-";
    out << "== " << to_string(g.type) << (is_star(g.type) ? " center " + center : "") << '\n';
    const auto train_graphs = to_graphs(td.train, g);
    const auto val_graphs = to_graphs(td.val, g);
    const TrainResult r = train(DdgnnModel(rc.model), train_graphs, val_graphs, printer(out));
    const Dataset& held_out = td.has_test ? td.test : td.val;
    const EvalReport report = evaluate(r.model, to_graphs(held_out, g));
    const json row{{"graph", to_string(g.type)},
                   {"center", center},
                   {"k", g.type == GraphType::Knn ? json(g.k) : json("-")},
                   {"r", g.type == GraphType::Radius ? json(g.radius) : json("-")},
                   {"seed", rc.seed},
                   {"val_accuracy", r.best_val_accuracy},
                   {"test_accuracy", td.has_test ? json(report.overall_accuracy) : json(nullptr)},
                   {"best_epoch", r.best_epoch},
                   {"epochs_run", r.epochs_run},
                   {"avg_inference_ms", report.avg_inference_ms}};
    rows.push_back(row);
    auto cell = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.is_null() ? "" : v.dump(); };
    table << cell(row["graph"]) << ',' << cell(row["center"]) << ',' << cell(row["k"]) << ','
          << cell(row["r"]) << ',' << rc.seed << ',' << r.best_val_accuracy << ','
          << cell(row["test_accuracy"]) << ',' << r.best_epoch << ',' << r.epochs_run << ','
          << report.avg_inference_ms << '\n';
    if (g.type == GraphType::DStar && g.center.kind == rc.graph.center.kind) dstar_acc = report.overall_accuracy;
    if (g.type == GraphType::Fc) fc_acc = report.overall_accuracy;
  }
  const fs::path dir(a.out_dir);
  write_csv(dir / "ablation.csv", rc, [&](std::ostream& o) { o << table.str(); });
  write_json(dir / "ablation.json", json{{"config", rc.to_json()}, {"rows", rows}});
  out << table.str();
  if (dstar_acc >= 0.0 && fc_acc >= 0.0 && dstar_acc < fc_acc) {
    out << "note: fc scored above dstar (" << fc_acc << " vs " << dstar_acc << ")\n";
  }
  return kOk;
}

struct BenchArgs {
  std::string graphs = "dstar,ustar,empty,knn,radius,fc";
  std::string grid = "64,128,256,512,1024,2048,4096";
  std::size_t reps = 20;
  std::string checkpoint, data, out_dir;
  std::size_t latency_reps = 5;
};

int cmd_bench(const BenchArgs& a, RunConfig rc, std::ostream& out) {
  std::vector<std::size_t> grid;
  for (const auto& s : split_on(a.grid, ',')) grid.push_back(parse_number<std::size_t>(s, "grid size"));
  std::vector<GraphType> types;
  for (const auto& s : split_on(a.graphs, ',')) types.push_back(parse_graph(s));
  rc.inputs["graphs"] = a.graphs;
  rc.inputs["grid"] = grid;
  rc.inputs["reps"] = a.reps;

  std::vector<bench::ScalingReport> reports;
  json edge_checks = json::array();
  for (GraphType t : types) {
    GraphParams g = rc.graph;
    g.type = t;
    reports.push_back(bench::time_construction(g, grid, a.reps, rc.seed));
    const auto& r = reports.back();
    out << to_string(t) << ": slope " << r.slope << " [" << r.slope_ci_low << ", "
        << r.slope_ci_high << "]\n";
    if (t != GraphType::Knn && t != GraphType::Radius) {
      for (std::size_t n : grid) {
        const std::size_t got = bench::count_edges(g, n, rc.seed);
        const std::size_t want = bench::expected_edges(t, n);
        edge_checks.push_back({{"graph", to_string(t)}, {"n", n}, {"edges", got}, {"expected", want}});
        if (got != want) out << "  edge count mismatch at n=" << n << ": " << got << " vs " << want << '\n';
      }
    }
  }
  json result{{"config", rc.to_json()}, {"edge_checks", edge_checks}};
  result["reports"] = json::array();
  for (const auto& r : reports) result["reports"].push_back(r.to_json());

  if (!a.checkpoint.empty() || !a.data.empty()) {
    if (a.checkpoint.empty() || a.data.empty()) throw UsageError("latency timing needs both --checkpoint and --data");
    const Checkpoint ck = load_checkpoint(a.checkpoint);
    GraphParams g = rc.graph;
    if (ck.extra.contains("graph")) g = graph_from_json(ck.extra.at("graph"), g);
    const Dataset ds = load_input(a.data, rc.preprocess);
    const auto lat = bench::time_inference(ck.model, to_graphs(ds, g), a.latency_reps);
    result["latency"] = lat.to_json();
    out << "inference: mean " << lat.mean_ms << " ms, p95 " << lat.p95_ms << " ms\n";
  }
  const fs::path dir(a.out_dir);
  write_json(dir / "scaling.json", result);
  write_csv(dir / "scaling.csv", rc, [&](std::ostream& o) { bench::write_scaling_csv(o, reports); });
  out << "wrote " << (dir / "scaling.json").string() << '\n';
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Star-graph point-cloud activity recognition"};
  app.require_subcommand(1);

  CommonFlags gen_common, pre_common, train_common, eval_common, ablate_common, bench_common;
  GraphFlags pre_graph, train_graph, eval_graph, ablate_graph, bench_graph;
  ModelFlags train_model, ablate_model;
  PreprocessFlags pre_pre, train_pre, eval_pre, ablate_pre, bench_pre;

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Write a synthetic dataset");
  add_common(generate, gen_common);
  generate->add_option("--spec", gen.spec, "'synth4' or a JSON spec file");
  generate->add_option("--n-per-class", gen.n_per_class, "Sequences per class");
  generate->add_option("-o,--output", gen.output, "Dataset file (.jsonl or .jsonl.gz)")->required();

  PreprocessArgs pre;
  auto* preprocess = app.add_subcommand("preprocess", "Range filter and keep the largest DBSCAN cluster");
  add_common(preprocess, pre_common);
  add_graph_flags(preprocess, pre_graph);
  add_preprocess_flags(preprocess, pre_pre, false);
  preprocess->add_option("-i,--input", pre.input, "Input dataset")->required()->check(CLI::ExistingFile);
  preprocess->add_option("-o,--output", pre.output, "Output dataset")->required();
  preprocess->add_option("--graphs-out", pre.graphs_out, "Also export graphs as JSON lines");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  add_common(train_cmd, train_common);
  add_graph_flags(train_cmd, train_graph);
  add_model_flags(train_cmd, train_model);
  add_preprocess_flags(train_cmd, train_pre, true);
  train_cmd->add_option("--data", tr.data, "Dataset to split by subject")->check(CLI::ExistingFile);
  train_cmd->add_option("--split", tr.split, "Subjects as TRAIN/VAL/TEST, e.g. 0,1,2,3/4/5");
  train_cmd->add_option("--train", tr.train, "Training dataset")->check(CLI::ExistingFile);
  train_cmd->add_option("--val", tr.val, "Validation dataset")->check(CLI::ExistingFile);
  train_cmd->add_option("--out", tr.out_dir, "Output directory")->required();

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(eval_cmd, eval_common);
  add_graph_flags(eval_cmd, eval_graph);
  add_preprocess_flags(eval_cmd, eval_pre, true);
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "checkpoint.json")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", ev.data, "Dataset")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--subjects", ev.subjects, "Only these subjects, e.g. 5 or 4,5");
  eval_cmd->add_option("--out", ev.out_dir, "Output directory")->required();
  eval_cmd->add_flag("--confusion-csv", ev.confusion_csv, "Also write confusion.csv");

  AblateArgs ab;
  auto* ablate = app.add_subcommand("ablate", "Train and compare every graph variant");
  add_common(ablate, ablate_common);
  add_graph_flags(ablate, ablate_graph);
  add_model_flags(ablate, ablate_model);
  add_preprocess_flags(ablate, ablate_pre, true);
  ablate->add_option("--data", ab.data, "Dataset to split by subject")->check(CLI::ExistingFile);
  ablate->add_option("--split", ab.split, "Subjects as TRAIN/VAL/TEST");
  ablate->add_option("--train", ab.train, "Training dataset")->check(CLI::ExistingFile);
  ablate->add_option("--val", ab.val, "Validation dataset")->check(CLI::ExistingFile);
  ablate->add_option("--out", ab.out_dir, "Output directory")->required();

  BenchArgs bn;
  auto* bench_cmd = app.add_subcommand("bench", "Time graph construction and inference");
  add_common(bench_cmd, bench_common);
  add_graph_flags(bench_cmd, bench_graph);
  add_preprocess_flags(bench_cmd, bench_pre, true);
  bench_cmd->add_option("--graphs", bn.graphs, "Comma-separated graph types");
  bench_cmd->add_option("--grid", bn.grid, "Comma-separated point counts");
  bench_cmd->add_option("--reps", bn.reps, "Timed repetitions per size");
  bench_cmd->add_option("--checkpoint", bn.checkpoint, "Also time inference with this model")->check(CLI::ExistingFile);
  bench_cmd->add_option("--data", bn.data, "Sequences for inference timing")->check(CLI::ExistingFile);
  bench_cmd->add_option("--latency-reps", bn.latency_reps, "Timed passes over the data");
  bench_cmd->add_option("--out", bn.out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (generate->parsed()) {
      RunConfig rc = resolve("generate", gen_common, nullptr, nullptr, nullptr, nullptr);
      return cmd_generate(gen, rc, out);
    }
    if (preprocess->parsed()) {
      return cmd_preprocess(pre, resolve("preprocess", pre_common, &pre_graph, nullptr, &pre_pre, nullptr), out);
    }
    if (train_cmd->parsed()) {
      return cmd_train(tr, resolve("train", train_common, &train_graph, &train_model, &train_pre, &tr.split),
                       out, err);
    }
    if (eval_cmd->parsed()) return cmd_eval(ev, eval_common, eval_graph, eval_pre, out, err);
    if (ablate->parsed()) {
      return cmd_ablate(ab, resolve("ablate", ablate_common, &ablate_graph, &ablate_model, &ablate_pre, &ab.split),
                        out, err);
    }
    if (bench_cmd->parsed()) {
      return cmd_bench(bn, resolve("bench", bench_common, &bench_graph, nullptr, &bench_pre, nullptr), out);
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}

}  // namespace stargraph::cli
