// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. Pass a list of criterion numbers to run a
// subset, e.g. `acceptance 1 2 7`.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "stargraph/bench.hpp"
#include "stargraph/data.hpp"
#include "stargraph/error.hpp"
#include "stargraph/model.hpp"

using namespace stargraph;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double limit_s;
  std::function<Outcome()> run;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

constexpr GraphType kAllTypes[] = {GraphType::DStar, GraphType::UStar, GraphType::Knn,
                                   GraphType::Radius, GraphType::Fc, GraphType::Empty};

GraphParams random_params(GraphType type, std::mt19937_64& rng) {
  GraphParams p;
  p.type = type;
  p.k = 1 + rng() % 6;
  p.radius = 0.3 + 0.2 * static_cast<double>(rng() % 5);
  p.center.fixed = oracle::random_points(1, rng).points[0];
  return p;
}

// ------------------------------------------------------------ criterion 1 ---

Outcome graphconv_oracle() {
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const GraphType type = kAllTypes[trial % 6];
    const PointFrame f = oracle::random_points(rng() % 31, rng);
    const FrameGraph g = build_graph(f, random_params(type, rng));
    const std::size_t in = 1 + rng() % 6, out = 1 + rng() % 6;
    const Tensor2 h = oracle::random_tensor(g.node_count(), in, rng);
    const nn::GraphConvParams p{oracle::random_tensor(out, in, rng),
                                oracle::random_tensor(out, in, rng)};
    const bool act = trial % 2 == 0;
    const Tensor2 sparse = nn::graphconv_forward(h, g, p, act);
    const Tensor2 dense =
        oracle::dense_graphconv(h, adjacency_matrix(g), p.root, p.neighbor, act);
    if (!sparse.same_shape(dense)) return {false, "shape mismatch at instance " + std::to_string(trial)};
    worst = std::max(worst, oracle::max_abs_diff(sparse, dense));
  }
  return {worst <= 1e-12, "200 instances, max |sparse - dense| = " + fmt(worst)};
}

// ------------------------------------------------------------ criterion 2 ---

Outcome star_propositions() {
  std::mt19937_64 rng(202);
  int dstar_invariant = 0, ustar_changed = 0;
  for (int trial = 0; trial < 100; ++trial) {
    PointFrame f = oracle::random_points(2 + rng() % 29, rng);
    const Point3 center = oracle::random_points(1, rng).points[0];
    const nn::GraphConvParams p1{oracle::random_tensor(5, 3, rng), oracle::random_tensor(5, 3, rng)};
    const nn::GraphConvParams p2{oracle::random_tensor(4, 5, rng), oracle::random_tensor(4, 5, rng)};
    PointFrame moved = f;
    Point3& victim = moved.points[rng() % moved.size()];
    victim = {victim.x + 0.7, victim.y - 0.3, victim.z + 1.1};

    auto center_row = [&](const FrameGraph& g) {
      const Tensor2 h1 = nn::graphconv_forward(g.features(), g, p1, true);
      const Tensor2 h2 = nn::graphconv_forward(h1, g, p2, true);
      return std::vector<double>(h2.row(0).begin(), h2.row(0).end());
    };
    if (center_row(build_dstar(f, center)) == center_row(build_dstar(moved, center))) ++dstar_invariant;
    if (center_row(build_ustar(f, center)) != center_row(build_ustar(moved, center))) ++ustar_changed;
  }
  return {dstar_invariant == 100 && ustar_changed == 100,
          "DStar center row bit-identical in " + std::to_string(dstar_invariant) +
              "/100, UStar center row changed in " + std::to_string(ustar_changed) + "/100"};
}

// ------------------------------------------------------------ criterion 3 ---

// Sum of out * weights: a generic scalar loss whose upstream gradient is
// `weights`.
double weighted_sum(const Tensor2& out, const Tensor2& weights) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out.values()[i] * weights.values()[i];
  return s;
}

struct GradCheckTally {
  double worst = 0.0;
  std::string worst_name;
  void add(const std::string& label, const nn::GradCheckReport& r) {
    for (const auto& b : r.blocks) {
      if (b.max_rel_error >= worst) {
        worst = b.max_rel_error;
        worst_name = label + ":" + b.name;
      }
    }
  }
};

Outcome gradient_checks() {
  std::mt19937_64 rng(303);
  GradCheckTally tally;
  using nn::ConstNamedTensor;
  using nn::NamedTensor;

  {  // linear
    Tensor2 x = oracle::random_tensor(3, 4, rng);
    nn::LinearParams p{oracle::random_tensor(2, 4, rng), oracle::random_tensor(1, 2, rng)};
    const Tensor2 w = oracle::random_tensor(3, 2, rng);
    nn::LinearParams g = nn::LinearParams::zeros(4, 2);
    Tensor2 gx;
    nn::linear_backward(x, p, w, g, &gx);
    const NamedTensor params[] = {{"weight", &p.weight}, {"bias", &p.bias}, {"x", &x}};
    const ConstNamedTensor grads[] = {{"weight", &g.weight}, {"bias", &g.bias}, {"x", &gx}};
    tally.add("linear", nn::grad_check([&] { return weighted_sum(nn::linear_forward(x, p), w); },
                                       params, grads));
  }

  for (GraphType type : kAllTypes) {  // graphconv, with and without sigmoid
    for (bool act : {true, false}) {
      const FrameGraph graph = build_graph(oracle::random_points(3, rng), random_params(type, rng));
      Tensor2 h = oracle::random_tensor(graph.node_count(), 3, rng);
      nn::GraphConvParams p{oracle::random_tensor(2, 3, rng), oracle::random_tensor(2, 3, rng)};
      const Tensor2 w = oracle::random_tensor(graph.node_count(), 2, rng);
      nn::GraphConvCache cache;
      nn::graphconv_forward(h, graph, p, act, &cache);
      nn::GraphConvParams g = nn::GraphConvParams::zeros(3, 2);
      Tensor2 gh;
      nn::graphconv_backward(w, cache, p, g, &gh);
      const NamedTensor params[] = {{"root", &p.root}, {"neighbor", &p.neighbor}, {"h", &h}};
      const ConstNamedTensor grads[] = {{"root", &g.root}, {"neighbor", &g.neighbor}, {"h", &gh}};
      tally.add(std::string("graphconv/") + std::string(to_string(type)),
                nn::grad_check([&] { return weighted_sum(nn::graphconv_forward(h, graph, p, act), w); },
                               params, grads));
    }
  }

  {  // mean pool
    Tensor2 h = oracle::random_tensor(4, 3, rng);
    const Tensor2 w = oracle::random_tensor(1, 3, rng);
    const Tensor2 gh = nn::global_mean_pool_backward(w, 4);
    const NamedTensor params[] = {{"h", &h}};
    const ConstNamedTensor grads[] = {{"h", &gh}};
    tally.add("mean_pool", nn::grad_check([&] { return weighted_sum(nn::global_mean_pool(h), w); },
                                          params, grads));
  }

  {  // dropout with a fixed mask is linear in its input
    Tensor2 h = oracle::random_tensor(4, 3, rng);
    const Tensor2 w = oracle::random_tensor(4, 3, rng);
    nn::Rng r0(5);
    Tensor2 mask;
    nn::dropout(h, 0.3, true, r0, &mask);
    Tensor2 gh(4, 3);
    for (std::size_t i = 0; i < gh.size(); ++i) gh.values()[i] = w.values()[i] * mask.values()[i];
    const NamedTensor params[] = {{"h", &h}};
    const ConstNamedTensor grads[] = {{"h", &gh}};
    tally.add("dropout", nn::grad_check(
                             [&] {
                               nn::Rng r(5);
                               return weighted_sum(nn::dropout(h, 0.3, true, r), w);
                             },
                             params, grads));
  }

  for (std::size_t layers : {1u, 2u}) {  // bi-lstm
    Tensor2 v = oracle::random_tensor(3, 2, rng);
    nn::BiLstmParams p = nn::BiLstmParams::zeros(2, 3, layers);
    std::vector<NamedTensor> params;
    p.append_tensors("lstm.", params);
    for (auto& t : params) oracle::randomize(*t.tensor, rng, 0.8);
    const Tensor2 w = oracle::random_tensor(1, 6, rng);
    nn::BiLstmCache cache;
    nn::bilstm_forward(v, p, &cache);
    nn::BiLstmParams g = nn::BiLstmParams::zeros(2, 3, layers);
    Tensor2 gv;
    nn::bilstm_backward(w, cache, p, g, &gv);
    std::vector<NamedTensor> grad_refs;
    g.append_tensors("lstm.", grad_refs);
    std::vector<ConstNamedTensor> grads;
    for (auto& t : grad_refs) grads.push_back({t.name, t.tensor});
    params.push_back({"v", &v});
    grads.push_back({"v", &gv});
    tally.add("bilstm" + std::to_string(layers),
              nn::grad_check([&] { return weighted_sum(nn::bilstm_forward(v, p), w); }, params, grads));
  }

  {  // softmax cross-entropy
    Tensor2 logits = oracle::random_tensor(1, 5, rng, 2.0);
    const auto ce = nn::softmax_cross_entropy(logits.values(), 3);
    Tensor2 g(1, 5);
    std::copy(ce.grad.begin(), ce.grad.end(), g.values().begin());
    const NamedTensor params[] = {{"logits", &logits}};
    const ConstNamedTensor grads[] = {{"logits", &g}};
    tally.add("cross_entropy",
              nn::grad_check([&] { return nn::softmax_cross_entropy(logits.values(), 3).loss; },
                             params, grads));
  }

  // Full model: three frames of at most four nodes, dropout off.
  DdgnnConfig cfg;
  cfg.class_count = 3;
  cfg.seq_len = 3;
  cfg.fc_dim = 6;
  cfg.gcn_dims = {5, 4};
  cfg.lstm_hidden = 4;
  cfg.dropout_rate = 0.0;
  for (GraphType type : kAllTypes) {
    DdgnnModel model(cfg);
    PointSequence s;
    s.label = 1;
    for (int t = 0; t < 3; ++t) s.frames.push_back(oracle::random_points(1 + rng() % 3, rng));
    const GraphSequence gs = build_sequence(s, random_params(type, rng));
    DdgnnParams grads = DdgnnParams::zeros(cfg);
    nn::Rng r0(0);
    loss_and_gradients(model, gs, false, r0, grads);
    std::vector<ConstNamedTensor> analytic;
    for (auto& t : grads.tensors()) analytic.push_back({t.name, t.tensor});
    tally.add(std::string("ddgnn/") + std::string(to_string(type)),
              nn::grad_check(
                  [&] {
                    nn::Rng r(0);
                    return nn::softmax_cross_entropy(forward(model, gs, false, r), 1).loss;
                  },
                  model.params().tensors(), analytic));
  }

  return {tally.worst < 1e-4, "worst relative error " + fmt(tally.worst) + " (" + tally.worst_name + ")"};
}

// ------------------------------------------------------------ criterion 4 ---

Outcome dbscan_oracle() {
  std::mt19937_64 rng(404);
  int equal = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const PointFrame f = oracle::random_points(rng() % 41, rng, 1.0 + 0.5 * (trial % 3));
    const double eps = 0.15 + 0.05 * static_cast<double>(rng() % 6);
    const std::size_t min_pts = 1 + rng() % 4;
    const auto mine = oracle::canonical(oracle::labels_from(dbscan(f, eps, min_pts), f.size()));
    const auto ref = oracle::canonical(oracle::dbscan_labels(f.points, eps, min_pts));
    equal += mine == ref;
  }
  return {equal == 500, std::to_string(equal) + "/500 partitions equal"};
}

// ------------------------------------------------------------ criterion 5 ---

Outcome complexity() {
  const std::vector<std::size_t> grid{64, 128, 256, 512, 1024, 2048, 4096};
  bool pass = true;
  std::ostringstream detail;
  for (GraphType type : kAllTypes) {
    GraphParams p;
    p.type = type;
    const auto report = bench::time_construction(p, grid, 20, 7);
    const bool linear = type == GraphType::DStar || type == GraphType::UStar || type == GraphType::Empty;
    const double lo = linear ? 0.7 : 1.7, hi = linear ? 1.3 : 2.3;
    const bool ok = report.dropped_sizes.empty() && report.slope >= lo && report.slope <= hi;
    pass = pass && ok;
    detail << to_string(type) << " " << fmt(report.slope) << (ok ? "" : "!") << ", ";

    for (std::size_t n : grid) {
      const std::size_t edges = bench::count_edges(p, n, 7);
      std::size_t want = 0;
      if (type == GraphType::Knn) {
        want = n * std::min(p.k, n - 1);
      } else if (type == GraphType::Radius) {
        const auto sets = oracle::radius_sets(bench::random_frame(n, 7).points, p.radius);
        for (const auto& s : sets) want += s.size();
      } else {
        want = bench::expected_edges(type, n);
      }
      if (edges != want) {
        pass = false;
        detail << "[edge count " << edges << " != " << want << " at n=" << n << "] ";
      }
    }
  }
  detail << "edge counts checked";
  return {pass, detail.str()};
}

// ------------------------------------------------------------ criterion 6 ---

Outcome learnability() {
  const Dataset ds = synth_generate(synth4_spec(), 75, 0);
  const SubjectSplit split = split_by_subject(ds, {0, 1, 2, 3}, {4}, {5});
  auto graphs = [](const Dataset& d) {
    std::vector<GraphSequence> out;
    for (const auto& s : d.sequences) out.push_back(build_sequence(s, GraphParams{}));
    return out;
  };
  const auto train_set = graphs(split.train), val_set = graphs(split.val), test_set = graphs(split.test);
  DdgnnConfig cfg;
  cfg.class_count = 4;
  cfg.max_epochs = 50;
  const TrainResult r = train(DdgnnModel(cfg), train_set, val_set);
  const double acc = accuracy(r.model, test_set);
  return {acc >= 0.9 && r.epochs_run <= 50,
          "split " + std::to_string(train_set.size()) + "/" + std::to_string(val_set.size()) + "/" +
              std::to_string(test_set.size()) + ", test accuracy " + fmt(acc) + " (best val " +
              fmt(r.best_val_accuracy) + " at epoch " + std::to_string(r.best_epoch) + " of " +
              std::to_string(r.epochs_run) + ")"};
}

// ------------------------------------------------------------ criterion 7 ---

Outcome invariances() {
  std::mt19937_64 rng(707);
  std::ostringstream detail;
  bool pass = true;

  DdgnnConfig cfg;
  cfg.class_count = 5;
  cfg.seq_len = 4;
  const DdgnnModel model(cfg);
  double worst_perm = 0.0;
  for (int trial = 0; trial < 12; ++trial) {
    PointSequence s;
    for (int t = 0; t < 4; ++t) s.frames.push_back(oracle::random_points(rng() % 25, rng));
    PointSequence shuffled = s;
    for (auto& f : shuffled.frames) std::shuffle(f.points.begin(), f.points.end(), rng);
    GraphParams p;
    p.type = kAllTypes[trial % 6];
    nn::Rng unused(0);
    const auto a = forward(model, build_sequence(s, p), false, unused);
    const auto b = forward(model, build_sequence(shuffled, p), false, unused);
    for (std::size_t c = 0; c < a.size(); ++c) worst_perm = std::max(worst_perm, std::abs(a[c] - b[c]));
  }
  pass = pass && worst_perm <= 1e-10;
  detail << "permutation max |dlogit| " << fmt(worst_perm);

  double worst_shift = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> logits(2 + rng() % 12);
    std::normal_distribution<double> d(0.0, 3.0);
    for (auto& v : logits) v = d(rng);
    std::vector<double> shifted = logits;
    const double c = d(rng) * 10.0;
    for (auto& v : shifted) v += c;
    const auto pa = nn::softmax(logits), pb = nn::softmax(shifted);
    for (std::size_t i = 0; i < pa.size(); ++i) worst_shift = std::max(worst_shift, std::abs(pa[i] - pb[i]));
  }
  pass = pass && worst_shift <= 1e-12;
  detail << ", softmax shift " << fmt(worst_shift);

  double worst_ce = 0.0;
  for (std::size_t m = 2; m <= 13; ++m) {
    const std::vector<double> uniform(m, 0.37);
    worst_ce = std::max(worst_ce,
                        std::abs(nn::softmax_cross_entropy(uniform, m - 1).loss - std::log(static_cast<double>(m))));
  }
  pass = pass && worst_ce <= 1e-12;
  detail << ", uniform CE vs ln m " << fmt(worst_ce);

  DdgnnConfig small = cfg;
  small.class_count = 3;
  small.seq_len = 3;
  small.fc_dim = 8;
  small.gcn_dims = {6, 4};
  small.lstm_hidden = 6;
  small.max_epochs = 4;
  small.validate_every = 1;
  small.seed = 11;
  std::vector<GraphSequence> data;
  for (int i = 0; i < 9; ++i) {
    PointSequence s;
    s.label = i % 3;
    for (int t = 0; t < 3; ++t) s.frames.push_back(oracle::random_points(3 + rng() % 8, rng));
    data.push_back(build_sequence(s, GraphParams{}));
  }
  const TrainResult a = train(DdgnnModel(small), data, data);
  const TrainResult b = train(DdgnnModel(small), data, data);
  const bool same = a.log == b.log && a.model.params().classifier.weight == b.model.params().classifier.weight;
  pass = pass && same;
  detail << ", training logs " << (same ? "identical" : "DIFFER");
  return {pass, detail.str()};
}

// ------------------------------------------------------------ criterion 8 ---

Outcome round_trip() {
  namespace fs = std::filesystem;
  bool pass = true;
  std::ostringstream detail;
  SynthSpec spec = synth4_spec();
  spec.ghost_points_max = 3;
  const Dataset ds = synth_generate(spec, 6, 17);
  const fs::path dir = fs::temp_directory_path();
  int round_trips = 0;
  for (const char* name : {"stargraph_accept.jsonl", "stargraph_accept.jsonl.gz"}) {
    const fs::path p = dir / name;
    save_dataset(p, ds);
    round_trips += load_dataset(p) == ds;
    fs::remove(p);
  }
  pass = round_trips == 2;
  detail << round_trips << "/2 file round trips";

  const std::string header = R"({"format":"pcseq","version":1,"seq_len":2,"classes":2})";
  const std::string good = R"({"label":1,"subject":0,"frames":[[[1,2,3]],[]]})";
  struct Bad {
    std::string text;
    int line;
  };
  const std::vector<Bad> cases{
      {header + "\n" + good + "\n" + R"({"label":1,"subject":0,"frames":[[]]})", 3},
      {header + "\n" + good + "\n" + good + "\n{\"label\":", 4},
      {header + "\n" + R"({"label":2,"subject":0,"frames":[[],[]]})", 2},
      {header + "\n\n" + R"({"label":0,"subject":0,"frames":[[[1,2]],[]]})", 3},
      {header + "\n" + good + "\n" + R"({"label":0,"frames":[[],[]]})", 3},
      {R"({"format":"pcseq","version":2,"seq_len":2,"classes":2})", 1},
  };
  int located = 0;
  for (const auto& c : cases) {
    std::istringstream in(c.text);
    try {
      read_dataset(in);
    } catch (const DataError& e) {
      located += e.line() == static_cast<std::size_t>(c.line) &&
                 std::string(e.what()).find("line " + std::to_string(c.line)) != std::string::npos;
    }
  }
  pass = pass && located == static_cast<int>(cases.size());
  detail << ", " << located << "/" << cases.size() << " malformed inputs rejected at the right line";
  return {pass, detail.str()};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "GraphConv sparse vs dense oracle", 10.0, graphconv_oracle},
      {2, "star-graph center propositions", 5.0, star_propositions},
      {3, "finite-difference gradients", 60.0, gradient_checks},
      {4, "DBSCAN vs reference", 10.0, dbscan_oracle},
      {5, "construction complexity", 180.0, complexity},
      {6, "synth4 learnability", 600.0, learnability},
      {7, "invariance suite", 60.0, invariances},
      {8, "dataset format round trip", 30.0, round_trip},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.contains(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.limit_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::cout << (pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << o.detail << " ("
              << fmt(secs) << " s, limit " << c.limit_s << " s" << (in_time ? "" : ", TOO SLOW") << ")"
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
