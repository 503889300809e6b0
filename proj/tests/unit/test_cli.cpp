#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "json.hpp"
#include "stargraph/data.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "stargraph");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = stargraph::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path workdir() {
  const char* env = std::getenv("STARGRAPH_TEST_TMP");
  fs::path dir = env ? fs::path(env) : fs::temp_directory_path() / "stargraph_cli_test";
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

std::vector<std::string> data_lines(const fs::path& p) {
  std::vector<std::string> lines;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') lines.push_back(line);
  return lines;
}

// Short sequences keep the training commands quick.
fs::path small_dataset() {
  const fs::path dir = workdir();
  const fs::path spec = dir / "small_spec.json";
  stargraph::SynthSpec s = stargraph::synth4_spec();
  s.seq_len = 4;
  std::ofstream(spec) << s.to_json().dump();
  const fs::path data = dir / "small.jsonl";
  if (!fs::exists(data)) {
    REQUIRE(run({"generate", "--spec", spec.string(), "--n-per-class", "6", "--seed", "1", "-o",
                 data.string()})
                .code == 0);
  }
  return data;
}

const std::vector<std::string> kTiny{"--epochs", "2", "--validate-every", "1", "--lstm-hidden",
                                     "4", "--fc-dim", "8", "--split", "0,1,2,3/4/5"};

std::vector<std::string> with_tiny(std::vector<std::string> args) {
  args.insert(args.end(), kTiny.begin(), kTiny.end());
  return args;
}

}  // namespace

TEST_CASE("generate") {
  const fs::path dir = workdir();
  const auto a = dir / "gen_a.jsonl", b = dir / "gen_b.jsonl";
  REQUIRE(run({"generate", "--n-per-class", "10", "--seed", "5", "-o", a.string()}).code == 0);
  REQUIRE(run({"generate", "--n-per-class", "10", "--seed", "5", "-o", b.string()}).code == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(stargraph::load_dataset(a).sequences.size() == 40);

  SUBCASE("seed from the environment") {
    const auto c = dir / "gen_c.jsonl";
    setenv("STARGRAPH_SEED", "5", 1);
    const Result r = run({"generate", "--n-per-class", "10", "-o", c.string()});
    unsetenv("STARGRAPH_SEED");
    REQUIRE(r.code == 0);
    CHECK(slurp(c) == slurp(a));
    CHECK(r.out.find("40 sequences") != std::string::npos);
  }

  SUBCASE("invalid spec leaves no file") {
    const auto spec = dir / "bad_spec.json";
    json j = stargraph::synth4_spec().to_json();
    j["scatter_sigma"] = 0.0;
    std::ofstream(spec) << j.dump();
    const auto out = dir / "never.jsonl";
    fs::remove(out);
    CHECK(run({"generate", "--spec", spec.string(), "-o", out.string()}).code != 0);
    CHECK(!fs::exists(out));
    CHECK(!fs::exists(dir / "never.jsonl.tmp"));
  }
}

TEST_CASE("usage errors") {
  CHECK(run({}).code == 1);
  CHECK(run({"frobnicate"}).code == 1);
  const Result r = run({"train", "--data", small_dataset().string(), "--split", "0/1/2",
                        "--graph", "hexagon", "--out", (workdir() / "x").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("dstar, ustar, knn, radius, fc, empty") != std::string::npos);
  CHECK(run({"train", "--data", small_dataset().string(), "--out", "x"}).code == 1);
  CHECK(run({"train", "--data", small_dataset().string(), "--split", "0/1/2", "--center", "1,2",
             "--out", "x"})
            .code == 1);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("train and eval") {
  const fs::path dir = workdir();
  const fs::path data = small_dataset();
  const fs::path out = dir / "train_run";
  const Result t = run(with_tiny({"train", "--data", data.string(), "--graph", "dstar", "--center",
                                  "0,1,0", "--seed", "9", "--out", out.string()}));
  INFO(t.err);
  REQUIRE(t.code == 0);
  const json ck = read_json(out / "checkpoint.json");
  CHECK(ck["extra"]["graph"]["type"] == "dstar");
  CHECK(ck["extra"]["graph"]["center"]["point"] == json::array({0.0, 1.0, 0.0}));
  CHECK(ck["extra"]["seed"] == 9);
  CHECK(ck["config"]["max_epochs"] == 2);
  CHECK(ck["config"]["class_count"] == 4);
  CHECK(read_json(out / "eval.json")["config"]["seed"] == 9);
  const std::string log = slurp(out / "train_log.csv");
  CHECK(log.rfind("# config: {", 0) == 0);
  CHECK(data_lines(out / "train_log.csv").size() == 3);

  SUBCASE("same seed, same checkpoint") {
    const fs::path again = dir / "train_run_again";
    REQUIRE(run(with_tiny({"train", "--data", data.string(), "--seed", "9", "--center", "0,1,0",
                           "--out", again.string()}))
                .code == 0);
    CHECK(read_json(again / "checkpoint.json")["tensors"] == ck["tensors"]);
  }

  SUBCASE("eval with confusion matrix") {
    const fs::path ev = dir / "eval_run";
    const Result r = run({"eval", "--checkpoint", (out / "checkpoint.json").string(), "--data",
                          data.string(), "--subjects", "5", "--out", ev.string(),
                          "--confusion-csv"});
    REQUIRE(r.code == 0);
    CHECK(r.err.empty());
    const json report = read_json(ev / "eval.json")["report"];
    CHECK(report["sample_count"] == 4);
    CHECK(report["avg_inference_ms"].get<double>() > 0.0);
    const auto rows = data_lines(ev / "confusion.csv");
    REQUIRE(rows.size() == 4);
    int total = 0;
    for (const auto& row : rows) {
      std::istringstream in(row);
      std::string cell;
      int cols = 0;
      while (std::getline(in, cell, ',')) {
        total += std::stoi(cell);
        ++cols;
      }
      CHECK(cols == 4);
    }
    CHECK(total == 4);
  }

  SUBCASE("graph mismatch warns and uses the flag") {
    const fs::path ev = dir / "eval_mismatch";
    const Result r = run({"eval", "--checkpoint", (out / "checkpoint.json").string(), "--data",
                          data.string(), "--graph", "fc", "--out", ev.string()});
    REQUIRE(r.code == 0);
    CHECK(r.err.find("warning") != std::string::npos);
    CHECK(read_json(ev / "eval.json")["config"]["graph"]["type"] == "fc");
  }

  SUBCASE("bad data is exit code 2") {
    const fs::path bad = dir / "bad.jsonl";
    std::ofstream(bad) << R"({"format":"pcseq","version":1,"seq_len":4,"classes":4})" << "\n{oops\n";
    CHECK(run({"eval", "--checkpoint", (out / "checkpoint.json").string(), "--data", bad.string(),
               "--out", (dir / "bad_eval").string()})
              .code == 2);
  }
}

TEST_CASE("config file precedence") {
  const fs::path dir = workdir();
  const fs::path cfg = dir / "run_config.json";
  std::ofstream(cfg) << R"({"seed": 4, "graph": {"type": "knn", "k": 3},
                            "model": {"lstm_hidden": 5, "max_epochs": 1}})";
  const fs::path out = dir / "config_run";
  const Result r = run({"train", "--config", cfg.string(), "--data", small_dataset().string(),
                        "--split", "0,1,2,3/4/5", "--graph", "radius", "--fc-dim", "6", "--out",
                        out.string()});
  REQUIRE(r.code == 0);
  const json c = read_json(out / "checkpoint.json")["extra"];
  CHECK(c["graph"]["type"] == "radius");  // flag beats file
  CHECK(c["graph"]["k"] == 3);            // file beats default
  CHECK(c["seed"] == 4);
  CHECK(c["model"]["lstm_hidden"] == 5);
  CHECK(c["model"]["fc_dim"] == 6);
  CHECK(c["model"]["dropout_rate"] == 0.3);  // default
}

TEST_CASE("ablate") {
  const fs::path out = workdir() / "ablate_run";
  const Result r = run(with_tiny({"ablate", "--data", small_dataset().string(), "--seed", "7",
                                  "--out", out.string()}));
  INFO(r.err);
  REQUIRE(r.code == 0);
  const auto lines = data_lines(out / "ablation.csv");
  REQUIRE(lines.size() == 11);
  const auto columns = [](const std::string& line) { return std::count(line.begin(), line.end(), ',') + 1; };
  for (const auto& line : lines) CHECK(columns(line) == columns(lines[0]));
  for (std::size_t i = 1; i < lines.size(); ++i) CHECK(lines[i].find(",7,") != std::string::npos);
  const json rows = read_json(out / "ablation.json")["rows"];
  for (const auto& row : rows) CHECK(row["seed"] == 7);
}

TEST_CASE("bench") {
  const fs::path out = workdir() / "bench_run";
  const Result r = run({"bench", "--graphs", "dstar,fc", "--grid", "16,32,64,128,256", "--out",
                        out.string()});
  REQUIRE(r.code == 0);
  const json j = read_json(out / "scaling.json");
  CHECK(j["reports"].size() == 2);
  CHECK(j["config"]["command"] == "bench");
  for (const auto& e : j["edge_checks"]) CHECK(e["edges"] == e["expected"]);
  CHECK(run({"bench", "--grid", "16,32", "--out", out.string()}).code == 1);
}
