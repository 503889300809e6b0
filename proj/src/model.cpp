#include "stargraph/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "stargraph/error.hpp"

namespace stargraph {
namespace {

using nlohmann::json;

template <class Params, class Out>
void collect(Params& p, Out& out) {
  std::vector<nn::NamedTensor> refs;
  p.projection.append_tensors("projection", refs);
  p.conv1.append_tensors("conv1", refs);
  p.conv2.append_tensors("conv2", refs);
  p.temporal.append_tensors("temporal", refs);
  p.classifier.append_tensors("classifier", refs);
  for (auto& r : refs) out.push_back({std::move(r.name), r.tensor});
}

struct FrameCache {
  Tensor2 input;
  Tensor2 projected;
  nn::GraphConvCache conv1;
  nn::GraphConvCache conv2;
  Tensor2 mask;
  std::size_t rows = 0;
};

Tensor2 spatial_forward_cached(const DdgnnModel& model, const FrameGraph& g, bool training,
                               nn::Rng& rng, FrameCache* cache) {
  const auto& cfg = model.config();
  const auto& p = model.params();
  const std::size_t out_dim = cfg.gcn_dims[1];
  if (cache != nullptr) cache->rows = g.node_count();
  if (g.node_count() == 0) return Tensor2(1, out_dim);

  Tensor2 x = g.features();
  Tensor2 h1 = nn::linear_forward(x, p.projection);
  Tensor2 h2 = nn::graphconv_forward(h1, g, p.conv1, true, cache ? &cache->conv1 : nullptr);
  Tensor2 h3 = nn::graphconv_forward(h2, g, p.conv2, cfg.final_graph_activation,
                                     cache ? &cache->conv2 : nullptr);
  Tensor2 dropped =
      nn::dropout(h3, cfg.dropout_rate, training, rng, cache ? &cache->mask : nullptr);
  if (cache != nullptr) {
    cache->input = std::move(x);
    cache->projected = std::move(h1);
  }
  return nn::global_mean_pool(dropped);
}

void spatial_backward(const DdgnnModel& model, const FrameCache& cache,
                      const Tensor2& grad_pooled, DdgnnParams& grads) {
  if (cache.rows == 0) return;
  const auto& p = model.params();
  Tensor2 grad = nn::global_mean_pool_backward(grad_pooled, cache.rows);
  auto g = grad.values();
  auto m = cache.mask.values();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= m[i];
  Tensor2 grad_h2;
  nn::graphconv_backward(grad, cache.conv2, p.conv2, grads.conv2, &grad_h2);
  Tensor2 grad_h1;
  nn::graphconv_backward(grad_h2, cache.conv1, p.conv1, grads.conv1, &grad_h1);
  nn::linear_backward(cache.input, p.projection, grad_h1, grads.projection, nullptr);
}

struct SequenceCache {
  std::vector<FrameCache> frames;
  nn::BiLstmCache temporal;
  Tensor2 temporal_out;
};

std::vector<double> forward_cached(const DdgnnModel& model, const GraphSequence& gs,
                                   bool training, nn::Rng& rng, SequenceCache* cache) {
  const auto& cfg = model.config();
  if (gs.graphs.size() != cfg.seq_len) {
    throw ConfigError("sequence has " + std::to_string(gs.graphs.size()) +
                      " frames, model expects " + std::to_string(cfg.seq_len));
  }
  Tensor2 frames(gs.graphs.size(), cfg.gcn_dims[1]);
  if (cache != nullptr) cache->frames.assign(gs.graphs.size(), {});
  for (std::size_t t = 0; t < gs.graphs.size(); ++t) {
    Tensor2 v = spatial_forward_cached(model, gs.graphs[t], training, rng,
                                       cache ? &cache->frames[t] : nullptr);
    std::copy(v.values().begin(), v.values().end(), frames.row(t).begin());
  }
  Tensor2 temporal =
      nn::bilstm_forward(frames, model.params().temporal, cache ? &cache->temporal : nullptr);
  Tensor2 logits = nn::linear_forward(temporal, model.params().classifier);
  if (cache != nullptr) cache->temporal_out = std::move(temporal);
  return {logits.values().begin(), logits.values().end()};
}

}  // namespace

// ---------------------------------------------------------------- config ---

void DdgnnConfig::validate() const {
  if (class_count < 2) throw ConfigError("class_count must be >= 2");
  if (seq_len < 1) throw ConfigError("seq_len must be >= 1");
  if (fc_dim < 1 || gcn_dims[0] < 1 || gcn_dims[1] < 1 || lstm_hidden < 1 || lstm_layers < 1) {
    throw ConfigError("layer widths and counts must be >= 1");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ConfigError("dropout_rate must be in [0, 1)");
  }
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (validate_every < 1) throw ConfigError("validate_every must be >= 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
}

json DdgnnConfig::to_json() const {
  return json{{"class_count", class_count},
              {"seq_len", seq_len},
              {"fc_dim", fc_dim},
              {"gcn_dims", gcn_dims},
              {"lstm_hidden", lstm_hidden},
              {"lstm_layers", lstm_layers},
              {"final_graph_activation", final_graph_activation},
              {"dropout_rate", dropout_rate},
              {"lr", lr},
              {"seed", seed},
              {"max_epochs", max_epochs},
              {"validate_every", validate_every},
              {"patience", patience}};
}

DdgnnConfig DdgnnConfig::from_json(const json& j) {
  DdgnnConfig c;
  c.class_count = j.value("class_count", c.class_count);
  c.seq_len = j.value("seq_len", c.seq_len);
  c.fc_dim = j.value("fc_dim", c.fc_dim);
  c.gcn_dims = j.value("gcn_dims", c.gcn_dims);
  c.lstm_hidden = j.value("lstm_hidden", c.lstm_hidden);
  c.lstm_layers = j.value("lstm_layers", c.lstm_layers);
  c.final_graph_activation = j.value("final_graph_activation", c.final_graph_activation);
  c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
  c.lr = j.value("lr", c.lr);
  c.seed = j.value("seed", c.seed);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.validate_every = j.value("validate_every", c.validate_every);
  c.patience = j.value("patience", c.patience);
  return c;
}

// ---------------------------------------------------------------- params ---

DdgnnParams DdgnnParams::zeros(const DdgnnConfig& c) {
  DdgnnParams p;
  p.projection = nn::LinearParams::zeros(3, c.fc_dim);
  p.conv1 = nn::GraphConvParams::zeros(c.fc_dim, c.gcn_dims[0]);
  p.conv2 = nn::GraphConvParams::zeros(c.gcn_dims[0], c.gcn_dims[1]);
  p.temporal = nn::BiLstmParams::zeros(c.gcn_dims[1], c.lstm_hidden, c.lstm_layers);
  p.classifier = nn::LinearParams::zeros(2 * c.lstm_hidden, c.class_count);
  return p;
}

std::vector<nn::NamedTensor> DdgnnParams::tensors() {
  std::vector<nn::NamedTensor> out;
  collect(*this, out);
  return out;
}

std::vector<nn::ConstNamedTensor> DdgnnParams::tensors() const {
  std::vector<nn::ConstNamedTensor> out;
  collect(const_cast<DdgnnParams&>(*this), out);
  return out;
}

DdgnnModel::DdgnnModel(DdgnnConfig config) : config_(config) {
  config_.validate();
  params_ = DdgnnParams::zeros(config_);
  nn::Rng rng(nn::derive_seed(config_.seed, 0));
  nn::glorot_uniform(params_.projection.weight, rng);
  nn::glorot_uniform(params_.conv1.root, rng);
  nn::glorot_uniform(params_.conv1.neighbor, rng);
  nn::glorot_uniform(params_.conv2.root, rng);
  nn::glorot_uniform(params_.conv2.neighbor, rng);
  const std::size_t H = config_.lstm_hidden;
  for (auto& layer : params_.temporal.layers) {
    for (auto* dir : {&layer.forward, &layer.backward}) {
      nn::glorot_uniform(dir->w_input, rng);
      nn::glorot_uniform(dir->w_hidden, rng);
      for (std::size_t u = 0; u < H; ++u) dir->bias(0, H + u) = 1.0;
    }
  }
  nn::glorot_uniform(params_.classifier.weight, rng);
}

DdgnnModel::DdgnnModel(DdgnnConfig config, DdgnnParams params)
    : config_(config), params_(std::move(params)) {
  config_.validate();
  const DdgnnParams expect = DdgnnParams::zeros(config_);
  const auto want = expect.tensors();
  const auto have = std::as_const(params_).tensors();
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (!want[i].tensor->same_shape(*have[i].tensor)) {
      throw ShapeError("parameter " + want[i].name + " has the wrong shape for this config");
    }
  }
}

// --------------------------------------------------------------- forward ---

Tensor2 spatial_forward(const DdgnnModel& model, const FrameGraph& g, bool training,
                        nn::Rng& rng) {
  return spatial_forward_cached(model, g, training, rng, nullptr);
}

std::vector<double> forward(const DdgnnModel& model, const GraphSequence& gs, bool training,
                            nn::Rng& rng) {
  return forward_cached(model, gs, training, rng, nullptr);
}

double loss_and_gradients(const DdgnnModel& model, const GraphSequence& gs, bool training,
                          nn::Rng& rng, DdgnnParams& grads) {
  SequenceCache cache;
  const std::vector<double> logits = forward_cached(model, gs, training, rng, &cache);
  if (gs.label < 0) throw ConfigError("negative label");
  const nn::CrossEntropy ce = nn::softmax_cross_entropy(logits, static_cast<std::size_t>(gs.label));

  const auto& p = model.params();
  Tensor2 grad_logits(1, ce.grad.size(), ce.grad);
  Tensor2 grad_temporal;
  nn::linear_backward(cache.temporal_out, p.classifier, grad_logits, grads.classifier,
                      &grad_temporal);
  Tensor2 grad_frames;
  nn::bilstm_backward(grad_temporal, cache.temporal, p.temporal, grads.temporal, &grad_frames);
  for (std::size_t t = 0; t < cache.frames.size(); ++t) {
    Tensor2 row(1, grad_frames.cols());
    std::copy(grad_frames.row(t).begin(), grad_frames.row(t).end(), row.values().begin());
    spatial_backward(model, cache.frames[t], row, grads);
  }
  return ce.loss;
}

Prediction predict_from_logits(std::span<const double> logits) {
  Prediction pred;
  pred.probabilities = nn::softmax(logits);
  // max_element returns the first maximum, i.e. the lowest index on ties
  pred.label = static_cast<std::size_t>(
      std::max_element(logits.begin(), logits.end()) - logits.begin());
  return pred;
}

Prediction predict(const DdgnnModel& model, const GraphSequence& gs) {
  nn::Rng unused(0);
  const std::vector<double> logits = forward(model, gs, false, unused);
  return predict_from_logits(logits);
}

// ------------------------------------------------------------ evaluation ---

EvalReport report_from_predictions(std::size_t class_count,
                                   std::span<const std::pair<std::size_t, std::size_t>> pairs) {
  EvalReport r;
  r.sample_count = pairs.size();
  r.confusion.assign(class_count, std::vector<std::size_t>(class_count, 0));
  for (const auto& [truth, predicted] : pairs) {
    if (truth >= class_count || predicted >= class_count) {
      throw ConfigError("class index out of range in evaluation");
    }
    ++r.confusion[truth][predicted];
  }
  std::size_t correct = 0;
  r.per_class_accuracy.assign(class_count, 0.0);
  for (std::size_t c = 0; c < class_count; ++c) {
    const std::size_t total =
        std::accumulate(r.confusion[c].begin(), r.confusion[c].end(), std::size_t{0});
    correct += r.confusion[c][c];
    r.per_class_accuracy[c] =
        total == 0 ? 0.0 : static_cast<double>(r.confusion[c][c]) / static_cast<double>(total);
  }
  r.overall_accuracy =
      pairs.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(pairs.size());
  return r;
}

EvalReport evaluate(const DdgnnModel& model, const std::vector<GraphSequence>& test_set) {
  using clock = std::chrono::steady_clock;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(test_set.size());
  double total_ms = 0.0;
  for (const GraphSequence& gs : test_set) {
    const auto start = clock::now();
    const Prediction pred = predict(model, gs);
    total_ms += std::chrono::duration<double, std::milli>(clock::now() - start).count();
    pairs.emplace_back(static_cast<std::size_t>(gs.label), pred.label);
  }
  EvalReport r = report_from_predictions(model.config().class_count, pairs);
  r.avg_inference_ms = test_set.empty() ? 0.0 : total_ms / static_cast<double>(test_set.size());
  return r;
}

double accuracy(const DdgnnModel& model, const std::vector<GraphSequence>& data) {
  if (data.empty()) return 0.0;
  std::size_t correct = 0;
  for (const GraphSequence& gs : data) {
    if (predict(model, gs).label == static_cast<std::size_t>(gs.label)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

json EvalReport::to_json() const {
  return json{{"overall_accuracy", overall_accuracy},
              {"per_class_accuracy", per_class_accuracy},
              {"confusion", confusion},
              {"avg_inference_ms", avg_inference_ms},
              {"sample_count", sample_count}};
}

// -------------------------------------------------------------- training ---

TrainResult train(DdgnnModel model, const std::vector<GraphSequence>& train_set,
                  const std::vector<GraphSequence>& val_set, const TrainProgress& progress) {
  if (train_set.empty()) throw ConfigError("training set is empty");
  if (val_set.empty()) throw ConfigError("validation set is empty");
  const DdgnnConfig cfg = model.config();
  nn::AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;

  TrainResult result{model, {}, -1.0, 0, 0, false, {}};
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto params = model.params().tensors();
  DdgnnParams grads = DdgnnParams::zeros(cfg);
  const auto grad_blocks = grads.tensors();
  const auto grad_refs = std::as_const(grads).tensors();
  std::size_t rounds_without_gain = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    nn::Rng shuffle_rng(nn::derive_seed(cfg.seed, 0x5EED0000ull + epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      const std::size_t idx = order[pos];
      for (const auto& g : grad_blocks) g.tensor->fill(0.0);
      nn::Rng dropout_rng(nn::derive_seed(cfg.seed, epoch * train_set.size() + idx + 1));
      loss_sum += loss_and_gradients(model, train_set[idx], true, dropout_rng, grads);
      nn::adam_step(params, grad_refs, result.adam, adam_cfg);
    }
    TrainLogRow row{epoch, loss_sum / static_cast<double>(order.size()), std::nullopt};
    result.epochs_run = epoch;

    const bool last = epoch == cfg.max_epochs;
    if (epoch % cfg.validate_every == 0 || last) {
      const double acc = accuracy(model, val_set);
      row.val_accuracy = acc;
      if (acc > result.best_val_accuracy) {
        result.best_val_accuracy = acc;
        result.best_epoch = epoch;
        result.model = model;
        rounds_without_gain = 0;
      } else {
        ++rounds_without_gain;
      }
      result.log.push_back(row);
      if (progress) progress(row);
      if (rounds_without_gain >= cfg.patience && !last) {
        result.early_stopped = true;
        break;
      }
      continue;
    }
    result.log.push_back(row);
    if (progress) progress(row);
  }
  return result;
}

void write_train_log_csv(std::ostream& out, std::span<const TrainLogRow> log) {
  out << "epoch,train_loss,val_acc\n";
  out.precision(17);
  for (const auto& row : log) {
    out << row.epoch << ',' << row.train_loss << ',';
    if (row.val_accuracy) out << *row.val_accuracy;
    out << '\n';
  }
}

void write_confusion_csv(std::ostream& out, const EvalReport& report) {
  for (const auto& row : report.confusion) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j != 0) out << ',';
      out << row[j];
    }
    out << '\n';
  }
}

// ------------------------------------------------------------ checkpoint ---

json checkpoint_to_json(const DdgnnModel& model, const json& extra, const nn::AdamState* adam) {
  json tensors = json::array();
  for (const auto& t : model.params().tensors()) {
    tensors.push_back({{"name", t.name},
                       {"rows", t.tensor->rows()},
                       {"cols", t.tensor->cols()},
                       {"data", t.tensor->data()}});
  }
  json j{{"format", "stargraph-ddgnn"},
         {"version", kCheckpointVersion},
         {"config", model.config().to_json()},
         {"seed", model.config().seed},
         {"extra", extra},
         {"tensors", std::move(tensors)}};
  if (adam != nullptr) {
    json first = json::array();
    json second = json::array();
    for (const auto& m : adam->first_moment) first.push_back(m.data());
    for (const auto& v : adam->second_moment) second.push_back(v.data());
    j["adam"] = {{"step", adam->step}, {"first_moment", first}, {"second_moment", second}};
  }
  return j;
}

Checkpoint checkpoint_from_json(const json& j) {
  if (j.value("format", std::string{}) != "stargraph-ddgnn") {
    throw DataError("not a stargraph-ddgnn checkpoint");
  }
  if (j.value("version", 0) != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + j.value("version", json()).dump());
  }
  const DdgnnConfig config = DdgnnConfig::from_json(j.at("config"));
  config.validate();
  DdgnnParams params = DdgnnParams::zeros(config);
  auto refs = params.tensors();
  const json& tensors = j.at("tensors");
  if (tensors.size() != refs.size()) throw DataError("checkpoint tensor count mismatch");
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const json& t = tensors[i];
    if (t.at("name").get<std::string>() != refs[i].name) {
      throw DataError("checkpoint tensor " + std::to_string(i) + " is " +
                      t.at("name").get<std::string>() + ", expected " + refs[i].name);
    }
    *refs[i].tensor = Tensor2(t.at("rows").get<std::size_t>(), t.at("cols").get<std::size_t>(),
                              t.at("data").get<std::vector<double>>());
  }
  Checkpoint ck{DdgnnModel(config, std::move(params)), j.value("extra", json::object()),
                std::nullopt};
  if (j.contains("adam")) {
    nn::AdamState st;
    st.step = j["adam"].at("step").get<std::uint64_t>();
    const json& first = j["adam"].at("first_moment");
    const json& second = j["adam"].at("second_moment");
    if (first.size() != refs.size() || second.size() != refs.size()) {
      throw DataError("checkpoint adam state does not match parameters");
    }
    for (std::size_t i = 0; i < refs.size(); ++i) {
      const Tensor2& shape = *refs[i].tensor;
      st.first_moment.emplace_back(shape.rows(), shape.cols(), first[i].get<std::vector<double>>());
      st.second_moment.emplace_back(shape.rows(), shape.cols(),
                                    second[i].get<std::vector<double>>());
    }
    ck.adam = std::move(st);
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const DdgnnModel& model,
                     const json& extra, const nn::AdamState* adam) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(model, extra, adam).dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  try {
    return checkpoint_from_json(j);
  } catch (const json::exception& e) {
    throw DataError("checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace stargraph
