#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "json.hpp"
#include "stargraph/graph.hpp"
#include "stargraph/nn.hpp"

namespace stargraph {

/// Architecture and training protocol. Defaults:
/// dropout 0.3, Adam lr 1e-3, validation every 5 epochs, patience 10 rounds.
struct DdgnnConfig {
  std::size_t class_count = 13;
  std::size_t seq_len = 50;
  std::size_t fc_dim = 64;
  std::array<std::size_t, 2> gcn_dims{32, 16};
  std::size_t lstm_hidden = 64;  // per direction
  std::size_t lstm_layers = 2;
  bool final_graph_activation = true;
  double dropout_rate = 0.3;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::size_t max_epochs = 50;
  std::size_t validate_every = 5;
  std::size_t patience = 10;  // validation rounds without improvement

  void validate() const;
  nlohmann::json to_json() const;
  static DdgnnConfig from_json(const nlohmann::json& j);
};

struct DdgnnParams {
  nn::LinearParams projection;
  nn::GraphConvParams conv1;
  nn::GraphConvParams conv2;
  nn::BiLstmParams temporal;
  nn::LinearParams classifier;

  static DdgnnParams zeros(const DdgnnConfig& config);
  std::vector<nn::NamedTensor> tensors();
  std::vector<nn::ConstNamedTensor> tensors() const;
};

/// Per-frame FC projection and two GraphConv layers with mean pooling,
/// followed by a stacked Bi-LSTM over the frame vectors and a linear
/// classifier.
class DdgnnModel {
 public:
  /// Glorot-uniform weights, zero biases, LSTM forget bias 1, seeded from
  /// config.seed.
  explicit DdgnnModel(DdgnnConfig config);
  DdgnnModel(DdgnnConfig config, DdgnnParams params);

  const DdgnnConfig& config() const noexcept { return config_; }
  DdgnnParams& params() noexcept { return params_; }
  const DdgnnParams& params() const noexcept { return params_; }

 private:
  DdgnnConfig config_;
  DdgnnParams params_;
};

/// 1 x gcn_dims[1] frame vector; a zero-node graph gives zeros.
Tensor2 spatial_forward(const DdgnnModel& model, const FrameGraph& g, bool training,
                        nn::Rng& rng);

/// Raw class logits. Throws ConfigError when the sequence length differs
/// from config().seq_len.
std::vector<double> forward(const DdgnnModel& model, const GraphSequence& gs, bool training,
                            nn::Rng& rng);

/// Cross-entropy loss for gs.label; gradients are accumulated into `grads`.
double loss_and_gradients(const DdgnnModel& model, const GraphSequence& gs, bool training,
                          nn::Rng& rng, DdgnnParams& grads);

struct Prediction {
  std::size_t label = 0;
  std::vector<double> probabilities;
};

/// Softmax over inference-mode logits; ties go to the lowest class index.
Prediction predict(const DdgnnModel& model, const GraphSequence& gs);
Prediction predict_from_logits(std::span<const double> logits);

struct EvalReport {
  double overall_accuracy = 0.0;
  std::vector<double> per_class_accuracy;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  double avg_inference_ms = 0.0;
  std::size_t sample_count = 0;

  nlohmann::json to_json() const;
};

EvalReport evaluate(const DdgnnModel& model, const std::vector<GraphSequence>& test_set);

/// Builds an EvalReport from (true, predicted) pairs.
EvalReport report_from_predictions(std::size_t class_count,
                                   std::span<const std::pair<std::size_t, std::size_t>> pairs);

struct TrainLogRow {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  std::optional<double> val_accuracy;

  friend bool operator==(const TrainLogRow&, const TrainLogRow&) = default;
};

struct TrainResult {
  DdgnnModel model;  // best validation checkpoint
  std::vector<TrainLogRow> log;
  double best_val_accuracy = 0.0;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  bool early_stopped = false;
  nn::AdamState adam;
};

using TrainProgress = std::function<void(const TrainLogRow&)>;

/// One Adam step per sequence in seeded-shuffled order. Validates every
/// validate_every epochs (and after the final epoch), keeps the best model
/// and stops once `patience` consecutive rounds bring no improvement.
TrainResult train(DdgnnModel model, const std::vector<GraphSequence>& train_set,
                  const std::vector<GraphSequence>& val_set, const TrainProgress& progress = {});

double accuracy(const DdgnnModel& model, const std::vector<GraphSequence>& data);

void write_train_log_csv(std::ostream& out, std::span<const TrainLogRow> log);
void write_confusion_csv(std::ostream& out, const EvalReport& report);

// ------------------------------------------------------------ checkpoint ---

struct Checkpoint {
  DdgnnModel model;
  nlohmann::json extra;  // caller metadata such as the graph configuration
  std::optional<nn::AdamState> adam;
};

inline constexpr int kCheckpointVersion = 1;

nlohmann::json checkpoint_to_json(const DdgnnModel& model, const nlohmann::json& extra,
                                  const nn::AdamState* adam = nullptr);
Checkpoint checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const std::filesystem::path& path, const DdgnnModel& model,
                     const nlohmann::json& extra, const nn::AdamState* adam = nullptr);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace stargraph
