#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "stargraph/graph.hpp"
#include "stargraph/tensor.hpp"

namespace stargraph::nn {

/// A tensor with a stable name, used to walk parameter blocks generically
/// (Adam, checkpoints, gradient checks).
struct NamedTensor {
  std::string name;
  Tensor2* tensor;
};

struct ConstNamedTensor {
  std::string name;
  const Tensor2* tensor;
};

using Rng = std::mt19937_64;

/// Uniform draw in [0, 1) built from the top 53 bits; identical on every
/// standard library.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Mixes a base seed with a stream index (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Glorot-uniform fill: U(-a, a), a = sqrt(6 / (fan_in + fan_out)).
void glorot_uniform(Tensor2& weight, Rng& rng);

// ---------------------------------------------------------------- linear ---

struct LinearParams {
  Tensor2 weight;  // out x in
  Tensor2 bias;    // 1 x out

  static LinearParams zeros(std::size_t in, std::size_t out);
  std::size_t in_features() const { return weight.cols(); }
  std::size_t out_features() const { return weight.rows(); }
  void append_tensors(const std::string& prefix, std::vector<NamedTensor>& out);
};

/// x * W^T + b per row.
Tensor2 linear_forward(const Tensor2& x, const LinearParams& p);

/// Accumulates into `grads`; writes dL/dx when grad_x is non-null.
void linear_backward(const Tensor2& x, const LinearParams& p, const Tensor2& grad_out,
                     LinearParams& grads, Tensor2* grad_x);

// ------------------------------------------------------------- graphconv ---

/// out_i = act((root + neighbor) h_i + neighbor * sum_{j in N(i)} h_j).
/// `root` only ever sees the node itself; `neighbor` sees the node (self-loop)
/// and every in-flowing neighbor.
struct GraphConvParams {
  Tensor2 root;      // out x in
  Tensor2 neighbor;  // out x in

  static GraphConvParams zeros(std::size_t in, std::size_t out);
  std::size_t in_features() const { return root.cols(); }
  std::size_t out_features() const { return root.rows(); }
  void append_tensors(const std::string& prefix, std::vector<NamedTensor>& out);
};

/// Forward state kept for the backward pass. `graph` must outlive the cache.
struct GraphConvCache {
  const FrameGraph* graph = nullptr;
  Tensor2 input;
  Tensor2 aggregate;  // sum of neighbor rows per node
  Tensor2 output;     // post-activation
  bool activated = true;
};

/// Per-node neighbor sum; rows of `h` index graph nodes.
Tensor2 aggregate_neighbors(const Tensor2& h, const FrameGraph& g);

Tensor2 graphconv_forward(const Tensor2& h, const FrameGraph& g, const GraphConvParams& p,
                          bool activate, GraphConvCache* cache = nullptr);

void graphconv_backward(const Tensor2& grad_out, const GraphConvCache& cache,
                        const GraphConvParams& p, GraphConvParams& grads, Tensor2* grad_h);

// ------------------------------------------------------------ elementwise ---

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }
void sigmoid_inplace(Tensor2& t);

/// Inverted dropout. In training mode each entry survives with probability
/// 1 - rate and is scaled by 1 / (1 - rate); `mask` receives the per-entry
/// factor. Outside training (or at rate 0) the input is returned unchanged
/// and the mask is all ones.
Tensor2 dropout(const Tensor2& h, double rate, bool training, Rng& rng,
                Tensor2* mask = nullptr);

/// Column mean, 1 x F. A zero-row input gives a zero row of width F.
Tensor2 global_mean_pool(const Tensor2& h);
Tensor2 global_mean_pool_backward(const Tensor2& grad_out, std::size_t rows);

// ---------------------------------------------------------------- bilstm ---

/// Gate rows are stacked input, forget, candidate, output (each H wide).
struct LstmDirectionParams {
  Tensor2 w_input;   // 4H x in
  Tensor2 w_hidden;  // 4H x H
  Tensor2 bias;      // 1 x 4H
};

struct BiLstmParams {
  struct Layer {
    LstmDirectionParams forward;
    LstmDirectionParams backward;
  };
  std::vector<Layer> layers;
  std::size_t hidden = 0;

  static BiLstmParams zeros(std::size_t input, std::size_t hidden, std::size_t layers);
  std::size_t input_features() const {
    return layers.empty() ? 0 : layers.front().forward.w_input.cols();
  }
  std::size_t output_features() const { return 2 * hidden; }
  void append_tensors(const std::string& prefix, std::vector<NamedTensor>& out);
};

struct LstmStepCache {
  std::vector<double> h_prev, c_prev;
  std::vector<double> i, f, g, o;  // post-nonlinearity gate values
  std::vector<double> c, tanh_c;
};

struct LstmRunCache {
  std::vector<LstmStepCache> steps;  // in processing order
};

struct BiLstmCache {
  std::vector<Tensor2> layer_inputs;  // one per layer, N x in
  std::vector<LstmRunCache> forward_runs;
  std::vector<LstmRunCache> backward_runs;
};

/// Stacked bidirectional LSTM over the rows of `v`. Returns 1 x 2H: the
/// top layer's forward state after the last step followed by its backward
/// state after the first step. Throws ShapeError for an empty sequence.
Tensor2 bilstm_forward(const Tensor2& v, const BiLstmParams& p, BiLstmCache* cache = nullptr);

void bilstm_backward(const Tensor2& grad_out, const BiLstmCache& cache, const BiLstmParams& p,
                     BiLstmParams& grads, Tensor2* grad_v);

// ------------------------------------------------------------------ loss ---

struct CrossEntropy {
  double loss;
  std::vector<double> grad;  // softmax - onehot
};

std::vector<double> softmax(std::span<const double> logits);
CrossEntropy softmax_cross_entropy(std::span<const double> logits, std::size_t label);

// ------------------------------------------------------------------ adam ---

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Tensor2> first_moment;
  std::vector<Tensor2> second_moment;
  std::uint64_t step = 0;
};

/// Bias-corrected Adam update of every tensor in `params` with the matching
/// entry of `grads`. State is lazily sized on the first call.
void adam_step(std::span<const NamedTensor> params, std::span<const ConstNamedTensor> grads,
               AdamState& state, const AdamConfig& config);

// ------------------------------------------------------------ grad check ---

struct GradCheckBlock {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckBlock> blocks;
  double max_rel_error() const;
  bool passed(double tol) const { return max_rel_error() < tol; }
};

struct GradCheckOptions {
  double step = 1e-5;
  /// Denominator floor for |a - n| / max(|a|, |n|, floor); keeps the ratio
  /// meaningful for entries whose true gradient is ~0.
  double scale_floor = 1e-5;
  /// When non-zero, only this many evenly strided entries per block are
  /// perturbed.
  std::size_t max_entries_per_block = 0;
};

/// Central-difference check of `loss` against analytic gradients. Each
/// entry of each parameter block is perturbed in place and restored.
GradCheckReport grad_check(const std::function<double()>& loss,
                           std::span<const NamedTensor> params,
                           std::span<const ConstNamedTensor> analytic,
                           const GradCheckOptions& options = {});

}  // namespace stargraph::nn
