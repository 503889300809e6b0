#include "stargraph/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stargraph/error.hpp"
#include "stargraph/kernels.hpp"

namespace stargraph::nn {
namespace {

std::string shape_str(const Tensor2& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

void require_shape(const Tensor2& t, std::size_t rows, std::size_t cols, const char* what) {
  if (t.rows() != rows || t.cols() != cols) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(rows) + "x" +
                     std::to_string(cols) + ", got " + shape_str(t));
  }
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

void glorot_uniform(Tensor2& weight, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(weight.rows() + weight.cols()));
  for (double& w : weight.values()) w = (2.0 * uniform01(rng) - 1.0) * bound;
}

// ---------------------------------------------------------------- linear ---

LinearParams LinearParams::zeros(std::size_t in, std::size_t out) {
  return {Tensor2(out, in), Tensor2(1, out)};
}

void LinearParams::append_tensors(const std::string& prefix, std::vector<NamedTensor>& out) {
  out.push_back({prefix + ".weight", &weight});
  out.push_back({prefix + ".bias", &bias});
}

Tensor2 linear_forward(const Tensor2& x, const LinearParams& p) {
  if (x.cols() != p.in_features()) {
    throw ShapeError("linear: input " + shape_str(x) + " vs weight " + shape_str(p.weight));
  }
  require_shape(p.bias, 1, p.out_features(), "linear bias");
  Tensor2 out = matmul_nt(x, p.weight);
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < out.rows(); ++i) {
    k.axpy(1.0, p.bias.values().data(), out.row(i).data(), out.cols());
  }
  return out;
}

void linear_backward(const Tensor2& x, const LinearParams& p, const Tensor2& grad_out,
                     LinearParams& grads, Tensor2* grad_x) {
  require_shape(grad_out, x.rows(), p.out_features(), "linear grad_out");
  require_shape(grads.weight, p.out_features(), p.in_features(), "linear weight grad");
  matmul_tn_acc(grad_out, x, grads.weight);
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < grad_out.rows(); ++i) {
    k.axpy(1.0, grad_out.row(i).data(), grads.bias.values().data(), grad_out.cols());
  }
  if (grad_x != nullptr) {
    *grad_x = Tensor2(x.rows(), x.cols());
    matmul_nn_acc(grad_out, p.weight, *grad_x);
  }
}

// ------------------------------------------------------------- graphconv ---

GraphConvParams GraphConvParams::zeros(std::size_t in, std::size_t out) {
  return {Tensor2(out, in), Tensor2(out, in)};
}

void GraphConvParams::append_tensors(const std::string& prefix,
                                     std::vector<NamedTensor>& out) {
  out.push_back({prefix + ".root", &root});
  out.push_back({prefix + ".neighbor", &neighbor});
}

Tensor2 aggregate_neighbors(const Tensor2& h, const FrameGraph& g) {
  if (h.rows() != g.node_count()) {
    throw ShapeError("graphconv: " + std::to_string(h.rows()) + " feature rows for " +
                     std::to_string(g.node_count()) + " nodes");
  }
  Tensor2 agg(h.rows(), h.cols());
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    double* dst = agg.row(i).data();
    for (std::uint32_t j : g.neighbors(i)) {
      if (j >= h.rows()) throw ShapeError("graphconv: neighbor index out of range");
      k.axpy(1.0, h.row(j).data(), dst, h.cols());
    }
  }
  return agg;
}

Tensor2 graphconv_forward(const Tensor2& h, const FrameGraph& g, const GraphConvParams& p,
                          bool activate, GraphConvCache* cache) {
  if (h.cols() != p.in_features()) {
    throw ShapeError("graphconv: input " + shape_str(h) + " vs weight " + shape_str(p.root));
  }
  require_shape(p.neighbor, p.out_features(), p.in_features(), "graphconv neighbor weight");
  Tensor2 agg = aggregate_neighbors(h, g);
  // (root + neighbor) h_i + neighbor agg_i == root h_i + neighbor (h_i + agg_i)
  Tensor2 out = matmul_nt(h, add(p.root, p.neighbor));
  out += matmul_nt(agg, p.neighbor);
  if (activate) sigmoid_inplace(out);
  if (cache != nullptr) {
    cache->graph = &g;
    cache->input = h;
    cache->aggregate = std::move(agg);
    cache->output = out;
    cache->activated = activate;
  }
  return out;
}

void graphconv_backward(const Tensor2& grad_out, const GraphConvCache& cache,
                        const GraphConvParams& p, GraphConvParams& grads, Tensor2* grad_h) {
  if (cache.graph == nullptr) throw Error("graphconv_backward: forward cache is empty");
  const Tensor2& h = cache.input;
  require_shape(grad_out, h.rows(), p.out_features(), "graphconv grad_out");
  require_shape(grads.root, p.out_features(), p.in_features(), "graphconv root grad");
  require_shape(grads.neighbor, p.out_features(), p.in_features(), "graphconv neighbor grad");

  Tensor2 dz = grad_out;
  if (cache.activated) {
    auto d = dz.values();
    auto y = cache.output.values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] *= y[i] * (1.0 - y[i]);
  }
  // root sees h; neighbor sees h + agg
  matmul_tn_acc(dz, h, grads.root);
  matmul_tn_acc(dz, h, grads.neighbor);
  matmul_tn_acc(dz, cache.aggregate, grads.neighbor);

  if (grad_h != nullptr) {
    *grad_h = Tensor2(h.rows(), h.cols());
    matmul_nn_acc(dz, add(p.root, p.neighbor), *grad_h);
    Tensor2 via_neighbor(h.rows(), h.cols());
    matmul_nn_acc(dz, p.neighbor, via_neighbor);
    const auto& k = kernels::active();
    const FrameGraph& g = *cache.graph;
    for (std::size_t i = 0; i < g.node_count(); ++i) {
      for (std::uint32_t j : g.neighbors(i)) {
        k.axpy(1.0, via_neighbor.row(i).data(), grad_h->row(j).data(), h.cols());
      }
    }
  }
}

// ------------------------------------------------------------ elementwise ---

void sigmoid_inplace(Tensor2& t) {
  for (double& v : t.values()) v = sigmoid(v);
}

Tensor2 dropout(const Tensor2& h, double rate, bool training, Rng& rng, Tensor2* mask) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must be in [0, 1)");
  if (!training || rate == 0.0) {
    if (mask != nullptr) *mask = Tensor2(h.rows(), h.cols(), 1.0);
    return h;
  }
  const double keep_scale = 1.0 / (1.0 - rate);
  Tensor2 factors(h.rows(), h.cols());
  for (double& f : factors.values()) f = uniform01(rng) < rate ? 0.0 : keep_scale;
  Tensor2 out = h;
  auto o = out.values();
  auto f = factors.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= f[i];
  if (mask != nullptr) *mask = std::move(factors);
  return out;
}

Tensor2 global_mean_pool(const Tensor2& h) {
  Tensor2 out(1, h.cols());
  if (h.rows() == 0) return out;
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < h.rows(); ++i) {
    k.axpy(1.0, h.row(i).data(), out.values().data(), h.cols());
  }
  const double inv = 1.0 / static_cast<double>(h.rows());
  for (double& v : out.values()) v *= inv;
  return out;
}

Tensor2 global_mean_pool_backward(const Tensor2& grad_out, std::size_t rows) {
  Tensor2 grad(rows, grad_out.cols());
  if (rows == 0) return grad;
  const double inv = 1.0 / static_cast<double>(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t c = 0; c < grad_out.cols(); ++c) grad(i, c) = grad_out(0, c) * inv;
  }
  return grad;
}

// ---------------------------------------------------------------- bilstm ---

BiLstmParams BiLstmParams::zeros(std::size_t input, std::size_t hidden, std::size_t layers) {
  BiLstmParams p;
  p.hidden = hidden;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = l == 0 ? input : 2 * hidden;
    auto direction = [&] {
      return LstmDirectionParams{Tensor2(4 * hidden, in), Tensor2(4 * hidden, hidden),
                                 Tensor2(1, 4 * hidden)};
    };
    p.layers.push_back({direction(), direction()});
  }
  return p;
}

void BiLstmParams::append_tensors(const std::string& prefix, std::vector<NamedTensor>& out) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string base = prefix + ".l" + std::to_string(l);
    for (auto [tag, dir] : {std::pair{".fwd", &layers[l].forward},
                            std::pair{".bwd", &layers[l].backward}}) {
      out.push_back({base + tag + ".w_input", &dir->w_input});
      out.push_back({base + tag + ".w_hidden", &dir->w_hidden});
      out.push_back({base + tag + ".bias", &dir->bias});
    }
  }
}

namespace {

// Runs one direction over `x`, writing hidden states into columns
// [col, col + H) of `out` at each step's time index.
void lstm_run(const Tensor2& x, const LstmDirectionParams& p, std::size_t hidden,
              bool reverse, Tensor2& out, std::size_t col, LstmRunCache* cache) {
  const std::size_t steps = x.rows();
  const std::size_t H = hidden;
  const auto& k = kernels::active();
  std::vector<double> h(H, 0.0), c(H, 0.0), z(4 * H);
  if (cache != nullptr) cache->steps.assign(steps, {});
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t t = reverse ? steps - 1 - s : s;
    const double* xt = x.row(t).data();
    for (std::size_t r = 0; r < 4 * H; ++r) {
      z[r] = k.dot(p.w_input.row(r).data(), xt, x.cols()) +
             k.dot(p.w_hidden.row(r).data(), h.data(), H) + p.bias(0, r);
    }
    LstmStepCache step;
    step.h_prev = h;
    step.c_prev = c;
    step.i.resize(H);
    step.f.resize(H);
    step.g.resize(H);
    step.o.resize(H);
    step.c.resize(H);
    step.tanh_c.resize(H);
    for (std::size_t u = 0; u < H; ++u) {
      const double ig = sigmoid(z[u]);
      const double fg = sigmoid(z[H + u]);
      const double gg = std::tanh(z[2 * H + u]);
      const double og = sigmoid(z[3 * H + u]);
      c[u] = fg * c[u] + ig * gg;
      const double tc = std::tanh(c[u]);
      h[u] = og * tc;
      step.i[u] = ig;
      step.f[u] = fg;
      step.g[u] = gg;
      step.o[u] = og;
      step.c[u] = c[u];
      step.tanh_c[u] = tc;
      out(t, col + u) = h[u];
    }
    if (cache != nullptr) cache->steps[s] = std::move(step);
  }
}

// grad_h holds dL/dh_t for this direction in columns [col, col + H).
void lstm_run_backward(const Tensor2& x, const LstmDirectionParams& p,
                       const LstmRunCache& cache, std::size_t hidden, bool reverse,
                       const Tensor2& grad_h, std::size_t col, LstmDirectionParams& grads,
                       Tensor2& grad_x) {
  const std::size_t steps = x.rows();
  const std::size_t H = hidden;
  const auto& k = kernels::active();
  std::vector<double> dh_next(H, 0.0), dc_next(H, 0.0), dz(4 * H), dh(H), dc(H);
  for (std::size_t s = steps; s-- > 0;) {
    const std::size_t t = reverse ? steps - 1 - s : s;
    const LstmStepCache& st = cache.steps[s];
    for (std::size_t u = 0; u < H; ++u) {
      dh[u] = grad_h(t, col + u) + dh_next[u];
      dc[u] = dc_next[u] + dh[u] * st.o[u] * (1.0 - st.tanh_c[u] * st.tanh_c[u]);
      const double di = dc[u] * st.g[u];
      const double df = dc[u] * st.c_prev[u];
      const double dg = dc[u] * st.i[u];
      const double dout = dh[u] * st.tanh_c[u];
      dz[u] = di * st.i[u] * (1.0 - st.i[u]);
      dz[H + u] = df * st.f[u] * (1.0 - st.f[u]);
      dz[2 * H + u] = dg * (1.0 - st.g[u] * st.g[u]);
      dz[3 * H + u] = dout * st.o[u] * (1.0 - st.o[u]);
    }
    const double* xt = x.row(t).data();
    double* dxt = grad_x.row(t).data();
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    for (std::size_t r = 0; r < 4 * H; ++r) {
      const double g = dz[r];
      if (g == 0.0) continue;
      k.axpy(g, xt, grads.w_input.row(r).data(), x.cols());
      k.axpy(g, st.h_prev.data(), grads.w_hidden.row(r).data(), H);
      grads.bias(0, r) += g;
      k.axpy(g, p.w_input.row(r).data(), dxt, x.cols());
      k.axpy(g, p.w_hidden.row(r).data(), dh_next.data(), H);
    }
    for (std::size_t u = 0; u < H; ++u) dc_next[u] = dc[u] * st.f[u];
  }
}

void check_direction_shapes(const LstmDirectionParams& d, std::size_t in, std::size_t H) {
  require_shape(d.w_input, 4 * H, in, "lstm input weight");
  require_shape(d.w_hidden, 4 * H, H, "lstm hidden weight");
  require_shape(d.bias, 1, 4 * H, "lstm bias");
}

}  // namespace

Tensor2 bilstm_forward(const Tensor2& v, const BiLstmParams& p, BiLstmCache* cache) {
  if (v.rows() == 0) throw ShapeError("bilstm: sequence must have at least one step");
  if (p.layers.empty() || p.hidden == 0) throw ShapeError("bilstm: no layers");
  const std::size_t H = p.hidden;
  if (cache != nullptr) {
    cache->layer_inputs.clear();
    cache->forward_runs.assign(p.layers.size(), {});
    cache->backward_runs.assign(p.layers.size(), {});
  }
  Tensor2 input = v;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& layer = p.layers[l];
    check_direction_shapes(layer.forward, input.cols(), H);
    check_direction_shapes(layer.backward, input.cols(), H);
    Tensor2 out(input.rows(), 2 * H);
    lstm_run(input, layer.forward, H, false, out, 0,
             cache ? &cache->forward_runs[l] : nullptr);
    lstm_run(input, layer.backward, H, true, out, H,
             cache ? &cache->backward_runs[l] : nullptr);
    if (cache != nullptr) cache->layer_inputs.push_back(std::move(input));
    input = std::move(out);
  }
  Tensor2 result(1, 2 * H);
  const std::size_t last = input.rows() - 1;
  for (std::size_t u = 0; u < H; ++u) {
    result(0, u) = input(last, u);
    result(0, H + u) = input(0, H + u);
  }
  return result;
}

void bilstm_backward(const Tensor2& grad_out, const BiLstmCache& cache, const BiLstmParams& p,
                     BiLstmParams& grads, Tensor2* grad_v) {
  if (cache.layer_inputs.size() != p.layers.size()) {
    throw Error("bilstm_backward: forward cache is empty");
  }
  const std::size_t H = p.hidden;
  require_shape(grad_out, 1, 2 * H, "bilstm grad_out");
  const std::size_t steps = cache.layer_inputs.front().rows();
  Tensor2 grad_layer_out(steps, 2 * H);
  for (std::size_t u = 0; u < H; ++u) {
    grad_layer_out(steps - 1, u) = grad_out(0, u);
    grad_layer_out(0, H + u) = grad_out(0, H + u);
  }
  for (std::size_t l = p.layers.size(); l-- > 0;) {
    const Tensor2& x = cache.layer_inputs[l];
    Tensor2 grad_x(x.rows(), x.cols());
    lstm_run_backward(x, p.layers[l].forward, cache.forward_runs[l], H, false, grad_layer_out,
                      0, grads.layers[l].forward, grad_x);
    lstm_run_backward(x, p.layers[l].backward, cache.backward_runs[l], H, true,
                      grad_layer_out, H, grads.layers[l].backward, grad_x);
    grad_layer_out = std::move(grad_x);
  }
  if (grad_v != nullptr) *grad_v = std::move(grad_layer_out);
}

// ------------------------------------------------------------------ loss ---

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double peak = *std::max_element(p.begin(), p.end());
  double total = 0.0;
  for (double& v : p) {
    v = std::exp(v - peak);
    total += v;
  }
  for (double& v : p) v /= total;
  return p;
}

CrossEntropy softmax_cross_entropy(std::span<const double> logits, std::size_t label) {
  if (label >= logits.size()) {
    throw ConfigError("label " + std::to_string(label) + " out of range for " +
                      std::to_string(logits.size()) + " classes");
  }
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double v : logits) total += std::exp(v - peak);
  const double log_norm = peak + std::log(total);
  CrossEntropy ce;
  ce.loss = log_norm - logits[label];
  ce.grad.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) ce.grad[i] = std::exp(logits[i] - log_norm);
  ce.grad[label] -= 1.0;
  return ce;
}

// ------------------------------------------------------------------ adam ---

void adam_step(std::span<const NamedTensor> params, std::span<const ConstNamedTensor> grads,
               AdamState& state, const AdamConfig& config) {
  if (params.size() != grads.size()) throw ShapeError("adam: parameter/gradient count mismatch");
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.push_back(Tensor2::zeros_like(*p.tensor));
      state.second_moment.push_back(Tensor2::zeros_like(*p.tensor));
    }
  }
  if (state.first_moment.size() != params.size()) throw ShapeError("adam: state size mismatch");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(config.beta1, t);
  const double correct2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto w = params[b].tensor->values();
    auto g = grads[b].tensor->values();
    auto m = state.first_moment[b].values();
    auto v = state.second_moment[b].values();
    if (g.size() != w.size() || m.size() != w.size()) {
      throw ShapeError("adam: shape mismatch in block " + params[b].name);
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correct1;
      const double v_hat = v[i] / correct2;
      w[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

// ------------------------------------------------------------ grad check ---

double GradCheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& b : blocks) worst = std::max(worst, b.max_rel_error);
  return worst;
}

GradCheckReport grad_check(const std::function<double()>& loss,
                           std::span<const NamedTensor> params,
                           std::span<const ConstNamedTensor> analytic,
                           const GradCheckOptions& options) {
  if (params.size() != analytic.size()) {
    throw ShapeError("grad_check: parameter/gradient count mismatch");
  }
  GradCheckReport report;
  const double h = options.step;
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto w = params[b].tensor->values();
    auto a = analytic[b].tensor->values();
    if (a.size() != w.size()) throw ShapeError("grad_check: shape mismatch in " + params[b].name);
    GradCheckBlock block{params[b].name};
    const std::size_t limit = options.max_entries_per_block;
    const std::size_t stride = limit == 0 || w.size() <= limit ? 1 : (w.size() + limit - 1) / limit;
    for (std::size_t i = 0; i < w.size(); i += stride) {
      const double saved = w[i];
      w[i] = saved + h;
      const double up = loss();
      w[i] = saved - h;
      const double down = loss();
      w[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double scale = std::max({std::abs(a[i]), std::abs(numeric), options.scale_floor});
      const double rel = std::abs(a[i] - numeric) / scale;
      if (rel > block.max_rel_error || i == 0) {
        block.max_rel_error = std::max(block.max_rel_error, rel);
        block.worst_index = i;
        block.analytic_at_worst = a[i];
        block.numeric_at_worst = numeric;
      }
    }
    report.blocks.push_back(std::move(block));
  }
  return report;
}

}  // namespace stargraph::nn
