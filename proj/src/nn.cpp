#include "xespred/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "xespred/error.hpp"

namespace xespred {

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_ids(std::span<const std::int32_t> ids, std::size_t limit, const char* what) {
  for (const auto id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= limit) {
      throw Error(ErrorKind::range, std::string(what) + ": id " + std::to_string(id) +
                                        " outside [0, " + std::to_string(limit) + ")");
    }
  }
}

void check_regression_shapes(const Matrix& out, const Matrix& target, const Matrix& mask) {
  if (!out.same_shape(target) || !out.same_shape(mask)) {
    throw Error(ErrorKind::shape, "regression loss: output, target and mask shapes differ");
  }
}

struct MaskedStats {
  double count = 0;
  double sum = 0;  // of squared or absolute errors
};

MaskedStats masked_sum(LossKind kind, const Matrix& out, const Matrix& target,
                       const Matrix& mask) {
  MaskedStats s;
  const auto o = out.values();
  const auto t = target.values();
  const auto m = mask.values();
  for (std::size_t i = 0; i < o.size(); ++i) {
    if (m[i] == 0.0) continue;
    const double d = o[i] - t[i];
    s.sum += kind == LossKind::mae ? std::abs(d) : d * d;
    s.count += 1.0;
  }
  return s;
}

}  // namespace

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto in = logits.row(r);
    auto o = out.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      o[c] = std::exp(in[c] - mx);
      total += o[c];
    }
    for (double& v : o) v /= total;
  }
  return out;
}

double cross_entropy(const Matrix& probs, std::span<const std::int32_t> target_ids) {
  if (target_ids.size() != probs.rows()) {
    throw Error(ErrorKind::shape, "cross_entropy: one target id per row required");
  }
  check_ids(target_ids, probs.cols(), "cross_entropy");
  if (probs.rows() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    const double p = probs(r, static_cast<std::size_t>(target_ids[r]));
    total += -std::log(std::max(p, kProbabilityFloor));
  }
  return total / static_cast<double>(probs.rows());
}

Matrix cross_entropy_logit_grad(const Matrix& probs, std::span<const std::int32_t> target_ids) {
  check_ids(target_ids, probs.cols(), "cross_entropy");
  Matrix grad(probs.rows(), probs.cols());
  const double scale = probs.rows() == 0 ? 0.0 : 1.0 / static_cast<double>(probs.rows());
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    const auto id = static_cast<std::size_t>(target_ids[r]);
    if (probs(r, id) < kProbabilityFloor) continue;
    const auto p = probs.row(r);
    auto g = grad.row(r);
    for (std::size_t c = 0; c < p.size(); ++c) g[c] = p[c] * scale;
    g[id] -= scale;
  }
  return grad;
}

std::string_view to_string(LossKind kind) noexcept {
  switch (kind) {
    case LossKind::cross_entropy: return "cross_entropy";
    case LossKind::mse: return "mse";
    case LossKind::rmse: return "rmse";
    case LossKind::mae: return "mae";
  }
  return "unknown";
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "cross_entropy" || name == "xent") return LossKind::cross_entropy;
  if (name == "mse") return LossKind::mse;
  if (name == "rmse") return LossKind::rmse;
  if (name == "mae") return LossKind::mae;
  throw Error(ErrorKind::config, "unknown loss kind \"" + std::string(name) + "\"");
}

double regression_loss(LossKind kind, const Matrix& out, const Matrix& target,
                       const Matrix& mask) {
  check_regression_shapes(out, target, mask);
  if (kind == LossKind::cross_entropy) {
    throw Error(ErrorKind::config, "regression_loss: cross_entropy is not a regression loss");
  }
  const auto s = masked_sum(kind, out, target, mask);
  if (s.count == 0) throw Error(ErrorKind::no_signal, "regression loss: every entry is masked");
  const double mean = s.sum / s.count;
  return kind == LossKind::rmse ? std::sqrt(mean) : mean;
}

Matrix regression_loss_grad(LossKind kind, const Matrix& out, const Matrix& target,
                            const Matrix& mask) {
  check_regression_shapes(out, target, mask);
  const auto s = masked_sum(kind, out, target, mask);
  if (s.count == 0) throw Error(ErrorKind::no_signal, "regression loss: every entry is masked");
  Matrix grad(out.rows(), out.cols());
  const auto o = out.values();
  const auto t = target.values();
  const auto m = mask.values();
  auto g = grad.values();
  double rmse_scale = 0.0;
  if (kind == LossKind::rmse) {
    const double root = std::sqrt(s.sum / s.count);
    rmse_scale = root > 0 ? 1.0 / (2.0 * root) : 0.0;
  }
  for (std::size_t i = 0; i < o.size(); ++i) {
    if (m[i] == 0.0) continue;
    const double d = o[i] - t[i];
    switch (kind) {
      case LossKind::mse: g[i] = 2.0 * d / s.count; break;
      case LossKind::rmse: g[i] = rmse_scale * 2.0 * d / s.count; break;
      case LossKind::mae: g[i] = (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0)) / s.count; break;
      case LossKind::cross_entropy: break;
    }
  }
  return grad;
}

Matrix embedding_forward(const Matrix& table, std::span<const std::int32_t> ids) {
  check_ids(ids, table.rows(), "embedding lookup");
  Matrix out(ids.size(), table.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const auto src = table.row(static_cast<std::size_t>(ids[r]));
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

void embedding_backward(const Matrix& out_grad, std::span<const std::int32_t> ids,
                        Matrix& table_grad) {
  check_ids(ids, table_grad.rows(), "embedding backward");
  if (out_grad.rows() != ids.size() || out_grad.cols() != table_grad.cols()) {
    throw Error(ErrorKind::shape, "embedding backward: gradient shape mismatch");
  }
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const auto src = out_grad.row(r);
    auto dst = table_grad.row(static_cast<std::size_t>(ids[r]));
    for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
  }
}

LstmLayerParams make_lstm_layer(std::size_t input_width, std::size_t hidden) {
  return {Matrix(input_width, 4 * hidden), Matrix(hidden, 4 * hidden), Matrix(1, 4 * hidden)};
}

LstmState lstm_cell_forward(const Matrix& x, const LstmState& state,
                            const LstmLayerParams& params, LstmStepCache* cache) {
  const std::size_t h = params.hidden();
  const std::size_t lanes = x.rows();
  if (x.cols() != params.input_width() || state.h.rows() != lanes || state.h.cols() != h ||
      !state.c.same_shape(state.h) || params.W.cols() != 4 * h || params.bias.cols() != 4 * h) {
    throw Error(ErrorKind::shape, "lstm cell: input " + std::to_string(x.rows()) + "x" +
                                      std::to_string(x.cols()) + " or state does not match layer " +
                                      std::to_string(params.input_width()) + "->" +
                                      std::to_string(h));
  }
  Matrix z = matmul(x, params.W);
  matmul_accumulate(state.h, params.U, z);
  add_row_bias(z, params.bias);

  LstmState next{Matrix(lanes, h), Matrix(lanes, h)};
  Matrix tanh_c(lanes, h);
  for (std::size_t r = 0; r < lanes; ++r) {
    auto zr = z.row(r);
    for (std::size_t j = 0; j < h; ++j) {
      zr[j] = sigmoid(zr[j]);
      zr[h + j] = sigmoid(zr[h + j]);
      zr[2 * h + j] = sigmoid(zr[2 * h + j]);
      zr[3 * h + j] = std::tanh(zr[3 * h + j]);
      const double c = zr[h + j] * state.c(r, j) + zr[j] * zr[3 * h + j];
      next.c(r, j) = c;
      tanh_c(r, j) = std::tanh(c);
      next.h(r, j) = zr[2 * h + j] * tanh_c(r, j);
    }
  }
  if (cache != nullptr) {
    cache->x = x;
    cache->h_prev = state.h;
    cache->c_prev = state.c;
    cache->gates = std::move(z);
    cache->c = next.c;
    cache->tanh_c = std::move(tanh_c);
  }
  return next;
}

LstmCellGrads lstm_cell_backward(const LstmLayerParams& params, const LstmStepCache& cache,
                                 const Matrix& dh, const Matrix& dc, LstmLayerParams& grads) {
  const std::size_t h = params.hidden();
  const std::size_t lanes = cache.x.rows();
  Matrix dz(lanes, 4 * h);
  LstmCellGrads out{Matrix(lanes, params.input_width()), Matrix(lanes, h), Matrix(lanes, h)};
  for (std::size_t r = 0; r < lanes; ++r) {
    const auto gates = cache.gates.row(r);
    auto d = dz.row(r);
    for (std::size_t j = 0; j < h; ++j) {
      const double i = gates[j];
      const double f = gates[h + j];
      const double o = gates[2 * h + j];
      const double g = gates[3 * h + j];
      const double tc = cache.tanh_c(r, j);
      const double dh_rj = dh(r, j);
      const double dct = dc(r, j) + dh_rj * o * (1.0 - tc * tc);
      d[j] = dct * g * i * (1.0 - i);
      d[h + j] = dct * cache.c_prev(r, j) * f * (1.0 - f);
      d[2 * h + j] = dh_rj * tc * o * (1.0 - o);
      d[3 * h + j] = dct * i * (1.0 - g * g);
      out.dc_prev(r, j) = dct * f;
    }
  }
  matmul_at_accumulate(cache.x, dz, grads.W);
  matmul_at_accumulate(cache.h_prev, dz, grads.U);
  sum_rows_accumulate(dz, grads.bias);
  matmul_bt_accumulate(dz, params.W, out.dx);
  matmul_bt_accumulate(dz, params.U, out.dh_prev);
  return out;
}

StackState zero_stack_state(const LstmStack& stack, std::size_t lanes) {
  StackState state;
  state.reserve(stack.layers.size());
  for (const auto& layer : stack.layers) state.push_back(LstmState::zeros(lanes, layer.hidden()));
  return state;
}

Matrix lstm_stack_step(const LstmStack& stack, const Matrix& x, StackState& state,
                       StackWindowCache* cache) {
  if (state.size() != stack.layers.size()) {
    throw Error(ErrorKind::shape, "lstm stack: state has " + std::to_string(state.size()) +
                                      " layers, stack has " +
                                      std::to_string(stack.layers.size()));
  }
  std::vector<LstmStepCache>* step_cache = nullptr;
  if (cache != nullptr) {
    cache->steps.emplace_back(stack.layers.size());
    step_cache = &cache->steps.back();
  }
  const Matrix* input = &x;
  for (std::size_t l = 0; l < stack.layers.size(); ++l) {
    state[l] = lstm_cell_forward(*input, state[l], stack.layers[l],
                                 step_cache ? &(*step_cache)[l] : nullptr);
    input = &state[l].h;
  }
  return *input;
}

StackBackward bptt_backward(const LstmStack& stack, StackWindowCache& cache,
                            const std::vector<Matrix>& top_grads, LstmStack& grads) {
  if (cache.consumed) throw Error(ErrorKind::state, "bptt_backward: window cache already consumed");
  if (top_grads.size() != cache.steps.size()) {
    throw Error(ErrorKind::shape, "bptt_backward: expected one output gradient per step");
  }
  cache.consumed = true;
  const std::size_t layers = stack.layers.size();
  const std::size_t steps = cache.steps.size();
  StackBackward result;
  result.input_grads.resize(steps);
  if (steps == 0) return result;

  const std::size_t lanes = cache.steps[0][0].x.rows();
  std::vector<Matrix> dh_next;
  std::vector<Matrix> dc_next;
  for (const auto& layer : stack.layers) {
    dh_next.emplace_back(lanes, layer.hidden());
    dc_next.emplace_back(lanes, layer.hidden());
  }
  for (std::size_t t = steps; t-- > 0;) {
    Matrix from_above = top_grads[t];
    for (std::size_t l = layers; l-- > 0;) {
      add_inplace(from_above, dh_next[l]);
      auto cell = lstm_cell_backward(stack.layers[l], cache.steps[t][l], from_above, dc_next[l],
                                     grads.layers[l]);
      dh_next[l] = std::move(cell.dh_prev);
      dc_next[l] = std::move(cell.dc_prev);
      from_above = std::move(cell.dx);
    }
    result.input_grads[t] = std::move(from_above);
  }
  for (std::size_t l = 0; l < layers; ++l) {
    result.initial_state_grads.push_back({std::move(dh_next[l]), std::move(dc_next[l])});
  }
  return result;
}

double clip_by_global_norm(std::span<Matrix* const> grads, double max_norm) {
  double sq = 0.0;
  for (const Matrix* g : grads) {
    for (const double v : g->values()) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (Matrix* g : grads) scale_inplace(*g, factor);
  }
  return norm;
}

void init_uniform(Matrix& m, Xoshiro256& rng, double range) {
  for (double& v : m.values()) v = rng.uniform(-range, range);
}

void init_lstm_layer(LstmLayerParams& layer, Xoshiro256& rng) {
  init_uniform(layer.W, rng);
  init_uniform(layer.U, rng);
  const std::size_t h = layer.hidden();
  layer.bias.fill(0.0);
  for (std::size_t j = h; j < 2 * h; ++j) layer.bias(0, j) = 1.0;
}

std::string_view to_string(OptimizerKind kind) noexcept {
  switch (kind) {
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::momentum: return "momentum";
    case OptimizerKind::adam: return "adam";
    case OptimizerKind::rmsprop: return "rmsprop";
  }
  return "unknown";
}

OptimizerKind parse_optimizer_kind(std::string_view name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "momentum") return OptimizerKind::momentum;
  if (name == "adam") return OptimizerKind::adam;
  if (name == "rmsprop") return OptimizerKind::rmsprop;
  throw Error(ErrorKind::config, "unknown optimizer \"" + std::string(name) + "\"");
}

void Optimizer::restore(std::uint64_t t, std::vector<Matrix> first, std::vector<Matrix> second) {
  t_ = t;
  first_ = std::move(first);
  second_ = std::move(second);
}

void Optimizer::step(std::span<const ParamRef> params, std::span<const Matrix* const> grads) {
  if (params.size() != grads.size()) {
    throw Error(ErrorKind::shape, "optimizer: parameter and gradient counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].value->same_shape(*grads[i])) {
      throw Error(ErrorKind::shape, "optimizer: gradient shape mismatch for " + params[i].name);
    }
    if (!grads[i]->all_finite()) {
      throw Error(ErrorKind::numeric, "optimizer: non-finite gradient for " + params[i].name);
    }
  }
  const bool needs_first = config_.kind != OptimizerKind::sgd;
  const bool needs_second = config_.kind == OptimizerKind::adam;
  if (needs_first && first_.empty()) {
    for (const auto& p : params) first_.emplace_back(p.value->rows(), p.value->cols());
  }
  if (needs_second && second_.empty()) {
    for (const auto& p : params) second_.emplace_back(p.value->rows(), p.value->cols());
  }
  if ((needs_first && first_.size() != params.size()) ||
      (needs_second && second_.size() != params.size())) {
    throw Error(ErrorKind::shape, "optimizer: slot count does not match parameters");
  }
  ++t_;
  const double lr = config_.learning_rate;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].value->values();
    const auto g = grads[i]->values();
    switch (config_.kind) {
      case OptimizerKind::sgd:
        for (std::size_t k = 0; k < p.size(); ++k) p[k] -= lr * g[k];
        break;
      case OptimizerKind::momentum: {
        auto v = first_[i].values();
        for (std::size_t k = 0; k < p.size(); ++k) {
          v[k] = config_.momentum * v[k] + g[k];
          p[k] -= lr * v[k];
        }
        break;
      }
      case OptimizerKind::adam: {
        auto m = first_[i].values();
        auto v = second_[i].values();
        for (std::size_t k = 0; k < p.size(); ++k) {
          m[k] = config_.beta1 * m[k] + (1.0 - config_.beta1) * g[k];
          v[k] = config_.beta2 * v[k] + (1.0 - config_.beta2) * g[k] * g[k];
          const double m_hat = m[k] / bc1;
          const double v_hat = v[k] / bc2;
          p[k] -= lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
        }
        break;
      }
      case OptimizerKind::rmsprop: {
        auto cache = first_[i].values();
        for (std::size_t k = 0; k < p.size(); ++k) {
          cache[k] = config_.decay * cache[k] + (1.0 - config_.decay) * g[k] * g[k];
          p[k] -= lr * g[k] / (std::sqrt(cache[k]) + config_.epsilon);
        }
        break;
      }
    }
  }
}

}  // namespace xespred
