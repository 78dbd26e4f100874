#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xespred/matrix.hpp"
#include "xespred/rng.hpp"

namespace xespred {

inline constexpr double kProbabilityFloor = 1e-12;
inline constexpr double kInitRange = 0.1;

// ---------------------------------------------------------------------------
// Activations and losses

/// Row-wise softmax with per-row max subtraction.
Matrix softmax_rows(const Matrix& logits);

/// Mean over rows of -ln(max(p[row, id], 1e-12)).
double cross_entropy(const Matrix& probs, std::span<const std::int32_t> target_ids);

/// Gradient of `cross_entropy(softmax_rows(logits), ids)` with respect to the
/// logits, given the already computed probabilities. Rows whose target
/// probability sits under the clamp contribute zero.
Matrix cross_entropy_logit_grad(const Matrix& probs, std::span<const std::int32_t> target_ids);

enum class LossKind { cross_entropy, mse, rmse, mae };

std::string_view to_string(LossKind kind) noexcept;
LossKind parse_loss_kind(std::string_view name);

/// Masked regression loss over the unmasked entries of b x 1 columns.
double regression_loss(LossKind kind, const Matrix& out, const Matrix& target,
                       const Matrix& mask);

/// d loss / d out for `regression_loss`; zero at masked entries.
Matrix regression_loss_grad(LossKind kind, const Matrix& out, const Matrix& target,
                            const Matrix& mask);

// ---------------------------------------------------------------------------
// Embedding

Matrix embedding_forward(const Matrix& table, std::span<const std::int32_t> ids);

/// Scatter-adds rows of `out_grad` into the rows of `table_grad` named by `ids`.
void embedding_backward(const Matrix& out_grad, std::span<const std::int32_t> ids,
                        Matrix& table_grad);

// ---------------------------------------------------------------------------
// LSTM

/// Gate columns are laid out as [input, forget, output, candidate], each
/// `hidden` wide.
struct LstmLayerParams {
  Matrix W;     // input_width x 4*hidden
  Matrix U;     // hidden x 4*hidden
  Matrix bias;  // 1 x 4*hidden

  std::size_t hidden() const noexcept { return U.rows(); }
  std::size_t input_width() const noexcept { return W.rows(); }

  bool operator==(const LstmLayerParams&) const = default;
};

LstmLayerParams make_lstm_layer(std::size_t input_width, std::size_t hidden);

struct LstmState {
  Matrix h;
  Matrix c;

  static LstmState zeros(std::size_t lanes, std::size_t hidden) {
    return {Matrix(lanes, hidden), Matrix(lanes, hidden)};
  }
  bool operator==(const LstmState&) const = default;
};

struct LstmStepCache {
  Matrix x;
  Matrix h_prev;
  Matrix c_prev;
  Matrix gates;  // activated i, f, o, g
  Matrix c;
  Matrix tanh_c;
};

/// One cell step. Fills `cache` when non-null.
LstmState lstm_cell_forward(const Matrix& x, const LstmState& state,
                            const LstmLayerParams& params, LstmStepCache* cache = nullptr);

struct LstmCellGrads {
  Matrix dx;
  Matrix dh_prev;
  Matrix dc_prev;
};

/// Reverse step: accumulates parameter gradients into `grads`.
LstmCellGrads lstm_cell_backward(const LstmLayerParams& params, const LstmStepCache& cache,
                                 const Matrix& dh, const Matrix& dc, LstmLayerParams& grads);

struct LstmStack {
  std::vector<LstmLayerParams> layers;

  bool operator==(const LstmStack&) const = default;
};

using StackState = std::vector<LstmState>;  // one per layer

StackState zero_stack_state(const LstmStack& stack, std::size_t lanes);

/// Caches for one unrolled window: steps[t][layer].
struct StackWindowCache {
  std::vector<std::vector<LstmStepCache>> steps;
  bool consumed = false;
};

/// Runs all layers for one step; returns the top layer's output h.
Matrix lstm_stack_step(const LstmStack& stack, const Matrix& x, StackState& state,
                       StackWindowCache* cache);

struct StackBackward {
  std::vector<Matrix> input_grads;  // d loss / d x per step
  StackState initial_state_grads;   // at the window boundary
};

/// Exact reverse-mode gradients through every step and layer of a window.
/// `top_grads[t]` is d loss / d h of the top layer at step t. Marks the cache
/// consumed; a second call throws.
StackBackward bptt_backward(const LstmStack& stack, StackWindowCache& cache,
                            const std::vector<Matrix>& top_grads, LstmStack& grads);

// ---------------------------------------------------------------------------
// Parameter plumbing

struct ParamRef {
  std::string name;
  Matrix* value;
};

/// Scales every gradient by max_norm / g when the global L2 norm g exceeds
/// max_norm. Returns g.
double clip_by_global_norm(std::span<Matrix* const> grads, double max_norm);

void init_uniform(Matrix& m, Xoshiro256& rng, double range = kInitRange);

/// Uniform weights, forget-gate bias 1.0, other biases 0.0.
void init_lstm_layer(LstmLayerParams& layer, Xoshiro256& rng);

// ---------------------------------------------------------------------------
// Optimizers

enum class OptimizerKind { sgd, momentum, adam, rmsprop };

std::string_view to_string(OptimizerKind kind) noexcept;
OptimizerKind parse_optimizer_kind(std::string_view name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 0.01;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double decay = 0.9;  // RMSProp cache decay

  bool operator==(const OptimizerConfig&) const = default;
};

class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config) : config_(config) {}

  /// Applies one update. Slots are created lazily on the first step and must
  /// keep matching the parameter shapes afterwards.
  void step(std::span<const ParamRef> params, std::span<const Matrix* const> grads);

  const OptimizerConfig& config() const noexcept { return config_; }
  void set_learning_rate(double lr) noexcept { config_.learning_rate = lr; }
  std::uint64_t steps_taken() const noexcept { return t_; }

  /// Slot tensors for checkpointing: first moments / velocity / cache, then
  /// second moments (Adam only).
  std::vector<Matrix>& first_slots() noexcept { return first_; }
  std::vector<Matrix>& second_slots() noexcept { return second_; }
  const std::vector<Matrix>& first_slots() const noexcept { return first_; }
  const std::vector<Matrix>& second_slots() const noexcept { return second_; }
  void restore(std::uint64_t t, std::vector<Matrix> first, std::vector<Matrix> second);

 private:
  OptimizerConfig config_;
  std::uint64_t t_ = 0;
  std::vector<Matrix> first_;
  std::vector<Matrix> second_;
};

}  // namespace xespred
