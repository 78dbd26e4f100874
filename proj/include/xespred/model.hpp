#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "xespred/encoding.hpp"
#include "xespred/matrix.hpp"
#include "xespred/nn.hpp"

namespace xespred {

struct ModelConfig {
  std::size_t batch_size = 4;  // b
  std::size_t steps = 8;       // s, unrolled steps per window
  std::size_t layers = 1;
  std::size_t hidden = 16;     // p
  bool use_input_projection = false;
  /// Projected width when projecting; otherwise 0 (= concatenated width) or
  /// an explicit width that must equal the concatenated width.
  std::size_t input_width = 0;
  bool shared_rnn = true;
  std::map<std::string, LossKind> losses;  // per target; defaults by kind
  std::map<std::string, double> weights;   // per target; default 1.0
  OptimizerConfig optimizer;
  std::size_t epochs = 10;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  double lr_decay = 1.0;  // multiplicative per epoch

  bool operator==(const ModelConfig&) const = default;
};

struct PredictorDims {
  std::string key;
  bool categorical = false;
  std::size_t classes = 0;  // l_i + 1 for categorical predictors
  std::size_t width = 1;    // embedding dim, or 1 for numeric

  bool operator==(const PredictorDims&) const = default;
};

struct TargetDims {
  std::string key;
  bool categorical = false;
  std::size_t classes = 1;  // l_i + 1, or 1 for numeric
  LossKind loss = LossKind::cross_entropy;
  double weight = 1.0;

  bool operator==(const TargetDims&) const = default;
};

/// Everything needed to shape and run the network, independent of the
/// encoding schema.
struct Architecture {
  std::vector<PredictorDims> predictors;
  std::vector<TargetDims> targets;
  std::size_t layers = 1;
  std::size_t hidden = 16;
  bool use_input_projection = false;
  std::size_t projection_width = 0;
  bool shared_rnn = true;

  /// m: sum of embedding widths plus one column per numeric predictor.
  std::size_t concat_width() const noexcept;
  std::size_t rnn_input_width() const noexcept;
  std::size_t stack_count() const noexcept { return shared_rnn ? 1 : targets.size(); }
  std::size_t stack_for_target(std::size_t target) const noexcept {
    return shared_rnn ? 0 : target;
  }

  bool operator==(const Architecture&) const = default;
};

Architecture make_architecture(const EncodingSchema& schema, const ModelConfig& config);

struct OutputHead {
  Matrix W;     // hidden x classes
  Matrix bias;  // 1 x classes

  bool operator==(const OutputHead&) const = default;
};

struct ModelParams {
  Architecture arch;
  std::vector<Matrix> embeddings;  // per predictor; 0x0 for numeric predictors
  Matrix input_projection;         // m x projection_width, 0x0 when unused
  std::vector<LstmStack> stacks;
  std::vector<OutputHead> heads;   // per target

  /// Every tensor in canonical order with a stable name. This order defines
  /// initialization, optimizer slots and the serialized manifest.
  std::vector<ParamRef> tensors();
  std::vector<std::pair<std::string, const Matrix*>> tensors() const;
  std::string stack_name(std::size_t stack) const;

  bool operator==(const ModelParams&) const = default;
};

/// Zero-filled parameters shaped by `arch`.
ModelParams allocate_params(const Architecture& arch);

/// Deterministic initialization from `seed` (xoshiro256**).
void init_params(ModelParams& params, std::uint64_t seed);

ModelParams build_model(const EncodingSchema& schema, const ModelConfig& config);

using RecurrentState = std::vector<StackState>;  // one per stack

RecurrentState zero_state(const ModelParams& params, std::size_t lanes);

struct StepCache {
  std::vector<std::vector<std::int32_t>> ids;  // per predictor (categorical only)
  Matrix concat;                               // C: lanes x m
  std::vector<Matrix> stack_outputs;           // O per stack
  std::vector<Matrix> logits;                  // per target, raw head output
  std::vector<Matrix> probs;                   // per target, softmax (categorical only)
};

struct WindowCache {
  std::vector<StepCache> steps;
  std::vector<StackWindowCache> stacks;
  std::vector<std::vector<Matrix>> head_grads;  // per step, per target: d loss / d logits
  bool consumed = false;
};

struct WindowResult {
  std::vector<double> losses;      // L_i per target
  std::vector<double> accuracy;    // categorical targets; NaN otherwise
  std::vector<bool> has_signal;    // false when a regression target is fully masked
  double combined_loss = 0.0;      // sum of weight_i * L_i
};

/// Unrolls the network over a batch window, threading `state` through the
/// steps and leaving the final state in it. Losses average over the
/// unmasked lanes x steps positions.
WindowResult forward_window(const ModelParams& params, const Batch& batch, RecurrentState& state,
                            WindowCache* cache = nullptr);

/// Gradient of the combined loss for the window in `cache`. The
/// window-initial state gradient is dropped (truncation boundary).
ModelParams backward_window(const ModelParams& params, WindowCache& cache);

/// Per-target head outputs for one step: lanes x classes logits for
/// categorical targets, lanes x 1 values otherwise.
using StepOutputs = std::vector<Matrix>;

/// One step for `features[lane][predictor]`, advancing `state`.
StepOutputs forward_step(const ModelParams& params,
                         const std::vector<std::vector<FeatureValue>>& features,
                         RecurrentState& state);

/// Index of the largest entry in `row`; ties resolve to the lowest index.
std::int32_t argmax(std::span<const double> row);

}  // namespace xespred
