#include "xespred/model.hpp"

#include <cmath>
#include <limits>

#include "xespred/error.hpp"

namespace xespred {

std::size_t Architecture::concat_width() const noexcept {
  std::size_t m = 0;
  for (const auto& p : predictors) m += p.width;
  return m;
}

std::size_t Architecture::rnn_input_width() const noexcept {
  return use_input_projection ? projection_width : concat_width();
}

Architecture make_architecture(const EncodingSchema& schema, const ModelConfig& config) {
  if (schema.predictors.empty() || schema.targets.empty()) {
    throw Error(ErrorKind::config, "a model needs at least one predictor and one target");
  }
  if (config.layers == 0 || config.hidden == 0) {
    throw Error(ErrorKind::config, "layers and hidden width must be at least 1");
  }
  Architecture arch;
  arch.layers = config.layers;
  arch.hidden = config.hidden;
  arch.shared_rnn = config.shared_rnn;
  arch.use_input_projection = config.use_input_projection;

  for (std::size_t i = 0; i < schema.predictors.size(); ++i) {
    const FeatureSpec& f = schema.predictor(i);
    PredictorDims p;
    p.key = f.key;
    p.categorical = f.kind == FeatureKind::categorical;
    if (p.categorical) {
      p.classes = f.vocab.size_with_eoc();
      p.width = f.embedding_dim;
      if (p.width == 0) {
        throw Error(ErrorKind::config, "predictor \"" + f.key + "\" has embedding width 0");
      }
    }
    arch.predictors.push_back(p);
  }
  for (const auto& [key, loss] : config.losses) {
    if (!schema.target_index(key)) {
      throw Error(ErrorKind::config, "loss given for non-target \"" + key + "\"");
    }
  }
  double weight_sum = 0.0;
  for (std::size_t i = 0; i < schema.targets.size(); ++i) {
    const FeatureSpec& f = schema.target(i);
    TargetDims t;
    t.key = f.key;
    t.categorical = f.kind == FeatureKind::categorical;
    t.classes = t.categorical ? f.vocab.size_with_eoc() : 1;
    t.loss = t.categorical ? LossKind::cross_entropy : LossKind::mse;
    if (const auto it = config.losses.find(f.key); it != config.losses.end()) {
      if (t.categorical != (it->second == LossKind::cross_entropy)) {
        throw Error(ErrorKind::config, "loss " + std::string(to_string(it->second)) +
                                           " does not fit " +
                                           std::string(to_string(f.kind)) + " target \"" +
                                           f.key + "\"");
      }
      t.loss = it->second;
    }
    if (const auto it = config.weights.find(f.key); it != config.weights.end()) {
      t.weight = it->second;
    }
    if (!(t.weight >= 0.0) || !std::isfinite(t.weight)) {
      throw Error(ErrorKind::config, "loss weight for \"" + f.key + "\" must be finite and >= 0");
    }
    weight_sum += t.weight;
    arch.targets.push_back(t);
  }
  for (const auto& [key, w] : config.weights) {
    if (!schema.target_index(key)) {
      throw Error(ErrorKind::config, "weight given for non-target \"" + key + "\"");
    }
  }
  if (weight_sum <= 0.0) throw Error(ErrorKind::config, "all target loss weights are zero");

  const std::size_t m = arch.concat_width();
  if (arch.use_input_projection) {
    arch.projection_width = config.input_width == 0 ? config.hidden : config.input_width;
  } else if (config.input_width != 0 && config.input_width != m) {
    throw Error(ErrorKind::shape, "without an input projection the RNN input width " +
                                      std::to_string(config.input_width) +
                                      " must equal the concatenated width m = " +
                                      std::to_string(m));
  }
  return arch;
}

std::string ModelParams::stack_name(std::size_t stack) const {
  return arch.shared_rnn ? std::string("shared") : arch.targets[stack].key;
}

std::vector<ParamRef> ModelParams::tensors() {
  std::vector<ParamRef> out;
  for (std::size_t p = 0; p < arch.predictors.size(); ++p) {
    if (arch.predictors[p].categorical) {
      out.push_back({"embedding/" + arch.predictors[p].key, &embeddings[p]});
    }
  }
  if (arch.use_input_projection) out.push_back({"input_projection", &input_projection});
  for (std::size_t s = 0; s < stacks.size(); ++s) {
    const std::string prefix = "rnn/" + stack_name(s) + "/layer";
    for (std::size_t l = 0; l < stacks[s].layers.size(); ++l) {
      auto& layer = stacks[s].layers[l];
      const std::string base = prefix + std::to_string(l);
      out.push_back({base + "/W", &layer.W});
      out.push_back({base + "/U", &layer.U});
      out.push_back({base + "/bias", &layer.bias});
    }
  }
  for (std::size_t t = 0; t < heads.size(); ++t) {
    out.push_back({"output/" + arch.targets[t].key + "/W", &heads[t].W});
    out.push_back({"output/" + arch.targets[t].key + "/bias", &heads[t].bias});
  }
  return out;
}

std::vector<std::pair<std::string, const Matrix*>> ModelParams::tensors() const {
  std::vector<std::pair<std::string, const Matrix*>> out;
  for (auto& ref : const_cast<ModelParams*>(this)->tensors()) {
    out.emplace_back(std::move(ref.name), ref.value);
  }
  return out;
}

ModelParams allocate_params(const Architecture& arch) {
  ModelParams params;
  params.arch = arch;
  for (const auto& p : arch.predictors) {
    params.embeddings.push_back(p.categorical ? Matrix(p.classes, p.width) : Matrix());
  }
  if (arch.use_input_projection) {
    params.input_projection = Matrix(arch.concat_width(), arch.projection_width);
  }
  for (std::size_t s = 0; s < arch.stack_count(); ++s) {
    LstmStack stack;
    std::size_t in = arch.rnn_input_width();
    for (std::size_t l = 0; l < arch.layers; ++l) {
      stack.layers.push_back(make_lstm_layer(in, arch.hidden));
      in = arch.hidden;
    }
    params.stacks.push_back(std::move(stack));
  }
  for (const auto& t : arch.targets) {
    params.heads.push_back({Matrix(arch.hidden, t.classes), Matrix(1, t.classes)});
  }
  return params;
}

void init_params(ModelParams& params, std::uint64_t seed) {
  Xoshiro256 rng(seed);
  for (std::size_t p = 0; p < params.arch.predictors.size(); ++p) {
    if (params.arch.predictors[p].categorical) init_uniform(params.embeddings[p], rng);
  }
  if (params.arch.use_input_projection) init_uniform(params.input_projection, rng);
  for (auto& stack : params.stacks) {
    for (auto& layer : stack.layers) init_lstm_layer(layer, rng);
  }
  for (auto& head : params.heads) {
    init_uniform(head.W, rng);
    head.bias.fill(0.0);
  }
}

ModelParams build_model(const EncodingSchema& schema, const ModelConfig& config) {
  ModelParams params = allocate_params(make_architecture(schema, config));
  init_params(params, config.seed);
  return params;
}

RecurrentState zero_state(const ModelParams& params, std::size_t lanes) {
  RecurrentState state;
  for (const auto& stack : params.stacks) state.push_back(zero_stack_state(stack, lanes));
  return state;
}

std::int32_t argmax(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < row.size(); ++c) {
    if (row[c] > row[best]) best = c;
  }
  return static_cast<std::int32_t>(best);
}

namespace {

// Per-predictor lane columns for one step.
struct StepColumns {
  std::vector<std::vector<std::int32_t>> ids;
  std::vector<std::vector<double>> values;
};

Matrix concat_inputs(const ModelParams& params, const StepColumns& cols, std::size_t lanes) {
  const auto& arch = params.arch;
  Matrix c(lanes, arch.concat_width());
  std::size_t offset = 0;
  for (std::size_t p = 0; p < arch.predictors.size(); ++p) {
    const auto& dims = arch.predictors[p];
    if (dims.categorical) {
      const Matrix emb = embedding_forward(params.embeddings[p], cols.ids[p]);
      for (std::size_t r = 0; r < lanes; ++r) {
        for (std::size_t k = 0; k < dims.width; ++k) c(r, offset + k) = emb(r, k);
      }
    } else {
      for (std::size_t r = 0; r < lanes; ++r) c(r, offset) = cols.values[p][r];
    }
    offset += dims.width;
  }
  return c;
}

void check_finite(const Matrix& m, std::size_t step, const std::string& where) {
  if (!m.all_finite()) {
    throw Error(ErrorKind::numeric,
                "non-finite activation at step " + std::to_string(step) + " in " + where);
  }
}

std::vector<Matrix> run_step(const ModelParams& params, const StepColumns& cols,
                             std::size_t lanes, RecurrentState& state, StepCache* step_cache,
                             std::vector<StackWindowCache>* stack_caches, std::size_t step) {
  const auto& arch = params.arch;
  if (state.size() != params.stacks.size()) {
    throw Error(ErrorKind::shape, "recurrent state does not match the number of stacks");
  }
  Matrix concat = concat_inputs(params, cols, lanes);
  Matrix projected;
  const Matrix* rnn_input = &concat;
  if (arch.use_input_projection) {
    projected = matmul(concat, params.input_projection);
    rnn_input = &projected;
  }
  std::vector<Matrix> stack_out;
  stack_out.reserve(params.stacks.size());
  for (std::size_t s = 0; s < params.stacks.size(); ++s) {
    stack_out.push_back(lstm_stack_step(params.stacks[s], *rnn_input, state[s],
                                        stack_caches ? &(*stack_caches)[s] : nullptr));
    for (std::size_t l = 0; l < state[s].size(); ++l) {
      check_finite(state[s][l].h, step,
                   "stack " + params.stack_name(s) + " layer " + std::to_string(l));
    }
  }
  std::vector<Matrix> logits;
  logits.reserve(arch.targets.size());
  for (std::size_t t = 0; t < arch.targets.size(); ++t) {
    Matrix out = matmul(stack_out[arch.stack_for_target(t)], params.heads[t].W);
    add_row_bias(out, params.heads[t].bias);
    check_finite(out, step, "output head " + arch.targets[t].key);
    logits.push_back(std::move(out));
  }
  if (step_cache != nullptr) {
    step_cache->ids = cols.ids;
    step_cache->concat = std::move(concat);
    step_cache->stack_outputs = std::move(stack_out);
    step_cache->logits = logits;
  }
  return logits;
}

void check_batch(const ModelParams& params, const Batch& batch) {
  const auto& arch = params.arch;
  if (batch.inputs.size() != arch.predictors.size() || batch.targets.size() != arch.targets.size() ||
      batch.masks.size() != arch.targets.size()) {
    throw Error(ErrorKind::shape, "batch feature counts do not match the model");
  }
  for (std::size_t p = 0; p < arch.predictors.size(); ++p) {
    if (batch.inputs[p].categorical != arch.predictors[p].categorical) {
      throw Error(ErrorKind::shape, "batch predictor " + arch.predictors[p].key +
                                        " has the wrong kind");
    }
  }
  for (std::size_t t = 0; t < arch.targets.size(); ++t) {
    if (batch.targets[t].categorical != arch.targets[t].categorical) {
      throw Error(ErrorKind::shape, "batch target " + arch.targets[t].key + " has the wrong kind");
    }
  }
}

}  // namespace

WindowResult forward_window(const ModelParams& params, const Batch& batch, RecurrentState& state,
                            WindowCache* cache) {
  check_batch(params, batch);
  const auto& arch = params.arch;
  const std::size_t lanes = batch.lanes;
  const std::size_t steps = batch.steps;
  const std::size_t n_targets = arch.targets.size();
  if (cache != nullptr) {
    *cache = WindowCache{};
    cache->stacks.resize(params.stacks.size());
  }

  std::vector<std::vector<Matrix>> step_logits;
  step_logits.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    StepColumns cols;
    cols.ids.resize(arch.predictors.size());
    cols.values.resize(arch.predictors.size());
    for (std::size_t p = 0; p < arch.predictors.size(); ++p) {
      for (std::size_t r = 0; r < lanes; ++r) {
        if (arch.predictors[p].categorical) {
          cols.ids[p].push_back(batch.inputs[p].ids(r, t));
        } else {
          cols.values[p].push_back(batch.inputs[p].values(r, t));
        }
      }
    }
    StepCache* sc = nullptr;
    if (cache != nullptr) sc = &cache->steps.emplace_back();
    step_logits.push_back(
        run_step(params, cols, lanes, state, sc, cache ? &cache->stacks : nullptr, t));
  }

  WindowResult result;
  result.losses.assign(n_targets, 0.0);
  result.accuracy.assign(n_targets, std::numeric_limits<double>::quiet_NaN());
  result.has_signal.assign(n_targets, true);
  if (cache != nullptr) {
    cache->head_grads.assign(steps, std::vector<Matrix>(n_targets));
  }
  const double positions = static_cast<double>(lanes * steps);

  for (std::size_t i = 0; i < n_targets; ++i) {
    const auto& dims = arch.targets[i];
    if (dims.categorical) {
      double loss = 0.0;
      std::size_t correct = 0;
      for (std::size_t t = 0; t < steps; ++t) {
        Matrix probs = softmax_rows(step_logits[t][i]);
        std::vector<std::int32_t> ids(lanes);
        for (std::size_t r = 0; r < lanes; ++r) ids[r] = batch.targets[i].ids(r, t);
        // cross_entropy averages over lanes; rescale to the window mean.
        loss += cross_entropy(probs, ids) * static_cast<double>(lanes) / positions;
        for (std::size_t r = 0; r < lanes; ++r) {
          if (argmax(probs.row(r)) == ids[r]) ++correct;
        }
        if (cache != nullptr) {
          Matrix g = cross_entropy_logit_grad(probs, ids);
          scale_inplace(g, static_cast<double>(lanes) / positions * dims.weight);
          cache->head_grads[t][i] = std::move(g);
          cache->steps[t].probs.resize(n_targets);
          cache->steps[t].probs[i] = std::move(probs);
        }
      }
      result.losses[i] = loss;
      result.accuracy[i] = static_cast<double>(correct) / positions;
    } else {
      Matrix out(lanes * steps, 1);
      Matrix target(lanes * steps, 1);
      Matrix mask(lanes * steps, 1);
      double unmasked = 0.0;
      for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t r = 0; r < lanes; ++r) {
          const std::size_t row = t * lanes + r;
          out(row, 0) = step_logits[t][i](r, 0);
          target(row, 0) = batch.targets[i].values(r, t);
          mask(row, 0) = batch.masks[i](r, t);
          unmasked += mask(row, 0) != 0.0 ? 1.0 : 0.0;
        }
      }
      if (unmasked == 0.0) {
        result.has_signal[i] = false;
        if (cache != nullptr) {
          for (std::size_t t = 0; t < steps; ++t) cache->head_grads[t][i] = Matrix(lanes, 1);
        }
        continue;
      }
      result.losses[i] = regression_loss(dims.loss, out, target, mask);
      if (cache != nullptr) {
        const Matrix g = regression_loss_grad(dims.loss, out, target, mask);
        for (std::size_t t = 0; t < steps; ++t) {
          Matrix gt(lanes, 1);
          for (std::size_t r = 0; r < lanes; ++r) gt(r, 0) = g(t * lanes + r, 0) * dims.weight;
          cache->head_grads[t][i] = std::move(gt);
        }
      }
    }
    if (!std::isfinite(result.losses[i])) {
      throw Error(ErrorKind::numeric, "non-finite loss for target " + dims.key);
    }
  }
  for (std::size_t i = 0; i < n_targets; ++i) {
    result.combined_loss += arch.targets[i].weight * result.losses[i];
  }
  return result;
}

ModelParams backward_window(const ModelParams& params, WindowCache& cache) {
  if (cache.consumed) throw Error(ErrorKind::state, "backward_window: cache already consumed");
  cache.consumed = true;
  const auto& arch = params.arch;
  ModelParams grads = allocate_params(arch);
  const std::size_t steps = cache.steps.size();
  if (steps == 0) return grads;
  const std::size_t lanes = cache.steps[0].concat.rows();

  std::vector<std::vector<Matrix>> top_grads(params.stacks.size());
  for (auto& per_stack : top_grads) {
    for (std::size_t t = 0; t < steps; ++t) per_stack.emplace_back(lanes, arch.hidden);
  }
  for (std::size_t t = 0; t < steps; ++t) {
    const StepCache& sc = cache.steps[t];
    for (std::size_t i = 0; i < arch.targets.size(); ++i) {
      const Matrix& g = cache.head_grads[t][i];
      const std::size_t s = arch.stack_for_target(i);
      matmul_at_accumulate(sc.stack_outputs[s], g, grads.heads[i].W);
      sum_rows_accumulate(g, grads.heads[i].bias);
      matmul_bt_accumulate(g, params.heads[i].W, top_grads[s][t]);
    }
  }

  std::vector<Matrix> input_grads(steps, Matrix(lanes, arch.rnn_input_width()));
  for (std::size_t s = 0; s < params.stacks.size(); ++s) {
    StackBackward back = bptt_backward(params.stacks[s], cache.stacks[s], top_grads[s],
                                       grads.stacks[s]);
    for (std::size_t t = 0; t < steps; ++t) add_inplace(input_grads[t], back.input_grads[t]);
  }

  for (std::size_t t = 0; t < steps; ++t) {
    const StepCache& sc = cache.steps[t];
    Matrix concat_grad;
    if (arch.use_input_projection) {
      matmul_at_accumulate(sc.concat, input_grads[t], grads.input_projection);
      concat_grad = Matrix(lanes, arch.concat_width());
      matmul_bt_accumulate(input_grads[t], params.input_projection, concat_grad);
    } else {
      concat_grad = std::move(input_grads[t]);
    }
    std::size_t offset = 0;
    for (std::size_t p = 0; p < arch.predictors.size(); ++p) {
      const auto& dims = arch.predictors[p];
      if (dims.categorical) {
        Matrix slice(lanes, dims.width);
        for (std::size_t r = 0; r < lanes; ++r) {
          for (std::size_t k = 0; k < dims.width; ++k) slice(r, k) = concat_grad(r, offset + k);
        }
        embedding_backward(slice, sc.ids[p], grads.embeddings[p]);
      }
      offset += dims.width;
    }
  }
  return grads;
}

StepOutputs forward_step(const ModelParams& params,
                         const std::vector<std::vector<FeatureValue>>& features,
                         RecurrentState& state) {
  const auto& arch = params.arch;
  const std::size_t lanes = features.size();
  StepColumns cols;
  cols.ids.resize(arch.predictors.size());
  cols.values.resize(arch.predictors.size());
  for (std::size_t r = 0; r < lanes; ++r) {
    if (features[r].size() != arch.predictors.size()) {
      throw Error(ErrorKind::shape, "event has " + std::to_string(features[r].size()) +
                                        " predictor values, model expects " +
                                        std::to_string(arch.predictors.size()));
    }
    for (std::size_t p = 0; p < arch.predictors.size(); ++p) {
      if (arch.predictors[p].categorical) {
        cols.ids[p].push_back(features[r][p].id);
      } else {
        cols.values[p].push_back(features[r][p].value);
      }
    }
  }
  return run_step(params, cols, lanes, state, nullptr, nullptr, 0);
}

}  // namespace xespred
