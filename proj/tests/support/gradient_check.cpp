#include "gradient_check.hpp"

#include <cmath>
#include <sstream>

#include "reference_model.hpp"
#include "xespred/rng.hpp"

namespace xespred::testing {

namespace {

Batch random_batch(const Architecture& arch, std::size_t lanes, std::size_t steps,
                   Xoshiro256& rng) {
  Batch batch;
  batch.lanes = lanes;
  batch.steps = steps;
  batch.lane_length = steps;
  for (const auto& p : arch.predictors) {
    FeatureBlock block;
    block.categorical = p.categorical;
    block.ids = IndexMatrix(lanes, steps);
    block.values = Matrix(lanes, steps);
    for (std::size_t r = 0; r < lanes; ++r) {
      for (std::size_t t = 0; t < steps; ++t) {
        if (p.categorical) {
          block.ids(r, t) = static_cast<std::int32_t>(rng.below(p.classes));
        } else {
          block.values(r, t) = rng.uniform(-2.0, 2.0);
        }
      }
    }
    batch.inputs.push_back(std::move(block));
  }
  for (const auto& t : arch.targets) {
    FeatureBlock block;
    block.categorical = t.categorical;
    block.ids = IndexMatrix(lanes, steps);
    block.values = Matrix(lanes, steps);
    Matrix mask(lanes, steps, 1.0);
    for (std::size_t r = 0; r < lanes; ++r) {
      for (std::size_t s = 0; s < steps; ++s) {
        if (t.categorical) {
          block.ids(r, s) = static_cast<std::int32_t>(rng.below(t.classes));
        } else {
          block.values(r, s) = rng.uniform(-2.0, 2.0);
          if (r + s > 0 && rng.next_unit() < 0.25) mask(r, s) = 0.0;
        }
      }
    }
    batch.targets.push_back(std::move(block));
    batch.masks.push_back(std::move(mask));
  }
  return batch;
}

}  // namespace

std::string GradCheckCase::describe() const {
  std::ostringstream out;
  out << "b=" << lanes << " s=" << steps << " layers=" << arch.layers << " hidden=" << arch.hidden
      << (arch.shared_rnn ? " shared" : " separate")
      << (arch.use_input_projection ? " projected" : "") << " predictors=";
  for (const auto& p : arch.predictors) out << (p.categorical ? 'c' : 'n');
  out << " targets=";
  for (const auto& t : arch.targets) {
    out << (t.categorical ? std::string("ce") : std::string(to_string(t.loss))) << ' ';
  }
  return out.str();
}

GradCheckCase random_case(std::uint64_t seed) {
  Xoshiro256 rng(seed * 7919 + 17);
  GradCheckCase c;
  c.lanes = 1 + rng.below(3);
  c.steps = 1 + rng.below(4);
  c.arch.layers = 1 + rng.below(2);
  c.arch.hidden = 1 + rng.below(8);
  c.arch.shared_rnn = seed % 2 == 0;
  c.arch.use_input_projection = rng.below(3) == 0;
  if (c.arch.use_input_projection) c.arch.projection_width = 1 + rng.below(6);

  const std::size_t n_cat = 1 + rng.below(2);
  const std::size_t n_num = 1 + rng.below(2);
  for (std::size_t i = 0; i < n_cat; ++i) {
    PredictorDims p;
    p.key = "cat" + std::to_string(i);
    p.categorical = true;
    p.classes = 2 + rng.below(4);
    p.width = 1 + rng.below(3);
    c.arch.predictors.push_back(p);
  }
  for (std::size_t i = 0; i < n_num; ++i) {
    PredictorDims p;
    p.key = "num" + std::to_string(i);
    c.arch.predictors.push_back(p);
  }

  TargetDims primary;
  primary.key = "cat0";
  primary.categorical = true;
  primary.classes = c.arch.predictors[0].classes;
  primary.weight = rng.uniform(0.5, 2.0);
  c.arch.targets.push_back(primary);
  TargetDims numeric;
  numeric.key = "num0";
  const LossKind kinds[] = {LossKind::mse, LossKind::rmse, LossKind::mae};
  numeric.loss = kinds[rng.below(3)];
  numeric.weight = rng.uniform(0.5, 2.0);
  c.arch.targets.push_back(numeric);
  if (rng.below(2) == 0) {
    TargetDims extra;
    extra.key = "extra";
    extra.categorical = true;
    extra.classes = 2 + rng.below(3);
    extra.weight = rng.uniform(0.5, 2.0);
    c.arch.targets.push_back(extra);
  }
  return c;
}

GradCheckResult check_gradients(const GradCheckCase& c, std::uint64_t seed, double delta) {
  Xoshiro256 rng(seed);
  ModelParams params = allocate_params(c.arch);
  init_params(params, seed);
  for (auto& ref : params.tensors()) {
    for (double& v : ref.value->values()) v += rng.uniform(-0.5, 0.5);
  }
  const Batch batch = random_batch(c.arch, c.lanes, c.steps, rng);

  RecurrentState initial = zero_state(params, c.lanes);
  for (auto& stack : initial) {
    for (auto& layer : stack) {
      for (double& v : layer.h.values()) v = rng.uniform(-0.5, 0.5);
      for (double& v : layer.c.values()) v = rng.uniform(-0.5, 0.5);
    }
  }

  RecurrentState state = initial;
  WindowCache cache;
  forward_window(params, batch, state, &cache);
  const ModelParams grads = backward_window(params, cache);
  const auto analytic = grads.tensors();

  TensorMap reference = to_reference(params);
  GradCheckResult result;
  for (const auto& [name, grad] : analytic) {
    auto& values = reference.at(name);
    for (std::size_t k = 0; k < values.size(); ++k) {
      const Real saved = values[k];
      values[k] = saved + delta;
      const Real plus = reference_window_loss(c.arch, reference, batch, initial).combined;
      values[k] = saved - delta;
      const Real minus = reference_window_loss(c.arch, reference, batch, initial).combined;
      values[k] = saved;
      const Real numeric = (plus - minus) / (2.0L * delta);
      const Real a = grad->values()[k];
      const Real err = std::fabs(a - numeric) / std::max(std::fabs(numeric), 1e-8L);
      ++result.parameters;
      if (static_cast<double>(err) > result.max_relative_error) {
        result.max_relative_error = static_cast<double>(err);
        result.worst = name + "[" + std::to_string(k) + "]";
      }
    }
  }
  return result;
}

}  // namespace xespred::testing
