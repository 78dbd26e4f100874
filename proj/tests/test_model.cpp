#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "gradient_check.hpp"
#include "xespred/model.hpp"

using namespace xespred;
using xespred::testing::toy_log;

namespace {

// Activities A, B, C plus a numeric "x" on every event.
EventLog numeric_log() {
  EventLog log = toy_log({{"A", "B", "C", "A"}, {"B", "C"}, {"A", "C", "B"}});
  log.global_event_attrs.set("x", 0.0);
  double x = 0.5;
  for (auto& t : log.traces) {
    for (auto& e : t.events) e.attributes.set("x", x += 0.75);
  }
  return log;
}

EncodingSchema schema_for(const std::vector<std::string>& predictors,
                          const std::vector<std::string>& targets) {
  SchemaConfig config;
  config.predictors = predictors;
  config.targets = targets;
  return build_schema(numeric_log(), config);
}

Batch first_batch(const EncodingSchema& schema, std::size_t lanes, std::size_t steps) {
  return make_batches(encode_stream(numeric_log(), schema), lanes, steps).front();
}

}  // namespace

TEST_CASE("concatenated width") {
  const auto schema = schema_for({"concept:name", "x"}, {"concept:name"});
  const Architecture arch = make_architecture(schema, {});
  CHECK(arch.predictors[0].classes == 4);
  CHECK(arch.predictors[0].width == 2);
  CHECK(arch.concat_width() == 3);
  CHECK(arch.rnn_input_width() == 3);
}

TEST_CASE("input projection shape") {
  const auto schema = schema_for({"concept:name", "x"}, {"concept:name"});
  ModelConfig config;
  config.use_input_projection = true;
  config.input_width = 8;
  const ModelParams params = build_model(schema, config);
  CHECK(params.input_projection.rows() == 3);
  CHECK(params.input_projection.cols() == 8);
  CHECK(params.stacks[0].layers[0].W.rows() == 8);
}

TEST_CASE("separate stacks share one embedding set") {
  const auto schema = schema_for({"concept:name", "x"}, {"concept:name", "x"});
  ModelConfig config;
  config.shared_rnn = false;
  const ModelParams params = build_model(schema, config);
  CHECK(params.stacks.size() == 2);
  CHECK(params.heads.size() == 2);
  std::size_t embeddings = 0;
  for (const auto& [name, m] : params.tensors()) {
    if (name.rfind("embedding/", 0) == 0) ++embeddings;
  }
  CHECK(embeddings == 1);
  CHECK(params.stack_name(1) == "x");
}

TEST_CASE("window equals stepping the same positions") {
  const auto schema = schema_for({"concept:name", "x"}, {"concept:name", "x"});
  ModelConfig config;
  config.layers = 2;
  config.hidden = 5;
  config.batch_size = 2;
  config.steps = 5;
  const ModelParams params = build_model(schema, config);
  const Batch batch = first_batch(schema, 2, 5);

  RecurrentState window_state = zero_state(params, 2);
  WindowCache cache;
  forward_window(params, batch, window_state, &cache);
  REQUIRE(cache.steps.size() == 5);

  RecurrentState step_state = zero_state(params, 2);
  StepOutputs last;
  for (std::size_t t = 0; t < 5; ++t) {
    std::vector<std::vector<FeatureValue>> features(2, std::vector<FeatureValue>(2));
    for (std::size_t r = 0; r < 2; ++r) {
      features[r][0].id = batch.inputs[0].ids(r, t);
      features[r][1].value = batch.inputs[1].values(r, t);
    }
    last = forward_step(params, features, step_state);
  }
  CHECK(step_state == window_state);
  CHECK(last[0] == cache.steps[4].logits[0]);
  CHECK(last[1] == cache.steps[4].logits[1]);
  CHECK(window_state[0].size() == 2);
}

TEST_CASE("zero parameters give a uniform categorical loss") {
  const auto schema = schema_for({"concept:name"}, {"concept:name"});
  ModelParams params = allocate_params(make_architecture(schema, {}));
  RecurrentState state = zero_state(params, 2);
  const auto result = forward_window(params, first_batch(schema, 2, 3), state);
  CHECK(result.losses[0] == doctest::Approx(std::log(4.0)));

  RecurrentState one = zero_state(params, 1);
  const auto outs = forward_step(params, {{FeatureValue{1, 0.0}}}, one);
  for (const double v : outs[0].values()) CHECK(v == 0.0);
}

TEST_CASE("shared and separate stacks agree for a single target") {
  const auto schema = schema_for({"concept:name", "x"}, {"concept:name"});
  ModelConfig shared;
  shared.seed = 5;
  ModelConfig separate = shared;
  separate.shared_rnn = false;
  const ModelParams a = build_model(schema, shared);
  const ModelParams b = build_model(schema, separate);
  const Batch batch = first_batch(schema, 2, 3);
  RecurrentState sa = zero_state(a, 2);
  RecurrentState sb = zero_state(b, 2);
  CHECK(forward_window(a, batch, sa).losses == forward_window(b, batch, sb).losses);
}

TEST_CASE("forward step is deterministic") {
  const auto schema = schema_for({"concept:name", "x"}, {"concept:name", "x"});
  const ModelParams params = build_model(schema, {});
  const std::vector<std::vector<FeatureValue>> features{{FeatureValue{2, 0.0}, FeatureValue{0, 0.3}}};
  RecurrentState s1 = zero_state(params, 1);
  RecurrentState s2 = zero_state(params, 1);
  CHECK(forward_step(params, features, s1) == forward_step(params, features, s2));
  CHECK(s1 == s2);
}

TEST_CASE("initialization is seeded") {
  const auto schema = schema_for({"concept:name", "x"}, {"concept:name"});
  ModelConfig config;
  config.seed = 9;
  CHECK(build_model(schema, config) == build_model(schema, config));
  config.seed = 10;
  ModelConfig other = config;
  other.seed = 11;
  CHECK_FALSE(build_model(schema, config) == build_model(schema, other));
}

TEST_CASE("zero loss weights give zero gradients") {
  const auto schema = schema_for({"concept:name", "x"}, {"concept:name", "x"});
  // Configs reject all-zero weights, so the architecture is edited directly.
  Architecture arch = make_architecture(schema, {});
  for (auto& t : arch.targets) t.weight = 0.0;
  ModelParams params = allocate_params(arch);
  init_params(params, 4);
  RecurrentState state = zero_state(params, 2);
  WindowCache cache;
  forward_window(params, first_batch(schema, 2, 3), state, &cache);
  const ModelParams grads = backward_window(params, cache);
  for (const auto& [name, m] : grads.tensors()) {
    CAPTURE(name);
    for (const double v : m->values()) CHECK(v == 0.0);
  }
}

TEST_CASE("consumed caches are rejected") {
  const auto schema = schema_for({"concept:name"}, {"concept:name"});
  const ModelParams params = build_model(schema, {});
  RecurrentState state = zero_state(params, 2);
  WindowCache cache;
  forward_window(params, first_batch(schema, 2, 3), state, &cache);
  backward_window(params, cache);
  CHECK(xespred::testing::error_kind([&] { backward_window(params, cache); }) == ErrorKind::state);
}

TEST_CASE("analytic gradients match finite differences") {
  for (std::uint64_t seed = 101; seed < 107; ++seed) {
    const auto c = xespred::testing::random_case(seed);
    CAPTURE(c.describe());
    const auto result = xespred::testing::check_gradients(c, seed);
    CAPTURE(result.worst);
    CHECK(result.max_relative_error < 1e-4);
  }
}

TEST_CASE("two-step window gradient") {
  auto c = xespred::testing::random_case(3);
  c.steps = 2;
  const auto result = xespred::testing::check_gradients(c, 3);
  CAPTURE(result.worst);
  CHECK(result.max_relative_error < 1e-4);
}
