#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "xespred/config.hpp"

using namespace xespred;
using xespred::testing::error_kind;

TEST_CASE("toml subset") {
  const auto doc = parse_toml(R"(
# comment
title = "demo"   # trailing
[a]
int = 1_000
neg = -7
flt = 2.5e-3
yes = true
list = [
  "x",
  'y',   # literal
]
inline = { k = 1, "quoted key" = "v" }
dotted.key = 3
[a.b]
esc = "tab\there é"
inf = inf
)");
  CHECK(doc["title"] == "demo");
  CHECK(doc["a"]["int"] == 1000);
  CHECK(doc["a"]["neg"] == -7);
  CHECK(doc["a"]["flt"].get<double>() == 2.5e-3);
  CHECK(doc["a"]["yes"] == true);
  CHECK(doc["a"]["list"] == nlohmann::ordered_json::array({"x", "y"}));
  CHECK(doc["a"]["inline"]["quoted key"] == "v");
  CHECK(doc["a"]["dotted"]["key"] == 3);
  CHECK(doc["a"]["b"]["esc"] == "tab\there \xC3\xA9");
  CHECK(std::isinf(doc["a"]["b"]["inf"].get<double>()));
}

TEST_CASE("toml errors carry a line number") {
  try {
    parse_toml("a = 1\nb = \n");
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK(error_kind([] { parse_toml("a = 1\na = 2\n"); }) == ErrorKind::config);
  CHECK(error_kind([] { parse_toml("[t]\n[t]\n"); }) == ErrorKind::config);
  CHECK(error_kind([] { parse_toml("s = \"open\n"); }) == ErrorKind::config);
}

TEST_CASE("written toml parses back to the same document") {
  const auto doc = parse_toml(R"(
top = 1.0
[x]
"odd key" = [1, 2]
name = "q\"uote"
[x.y]
z = false
[empty]
)");
  CHECK(parse_toml(write_toml(doc)) == doc);
  CHECK(write_toml(doc).find("top = 1.0") != std::string::npos);
}

TEST_CASE("run config round-trip") {
  TrainRunConfig run;
  run.data.xes = "/data/log.xes";
  run.data.schema.predictors = {"concept:name", "time:timestamp"};
  run.data.schema.targets = {"concept:name"};
  run.data.schema.categorical = {"code"};
  run.data.schema.time_scale = TimeScaleKind::minutes;
  run.data.schema.embedding_dims = {{"concept:name", 3}};
  run.data.classifiers = {"Activity"};
  run.model.layers = 2;
  run.model.hidden = 12;
  run.model.use_input_projection = true;
  run.model.input_width = 6;
  run.model.shared_rnn = false;
  run.model.losses = {{"time:timestamp", LossKind::mae}};
  run.model.weights = {{"concept:name", 0.5}};
  run.model.optimizer.kind = OptimizerKind::rmsprop;
  run.model.optimizer.learning_rate = 0.003;
  run.model.seed = 123456789012345;
  run.model.lr_decay = 0.95;
  run.k_folds = 5;
  run.output_dir = "/tmp/out";
  run.checkpoint_interval = 2;
  run.metrics_flush = 10;
  CHECK(parse_config(format_config(run)) == run);
}

TEST_CASE("relative paths resolve against the config directory") {
  const auto run = parse_config("[data]\nxes = \"logs/a.xes\"\ntargets = [\"concept:name\"]\n",
                                "/etc/demo");
  CHECK(run.data.xes == "/etc/demo/logs/a.xes");
  CHECK(run.output_dir == "/etc/demo/out");
}

TEST_CASE("unknown and invalid keys are rejected") {
  CHECK(error_kind([] { parse_config("[model]\nhiden = 3\n"); }) == ErrorKind::config);
  CHECK(error_kind([] { parse_config("[extra]\n"); }) == ErrorKind::config);
  CHECK(error_kind([] { parse_config("[model]\nhidden = -3\n"); }) == ErrorKind::config);
  CHECK(error_kind([] { parse_config("[model]\nhidden = \"3\"\n"); }) == ErrorKind::config);
  CHECK(error_kind([] { parse_config("[train]\noptimizer = \"lbfgs\"\n"); }) == ErrorKind::config);
  CHECK(error_kind([] { parse_config("[data]\ntime_scale = \"weeks\"\n"); }) == ErrorKind::config);
}

TEST_CASE("config file on disk") {
  const auto dir = xespred::testing::make_temp_dir("cfg");
  TrainRunConfig run;
  run.data.xes = (dir / "x.xes").string();
  run.data.schema.targets = {"concept:name"};
  run.output_dir = (dir / "out").string();
  save_config(run, (dir / "c.toml").string());
  CHECK(load_config((dir / "c.toml").string()) == run);
  CHECK(error_kind([&] { load_config((dir / "missing.toml").string()); }) == ErrorKind::io);
}
