#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "xespred/cli.hpp"
#include "xespred/frozen.hpp"
#include "xespred/synthetic.hpp"

using namespace xespred;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "xespred");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("no subcommand prints usage") {
  const Run r = cli({});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("Usage") != std::string::npos);
  CHECK(cli({"bogus"}).code == kExitUsage);
  CHECK(cli({"predict", "--model", "m.xtfp"}).code == kExitUsage);
}

TEST_CASE("missing model is a runtime error") {
  const auto dir = xespred::testing::make_temp_dir("cli_missing");
  const Run r = cli({"predict", "--model", (dir / "missing.xtfp").string(), "--input",
                     (dir / "in.xes").string(), "--output", (dir / "out.xes").string()});
  CHECK(r.code == kExitFailure);
  CHECK(r.err.rfind("error: ", 0) == 0);
}

TEST_CASE("generate, train, predict, evaluate and inspect end to end") {
  const auto dir = xespred::testing::make_temp_dir("cli_e2e");
  const std::string log = (dir / "demo.xes").string();
  const std::string config = (dir / "demo.toml").string();
  REQUIRE(cli({"generate", "--output", log, "--config-out", config}).code == kExitOk);

  const auto parsed = parse_xes_file(log);
  CHECK(parsed.log.traces.size() == 100);
  for (const auto& t : parsed.log.traces) CHECK(t.events.size() == 4);

  const Run train = cli({"train", "--config", config});
  REQUIRE(train.code == kExitOk);
  for (const char* name : {"model.xtfp", "checkpoint.xtfp", "metrics.csv", "config.toml"}) {
    CAPTURE(name);
    CHECK(fs::exists(dir / "out" / name));
  }

  // prefixes: first event of the first two traces
  EventLog prefixes = parsed.log;
  prefixes.traces.resize(2);
  for (auto& t : prefixes.traces) t.events.resize(1);
  write_xes_file(prefixes, (dir / "prefix.xes").string());
  const Run predict = cli({"predict", "--model", (dir / "out" / "model.xtfp").string(), "--input",
                           (dir / "prefix.xes").string(), "--output",
                           (dir / "pred.xes").string(), "--stop-on-eoc"});
  REQUIRE(predict.code == kExitOk);
  const auto predicted = parse_xes_file((dir / "pred.xes").string()).log;
  REQUIRE(predicted.traces.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    std::vector<std::string> got;
    std::vector<std::string> want;
    for (const auto& e : predicted.traces[i].events) {
      got.push_back(std::get<std::string>(*e.attributes.find("concept:name")));
    }
    for (const auto& e : parsed.log.traces[i].events) {
      want.push_back(std::get<std::string>(*e.attributes.find("concept:name")));
    }
    CHECK(got == want);
  }

  const Run eval = cli({"evaluate", "--model", (dir / "out" / "model.xtfp").string(), "--input",
                        log, "--report", (dir / "report.csv").string()});
  REQUIRE(eval.code == kExitOk);
  const std::string report = xespred::testing::read_file(dir / "report.csv");
  CHECK(report.find("0,*,concept:name,1,") != std::string::npos);

  const Run inspect_log = cli({"inspect", "--log", log});
  CHECK(inspect_log.code == kExitOk);
  CHECK(inspect_log.out.find("100") != std::string::npos);
  const Run inspect_model = cli({"inspect", "--model", (dir / "out" / "model.xtfp").string()});
  CHECK(inspect_model.code == kExitOk);
  CHECK(inspect_model.out.find("rnn/shared/layer0/W") != std::string::npos);
}

TEST_CASE("bad config is reported with its kind") {
  const auto dir = xespred::testing::make_temp_dir("cli_cfg");
  const std::string config = (dir / "bad.toml").string();
  {
    std::ofstream out(config);
    out << "[model]\nhidden = 0\n[data]\ntargets = [\"concept:name\"]\nxes = \"x.xes\"\n";
  }
  const Run r = cli({"train", "--config", config});
  CHECK(r.code == kExitFailure);
  CHECK(r.err.rfind("error: config:", 0) == 0);
}
