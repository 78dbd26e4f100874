#include <thread>

#include "doctest.h"
#include "fixtures.hpp"
#include "json.hpp"
#include "line_client.hpp"
#include "xespred/service.hpp"
#include "xespred/training.hpp"

using namespace xespred;
using json = nlohmann::json;

namespace {

std::shared_ptr<const FrozenModel> abc_model() {
  static const auto model = [] {
    TrainRunConfig run;
    run.data.schema.targets = {"concept:name"};
    run.model.batch_size = 2;
    run.model.steps = 4;
    run.model.hidden = 16;
    run.model.epochs = 200;
    run.model.seed = 3;
    const EventLog log =
        xespred::testing::toy_log(std::vector<std::vector<std::string>>(12, {"A", "B", "C"}));
    return std::make_shared<const FrozenModel>(fit(log, run).model);
  }();
  return model;
}

const char* kRequest = R"({"prefix":[{"concept:name":"A"}]})";

}  // namespace

TEST_CASE("request handling") {
  const FrozenModel& model = *abc_model();
  const json ok = json::parse(handle_request_line(model, kRequest));
  CHECK(ok["stopped"] == "eoc");
  CHECK(ok["suffix"] == json::parse(R"([{"concept:name":"B"},{"concept:name":"C"}])"));

  const json capped = json::parse(handle_request_line(
      model, R"({"prefix":[{"concept:name":"A"}],"max_steps":3,"stop_on_eoc":false})"));
  CHECK(capped["stopped"] == "max_steps");
  CHECK(capped["suffix"].size() == 3);

  CHECK(json::parse(handle_request_line(model, "{nope"))["error"] == "parse");
  CHECK(json::parse(handle_request_line(model, R"({"prefix":[]})"))["error"] == "request");
  CHECK(json::parse(handle_request_line(model, R"({"prefix":[{"concept:name":"A"}],"x":1})"))
            ["error"] == "request");
  CHECK(json::parse(handle_request_line(model, R"({"prefix":[{"concept:name":"Q"}]})"))
            ["error"] == "unknown_value");
  CHECK(json::parse(handle_request_line(model, R"({"prefix":[{"concept:name":7}]})"))
            ["error"] == "request");
}

TEST_CASE("listen address parsing") {
  CHECK(parse_listen_address("127.0.0.1:8080") == std::pair<std::string, std::uint16_t>{"127.0.0.1", 8080});
  CHECK(parse_listen_address(":0").first == "0.0.0.0");
  CHECK(xespred::testing::error_kind([] { parse_listen_address("localhost"); }).has_value());
  CHECK(xespred::testing::error_kind([] { parse_listen_address("h:70000"); }).has_value());
}

TEST_CASE("server keeps a connection alive after a malformed line") {
  PredictionServer server(abc_model(), "127.0.0.1", 0);
  server.start();
  xespred::testing::LineClient client("127.0.0.1", server.port());
  const json bad = json::parse(client.request("this is not json"));
  CHECK(bad["error"] == "parse");
  const json good = json::parse(client.request(kRequest));
  CHECK(good["stopped"] == "eoc");
  CHECK(good["suffix"].size() == 2);
  server.stop();
}

TEST_CASE("concurrent identical requests get identical answers") {
  PredictionServer server(abc_model(), "127.0.0.1", 0);
  server.start();
  std::vector<std::string> answers(8);
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < answers.size(); ++i) {
    threads.emplace_back([&, i] {
      xespred::testing::LineClient client("127.0.0.1", server.port());
      answers[i] = client.request(kRequest);
    });
  }
  for (auto& t : threads) t.join();
  server.stop();
  for (const auto& a : answers) CHECK(a == answers.front());
  CHECK(json::parse(answers.front())["suffix"].size() == 2);
}
