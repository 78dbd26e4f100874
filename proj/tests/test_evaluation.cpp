#include <cmath>
#include <sstream>

#include "doctest.h"
#include "edit_oracle.hpp"
#include "fixtures.hpp"
#include "xespred/evaluation.hpp"
#include "xespred/rng.hpp"
#include "xespred/training.hpp"

using namespace xespred;
using xespred::testing::toy_log;

namespace {

FrozenModel zero_model(const EventLog& log) {
  FrozenModel model;
  SchemaConfig sc;
  sc.predictors = {"concept:name"};
  sc.targets = {"concept:name"};
  model.schema = build_schema(log, sc);
  model.config.hidden = 4;
  model.params = allocate_params(make_architecture(model.schema, model.config));
  return model;
}

std::size_t count_lines(const std::string& text) {
  std::size_t n = 0;
  for (const char c : text) n += c == '\n';
  return n;
}

}  // namespace

TEST_CASE("levenshtein examples") {
  CHECK(levenshtein("ABC", "ABC") == 0);
  CHECK(levenshtein("ABC", "") == 3);
  CHECK(levenshtein("", "") == 0);
  CHECK(levenshtein("kitten", "sitting") == 3);
  CHECK(xespred::testing::exhaustive_edit_distance("kitten", "sitting", "egiknst") == 3);
}

TEST_CASE("suffix similarity examples") {
  CHECK(suffix_similarity("ABC", "ABC") == 1.0);
  CHECK(suffix_similarity("AB", "CD") == 0.0);
  CHECK(suffix_similarity("ABC", "AB") == doctest::Approx(1.0 - 1.0 / 3.0));
  CHECK(suffix_similarity("", "") == 1.0);
  const std::int32_t a[] = {1, 2, 3};
  const std::int32_t b[] = {1, 3};
  CHECK(suffix_similarity<std::int32_t>(a, b) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("levenshtein agrees with exhaustive search on short strings") {
  Xoshiro256 rng(5);
  for (int i = 0; i < 200; ++i) {
    std::string a(rng.below(6), 'a');
    std::string b(rng.below(6), 'a');
    for (char& c : a) c = static_cast<char>('a' + rng.below(3));
    for (char& c : b) c = static_cast<char>('a' + rng.below(3));
    CAPTURE(a);
    CAPTURE(b);
    CHECK(levenshtein(a, b) == xespred::testing::exhaustive_edit_distance(a, b, "abc"));
  }
}

TEST_CASE("untrained model predicts the lowest id") {
  // Ids: A=0, B=1, C=2, EOC=3. Targets: B C EOC A B EOC C A B EOC.
  const EventLog log = toy_log({{"A", "B", "C"}, {"A", "B"}, {"C", "A", "B"}});
  const FrozenModel model = zero_model(log);
  std::vector<ArgmaxRecord> dump;
  const auto metrics = next_event_accuracy(model, log, &dump);
  REQUIRE(dump.size() == 10);
  std::size_t zeros = 0;
  for (const auto& r : dump) {
    CHECK(r.predicted == 0);
    zeros += r.truth == 0;
  }
  CHECK(zeros == 2);
  CHECK(metrics[0].accuracy == doctest::Approx(0.2));
  CHECK(metrics[0].loss == doctest::Approx(std::log(4.0)));
  CHECK(next_event_accuracy(model, log)[0].accuracy == metrics[0].accuracy);
}

TEST_CASE("evaluation prefix lengths") {
  CHECK(evaluation_prefix_length(4) == 2);
  CHECK(evaluation_prefix_length(5) == 2);
  CHECK(evaluation_prefix_length(2) == 1);
  CHECK(evaluation_prefix_length(1) == 1);
}

TEST_CASE("report rows and skipped traces") {
  const EventLog log = toy_log({{"A", "B", "C", "A"}, {"B"}, {"C", "A", "B"}});
  const FrozenModel model = zero_model(log);
  const EvalReport report = evaluate_report(model, log);
  CHECK(report.skipped == 1);
  REQUIRE(report.traces.size() == 2);
  CHECK(report.traces[0].prefix_length == 2);
  CHECK(report.traces[0].truth == std::vector<std::int32_t>{2, 0});
  // zero model always predicts A, never EOC: runs to 2 * 4 + 1 steps
  CHECK(report.traces[0].predicted.size() == 9);
  CHECK(report.traces[0].edit_distance == 8);

  const std::string csv = format_report_csv({&report, 1});
  CHECK(count_lines(csv) == 1 + report.traces.size() + 1);
  CHECK(csv.rfind(std::string(kReportHeader), 0) == 0);
  CHECK(csv.find("\n0,*,concept:name,") != std::string::npos);
  CHECK(csv.substr(csv.size() - 3) == ",1\n");
}

TEST_CASE("saturated model scores perfectly on its training log") {
  const EventLog log = toy_log(std::vector<std::vector<std::string>>(12, {"A", "B", "C"}));
  TrainRunConfig run;
  run.data.schema.targets = {"concept:name"};
  run.model.batch_size = 2;
  run.model.steps = 4;
  run.model.hidden = 16;
  run.model.epochs = 200;
  run.model.seed = 3;
  const FrozenModel model = fit(log, run).model;
  const EvalReport report = evaluate_report(model, log);
  CHECK(report.targets[0].accuracy == 1.0);
  CHECK(report.mean_similarity == 1.0);
  CHECK(report.mean_edit_distance == 0.0);
  const EvalReport again = evaluate_report(model, log);
  CHECK(format_report_csv({&again, 1}) == format_report_csv({&report, 1}));
}
