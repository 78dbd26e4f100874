#include "fixtures.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace xespred::testing {

namespace fs = std::filesystem;

std::string data_path(const std::string& name) { return std::string(XESPRED_TEST_DATA) + "/" + name; }

fs::path make_temp_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  const fs::path dir = fs::temp_directory_path() /
                       ("xespred_" + tag + "_" + std::to_string(::getpid()) + "_" +
                        std::to_string(counter++));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

EventLog toy_log(const std::vector<std::vector<std::string>>& traces) {
  EventLog log;
  log.global_event_attrs.set("concept:name", std::string("__INVALID__"));
  for (std::size_t i = 0; i < traces.size(); ++i) {
    Trace trace;
    trace.attributes.set("concept:name", "t" + std::to_string(i + 1));
    for (const auto& activity : traces[i]) {
      Event e;
      e.attributes.set("concept:name", activity);
      trace.events.push_back(std::move(e));
    }
    log.traces.push_back(std::move(trace));
  }
  return log;
}

TrainRunConfig synthetic_run(std::size_t epochs) {
  TrainRunConfig run;
  run.data.schema.predictors = {"concept:name", "org:resource"};
  run.data.schema.targets = {"concept:name", "org:resource"};
  run.model.batch_size = 20;
  run.model.steps = 5;
  run.model.layers = 1;
  run.model.hidden = 16;
  run.model.epochs = epochs;
  run.model.optimizer.kind = OptimizerKind::adam;
  run.model.optimizer.learning_rate = 1e-2;
  run.model.seed = 7;
  return run;
}

}  // namespace xespred::testing
