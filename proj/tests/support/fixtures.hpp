#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "xespred/error.hpp"
#include "xespred/training.hpp"
#include "xespred/xes.hpp"

namespace xespred::testing {

std::string data_path(const std::string& name);

/// Kind of the xespred::Error thrown by `f`, or nullopt when it returns.
template <typename F>
std::optional<ErrorKind> error_kind(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

/// Hand counts for the logs under tests/data.
struct FixtureCount {
  const char* file;
  std::size_t kept;
  std::size_t omitted;
  std::size_t warnings;
  std::size_t events;  // in kept traces
};

inline constexpr FixtureCount kFixtureCounts[] = {
    {"all_types.xes", 3, 0, 0, 4},
    {"filtered.xes", 3, 4, 1, 5},
    {"nested.xes", 1, 0, 0, 2},
    {"classifiers.xes", 2, 0, 0, 3},
    {"escapes.xes", 1, 0, 0, 4},
    {"minimal.xes", 1, 1, 0, 1},
};

/// Fresh empty directory under the system temp dir.
std::filesystem::path make_temp_dir(const std::string& tag);

std::string read_file(const std::filesystem::path& path);

/// Log whose events carry only a declared string concept:name.
EventLog toy_log(const std::vector<std::vector<std::string>>& traces);

/// Activity and resource as predictors and targets, hidden 16, one layer,
/// Adam at 1e-2.
TrainRunConfig synthetic_run(std::size_t epochs);

}  // namespace xespred::testing
