#pragma once

#include <string>
#include <string_view>

#include "json.hpp"
#include "xespred/training.hpp"

namespace xespred {

/// Parses the TOML subset used by run configurations: tables, dotted keys,
/// strings, integers, floats, booleans, arrays and inline tables. Dates are
/// not supported.
nlohmann::ordered_json parse_toml(std::string_view text);

/// Renders a table tree as TOML. Nested objects become `[a.b]` sections.
std::string write_toml(const nlohmann::ordered_json& document);

/// Maps a parsed document onto a run configuration. Unknown keys are
/// rejected. Relative paths resolve against `base_dir`.
TrainRunConfig config_from_document(const nlohmann::ordered_json& document,
                                    const std::string& base_dir = {});
nlohmann::ordered_json config_to_document(const TrainRunConfig& run);

TrainRunConfig parse_config(std::string_view text, const std::string& base_dir = {});
TrainRunConfig load_config(const std::string& path);
std::string format_config(const TrainRunConfig& run);
void save_config(const TrainRunConfig& run, const std::string& path);

}  // namespace xespred
