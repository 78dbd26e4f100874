#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "xespred/frozen.hpp"
#include "xespred/xes.hpp"

namespace xespred {

enum class DecodeMode { argmax, sample };

std::string_view to_string(DecodeMode mode) noexcept;
DecodeMode parse_decode_mode(std::string_view name);

struct PredictionOptions {
  std::size_t max_steps = 100;  // generated events per trace, >= 1
  bool stop_on_eoc = true;
  DecodeMode mode = DecodeMode::argmax;
  double temperature = 1.0;  // > 0, sampling only
  std::uint64_t seed = 0;
  bool skip_unknown = false;
};

/// Throws a range error for max_steps = 0, or a non-positive temperature in
/// sample mode.
void validate(const PredictionOptions& options);

struct GeneratedEvent {
  Event event;
  std::vector<RawPrediction> raw;  // per target
  bool is_eoc = false;
};

enum class StopReason { eoc, max_steps };

std::string_view to_string(StopReason reason) noexcept;

struct TraceSuffix {
  std::vector<GeneratedEvent> events;  // a terminating EOC is not included
  StopReason stopped = StopReason::max_steps;
};

/// First categorical target; it decides end of case.
std::optional<std::size_t> primary_target(const EncodingSchema& schema);

/// Continues each prefix trace. `sample_ids[i]` seeds the sampling stream of
/// trace i so results do not depend on grouping. Prefixes run in lock-step
/// groups of at most the model's batch size.
std::vector<TraceSuffix> predict_traces(const FrozenModel& model, std::span<const Trace> prefixes,
                                        std::span<const std::uint64_t> sample_ids,
                                        const PredictionOptions& options);

struct PredictionResult {
  EventLog log;                       // prefixes followed by their suffixes
  std::vector<std::size_t> positions; // input position of each output trace
  std::vector<TraceSuffix> suffixes;
  FilterReport skipped;               // traces dropped by skip_unknown
};

PredictionResult predict_suffixes(const FrozenModel& model, const EventLog& prefixes,
                                  const PredictionOptions& options);

}  // namespace xespred
