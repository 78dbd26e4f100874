#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xespred/frozen.hpp"
#include "xespred/xes.hpp"

namespace xespred {

/// Unit-cost insert/delete/substitute distance, two-row dynamic program.
template <typename T>
std::size_t levenshtein(std::span<const T> a, std::span<const T> b) {
  std::vector<std::size_t> prev(b.size() + 1);
  std::vector<std::size_t> curr(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    curr[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      curr[j] = std::min({prev[j] + 1, curr[j - 1] + 1, sub});
    }
    std::swap(prev, curr);
  }
  return prev[b.size()];
}

inline std::size_t levenshtein(std::string_view a, std::string_view b) {
  return levenshtein<char>(std::span<const char>(a.data(), a.size()),
                           std::span<const char>(b.data(), b.size()));
}

/// 1 - d / max(|a|, |b|); two empty sequences score 1.
template <typename T>
double suffix_similarity(std::span<const T> predicted, std::span<const T> target) {
  const std::size_t longest = std::max(predicted.size(), target.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(levenshtein(predicted, target)) / static_cast<double>(longest);
}

inline double suffix_similarity(std::string_view a, std::string_view b) {
  return suffix_similarity<char>(std::span<const char>(a.data(), a.size()),
                                 std::span<const char>(b.data(), b.size()));
}

struct TargetMetric {
  std::string key;
  bool categorical = false;
  double accuracy = 0.0;  // NaN for numeric targets
  double loss = 0.0;      // cross-entropy or the target's regression loss
};

/// One teacher-forced argmax decision.
struct ArgmaxRecord {
  std::size_t position = 0;
  std::size_t target = 0;
  std::int32_t predicted = 0;
  std::int32_t truth = 0;
};

/// Teacher-forced single-lane pass over the encoded stream of `log`. EOC
/// positions count for categorical targets. Fills `dump` when non-null.
std::vector<TargetMetric> next_event_accuracy(const FrozenModel& model, const EventLog& log,
                                              std::vector<ArgmaxRecord>* dump = nullptr);

struct TraceEval {
  std::string trace_id;
  std::size_t prefix_length = 0;
  std::vector<std::int32_t> predicted;  // primary target ids, EOC excluded
  std::vector<std::int32_t> truth;
  std::size_t edit_distance = 0;
  double similarity = 0.0;
};

struct EvalReport {
  std::size_t fold = 0;
  std::string primary_key;
  std::vector<TargetMetric> targets;
  std::vector<TraceEval> traces;
  std::size_t skipped = 0;  // traces too short to split
  double mean_edit_distance = 0.0;
  double mean_similarity = 0.0;
  double median_similarity = 0.0;
};

struct EvalOptions {
  std::size_t fold = 0;
  std::size_t max_steps = 0;  // 0 = 2 * trace length + 1
};

/// Prefix length used for suffix evaluation: half the trace, at least 1.
std::size_t evaluation_prefix_length(std::size_t trace_length);

EvalReport evaluate_report(const FrozenModel& model, const EventLog& log,
                           const EvalOptions& options = {});

/// Evaluates every `fold<j>/model.xtfp` against `fold<j>/eval.xes` under `dir`.
std::vector<EvalReport> evaluate_folds(const std::string& dir);

inline constexpr std::string_view kReportHeader =
    "fold,trace_id,target,accuracy,loss,edit_distance,similarity,skipped";

/// One row per evaluated trace plus one aggregate row (trace_id "*") per report.
std::string format_report_csv(std::span<const EvalReport> reports);
void write_report_csv(std::span<const EvalReport> reports, const std::string& path);

}  // namespace xespred
