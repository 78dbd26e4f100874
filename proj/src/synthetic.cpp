#include "xespred/synthetic.hpp"

#include <algorithm>
#include <numeric>

#include "xespred/error.hpp"
#include "xespred/rng.hpp"

namespace xespred {

namespace {

constexpr std::size_t kMaxVariants = 720;  // 6! orderings of the middle block
constexpr std::int64_t kStartMillis = 1704096000000;  // 2024-01-01T08:00:00Z
constexpr std::int64_t kMinute = 60'000;

std::size_t middle_count(std::size_t variants) {
  std::size_t n = 2;
  std::size_t perms = 2;
  while (perms < variants) {
    ++n;
    perms *= n;
  }
  return n;
}

}  // namespace

std::vector<std::string> synthetic_variant(std::size_t variants, std::size_t v) {
  if (variants == 0 || variants > kMaxVariants) {
    throw Error(ErrorKind::range, "variants must be between 1 and " + std::to_string(kMaxVariants));
  }
  if (v >= variants) throw Error(ErrorKind::range, "variant index out of range");
  const std::size_t n = middle_count(variants);
  std::vector<char> middle(n);
  std::iota(middle.begin(), middle.end(), 'B');
  for (std::size_t i = 0; i < v; ++i) std::next_permutation(middle.begin(), middle.end());
  std::vector<std::string> out{"A"};
  for (const char c : middle) out.emplace_back(1, c);
  out.emplace_back(1, static_cast<char>('B' + n));
  return out;
}

EventLog generate_synthetic_log(const SyntheticSpec& spec) {
  if (spec.traces_per_variant == 0) throw Error(ErrorKind::range, "traces must be at least 1");
  if (!(spec.noise >= 0.0 && spec.noise <= 1.0)) {
    throw Error(ErrorKind::range, "noise must lie in [0, 1]");
  }
  std::vector<std::vector<std::string>> variants;
  for (std::size_t v = 0; v < spec.variants; ++v) {
    variants.push_back(synthetic_variant(spec.variants, v));
  }
  const std::size_t alphabet = variants.front().size();

  EventLog log;
  log.log_xml_attributes = {{"xes.version", "1.0"}, {"xes.features", "nested-attributes"}};
  log.extensions = {
      {"Concept", "concept", "http://www.xes-standard.org/concept.xesext"},
      {"Time", "time", "http://www.xes-standard.org/time.xesext"},
      {"Organizational", "org", "http://www.xes-standard.org/org.xesext"},
      {"Lifecycle", "lifecycle", "http://www.xes-standard.org/lifecycle.xesext"},
  };
  log.global_trace_attrs.set("concept:name", std::string("__INVALID__"));
  log.global_event_attrs.set("concept:name", std::string("__INVALID__"));
  log.global_event_attrs.set("time:timestamp", Timestamp{0});
  log.global_event_attrs.set("org:resource", std::string("UNKNOWN"));
  log.global_event_attrs.set("lifecycle:transition", std::string("complete"));
  log.global_event_attrs.set("cost", std::int64_t{0});
  log.classifiers = {{"Activity", {"concept:name"}},
                     {"Activity and Resource", {"concept:name", "org:resource"}}};
  log.attributes.set("concept:name", std::string("synthetic process"));
  log.source_name = "synthetic";

  std::vector<std::size_t> labels;
  for (std::size_t v = 0; v < spec.variants; ++v) {
    labels.insert(labels.end(), spec.traces_per_variant, v);
  }
  Xoshiro256 rng(spec.seed);
  for (std::size_t i = labels.size(); i-- > 1;) {
    std::swap(labels[i], labels[static_cast<std::size_t>(rng.below(i + 1))]);
  }

  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::size_t v = labels[i];
    Trace trace;
    trace.attributes.set("concept:name", "case_" + std::to_string(i + 1));
    std::int64_t clock = kStartMillis + static_cast<std::int64_t>(i) * 60 * kMinute;
    for (const auto& planned : variants[v]) {
      std::string activity = planned;
      if (spec.noise > 0 && rng.next_unit() < spec.noise) {
        const auto offset = 1 + rng.below(alphabet - 1);
        activity = std::string(1, static_cast<char>('A' + (planned[0] - 'A' + offset) % alphabet));
      }
      const std::int64_t index = activity[0] - 'A';
      Event event;
      event.attributes.set("concept:name", activity);
      event.attributes.set("org:resource", "R" + activity + std::to_string(v + 1));
      event.attributes.set("lifecycle:transition", std::string("complete"));
      event.attributes.set("cost", std::int64_t{10 * (index + 1) + static_cast<std::int64_t>(v)});
      event.attributes.set("time:timestamp", Timestamp{clock});
      trace.events.push_back(std::move(event));
      clock += 10 * (index + 1) * kMinute;
    }
    log.traces.push_back(std::move(trace));
  }
  return log;
}

}  // namespace xespred
