#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace xespred {

/// UTC instant with millisecond precision.
struct Timestamp {
  std::int64_t millis = 0;  // since 1970-01-01T00:00:00Z

  auto operator<=>(const Timestamp&) const = default;
};

/// Parses ISO-8601 (`YYYY-MM-DDTHH:MM:SS[.fff][Z|+HH:MM|+HHMM]`). A missing
/// offset is read as UTC. Fractions beyond milliseconds are truncated.
std::optional<Timestamp> parse_timestamp(std::string_view text);

/// Formats as `YYYY-MM-DDTHH:MM:SS.mmm+00:00`.
std::string format_timestamp(Timestamp ts);

/// Attribute elements outside the encodable subset (list, container, id, or
/// any attribute carrying nested children) are kept verbatim.
struct OpaqueValue {
  std::string xml;

  bool operator==(const OpaqueValue&) const = default;
};

using AttributeValue =
    std::variant<std::string, Timestamp, std::int64_t, double, bool, OpaqueValue>;

enum class AttributeType { text, timestamp, integer, real, boolean, opaque };

AttributeType type_of(const AttributeValue& value) noexcept;
std::string_view to_string(AttributeType type) noexcept;
bool is_numeric(AttributeType type) noexcept;

/// Human-readable rendering used by reports and inspection output.
std::string display(const AttributeValue& value);

/// Insertion-ordered key/value list.
class AttributeMap {
 public:
  using Entry = std::pair<std::string, AttributeValue>;

  const AttributeValue* find(std::string_view key) const;
  bool contains(std::string_view key) const { return find(key) != nullptr; }
  /// Replaces an existing value in place or appends a new entry.
  void set(std::string key, AttributeValue value);
  bool erase(std::string_view key);

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }

  bool operator==(const AttributeMap&) const = default;

 private:
  std::vector<Entry> entries_;
};

struct Event {
  AttributeMap attributes;

  bool operator==(const Event&) const = default;
};

struct Trace {
  AttributeMap attributes;
  std::vector<Event> events;

  bool operator==(const Trace&) const = default;
};

struct Classifier {
  std::string name;
  std::vector<std::string> keys;

  bool operator==(const Classifier&) const = default;
};

struct Extension {
  std::string name;
  std::string prefix;
  std::string uri;

  bool operator==(const Extension&) const = default;
};

struct EventLog {
  /// XML attributes of the `<log>` element, in document order.
  std::vector<std::pair<std::string, std::string>> log_xml_attributes{
      {"xes.version", "1.0"}};
  std::vector<Extension> extensions;
  /// Global declarations; each entry's value is the declared default and
  /// fixes the attribute's type.
  AttributeMap global_trace_attrs;
  AttributeMap global_event_attrs;
  std::vector<Classifier> classifiers;
  AttributeMap attributes;
  std::vector<Trace> traces;
  std::string source_name;

  const Classifier* find_classifier(std::string_view name) const;
  std::size_t event_count() const noexcept;

  /// Structural equality; `source_name` is not part of the structure.
  bool operator==(const EventLog& other) const;
};

/// Identifier used in reports: the trace's `concept:name` text when present,
/// otherwise `#<position>` in the document.
std::string trace_id(const Trace& trace, std::size_t position);

struct FilterReport {
  struct Omission {
    std::string trace_id;
    std::string reason;
  };
  std::vector<Omission> omitted;
  /// Non-fatal findings on retained traces (e.g. decreasing timestamps).
  std::vector<std::string> warnings;
};

struct ParseResult {
  EventLog log;
  FilterReport report;
};

/// Parses an XES document and drops empty or incomplete traces.
ParseResult parse_xes(std::istream& input, std::string source_name = {});
ParseResult parse_xes_file(const std::string& path);

void write_xes(const EventLog& log, std::ostream& output);
void write_xes_file(const EventLog& log, const std::string& path);

/// String keys join with "+" in classifier key order; numeric keys multiply.
AttributeValue join_classifier(const Event& event, const Classifier& classifier);

inline constexpr std::string_view kJoinSeparator = "+";

}  // namespace xespred
