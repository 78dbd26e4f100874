#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "xespred/matrix.hpp"
#include "xespred/xes.hpp"

namespace xespred {

/// Label of the reserved end-of-case category.
inline constexpr std::string_view kEocToken = "\xC2\xAB" "EOC" "\xC2\xBB";  // «EOC»

/// Distinct categorical values in first-appearance order. Id `size()` is
/// reserved for the end-of-case marker.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> values);

  /// Returns the id of `value`, appending it when new.
  std::int32_t add(const std::string& value);
  std::optional<std::int32_t> lookup(std::string_view value) const;
  /// Text for an id; the EOC id maps to kEocToken.
  const std::string& value(std::int32_t id) const;

  const std::vector<std::string>& values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::int32_t eoc_id() const noexcept { return static_cast<std::int32_t>(values_.size()); }
  std::size_t size_with_eoc() const noexcept { return values_.size() + 1; }

  bool operator==(const Vocabulary& other) const { return values_ == other.values_; }

 private:
  std::vector<std::string> values_;
  std::unordered_map<std::string, std::int32_t> index_;
};

/// Population mean and standard deviation.
struct NormStats {
  double mean = 0.0;
  double sd = 0.0;

  static NormStats from_samples(const std::vector<double>& samples);
  double standardize(double x) const noexcept { return sd > 0 ? (x - mean) / sd : 0.0; }
  double destandardize(double z) const noexcept { return z * sd + mean; }

  bool operator==(const NormStats&) const = default;
};

enum class TimeScaleKind { standardize, seconds, minutes, hours, days };

std::string_view to_string(TimeScaleKind kind) noexcept;
TimeScaleKind parse_time_scale(std::string_view name);

struct TimeScale {
  TimeScaleKind kind = TimeScaleKind::hours;
  NormStats stats;  // used by `standardize` only

  /// 1, 60, 3600, 86400 seconds; 1 for `standardize`.
  double divisor() const noexcept;
  double encode_seconds(double seconds) const noexcept;
  double decode_seconds(double value) const noexcept;

  bool operator==(const TimeScale&) const = default;
};

/// Encoded delta between two instants; 0.0 without a predecessor.
double time_delta(std::optional<Timestamp> prev, Timestamp curr, const TimeScale& scale,
                  std::string_view trace_name = {});

/// Inverse of `time_delta`, rounded to the millisecond.
Timestamp reconstruct_timestamp(Timestamp prior, double encoded, const TimeScale& scale);

enum class FeatureKind { categorical, numeric, datetime_delta };
enum class FeatureSource { event_attribute, trace_attribute, classifier };

std::string_view to_string(FeatureKind kind) noexcept;
std::string_view to_string(FeatureSource source) noexcept;

struct FeatureSpec {
  std::string key;
  FeatureSource source = FeatureSource::event_attribute;
  FeatureKind kind = FeatureKind::categorical;
  AttributeType value_type = AttributeType::text;
  /// Classifier keys; for categorical classifiers `components[id]` holds the
  /// per-key values behind vocabulary entry `id`.
  std::vector<std::string> classifier_keys;
  std::vector<std::vector<std::string>> components;
  Vocabulary vocab;
  NormStats norm;
  TimeScale time;
  std::size_t embedding_dim = 0;  // categorical predictors only
  bool predictor = false;
  bool target = false;

  bool operator==(const FeatureSpec&) const = default;
};

struct EncodingSchema {
  std::vector<FeatureSpec> features;
  std::vector<std::size_t> predictors;  // indices into `features`
  std::vector<std::size_t> targets;

  const FeatureSpec& predictor(std::size_t i) const { return features[predictors[i]]; }
  const FeatureSpec& target(std::size_t i) const { return features[targets[i]]; }
  const FeatureSpec* find(std::string_view key) const;
  /// Position of `key` in the target list.
  std::optional<std::size_t> target_index(std::string_view key) const;

  bool operator==(const EncodingSchema&) const = default;
};

struct SchemaConfig {
  std::vector<std::string> predictors;
  std::vector<std::string> targets;
  /// Keys forced to categorical encoding (e.g. integer codes).
  std::vector<std::string> categorical;
  TimeScaleKind time_scale = TimeScaleKind::hours;
  std::map<std::string, std::size_t> embedding_dims;

  bool operator==(const SchemaConfig&) const = default;
};

/// ceil(sqrt(categories)).
std::size_t default_embedding_dim(std::size_t categories_with_eoc);

EncodingSchema build_schema(const EventLog& log, const SchemaConfig& config);

/// One encoded feature value: `id` for categorical features, `value` otherwise.
struct FeatureValue {
  std::int32_t id = 0;
  double value = 0.0;

  bool operator==(const FeatureValue&) const = default;
};

/// Encodes feature `spec` for event `event_index` of `trace`.
FeatureValue encode_feature(const FeatureSpec& spec, const Trace& trace,
                            std::size_t event_index, std::string_view trace_name = {});

/// Predictor values for one event, in schema predictor order.
std::vector<FeatureValue> encode_event(const EncodingSchema& schema, const Trace& trace,
                                       std::size_t event_index,
                                       std::string_view trace_name = {});

/// Feature value of the end-of-case marker: eoc id or 0.0.
FeatureValue eoc_feature(const FeatureSpec& spec);
std::vector<FeatureValue> eoc_event(const EncodingSchema& schema);

struct FeatureColumn {
  bool categorical = false;
  std::vector<std::int32_t> ids;
  std::vector<double> values;

  std::size_t size() const noexcept { return categorical ? ids.size() : values.size(); }
  bool operator==(const FeatureColumn&) const = default;
};

/// Traces concatenated in log order, each followed by one EOC marker. Input
/// position t comes from stream event t, target position t from event t+1.
struct EncodedStream {
  std::size_t length = 0;  // N = events + traces - 1
  std::vector<FeatureColumn> inputs;       // per predictor
  std::vector<FeatureColumn> targets;      // per target
  std::vector<std::vector<double>> masks;  // per target; 0 where the next event is EOC
  std::vector<bool> input_is_eoc;          // per position

  bool operator==(const EncodedStream&) const = default;
};

EncodedStream encode_stream(const EventLog& log, const EncodingSchema& schema);

struct FeatureBlock {
  bool categorical = false;
  IndexMatrix ids;  // lanes x steps
  Matrix values;    // lanes x steps

  bool operator==(const FeatureBlock&) const = default;
};

struct Batch {
  std::size_t lanes = 0;
  std::size_t steps = 0;
  std::size_t window = 0;       // index of this window within each lane
  std::size_t lane_length = 0;  // stream length / lanes, including dropped tail
  std::vector<FeatureBlock> inputs;
  std::vector<FeatureBlock> targets;
  std::vector<Matrix> masks;

  /// Stream position behind (lane, step).
  std::size_t stream_position(std::size_t lane, std::size_t step) const noexcept {
    return lane * lane_length + window * steps + step;
  }
};

std::vector<Batch> make_batches(const EncodedStream& stream, std::size_t lanes,
                                std::size_t steps);

/// Raw model output for one target: a category id or a real value.
struct RawPrediction {
  std::int32_t id = 0;
  double value = 0.0;
};

/// Maps a model output back to an attribute value. Datetime deltas are added
/// to `prior` (negative deltas are clamped to zero).
AttributeValue decode_prediction(const EncodingSchema& schema, std::string_view key,
                                 RawPrediction raw,
                                 std::optional<Timestamp> prior = std::nullopt);

}  // namespace xespred
