#include "xespred/encoding.hpp"

#include <algorithm>
#include <cmath>

#include "xespred/error.hpp"

namespace xespred {

// ---------------------------------------------------------------------------
// Vocabulary / NormStats / TimeScale

Vocabulary::Vocabulary(std::vector<std::string> values) {
  for (const auto& v : values) add(v);
}

std::int32_t Vocabulary::add(const std::string& value) {
  if (const auto it = index_.find(value); it != index_.end()) return it->second;
  const auto id = static_cast<std::int32_t>(values_.size());
  values_.push_back(value);
  index_.emplace(value, id);
  return id;
}

std::optional<std::int32_t> Vocabulary::lookup(std::string_view value) const {
  if (const auto it = index_.find(std::string(value)); it != index_.end()) return it->second;
  return std::nullopt;
}

const std::string& Vocabulary::value(std::int32_t id) const {
  static const std::string eoc(kEocToken);
  if (id == eoc_id()) return eoc;
  if (id < 0 || id > eoc_id()) {
    throw Error(ErrorKind::range, "category id " + std::to_string(id) + " outside [0, " +
                                      std::to_string(size_with_eoc()) + ")");
  }
  return values_[static_cast<std::size_t>(id)];
}

NormStats NormStats::from_samples(const std::vector<double>& samples) {
  NormStats s;
  if (samples.empty()) return s;
  double sum = 0.0;
  for (const double x : samples) sum += x;
  s.mean = sum / static_cast<double>(samples.size());
  double sq = 0.0;
  for (const double x : samples) sq += (x - s.mean) * (x - s.mean);
  s.sd = std::sqrt(sq / static_cast<double>(samples.size()));
  return s;
}

std::string_view to_string(TimeScaleKind kind) noexcept {
  switch (kind) {
    case TimeScaleKind::standardize: return "standardize";
    case TimeScaleKind::seconds: return "seconds";
    case TimeScaleKind::minutes: return "minutes";
    case TimeScaleKind::hours: return "hours";
    case TimeScaleKind::days: return "days";
  }
  return "unknown";
}

TimeScaleKind parse_time_scale(std::string_view name) {
  if (name == "standardize") return TimeScaleKind::standardize;
  if (name == "seconds") return TimeScaleKind::seconds;
  if (name == "minutes") return TimeScaleKind::minutes;
  if (name == "hours") return TimeScaleKind::hours;
  if (name == "days") return TimeScaleKind::days;
  throw Error(ErrorKind::config, "unknown time scale \"" + std::string(name) + "\"");
}

double TimeScale::divisor() const noexcept {
  switch (kind) {
    case TimeScaleKind::minutes: return 60.0;
    case TimeScaleKind::hours: return 3600.0;
    case TimeScaleKind::days: return 86400.0;
    case TimeScaleKind::seconds:
    case TimeScaleKind::standardize: return 1.0;
  }
  return 1.0;
}

double TimeScale::encode_seconds(double seconds) const noexcept {
  if (kind == TimeScaleKind::standardize) return stats.standardize(seconds);
  return seconds / divisor();
}

double TimeScale::decode_seconds(double value) const noexcept {
  if (kind == TimeScaleKind::standardize) return stats.destandardize(value);
  return value * divisor();
}

namespace {

double raw_delta_seconds(std::optional<Timestamp> prev, Timestamp curr,
                         std::string_view trace_name) {
  if (!prev) return 0.0;
  if (curr < *prev) {
    throw Error(ErrorKind::monotonicity,
                "decreasing timestamp in trace " +
                    (trace_name.empty() ? std::string("<unnamed>") : std::string(trace_name)) +
                    ": " + format_timestamp(curr) + " after " + format_timestamp(*prev));
  }
  return static_cast<double>(curr.millis - prev->millis) / 1000.0;
}

}  // namespace

double time_delta(std::optional<Timestamp> prev, Timestamp curr, const TimeScale& scale,
                  std::string_view trace_name) {
  return scale.encode_seconds(raw_delta_seconds(prev, curr, trace_name));
}

Timestamp reconstruct_timestamp(Timestamp prior, double encoded, const TimeScale& scale) {
  const double seconds = scale.decode_seconds(encoded);
  return Timestamp{prior.millis + std::llround(seconds * 1000.0)};
}

std::string_view to_string(FeatureKind kind) noexcept {
  switch (kind) {
    case FeatureKind::categorical: return "categorical";
    case FeatureKind::numeric: return "numeric";
    case FeatureKind::datetime_delta: return "datetime_delta";
  }
  return "unknown";
}

std::string_view to_string(FeatureSource source) noexcept {
  switch (source) {
    case FeatureSource::event_attribute: return "event";
    case FeatureSource::trace_attribute: return "trace";
    case FeatureSource::classifier: return "classifier";
  }
  return "unknown";
}

const FeatureSpec* EncodingSchema::find(std::string_view key) const {
  for (const auto& f : features) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

std::optional<std::size_t> EncodingSchema::target_index(std::string_view key) const {
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (features[targets[i]].key == key) return i;
  }
  return std::nullopt;
}

std::size_t default_embedding_dim(std::size_t categories_with_eoc) {
  std::size_t k = 0;
  while (k * k < categories_with_eoc) ++k;
  return std::max<std::size_t>(k, 1);
}

// ---------------------------------------------------------------------------
// Raw attribute access

namespace {

const AttributeValue& require_attribute(const AttributeMap& attrs, const std::string& key,
                                        std::string_view trace_name) {
  const AttributeValue* v = attrs.find(key);
  if (v == nullptr) {
    throw Error(ErrorKind::incomplete_event,
                "attribute \"" + key + "\" missing in trace " + std::string(trace_name));
  }
  return *v;
}

AttributeValue raw_value(const FeatureSpec& spec, const Trace& trace, std::size_t event_index,
                         std::string_view trace_name) {
  switch (spec.source) {
    case FeatureSource::trace_attribute:
      return require_attribute(trace.attributes, spec.key, trace_name);
    case FeatureSource::classifier:
      return join_classifier(trace.events[event_index], Classifier{spec.key, spec.classifier_keys});
    case FeatureSource::event_attribute:
      break;
  }
  return require_attribute(trace.events[event_index].attributes, spec.key, trace_name);
}

std::string categorical_text(const AttributeValue& v, const std::string& key) {
  switch (type_of(v)) {
    case AttributeType::text:
    case AttributeType::integer:
    case AttributeType::real:
    case AttributeType::boolean: return display(v);
    default: break;
  }
  throw Error(ErrorKind::unsupported, "attribute \"" + key + "\" of type " +
                                          std::string(to_string(type_of(v))) +
                                          " cannot be encoded as categorical");
}

double numeric_value(const AttributeValue& v, const std::string& key) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<double>(&v)) return *d;
  throw Error(ErrorKind::unsupported, "attribute \"" + key + "\" of type " +
                                          std::string(to_string(type_of(v))) + " is not numeric");
}

Timestamp timestamp_value(const AttributeValue& v, const std::string& key) {
  if (const auto* t = std::get_if<Timestamp>(&v)) return *t;
  throw Error(ErrorKind::unsupported, "attribute \"" + key + "\" is not a date");
}

double raw_delta_for(const FeatureSpec& spec, const Trace& trace, std::size_t event_index,
                     std::string_view trace_name) {
  const Timestamp curr = timestamp_value(
      require_attribute(trace.events[event_index].attributes, spec.key, trace_name), spec.key);
  std::optional<Timestamp> prev;
  if (event_index > 0) {
    prev = timestamp_value(
        require_attribute(trace.events[event_index - 1].attributes, spec.key, trace_name),
        spec.key);
  }
  return raw_delta_seconds(prev, curr, trace_name);
}

FeatureSpec resolve_feature(const EventLog& log, const std::string& name,
                            const SchemaConfig& config) {
  FeatureSpec spec;
  spec.key = name;
  const bool force_categorical = std::find(config.categorical.begin(), config.categorical.end(),
                                           name) != config.categorical.end();
  if (const auto* decl = log.global_event_attrs.find(name)) {
    spec.source = FeatureSource::event_attribute;
    spec.value_type = type_of(*decl);
  } else if (const auto* tdecl = log.global_trace_attrs.find(name)) {
    spec.source = FeatureSource::trace_attribute;
    spec.value_type = type_of(*tdecl);
    if (spec.value_type == AttributeType::timestamp) {
      throw Error(ErrorKind::unsupported,
                  "trace-level date attribute \"" + name + "\" cannot be encoded");
    }
  } else if (const auto* classifier = log.find_classifier(name)) {
    spec.source = FeatureSource::classifier;
    spec.classifier_keys = classifier->keys;
    bool any_text = false;
    bool any_numeric = false;
    for (const auto& key : classifier->keys) {
      const auto* kdecl = log.global_event_attrs.find(key);
      const AttributeType t = kdecl ? type_of(*kdecl) : AttributeType::opaque;
      if (t == AttributeType::text) {
        any_text = true;
      } else if (is_numeric(t)) {
        any_numeric = true;
      } else {
        throw Error(ErrorKind::unsupported,
                    "classifier \"" + name + "\" key \"" + key + "\" is neither string nor numeric");
      }
    }
    if (any_text && any_numeric) {
      throw Error(ErrorKind::unsupported,
                  "classifier \"" + name + "\" mixes string and numeric keys");
    }
    spec.value_type = any_text ? AttributeType::text : AttributeType::real;
  } else {
    throw Error(ErrorKind::schema, "\"" + name +
                                       "\" is neither a declared attribute nor a classifier");
  }

  switch (spec.value_type) {
    case AttributeType::text:
    case AttributeType::boolean: spec.kind = FeatureKind::categorical; break;
    case AttributeType::integer:
    case AttributeType::real:
      spec.kind = force_categorical ? FeatureKind::categorical : FeatureKind::numeric;
      break;
    case AttributeType::timestamp:
      if (force_categorical) {
        throw Error(ErrorKind::schema, "date attribute \"" + name + "\" cannot be categorical");
      }
      spec.kind = FeatureKind::datetime_delta;
      spec.time.kind = config.time_scale;
      break;
    case AttributeType::opaque:
      throw Error(ErrorKind::unsupported, "attribute \"" + name + "\" has an opaque type");
  }
  return spec;
}

}  // namespace

EncodingSchema build_schema(const EventLog& log, const SchemaConfig& config) {
  if (config.predictors.empty()) throw Error(ErrorKind::config, "no predictor attributes selected");
  if (config.targets.empty()) throw Error(ErrorKind::config, "no target attributes selected");

  EncodingSchema schema;
  auto ensure = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < schema.features.size(); ++i) {
      if (schema.features[i].key == name) return i;
    }
    schema.features.push_back(resolve_feature(log, name, config));
    return schema.features.size() - 1;
  };
  for (const auto& name : config.predictors) {
    const std::size_t i = ensure(name);
    if (schema.features[i].predictor) {
      throw Error(ErrorKind::config, "predictor \"" + name + "\" selected twice");
    }
    schema.features[i].predictor = true;
    schema.predictors.push_back(i);
  }
  for (const auto& name : config.targets) {
    const std::size_t i = ensure(name);
    FeatureSpec& f = schema.features[i];
    if (f.source == FeatureSource::trace_attribute) {
      throw Error(ErrorKind::config, "trace attribute \"" + name + "\" cannot be a target");
    }
    if (f.target) throw Error(ErrorKind::config, "target \"" + name + "\" selected twice");
    f.target = true;
    schema.targets.push_back(i);
  }
  for (const auto& [key, dim] : config.embedding_dims) {
    if (schema.find(key) == nullptr) {
      throw Error(ErrorKind::config, "embedding dimension given for unselected attribute \"" +
                                         key + "\"");
    }
    if (dim == 0) throw Error(ErrorKind::config, "embedding dimension for \"" + key + "\" is 0");
  }

  for (auto& spec : schema.features) {
    std::vector<double> samples;
    for (std::size_t t = 0; t < log.traces.size(); ++t) {
      const Trace& trace = log.traces[t];
      const std::string name = trace_id(trace, t);
      for (std::size_t e = 0; e < trace.events.size(); ++e) {
        switch (spec.kind) {
          case FeatureKind::categorical: {
            const AttributeValue v = raw_value(spec, trace, e, name);
            const std::string text = categorical_text(v, spec.key);
            const bool is_new = !spec.vocab.lookup(text).has_value();
            spec.vocab.add(text);
            if (is_new && spec.source == FeatureSource::classifier) {
              std::vector<std::string> parts;
              for (const auto& key : spec.classifier_keys) {
                parts.push_back(std::get<std::string>(
                    require_attribute(trace.events[e].attributes, key, name)));
              }
              spec.components.push_back(std::move(parts));
            }
            break;
          }
          case FeatureKind::numeric:
            samples.push_back(numeric_value(raw_value(spec, trace, e, name), spec.key));
            break;
          case FeatureKind::datetime_delta:
            samples.push_back(raw_delta_for(spec, trace, e, name));
            break;
        }
      }
    }
    if (spec.kind == FeatureKind::numeric) spec.norm = NormStats::from_samples(samples);
    if (spec.kind == FeatureKind::datetime_delta) {
      spec.time.stats = NormStats::from_samples(samples);
    }
    if (spec.kind == FeatureKind::categorical && spec.predictor) {
      const auto it = config.embedding_dims.find(spec.key);
      spec.embedding_dim = it != config.embedding_dims.end()
                               ? it->second
                               : default_embedding_dim(spec.vocab.size_with_eoc());
    }
  }
  return schema;
}

FeatureValue encode_feature(const FeatureSpec& spec, const Trace& trace,
                            std::size_t event_index, std::string_view trace_name) {
  FeatureValue out;
  switch (spec.kind) {
    case FeatureKind::categorical: {
      const std::string text =
          categorical_text(raw_value(spec, trace, event_index, trace_name), spec.key);
      const auto id = spec.vocab.lookup(text);
      if (!id) {
        throw Error(ErrorKind::unknown_value, "attribute \"" + spec.key + "\": unseen value \"" +
                                                  text + "\" in trace " + std::string(trace_name));
      }
      out.id = *id;
      break;
    }
    case FeatureKind::numeric:
      out.value =
          spec.norm.standardize(numeric_value(raw_value(spec, trace, event_index, trace_name), spec.key));
      break;
    case FeatureKind::datetime_delta:
      out.value = spec.time.encode_seconds(raw_delta_for(spec, trace, event_index, trace_name));
      break;
  }
  return out;
}

std::vector<FeatureValue> encode_event(const EncodingSchema& schema, const Trace& trace,
                                       std::size_t event_index, std::string_view trace_name) {
  std::vector<FeatureValue> out;
  out.reserve(schema.predictors.size());
  for (std::size_t p = 0; p < schema.predictors.size(); ++p) {
    out.push_back(encode_feature(schema.predictor(p), trace, event_index, trace_name));
  }
  return out;
}

FeatureValue eoc_feature(const FeatureSpec& spec) {
  FeatureValue v;
  if (spec.kind == FeatureKind::categorical) v.id = spec.vocab.eoc_id();
  return v;
}

std::vector<FeatureValue> eoc_event(const EncodingSchema& schema) {
  std::vector<FeatureValue> out;
  for (std::size_t p = 0; p < schema.predictors.size(); ++p) {
    out.push_back(eoc_feature(schema.predictor(p)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Streams and batches

EncodedStream encode_stream(const EventLog& log, const EncodingSchema& schema) {
  const std::size_t total = log.event_count() + log.traces.size();
  std::vector<std::vector<FeatureValue>> columns(schema.features.size());
  for (auto& c : columns) c.reserve(total);
  std::vector<bool> is_eoc;
  is_eoc.reserve(total);

  for (std::size_t t = 0; t < log.traces.size(); ++t) {
    const Trace& trace = log.traces[t];
    const std::string name = trace_id(trace, t);
    for (std::size_t e = 0; e < trace.events.size(); ++e) {
      for (std::size_t f = 0; f < schema.features.size(); ++f) {
        columns[f].push_back(encode_feature(schema.features[f], trace, e, name));
      }
      is_eoc.push_back(false);
    }
    for (std::size_t f = 0; f < schema.features.size(); ++f) {
      columns[f].push_back(eoc_feature(schema.features[f]));
    }
    is_eoc.push_back(true);
  }

  EncodedStream stream;
  stream.length = total > 0 ? total - 1 : 0;
  const std::size_t n = stream.length;
  auto make_column = [&](std::size_t feature, std::size_t offset) {
    FeatureColumn col;
    col.categorical = schema.features[feature].kind == FeatureKind::categorical;
    for (std::size_t i = 0; i < n; ++i) {
      const FeatureValue& v = columns[feature][i + offset];
      if (col.categorical) {
        col.ids.push_back(v.id);
      } else {
        col.values.push_back(v.value);
      }
    }
    return col;
  };
  for (const std::size_t f : schema.predictors) stream.inputs.push_back(make_column(f, 0));
  for (const std::size_t f : schema.targets) {
    stream.targets.push_back(make_column(f, 1));
    std::vector<double> mask(n, 1.0);
    if (schema.features[f].kind != FeatureKind::categorical) {
      for (std::size_t i = 0; i < n; ++i) {
        if (is_eoc[i + 1]) mask[i] = 0.0;
      }
    }
    stream.masks.push_back(std::move(mask));
  }
  stream.input_is_eoc.assign(is_eoc.begin(), is_eoc.begin() + static_cast<std::ptrdiff_t>(n));
  return stream;
}

std::vector<Batch> make_batches(const EncodedStream& stream, std::size_t lanes,
                                std::size_t steps) {
  if (lanes == 0 || steps == 0) {
    throw Error(ErrorKind::config, "batch size and unrolled steps must be at least 1");
  }
  if (stream.length < lanes * steps) {
    throw Error(ErrorKind::insufficient_data,
                "stream of " + std::to_string(stream.length) + " positions is shorter than " +
                    std::to_string(lanes) + " lanes x " + std::to_string(steps) + " steps");
  }
  const std::size_t lane_length = stream.length / lanes;
  const std::size_t windows = lane_length / steps;

  auto block = [&](const FeatureColumn& col, std::size_t window) {
    FeatureBlock b;
    b.categorical = col.categorical;
    if (col.categorical) {
      b.ids = IndexMatrix(lanes, steps);
    } else {
      b.values = Matrix(lanes, steps);
    }
    for (std::size_t r = 0; r < lanes; ++r) {
      for (std::size_t s = 0; s < steps; ++s) {
        const std::size_t pos = r * lane_length + window * steps + s;
        if (col.categorical) {
          b.ids(r, s) = col.ids[pos];
        } else {
          b.values(r, s) = col.values[pos];
        }
      }
    }
    return b;
  };

  std::vector<Batch> batches;
  batches.reserve(windows);
  for (std::size_t w = 0; w < windows; ++w) {
    Batch batch;
    batch.lanes = lanes;
    batch.steps = steps;
    batch.window = w;
    batch.lane_length = lane_length;
    for (const auto& col : stream.inputs) batch.inputs.push_back(block(col, w));
    for (std::size_t t = 0; t < stream.targets.size(); ++t) {
      batch.targets.push_back(block(stream.targets[t], w));
      Matrix mask(lanes, steps);
      for (std::size_t r = 0; r < lanes; ++r) {
        for (std::size_t s = 0; s < steps; ++s) {
          mask(r, s) = stream.masks[t][r * lane_length + w * steps + s];
        }
      }
      batch.masks.push_back(std::move(mask));
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

AttributeValue decode_prediction(const EncodingSchema& schema, std::string_view key,
                                 RawPrediction raw, std::optional<Timestamp> prior) {
  const FeatureSpec* spec = schema.find(key);
  if (spec == nullptr) {
    throw Error(ErrorKind::schema, "unknown attribute \"" + std::string(key) + "\"");
  }
  switch (spec->kind) {
    case FeatureKind::categorical: {
      if (raw.id < 0 || static_cast<std::size_t>(raw.id) >= spec->vocab.size_with_eoc()) {
        throw Error(ErrorKind::range, "attribute \"" + spec->key + "\": id " +
                                          std::to_string(raw.id) + " outside [0, " +
                                          std::to_string(spec->vocab.size_with_eoc()) + ")");
      }
      const std::string& text = spec->vocab.value(raw.id);
      if (raw.id != spec->vocab.eoc_id()) {
        if (spec->value_type == AttributeType::boolean) return text == "true";
        if (spec->value_type == AttributeType::integer) return std::int64_t{std::stoll(text)};
        if (spec->value_type == AttributeType::real) return std::stod(text);
      }
      return text;
    }
    case FeatureKind::numeric: {
      const double v = spec->norm.destandardize(raw.value);
      if (spec->value_type == AttributeType::integer) return std::int64_t{std::llround(v)};
      return v;
    }
    case FeatureKind::datetime_delta: {
      if (!prior) {
        throw Error(ErrorKind::incomplete_event,
                    "attribute \"" + spec->key + "\": no prior timestamp to add the delta to");
      }
      const double v = spec->time.kind == TimeScaleKind::standardize
                           ? raw.value
                           : std::max(raw.value, 0.0);
      Timestamp ts = reconstruct_timestamp(*prior, v, spec->time);
      if (ts < *prior) ts = *prior;
      return ts;
    }
  }
  return {};
}

}  // namespace xespred
