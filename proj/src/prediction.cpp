#include "xespred/prediction.hpp"

#include <cmath>

#include "xespred/error.hpp"
#include "xespred/model.hpp"
#include "xespred/rng.hpp"

namespace xespred {

std::string_view to_string(DecodeMode mode) noexcept {
  return mode == DecodeMode::argmax ? "argmax" : "sample";
}

DecodeMode parse_decode_mode(std::string_view name) {
  if (name == "argmax") return DecodeMode::argmax;
  if (name == "sample") return DecodeMode::sample;
  throw Error(ErrorKind::config, "unknown decoding mode \"" + std::string(name) + "\"");
}

std::string_view to_string(StopReason reason) noexcept {
  return reason == StopReason::eoc ? "eoc" : "max_steps";
}

void validate(const PredictionOptions& options) {
  if (options.max_steps == 0) throw Error(ErrorKind::range, "max_steps must be at least 1");
  if (options.mode == DecodeMode::sample &&
      (!(options.temperature > 0) || !std::isfinite(options.temperature))) {
    throw Error(ErrorKind::range, "temperature must be a positive number");
  }
}

std::optional<std::size_t> primary_target(const EncodingSchema& schema) {
  for (std::size_t t = 0; t < schema.targets.size(); ++t) {
    if (schema.target(t).kind == FeatureKind::categorical) return t;
  }
  return std::nullopt;
}

namespace {

constexpr std::uint64_t kSampleStride = 0x9e3779b97f4a7c15ULL;

std::int32_t sample_category(std::span<const double> logits, double temperature, Xoshiro256& rng) {
  double top = logits[0];
  for (const double v : logits) top = std::max(top, v);
  std::vector<double> weights(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    weights[i] = std::exp((logits[i] - top) / temperature);
    total += weights[i];
  }
  const double u = rng.next_unit() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return static_cast<std::int32_t>(i);
  }
  return static_cast<std::int32_t>(weights.size() - 1);
}

std::optional<Timestamp> last_timestamp(const Trace& trace, const std::string& key) {
  for (auto it = trace.events.rbegin(); it != trace.events.rend(); ++it) {
    if (const auto* v = it->attributes.find(key)) {
      if (const auto* ts = std::get_if<Timestamp>(v)) return *ts;
    }
  }
  return std::nullopt;
}

struct Lane {
  std::size_t trace = 0;
  Trace work;
  std::vector<std::vector<FeatureValue>> prefix_inputs;
  std::size_t fed = 0;
  std::vector<FeatureValue> input;
  Xoshiro256 rng{0};
  TraceSuffix suffix;
  bool done = false;
};

class Generator {
 public:
  Generator(const FrozenModel& model, const PredictionOptions& options)
      : schema_(model.schema), options_(options), primary_(primary_target(schema_)) {}

  // Decodes lane row `r` of `outs` into a new event, appends it and prepares
  // the next input.
  void generate(Lane& lane, const StepOutputs& outs, std::size_t r) {
    const std::size_t n_targets = schema_.targets.size();
    GeneratedEvent g;
    g.raw.resize(n_targets);
    for (std::size_t t = 0; t < n_targets; ++t) {
      const auto& spec = schema_.target(t);
      if (spec.kind == FeatureKind::categorical) {
        const auto logits = outs[t].row(r);
        g.raw[t].id = options_.mode == DecodeMode::argmax
                          ? argmax(logits)
                          : sample_category(logits, options_.temperature, lane.rng);
      } else {
        g.raw[t].value = outs[t](r, 0);
      }
    }
    if (primary_) {
      const auto& spec = schema_.target(*primary_);
      g.is_eoc = g.raw[*primary_].id == spec.vocab.eoc_id();
    }

    if (g.is_eoc) {
      const auto& spec = schema_.target(*primary_);
      const std::string& key =
          spec.source == FeatureSource::classifier ? spec.classifier_keys.front() : spec.key;
      g.event.attributes.set(key, std::string(kEocToken));
    } else {
      for (std::size_t t = 0; t < n_targets; ++t) decode_target(lane, t, g);
    }
    if (g.is_eoc && options_.stop_on_eoc) {
      lane.suffix.stopped = StopReason::eoc;
      lane.done = true;
      return;
    }
    lane.work.events.push_back(g.event);
    lane.suffix.events.push_back(g);

    if (lane.suffix.events.size() >= options_.max_steps) {
      lane.suffix.stopped = StopReason::max_steps;
      lane.done = true;
      return;
    }
    lane.input = g.is_eoc ? eoc_event(schema_) : feedback(lane, g);
  }

 private:
  void decode_target(Lane& lane, std::size_t t, GeneratedEvent& g) const {
    const auto& spec = schema_.target(t);
    auto& attrs = g.event.attributes;
    switch (spec.kind) {
      case FeatureKind::categorical: {
        const auto id = g.raw[t].id;
        if (id == spec.vocab.eoc_id()) return;  // secondary EOC: attribute omitted
        if (spec.source == FeatureSource::classifier) {
          const auto& parts = spec.components.at(static_cast<std::size_t>(id));
          for (std::size_t k = 0; k < spec.classifier_keys.size(); ++k) {
            attrs.set(spec.classifier_keys[k], parts.at(k));
          }
        } else {
          attrs.set(spec.key, decode_prediction(schema_, spec.key, g.raw[t]));
        }
        return;
      }
      case FeatureKind::numeric:
        attrs.set(spec.key, decode_prediction(schema_, spec.key, g.raw[t]));
        return;
      case FeatureKind::datetime_delta: {
        const auto prior = last_timestamp(lane.work, spec.key);
        attrs.set(spec.key, decode_prediction(schema_, spec.key, g.raw[t], prior));
        return;
      }
    }
  }

  std::vector<FeatureValue> feedback(const Lane& lane, const GeneratedEvent& g) const {
    std::vector<FeatureValue> next = lane.input;
    for (std::size_t p = 0; p < schema_.predictors.size(); ++p) {
      const auto& spec = schema_.predictor(p);
      FeatureValue& v = next[p];
      if (!spec.target) {
        if (spec.kind == FeatureKind::datetime_delta) v.value = 0.0;
        continue;  // carried forward
      }
      const std::size_t t = *schema_.target_index(spec.key);
      switch (spec.kind) {
        case FeatureKind::categorical:
          v.id = g.raw[t].id;
          break;
        case FeatureKind::numeric:
          if (spec.source == FeatureSource::classifier) {
            v.value = g.raw[t].value;
          } else {
            const auto& attr = *g.event.attributes.find(spec.key);
            const double x = std::holds_alternative<std::int64_t>(attr)
                                 ? static_cast<double>(std::get<std::int64_t>(attr))
                                 : std::get<double>(attr);
            v.value = spec.norm.standardize(x);
          }
          break;
        case FeatureKind::datetime_delta: {
          const Timestamp curr = std::get<Timestamp>(*g.event.attributes.find(spec.key));
          std::optional<Timestamp> prev;
          for (std::size_t i = lane.work.events.size() - 1; i-- > 0;) {
            if (const auto* a = lane.work.events[i].attributes.find(spec.key)) {
              if (const auto* ts = std::get_if<Timestamp>(a)) {
                prev = *ts;
                break;
              }
            }
          }
          v.value = time_delta(prev, curr, spec.time);
          break;
        }
      }
    }
    return next;
  }

  const EncodingSchema& schema_;
  const PredictionOptions& options_;
  std::optional<std::size_t> primary_;
};

}  // namespace

std::vector<TraceSuffix> predict_traces(const FrozenModel& model, std::span<const Trace> prefixes,
                                        std::span<const std::uint64_t> sample_ids,
                                        const PredictionOptions& options) {
  validate(options);
  if (sample_ids.size() != prefixes.size()) {
    throw Error(ErrorKind::shape, "one sampling id per prefix is required");
  }
  const auto& schema = model.schema;
  const std::size_t width = std::max<std::size_t>(1, model.config.batch_size);
  const std::vector<FeatureValue> idle(schema.predictors.size());
  Generator generator(model, options);
  std::vector<TraceSuffix> out(prefixes.size());

  for (std::size_t start = 0; start < prefixes.size(); start += width) {
    const std::size_t count = std::min(width, prefixes.size() - start);
    std::vector<Lane> lanes(count);
    for (std::size_t i = 0; i < count; ++i) {
      Lane& lane = lanes[i];
      const Trace& trace = prefixes[start + i];
      if (trace.events.empty()) throw Error(ErrorKind::insufficient_data, "empty prefix");
      const std::string name = trace_id(trace, start + i);
      lane.trace = start + i;
      lane.work = trace;
      for (std::size_t e = 0; e < trace.events.size(); ++e) {
        lane.prefix_inputs.push_back(encode_event(schema, trace, e, name));
      }
      lane.input = lane.prefix_inputs.front();
      lane.fed = 0;
      lane.rng = Xoshiro256(options.seed + kSampleStride * sample_ids[start + i]);
    }

    RecurrentState state = zero_state(model.params, width);
    std::vector<std::vector<FeatureValue>> features(width, idle);
    while (true) {
      bool any = false;
      for (std::size_t i = 0; i < width; ++i) {
        const bool active = i < count && !lanes[i].done;
        features[i] = active ? lanes[i].input : idle;
        any = any || active;
      }
      if (!any) break;
      const StepOutputs outs = forward_step(model.params, features, state);
      for (std::size_t i = 0; i < count; ++i) {
        Lane& lane = lanes[i];
        if (lane.done) continue;
        if (lane.fed < lane.prefix_inputs.size()) ++lane.fed;
        if (lane.fed < lane.prefix_inputs.size()) {
          lane.input = lane.prefix_inputs[lane.fed];
          continue;
        }
        generator.generate(lane, outs, i);
      }
    }
    for (std::size_t i = 0; i < count; ++i) out[start + i] = std::move(lanes[i].suffix);
  }
  return out;
}

namespace {

// Keeps only global event declarations every output event satisfies, and
// classifiers whose keys stay declared.
void restrict_declarations(EventLog& log) {
  AttributeMap kept;
  for (const auto& [key, decl] : log.global_event_attrs) {
    bool everywhere = true;
    for (const auto& trace : log.traces) {
      for (const auto& event : trace.events) {
        const auto* v = event.attributes.find(key);
        if (v == nullptr || type_of(*v) != type_of(decl)) everywhere = false;
      }
    }
    if (everywhere) kept.set(key, decl);
  }
  log.global_event_attrs = kept;
  std::vector<Classifier> classifiers;
  for (const auto& c : log.classifiers) {
    bool declared = true;
    for (const auto& k : c.keys) declared = declared && kept.contains(k);
    if (declared) classifiers.push_back(c);
  }
  log.classifiers = std::move(classifiers);
}

}  // namespace

PredictionResult predict_suffixes(const FrozenModel& model, const EventLog& prefixes,
                                  const PredictionOptions& options) {
  validate(options);
  PredictionResult result;
  std::vector<Trace> kept;
  std::vector<std::uint64_t> ids;
  for (std::size_t i = 0; i < prefixes.traces.size(); ++i) {
    const Trace& trace = prefixes.traces[i];
    const std::string name = trace_id(trace, i);
    try {
      for (std::size_t e = 0; e < trace.events.size(); ++e) {
        encode_event(model.schema, trace, e, name);
      }
    } catch (const Error& err) {
      if (!options.skip_unknown || err.kind() != ErrorKind::unknown_value) throw;
      result.skipped.omitted.push_back({name, err.what()});
      continue;
    }
    kept.push_back(trace);
    ids.push_back(i);
    result.positions.push_back(i);
  }
  result.suffixes = predict_traces(model, kept, ids, options);

  result.log = prefixes;
  result.log.traces.clear();
  for (std::size_t i = 0; i < kept.size(); ++i) {
    Trace t = std::move(kept[i]);
    for (const auto& g : result.suffixes[i].events) t.events.push_back(g.event);
    result.log.traces.push_back(std::move(t));
  }
  restrict_declarations(result.log);
  return result;
}

}  // namespace xespred
