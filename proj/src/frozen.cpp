#include "xespred/frozen.hpp"

#include <bit>
#include <boost/crc.hpp>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include "json.hpp"

#include "xespred/error.hpp"

namespace xespred {

using json = nlohmann::json;

std::uint64_t crc64(std::span<const unsigned char> bytes) {
  // CRC-64/XZ: ECMA-182 polynomial, reflected, all-ones init and xor-out.
  boost::crc_optimal<64, 0x42F0E1EBA9EA3693ULL, ~0ULL, ~0ULL, true, true> crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

ModelConfig architecture_fields(const ModelConfig& config) {
  ModelConfig out;
  out.batch_size = config.batch_size;
  out.steps = config.steps;
  out.layers = config.layers;
  out.hidden = config.hidden;
  out.use_input_projection = config.use_input_projection;
  out.input_width = config.input_width;
  out.shared_rnn = config.shared_rnn;
  out.losses = config.losses;
  out.weights = config.weights;
  return out;
}

namespace {

// ---------------------------------------------------------------------------
// Little-endian primitives

template <typename T>
void put_le(std::string& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>(u & 0xFF));
    u = static_cast<U>(u >> 8);
  }
}

template <typename T>
T get_le(std::string_view bytes, std::size_t offset) {
  using U = std::make_unsigned_t<T>;
  U u = 0;
  for (std::size_t i = sizeof(T); i-- > 0;) {
    u = static_cast<U>((u << 8) | static_cast<unsigned char>(bytes[offset + i]));
  }
  return static_cast<T>(u);
}

void put_f64(std::string& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }
double get_f64(std::string_view bytes, std::size_t offset) {
  return std::bit_cast<double>(get_le<std::uint64_t>(bytes, offset));
}

[[noreturn]] void format_error(const std::string& message) {
  throw Error(ErrorKind::format, "frozen model: " + message);
}

// ---------------------------------------------------------------------------
// Metadata JSON

AttributeType parse_attribute_type(const std::string& name) {
  for (const auto t : {AttributeType::text, AttributeType::timestamp, AttributeType::integer,
                       AttributeType::real, AttributeType::boolean, AttributeType::opaque}) {
    if (to_string(t) == name) return t;
  }
  format_error("unknown attribute type \"" + name + "\"");
}

FeatureKind parse_feature_kind(const std::string& name) {
  for (const auto k :
       {FeatureKind::categorical, FeatureKind::numeric, FeatureKind::datetime_delta}) {
    if (to_string(k) == name) return k;
  }
  format_error("unknown feature kind \"" + name + "\"");
}

FeatureSource parse_feature_source(const std::string& name) {
  for (const auto s : {FeatureSource::event_attribute, FeatureSource::trace_attribute,
                       FeatureSource::classifier}) {
    if (to_string(s) == name) return s;
  }
  format_error("unknown feature source \"" + name + "\"");
}

json schema_to_json(const EncodingSchema& schema) {
  json features = json::array();
  for (const auto& f : schema.features) {
    features.push_back({
        {"key", f.key},
        {"source", std::string(to_string(f.source))},
        {"kind", std::string(to_string(f.kind))},
        {"value_type", std::string(to_string(f.value_type))},
        {"classifier_keys", f.classifier_keys},
        {"components", f.components},
        {"vocabulary", f.vocab.values()},
        {"norm", {{"mean", f.norm.mean}, {"sd", f.norm.sd}}},
        {"time",
         {{"scale", std::string(to_string(f.time.kind))},
          {"mean", f.time.stats.mean},
          {"sd", f.time.stats.sd}}},
        {"embedding_dim", f.embedding_dim},
        {"predictor", f.predictor},
        {"target", f.target},
    });
  }
  return {{"features", features}, {"predictors", schema.predictors}, {"targets", schema.targets}};
}

EncodingSchema schema_from_json(const json& j) {
  EncodingSchema schema;
  for (const auto& jf : j.at("features")) {
    FeatureSpec f;
    f.key = jf.at("key").get<std::string>();
    f.source = parse_feature_source(jf.at("source").get<std::string>());
    f.kind = parse_feature_kind(jf.at("kind").get<std::string>());
    f.value_type = parse_attribute_type(jf.at("value_type").get<std::string>());
    f.classifier_keys = jf.at("classifier_keys").get<std::vector<std::string>>();
    f.components = jf.at("components").get<std::vector<std::vector<std::string>>>();
    f.vocab = Vocabulary(jf.at("vocabulary").get<std::vector<std::string>>());
    f.norm.mean = jf.at("norm").at("mean").get<double>();
    f.norm.sd = jf.at("norm").at("sd").get<double>();
    f.time.kind = parse_time_scale(jf.at("time").at("scale").get<std::string>());
    f.time.stats.mean = jf.at("time").at("mean").get<double>();
    f.time.stats.sd = jf.at("time").at("sd").get<double>();
    f.embedding_dim = jf.at("embedding_dim").get<std::size_t>();
    f.predictor = jf.at("predictor").get<bool>();
    f.target = jf.at("target").get<bool>();
    schema.features.push_back(std::move(f));
  }
  schema.predictors = j.at("predictors").get<std::vector<std::size_t>>();
  schema.targets = j.at("targets").get<std::vector<std::size_t>>();
  for (const auto i : schema.predictors) {
    if (i >= schema.features.size()) format_error("predictor index out of range");
  }
  for (const auto i : schema.targets) {
    if (i >= schema.features.size()) format_error("target index out of range");
  }
  return schema;
}

json config_to_json(const ModelConfig& c) {
  json losses = json::object();
  for (const auto& [k, v] : c.losses) losses[k] = std::string(to_string(v));
  json weights = json::object();
  for (const auto& [k, v] : c.weights) weights[k] = v;
  return {{"batch_size", c.batch_size},
          {"steps", c.steps},
          {"layers", c.layers},
          {"hidden", c.hidden},
          {"input_projection", c.use_input_projection},
          {"input_width", c.input_width},
          {"shared_rnn", c.shared_rnn},
          {"losses", losses},
          {"weights", weights}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.steps = j.at("steps").get<std::size_t>();
  c.layers = j.at("layers").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.use_input_projection = j.at("input_projection").get<bool>();
  c.input_width = j.at("input_width").get<std::size_t>();
  c.shared_rnn = j.at("shared_rnn").get<bool>();
  for (const auto& [k, v] : j.at("losses").items()) c.losses[k] = parse_loss_kind(v.get<std::string>());
  for (const auto& [k, v] : j.at("weights").items()) c.weights[k] = v.get<double>();
  return c;
}

json types_to_json(const std::map<std::string, AttributeType>& types) {
  json out = json::object();
  for (const auto& [k, t] : types) out[k] = std::string(to_string(t));
  return out;
}

std::map<std::string, AttributeType> types_from_json(const json& j) {
  std::map<std::string, AttributeType> out;
  for (const auto& [k, v] : j.items()) out[k] = parse_attribute_type(v.get<std::string>());
  return out;
}

json manifest_entry(const std::string& name, const Matrix& m) {
  return {{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}};
}

}  // namespace

std::string serialize_frozen(const FrozenModel& model, const CheckpointState* checkpoint) {
  const auto tensors = model.params.tensors();
  json manifest = json::array();
  for (const auto& [name, m] : tensors) manifest.push_back(manifest_entry(name, *m));

  json meta = {
      {"format_version", kFrozenVersion},
      {"schema", schema_to_json(model.schema)},
      {"config", config_to_json(architecture_fields(model.config))},
      {"training",
       {{"source_log", model.metadata.source_log},
        {"epochs", model.metadata.epochs},
        {"final_losses", model.metadata.final_losses}}},
      {"attribute_types",
       {{"event", types_to_json(model.event_attribute_types)},
        {"trace", types_to_json(model.trace_attribute_types)}}},
      {"tensors", manifest},
  };
  if (checkpoint != nullptr) {
    json first = json::array();
    json second = json::array();
    for (std::size_t i = 0; i < checkpoint->first_slots.size(); ++i) {
      first.push_back(manifest_entry(tensors.at(i).first, checkpoint->first_slots[i]));
    }
    for (std::size_t i = 0; i < checkpoint->second_slots.size(); ++i) {
      second.push_back(manifest_entry(tensors.at(i).first, checkpoint->second_slots[i]));
    }
    meta["checkpoint"] = {{"epochs_completed", checkpoint->epochs_completed},
                          {"optimizer_steps", checkpoint->optimizer_steps},
                          {"learning_rate", checkpoint->learning_rate},
                          {"epoch_losses", checkpoint->epoch_losses},
                          {"first_slots", first},
                          {"second_slots", second}};
  }
  const std::string meta_text = meta.dump();

  std::string out(kFrozenMagic, sizeof kFrozenMagic);
  put_le<std::uint32_t>(out, kFrozenVersion);
  put_le<std::uint64_t>(out, meta_text.size());
  out += meta_text;
  for (const auto& [name, m] : tensors) {
    for (const double v : m->values()) put_f64(out, v);
  }
  if (checkpoint != nullptr) {
    for (const auto& m : checkpoint->first_slots) {
      for (const double v : m.values()) put_f64(out, v);
    }
    for (const auto& m : checkpoint->second_slots) {
      for (const double v : m.values()) put_f64(out, v);
    }
  }
  const auto crc = crc64({reinterpret_cast<const unsigned char*>(out.data()), out.size()});
  put_le<std::uint64_t>(out, crc);
  return out;
}

FrozenModel deserialize_frozen(std::string_view bytes, CheckpointState* checkpoint) {
  constexpr std::size_t kHeader = 4 + 4 + 8;
  if (bytes.size() < kHeader + 8) format_error("file too short (" + std::to_string(bytes.size()) + " bytes)");
  if (std::memcmp(bytes.data(), kFrozenMagic, 4) != 0) format_error("bad magic");
  const auto version = get_le<std::uint32_t>(bytes, 4);
  if (version > kFrozenVersion) {
    format_error("unsupported format version " + std::to_string(version) + " (newest supported " +
                 std::to_string(kFrozenVersion) + ")");
  }
  if (version == 0) format_error("invalid format version 0");
  const std::size_t body = bytes.size() - 8;
  const auto stored_crc = get_le<std::uint64_t>(bytes, body);
  const auto actual_crc = crc64({reinterpret_cast<const unsigned char*>(bytes.data()), body});
  if (stored_crc != actual_crc) format_error("checksum mismatch (file truncated or corrupted)");

  const auto meta_len = get_le<std::uint64_t>(bytes, 8);
  if (meta_len > body - kHeader) format_error("metadata length exceeds file size");
  json meta;
  try {
    meta = json::parse(bytes.substr(kHeader, meta_len));
  } catch (const json::exception& e) {
    format_error(std::string("invalid metadata: ") + e.what());
  }

  FrozenModel model;
  try {
    model.version = version;
    model.schema = schema_from_json(meta.at("schema"));
    model.config = config_from_json(meta.at("config"));
    const auto& training = meta.at("training");
    model.metadata.source_log = training.at("source_log").get<std::string>();
    model.metadata.epochs = training.at("epochs").get<std::size_t>();
    model.metadata.final_losses = training.at("final_losses").get<std::map<std::string, double>>();
    model.event_attribute_types = types_from_json(meta.at("attribute_types").at("event"));
    model.trace_attribute_types = types_from_json(meta.at("attribute_types").at("trace"));
  } catch (const json::exception& e) {
    format_error(std::string("malformed metadata: ") + e.what());
  }

  model.params = allocate_params(make_architecture(model.schema, model.config));
  const auto tensors = model.params.tensors();
  const json& manifest = meta.at("tensors");
  if (!manifest.is_array() || manifest.size() != tensors.size()) {
    format_error("tensor manifest lists " + std::to_string(manifest.size()) +
                 " tensors, architecture expects " + std::to_string(tensors.size()));
  }
  std::size_t offset = kHeader + meta_len;
  auto read_tensor = [&](const json& entry, Matrix& m, const std::string& expected_name) {
    const auto name = entry.at("name").get<std::string>();
    const auto rows = entry.at("rows").get<std::size_t>();
    const auto cols = entry.at("cols").get<std::size_t>();
    if (name != expected_name || rows != m.rows() || cols != m.cols()) {
      format_error("tensor " + name + " " + std::to_string(rows) + "x" + std::to_string(cols) +
                   " does not match expected " + expected_name + " " + std::to_string(m.rows()) +
                   "x" + std::to_string(m.cols()));
    }
    if (offset + m.size() * 8 > body) format_error("tensor payload exceeds file size");
    auto values = m.values();
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = get_f64(bytes, offset + i * 8);
    offset += m.size() * 8;
  };
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    read_tensor(manifest[i], *tensors[i].value, tensors[i].name);
  }

  if (meta.contains("checkpoint")) {
    const json& ck = meta.at("checkpoint");
    CheckpointState state;
    state.epochs_completed = ck.at("epochs_completed").get<std::size_t>();
    state.optimizer_steps = ck.at("optimizer_steps").get<std::uint64_t>();
    state.learning_rate = ck.at("learning_rate").get<double>();
    state.epoch_losses = ck.at("epoch_losses").get<std::vector<double>>();
    auto read_slots = [&](const json& list, std::vector<Matrix>& slots) {
      if (!list.empty() && list.size() != tensors.size()) format_error("optimizer slot count mismatch");
      for (std::size_t i = 0; i < list.size(); ++i) {
        Matrix m(tensors[i].value->rows(), tensors[i].value->cols());
        read_tensor(list[i], m, tensors[i].name);
        slots.push_back(std::move(m));
      }
    };
    read_slots(ck.at("first_slots"), state.first_slots);
    read_slots(ck.at("second_slots"), state.second_slots);
    if (checkpoint != nullptr) *checkpoint = std::move(state);
  } else if (checkpoint != nullptr) {
    format_error("file is a frozen model, not a checkpoint");
  }
  if (offset != body) format_error("trailing bytes after tensor payload");
  return model;
}

void save_frozen(const FrozenModel& model, const std::string& path,
                 const CheckpointState* checkpoint) {
  const std::string bytes = serialize_frozen(model, checkpoint);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot open " + tmp + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(ErrorKind::io, "write failure on " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::io, "cannot rename " + tmp + " to " + path + ": " + ec.message());
}

FrozenModel load_frozen(const std::string& path, CheckpointState* checkpoint) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open model file " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_frozen(bytes, checkpoint);
}

}  // namespace xespred
