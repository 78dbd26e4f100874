#include "xespred/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "xespred/error.hpp"

namespace xespred {

using ojson = nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// TOML reader

class TomlReader {
 public:
  explicit TomlReader(std::string_view text) : text_(text) {}

  ojson parse() {
    ojson root = ojson::object();
    ojson* table = &root;
    while (true) {
      skip_blank_lines();
      if (at_end()) break;
      if (peek() == '[') {
        ++pos_;
        if (!at_end() && peek() == '[') fail("arrays of tables are not supported");
        skip_spaces();
        const auto path = parse_key_path();
        skip_spaces();
        expect(']');
        if (!headers_.insert(path).second) fail("table [" + join_path(path) + "] defined twice");
        table = &open_table(root, path);
      } else {
        const auto path = parse_key_path();
        skip_spaces();
        expect('=');
        skip_spaces();
        assign(*table, path, parse_value());
      }
      finish_line();
    }
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& message) const {
    throw Error(ErrorKind::config,
                "config line " + std::to_string(line_) + ": " + message);
  }

  static std::string join_path(const std::vector<std::string>& path) {
    std::string out;
    for (const auto& part : path) out += (out.empty() ? "" : ".") + part;
    return out;
  }

  bool at_end() const noexcept { return pos_ >= text_.size(); }
  char peek() const noexcept { return text_[pos_]; }

  void expect(char c) {
    if (at_end() || peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  void skip_spaces() {
    while (!at_end() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }

  void skip_comment() {
    if (!at_end() && peek() == '#') {
      while (!at_end() && peek() != '\n') ++pos_;
    }
  }

  void skip_blank_lines() {
    while (!at_end()) {
      skip_spaces();
      skip_comment();
      if (at_end()) return;
      if (peek() == '\r') ++pos_;
      if (!at_end() && peek() == '\n') {
        ++pos_;
        ++line_;
        continue;
      }
      return;
    }
  }

  // Whitespace, comments and newlines inside arrays and inline tables.
  void skip_layout() {
    while (!at_end()) {
      skip_spaces();
      skip_comment();
      if (at_end()) return;
      if (peek() == '\r' || peek() == '\n') {
        if (peek() == '\n') ++line_;
        ++pos_;
        continue;
      }
      return;
    }
  }

  void finish_line() {
    skip_spaces();
    skip_comment();
    if (at_end()) return;
    if (peek() == '\r') ++pos_;
    if (at_end() || peek() != '\n') fail("unexpected content after value");
    ++pos_;
    ++line_;
  }

  static bool is_bare(char c) noexcept {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
           c == '_' || c == '-';
  }

  std::string parse_key() {
    if (at_end()) fail("expected a key");
    if (peek() == '"') return parse_basic_string();
    if (peek() == '\'') return parse_literal_string();
    const auto start = pos_;
    while (!at_end() && is_bare(peek())) ++pos_;
    if (pos_ == start) fail("expected a key");
    return std::string(text_.substr(start, pos_ - start));
  }

  std::vector<std::string> parse_key_path() {
    std::vector<std::string> path{parse_key()};
    while (true) {
      skip_spaces();
      if (at_end() || peek() != '.') return path;
      ++pos_;
      skip_spaces();
      path.push_back(parse_key());
    }
  }

  void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x110000) {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      fail("invalid unicode escape");
    }
  }

  std::string parse_basic_string() {
    expect('"');
    std::string out;
    while (true) {
      if (at_end() || peek() == '\n') fail("unterminated string");
      const char c = text_[pos_++];
      if (c == '"') return out;
      if (c != '\\') {
        out.push_back(c);
        continue;
      }
      if (at_end()) fail("unterminated string");
      const char e = text_[pos_++];
      switch (e) {
        case 'b': out.push_back('\b'); break;
        case 't': out.push_back('\t'); break;
        case 'n': out.push_back('\n'); break;
        case 'f': out.push_back('\f'); break;
        case 'r': out.push_back('\r'); break;
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        case 'u':
        case 'U': {
          const std::size_t digits = e == 'u' ? 4 : 8;
          if (pos_ + digits > text_.size()) fail("truncated unicode escape");
          std::uint32_t cp = 0;
          const auto* first = text_.data() + pos_;
          const auto [ptr, ec] = std::from_chars(first, first + digits, cp, 16);
          if (ec != std::errc() || ptr != first + digits) fail("invalid unicode escape");
          pos_ += digits;
          append_utf8(out, cp);
          break;
        }
        default:
          fail(std::string("invalid escape \\") + e);
      }
    }
  }

  std::string parse_literal_string() {
    expect('\'');
    const auto start = pos_;
    while (!at_end() && peek() != '\'' && peek() != '\n') ++pos_;
    if (at_end() || peek() != '\'') fail("unterminated string");
    std::string out(text_.substr(start, pos_ - start));
    ++pos_;
    return out;
  }

  ojson parse_number() {
    const auto start = pos_;
    while (!at_end() && (is_bare(peek()) || peek() == '+' || peek() == '.')) ++pos_;
    std::string token(text_.substr(start, pos_ - start));
    std::string digits;
    for (const char c : token) {
      if (c != '_') digits.push_back(c);
    }
    const std::string_view body =
        (!digits.empty() && (digits[0] == '+' || digits[0] == '-'))
            ? std::string_view(digits).substr(1)
            : std::string_view(digits);
    const bool negative = !digits.empty() && digits[0] == '-';
    if (body == "inf") {
      return negative ? -std::numeric_limits<double>::infinity()
                      : std::numeric_limits<double>::infinity();
    }
    if (body == "nan") return std::numeric_limits<double>::quiet_NaN();
    const bool is_float = token.find_first_of(".eE") != std::string::npos;
    const char* first = digits.data() + (digits[0] == '+' ? 1 : 0);
    const char* last = digits.data() + digits.size();
    if (is_float) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || ptr != last) fail("invalid number \"" + token + "\"");
      return v;
    }
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) fail("invalid number \"" + token + "\"");
    return v;
  }

  ojson parse_value() {
    if (at_end()) fail("expected a value");
    const char c = peek();
    if (c == '"') {
      if (text_.substr(pos_, 3) == "\"\"\"") fail("multi-line strings are not supported");
      return parse_basic_string();
    }
    if (c == '\'') return parse_literal_string();
    if (c == '[') return parse_array();
    if (c == '{') return parse_inline_table();
    if (text_.substr(pos_, 4) == "true" && (pos_ + 4 == text_.size() || !is_bare(text_[pos_ + 4]))) {
      pos_ += 4;
      return true;
    }
    if (text_.substr(pos_, 5) == "false" &&
        (pos_ + 5 == text_.size() || !is_bare(text_[pos_ + 5]))) {
      pos_ += 5;
      return false;
    }
    if (c == '+' || c == '-' || (c >= '0' && c <= '9') || c == 'i' || c == 'n') {
      return parse_number();
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  ojson parse_array() {
    expect('[');
    ojson out = ojson::array();
    while (true) {
      skip_layout();
      if (at_end()) fail("unterminated array");
      if (peek() == ']') {
        ++pos_;
        return out;
      }
      out.push_back(parse_value());
      skip_layout();
      if (at_end()) fail("unterminated array");
      if (peek() == ',') {
        ++pos_;
      } else if (peek() != ']') {
        fail("expected ',' or ']' in array");
      }
    }
  }

  ojson parse_inline_table() {
    expect('{');
    ojson out = ojson::object();
    skip_spaces();
    if (!at_end() && peek() == '}') {
      ++pos_;
      return out;
    }
    while (true) {
      skip_spaces();
      const auto path = parse_key_path();
      skip_spaces();
      expect('=');
      skip_spaces();
      assign(out, path, parse_value());
      skip_spaces();
      if (at_end()) fail("unterminated inline table");
      if (peek() == '}') {
        ++pos_;
        return out;
      }
      expect(',');
    }
  }

  ojson& open_table(ojson& root, const std::vector<std::string>& path) {
    ojson* node = &root;
    for (const auto& part : path) {
      if (!node->contains(part)) {
        (*node)[part] = ojson::object();
      } else if (!(*node)[part].is_object()) {
        fail("key \"" + part + "\" is not a table");
      }
      node = &(*node)[part];
    }
    return *node;
  }

  void assign(ojson& table, const std::vector<std::string>& path, ojson value) {
    ojson* node = &table;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      if (!node->contains(path[i])) {
        (*node)[path[i]] = ojson::object();
      } else if (!(*node)[path[i]].is_object()) {
        fail("key \"" + path[i] + "\" is not a table");
      }
      node = &(*node)[path[i]];
    }
    if (node->contains(path.back())) fail("duplicate key \"" + path.back() + "\"");
    (*node)[path.back()] = std::move(value);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::set<std::vector<std::string>> headers_;
  std::size_t line_ = 1;
};

// ---------------------------------------------------------------------------
// TOML writer

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (const char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04X", static_cast<unsigned>(c));
          out += buf;
        } else {
          out.push_back(c);
        }
    }
  }
  out += '"';
  return out;
}

std::string format_key(const std::string& key) {
  const bool bare = !key.empty() && std::all_of(key.begin(), key.end(), [](char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
           c == '_' || c == '-';
  });
  return bare ? key : quote(key);
}

std::string format_float(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, ptr);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

std::string format_inline(const ojson& v) {
  switch (v.type()) {
    case ojson::value_t::string: return quote(v.get_ref<const std::string&>());
    case ojson::value_t::boolean: return v.get<bool>() ? "true" : "false";
    case ojson::value_t::number_integer: return std::to_string(v.get<std::int64_t>());
    case ojson::value_t::number_unsigned: return std::to_string(v.get<std::uint64_t>());
    case ojson::value_t::number_float: return format_float(v.get<double>());
    case ojson::value_t::array: {
      std::string out = "[";
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i > 0) out += ", ";
        out += format_inline(v[i]);
      }
      return out + "]";
    }
    case ojson::value_t::object: {
      std::string out = "{";
      bool first = true;
      for (const auto& [k, item] : v.items()) {
        out += first ? " " : ", ";
        first = false;
        out += format_key(k) + " = " + format_inline(item);
      }
      return out + (first ? "}" : " }");
    }
    default:
      throw Error(ErrorKind::config, "value cannot be written as TOML");
  }
}

void write_table(const ojson& table, const std::string& prefix, std::string& out) {
  for (const auto& [k, v] : table.items()) {
    if (!v.is_object()) out += format_key(k) + " = " + format_inline(v) + "\n";
  }
  for (const auto& [k, v] : table.items()) {
    if (!v.is_object()) continue;
    const std::string path = prefix.empty() ? format_key(k) : prefix + "." + format_key(k);
    if (!out.empty()) out += "\n";
    out += "[" + path + "]\n";
    write_table(v, path, out);
  }
}

// ---------------------------------------------------------------------------
// Document mapping

[[noreturn]] void config_error(const std::string& message) {
  throw Error(ErrorKind::config, message);
}

void reject_unknown(const ojson& table, std::string_view section,
                    std::initializer_list<std::string_view> known) {
  for (const auto& [k, v] : table.items()) {
    if (std::find(known.begin(), known.end(), k) == known.end()) {
      config_error("unknown key \"" + k + "\" in [" + std::string(section) + "]");
    }
  }
}

const ojson* section(const ojson& doc, const std::string& name) {
  if (!doc.contains(name)) return nullptr;
  const auto& t = doc.at(name);
  if (!t.is_object()) config_error("[" + name + "] must be a table");
  return &t;
}

std::string get_string(const ojson& t, const std::string& key, std::string_view where) {
  const auto& v = t.at(key);
  if (!v.is_string()) config_error(std::string(where) + "." + key + " must be a string");
  return v.get<std::string>();
}

std::vector<std::string> get_strings(const ojson& t, const std::string& key,
                                     std::string_view where) {
  const auto& v = t.at(key);
  if (!v.is_array()) config_error(std::string(where) + "." + key + " must be an array of strings");
  std::vector<std::string> out;
  for (const auto& item : v) {
    if (!item.is_string()) {
      config_error(std::string(where) + "." + key + " must be an array of strings");
    }
    out.push_back(item.get<std::string>());
  }
  return out;
}

std::int64_t get_int(const ojson& v, const std::string& what) {
  if (!v.is_number_integer()) config_error(what + " must be an integer");
  return v.get<std::int64_t>();
}

std::size_t get_count(const ojson& v, const std::string& what) {
  const auto i = get_int(v, what);
  if (i < 0) config_error(what + " must be non-negative");
  return static_cast<std::size_t>(i);
}

double get_real(const ojson& v, const std::string& what) {
  if (!v.is_number()) config_error(what + " must be a number");
  return v.get<double>();
}

bool get_bool(const ojson& v, const std::string& what) {
  if (!v.is_boolean()) config_error(what + " must be a boolean");
  return v.get<bool>();
}

std::string resolve_path(const std::string& path, const std::string& base_dir) {
  if (path.empty() || base_dir.empty()) return path;
  const std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::absolute(base_dir) / p).lexically_normal().string();
}

}  // namespace

ojson parse_toml(std::string_view text) { return TomlReader(text).parse(); }

std::string write_toml(const ojson& document) {
  if (!document.is_object()) throw Error(ErrorKind::config, "TOML document must be a table");
  std::string out;
  write_table(document, "", out);
  return out;
}

TrainRunConfig config_from_document(const ojson& document, const std::string& base_dir) {
  if (!document.is_object()) config_error("config must be a table");
  reject_unknown(document, "top level", {"data", "model", "train"});
  TrainRunConfig run;

  if (const auto* data = section(document, "data")) {
    reject_unknown(*data, "data",
                   {"xes", "predictors", "targets", "classifiers", "categorical", "time_scale"});
    if (data->contains("xes")) run.data.xes = resolve_path(get_string(*data, "xes", "data"), base_dir);
    if (data->contains("predictors")) {
      run.data.schema.predictors = get_strings(*data, "predictors", "data");
    }
    if (data->contains("targets")) run.data.schema.targets = get_strings(*data, "targets", "data");
    if (data->contains("classifiers")) {
      run.data.classifiers = get_strings(*data, "classifiers", "data");
    }
    if (data->contains("categorical")) {
      run.data.schema.categorical = get_strings(*data, "categorical", "data");
    }
    if (data->contains("time_scale")) {
      try {
        run.data.schema.time_scale = parse_time_scale(get_string(*data, "time_scale", "data"));
      } catch (const Error& e) {
        config_error(std::string("data.time_scale: ") + e.what());
      }
    }
  }

  ModelConfig& m = run.model;
  if (const auto* model = section(document, "model")) {
    reject_unknown(*model, "model",
                   {"layers", "hidden", "steps", "batch_size", "input_projection", "input_width",
                    "shared_rnn", "embedding_dims"});
    if (model->contains("layers")) m.layers = get_count(model->at("layers"), "model.layers");
    if (model->contains("hidden")) m.hidden = get_count(model->at("hidden"), "model.hidden");
    if (model->contains("steps")) m.steps = get_count(model->at("steps"), "model.steps");
    if (model->contains("batch_size")) {
      m.batch_size = get_count(model->at("batch_size"), "model.batch_size");
    }
    if (model->contains("input_projection")) {
      m.use_input_projection = get_bool(model->at("input_projection"), "model.input_projection");
    }
    if (model->contains("input_width")) {
      m.input_width = get_count(model->at("input_width"), "model.input_width");
    }
    if (model->contains("shared_rnn")) {
      m.shared_rnn = get_bool(model->at("shared_rnn"), "model.shared_rnn");
    }
    if (model->contains("embedding_dims")) {
      const auto& dims = model->at("embedding_dims");
      if (!dims.is_object()) config_error("model.embedding_dims must be a table");
      for (const auto& [k, v] : dims.items()) {
        run.data.schema.embedding_dims[k] = get_count(v, "model.embedding_dims." + k);
      }
    }
  }

  if (const auto* train = section(document, "train")) {
    reject_unknown(*train, "train",
                   {"epochs", "optimizer", "lr", "momentum", "beta1", "beta2", "epsilon", "decay",
                    "clip_norm", "seed", "k_folds", "lr_decay", "checkpoint_interval",
                    "metrics_flush", "output_dir", "loss", "weights"});
    if (train->contains("epochs")) m.epochs = get_count(train->at("epochs"), "train.epochs");
    if (train->contains("optimizer")) {
      try {
        m.optimizer.kind = parse_optimizer_kind(get_string(*train, "optimizer", "train"));
      } catch (const Error& e) {
        config_error(std::string("train.optimizer: ") + e.what());
      }
    }
    if (train->contains("lr")) m.optimizer.learning_rate = get_real(train->at("lr"), "train.lr");
    if (train->contains("momentum")) {
      m.optimizer.momentum = get_real(train->at("momentum"), "train.momentum");
    }
    if (train->contains("beta1")) m.optimizer.beta1 = get_real(train->at("beta1"), "train.beta1");
    if (train->contains("beta2")) m.optimizer.beta2 = get_real(train->at("beta2"), "train.beta2");
    if (train->contains("epsilon")) {
      m.optimizer.epsilon = get_real(train->at("epsilon"), "train.epsilon");
    }
    if (train->contains("decay")) m.optimizer.decay = get_real(train->at("decay"), "train.decay");
    if (train->contains("clip_norm")) {
      m.clip_norm = get_real(train->at("clip_norm"), "train.clip_norm");
    }
    if (train->contains("seed")) {
      const auto seed = get_int(train->at("seed"), "train.seed");
      if (seed < 0) config_error("train.seed must be non-negative");
      m.seed = static_cast<std::uint64_t>(seed);
    }
    if (train->contains("k_folds")) run.k_folds = get_count(train->at("k_folds"), "train.k_folds");
    if (train->contains("lr_decay")) m.lr_decay = get_real(train->at("lr_decay"), "train.lr_decay");
    if (train->contains("checkpoint_interval")) {
      run.checkpoint_interval =
          get_count(train->at("checkpoint_interval"), "train.checkpoint_interval");
    }
    if (train->contains("metrics_flush")) {
      run.metrics_flush = get_count(train->at("metrics_flush"), "train.metrics_flush");
    }
    if (train->contains("output_dir")) {
      run.output_dir = resolve_path(get_string(*train, "output_dir", "train"), base_dir);
    }
    if (train->contains("loss")) {
      const auto& losses = train->at("loss");
      if (!losses.is_object()) config_error("train.loss must be a table");
      for (const auto& [k, v] : losses.items()) {
        if (!v.is_string()) config_error("train.loss." + k + " must be a string");
        try {
          m.losses[k] = parse_loss_kind(v.get<std::string>());
        } catch (const Error& e) {
          config_error("train.loss." + k + ": " + e.what());
        }
      }
    }
    if (train->contains("weights")) {
      const auto& weights = train->at("weights");
      if (!weights.is_object()) config_error("train.weights must be a table");
      for (const auto& [k, v] : weights.items()) m.weights[k] = get_real(v, "train.weights." + k);
    }
  }
  if (!document.contains("train") || !document.at("train").contains("output_dir")) {
    run.output_dir = resolve_path(run.output_dir, base_dir);
  }
  validate(run);
  return run;
}

ojson config_to_document(const TrainRunConfig& run) {
  const ModelConfig& m = run.model;
  ojson doc = ojson::object();
  ojson data = ojson::object();
  data["xes"] = run.data.xes;
  data["predictors"] = run.data.schema.predictors;
  data["targets"] = run.data.schema.targets;
  data["classifiers"] = run.data.classifiers;
  data["categorical"] = run.data.schema.categorical;
  data["time_scale"] = std::string(to_string(run.data.schema.time_scale));
  doc["data"] = data;

  ojson model = ojson::object();
  model["layers"] = m.layers;
  model["hidden"] = m.hidden;
  model["steps"] = m.steps;
  model["batch_size"] = m.batch_size;
  model["input_projection"] = m.use_input_projection;
  model["input_width"] = m.input_width;
  model["shared_rnn"] = m.shared_rnn;
  ojson dims = ojson::object();
  for (const auto& [k, v] : run.data.schema.embedding_dims) dims[k] = v;
  model["embedding_dims"] = dims;
  doc["model"] = model;

  ojson train = ojson::object();
  train["epochs"] = m.epochs;
  train["optimizer"] = std::string(to_string(m.optimizer.kind));
  train["lr"] = m.optimizer.learning_rate;
  train["momentum"] = m.optimizer.momentum;
  train["beta1"] = m.optimizer.beta1;
  train["beta2"] = m.optimizer.beta2;
  train["epsilon"] = m.optimizer.epsilon;
  train["decay"] = m.optimizer.decay;
  train["clip_norm"] = m.clip_norm;
  train["seed"] = static_cast<std::int64_t>(m.seed);
  train["k_folds"] = run.k_folds;
  train["lr_decay"] = m.lr_decay;
  train["checkpoint_interval"] = run.checkpoint_interval;
  train["metrics_flush"] = run.metrics_flush;
  train["output_dir"] = run.output_dir;
  ojson losses = ojson::object();
  for (const auto& [k, v] : m.losses) losses[k] = std::string(to_string(v));
  train["loss"] = losses;
  ojson weights = ojson::object();
  for (const auto& [k, v] : m.weights) weights[k] = v;
  train["weights"] = weights;
  doc["train"] = train;
  return doc;
}

TrainRunConfig parse_config(std::string_view text, const std::string& base_dir) {
  return config_from_document(parse_toml(text), base_dir);
}

TrainRunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const auto base = std::filesystem::absolute(path).parent_path().string();
  return parse_config(buf.str(), base);
}

std::string format_config(const TrainRunConfig& run) {
  return write_toml(config_to_document(run));
}

void save_config(const TrainRunConfig& run, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write config file " + path);
  out << format_config(run);
  if (!out) throw Error(ErrorKind::io, "write failure on " + path);
}

}  // namespace xespred
