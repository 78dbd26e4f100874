#include "xespred/xes.hpp"

#include <expat.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>

#include "xespred/error.hpp"

namespace xespred {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::parse: return "parse";
    case ErrorKind::schema: return "schema";
    case ErrorKind::incomplete_event: return "incomplete_event";
    case ErrorKind::unsupported: return "unsupported";
    case ErrorKind::unknown_value: return "unknown_value";
    case ErrorKind::monotonicity: return "monotonicity";
    case ErrorKind::insufficient_data: return "insufficient_data";
    case ErrorKind::range: return "range";
    case ErrorKind::shape: return "shape";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::no_signal: return "no_signal";
    case ErrorKind::state: return "state";
    case ErrorKind::format: return "format";
    case ErrorKind::io: return "io";
    case ErrorKind::config: return "config";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Timestamps

namespace {

// Proleptic Gregorian conversions (H. Hinnant's civil calendar algorithms).
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y += m <= 2;
}

bool read_digits(std::string_view text, std::size_t& pos, std::size_t count, int& out) {
  if (pos + count > text.size()) return false;
  int value = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const char c = text[pos + i];
    if (c < '0' || c > '9') return false;
    value = value * 10 + (c - '0');
  }
  pos += count;
  out = value;
  return true;
}

bool expect(std::string_view text, std::size_t& pos, char c) {
  if (pos >= text.size() || text[pos] != c) return false;
  ++pos;
  return true;
}

}  // namespace

std::optional<Timestamp> parse_timestamp(std::string_view text) {
  std::size_t pos = 0;
  int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
  if (!read_digits(text, pos, 4, year) || !expect(text, pos, '-') ||
      !read_digits(text, pos, 2, month) || !expect(text, pos, '-') ||
      !read_digits(text, pos, 2, day)) {
    return std::nullopt;
  }
  if (pos >= text.size() || (text[pos] != 'T' && text[pos] != 't' && text[pos] != ' ')) {
    return std::nullopt;
  }
  ++pos;
  if (!read_digits(text, pos, 2, hour) || !expect(text, pos, ':') ||
      !read_digits(text, pos, 2, minute) || !expect(text, pos, ':') ||
      !read_digits(text, pos, 2, second)) {
    return std::nullopt;
  }
  int millis = 0;
  if (pos < text.size() && (text[pos] == '.' || text[pos] == ',')) {
    ++pos;
    int scale = 100;
    std::size_t digits = 0;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
      if (scale > 0) {
        millis += (text[pos] - '0') * scale;
        scale /= 10;
      }
      ++pos;
      ++digits;
    }
    if (digits == 0) return std::nullopt;
  }
  std::int64_t offset_minutes = 0;
  if (pos < text.size()) {
    const char c = text[pos];
    if (c == 'Z' || c == 'z') {
      ++pos;
    } else if (c == '+' || c == '-') {
      ++pos;
      int oh = 0, om = 0;
      if (!read_digits(text, pos, 2, oh)) return std::nullopt;
      if (pos < text.size() && text[pos] == ':') ++pos;
      if (!read_digits(text, pos, 2, om)) return std::nullopt;
      offset_minutes = (c == '+' ? 1 : -1) * (oh * 60 + om);
    } else {
      return std::nullopt;
    }
  }
  if (pos != text.size()) return std::nullopt;
  if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 ||
      second > 60) {
    return std::nullopt;
  }
  const std::int64_t days =
      days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day));
  const std::int64_t seconds =
      days * 86400 + hour * 3600 + minute * 60 + second - offset_minutes * 60;
  return Timestamp{seconds * 1000 + millis};
}

std::string format_timestamp(Timestamp ts) {
  std::int64_t days = ts.millis / 86400000;
  std::int64_t rem = ts.millis % 86400000;
  if (rem < 0) {
    rem += 86400000;
    --days;
  }
  std::int64_t year = 0;
  unsigned month = 0, day = 0;
  civil_from_days(days, year, month, day);
  const auto ms = static_cast<int>(rem % 1000);
  const auto secs = static_cast<int>(rem / 1000);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02d:%02d:%02d.%03d+00:00",
                static_cast<long long>(year), month, day, secs / 3600, (secs / 60) % 60,
                secs % 60, ms);
  return buf;
}

// ---------------------------------------------------------------------------
// Attribute values

AttributeType type_of(const AttributeValue& value) noexcept {
  return static_cast<AttributeType>(value.index());
}

std::string_view to_string(AttributeType type) noexcept {
  switch (type) {
    case AttributeType::text: return "string";
    case AttributeType::timestamp: return "date";
    case AttributeType::integer: return "int";
    case AttributeType::real: return "float";
    case AttributeType::boolean: return "boolean";
    case AttributeType::opaque: return "opaque";
  }
  return "unknown";
}

bool is_numeric(AttributeType type) noexcept {
  return type == AttributeType::integer || type == AttributeType::real;
}

namespace {

std::string format_real(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

std::string format_int(std::int64_t value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string display(const AttributeValue& value) {
  struct Visitor {
    std::string operator()(const std::string& s) const { return s; }
    std::string operator()(Timestamp t) const { return format_timestamp(t); }
    std::string operator()(std::int64_t i) const { return format_int(i); }
    std::string operator()(double d) const { return format_real(d); }
    std::string operator()(bool b) const { return b ? "true" : "false"; }
    std::string operator()(const OpaqueValue& o) const { return o.xml; }
  };
  return std::visit(Visitor{}, value);
}

const AttributeValue* AttributeMap::find(std::string_view key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return &v;
  }
  return nullptr;
}

void AttributeMap::set(std::string key, AttributeValue value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  entries_.emplace_back(std::move(key), std::move(value));
}

bool AttributeMap::erase(std::string_view key) {
  const auto it = std::find_if(entries_.begin(), entries_.end(),
                               [&](const Entry& e) { return e.first == key; });
  if (it == entries_.end()) return false;
  entries_.erase(it);
  return true;
}

const Classifier* EventLog::find_classifier(std::string_view name) const {
  for (const auto& c : classifiers) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

std::size_t EventLog::event_count() const noexcept {
  std::size_t n = 0;
  for (const auto& t : traces) n += t.events.size();
  return n;
}

bool EventLog::operator==(const EventLog& other) const {
  return log_xml_attributes == other.log_xml_attributes && extensions == other.extensions &&
         global_trace_attrs == other.global_trace_attrs &&
         global_event_attrs == other.global_event_attrs &&
         classifiers == other.classifiers && attributes == other.attributes &&
         traces == other.traces;
}

std::string trace_id(const Trace& trace, std::size_t position) {
  if (const auto* name = trace.attributes.find("concept:name")) {
    if (const auto* s = std::get_if<std::string>(name)) return *s;
  }
  return "#" + std::to_string(position);
}

// ---------------------------------------------------------------------------
// XML tree built from expat callbacks

namespace {

struct XmlNode {
  std::string name;
  std::vector<std::pair<std::string, std::string>> attrs;
  std::vector<std::unique_ptr<XmlNode>> children;
  long line = 0;
  long column = 0;

  const std::string* attr(std::string_view key) const {
    for (const auto& [k, v] : attrs) {
      if (k == key) return &v;
    }
    return nullptr;
  }
};

struct TreeBuilder {
  std::unique_ptr<XmlNode> root;
  std::vector<XmlNode*> stack;
  XML_Parser parser = nullptr;

  static void on_start(void* user, const XML_Char* name, const XML_Char** atts) {
    auto* self = static_cast<TreeBuilder*>(user);
    auto node = std::make_unique<XmlNode>();
    node->name = name;
    node->line = static_cast<long>(XML_GetCurrentLineNumber(self->parser));
    node->column = static_cast<long>(XML_GetCurrentColumnNumber(self->parser)) + 1;
    for (std::size_t i = 0; atts[i] != nullptr; i += 2) {
      node->attrs.emplace_back(atts[i], atts[i + 1]);
    }
    XmlNode* raw = node.get();
    if (self->stack.empty()) {
      self->root = std::move(node);
    } else {
      self->stack.back()->children.push_back(std::move(node));
    }
    self->stack.push_back(raw);
  }

  static void on_end(void* user, const XML_Char*) {
    static_cast<TreeBuilder*>(user)->stack.pop_back();
  }
};

std::unique_ptr<XmlNode> parse_xml(std::istream& input) {
  std::unique_ptr<XML_ParserStruct, decltype(&XML_ParserFree)> parser(
      XML_ParserCreate("UTF-8"), &XML_ParserFree);
  if (!parser) throw Error(ErrorKind::io, "cannot allocate XML parser");
  TreeBuilder builder;
  builder.parser = parser.get();
  XML_SetUserData(parser.get(), &builder);
  XML_SetElementHandler(parser.get(), &TreeBuilder::on_start, &TreeBuilder::on_end);

  std::vector<char> buffer(1 << 16);
  bool done = false;
  while (!done) {
    input.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    const auto got = input.gcount();
    if (input.bad()) throw Error(ErrorKind::io, "read failure while parsing XES");
    done = got < static_cast<std::streamsize>(buffer.size());
    if (XML_Parse(parser.get(), buffer.data(), static_cast<int>(got), done) ==
        XML_STATUS_ERROR) {
      std::ostringstream msg;
      msg << "malformed XML at line " << XML_GetCurrentLineNumber(parser.get())
          << ", column " << XML_GetCurrentColumnNumber(parser.get()) + 1 << ": "
          << XML_ErrorString(XML_GetErrorCode(parser.get()));
      throw Error(ErrorKind::parse, msg.str());
    }
  }
  if (!builder.root) throw Error(ErrorKind::parse, "empty XML document");
  return std::move(builder.root);
}

void escape_xml(std::ostream& out, std::string_view text) {
  for (const char c : text) {
    switch (c) {
      case '&': out << "&amp;"; break;
      case '<': out << "&lt;"; break;
      case '>': out << "&gt;"; break;
      case '"': out << "&quot;"; break;
      case '\'': out << "&apos;"; break;
      case '\n': out << "&#10;"; break;
      case '\r': out << "&#13;"; break;
      case '\t': out << "&#9;"; break;
      default: out << c;
    }
  }
}

void serialize_node(std::ostream& out, const XmlNode& node) {
  out << '<' << node.name;
  for (const auto& [k, v] : node.attrs) {
    out << ' ' << k << "=\"";
    escape_xml(out, v);
    out << '"';
  }
  if (node.children.empty()) {
    out << "/>";
    return;
  }
  out << '>';
  for (const auto& child : node.children) serialize_node(out, *child);
  out << "</" << node.name << '>';
}

std::string where(const XmlNode& node) {
  return "line " + std::to_string(node.line) + ", column " + std::to_string(node.column);
}

bool is_attribute_element(std::string_view name) {
  return name == "string" || name == "date" || name == "int" || name == "float" ||
         name == "boolean" || name == "list" || name == "container" || name == "id";
}

std::pair<std::string, AttributeValue> read_attribute(const XmlNode& node) {
  const std::string* key = node.attr("key");
  if (key == nullptr) {
    throw Error(ErrorKind::parse,
                "<" + node.name + "> without key attribute at " + where(node));
  }
  const bool simple = node.name == "string" || node.name == "date" || node.name == "int" ||
                      node.name == "float" || node.name == "boolean";
  if (!simple || !node.children.empty()) {
    std::ostringstream raw;
    serialize_node(raw, node);
    return {*key, OpaqueValue{raw.str()}};
  }
  const std::string* value = node.attr("value");
  if (value == nullptr) {
    throw Error(ErrorKind::parse, "<" + node.name + " key=\"" + *key +
                                      "\"> without value at " + where(node));
  }
  auto bad = [&](std::string_view what) {
    return Error(ErrorKind::parse, "invalid " + std::string(what) + " value \"" + *value +
                                       "\" for key \"" + *key + "\" at " + where(node));
  };
  if (node.name == "string") return {*key, *value};
  if (node.name == "date") {
    const auto ts = parse_timestamp(*value);
    if (!ts) throw bad("date");
    return {*key, *ts};
  }
  if (node.name == "int") {
    std::int64_t v = 0;
    const auto res = std::from_chars(value->data(), value->data() + value->size(), v);
    if (res.ec != std::errc{} || res.ptr != value->data() + value->size()) throw bad("int");
    return {*key, v};
  }
  if (node.name == "float") {
    double v = 0;
    const char* first = value->data();
    if (!value->empty() && *first == '+') ++first;
    const auto res = std::from_chars(first, value->data() + value->size(), v);
    if (res.ec != std::errc{} || res.ptr != value->data() + value->size()) throw bad("float");
    return {*key, v};
  }
  std::string lower = *value;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "true" || lower == "1") return {*key, true};
  if (lower == "false" || lower == "0") return {*key, false};
  throw bad("boolean");
}

void read_attribute_into(AttributeMap& map, const XmlNode& node) {
  auto [key, value] = read_attribute(node);
  map.set(std::move(key), std::move(value));
}

std::vector<std::string> split_classifier_keys(const std::string& keys) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < keys.size()) {
    if (keys[i] == ' ' || keys[i] == '\t' || keys[i] == '\n') {
      ++i;
      continue;
    }
    if (keys[i] == '\'') {
      const auto close = keys.find('\'', i + 1);
      if (close == std::string::npos) {
        throw Error(ErrorKind::parse, "unterminated quote in classifier keys \"" + keys + "\"");
      }
      out.push_back(keys.substr(i + 1, close - i - 1));
      i = close + 1;
    } else {
      std::size_t j = i;
      while (j < keys.size() && keys[j] != ' ' && keys[j] != '\t' && keys[j] != '\n') ++j;
      out.push_back(keys.substr(i, j - i));
      i = j;
    }
  }
  return out;
}

std::string join_classifier_keys(const std::vector<std::string>& keys) {
  std::string out;
  for (const auto& k : keys) {
    if (!out.empty()) out += ' ';
    if (k.find(' ') != std::string::npos) {
      out += '\'' + k + '\'';
    } else {
      out += k;
    }
  }
  return out;
}

// Returns an omission reason, or empty when the attribute set is complete.
std::string check_complete(const AttributeMap& attrs, const AttributeMap& declared,
                           std::string_view scope) {
  for (const auto& [key, decl] : declared) {
    const AttributeValue* v = attrs.find(key);
    if (v == nullptr) return std::string(scope) + " missing declared attribute \"" + key + "\"";
    if (type_of(*v) != type_of(decl)) {
      return std::string(scope) + " attribute \"" + key + "\" has type " +
             std::string(to_string(type_of(*v))) + ", declared " +
             std::string(to_string(type_of(decl)));
    }
  }
  return {};
}

}  // namespace

ParseResult parse_xes(std::istream& input, std::string source_name) {
  const auto root = parse_xml(input);
  if (root->name != "log") {
    throw Error(ErrorKind::parse, "root element is <" + root->name + ">, expected <log>");
  }
  ParseResult result;
  EventLog& log = result.log;
  log.source_name = std::move(source_name);
  log.log_xml_attributes = root->attrs;

  std::vector<const XmlNode*> trace_nodes;
  for (const auto& child : root->children) {
    const XmlNode& node = *child;
    if (node.name == "extension") {
      Extension ext;
      if (const auto* v = node.attr("name")) ext.name = *v;
      if (const auto* v = node.attr("prefix")) ext.prefix = *v;
      if (const auto* v = node.attr("uri")) ext.uri = *v;
      log.extensions.push_back(std::move(ext));
    } else if (node.name == "global") {
      const std::string* scope = node.attr("scope");
      const std::string scope_name = scope ? *scope : "event";
      AttributeMap* target = nullptr;
      if (scope_name == "event") {
        target = &log.global_event_attrs;
      } else if (scope_name == "trace") {
        target = &log.global_trace_attrs;
      } else {
        throw Error(ErrorKind::parse,
                    "unknown global scope \"" + scope_name + "\" at " + where(node));
      }
      for (const auto& decl : node.children) {
        if (!is_attribute_element(decl->name)) {
          throw Error(ErrorKind::parse, "unknown attribute element <" + decl->name + "> at " +
                                            where(*decl));
        }
        read_attribute_into(*target, *decl);
      }
    } else if (node.name == "classifier") {
      Classifier c;
      if (const auto* v = node.attr("name")) c.name = *v;
      const std::string* keys = node.attr("keys");
      if (keys == nullptr) {
        throw Error(ErrorKind::parse, "classifier without keys at " + where(node));
      }
      c.keys = split_classifier_keys(*keys);
      log.classifiers.push_back(std::move(c));
    } else if (node.name == "trace") {
      trace_nodes.push_back(&node);
    } else if (is_attribute_element(node.name)) {
      read_attribute_into(log.attributes, node);
    } else {
      throw Error(ErrorKind::parse,
                  "unknown element <" + node.name + "> in <log> at " + where(node));
    }
  }

  for (const auto& c : log.classifiers) {
    if (c.keys.empty()) {
      throw Error(ErrorKind::schema, "classifier \"" + c.name + "\" has no keys");
    }
    for (const auto& key : c.keys) {
      if (!log.global_event_attrs.contains(key)) {
        throw Error(ErrorKind::schema, "classifier \"" + c.name +
                                           "\" references undeclared event attribute \"" +
                                           key + "\"");
      }
    }
  }

  std::vector<std::string> date_keys;
  for (const auto& [key, decl] : log.global_event_attrs) {
    if (type_of(decl) == AttributeType::timestamp) date_keys.push_back(key);
  }

  for (std::size_t pos = 0; pos < trace_nodes.size(); ++pos) {
    const XmlNode& tnode = *trace_nodes[pos];
    Trace trace;
    for (const auto& child : tnode.children) {
      if (child->name == "event") {
        Event event;
        for (const auto& attr : child->children) {
          if (!is_attribute_element(attr->name)) {
            throw Error(ErrorKind::parse, "unknown attribute element <" + attr->name +
                                              "> at " + where(*attr));
          }
          read_attribute_into(event.attributes, *attr);
        }
        trace.events.push_back(std::move(event));
      } else if (is_attribute_element(child->name)) {
        read_attribute_into(trace.attributes, *child);
      } else {
        throw Error(ErrorKind::parse,
                    "unknown element <" + child->name + "> in <trace> at " + where(*child));
      }
    }

    const std::string id = trace_id(trace, pos);
    std::string reason;
    if (trace.events.empty()) {
      reason = "empty trace";
    } else {
      reason = check_complete(trace.attributes, log.global_trace_attrs, "trace");
      for (std::size_t e = 0; reason.empty() && e < trace.events.size(); ++e) {
        reason = check_complete(trace.events[e].attributes, log.global_event_attrs,
                                "event " + std::to_string(e));
      }
    }
    if (!reason.empty()) {
      result.report.omitted.push_back({id, reason});
      continue;
    }
    for (const auto& key : date_keys) {
      for (std::size_t e = 1; e < trace.events.size(); ++e) {
        const auto prev = std::get<Timestamp>(*trace.events[e - 1].attributes.find(key));
        const auto curr = std::get<Timestamp>(*trace.events[e].attributes.find(key));
        if (curr < prev) {
          result.report.warnings.push_back("trace " + id + ": \"" + key +
                                           "\" decreases at event " + std::to_string(e));
          break;
        }
      }
    }
    log.traces.push_back(std::move(trace));
  }
  return result;
}

ParseResult parse_xes_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path);
  return parse_xes(in, path);
}

namespace {

void write_attribute(std::ostream& out, const std::string& key, const AttributeValue& value,
                     int indent) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  if (const auto* opaque = std::get_if<OpaqueValue>(&value)) {
    out << pad << opaque->xml << '\n';
    return;
  }
  out << pad << '<' << to_string(type_of(value)) << " key=\"";
  escape_xml(out, key);
  out << "\" value=\"";
  escape_xml(out, display(value));
  out << "\"/>\n";
}

void write_attributes(std::ostream& out, const AttributeMap& attrs, int indent) {
  for (const auto& [k, v] : attrs) write_attribute(out, k, v, indent);
}

}  // namespace

void write_xes(const EventLog& log, std::ostream& out) {
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<log";
  for (const auto& [k, v] : log.log_xml_attributes) {
    out << ' ' << k << "=\"";
    escape_xml(out, v);
    out << '"';
  }
  out << ">\n";
  for (const auto& ext : log.extensions) {
    out << "  <extension name=\"";
    escape_xml(out, ext.name);
    out << "\" prefix=\"";
    escape_xml(out, ext.prefix);
    out << "\" uri=\"";
    escape_xml(out, ext.uri);
    out << "\"/>\n";
  }
  if (!log.global_trace_attrs.empty()) {
    out << "  <global scope=\"trace\">\n";
    write_attributes(out, log.global_trace_attrs, 2);
    out << "  </global>\n";
  }
  if (!log.global_event_attrs.empty()) {
    out << "  <global scope=\"event\">\n";
    write_attributes(out, log.global_event_attrs, 2);
    out << "  </global>\n";
  }
  for (const auto& c : log.classifiers) {
    out << "  <classifier name=\"";
    escape_xml(out, c.name);
    out << "\" keys=\"";
    escape_xml(out, join_classifier_keys(c.keys));
    out << "\"/>\n";
  }
  write_attributes(out, log.attributes, 1);
  for (const auto& trace : log.traces) {
    out << "  <trace>\n";
    write_attributes(out, trace.attributes, 2);
    for (const auto& event : trace.events) {
      out << "    <event>\n";
      write_attributes(out, event.attributes, 3);
      out << "    </event>\n";
    }
    out << "  </trace>\n";
  }
  out << "</log>\n";
  out.flush();
  if (!out) throw Error(ErrorKind::io, "write failure while serializing XES");
}

void write_xes_file(const EventLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open " + path + " for writing");
  write_xes(log, out);
}

AttributeValue join_classifier(const Event& event, const Classifier& classifier) {
  if (classifier.keys.empty()) {
    throw Error(ErrorKind::schema, "classifier \"" + classifier.name + "\" has no keys");
  }
  bool any_text = false;
  bool any_numeric = false;
  std::vector<const AttributeValue*> values;
  values.reserve(classifier.keys.size());
  for (const auto& key : classifier.keys) {
    const AttributeValue* v = event.attributes.find(key);
    if (v == nullptr) {
      throw Error(ErrorKind::incomplete_event,
                  "event lacks \"" + key + "\" required by classifier \"" + classifier.name + "\"");
    }
    const AttributeType t = type_of(*v);
    if (t == AttributeType::text) {
      any_text = true;
    } else if (is_numeric(t)) {
      any_numeric = true;
    } else {
      throw Error(ErrorKind::unsupported, "classifier \"" + classifier.name + "\" key \"" + key +
                                              "\" has unsupported type " +
                                              std::string(to_string(t)));
    }
    values.push_back(v);
  }
  if (any_text && any_numeric) {
    throw Error(ErrorKind::unsupported,
                "classifier \"" + classifier.name + "\" mixes string and numeric keys");
  }
  if (any_text) {
    std::string joined;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i > 0) joined += kJoinSeparator;
      joined += std::get<std::string>(*values[i]);
    }
    return joined;
  }
  double product = 1.0;
  for (const auto* v : values) {
    if (const auto* i = std::get_if<std::int64_t>(v)) {
      product *= static_cast<double>(*i);
    } else {
      product *= std::get<double>(*v);
    }
  }
  return product;
}

}  // namespace xespred
