#include "xespred/service.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstring>

#include "json.hpp"
#include "xespred/error.hpp"
#include "xespred/prediction.hpp"

namespace xespred {

using json = nlohmann::json;

namespace {

constexpr std::size_t kMaxLine = 1 << 20;

[[noreturn]] void request_error(const std::string& message) {
  throw Error(ErrorKind::config, message);
}

AttributeValue typed_value(const std::string& key, const json& v,
                           const std::map<std::string, AttributeType>& types) {
  const auto it = types.find(key);
  if (it == types.end()) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>();
    if (v.is_number_integer()) return v.get<std::int64_t>();
    if (v.is_number()) return v.get<double>();
    request_error("attribute \"" + key + "\" has an unsupported JSON type");
  }
  switch (it->second) {
    case AttributeType::text:
      if (v.is_string()) return v.get<std::string>();
      break;
    case AttributeType::timestamp:
      if (v.is_string()) {
        if (auto ts = parse_timestamp(v.get<std::string>())) return *ts;
        request_error("attribute \"" + key + "\": invalid timestamp");
      }
      break;
    case AttributeType::integer:
      if (v.is_number_integer()) return v.get<std::int64_t>();
      break;
    case AttributeType::real:
      if (v.is_number()) return v.get<double>();
      break;
    case AttributeType::boolean:
      if (v.is_boolean()) return v.get<bool>();
      break;
    case AttributeType::opaque:
      if (v.is_string()) return OpaqueValue{v.get<std::string>()};
      break;
  }
  request_error("attribute \"" + key + "\" must be of type " + std::string(to_string(it->second)));
}

AttributeMap typed_map(const json& obj, const std::map<std::string, AttributeType>& types,
                       const std::string& what) {
  if (!obj.is_object()) request_error(what + " must be an object");
  AttributeMap out;
  for (const auto& [k, v] : obj.items()) out.set(k, typed_value(k, v, types));
  return out;
}

json to_json(const AttributeValue& value) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Timestamp>) {
          return format_timestamp(v);
        } else if constexpr (std::is_same_v<T, OpaqueValue>) {
          return v.xml;
        } else {
          return v;
        }
      },
      value);
}

std::string error_line(std::string_view kind, std::string_view message) {
  return json{{"error", kind}, {"message", message}}.dump();
}

}  // namespace

std::string handle_request_line(const FrozenModel& model, std::string_view line) {
  json request;
  try {
    request = json::parse(line);
  } catch (const json::exception& e) {
    return error_line("parse", e.what());
  }
  try {
    if (!request.is_object()) request_error("request must be a JSON object");
    for (const auto& [k, v] : request.items()) {
      static const std::vector<std::string> known{"prefix", "trace", "max_steps", "stop_on_eoc",
                                                  "mode", "temperature", "seed"};
      if (std::find(known.begin(), known.end(), k) == known.end()) {
        request_error("unknown request field \"" + k + "\"");
      }
    }
    if (!request.contains("prefix") || !request["prefix"].is_array() ||
        request["prefix"].empty()) {
      request_error("\"prefix\" must be a non-empty array of events");
    }
    Trace trace;
    if (request.contains("trace")) {
      trace.attributes = typed_map(request["trace"], model.trace_attribute_types, "trace");
    }
    for (const auto& e : request["prefix"]) {
      trace.events.push_back(Event{typed_map(e, model.event_attribute_types, "prefix event")});
    }

    PredictionOptions options;
    if (request.contains("max_steps")) {
      const auto& v = request["max_steps"];
      if (!v.is_number_integer() || v.get<std::int64_t>() < 1) {
        request_error("\"max_steps\" must be an integer >= 1");
      }
      options.max_steps = v.get<std::size_t>();
    }
    if (request.contains("stop_on_eoc")) {
      if (!request["stop_on_eoc"].is_boolean()) request_error("\"stop_on_eoc\" must be a boolean");
      options.stop_on_eoc = request["stop_on_eoc"].get<bool>();
    }
    if (request.contains("mode")) {
      if (!request["mode"].is_string()) request_error("\"mode\" must be a string");
      options.mode = parse_decode_mode(request["mode"].get<std::string>());
    }
    if (request.contains("temperature")) {
      if (!request["temperature"].is_number()) request_error("\"temperature\" must be a number");
      options.temperature = request["temperature"].get<double>();
    }
    if (request.contains("seed")) {
      if (!request["seed"].is_number_unsigned()) {
        request_error("\"seed\" must be a non-negative integer");
      }
      options.seed = request["seed"].get<std::uint64_t>();
    }

    const std::uint64_t sample_id = 0;
    const auto suffixes = predict_traces(model, std::span<const Trace>(&trace, 1),
                                         std::span<const std::uint64_t>(&sample_id, 1), options);
    json suffix = json::array();
    for (const auto& g : suffixes.front().events) {
      json event = json::object();
      for (const auto& [k, v] : g.event.attributes) event[k] = to_json(v);
      suffix.push_back(event);
    }
    return json{{"suffix", suffix}, {"stopped", to_string(suffixes.front().stopped)}}.dump();
  } catch (const Error& e) {
    const std::string_view kind = e.kind() == ErrorKind::config ? "request" : to_string(e.kind());
    return error_line(kind, e.what());
  } catch (const std::exception& e) {
    return error_line("internal", e.what());
  }
}

std::pair<std::string, std::uint16_t> parse_listen_address(std::string_view address) {
  const auto colon = address.rfind(':');
  if (colon == std::string_view::npos) {
    throw Error(ErrorKind::config, "listen address must be HOST:PORT");
  }
  std::string host(address.substr(0, colon));
  if (host.size() >= 2 && host.front() == '[' && host.back() == ']') {
    host = host.substr(1, host.size() - 2);
  }
  const auto port_text = address.substr(colon + 1);
  unsigned port = 0;
  const auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (ec != std::errc() || ptr != port_text.data() + port_text.size() || port > 65535) {
    throw Error(ErrorKind::config, "invalid port \"" + std::string(port_text) + "\"");
  }
  return {host.empty() ? "0.0.0.0" : host, static_cast<std::uint16_t>(port)};
}

PredictionServer::PredictionServer(std::shared_ptr<const FrozenModel> model,
                                   const std::string& host, std::uint16_t port)
    : model_(std::move(model)) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE | AI_NUMERICSERV;
  addrinfo* found = nullptr;
  const std::string service = std::to_string(port);
  const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &found);
  if (rc != 0) {
    throw Error(ErrorKind::io, "cannot resolve " + host + ": " + ::gai_strerror(rc));
  }
  std::string last_error = "no usable address";
  for (addrinfo* ai = found; ai != nullptr; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    const int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd, 64) == 0) {
      listen_fd_ = fd;
      break;
    }
    last_error = std::strerror(errno);
    ::close(fd);
  }
  ::freeaddrinfo(found);
  if (listen_fd_ < 0) {
    throw Error(ErrorKind::io, "cannot listen on " + host + ":" + service + ": " + last_error);
  }
  sockaddr_storage bound{};
  socklen_t len = sizeof bound;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  if (bound.ss_family == AF_INET) {
    port_ = ntohs(reinterpret_cast<sockaddr_in*>(&bound)->sin_port);
  } else {
    port_ = ntohs(reinterpret_cast<sockaddr_in6*>(&bound)->sin6_port);
  }
}

PredictionServer::~PredictionServer() { stop(); }

void PredictionServer::run() {
  while (!stopping_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (stopping_) break;
      if (errno == EINTR || errno == ECONNABORTED) continue;
      break;
    }
    std::lock_guard lock(mutex_);
    if (stopping_) {
      ::close(fd);
      break;
    }
    connections_.push_back(fd);
    workers_.emplace_back([this, fd] { serve_connection(fd); });
  }
}

void PredictionServer::start() {
  accept_thread_ = std::thread([this] { run(); });
}

void PredictionServer::stop() {
  if (stopping_.exchange(true)) return;
  if (listen_fd_ >= 0) {
    ::shutdown(listen_fd_, SHUT_RDWR);
  }
  if (accept_thread_.joinable()) accept_thread_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(mutex_);
    for (const int fd : connections_) ::shutdown(fd, SHUT_RDWR);
    workers.swap(workers_);
  }
  for (auto& t : workers) t.join();
  if (listen_fd_ >= 0) ::close(listen_fd_);
  listen_fd_ = -1;
}

void PredictionServer::serve_connection(int fd) {
  std::string buffer;
  char chunk[4096];
  bool open = true;
  auto send_all = [&](const std::string& text) {
    std::size_t sent = 0;
    while (sent < text.size()) {
      const auto n = ::send(fd, text.data() + sent, text.size() - sent, MSG_NOSIGNAL);
      if (n <= 0) return false;
      sent += static_cast<std::size_t>(n);
    }
    return true;
  };
  while (open) {
    const auto n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t newline;
    while ((newline = buffer.find('\n')) != std::string::npos) {
      std::string line = buffer.substr(0, newline);
      buffer.erase(0, newline + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      if (!send_all(handle_request_line(*model_, line) + "\n")) {
        open = false;
        break;
      }
    }
    if (buffer.size() > kMaxLine) {
      send_all(error_line("request", "line exceeds 1 MiB") + "\n");
      break;
    }
  }
  std::lock_guard lock(mutex_);
  connections_.erase(std::remove(connections_.begin(), connections_.end(), fd), connections_.end());
  ::close(fd);
}

}  // namespace xespred
