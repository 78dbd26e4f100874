#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "xespred/frozen.hpp"

namespace xespred {

/// Answers one JSON request line with one JSON response line (no newline).
/// Failures are reported in-band as {"error": kind, "message": text}.
std::string handle_request_line(const FrozenModel& model, std::string_view line);

/// JSON-lines prediction service over TCP, one thread per connection.
class PredictionServer {
 public:
  /// Binds and listens immediately; port 0 picks a free port.
  PredictionServer(std::shared_ptr<const FrozenModel> model, const std::string& host,
                   std::uint16_t port);
  ~PredictionServer();

  PredictionServer(const PredictionServer&) = delete;
  PredictionServer& operator=(const PredictionServer&) = delete;

  std::uint16_t port() const noexcept { return port_; }

  /// Accepts connections until stop() is called.
  void run();
  /// Runs the accept loop on a background thread.
  void start();
  /// Closes the listener and all open connections, then joins the threads.
  void stop();

 private:
  void serve_connection(int fd);

  std::shared_ptr<const FrozenModel> model_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread accept_thread_;
  std::mutex mutex_;
  std::vector<std::thread> workers_;
  std::vector<int> connections_;
};

/// Splits "HOST:PORT".
std::pair<std::string, std::uint16_t> parse_listen_address(std::string_view address);

}  // namespace xespred
