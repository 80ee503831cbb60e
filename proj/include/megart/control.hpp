#pragma once

// Line-oriented control commands for a running engine. A command is one
// line; the response starts with "ok" or "error CODE message" and may span
// several lines. Transports terminate each response with a blank line.
//
//   list                      the live layer diagram (.ld text)
//   snapshot <path>           export a snapshot
//   patch <path>              apply a patch file
//   rebind <module.op> <target>   target is a module or a "quoted" key
//   inject <component> <kind> fail a harness component
//   load <value>              set the harness load
//   request                   issue one client request against the harness
//   query <instance>          reflection summary as JSON
//   stop                      stop the engine loop

#include <atomic>
#include <string>
#include <thread>

#include "megart/engine.hpp"
#include "megart/harness.hpp"

namespace megart {

class ControlHandler {
 public:
  ControlHandler(Engine& engine, Harness* harness) : engine_(engine), harness_(harness) {}

  /// Runs one command. Must be called on the engine thread at a quiescent
  /// point (normally from an inbox command). `at` stamps harness events;
  /// defaults to engine time.
  std::string execute(const std::string& line, std::optional<Ticks> at = std::nullopt);

 private:
  Engine& engine_;
  Harness* harness_;
};

/// Posts `line` to the engine inbox and blocks until it has run. Returns an
/// error response if the engine stops first.
std::string submit_command(Engine& engine, ControlHandler& handler, const std::string& line);

/// Serves the control protocol on a background thread: a unix socket when
/// `addr` is non-empty, standard input otherwise.
class ControlServer {
 public:
  ControlServer(Engine& engine, ControlHandler& handler, std::string addr);
  ~ControlServer();
  ControlServer(const ControlServer&) = delete;
  ControlServer& operator=(const ControlServer&) = delete;

  /// Error text if the transport could not be opened.
  const std::string& error() const { return error_; }
  void shutdown();

 private:
  void serve_stream(int in_fd, int out_fd);
  void serve_socket();

  Engine& engine_;
  ControlHandler& handler_;
  std::string addr_;
  std::string error_;
  int listen_fd_ = -1;
  std::atomic<bool> done_{false};
  std::thread thread_;
};

}  // namespace megart
