#include "megart/control.hpp"

#include <poll.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <future>
#include <fstream>
#include <sstream>

#include "megart/dsl.hpp"
#include "megart/patch.hpp"
#include "megart/snapshot.hpp"

namespace megart {

namespace {

std::vector<std::string> words(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

std::string error_response(const std::string& code, const std::string& message) {
  std::string m = message;
  // EngineError::what() already starts with the code.
  if (m.rfind(code + ": ", 0) == 0) m = m.substr(code.size() + 2);
  for (char& c : m)
    if (c == '\n') c = ' ';
  return "error " + code + " " + m;
}

}  // namespace

std::string ControlHandler::execute(const std::string& line, std::optional<Ticks> at) {
  std::vector<std::string> w = words(line);
  if (w.empty()) return error_response("E-PROTOCOL", "empty command");
  const std::string& cmd = w[0];
  auto arity = [&](std::size_t n) {
    if (w.size() != n + 1)
      throw EngineError("E-PROTOCOL", "'" + cmd + "' takes " + std::to_string(n) + " argument(s)");
  };
  auto need_harness = [&] {
    if (!harness_) throw EngineError("E-PROTOCOL", "'" + cmd + "' needs the harness");
  };
  const Ticks t = at.value_or(engine_.now());
  try {
    if (engine_.busy()) throw EngineError("E-NOT-QUIESCENT", "control command during a run");
    if (cmd == "list") {
      arity(0);
      // A blank line ends a response on the wire, so none may appear inside.
      std::string ld = serialize_ld(engine_.architecture());
      for (std::size_t at; (at = ld.find("\n\n")) != std::string::npos;) ld.erase(at, 1);
      while (!ld.empty() && ld.back() == '\n') ld.pop_back();
      return "ok\n" + ld;
    }
    if (cmd == "snapshot") {
      arity(1);
      std::string text = export_snapshot_text(engine_);
      std::ofstream out(w[1], std::ios::binary | std::ios::trunc);
      if (!(out << text)) throw EngineError("E-IO", "cannot write '" + w[1] + "'");
      return "ok snapshot " + w[1];
    }
    if (cmd == "patch") {
      arity(1);
      Parsed<Patch> p = load_patch_file(w[1]);
      if (!p) {
        const Diagnostic& d = p.diagnostics.front();
        return error_response(d.code, format_diagnostic(d));
      }
      PatchReport r = apply_patch(engine_, *p);
      return "ok patch " + quote(r.name) + " steps=" + std::to_string(r.steps);
    }
    if (cmd == "rebind") {
      arity(2);
      auto dot = w[1].find('.');
      if (dot == std::string::npos) throw EngineError("E-PROTOCOL", "expected <module.op>");
      std::string target = w[2];
      bool is_key = target.size() >= 2 && target.front() == '"' && target.back() == '"';
      if (is_key) target = target.substr(1, target.size() - 2);
      engine_.rebind_use(w[1].substr(0, dot), w[1].substr(dot + 1), target, is_key);
      return "ok rebind " + w[1] + " -> " + w[2];
    }
    if (cmd == "inject") {
      arity(2);
      need_harness();
      engine_.on_event(harness_->inject_failure(w[1], w[2], t));
      return "ok inject " + w[1] + " " + w[2];
    }
    if (cmd == "load") {
      arity(1);
      need_harness();
      double v = 0;
      try {
        std::size_t used = 0;
        v = std::stod(w[1], &used);
        if (used != w[1].size()) throw std::invalid_argument(w[1]);
      } catch (const std::exception&) {
        throw EngineError("E-PROTOCOL", "load expects a number");
      }
      if (auto e = harness_->set_load(v, t)) engine_.on_event(*e);
      return "ok load " + w[1];
    }
    if (cmd == "request") {
      arity(0);
      need_harness();
      auto e = harness_->request(t);
      if (e) engine_.on_event(*e);
      return e ? "ok request " + e->type : std::string("ok request");
    }
    if (cmd == "query") {
      arity(1);
      ReflectionView v = engine_.reflect_query(w[1]);
      Json j{{"instance", v.instance},   {"megamodel", v.megamodel}, {"layer", v.layer},
             {"models", v.model_bindings}, {"runCount", v.run_count}, {"lastFinalState", v.last_final_state},
             {"exitCounts", v.exit_counts}};
      return "ok " + j.dump();
    }
    if (cmd == "stop") {
      arity(0);
      engine_.stop();
      return "ok stop";
    }
    return error_response("E-PROTOCOL", "unknown command '" + cmd + "'");
  } catch (const EngineError& e) {
    return error_response(e.code(), e.what());
  }
}

std::string submit_command(Engine& engine, ControlHandler& handler, const std::string& line) {
  auto done = std::make_shared<std::promise<std::string>>();
  std::future<std::string> f = done->get_future();
  engine.post([&handler, line, done](Engine&) { done->set_value(handler.execute(line)); });
  while (f.wait_for(std::chrono::milliseconds(50)) != std::future_status::ready)
    if (engine.stopped()) return error_response("E-STOPPED", "engine stopped");
  return f.get();
}

ControlServer::ControlServer(Engine& engine, ControlHandler& handler, std::string addr)
    : engine_(engine), handler_(handler), addr_(std::move(addr)) {
  if (addr_.empty()) {
    thread_ = std::thread([this] { serve_stream(STDIN_FILENO, STDOUT_FILENO); });
    return;
  }
  sockaddr_un sa{};
  if (addr_.size() >= sizeof sa.sun_path) {
    error_ = "socket path too long";
    return;
  }
  listen_fd_ = ::socket(AF_UNIX, SOCK_STREAM, 0);
  sa.sun_family = AF_UNIX;
  std::strncpy(sa.sun_path, addr_.c_str(), sizeof sa.sun_path - 1);
  ::unlink(addr_.c_str());
  if (listen_fd_ < 0 || ::bind(listen_fd_, reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0 ||
      ::listen(listen_fd_, 4) != 0) {
    error_ = std::string("cannot listen on '") + addr_ + "': " + std::strerror(errno);
    if (listen_fd_ >= 0) ::close(listen_fd_);
    listen_fd_ = -1;
    return;
  }
  thread_ = std::thread([this] { serve_socket(); });
}

ControlServer::~ControlServer() { shutdown(); }

void ControlServer::shutdown() {
  done_ = true;
  if (thread_.joinable()) thread_.join();
  if (listen_fd_ >= 0) {
    ::close(listen_fd_);
    ::unlink(addr_.c_str());
    listen_fd_ = -1;
  }
}

void ControlServer::serve_stream(int in_fd, int out_fd) {
  std::string buf;
  char chunk[512];
  while (!done_ && !engine_.stopped()) {
    pollfd p{in_fd, POLLIN, 0};
    int r = ::poll(&p, 1, 100);
    if (r <= 0) continue;
    ssize_t n = ::read(in_fd, chunk, sizeof chunk);
    if (n <= 0) return;
    buf.append(chunk, static_cast<std::size_t>(n));
    for (std::size_t nl; (nl = buf.find('\n')) != std::string::npos;) {
      std::string line = buf.substr(0, nl);
      buf.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      std::string resp = submit_command(engine_, handler_, line) + "\n\n";
      for (std::size_t off = 0; off < resp.size();) {
        ssize_t m = ::write(out_fd, resp.data() + off, resp.size() - off);
        if (m <= 0) return;
        off += static_cast<std::size_t>(m);
      }
    }
  }
}

void ControlServer::serve_socket() {
  while (!done_ && !engine_.stopped()) {
    pollfd p{listen_fd_, POLLIN, 0};
    if (::poll(&p, 1, 100) <= 0) continue;
    int conn = ::accept(listen_fd_, nullptr, nullptr);
    if (conn < 0) continue;
    serve_stream(conn, conn);
    ::close(conn);
  }
}

}  // namespace megart
