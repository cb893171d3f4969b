#pragma once

#include <memory>
#include <string>

#include "vqg/service.hpp"

namespace vqg {

/// Serves a SessionManager over HTTP:
///   POST /sessions, POST /sessions/{id}/step, POST /sessions/{id}/guess,
///   GET /study/summary, GET /healthz
class HttpServer {
 public:
  explicit HttpServer(SessionManager& sessions);
  ~HttpServer();

  /// Binds `host:port` (port 0 picks a free port) and returns the port, or
  /// -1 on failure.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  bool listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace vqg
