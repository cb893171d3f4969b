#include "vqg/http_server.hpp"

#include <httplib.h>

namespace vqg {

struct HttpServer::Impl {
  httplib::Server server;
};

namespace {

void reply(httplib::Response& res, const ServiceResponse& r) {
  res.status = r.status;
  res.set_content(r.body, "application/json");
}

}  // namespace

HttpServer::HttpServer(SessionManager& sessions) : impl_(std::make_unique<Impl>()) {
  auto& srv = impl_->server;
  srv.Post("/sessions", [&sessions](const httplib::Request& req,
                                    httplib::Response& res) {
    reply(res, sessions.create_session(req.body));
  });
  srv.Post(R"(/sessions/([^/]+)/step)",
           [&sessions](const httplib::Request& req, httplib::Response& res) {
             reply(res, sessions.step_session(req.matches[1]));
           });
  srv.Post(R"(/sessions/([^/]+)/guess)",
           [&sessions](const httplib::Request& req, httplib::Response& res) {
             reply(res, sessions.submit_guess(req.matches[1], req.body));
           });
  srv.Get("/study/summary", [&sessions](const httplib::Request&,
                                        httplib::Response& res) {
    reply(res, sessions.study_summary());
  });
  srv.Get("/healthz", [&sessions](const httplib::Request&, httplib::Response& res) {
    reply(res, sessions.health());
  });
  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res,
                               std::exception_ptr ep) {
    std::string msg = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      msg = e.what();
    } catch (...) {
    }
    res.status = 500;
    res.set_content(R"({"error":"internal","message":")" +
                        httplib::detail::encode_url(msg) + "\"}",
                    "application/json");
  });
  // Browser clients are served from another origin.
  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  srv.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpServer::listen() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace vqg
