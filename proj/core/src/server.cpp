#include "cws/server.hpp"

#include <sstream>
#include <thread>

#include "cws/error.hpp"
#include "cws/service.hpp"

// After the project headers: <resolv.h> defines a _res macro that collides with Eigen.
#include <httplib.h>

namespace cws {

using protocol::Json;

struct CwsServer::Impl {
  CwsService& service;
  ServerOptions options;
  httplib::Server http;
  std::thread worker;
  int bound_port = 0;

  Impl(CwsService& s, ServerOptions o) : service(s), options(std::move(o)) {}

  static void send_json(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void send_error(httplib::Response& res, const CwsError& e) {
    send_json(res, http_status(e.code()), protocol::encode(protocol::ErrorBody{e.code(), e.what(), e.details()}));
  }

  bool authorized(const httplib::Request& req) const {
    if (options.token.empty()) return true;
    return req.get_header_value("Authorization") == "Bearer " + options.token;
  }

  template <typename Fn>
  httplib::Server::Handler guarded(Fn fn) {
    return [this, fn](const httplib::Request& req, httplib::Response& res) {
      try {
        if (!authorized(req)) throw CwsError(ErrorCode::kUnauthorized, "missing or invalid bearer token");
        fn(req, res);
      } catch (const CwsError& e) {
        send_error(res, e);
      } catch (const std::exception& e) {
        send_error(res, CwsError(ErrorCode::kInternal, e.what()));
      }
    };
  }

  void install_routes() {
    http.Get("/v1/strategies", guarded([this](const httplib::Request&, httplib::Response& res) {
               send_json(res, 200, protocol::encode_strategies(service.strategies()));
             }));

    http.Post("/v1/workflow", guarded([this](const httplib::Request& req, httplib::Response& res) {
                const auto request = protocol::decode_register_request(protocol::parse(req.body));
                send_json(res, 201, protocol::encode(service.register_workflow(request)));
              }));

    http.Post(R"(/v1/workflow/([^/]+)/tasks)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                const auto batch = protocol::decode_submit_request(protocol::parse(req.body));
                const auto accepted = service.submit_tasks(req.matches[1], batch.tasks);
                send_json(res, 200, protocol::encode(protocol::SubmitResponse{accepted}));
              }));

    http.Patch(R"(/v1/workflow/([^/]+)/dag)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 service.push_dag_edges(req.matches[1], protocol::decode_dag_patch(protocol::parse(req.body)));
                 send_json(res, 200, Json{{"ack", true}});
               }));

    http.Get(R"(/v1/workflow/([^/]+)/assignments)",
             guarded([this](const httplib::Request& req, httplib::Response& res) {
               std::int64_t after = 0;
               if (req.has_param("after")) {
                 try {
                   after = std::stoll(req.get_param_value("after"));
                 } catch (const std::exception&) {
                   throw CwsError(ErrorCode::kValidation, "query parameter 'after' must be an integer");
                 }
               }
               const std::string wait = req.has_param("wait") ? req.get_param_value("wait") : "false";
               if (wait != "true" && wait != "false" && wait != "1" && wait != "0") {
                 throw CwsError(ErrorCode::kValidation, "query parameter 'wait' must be a boolean");
               }
               const auto response = service.fetch_assignments(req.matches[1], after, wait == "true" || wait == "1");
               send_json(res, 200, protocol::encode(response));
             }));

    http.Post(R"(/v1/workflow/([^/]+)/tasks/([^/]+)/status)",
              guarded([this](const httplib::Request& req, httplib::Response& res) {
                auto report = protocol::decode_status_report(protocol::parse(req.body));
                if (report.task_id != req.matches[2]) {
                  throw CwsError(ErrorCode::kValidation, "task_id in body does not match the path");
                }
                send_json(res, 200, protocol::encode(service.report_status(req.matches[1], report)));
              }));

    http.Delete(R"(/v1/workflow/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  send_json(res, 200, protocol::encode(service.close_workflow(req.matches[1])));
                }));

    http.Get(R"(/v1/workflow/([^/]+)/provenance)",
             guarded([this](const httplib::Request& req, httplib::Response& res) {
               std::ostringstream out;
               service.provenance().export_trace(req.matches[1], out);
               res.status = 200;
               res.set_content(out.str(), "application/x-ndjson");
             }));

    http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      const ErrorCode code = res.status == 404 ? ErrorCode::kNotFound : ErrorCode::kValidation;
      send_json(res, res.status, protocol::encode(protocol::ErrorBody{code, "no such endpoint", {}}));
    });
  }

  int bind() {
    const int threads = options.worker_threads;
    http.new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<std::size_t>(threads)); };
    http.set_tcp_nodelay(true);
    if (options.port == 0) {
      bound_port = http.bind_to_any_port(options.host);
    } else if (http.bind_to_port(options.host, options.port)) {
      bound_port = options.port;
    } else {
      bound_port = -1;
    }
    if (bound_port <= 0) {
      throw CwsError(ErrorCode::kTransport,
                     "cannot bind " + options.host + ":" + std::to_string(options.port));
    }
    return bound_port;
  }
};

CwsServer::CwsServer(CwsService& service, ServerOptions options)
    : impl_(std::make_unique<Impl>(service, std::move(options))) {
  impl_->install_routes();
}

CwsServer::~CwsServer() { stop(); }

int CwsServer::start() {
  const int port = impl_->bind();
  impl_->worker = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
  return port;
}

void CwsServer::run() {
  impl_->bind();
  impl_->http.listen_after_bind();
}

void CwsServer::stop() {
  if (!impl_) return;
  impl_->service.shutdown();
  impl_->http.stop();
  if (impl_->worker.joinable()) impl_->worker.join();
}

int CwsServer::port() const { return impl_->bound_port; }

}  // namespace cws
