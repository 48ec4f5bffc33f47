#include "cws/client.hpp"

#include "cws/error.hpp"
#include "cws/service.hpp"

// After the project headers: <resolv.h> defines a _res macro that collides with Eigen.
#include <httplib.h>

namespace cws {

using protocol::Json;

std::vector<std::string> InProcessClient::strategies() { return service_.strategies(); }

protocol::RegisterResponse InProcessClient::register_workflow(const protocol::RegisterRequest& request) {
  return service_.register_workflow(request);
}

std::size_t InProcessClient::submit_tasks(const std::string& workflow_id, const std::vector<TaskSpec>& batch) {
  return service_.submit_tasks(workflow_id, batch);
}

void InProcessClient::push_dag_edges(const std::string& workflow_id, const protocol::DagPatch& patch) {
  service_.push_dag_edges(workflow_id, patch);
}

protocol::AssignmentResponse InProcessClient::fetch_assignments(const std::string& workflow_id,
                                                                std::int64_t after, bool wait) {
  return service_.fetch_assignments(workflow_id, after, wait);
}

protocol::StatusAck InProcessClient::report_status(const std::string& workflow_id,
                                                   const protocol::StatusReport& report) {
  return service_.report_status(workflow_id, report);
}

protocol::WorkflowSummary InProcessClient::close_workflow(const std::string& workflow_id) {
  return service_.close_workflow(workflow_id);
}

struct HttpClient::Impl {
  std::string base_url;
  HttpClientOptions options;
  httplib::Client http;

  Impl(const std::string& url, HttpClientOptions o) : base_url(url), options(std::move(o)), http(url) {
    if (!http.is_valid()) throw CwsError(ErrorCode::kValidation, "invalid server url '" + url + "'");
    http.set_connection_timeout(options.connect_timeout);
    http.set_read_timeout(options.read_timeout);
    http.set_keep_alive(true);
    http.set_tcp_nodelay(true);
    if (!options.token.empty()) http.set_bearer_token_auth(options.token);
  }

  static std::string segment(const std::string& s) { return httplib::detail::encode_query_param(s); }

  template <typename Call>
  std::string send(const std::string& what, Call call) {
    int attempt = 0;
    for (;;) {
      httplib::Result result = call();
      if (result) {
        const auto& res = result.value();
        if (res.status >= 400) {
          protocol::ErrorBody body;
          try {
            body = protocol::decode_error(protocol::parse(res.body));
          } catch (const CwsError&) {
            throw CwsError(ErrorCode::kTransport,
                           what + ": HTTP " + std::to_string(res.status) + " with unparseable body");
          }
          throw CwsError(body.code, body.message, body.details);
        }
        return res.body;
      }
      if (attempt >= options.max_retries) {
        throw CwsError(ErrorCode::kTransport, what + " against " + base_url + " failed after " +
                                                  std::to_string(attempt) + " retries: " +
                                                  httplib::to_string(result.error()));
      }
      ++attempt;
    }
  }

  Json get(const std::string& path) {
    return protocol::parse(send("GET " + path, [&] { return http.Get(path); }));
  }
  Json post(const std::string& path, const Json& body) {
    const std::string text = body.dump();
    return protocol::parse(send("POST " + path, [&] { return http.Post(path, text, "application/json"); }));
  }
  Json patch(const std::string& path, const Json& body) {
    const std::string text = body.dump();
    return protocol::parse(send("PATCH " + path, [&] { return http.Patch(path, text, "application/json"); }));
  }
  Json del(const std::string& path) {
    return protocol::parse(send("DELETE " + path, [&] { return http.Delete(path); }));
  }
};

HttpClient::HttpClient(const std::string& base_url, HttpClientOptions options)
    : impl_(std::make_unique<Impl>(base_url, std::move(options))) {}

HttpClient::~HttpClient() = default;

std::vector<std::string> HttpClient::strategies() {
  return protocol::decode_strategies(impl_->get("/v1/strategies"));
}

protocol::RegisterResponse HttpClient::register_workflow(const protocol::RegisterRequest& request) {
  return protocol::decode_register_response(impl_->post("/v1/workflow", protocol::encode(request)));
}

std::size_t HttpClient::submit_tasks(const std::string& workflow_id, const std::vector<TaskSpec>& batch) {
  const auto path = "/v1/workflow/" + Impl::segment(workflow_id) + "/tasks";
  return protocol::decode_submit_response(impl_->post(path, protocol::encode(protocol::SubmitRequest{batch})))
      .accepted;
}

void HttpClient::push_dag_edges(const std::string& workflow_id, const protocol::DagPatch& patch) {
  impl_->patch("/v1/workflow/" + Impl::segment(workflow_id) + "/dag", protocol::encode(patch));
}

protocol::AssignmentResponse HttpClient::fetch_assignments(const std::string& workflow_id, std::int64_t after,
                                                           bool wait) {
  const auto path = "/v1/workflow/" + Impl::segment(workflow_id) + "/assignments?after=" +
                    std::to_string(after) + "&wait=" + (wait ? "true" : "false");
  return protocol::decode_assignment_response(impl_->get(path));
}

protocol::StatusAck HttpClient::report_status(const std::string& workflow_id,
                                              const protocol::StatusReport& report) {
  const auto path = "/v1/workflow/" + Impl::segment(workflow_id) + "/tasks/" + Impl::segment(report.task_id) +
                    "/status";
  return protocol::decode_status_ack(impl_->post(path, protocol::encode(report)));
}

protocol::WorkflowSummary HttpClient::close_workflow(const std::string& workflow_id) {
  return protocol::decode_workflow_summary(impl_->del("/v1/workflow/" + Impl::segment(workflow_id)));
}

std::string HttpClient::fetch_provenance(const std::string& workflow_id) {
  const auto path = "/v1/workflow/" + Impl::segment(workflow_id) + "/provenance";
  return impl_->send("GET " + path, [&] { return impl_->http.Get(path); });
}

}  // namespace cws
