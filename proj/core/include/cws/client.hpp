#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cws/protocol.hpp"

namespace cws {

class CwsService;

// Engine-side view of the scheduler interface. The synthetic engine in the
// simulator talks to this, so the same driving code runs in process or over
// HTTP. Failures surface as CwsError with the server's error code.
class CwsiClient {
 public:
  virtual ~CwsiClient() = default;

  virtual std::vector<std::string> strategies() = 0;
  virtual protocol::RegisterResponse register_workflow(const protocol::RegisterRequest& request) = 0;
  virtual std::size_t submit_tasks(const std::string& workflow_id,
                                   const std::vector<TaskSpec>& batch) = 0;
  virtual void push_dag_edges(const std::string& workflow_id, const protocol::DagPatch& patch) = 0;
  virtual protocol::AssignmentResponse fetch_assignments(const std::string& workflow_id,
                                                         std::int64_t after, bool wait) = 0;
  virtual protocol::StatusAck report_status(const std::string& workflow_id,
                                            const protocol::StatusReport& report) = 0;
  virtual protocol::WorkflowSummary close_workflow(const std::string& workflow_id) = 0;
};

class InProcessClient final : public CwsiClient {
 public:
  explicit InProcessClient(CwsService& service) : service_(service) {}

  std::vector<std::string> strategies() override;
  protocol::RegisterResponse register_workflow(const protocol::RegisterRequest& request) override;
  std::size_t submit_tasks(const std::string& workflow_id,
                           const std::vector<TaskSpec>& batch) override;
  void push_dag_edges(const std::string& workflow_id, const protocol::DagPatch& patch) override;
  protocol::AssignmentResponse fetch_assignments(const std::string& workflow_id,
                                                 std::int64_t after, bool wait) override;
  protocol::StatusAck report_status(const std::string& workflow_id,
                                    const protocol::StatusReport& report) override;
  protocol::WorkflowSummary close_workflow(const std::string& workflow_id) override;

 private:
  CwsService& service_;
};

struct HttpClientOptions {
  std::string token;  // bearer token; empty sends no Authorization header
  int max_retries = 2;
  std::chrono::milliseconds connect_timeout{2000};
  std::chrono::milliseconds read_timeout{60000};
};

// Talks to `cws serve` over HTTP/1.1. Connection failures are retried
// `max_retries` times and then reported as kTransport with the retry count.
class HttpClient final : public CwsiClient {
 public:
  explicit HttpClient(const std::string& base_url, HttpClientOptions options = {});
  ~HttpClient() override;

  std::vector<std::string> strategies() override;
  protocol::RegisterResponse register_workflow(const protocol::RegisterRequest& request) override;
  std::size_t submit_tasks(const std::string& workflow_id,
                           const std::vector<TaskSpec>& batch) override;
  void push_dag_edges(const std::string& workflow_id, const protocol::DagPatch& patch) override;
  protocol::AssignmentResponse fetch_assignments(const std::string& workflow_id,
                                                 std::int64_t after, bool wait) override;
  protocol::StatusAck report_status(const std::string& workflow_id,
                                    const protocol::StatusReport& report) override;
  protocol::WorkflowSummary close_workflow(const std::string& workflow_id) override;

  // Raw NDJSON provenance export of one workflow.
  std::string fetch_provenance(const std::string& workflow_id);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cws
