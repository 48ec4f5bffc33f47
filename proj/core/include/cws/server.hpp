#pragma once

#include <memory>
#include <string>

namespace cws {

class CwsService;

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::string token;  // empty disables authentication
  int worker_threads = 16;
};

// HTTP/1.1 front end for CwsService under the /v1/ prefix:
//   POST   /v1/workflow
//   GET    /v1/strategies
//   POST   /v1/workflow/{id}/tasks
//   PATCH  /v1/workflow/{id}/dag
//   GET    /v1/workflow/{id}/assignments?after={seq}&wait={bool}
//   POST   /v1/workflow/{id}/tasks/{task_id}/status
//   DELETE /v1/workflow/{id}
//   GET    /v1/workflow/{id}/provenance   (NDJSON)
class CwsServer {
 public:
  CwsServer(CwsService& service, ServerOptions options);
  ~CwsServer();

  CwsServer(const CwsServer&) = delete;
  CwsServer& operator=(const CwsServer&) = delete;

  // Binds and serves on a background thread; returns the bound port.
  int start();
  // Binds and serves on the calling thread until stop().
  void run();
  void stop();
  int port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cws
