#pragma once

// Replays the recorded request/response exchanges against a live server and
// checks byte equality of every response plus the decode/encode round trip
// of every body.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "cws/protocol.hpp"
#include "cws/provenance.hpp"
#include "cws/server.hpp"
#include "cws/service.hpp"
#include "support/oracles.hpp"

#include <httplib.h>

namespace cws::testing {

inline constexpr const char* kGoldenToken = "golden-token";

struct Exchange {
  std::string name;
  std::string method;
  std::string target;
  int status = 200;
  std::string request_type;  // empty when the request has no body
  std::string response_type;
  bool auth = true;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline std::filesystem::path golden_dir() { return fixture_path("protocol"); }

inline std::vector<Exchange> load_exchanges(const std::filesystem::path& dir = golden_dir()) {
  const auto manifest = nlohmann::json::parse(read_file(dir / "exchanges.json"));
  std::vector<Exchange> out;
  for (const auto& e : manifest) {
    Exchange x;
    x.name = e.at("name");
    x.method = e.at("method");
    x.target = e.at("target");
    x.status = e.at("status");
    x.request_type = e.value("request_type", "");
    x.response_type = e.at("response_type");
    x.auth = e.value("auth", true);
    out.push_back(std::move(x));
  }
  return out;
}

inline std::filesystem::path request_path(const std::filesystem::path& dir, const Exchange& x) {
  return dir / (x.name + ".request.json");
}

inline std::filesystem::path response_path(const std::filesystem::path& dir, const Exchange& x) {
  return dir / (x.name + (x.response_type == "ndjson" ? ".response.ndjson" : ".response.json"));
}

// True when decoding `text` as `type` and encoding again reproduces it.
// Type "none" marks deliberately malformed bodies, which are skipped.
inline bool round_trips(const std::string& type, const std::string& text) {
  namespace p = protocol;
  if (type == "none") return true;
  if (type == "ndjson") {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      if (encode_record(decode_record(line)) != line) return false;
    }
    return true;
  }
  const p::Json j = p::parse(text);
  p::Json again;
  if (type == "register") {
    again = j.contains("dag_hint") ? p::encode(p::decode_register_request(j)) : p::encode(p::decode_register_response(j));
  } else if (type == "submit") {
    again = j.contains("tasks") ? p::encode(p::decode_submit_request(j)) : p::encode(p::decode_submit_response(j));
  } else if (type == "dag_patch") {
    again = p::encode(p::decode_dag_patch(j));
  } else if (type == "status") {
    again = p::encode(p::decode_status_report(j));
  } else if (type == "status_ack") {
    again = p::encode(p::decode_status_ack(j));
  } else if (type == "assignments") {
    again = p::encode(p::decode_assignment_response(j));
  } else if (type == "summary") {
    again = p::encode(p::decode_workflow_summary(j));
  } else if (type == "strategies") {
    again = p::encode_strategies(p::decode_strategies(j));
  } else if (type == "error") {
    again = p::encode(p::decode_error(j));
  } else {
    again = j;
  }
  return again.dump() == text;
}

struct GoldenOutcome {
  std::size_t exchanges = 0;
  std::size_t matched = 0;
  std::vector<std::string> mismatches;
};

// Fresh service on the two-node cluster with a counter clock: every clock
// read advances simulated time by one second, so responses are reproducible.
inline GoldenOutcome replay_golden(bool regenerate = false, const std::filesystem::path& dir = golden_dir()) {
  auto ticks = std::make_shared<std::atomic<std::int64_t>>(0);
  CwsService service(two_slot_cluster(), {}, [ticks] { return Timestamp::simulated(Seconds(ticks->fetch_add(1))); });
  CwsServer server(service, {"127.0.0.1", 0, kGoldenToken, 4});
  const int port = server.start();
  httplib::Client http("127.0.0.1", port);

  GoldenOutcome outcome;
  for (const auto& x : load_exchanges(dir)) {
    ++outcome.exchanges;
    httplib::Headers headers;
    if (x.auth) headers.emplace("Authorization", std::string("Bearer ") + kGoldenToken);
    const std::string body = x.request_type.empty() ? "" : read_file(request_path(dir, x));
    if (!x.request_type.empty() && !round_trips(x.request_type, body)) {
      outcome.mismatches.push_back(x.name + ": request body does not round trip");
    }

    httplib::Result res;
    if (x.method == "GET") {
      res = http.Get(x.target, headers);
    } else if (x.method == "POST") {
      res = http.Post(x.target, headers, body, "application/json");
    } else if (x.method == "PATCH") {
      res = http.Patch(x.target, headers, body, "application/json");
    } else if (x.method == "DELETE") {
      res = http.Delete(x.target, headers);
    }
    if (!res) {
      outcome.mismatches.push_back(x.name + ": no response");
      continue;
    }
    if (regenerate) {
      std::ofstream(response_path(dir, x), std::ios::binary) << res->body;
    }
    const std::string expected = read_file(response_path(dir, x));
    bool ok = true;
    if (res->status != x.status) {
      outcome.mismatches.push_back(x.name + ": status " + std::to_string(res->status) + ", expected " +
                                   std::to_string(x.status));
      ok = false;
    }
    if (res->body != expected) {
      outcome.mismatches.push_back(x.name + ": body differs\n  got:      " + res->body + "\n  expected: " + expected);
      ok = false;
    }
    if (!round_trips(x.response_type, expected)) {
      outcome.mismatches.push_back(x.name + ": response body does not round trip");
      ok = false;
    }
    if (ok) ++outcome.matched;
  }
  server.stop();
  return outcome;
}

}  // namespace cws::testing
