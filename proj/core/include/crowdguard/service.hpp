#pragma once

// The /v1 API as a transport-independent request handler, plus the config
// file and the HTTP binding.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "crowdguard/orchestration.hpp"
#include "crowdguard/state.hpp"
#include "crowdguard/wire.hpp"

namespace crowdguard {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path data_dir;
  // Empty means the built-in table.
  std::filesystem::path conditions;
  // Empty means no persistence.
  std::filesystem::path event_log;
  std::uint64_t seed = 20190127;
  std::vector<ConditionId> active_conditions;
  bool filter_fake_gold = true;
};

// Relative paths resolve against the config file's directory. Throws
// Error(config) with the offending key.
ServiceConfig load_service_config(const std::filesystem::path& path);
ServiceConfig parse_service_config(const Json& j, const std::filesystem::path& base_dir);

struct Request {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct Response {
  int status = 200;
  Json body;
};

// Milliseconds; injectable so simulations stay deterministic.
using Clock = std::function<std::int64_t()>;
Clock system_clock();

struct ServiceOptions {
  std::uint64_t seed = 20190127;
  std::vector<ConditionId> active_conditions;
  // Empty: in-memory only. Otherwise the log is replayed on start.
  std::filesystem::path event_log;
  Clock clock;
};

inline constexpr std::string_view kApiPrefix = "/v1";

class Service {
 public:
  Service(Dataset data, ConditionTable table, ServiceOptions options);
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Thread-safe. Mutations are serialized through one writer; reads that
  // touch only the dataset take no lock.
  Response handle(const Request& req);

  const Dataset& data() const { return data_; }
  const ConditionTable& table() const { return table_; }
  // Copy taken under the writer lock.
  ExperimentState state() const;
  Json snapshot() const;

 private:
  Response session(const Json& body);
  Response next_task(const Request& req);
  Response respond(const Json& body);
  Response preview(const Json& body) const;
  Response submit(const Json& body);
  Response help(const Json& body) const;
  Response glossary() const;

  const std::string* worker_of(const Json& body) const;
  std::string make_token(const std::string& worker_id) const;
  Json task_payload(const IssuedHit& h, const ConditionSpec& spec) const;
  Json question_payload(const Question& q, const ConditionSpec& spec) const;
  void record(Json event);

  Dataset data_;
  ConditionTable table_;
  ServiceOptions options_;
  mutable std::mutex mu_;
  ExperimentState state_;
  std::unique_ptr<EventLog> log_;
};

// Builds the service a config describes, replaying its event log.
std::unique_ptr<Service> make_service(const ServiceConfig& config, Clock clock = {});

// Wraps Service::handle with cpp-httplib.
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Port 0 picks a free port. Returns the bound port; throws Error(io).
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace crowdguard
