#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

#include "riskgraph/api.hpp"

namespace httplib {
class Server;
}

namespace riskgraph {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string persist_dir;  // empty: in memory only
  std::uint64_t enumeration_cap = kDefaultEnumerationCap;
  std::vector<std::string> cors_origins;  // "*" allows any origin
};

// Parses "host:port" or ":port" into the config. Throws UsageError.
void parse_listen_address(const std::string& addr, ServiceConfig& config);

struct StoredNetwork {
  std::string id;
  std::string name;
  std::string source;      // "upload", "catalog:<id>" or "disk"
  std::string created_at;  // ISO 8601, UTC
  api::Model model;
  std::string canonical;
};

// Immutable snapshots keyed by id; writers take the lock only to insert.
class NetworkStore {
 public:
  explicit NetworkStore(std::string persist_dir = {});

  std::shared_ptr<const StoredNetwork> add(api::Model model, const std::string& source);
  std::shared_ptr<const StoredNetwork> get(const std::string& id) const;  // throws NotFound
  std::vector<std::shared_ptr<const StoredNetwork>> list() const;

 private:
  std::string persist_dir_;
  mutable std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<const StoredNetwork>> networks_;
  std::uint64_t next_ = 1;
};

struct FilterSession {
  std::string id;
  std::shared_ptr<const StoredNetwork> network;
  std::mutex mu;  // serializes this session's observes
  FilterState state;
  api::json history = api::json::array();
};

class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  NetworkStore& store() noexcept { return store_; }

  // Binds the configured address (port 0 picks a free one) and returns the
  // bound port; then run() serves until stop().
  int bind();
  void run();
  void stop();

 private:
  void routes();
  std::shared_ptr<FilterSession> session(const std::string& id) const;

  ServiceConfig config_;
  NetworkStore store_;
  std::unique_ptr<httplib::Server> server_;
  mutable std::shared_mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<FilterSession>> sessions_;
  std::uint64_t next_session_ = 1;
};

}  // namespace riskgraph
