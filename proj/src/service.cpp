#include "riskgraph/service.hpp"

#include <algorithm>
#include <ctime>
#include <filesystem>

#include <httplib.h>

#include "riskgraph/catalog.hpp"
#include "riskgraph/io.hpp"

namespace riskgraph {

namespace fs = std::filesystem;
using api::json;

namespace {

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json listing_entry(const StoredNetwork& s) {
  return {{"id", s.id},
          {"name", s.name},
          {"source", s.source},
          {"created_at", s.created_at},
          {"kind", s.model.is_dynamic() ? "dynamic" : "static"}};
}

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(api::render(body), "application/json");
}

using Body = std::function<json(const httplib::Request&, int& status)>;

// Runs a handler and maps library errors onto status codes.
httplib::Server::Handler wrap(Body f) {
  return [f = std::move(f)](const httplib::Request& req, httplib::Response& res) {
    try {
      int status = 200;
      json out = f(req, status);
      reply(res, status, out);
    } catch (const Error& e) {
      reply(res, api::http_status(e), api::error_body(e));
    } catch (const json::exception& e) {
      reply(res, 400, api::error_body(Error(errc::kParseError, e.what())));
    } catch (const std::exception& e) {
      reply(res, 500, {{"code", "Internal"}, {"message", e.what()}, {"locus", ""}});
    }
  };
}

json body_json(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  return parse_json_text(req.body);
}

}  // namespace

void parse_listen_address(const std::string& addr, ServiceConfig& config) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos) throw Error(errc::kUsageError, "expected host:port", addr);
  const std::string port = addr.substr(colon + 1);
  if (port.empty() || port.size() > 5 || !std::all_of(port.begin(), port.end(), ::isdigit) ||
      std::stoi(port) > 65535) {
    throw Error(errc::kUsageError, "bad port", addr);
  }
  if (colon > 0) config.host = addr.substr(0, colon);
  config.port = std::stoi(port);
}

NetworkStore::NetworkStore(std::string persist_dir) : persist_dir_(std::move(persist_dir)) {
  if (persist_dir_.empty()) return;
  fs::create_directories(persist_dir_);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(persist_dir_)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("net-", 0) == 0 && entry.path().extension() == ".json" &&
        name.find(".meta.") == std::string::npos) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    auto s = std::make_shared<StoredNetwork>();
    s->id = path.stem().string();
    s->model = api::parse_model_text(read_file(path.string()));
    s->canonical = s->model.canonical_text();
    s->name = s->model.name();
    s->source = "disk";
    fs::path meta_path = path;
    meta_path.replace_extension(".meta.json");
    if (fs::exists(meta_path)) {
      const json meta = parse_json_text(read_file(meta_path.string()));
      s->source = meta.value("source", s->source);
      s->created_at = meta.value("created_at", "");
    }
    const std::string digits = s->id.substr(4);
    if (!digits.empty() && std::all_of(digits.begin(), digits.end(), ::isdigit)) {
      next_ = std::max<std::uint64_t>(next_, std::stoull(digits) + 1);
    }
    networks_[s->id] = std::move(s);
  }
}

std::shared_ptr<const StoredNetwork> NetworkStore::add(api::Model model, const std::string& source) {
  auto s = std::make_shared<StoredNetwork>();
  s->canonical = model.canonical_text();
  s->name = model.name();
  s->source = source;
  s->created_at = utc_now();
  s->model = std::move(model);
  std::unique_lock lock(mu_);
  s->id = "net-" + std::to_string(next_++);
  if (!persist_dir_.empty()) {
    const fs::path base = fs::path(persist_dir_) / s->id;
    write_file(base.string() + ".json", s->canonical);
    write_file(base.string() + ".meta.json",
               api::render({{"source", s->source}, {"created_at", s->created_at}}));
  }
  networks_[s->id] = s;
  return s;
}

std::shared_ptr<const StoredNetwork> NetworkStore::get(const std::string& id) const {
  std::shared_lock lock(mu_);
  const auto it = networks_.find(id);
  if (it == networks_.end()) throw Error(errc::kNotFound, "no network " + id, id);
  return it->second;
}

std::vector<std::shared_ptr<const StoredNetwork>> NetworkStore::list() const {
  std::shared_lock lock(mu_);
  std::vector<std::shared_ptr<const StoredNetwork>> out;
  for (const auto& [id, s] : networks_) out.push_back(s);
  return out;
}

Service::Service(ServiceConfig config)
    : config_(std::move(config)), store_(config_.persist_dir), server_(std::make_unique<httplib::Server>()) {
  routes();
}

Service::~Service() { stop(); }

int Service::bind() {
  if (config_.port == 0) return server_->bind_to_any_port(config_.host);
  if (!server_->bind_to_port(config_.host, config_.port)) {
    throw Error(errc::kUsageError, "cannot listen on " + config_.host + ":" + std::to_string(config_.port));
  }
  return config_.port;
}

void Service::run() { server_->listen_after_bind(); }

void Service::stop() {
  if (server_) server_->stop();
}

std::shared_ptr<FilterSession> Service::session(const std::string& id) const {
  std::shared_lock lock(sessions_mu_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(errc::kNotFound, "no session " + id, id);
  return it->second;
}

void Service::routes() {
  auto& srv = *server_;

  srv.set_post_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
    const std::string origin = req.get_header_value("Origin");
    if (origin.empty()) return;
    const auto& allow = config_.cors_origins;
    const bool any = std::find(allow.begin(), allow.end(), "*") != allow.end();
    if (any || std::find(allow.begin(), allow.end(), origin) != allow.end()) {
      res.set_header("Access-Control-Allow-Origin", origin);
      res.set_header("Vary", "Origin");
    }
  });
  srv.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
    res.set_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
  });

  srv.Get("/health", wrap([](const httplib::Request&, int&) { return json{{"status", "ok"}}; }));

  srv.Get("/catalog", wrap([](const httplib::Request&, int&) { return api::catalog_list(); }));
  srv.Get("/catalog/:id", wrap([](const httplib::Request& req, int&) {
            return api::catalog_show(req.path_params.at("id"));
          }));
  srv.Post("/catalog/:id/instantiate", wrap([this](const httplib::Request& req, int& status) {
             const std::string id = req.path_params.at("id");
             const CatalogEntry entry = build_entry(id);
             const auto s = store_.add(api::parse_model_text(fixture_text(entry)), "catalog:" + id);
             status = 201;
             return json{{"id", s->id}};
           }));

  srv.Post("/networks", wrap([this](const httplib::Request& req, int& status) {
             const json doc = body_json(req);
             const json check = api::validate(doc);
             if (!check["valid"].get<bool>()) {
               status = 400;
               json err = api::error_body(Error(errc::kInvalidNetwork, "network document has violations"));
               err["violations"] = check["violations"];
               return err;
             }
             const auto s = store_.add(api::parse_model(doc), "upload");
             status = 201;
             return json{{"id", s->id}};
           }));
  srv.Get("/networks", wrap([this](const httplib::Request&, int&) {
            json out = json::array();
            for (const auto& s : store_.list()) out.push_back(listing_entry(*s));
            return json{{"networks", out}};
          }));
  srv.Get("/networks/:id", wrap([this](const httplib::Request& req, int&) {
            return json::parse(store_.get(req.path_params.at("id"))->canonical);
          }));
  srv.Post("/networks/:id/query", wrap([this](const httplib::Request& req, int&) {
             const auto s = store_.get(req.path_params.at("id"));
             return api::query(s->model.require_static(), body_json(req), config_.enumeration_cap);
           }));
  srv.Post("/networks/:id/dsep", wrap([this](const httplib::Request& req, int&) {
             const auto s = store_.get(req.path_params.at("id"));
             return api::dsep(s->model.require_static(), body_json(req));
           }));
  srv.Get("/networks/:id/jtree", wrap([this](const httplib::Request& req, int&) {
            return api::jtree(store_.get(req.path_params.at("id"))->model.require_static());
          }));
  srv.Post("/networks/:id/anomaly", wrap([this](const httplib::Request& req, int&) {
             const auto s = store_.get(req.path_params.at("id"));
             return api::anomaly(s->model.require_static(), body_json(req));
           }));

  srv.Post("/sessions", wrap([this](const httplib::Request& req, int& status) {
             const json body = body_json(req);
             if (!body.is_object() || !body.contains("network_id") || !body["network_id"].is_string()) {
               throw Error(errc::kParseError, "missing field network_id", "network_id");
             }
             auto sess = std::make_shared<FilterSession>();
             sess->network = store_.get(body["network_id"].get<std::string>());
             sess->state = initial_state(sess->network->model.require_dynamic());
             std::unique_lock lock(sessions_mu_);
             sess->id = "session-" + std::to_string(next_session_++);
             sessions_[sess->id] = sess;
             status = 201;
             return json{{"session_id", sess->id}};
           }));
  srv.Post("/sessions/:id/observe", wrap([this](const httplib::Request& req, int&) {
             const auto sess = session(req.path_params.at("id"));
             const json record = body_json(req);
             std::lock_guard lock(sess->mu);
             json out = api::observe(sess->network->model.require_dynamic(), sess->state, record);
             sess->history.push_back({{"record", record}, {"belief", out["belief"]}, {"prediction", out["prediction"]}});
             return out;
           }));
  srv.Get("/sessions/:id", wrap([this](const httplib::Request& req, int&) {
            const auto sess = session(req.path_params.at("id"));
            std::lock_guard lock(sess->mu);
            return json{{"session_id", sess->id},
                        {"network_id", sess->network->id},
                        {"t", sess->state.t},
                        {"history", sess->history}};
          }));
  srv.Delete("/sessions/:id", wrap([this](const httplib::Request& req, int&) {
               const std::string id = req.path_params.at("id");
               std::unique_lock lock(sessions_mu_);
               if (sessions_.erase(id) == 0) throw Error(errc::kNotFound, "no session " + id, id);
               return json{{"deleted", id}};
             }));
}

}  // namespace riskgraph
