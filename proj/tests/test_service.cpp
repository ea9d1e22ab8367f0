#include <filesystem>
#include <thread>

#include "doctest.h"
#include "parity.hpp"
#include "riskgraph/exact.hpp"
#include "riskgraph/io.hpp"
#include "support.hpp"

using namespace riskgraph;
using nlohmann::json;

namespace {

json post_json(httplib::Client& http, const std::string& path, const json& body, int& status) {
  const auto res = http.Post(path, body.dump(), "application/json");
  REQUIRE(res);
  status = res->status;
  return json::parse(res->body);
}

std::string instantiate(httplib::Client& http, const std::string& catalog_id) {
  int status = 0;
  const json r = post_json(http, "/catalog/" + catalog_id + "/instantiate", json::object(), status);
  REQUIRE(status == 201);
  return r["id"].get<std::string>();
}

// K -> C where K=1 always produces C=0.
const char* kDegenerate = R"({
  "variables": [{"name": "K", "states": ["0", "1"]}, {"name": "C", "states": ["0", "1"]}],
  "edges": [["K", "C"]],
  "cpts": [{"child": "K", "parents": [], "rows": [[0.5, 0.5]]},
           {"child": "C", "parents": ["K"], "rows": [[0.9, 0.1], [1.0, 0.0]]}]
})";

}  // namespace

TEST_CASE("chain query, fig1 d-separation and fig11 observe over HTTP") {
  parity::RunningService svc;
  httplib::Client http("127.0.0.1", svc.port);
  int status = 0;

  const std::string chain = instantiate(http, "fig2_fig3_home:chain");
  const json q = post_json(http, "/networks/" + chain + "/query",
                           {{"targets", {"C"}}, {"evidence", {{"K", "1"}}}}, status);
  CHECK(status == 200);
  const auto probs = q["posteriors"]["C"]["probs"].get<std::vector<double>>();
  CHECK(probs[0] == doctest::Approx(0.916).epsilon(1e-12));
  CHECK(probs[1] == doctest::Approx(0.084).epsilon(1e-12));
  CHECK(q["log_evidence"].get<double>() == doctest::Approx(std::log(0.5)));

  const std::string fig1 = instantiate(http, "fig1_commercial_auto");
  const json d = post_json(http, "/networks/" + fig1 + "/dsep", {{"x", {"B"}}, {"y", {"C"}}, {"z", {"P"}}}, status);
  CHECK(status == 200);
  CHECK(d["separated"].get<bool>());

  const std::string fig11 = instantiate(http, "fig11_dynamic_claims:plain");
  const json sess = post_json(http, "/sessions", {{"network_id", fig11}}, status);
  CHECK(status == 201);
  const std::string sid = sess["session_id"].get<std::string>();
  const json obs = post_json(http, "/sessions/" + sid + "/observe", {{"t", 1}, {"evidence", {{"C", "1"}}}}, status);
  CHECK(status == 200);
  CHECK(obs["belief"]["marginals"]["K"][1].get<double>() == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(obs["prediction"]["C_2"][1].get<double>() == doctest::Approx(0.17).epsilon(1e-12));
}

TEST_CASE("service posteriors are the library's numbers") {
  parity::RunningService svc;
  httplib::Client http("127.0.0.1", svc.port);
  const std::string id = instantiate(http, "fig9_capital");
  int status = 0;
  const json r = post_json(http, "/networks/" + id + "/query",
                           {{"targets", {"L", "A"}}, {"evidence", {{"H", "1"}}}}, status);
  REQUIRE(status == 200);

  const BayesNet net = load_network(read_file("fixtures/v1/fig9_capital.json"));
  Evidence ev;
  ev.set_hard(net.index_of("H"), 1);
  const CliqueTree tree = build_junction_tree(net);
  const CalibratedTree cal = calibrate(tree, ev);
  for (const auto& m : query_marginals(cal, net.resolve({"L", "A"}))) {
    CHECK(r["posteriors"][net.variable(m.var).name]["probs"].get<std::vector<double>>() == m.probs);
  }
  CHECK(r["log_evidence"].get<double>() == cal.log_normalizer);
}

TEST_CASE("error statuses and bodies") {
  parity::RunningService svc;
  httplib::Client http("127.0.0.1", svc.port);
  int status = 0;

  json r = post_json(http, "/networks/net-99/query", {{"targets", {"C"}}}, status);
  CHECK(status == 404);
  CHECK(r["code"] == "NotFound");
  CHECK(r["locus"] == "net-99");
  CHECK(http.Get("/sessions/session-7")->status == 404);
  CHECK(http.Post("/catalog/fig99/instantiate", "{}", "application/json")->status == 404);

  const std::string degenerate = post_json(http, "/networks", json::parse(kDegenerate), status)["id"];
  CHECK(status == 201);
  r = post_json(http, "/networks/" + degenerate + "/query",
                {{"targets", {"C"}}, {"evidence", {{"K", "1"}, {"C", "1"}}}}, status);
  CHECK(status == 409);
  CHECK(r["code"] == "ZeroMass");

  r = post_json(http, "/networks/" + degenerate + "/query", {{"targets", {"X"}}}, status);
  CHECK(status == 400);
  CHECK(r["code"] == "InvalidNode");

  // A cycle and a bad row both show up in the violation list.
  json cyclic = json::parse(kDegenerate);
  cyclic["edges"].push_back({"C", "K"});
  cyclic["cpts"][1]["rows"][0] = {0.5, 0.6};
  r = post_json(http, "/networks", cyclic, status);
  CHECK(status == 400);
  CHECK(r["code"] == "InvalidNetwork");
  REQUIRE(r["violations"].size() >= 2);

  const auto bad = http.Post("/networks", "{\"variables\": [", "application/json");
  CHECK(bad->status == 400);
  CHECK(json::parse(bad->body)["code"] == "ParseError");
  CHECK(json::parse(bad->body)["locus"].get<std::string>().rfind("line 1", 0) == 0);

  const std::string dynamic = instantiate(http, "fig11_dynamic_claims:plain");
  r = post_json(http, "/networks/" + dynamic + "/query", {{"targets", {"K"}}}, status);
  CHECK(status == 400);
  CHECK(r["code"] == "InvalidArgument");
  r = post_json(http, "/sessions", {{"network_id", degenerate}}, status);
  CHECK(status == 400);

  const std::string sid = post_json(http, "/sessions", {{"network_id", dynamic}}, status)["session_id"];
  post_json(http, "/sessions/" + sid + "/observe", {{"t", 2}, {"evidence", json::object()}}, status);
  CHECK(status == 200);
  r = post_json(http, "/sessions/" + sid + "/observe", {{"t", 2}, {"evidence", json::object()}}, status);
  CHECK(status == 400);
  CHECK(r["locus"] == "tick 2");
  // The rejected record leaves the session where it was.
  CHECK(json::parse(http.Get("/sessions/" + sid)->body)["t"] == 2);
}

TEST_CASE("listing, documents and session history") {
  parity::RunningService svc;
  httplib::Client http("127.0.0.1", svc.port);
  int status = 0;
  const std::string a = instantiate(http, "fig10_sensor_home");
  const std::string b = post_json(http, "/networks", json::parse(kDegenerate), status)["id"];
  CHECK(a != b);

  const json list = json::parse(http.Get("/networks")->body)["networks"];
  REQUIRE(list.size() == 2);
  CHECK(list[0]["id"] == a);
  CHECK(list[0]["source"] == "catalog:fig10_sensor_home");
  CHECK(list[1]["source"] == "upload");
  CHECK(list[1]["kind"] == "static");
  CHECK_FALSE(list[0]["created_at"].get<std::string>().empty());

  // Stored documents come back in canonical form.
  CHECK(json::parse(http.Get("/networks/" + b)->body) == json::parse(save_network(load_network(kDegenerate))));

  const std::string dyn = instantiate(http, "fig13_emission");
  const std::string sid = post_json(http, "/sessions", {{"network_id", dyn}}, status)["session_id"];
  post_json(http, "/sessions/" + sid + "/observe", {{"t", 1}, {"evidence", {{"F", "1"}}}}, status);
  post_json(http, "/sessions/" + sid + "/observe", {{"t", 3}, {"evidence", {{"C", "0"}}}}, status);
  const json hist = json::parse(http.Get("/sessions/" + sid)->body);
  CHECK(hist["network_id"] == dyn);
  CHECK(hist["t"] == 3);
  REQUIRE(hist["history"].size() == 2);
  CHECK(hist["history"][1]["record"]["t"] == 3);
  CHECK(hist["history"][1]["belief"]["t"] == 3);

  CHECK(http.Delete("/sessions/" + sid)->status == 200);
  CHECK(http.Get("/sessions/" + sid)->status == 404);
  CHECK(http.Delete("/sessions/" + sid)->status == 404);
}

TEST_CASE("persistence directory survives a restart") {
  const auto dir = std::filesystem::temp_directory_path() / "riskgraph_persist_test";
  std::filesystem::remove_all(dir);
  std::string first, second;
  {
    NetworkStore store(dir.string());
    first = store.add(api::parse_model_text(read_file("fixtures/v1/fig2_fig3_home.chain.json")), "upload")->id;
    second = store.add(api::parse_model_text(read_file("fixtures/v1/fig13_emission.json")), "catalog:x")->id;
  }
  NetworkStore reloaded(dir.string());
  const auto a = reloaded.get(first);
  const auto b = reloaded.get(second);
  CHECK(a->canonical == read_file("fixtures/v1/fig2_fig3_home.chain.json"));
  CHECK(b->model.is_dynamic());
  CHECK(b->source == "catalog:x");
  // New ids continue after the reloaded ones.
  const auto c = reloaded.add(a->model, "upload");
  CHECK(c->id != first);
  CHECK(c->id != second);
  std::filesystem::remove_all(dir);
}

TEST_CASE("cors allowlist") {
  ServiceConfig config;
  config.cors_origins = {"http://localhost:5173"};
  parity::RunningService svc(config);
  httplib::Client http("127.0.0.1", svc.port);

  auto res = http.Get("/catalog", {{"Origin", "http://localhost:5173"}});
  CHECK(res->get_header_value("Access-Control-Allow-Origin") == "http://localhost:5173");
  res = http.Get("/catalog", {{"Origin", "http://evil.example"}});
  CHECK_FALSE(res->has_header("Access-Control-Allow-Origin"));
  res = http.Options("/networks", {{"Origin", "http://localhost:5173"}});
  CHECK(res->status == 204);
  CHECK(res->get_header_value("Access-Control-Allow-Methods").find("POST") != std::string::npos);
}

TEST_CASE("listen address parsing") {
  ServiceConfig c;
  parse_listen_address("0.0.0.0:9000", c);
  CHECK(c.host == "0.0.0.0");
  CHECK(c.port == 9000);
  parse_listen_address(":81", c);
  CHECK(c.host == "0.0.0.0");
  CHECK(c.port == 81);
  CHECK_THROWS_AS(parse_listen_address("localhost", c), Error);
  CHECK_THROWS_AS(parse_listen_address("h:99999", c), Error);
  CHECK_THROWS_AS(parse_listen_address("h:x", c), Error);
}

TEST_CASE("interleaved sessions do not affect each other") {
  parity::RunningService svc;
  httplib::Client http("127.0.0.1", svc.port);
  int status = 0;
  const std::string net = instantiate(http, "fig11_dynamic_claims:autoregressive");

  const json stream_a = {{{"t", 1}, {"evidence", {{"C", "1"}}}}, {{"t", 2}, {"evidence", {{"C", "1"}}}},
                         {{"t", 4}, {"evidence", {{"C", "0"}}}}, {{"t", 5}, {"evidence", {{"K", "0"}}}}};
  const json stream_b = {{{"t", 1}, {"evidence", {{"C", "0"}}}}, {{"t", 2}, {"evidence", {{"C", {0.3, 0.9}}}}},
                         {{"t", 3}, {"evidence", {{"C", "1"}}}}, {{"t", 6}, {"evidence", json::object()}}};

  const auto alone = [&](const json& stream) {
    const std::string sid = post_json(http, "/sessions", {{"network_id", net}}, status)["session_id"];
    std::vector<std::string> out;
    for (const auto& r : stream) out.push_back(http.Post("/sessions/" + sid + "/observe", r.dump(), "application/json")->body);
    return out;
  };
  const auto ref_a = alone(stream_a);
  const auto ref_b = alone(stream_b);

  const std::string sa = post_json(http, "/sessions", {{"network_id", net}}, status)["session_id"];
  const std::string sb = post_json(http, "/sessions", {{"network_id", net}}, status)["session_id"];
  for (std::size_t i = 0; i < stream_a.size(); ++i) {
    CHECK(http.Post("/sessions/" + sa + "/observe", stream_a[i].dump(), "application/json")->body == ref_a[i]);
    CHECK(http.Post("/sessions/" + sb + "/observe", stream_b[i].dump(), "application/json")->body == ref_b[i]);
  }

  // The same two streams from concurrent clients.
  const std::string ca = post_json(http, "/sessions", {{"network_id", net}}, status)["session_id"];
  const std::string cb = post_json(http, "/sessions", {{"network_id", net}}, status)["session_id"];
  std::vector<std::string> got_a, got_b;
  const auto feed = [&](const std::string& sid, const json& stream, std::vector<std::string>& got) {
    httplib::Client c("127.0.0.1", svc.port);
    for (const auto& r : stream) got.push_back(c.Post("/sessions/" + sid + "/observe", r.dump(), "application/json")->body);
  };
  std::thread ta(feed, ca, stream_a, std::ref(got_a));
  std::thread tb(feed, cb, stream_b, std::ref(got_b));
  ta.join();
  tb.join();
  CHECK(got_a == ref_a);
  CHECK(got_b == ref_b);
}

TEST_CASE("cli --json matches the service on the golden suite") {
  parity::RunningService svc;
  httplib::Client http("127.0.0.1", svc.port);
  parity::Runner runner(http);
  const auto cases = parity::golden_cases();
  CHECK(cases.size() == 30);
  for (const auto& c : cases) {
    const auto r = runner.check(c);
    INFO(r.label << "\n" << r.detail);
    CHECK(r.match);
  }
}
