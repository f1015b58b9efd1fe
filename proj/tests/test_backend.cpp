#include <doctest.h>

#include <fstream>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "pae/backend.hpp"
#include "pae/evaluator.hpp"
#include "pae/policy.hpp"
#include "pae/rollout.hpp"
#include "test_support.hpp"

using namespace pae;
using namespace pae::remote;
using pae::testing::fixture_world;

namespace {

// Minimal chat-completions endpoint on a free local port.
class FakeServer {
 public:
  FakeServer() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mu_);
      last_body = req.body;
      last_auth = req.get_header_value("Authorization");
      res.status = status;
      res.set_content(raw.empty() ? reply_json(content) : raw, "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }

  BackendConfig config() const {
    BackendConfig c;
    c.base_url = "http://127.0.0.1:" + std::to_string(port_) + "/v1";
    c.model = "fake";
    c.api_key = "k";
    c.timeout_seconds = 5;
    return c;
  }

  static std::string reply_json(const std::string& text) {
    return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}}}.dump();
  }

  int status = 200;
  std::string content;
  std::string raw;
  std::string last_body;
  std::string last_auth;

 private:
  httplib::Server server_;
  std::thread thread_;
  std::mutex mu_;
  int port_ = 0;
};

}  // namespace

TEST_SUITE("backend") {
  TEST_CASE("chat completion round trip") {
    FakeServer srv;
    srv.content = "hello";
    HttpChatBackend backend(srv.config());
    CHECK(backend.complete({{"user", "hi"}}) == "hello");
    const auto body = nlohmann::json::parse(srv.last_body);
    CHECK(body["model"] == "fake");
    CHECK(body["messages"][0]["content"] == "hi");
    CHECK(srv.last_auth == "Bearer k");
  }

  TEST_CASE("transport failures") {
    FakeServer srv;
    HttpChatBackend backend(srv.config());
    srv.status = 500;
    srv.raw = "boom";
    CHECK_THROWS_AS(backend.complete({{"user", "hi"}}), TransportError);
    srv.status = 200;
    srv.raw = "{\"choices\": []}";
    CHECK_THROWS_AS(backend.complete({{"user", "hi"}}), TransportError);
    srv.raw = "not json";
    CHECK_THROWS_AS(backend.complete({{"user", "hi"}}), TransportError);

    BackendConfig dead = srv.config();
    dead.base_url = "http://127.0.0.1:1/v1";
    HttpChatBackend nobody(dead);
    CHECK_THROWS_AS(nobody.complete({{"user", "hi"}}), TransportError);

    BackendConfig bad;
    bad.base_url = "localhost";
    CHECK_THROWS_AS(HttpChatBackend{bad}, std::invalid_argument);
  }

  TEST_CASE("config file") {
    const auto path = testing::scratch_dir("backend") / "b.json";
    std::ofstream(path) << R"({"base_url": "http://x:1/v1", "model": "m", "temperature": 0.2})";
    const auto c = BackendConfig::from_file(path);
    CHECK(c.base_url == "http://x:1/v1");
    CHECK(c.model == "m");
    CHECK(c.temperature == doctest::Approx(0.2));
    CHECK(c.timeout_seconds == 120);
    CHECK_THROWS(BackendConfig::from_file(path.parent_path() / "missing.json"));
  }

  TEST_CASE("remote judge reads the final verdict") {
    FakeServer srv;
    HttpChatBackend backend(srv.config());
    const eval::RemoteJudge judge(backend);
    const eval::EvalRequest req(testing::make_task("t", "shopsite", "Open patio", "nav_cat_patio"), {}, "done");
    srv.content = "Looks right.\nStatus: SUCCESS";
    CHECK(eval::evaluate_outcome(req, judge, {}).success);
    srv.content = "Status: NOT SUCCESS";
    const auto v = eval::evaluate_outcome(req, judge, {});
    CHECK_FALSE(v.success);
    CHECK(v.evaluator_kind == EvaluatorKind::outcome);
    srv.content = "no idea";
    CHECK_THROWS_AS(eval::evaluate_outcome(req, judge, {}), eval::JudgeError);
  }

  TEST_CASE("remote policy parses actions and survives garbage") {
    FakeServer srv;
    HttpChatBackend backend(srv.config());
    const policy::RemotePolicy remote(backend);
    const Task task = testing::make_task("p", "shopsite", "Browse the Patio category", "nav_cat_patio");
    const auto obs = web::reset(fixture_world(), "shopsite", task, {}, 0).observation;
    const auto in = policy::make_input(task, obs, {});

    srv.content = "Thought: the patio link\nAction: Click [3]";
    const auto out = remote.act(in, 0);
    CHECK_FALSE(out.parse_failed);
    CHECK(out.record.action == actions::Action{actions::Click{3}});

    srv.content = "I would like to click something";
    const auto bad = remote.act(in, 0);
    CHECK(bad.parse_failed);
    CHECK_FALSE(bad.error.empty());

    web::EpisodeConfig cfg;
    cfg.horizon = 3;
    const auto r = rollout::run_episode(fixture_world(), task, remote, cfg, 0);
    CHECK(r.trajectory.steps.size() == 3);
    for (const auto& s : r.trajectory.steps) CHECK(s.invalid_action);
    CHECK(r.final_state.current_page == "home");
  }
}
