#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "zk3col/agent_spec.hpp"
#include "zk3col/http_api.hpp"
#include "zk3col/service.hpp"

using namespace zk3col;
using namespace zk3col::service;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("zk3col_service_" + name);
  fs::remove_all(d);
  return d;
}

ServiceOptions options(const fs::path& dir, std::chrono::milliseconds timeout = std::chrono::seconds(60)) {
  return {dir, timeout, [] { return std::int64_t{0}; }};
}

json human_pair(const std::string& id, std::size_t rounds = 6) {
  return {{"id", id},
          {"alice", "human"},
          {"bob", "human"},
          {"rounds", rounds},
          {"seed", 17},
          {"generate", {{"n", 7}, {"edge_prob", 0.6}, {"seed", 3}}}};
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::io_error;
}

Edge first_edge(const json& state) { return store::edge_from_json(state.at("graph").at("edges").at(0)); }

}  // namespace

TEST(Manager, PhasesAdvanceOnlyOnTheRightRolesInput) {
  SessionManager mgr(options(fresh_dir("phases")));
  auto created = mgr.create_session(human_pair("p1"));
  const std::string alice = created["tokens"]["alice"], bob = created["tokens"]["bob"];
  EXPECT_EQ(created["state"]["phase"], "awaiting_permutation");
  EXPECT_EQ(created["state"]["roles"]["alice"], "human");

  const Edge e = first_edge(created["state"]);
  const json challenge{{"type", "submit_challenge"}, {"edge", store::edge_json(e)}};
  EXPECT_EQ(code_of([&] { mgr.post_action("p1", bob, challenge); }), ErrorCode::wrong_phase);
  EXPECT_EQ(code_of([&] { mgr.post_action("p1", bob, {{"type", "submit_permutation"}, {"rank", 0}}); }),
            ErrorCode::forbidden);
  EXPECT_EQ(code_of([&] { mgr.post_action("p1", "", {{"type", "submit_permutation"}, {"rank", 0}}); }),
            ErrorCode::forbidden);
  EXPECT_EQ(code_of([&] { mgr.post_action("p1", alice, {{"type", "submit_permutation"}, {"rank", 6}}); }),
            ErrorCode::invalid_argument);
  EXPECT_EQ(code_of([&] { mgr.post_action("p1", alice, {{"type", "dance"}}); }), ErrorCode::invalid_argument);

  auto st = mgr.post_action("p1", alice, {{"type", "submit_permutation"}, {"rank", 3}});
  EXPECT_EQ(st["phase"], "awaiting_challenge");
  EXPECT_EQ(st["commitments"].size(), 7u);
  EXPECT_EQ(code_of([&] { mgr.post_action("p1", alice, {{"type", "submit_permutation"}, {"rank", 1}}); }),
            ErrorCode::wrong_phase);

  // Non-edge clicks are rejected and leave the phase unchanged.
  Graph g = store::graph_from_json(st["graph"]);
  std::optional<Edge> non_edge;
  for (Vertex u = 0; u < g.n() && !non_edge; ++u)
    for (Vertex v = u + 1; v < g.n() && !non_edge; ++v)
      if (!g.has_edge({u, v})) non_edge = Edge{u, v};
  ASSERT_TRUE(non_edge);
  EXPECT_EQ(code_of([&] { mgr.post_action("p1", bob, {{"type", "submit_challenge"}, {"edge", store::edge_json(*non_edge)}}); }),
            ErrorCode::invalid_argument);
  EXPECT_EQ(mgr.get_session("p1", bob)["phase"], "awaiting_challenge");

  st = mgr.post_action("p1", bob, challenge);
  EXPECT_EQ(st["phase"], "awaiting_permutation");
  EXPECT_EQ(st["round"], 1);
  ASSERT_EQ(st["transcript"].size(), 1u);
  EXPECT_EQ(st["transcript"][0]["verdict"], "accept");
  EXPECT_EQ(code_of([&] { mgr.get_session("nope", ""); }), ErrorCode::not_found);
  EXPECT_EQ(code_of([&] { mgr.get_session("p1", "forged"); }), ErrorCode::forbidden);
  EXPECT_EQ(code_of([&] { mgr.create_session(human_pair("p1")); }), ErrorCode::invalid_argument);
  EXPECT_EQ(code_of([&] { mgr.create_session(human_pair("../x")); }), ErrorCode::invalid_argument);
}

TEST(Manager, ConcurrentSubmissionsAcceptOneActionPerPhase) {
  const auto dir = fresh_dir("concurrent");
  SessionManager mgr(options(dir));
  auto created = mgr.create_session(human_pair("c1", 20));
  const std::string alice = created["tokens"]["alice"], bob = created["tokens"]["bob"];
  const Edge e = first_edge(created["state"]);
  for (int round = 0; round < 20; ++round) {
    for (bool prover : {true, false}) {
      std::atomic<int> ok{0}, wrong{0};
      std::vector<std::thread> threads;
      for (int t = 0; t < 8; ++t)
        threads.emplace_back([&, t] {
          try {
            if (prover)
              mgr.post_action("c1", alice, {{"type", "submit_permutation"}, {"rank", t % 6}});
            else
              mgr.post_action("c1", bob, {{"type", "submit_challenge"}, {"edge", store::edge_json(e)}});
            ++ok;
          } catch (const Error& err) {
            if (err.code() == ErrorCode::wrong_phase) ++wrong;
          }
        });
      for (auto& th : threads) th.join();
      ASSERT_EQ(ok.load(), 1) << round;
      ASSERT_EQ(wrong.load(), 7) << round;
    }
  }
  auto st = mgr.get_session("c1", "");
  EXPECT_EQ(st["phase"], "finished");
  EXPECT_EQ(st["verdict"], "accepted");
  EXPECT_EQ(st["transcript"].size(), 20u);
  auto rec = store::load_session(store::session_log_path(dir, "c1"), "c1");
  EXPECT_EQ(store::replay(rec).size(), 20u);
  EXPECT_EQ(rec.human_inputs.size(), 40u);
}

TEST(Manager, VerifierNeverSeesUnopenedColorsOrSalts) {
  SessionManager mgr(options(fresh_dir("visibility")));
  json req{{"id", "v1"}, {"alice", "honest:uniform"}, {"bob", "human"}, {"rounds", 25}, {"seed", 5},
           {"generate", {{"n", 9}, {"edge_prob", 0.5}, {"seed", 8}}}};
  auto created = mgr.create_session(req);
  const std::string bob = created["tokens"]["bob"];
  const Graph g = store::graph_from_json(created["state"]["graph"]);
  const auto inst = planted_3colorable(9, 0.5, 8);
  ASSERT_EQ(g, inst.graph);

  // Twin engine with the same agents and seed exposes every private opening.
  auto prover = make_prover("honest:uniform", g, inst.coloring, 5);
  auto verifier = make_verifier("human", g, 5);
  SessionEngine twin({g, 25, 5, true}, *prover.agent, *verifier.agent);
  twin.pump();

  std::vector<std::string> bob_view;
  std::vector<std::string> unopened_salts;
  Rng rng(1);
  for (int round = 0; round < 25; ++round) {
    auto st = mgr.get_session("v1", bob);
    bob_view.push_back(st.dump());
    const auto* pending = twin.pending_round();
    ASSERT_NE(pending, nullptr);
    for (std::size_t v = 0; v < g.n(); ++v) ASSERT_EQ(st["commitments"][v], to_hex(pending->commitments()[v]));
    const Edge e = g.edges()[rng.uniform_index(g.m())];
    for (const auto& op : pending->private_openings())
      if (op.vertex != e.u && op.vertex != e.v) unopened_salts.push_back(to_hex(std::span<const std::uint8_t>(op.salt)));
    bob_view.push_back(mgr.post_action("v1", bob, {{"type", "submit_challenge"}, {"edge", store::edge_json(e)}}).dump());
    verifier.inbox->submit(e);
    twin.pump();
  }
  bob_view.push_back(mgr.stream_events("v1", bob, 0).dump());
  bob_view.push_back(mgr.stream_events("v1", "", 0).dump());
  EXPECT_EQ(mgr.get_session("v1", bob)["verdict"], "accepted");

  ASSERT_FALSE(unopened_salts.empty());
  for (const auto& text : bob_view) {
    EXPECT_EQ(text.find("\"secret\""), std::string::npos);
    EXPECT_EQ(text.find("\"tokens\""), std::string::npos);
    EXPECT_EQ(text.find("permutation_history"), std::string::npos);
    for (const auto& salt : unopened_salts) ASSERT_EQ(text.find(salt), std::string::npos) << salt;
  }
  // Openings carry exactly the two challenged vertices.
  auto events = mgr.stream_events("v1", bob, 0)["events"];
  for (const auto& ev : events)
    if (ev["kind"] == "openings_posted") {
      const auto& ops = ev["payload"]["openings"];
      ASSERT_EQ(ops.size(), 2u);
      EXPECT_TRUE(g.has_edge({ops[0]["vertex"].get<Vertex>(), ops[1]["vertex"].get<Vertex>()}));
    }
}

TEST(Manager, ProverChoicesAreHiddenFromOtherRoles) {
  SessionManager mgr(options(fresh_dir("hidden")));
  auto created = mgr.create_session(human_pair("h1"));
  const std::string alice = created["tokens"]["alice"], bob = created["tokens"]["bob"];
  mgr.post_action("h1", alice, {{"type", "submit_permutation"}, {"rank", 4}});
  auto count_inputs = [&](const std::string& token) {
    int n = 0;
    const auto out = mgr.stream_events("h1", token, 0);
    for (const auto& ev : out["events"]) n += ev["kind"] == "human_input";
    return n;
  };
  EXPECT_EQ(count_inputs(alice), 1);
  EXPECT_EQ(count_inputs(bob), 0);
  EXPECT_EQ(count_inputs(""), 0);
  EXPECT_EQ(mgr.get_session("h1", alice)["permutation_history"], json::array({4}));
}

TEST(Manager, LongPollReturnsWhenAnEventArrives) {
  SessionManager mgr(options(fresh_dir("poll")));
  auto created = mgr.create_session(human_pair("l1"));
  const std::string alice = created["tokens"]["alice"];
  const auto last = created["state"]["last_seq"].get<std::uint64_t>();
  std::thread poster([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    mgr.post_action("l1", alice, {{"type", "submit_permutation"}, {"rank", 0}});
  });
  const auto start = std::chrono::steady_clock::now();
  auto out = mgr.stream_events("l1", "", last, std::chrono::seconds(5));
  poster.join();
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(4));
  ASSERT_FALSE(out["events"].empty());
  EXPECT_EQ(out["events"][0]["kind"], "commitments_posted");
  EXPECT_TRUE(mgr.stream_events("l1", "", out["last_seq"].get<std::uint64_t>())["events"].empty());
}

TEST(Manager, HumanTimeoutBecomesAFault) {
  const auto dir = fresh_dir("timeout");
  {
    SessionManager mgr(options(dir, std::chrono::milliseconds(30)));
    mgr.create_session(human_pair("t1"));
    std::this_thread::sleep_for(std::chrono::milliseconds(80));
    mgr.sweep();
    auto st = mgr.get_session("t1", "");
    EXPECT_EQ(st["verdict"], "fault");
    EXPECT_EQ(st["fault_reason"], "human input timeout");
  }
  SessionManager again(options(dir));
  EXPECT_EQ(again.get_session("t1", "")["verdict"], "fault");
}

TEST(Manager, CrashRecoveryRestoresIdenticalPublicState) {
  const auto dir = fresh_dir("recovery");
  json before_alice, before_observer, events_before;
  std::string alice, bob;
  Edge e;
  {
    SessionManager mgr(options(dir));
    auto created = mgr.create_session(human_pair("r1", 10));
    alice = created["tokens"]["alice"];
    bob = created["tokens"]["bob"];
    e = first_edge(created["state"]);
    for (int i = 0; i < 4; ++i) {
      mgr.post_action("r1", alice, {{"type", "submit_permutation"}, {"rank", (i * 5) % 6}});
      mgr.post_action("r1", bob, {{"type", "submit_challenge"}, {"edge", store::edge_json(e)}});
    }
    mgr.post_action("r1", alice, {{"type", "submit_permutation"}, {"rank", 2}});
    mgr.create_session({{"id", "r2"}, {"rounds", 5}, {"seed", 1}, {"generate", {{"n", 6}, {"seed", 2}}}});
    before_alice = mgr.get_session("r1", alice);
    before_observer = mgr.get_session("r1", "");
    events_before = mgr.stream_events("r1", bob, 0);
  }
  SessionManager mgr(options(dir));
  auto ids = mgr.session_ids();
  EXPECT_EQ(ids, (std::vector<std::string>{"r1", "r2"}));
  EXPECT_EQ(mgr.get_session("r1", alice), before_alice);
  EXPECT_EQ(mgr.get_session("r1", ""), before_observer);
  EXPECT_EQ(mgr.stream_events("r1", bob, 0), events_before);
  EXPECT_EQ(mgr.get_session("r2", "")["verdict"], "accepted");

  // The recovered session continues and its log still replays.
  mgr.post_action("r1", bob, {{"type", "submit_challenge"}, {"edge", store::edge_json(e)}});
  for (int i = 5; i < 10; ++i) {
    mgr.post_action("r1", alice, {{"type", "submit_permutation"}, {"rank", 1}});
    mgr.post_action("r1", bob, {{"type", "submit_challenge"}, {"edge", store::edge_json(e)}});
  }
  EXPECT_EQ(mgr.get_session("r1", "")["verdict"], "accepted");
  auto rec = store::load_session(store::session_log_path(dir, "r1"), "r1");
  EXPECT_EQ(store::replay(rec).size(), 10u);
}

TEST(Manager, RecoveryRefusesALogThatDoesNotReExecute) {
  const auto dir = fresh_dir("badrecovery");
  {
    SessionManager mgr(options(dir));
    mgr.create_session({{"id", "b1"}, {"rounds", 5}, {"seed", 1}, {"generate", {{"n", 6}, {"seed", 2}}}});
  }
  // Re-seal the log under a different seed: the hash chain is fine but the
  // recorded rounds no longer match what the agents produce.
  const auto path = store::session_log_path(dir, "b1");
  auto rec = store::load_session(path, "b1");
  fs::remove(path);
  {
    store::EventLog log(path);
    for (auto ev : rec.events) {
      if (ev.kind == store::EventKind::session_created) ev.payload["seed"] = 2;
      log.append(ev);
    }
  }
  EXPECT_EQ(code_of([&] { SessionManager mgr(options(dir)); }), ErrorCode::integrity);
}

TEST(Manager, ExperimentFlowGatesReportsUntilDebrief) {
  const auto dir = fresh_dir("experiment");
  SessionManager mgr(options(dir));
  auto ex = mgr.create_experiment({{"id", "x1"}, {"subject", "sub"}, {"seed", 4}, {"rounds", 40}});
  const std::string token = ex["token"];
  EXPECT_EQ(ex["state"]["stage"], "test1");
  EXPECT_FALSE(ex["state"]["dashboards_unlocked"].get<bool>());
  EXPECT_EQ(code_of([&] { mgr.experiment_input("x1", {{"token", "bad"}, {"action", "advance"}}); }), ErrorCode::forbidden);
  EXPECT_EQ(code_of([&] { mgr.experiment_input("x1", {{"token", token}, {"action", "advance"}}); }), ErrorCode::wrong_phase);
  EXPECT_EQ(code_of([&] { mgr.experiment_input("x1", {{"token", token}, {"action", "start_session"}}); }),
            ErrorCode::wrong_phase);

  auto draw = [&](std::size_t k, std::size_t n, std::uint64_t seed) {
    auto ranks = lab::sample_sequence(models::repetition_avoider(k, 1.0), n, seed);
    for (auto r : ranks) mgr.experiment_input("x1", {{"token", token}, {"action", "draw"}, {"k", k}, {"rank", r}});
  };
  draw(3, 100, 1);
  EXPECT_EQ(code_of([&] { draw(3, 1, 9); }), ErrorCode::wrong_phase);
  EXPECT_EQ(code_of([&] { mgr.experiment_input("x1", {{"token", token}, {"action", "draw"}, {"k", 2}, {"rank", 0}}); }),
            ErrorCode::invalid_argument);
  EXPECT_EQ(code_of([&] { mgr.get_report("x1", false); }), ErrorCode::gated);
  mgr.experiment_input("x1", {{"token", token}, {"action", "advance"}});
  draw(2, 100, 2);
  draw(4, 100, 3);
  mgr.experiment_input("x1", {{"token", token}, {"action", "advance"}});

  auto started = mgr.experiment_input("x1", {{"token", token}, {"action", "start_session"}});
  const std::string sid = started["session"]["id"], alice = started["session"]["token"];
  auto st = mgr.get_session(sid, alice);
  EXPECT_EQ(st["experiment"]["stage"], "test3");
  EXPECT_EQ(st["rounds"], 40);
  EXPECT_EQ(st["history_visible"], ex["state"]["history_visible"]);
  for (int i = 0; i < 40; ++i) mgr.post_action(sid, alice, {{"type", "submit_permutation"}, {"rank", 0}});
  EXPECT_EQ(mgr.get_session(sid, "")["phase"], "finished");
  EXPECT_EQ(code_of([&] { mgr.get_report(sid, true); }), ErrorCode::gated);

  auto debrief = mgr.experiment_input("x1", {{"token", token}, {"action", "advance"}});
  EXPECT_EQ(debrief["stage"], "debrief");
  EXPECT_TRUE(debrief["dashboards_unlocked"].get<bool>());
  auto report = mgr.get_report(sid, true);
  // An always-identity prover leaks the whole partition.
  EXPECT_DOUBLE_EQ(report["attack"]["coverage"].get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(report["attack"]["accuracy"].get<double>(), 1.0);
  // The k=4 block (100 draws) is below the battery's 5 * 4! minimum.
  auto xr = mgr.get_report("x1", false);
  EXPECT_EQ(xr["reports"].size(), 3u);
  ASSERT_EQ(xr["skipped"].size(), 1u);
  EXPECT_EQ(xr["skipped"][0]["test"], "test2/k4");
  EXPECT_EQ(xr["aggregate"]["groups"].size(), 2u);

  mgr.experiment_input("x1", {{"token", token}, {"action", "advance"}});
  auto t4 = mgr.experiment_input("x1", {{"token", token}, {"action", "start_session"}});
  EXPECT_NE(mgr.get_experiment("x1")["instruction"], started["instruction"]);
  EXPECT_EQ(mgr.get_session(t4["session"]["id"], "")["rounds"], 40);

  // The experiment's progress survives a restart.
  SessionManager again(options(dir));
  auto state = again.get_experiment("x1");
  EXPECT_EQ(state["stage"], "test4");
  EXPECT_EQ(state["session"], t4["session"]["id"]);
  EXPECT_EQ(again.get_report("x1", false)["reports"].size(), 3u);
}

// ---- HTTP -----------------------------------------------------------------------

class HttpApi : public ::testing::Test {
 protected:
  void SetUp() override {
    mgr_ = std::make_unique<SessionManager>(options(fresh_dir(std::string("http_") + ::testing::UnitTest::GetInstance()->current_test_info()->name())));
    mount_routes(srv_, *mgr_);
    port_ = srv_.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { srv_.listen_after_bind(); });
    srv_.wait_until_ready();
  }
  void TearDown() override {
    srv_.stop();
    thread_.join();
  }

  httplib::Client client() { return httplib::Client("127.0.0.1", port_); }

  static json body(const httplib::Result& r) { return json::parse(r->body); }

  httplib::Server srv_;
  std::unique_ptr<SessionManager> mgr_;
  int port_ = 0;
  std::thread thread_;
};

TEST_F(HttpApi, SessionLifecycleAndStatusCodes) {
  auto cli = client();
  auto health = cli.Get("/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);

  auto created = cli.Post("/sessions", human_pair("w1").dump(), "application/json");
  ASSERT_TRUE(created);
  ASSERT_EQ(created->status, 201) << created->body;
  const auto c = body(created);
  const std::string alice = c["tokens"]["alice"], bob = c["tokens"]["bob"];

  auto bad_json = cli.Post("/sessions", "{", "application/json");
  EXPECT_EQ(bad_json->status, 400);
  EXPECT_EQ(body(bad_json)["code"], "parse_error");

  EXPECT_EQ(cli.Get("/sessions/missing")->status, 404);
  EXPECT_EQ(cli.Get("/sessions/w1", {{"X-Role-Token", "forged"}})->status, 403);
  auto as_alice = cli.Get("/sessions/w1", {{"X-Role-Token", alice}});
  EXPECT_EQ(body(as_alice)["you"], "alice");
  EXPECT_EQ(body(cli.Get("/sessions/w1?token=" + bob))["you"], "bob");

  const json challenge{{"type", "submit_challenge"}, {"edge", c["state"]["graph"]["edges"][0]}};
  auto early = cli.Post("/sessions/w1/actions", {{"X-Role-Token", bob}}, challenge.dump(), "application/json");
  EXPECT_EQ(early->status, 409);
  auto perm = cli.Post("/sessions/w1/actions", {{"X-Role-Token", alice}},
                       json{{"type", "submit_permutation"}, {"rank", 2}}.dump(), "application/json");
  EXPECT_EQ(perm->status, 200) << perm->body;
  EXPECT_EQ(body(perm)["phase"], "awaiting_challenge");
  auto chal = cli.Post("/sessions/w1/actions", json{{"type", "submit_challenge"}, {"edge", challenge["edge"]}, {"token", bob}}.dump(),
                       "application/json");
  EXPECT_EQ(chal->status, 200) << chal->body;

  auto events = cli.Get("/sessions/w1/events?after=0&wait_ms=10", {{"X-Role-Token", bob}});
  ASSERT_EQ(events->status, 200);
  const auto evs = body(events)["events"];
  ASSERT_FALSE(evs.empty());
  EXPECT_EQ(evs[0]["kind"], "session_created");
  EXPECT_FALSE(evs[0]["payload"].contains("secret"));

  // One round is too short for the battery.
  auto short_report = cli.Get("/reports/w1");
  EXPECT_EQ(short_report->status, 422);
  EXPECT_EQ(body(short_report)["code"], "insufficient_data");
  EXPECT_EQ(cli.Get("/reports/none")->status, 404);
}

TEST_F(HttpApi, ExperimentRoutesAndGating) {
  auto cli = client();
  auto created = cli.Post("/experiments", json{{"id", "e1"}, {"subject", "s"}, {"seed", 1}}.dump(), "application/json");
  ASSERT_EQ(created->status, 201) << created->body;
  const std::string token = body(created)["token"];
  EXPECT_EQ(body(cli.Get("/experiments/e1"))["stage"], "test1");
  auto draw = cli.Post("/experiments/e1/input", json{{"token", token}, {"action", "draw"}, {"k", 3}, {"rank", 5}}.dump(),
                       "application/json");
  EXPECT_EQ(draw->status, 200) << draw->body;
  EXPECT_EQ(body(draw)["blocks"][0]["draws"], 1);
  auto locked = cli.Get("/reports/e1");
  EXPECT_EQ(locked->status, 423);
  EXPECT_EQ(body(locked)["code"], "gated");
  EXPECT_EQ(cli.Post("/experiments/e1/input", json{{"token", token}, {"action", "advance"}}.dump(), "application/json")->status,
            409);
  EXPECT_EQ(cli.Post("/experiments/e1/input", json{{"token", "x"}, {"action", "advance"}}.dump(), "application/json")->status,
            403);
}

TEST(HttpStatus, ErrorCodeMapping) {
  EXPECT_EQ(http_status(ErrorCode::invalid_argument), 400);
  EXPECT_EQ(http_status(ErrorCode::parse_error), 400);
  EXPECT_EQ(http_status(ErrorCode::forbidden), 403);
  EXPECT_EQ(http_status(ErrorCode::not_found), 404);
  EXPECT_EQ(http_status(ErrorCode::wrong_phase), 409);
  EXPECT_EQ(http_status(ErrorCode::insufficient_data), 422);
  EXPECT_EQ(http_status(ErrorCode::gated), 423);
  EXPECT_EQ(http_status(ErrorCode::io_error), 500);
}
