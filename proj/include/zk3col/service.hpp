#pragma once

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "zk3col/agent_spec.hpp"
#include "zk3col/attacks.hpp"
#include "zk3col/error.hpp"
#include "zk3col/graph.hpp"
#include "zk3col/json_io.hpp"
#include "zk3col/protocol.hpp"
#include "zk3col/randomness_lab.hpp"
#include "zk3col/session_store.hpp"

namespace zk3col::service {

using json = nlohmann::json;
using SteadyClock = std::chrono::steady_clock;

enum class Role { alice, bob, observer };

inline const char* to_string(Role r) {
  switch (r) {
    case Role::alice: return "alice";
    case Role::bob: return "bob";
    case Role::observer: return "observer";
  }
  return "?";
}

struct ServiceOptions {
  std::filesystem::path data_dir = "data";
  std::chrono::milliseconds human_timeout = kDefaultExternalTimeout;
  store::Clock clock = store::wall_clock_ms;
};

inline std::string random_token(std::size_t bytes = 16) {
  static std::mutex mu;
  static std::random_device rd;
  std::lock_guard lock(mu);
  std::vector<std::uint8_t> buf(bytes);
  for (auto& b : buf) b = static_cast<std::uint8_t>(rd());
  return to_hex(std::span<const std::uint8_t>(buf));
}

// Records every permutation rank the wrapped prover emits.
class RecordingProver : public ProverAgent {
 public:
  explicit RecordingProver(std::unique_ptr<ProverAgent> inner) : inner_(std::move(inner)) {}
  std::string descriptor() const override { return inner_->descriptor(); }
  Coloring assignment(std::span<const Edge> history) override { return inner_->assignment(history); }
  Permutation next_permutation() override {
    auto phi = inner_->next_permutation();
    ranks_.push_back(phi.rank());
    return phi;
  }
  bool ready() const override { return inner_->ready(); }
  OpeningPair open(const ProverRound& round, Edge challenge) override { return inner_->open(round, challenge); }
  const std::vector<std::size_t>& ranks() const { return ranks_; }

 private:
  std::unique_ptr<ProverAgent> inner_;
  std::vector<std::size_t> ranks_;
};

struct ExperimentLink {
  std::string id;
  std::string stage;
};

// One live protocol session. All access goes through `mu`, which is the
// session's serializing queue.
struct LiveSession {
  std::mutex mu;
  std::condition_variable changed;

  std::string id;
  store::SessionMeta meta;
  std::string alice_spec;
  std::string bob_spec;
  std::string alice_token;
  std::string bob_token;
  std::chrono::milliseconds timeout{kDefaultExternalTimeout};
  std::optional<ExperimentLink> experiment;
  bool history_visible = true;

  std::unique_ptr<RecordingProver> alice;
  std::shared_ptr<ExternalInbox<std::size_t>> alice_inbox;
  std::unique_ptr<VerifierAgent> bob;
  std::shared_ptr<ExternalInbox<Edge>> bob_inbox;
  std::unique_ptr<SessionEngine> engine;
  std::unique_ptr<store::EventLog> log;
  std::unique_ptr<store::SessionLogger> logger;
  std::vector<store::EventRecord> events;
  SteadyClock::time_point waiting_since = SteadyClock::now();

  bool alice_human() const { return alice_inbox != nullptr; }
  bool bob_human() const { return bob_inbox != nullptr; }
};

struct Experiment {
  std::mutex mu;
  std::string id;
  std::string token;
  lab::ExperimentPlan plan;
  std::size_t stage_index = 0;
  std::map<std::string, std::vector<std::size_t>> draws;  // "test1/k3" -> ranks
  std::map<std::string, std::string> sessions;            // stage -> session id
  std::unique_ptr<store::EventLog> log;

  bool done() const { return stage_index >= plan.stages.size(); }
  const lab::Stage* stage() const { return done() ? nullptr : &plan.stages[stage_index]; }
  std::size_t debrief_index() const {
    for (std::size_t i = 0; i < plan.stages.size(); ++i)
      if (plan.stages[i].kind == lab::StageKind::debrief) return i;
    return plan.stages.size();
  }
  bool dashboards_locked() const { return stage_index < debrief_index(); }
};

inline std::string block_key(lab::StageKind stage, std::size_t k) {
  return std::string(lab::to_string(stage)) + "/k" + std::to_string(k);
}

class SessionManager {
 public:
  explicit SessionManager(ServiceOptions opts) : opts_(std::move(opts)) {
    std::filesystem::create_directories(opts_.data_dir / "sessions");
    std::filesystem::create_directories(opts_.data_dir / "experiments");
    recover();
  }

  const ServiceOptions& options() const { return opts_; }

  // ---- Sessions ---------------------------------------------------------------

  json create_session(const json& req) {
    auto s = std::make_shared<LiveSession>();
    s->id = req.contains("id") ? req.at("id").get<std::string>() : "s-" + random_token(8);
    if (s->id.empty() || s->id.find_first_of("/\\. ") != std::string::npos)
      throw Error(ErrorCode::invalid_argument, "invalid session id");
    {
      std::shared_lock lock(registry_mu_);
      if (sessions_.count(s->id)) throw Error(ErrorCode::invalid_argument, "session id already exists");
    }
    auto [graph, secret] = graph_from_request(req);
    store::SessionMeta& meta = s->meta;
    meta.graph = std::move(graph);
    meta.secret = std::move(secret);
    meta.seed = req.value("seed", std::uint64_t{0});
    meta.abort_on_reject = req.value("abort_on_reject", true);
    const std::size_t requested = req.value("rounds", std::size_t{0});
    SessionConfig cfg{meta.graph, requested, meta.seed, meta.abort_on_reject};
    cfg.validate();
    meta.rounds = cfg.effective_rounds();
    s->alice_spec = req.value("alice", std::string("honest:uniform"));
    s->bob_spec = req.value("bob", std::string("uniform"));
    s->timeout = std::chrono::milliseconds(req.value("timeout_ms", static_cast<long long>(opts_.human_timeout.count())));
    if (req.contains("experiment"))
      s->experiment = ExperimentLink{req["experiment"].at("id").get<std::string>(),
                                     req["experiment"].at("stage").get<std::string>()};
    s->history_visible = req.value("history_visible", true);
    s->alice_token = random_token();
    s->bob_token = random_token();
    auto assignment = build_agents(*s);
    meta.alice = s->alice->descriptor();
    meta.bob = s->bob->descriptor();
    if (!meta.secret && assignment.size() && is_proper(meta.graph, assignment)) meta.secret = assignment;
    meta.extra = {{"alice_spec", s->alice_spec},
                  {"bob_spec", s->bob_spec},
                  {"tokens", {{"alice", s->alice_token}, {"bob", s->bob_token}}},
                  {"timeout_ms", s->timeout.count()},
                  {"history_visible", s->history_visible}};
    if (s->experiment) meta.extra["experiment"] = {{"id", s->experiment->id}, {"stage", s->experiment->stage}};

    s->log = std::make_unique<store::EventLog>(store::session_log_path(opts_.data_dir, s->id), opts_.clock);
    attach_logger(*s);
    s->engine = std::make_unique<SessionEngine>(SessionConfig{meta.graph, meta.rounds, meta.seed, meta.abort_on_reject},
                                                *s->alice, *s->bob, s->logger.get());
    {
      std::lock_guard lock(s->mu);
      s->logger->created(meta);
      s->engine->pump();
      s->waiting_since = SteadyClock::now();
    }
    {
      std::unique_lock lock(registry_mu_);
      sessions_[s->id] = s;
    }
    // Simulated roles still get tokens so an operator can watch as them.
    json out{{"id", s->id}, {"tokens", {{"alice", s->alice_token}, {"bob", s->bob_token}}}};
    std::lock_guard lock(s->mu);
    out["state"] = state_locked(*s, Role::observer);
    return out;
  }

  json get_session(const std::string& id, const std::string& token) {
    auto s = find_session(id);
    std::lock_guard lock(s->mu);
    expire_locked(*s);
    return state_locked(*s, role_of(*s, token, true));
  }

  json post_action(const std::string& id, const std::string& token, const json& action) {
    auto s = find_session(id);
    std::lock_guard lock(s->mu);
    expire_locked(*s);
    const Role role = role_of(*s, token, false);
    if (s->engine->phase() == Phase::finished) throw Error(ErrorCode::wrong_phase, "session finished");
    const std::string type = action.value("type", "");
    if (type == "submit_permutation") {
      if (role != Role::alice) throw Error(ErrorCode::forbidden, "only the prover submits permutations");
      if (!s->alice_human()) throw Error(ErrorCode::forbidden, "prover role is simulated in this session");
      if (s->engine->phase() != Phase::awaiting_permutation)
        throw Error(ErrorCode::wrong_phase, std::string("session is ") + to_string(s->engine->phase()));
      if (!action.contains("rank") || !action["rank"].is_number_integer())
        throw Error(ErrorCode::invalid_argument, "submit_permutation needs an integer rank");
      const auto rank = action["rank"].get<long long>();
      if (rank < 0 || rank >= 6) throw Error(ErrorCode::invalid_argument, "rank must be in 0..5");
      s->logger->human_input({{"role", "alice"},
                              {"action", "submit_permutation"},
                              {"round", s->engine->current_round()},
                              {"rank", rank}});
      s->alice_inbox->submit(static_cast<std::size_t>(rank));
    } else if (type == "submit_challenge") {
      if (role != Role::bob) throw Error(ErrorCode::forbidden, "only the verifier submits challenges");
      if (!s->bob_human()) throw Error(ErrorCode::forbidden, "verifier role is simulated in this session");
      if (s->engine->phase() != Phase::awaiting_challenge)
        throw Error(ErrorCode::wrong_phase, std::string("session is ") + to_string(s->engine->phase()));
      Edge e;
      try {
        e = store::edge_from_json(action.at("edge"));
      } catch (const json::exception&) {
        throw Error(ErrorCode::invalid_argument, "submit_challenge needs edge [u, v]");
      }
      if (!s->meta.graph.has_edge(e)) throw Error(ErrorCode::invalid_argument, "challenge is not an edge of the graph");
      if (e.u > e.v) std::swap(e.u, e.v);
      s->logger->human_input({{"role", "bob"},
                              {"action", "submit_challenge"},
                              {"round", s->engine->current_round()},
                              {"edge", store::edge_json(e)}});
      s->bob_inbox->submit(e);
    } else {
      throw Error(ErrorCode::invalid_argument, "unknown action type '" + type + "'");
    }
    s->engine->pump();
    s->waiting_since = SteadyClock::now();
    s->changed.notify_all();
    return state_locked(*s, role);
  }

  // Role-filtered events with seq > after. Waits up to `wait` for new events.
  json stream_events(const std::string& id, const std::string& token, std::uint64_t after,
                     std::chrono::milliseconds wait = std::chrono::milliseconds{0}) {
    auto s = find_session(id);
    std::unique_lock lock(s->mu);
    expire_locked(*s);
    const Role role = role_of(*s, token, true);
    auto has_new = [&] { return !s->events.empty() && s->events.back().seq > after; };
    if (wait.count() > 0 && !has_new() && s->engine->phase() != Phase::finished)
      s->changed.wait_for(lock, wait, [&] { return has_new() || s->engine->phase() == Phase::finished; });
    json events = json::array();
    for (const auto& ev : s->events) {
      if (ev.seq <= after) continue;
      if (auto filtered = filter_event(ev, role)) events.push_back(std::move(*filtered));
    }
    return {{"events", events},
            {"finished", s->engine->phase() == Phase::finished},
            {"last_seq", s->events.empty() ? 0 : s->events.back().seq}};
  }

  // Converts overdue human waits into session faults.
  void sweep() {
    std::vector<std::shared_ptr<LiveSession>> all;
    {
      std::shared_lock lock(registry_mu_);
      for (auto& [_, s] : sessions_) all.push_back(s);
    }
    for (auto& s : all) {
      std::lock_guard lock(s->mu);
      expire_locked(*s);
    }
  }

  std::vector<std::string> session_ids() const {
    std::shared_lock lock(registry_mu_);
    std::vector<std::string> ids;
    for (const auto& [id, _] : sessions_) ids.push_back(id);
    return ids;
  }

  // ---- Experiments ----------------------------------------------------------------

  json create_experiment(const json& req) {
    auto e = std::make_shared<Experiment>();
    e->id = req.contains("id") ? req.at("id").get<std::string>() : "x-" + random_token(8);
    if (e->id.empty() || e->id.find_first_of("/\\. ") != std::string::npos)
      throw Error(ErrorCode::invalid_argument, "invalid experiment id");
    {
      std::shared_lock lock(registry_mu_);
      if (experiments_.count(e->id)) throw Error(ErrorCode::invalid_argument, "experiment id already exists");
    }
    const std::string subject = req.value("subject", e->id);
    const auto seed = req.value("seed", std::uint64_t{0});
    const auto rounds = req.value("rounds", std::size_t{300});
    if (rounds < 1 || rounds > kMaxRounds) throw Error(ErrorCode::invalid_argument, "rounds out of range");
    e->plan = lab::make_experiment_plan(subject, seed, rounds);
    e->token = random_token();
    e->log = std::make_unique<store::EventLog>(experiment_log_path(e->id), opts_.clock);
    e->log->append(e->id, store::EventKind::experiment_stage,
                   {{"created", true}, {"subject", subject}, {"seed", seed}, {"rounds", rounds}, {"token", e->token},
                    {"stage_index", 0}, {"stage", lab::to_string(e->plan.stages[0].kind)}});
    {
      std::unique_lock lock(registry_mu_);
      experiments_[e->id] = e;
    }
    std::lock_guard lock(e->mu);
    return {{"id", e->id}, {"token", e->token}, {"plan", zk3col::to_json(e->plan)}, {"state", experiment_state_locked(*e)}};
  }

  json experiment_input(const std::string& id, const json& req) {
    auto e = find_experiment(id);
    std::unique_lock lock(e->mu);
    if (req.value("token", "") != e->token) throw Error(ErrorCode::forbidden, "bad experiment token");
    if (e->done()) throw Error(ErrorCode::wrong_phase, "experiment finished");
    const auto& stage = *e->stage();
    const std::string action = req.value("action", "");
    if (action == "draw") {
      if (stage.blocks.empty()) throw Error(ErrorCode::wrong_phase, "this stage takes no free draws");
      const auto k = req.value("k", std::size_t{0});
      auto block = std::find_if(stage.blocks.begin(), stage.blocks.end(), [&](const lab::DrawBlock& b) { return b.k == k; });
      if (block == stage.blocks.end()) throw Error(ErrorCode::invalid_argument, "no block with this k in the stage");
      if (!req.contains("rank") || !req["rank"].is_number_integer())
        throw Error(ErrorCode::invalid_argument, "draw needs an integer rank");
      const auto rank = req["rank"].get<long long>();
      if (rank < 0 || static_cast<std::size_t>(rank) >= factorial(k))
        throw Error(ErrorCode::invalid_argument, "rank out of range");
      auto& seq = e->draws[block_key(stage.kind, k)];
      if (seq.size() >= block->draws) throw Error(ErrorCode::wrong_phase, "block already complete");
      e->log->append(e->id, store::EventKind::human_input,
                     {{"role", "alice"}, {"action", "draw"}, {"stage", lab::to_string(stage.kind)}, {"k", k}, {"rank", rank}});
      seq.push_back(static_cast<std::size_t>(rank));
    } else if (action == "start_session") {
      if (stage.rounds == 0) throw Error(ErrorCode::wrong_phase, "this stage has no protocol session");
      if (e->sessions.count(lab::to_string(stage.kind))) throw Error(ErrorCode::wrong_phase, "session already started");
      json sreq{{"alice", "human"},
                {"bob", req.value("bob", std::string("uniform"))},
                {"rounds", stage.rounds},
                {"seed", derive_seed(e->plan.seed, std::string(lab::to_string(stage.kind)) + e->plan.subject)},
                {"abort_on_reject", false},
                {"history_visible", e->plan.history_visible},
                {"experiment", {{"id", e->id}, {"stage", lab::to_string(stage.kind)}}}};
      if (req.contains("graph")) sreq["graph"] = req["graph"];
      if (req.contains("coloring")) sreq["coloring"] = req["coloring"];
      sreq["generate"] = req.value("generate", json{{"n", 12}, {"edge_prob", 0.5}, {"seed", e->plan.seed}});
      if (sreq.contains("graph")) sreq.erase("generate");
      const std::string stage_name = lab::to_string(stage.kind);
      lock.unlock();
      auto created = create_session(sreq);
      lock.lock();
      e->sessions[stage_name] = created["id"];
      e->log->append(e->id, store::EventKind::experiment_stage,
                     {{"stage_index", e->stage_index}, {"stage", stage_name}, {"session", created["id"]}});
      json out = experiment_state_locked(*e);
      out["session"] = {{"id", created["id"]}, {"token", created["tokens"]["alice"]}};
      return out;
    } else if (action == "advance") {
      if (!stage_complete_locked(*e)) throw Error(ErrorCode::wrong_phase, "current stage is not complete");
      ++e->stage_index;
      e->log->append(e->id, store::EventKind::experiment_stage,
                     {{"stage_index", e->stage_index},
                      {"stage", e->done() ? std::string("done") : std::string(lab::to_string(e->stage()->kind))}});
    } else {
      throw Error(ErrorCode::invalid_argument, "unknown experiment action '" + action + "'");
    }
    return experiment_state_locked(*e);
  }

  json get_experiment(const std::string& id) {
    auto e = find_experiment(id);
    std::lock_guard lock(e->mu);
    return experiment_state_locked(*e);
  }

  // ---- Reports ------------------------------------------------------------------

  json get_report(const std::string& id, bool attack) {
    std::shared_ptr<LiveSession> s;
    std::shared_ptr<Experiment> e;
    {
      std::shared_lock lock(registry_mu_);
      if (auto it = sessions_.find(id); it != sessions_.end()) s = it->second;
      if (auto it = experiments_.find(id); it != experiments_.end()) e = it->second;
    }
    if (s) return session_report(*s, attack);
    if (e) return experiment_report(*e);
    throw Error(ErrorCode::not_found, "no session or experiment '" + id + "'");
  }

 private:
  // ---- helpers --------------------------------------------------------------------

  std::pair<Graph, std::optional<Coloring>> graph_from_request(const json& req) {
    try {
      if (req.contains("graph")) {
        Graph g = parse_graph(req.at("graph").get<std::string>());
        std::optional<Coloring> c;
        if (req.contains("coloring")) {
          c = Coloring(req.at("coloring").get<std::vector<Color>>());
          if (c->size() != g.n()) throw Error(ErrorCode::invalid_argument, "coloring does not cover the graph");
        }
        return {std::move(g), std::move(c)};
      }
      if (req.contains("generate")) {
        const auto& gen = req.at("generate");
        auto inst = planted_3colorable(gen.at("n").get<std::size_t>(), gen.value("edge_prob", 0.5),
                                       gen.value("seed", std::uint64_t{0}));
        return {std::move(inst.graph), std::move(inst.coloring)};
      }
    } catch (const json::exception& ex) {
      throw Error(ErrorCode::invalid_argument, std::string("bad graph request: ") + ex.what());
    }
    throw Error(ErrorCode::invalid_argument, "request needs \"graph\" (edge-list text) or \"generate\"");
  }

  // Returns the prover's committed assignment (empty for adaptive provers).
  Coloring build_agents(LiveSession& s) {
    const std::string alice = s.alice_spec == "human" ? "honest:human" : s.alice_spec;
    auto prover = make_prover(alice, s.meta.graph, s.meta.secret, s.meta.seed, s.timeout);
    s.alice = std::make_unique<RecordingProver>(std::move(prover.agent));
    s.alice_inbox = prover.inbox;
    auto verifier = make_verifier(s.bob_spec, s.meta.graph, s.meta.seed, s.timeout);
    s.bob = std::move(verifier.agent);
    s.bob_inbox = verifier.inbox;
    return prover.assignment;
  }

  void attach_logger(LiveSession& s) {
    s.logger = std::make_unique<store::SessionLogger>(*s.log, s.id, [&s](const store::EventRecord& r) {
      s.events.push_back(r);
      s.changed.notify_all();
    });
  }

  std::shared_ptr<LiveSession> find_session(const std::string& id) const {
    std::shared_lock lock(registry_mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorCode::not_found, "unknown session '" + id + "'");
    return it->second;
  }

  std::shared_ptr<Experiment> find_experiment(const std::string& id) const {
    std::shared_lock lock(registry_mu_);
    auto it = experiments_.find(id);
    if (it == experiments_.end()) throw Error(ErrorCode::not_found, "unknown experiment '" + id + "'");
    return it->second;
  }

  static Role role_of(const LiveSession& s, const std::string& token, bool allow_observer) {
    if (!token.empty() && token == s.alice_token) return Role::alice;
    if (!token.empty() && token == s.bob_token) return Role::bob;
    if (allow_observer && token.empty()) return Role::observer;
    throw Error(ErrorCode::forbidden, "invalid role token");
  }

  void expire_locked(LiveSession& s) {
    if (s.engine->phase() == Phase::finished) return;
    const bool waiting_on_human = (s.engine->phase() == Phase::awaiting_permutation && s.alice_human()) ||
                                  (s.engine->phase() == Phase::awaiting_challenge && s.bob_human());
    if (waiting_on_human && SteadyClock::now() - s.waiting_since > s.timeout) {
      s.engine->fault("human input timeout");
      s.changed.notify_all();
    }
  }

  // Events as delivered to a role. The secret and service-private settings
  // are never delivered; the prover's permutation choices are hidden from
  // everyone but the prover.
  static std::optional<json> filter_event(const store::EventRecord& ev, Role role) {
    json j{{"v", store::kSchemaVersion}, {"seq", ev.seq},   {"ts", ev.ts},
           {"session", ev.session},      {"kind", store::to_string(ev.kind)}, {"payload", ev.payload}};
    if (ev.kind == store::EventKind::session_created) {
      j["payload"].erase("secret");
      j["payload"].erase("extra");
    }
    if (ev.kind == store::EventKind::human_input && ev.payload.value("role", "") == "alice" && role != Role::alice)
      return std::nullopt;
    return j;
  }

  json state_locked(const LiveSession& s, Role role) const {
    const auto& eng = *s.engine;
    json st{{"id", s.id},
            {"you", to_string(role)},
            {"phase", to_string(eng.phase())},
            {"round", eng.current_round()},
            {"rounds", s.meta.rounds},
            {"roles", {{"alice", s.alice_human() ? "human" : "simulated"}, {"bob", s.bob_human() ? "human" : "simulated"}}},
            {"graph", store::graph_json(s.meta.graph)},
            {"last_seq", s.events.empty() ? 0 : s.events.back().seq}};
    if (s.experiment) st["experiment"] = {{"id", s.experiment->id}, {"stage", s.experiment->stage}};
    if (eng.phase() == Phase::finished) {
      st["verdict"] = to_string(eng.result().verdict);
      if (!eng.result().fault_reason.empty()) st["fault_reason"] = eng.result().fault_reason;
    }
    if (const auto* pending = eng.pending_round()) {
      json digests = json::array();
      for (const auto& c : pending->commitments()) digests.push_back(to_hex(c));
      st["commitments"] = digests;
    }
    json rounds = json::array();
    for (const auto& t : eng.result().transcripts)
      rounds.push_back({{"round", t.round_index},
                        {"edge", store::edge_json(t.challenge)},
                        {"openings", json::array({{{"vertex", t.openings.first.vertex}, {"color", t.openings.first.color}},
                                                  {{"vertex", t.openings.second.vertex}, {"color", t.openings.second.color}}})},
                        {"verdict", to_string(t.verdict)}});
    st["transcript"] = rounds;
    if (role == Role::alice) {
      st["history_visible"] = s.history_visible;
      if (s.history_visible) st["permutation_history"] = s.alice->ranks();
    }
    return st;
  }

  bool stage_complete_locked(const Experiment& e) {
    const auto& stage = *e.stage();
    for (const auto& b : stage.blocks) {
      auto it = e.draws.find(block_key(stage.kind, b.k));
      if (it == e.draws.end() || it->second.size() < b.draws) return false;
    }
    if (stage.rounds > 0) {
      auto it = e.sessions.find(lab::to_string(stage.kind));
      if (it == e.sessions.end()) return false;
      auto s = find_session(it->second);
      std::lock_guard lock(s->mu);
      expire_locked(*s);
      return s->engine->phase() == Phase::finished;
    }
    return true;
  }

  json experiment_state_locked(const Experiment& e) const {
    json st{{"id", e.id},
            {"subject", e.plan.subject},
            {"stage_index", e.stage_index},
            {"stage", e.done() ? std::string("done") : std::string(lab::to_string(e.stage()->kind))},
            {"history_visible", e.plan.history_visible},
            {"dashboards_unlocked", !e.dashboards_locked()}};
    if (const auto* stage = e.stage()) {
      st["instruction"] = stage->instruction;
      st["award_scoring"] = stage->award_scoring;
      json progress = json::array();
      for (const auto& b : stage->blocks) {
        auto it = e.draws.find(block_key(stage->kind, b.k));
        const auto done = it == e.draws.end() ? 0 : it->second.size();
        json block{{"k", b.k}, {"draws", done}, {"required", b.draws}};
        if (e.plan.history_visible && it != e.draws.end()) block["history"] = it->second;
        progress.push_back(block);
      }
      st["blocks"] = progress;
      if (stage->rounds > 0) {
        st["rounds"] = stage->rounds;
        if (auto it = e.sessions.find(lab::to_string(stage->kind)); it != e.sessions.end()) st["session"] = it->second;
      }
    }
    return st;
  }

  json session_report(LiveSession& s, bool attack) {
    if (s.experiment) {
      auto e = find_experiment(s.experiment->id);
      std::lock_guard lock(e->mu);
      if (e->dashboards_locked() && s.experiment->stage != "test4")
        throw Error(ErrorCode::gated, "reports are locked until the debrief stage");
    }
    std::lock_guard lock(s.mu);
    lab::SymbolSequence seq;
    seq.k = 3;
    seq.symbols = s.alice->ranks();
    seq.subject = s.id;
    seq.test = s.experiment ? s.experiment->stage : "session";
    seq.history_visible = s.history_visible;
    json out{{"session", s.id}, {"report", zk3col::to_json(lab::analyze_sequence(seq))}};
    if (attack) {
      const auto transcripts = s.engine->result().transcripts;
      const auto prior = PermutationPrior::from_model(fit_markov(seq.symbols, 3, 0.5));
      const auto h = infer_partition(transcripts, prior);
      std::optional<PartitionScore> score;
      if (s.meta.secret) score = partition_accuracy(h, *s.meta.secret);
      out["attack"] = attack_report_json(h, score, {{"perm_model", "fitted-markov"}, {"rounds", transcripts.size()}});
    }
    return out;
  }

  json experiment_report(Experiment& e) {
    std::vector<lab::SymbolSequence> seqs;
    {
      std::lock_guard lock(e.mu);
      if (e.dashboards_locked()) throw Error(ErrorCode::gated, "reports are locked until the debrief stage");
      for (const auto& stage : e.plan.stages)
        for (const auto& b : stage.blocks) {
          auto it = e.draws.find(block_key(stage.kind, b.k));
          if (it == e.draws.end()) continue;
          seqs.push_back({b.k, it->second, e.plan.subject, block_key(stage.kind, b.k), e.plan.history_visible});
        }
      for (const auto& [stage, sid] : e.sessions) {
        auto s = find_session(sid);
        std::lock_guard slock(s->mu);
        seqs.push_back({3, s->alice->ranks(), e.plan.subject, stage, e.plan.history_visible});
      }
    }
    json reports = json::array();
    json skipped = json::array();
    std::vector<lab::TestReport> rs;
    for (const auto& seq : seqs) {
      try {
        rs.push_back(lab::analyze_sequence(seq));
        reports.push_back(zk3col::to_json(rs.back()));
      } catch (const Error& err) {
        if (err.code() != ErrorCode::insufficient_data) throw;
        skipped.push_back({{"test", seq.test}, {"reason", err.what()}});
      }
    }
    if (rs.empty()) throw Error(ErrorCode::insufficient_data, "no sequence is long enough to analyze yet");
    return {{"experiment", e.id},
            {"reports", reports},
            {"skipped", skipped},
            {"aggregate", zk3col::to_json(lab::aggregate_reports(rs))}};
  }

  std::filesystem::path experiment_log_path(const std::string& id) const {
    return opts_.data_dir / "experiments" / (id + ".jsonl");
  }

  // ---- crash recovery -------------------------------------------------------------

  void recover() {
    for (const auto& entry : std::filesystem::directory_iterator(opts_.data_dir / "sessions")) {
      if (entry.path().extension() != ".jsonl") continue;
      for (auto& rec : store::load_sessions(entry.path())) recover_session(entry.path(), rec);
    }
    for (const auto& entry : std::filesystem::directory_iterator(opts_.data_dir / "experiments")) {
      if (entry.path().extension() != ".jsonl") continue;
      for (auto& rec : store::load_sessions(entry.path())) recover_experiment(entry.path(), rec);
    }
  }

  void recover_session(const std::filesystem::path& path, const store::SessionRecord& rec) {
    if (!rec.meta) throw Error(ErrorCode::integrity, "session log " + path.string() + " lacks session_created");
    auto s = std::make_shared<LiveSession>();
    s->id = rec.id;
    s->meta = *rec.meta;
    const auto& extra = s->meta.extra;
    s->alice_spec = extra.at("alice_spec").get<std::string>();
    s->bob_spec = extra.at("bob_spec").get<std::string>();
    s->alice_token = extra.at("tokens").at("alice").get<std::string>();
    s->bob_token = extra.at("tokens").at("bob").get<std::string>();
    s->timeout = std::chrono::milliseconds(extra.at("timeout_ms").get<long long>());
    s->history_visible = extra.value("history_visible", true);
    if (extra.contains("experiment"))
      s->experiment = ExperimentLink{extra["experiment"].at("id").get<std::string>(),
                                     extra["experiment"].at("stage").get<std::string>()};
    build_agents(*s);
    s->engine = std::make_unique<SessionEngine>(
        SessionConfig{s->meta.graph, s->meta.rounds, s->meta.seed, s->meta.abort_on_reject}, *s->alice, *s->bob, nullptr);
    s->engine->pump();
    for (const auto& ev : rec.events) {
      if (ev.kind != store::EventKind::human_input) continue;
      const auto role = ev.payload.value("role", "");
      if (role == "alice" && s->alice_inbox) s->alice_inbox->submit(ev.payload.at("rank").get<std::size_t>());
      if (role == "bob" && s->bob_inbox) s->bob_inbox->submit(store::edge_from_json(ev.payload.at("edge")));
      s->engine->pump();
    }
    if (rec.verdict == SessionVerdict::fault && s->engine->phase() != Phase::finished) s->engine->fault(rec.fault_reason);

    const auto stored = rec.transcripts();
    const auto& rebuilt = s->engine->result().transcripts;
    bool consistent = stored.size() == rebuilt.size();
    for (std::size_t i = 0; consistent && i < stored.size(); ++i)
      consistent = stored[i].commitments == rebuilt[i].commitments && stored[i].openings == rebuilt[i].openings &&
                   stored[i].verdict == rebuilt[i].verdict;
    if (!consistent) throw Error(ErrorCode::integrity, "session " + rec.id + " does not re-execute to its log");

    s->events = rec.events;
    s->log = std::make_unique<store::EventLog>(path, opts_.clock);
    attach_logger(*s);
    s->engine->set_observer(s->logger.get());
    s->waiting_since = SteadyClock::now();
    std::unique_lock lock(registry_mu_);
    sessions_[s->id] = s;
  }

  void recover_experiment(const std::filesystem::path& path, const store::SessionRecord& rec) {
    auto e = std::make_shared<Experiment>();
    e->id = rec.id;
    for (const auto& ev : rec.events) {
      const auto& p = ev.payload;
      if (ev.kind == store::EventKind::experiment_stage) {
        if (p.value("created", false)) {
          e->plan = lab::make_experiment_plan(p.at("subject").get<std::string>(), p.at("seed").get<std::uint64_t>(),
                                              p.at("rounds").get<std::size_t>());
          e->token = p.at("token").get<std::string>();
        }
        e->stage_index = p.at("stage_index").get<std::size_t>();
        if (p.contains("session")) e->sessions[p.at("stage").get<std::string>()] = p.at("session").get<std::string>();
      } else if (ev.kind == store::EventKind::human_input) {
        const auto stage = p.at("stage").get<std::string>();
        e->draws[stage + "/k" + std::to_string(p.at("k").get<std::size_t>())].push_back(p.at("rank").get<std::size_t>());
      }
    }
    e->log = std::make_unique<store::EventLog>(path, opts_.clock);
    std::unique_lock lock(registry_mu_);
    experiments_[e->id] = e;
  }

  ServiceOptions opts_;
  mutable std::shared_mutex registry_mu_;
  std::map<std::string, std::shared_ptr<LiveSession>> sessions_;
  std::map<std::string, std::shared_ptr<Experiment>> experiments_;
};

}  // namespace zk3col::service
