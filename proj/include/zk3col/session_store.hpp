#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "zk3col/commitment.hpp"
#include "zk3col/error.hpp"
#include "zk3col/graph.hpp"
#include "zk3col/hex.hpp"
#include "zk3col/protocol.hpp"
#include "zk3col/sha256.hpp"

namespace zk3col::store {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

enum class EventKind {
  session_created,
  commitments_posted,
  challenge_posted,
  openings_posted,
  round_verdict,
  session_verdict,
  experiment_stage,
  human_input,
};

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::session_created: return "session_created";
    case EventKind::commitments_posted: return "commitments_posted";
    case EventKind::challenge_posted: return "challenge_posted";
    case EventKind::openings_posted: return "openings_posted";
    case EventKind::round_verdict: return "round_verdict";
    case EventKind::session_verdict: return "session_verdict";
    case EventKind::experiment_stage: return "experiment_stage";
    case EventKind::human_input: return "human_input";
  }
  return "?";
}

inline EventKind event_kind_from_string(std::string_view s) {
  for (auto k : {EventKind::session_created, EventKind::commitments_posted, EventKind::challenge_posted,
                 EventKind::openings_posted, EventKind::round_verdict, EventKind::session_verdict,
                 EventKind::experiment_stage, EventKind::human_input})
    if (s == to_string(k)) return k;
  throw Error(ErrorCode::parse_error, "unknown event kind '" + std::string(s) + "'");
}

// One log line. `hash` is the hex SHA-256 of the line's other fields and
// `prev` repeats the hash of the previous line of the same session (empty for
// the first), so an edit to any field of any stored line is detectable.
struct EventRecord {
  std::uint64_t seq = 0;
  std::int64_t ts = 0;
  std::string session;
  EventKind kind = EventKind::session_created;
  json payload = json::object();
  std::string prev;
  std::string hash;  // as read from the line; to_line() always writes content_hash()

  json content() const {
    return {{"v", kSchemaVersion}, {"seq", seq},         {"ts", ts},    {"session", session},
            {"kind", to_string(kind)}, {"payload", payload}, {"prev", prev}};
  }

  std::string content_hash() const {
    const auto d = sha256(content().dump());
    return to_hex(std::span<const std::uint8_t>(d));
  }

  std::string to_line() const {
    auto j = content();
    j["hash"] = content_hash();
    return j.dump();
  }

  static EventRecord from_line(std::string_view line) {
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::parse_error, std::string("invalid JSON: ") + e.what());
    }
    try {
      if (j.at("v").get<int>() != kSchemaVersion) throw Error(ErrorCode::parse_error, "unsupported schema version");
      EventRecord r;
      r.seq = j.at("seq").get<std::uint64_t>();
      r.ts = j.at("ts").get<std::int64_t>();
      r.session = j.at("session").get<std::string>();
      r.kind = event_kind_from_string(j.at("kind").get<std::string>());
      r.payload = j.at("payload");
      r.prev = j.at("prev").get<std::string>();
      r.hash = j.at("hash").get<std::string>();
      return r;
    } catch (const json::exception& e) {
      throw Error(ErrorCode::parse_error, std::string("malformed event: ") + e.what());
    }
  }

  friend bool operator==(const EventRecord& a, const EventRecord& b) {
    return a.seq == b.seq && a.ts == b.ts && a.session == b.session && a.kind == b.kind && a.payload == b.payload &&
           a.prev == b.prev && a.hash == b.hash;
  }
};

using Clock = std::function<std::int64_t()>;

inline std::int64_t wall_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

// Append-only JSONL log. Reopening an existing file resumes its sequence
// numbers and hash chain. Single writer; appends are flushed before return.
class EventLog {
 public:
  explicit EventLog(std::filesystem::path path, Clock clock = wall_clock_ms)
      : path_(std::move(path)), clock_(std::move(clock)) {
    if (std::filesystem::exists(path_)) {
      std::ifstream in(path_);
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto r = EventRecord::from_line(line);
        heads_[r.session] = {r.seq, r.hash};
      }
    } else if (path_.has_parent_path()) {
      std::filesystem::create_directories(path_.parent_path());
    }
    out_.open(path_, std::ios::app | std::ios::binary);
    if (!out_) throw Error(ErrorCode::io_error, "cannot open log " + path_.string());
  }

  const std::filesystem::path& path() const { return path_; }

  std::uint64_t last_seq(const std::string& session) const {
    std::lock_guard lock(mu_);
    auto it = heads_.find(session);
    return it == heads_.end() ? 0 : it->second.seq;
  }

  // Appends a fully specified record. Fails on a sequence gap; fills in the
  // chain hash.
  EventRecord append(EventRecord event) {
    std::lock_guard lock(mu_);
    auto& head = heads_[event.session];
    if (event.seq != head.seq + 1)
      throw Error(ErrorCode::sequence_gap, "session " + event.session + ": expected seq " +
                                               std::to_string(head.seq + 1) + ", got " + std::to_string(event.seq));
    event.prev = head.hash;
    event.hash = event.content_hash();
    out_ << event.to_line() << '\n';
    out_.flush();
    if (!out_) throw Error(ErrorCode::io_error, "write failed on " + path_.string());
    head = {event.seq, event.hash};
    return event;
  }

  EventRecord append(const std::string& session, EventKind kind, json payload) {
    EventRecord r;
    r.seq = last_seq(session) + 1;
    r.ts = clock_();
    r.session = session;
    r.kind = kind;
    r.payload = std::move(payload);
    return append(std::move(r));
  }

 private:
  struct Head {
    std::uint64_t seq = 0;
    std::string hash;
  };
  std::filesystem::path path_;
  Clock clock_;
  mutable std::mutex mu_;
  std::map<std::string, Head> heads_;
  std::ofstream out_;
};

// ---- Payload encoding --------------------------------------------------------

inline json edge_json(Edge e) { return json::array({e.u, e.v}); }
inline Edge edge_from_json(const json& j) { return {j.at(0).get<Vertex>(), j.at(1).get<Vertex>()}; }

inline json graph_json(const Graph& g) {
  json edges = json::array();
  for (const auto& e : g.edges()) edges.push_back(edge_json(e));
  return {{"n", g.n()}, {"edges", edges}};
}

inline Graph graph_from_json(const json& j) {
  std::vector<Edge> edges;
  for (const auto& e : j.at("edges")) edges.push_back(edge_from_json(e));
  return Graph(j.at("n").get<std::size_t>(), std::move(edges));
}

inline json opening_json(const Opening& op) {
  return {{"vertex", op.vertex}, {"color", op.color}, {"salt", to_hex(std::span<const std::uint8_t>(op.salt))}};
}

inline Opening opening_from_json(const json& j) {
  return {j.at("vertex").get<Vertex>(), j.at("color").get<int>(), salt_from_hex(j.at("salt").get<std::string>())};
}

struct SessionMeta {
  Graph graph;
  std::size_t rounds = 0;
  std::uint64_t seed = 0;
  bool abort_on_reject = true;
  std::string alice;
  std::string bob;
  std::optional<Coloring> secret;
  json extra = json::object();  // roles, experiment binding, ...
};

inline json session_created_payload(const SessionMeta& meta) {
  json j{{"graph", graph_json(meta.graph)}, {"rounds", meta.rounds},   {"seed", meta.seed},
         {"abort_on_reject", meta.abort_on_reject}, {"alice", meta.alice}, {"bob", meta.bob}};
  if (meta.secret) j["secret"] = meta.secret->values();
  if (!meta.extra.empty()) j["extra"] = meta.extra;
  return j;
}

inline SessionMeta session_meta_from_json(const json& j) {
  SessionMeta m;
  m.graph = graph_from_json(j.at("graph"));
  m.rounds = j.at("rounds").get<std::size_t>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.abort_on_reject = j.at("abort_on_reject").get<bool>();
  m.alice = j.at("alice").get<std::string>();
  m.bob = j.at("bob").get<std::string>();
  if (j.contains("secret")) m.secret = Coloring(j.at("secret").get<std::vector<Color>>());
  if (j.contains("extra")) m.extra = j.at("extra");
  return m;
}

// Writes protocol events for one session as the engine produces them.
class SessionLogger : public SessionObserver {
 public:
  using Sink = std::function<void(const EventRecord&)>;

  SessionLogger(EventLog& log, std::string session_id, Sink sink = nullptr)
      : log_(&log), id_(std::move(session_id)), sink_(std::move(sink)) {}

  const std::string& session_id() const { return id_; }

  void created(const SessionMeta& meta) { append(EventKind::session_created, session_created_payload(meta)); }

  void on_commitments(std::size_t round, std::span<const Commitment> cms) override {
    json digests = json::array();
    for (const auto& c : cms) digests.push_back(to_hex(c));
    append(EventKind::commitments_posted, {{"round", round}, {"digests", digests}});
  }
  void on_challenge(std::size_t round, Edge e) override {
    append(EventKind::challenge_posted, {{"round", round}, {"edge", edge_json(e)}});
  }
  void on_openings(std::size_t round, const OpeningPair& ops) override {
    append(EventKind::openings_posted,
           {{"round", round}, {"openings", json::array({opening_json(ops.first), opening_json(ops.second)})}});
  }
  void on_round_verdict(std::size_t round, RoundVerdict v) override {
    append(EventKind::round_verdict, {{"round", round}, {"verdict", to_string(v)}});
  }
  void on_session_verdict(const SessionResult& r) override {
    json j{{"verdict", to_string(r.verdict)}, {"rounds_played", r.rounds_played}};
    if (!r.fault_reason.empty()) j["reason"] = r.fault_reason;
    append(EventKind::session_verdict, j);
  }

  void human_input(json payload) { append(EventKind::human_input, std::move(payload)); }
  void experiment_stage(json payload) { append(EventKind::experiment_stage, std::move(payload)); }

 private:
  void append(EventKind kind, json payload) {
    auto rec = log_->append(id_, kind, std::move(payload));
    if (sink_) sink_(rec);
  }

  EventLog* log_;
  std::string id_;
  Sink sink_;
};

// ---- Loading -------------------------------------------------------------------

struct StoredRound {
  RoundTranscript transcript;  // verdict field holds the stored verdict
  bool has_challenge = false;
  bool has_openings = false;
  bool has_verdict = false;
};

struct SessionRecord {
  std::string id;
  std::optional<SessionMeta> meta;
  std::vector<StoredRound> rounds;
  std::optional<SessionVerdict> verdict;
  std::size_t rounds_played = 0;
  std::string fault_reason;
  std::vector<json> human_inputs;
  std::vector<EventRecord> events;
  bool chain_ok = true;
  std::string chain_problem;

  std::vector<RoundTranscript> transcripts() const {
    std::vector<RoundTranscript> out;
    for (const auto& r : rounds)
      if (r.has_verdict) out.push_back(r.transcript);
    return out;
  }
};

namespace detail {

inline SessionVerdict session_verdict_from_string(std::string_view s) {
  if (s == "accepted") return SessionVerdict::accepted;
  if (s == "rejected") return SessionVerdict::rejected;
  if (s == "fault") return SessionVerdict::fault;
  throw Error(ErrorCode::parse_error, "unknown session verdict '" + std::string(s) + "'");
}

inline RoundVerdict round_verdict_from_string(std::string_view s) {
  if (s == "accept") return RoundVerdict::accept;
  if (s == "reject") return RoundVerdict::reject;
  throw Error(ErrorCode::parse_error, "unknown round verdict '" + std::string(s) + "'");
}

inline void apply_event(SessionRecord& rec, const EventRecord& ev) {
  const auto& p = ev.payload;
  auto round_slot = [&](std::size_t round) -> StoredRound& {
    if (round > rec.rounds.size()) throw Error(ErrorCode::parse_error, "round index skips ahead");
    if (round == rec.rounds.size()) {
      rec.rounds.emplace_back();
      rec.rounds.back().transcript.round_index = round;
    }
    return rec.rounds[round];
  };
  switch (ev.kind) {
    case EventKind::session_created:
      rec.meta = session_meta_from_json(p);
      break;
    case EventKind::commitments_posted: {
      auto& slot = round_slot(p.at("round").get<std::size_t>());
      slot.transcript.commitments.clear();
      for (const auto& d : p.at("digests")) slot.transcript.commitments.push_back(commitment_from_hex(d.get<std::string>()));
      break;
    }
    case EventKind::challenge_posted: {
      auto& slot = round_slot(p.at("round").get<std::size_t>());
      slot.transcript.challenge = edge_from_json(p.at("edge"));
      slot.has_challenge = true;
      break;
    }
    case EventKind::openings_posted: {
      auto& slot = round_slot(p.at("round").get<std::size_t>());
      const auto& ops = p.at("openings");
      if (ops.size() != 2) throw Error(ErrorCode::parse_error, "openings_posted must carry exactly two openings");
      slot.transcript.openings = {opening_from_json(ops.at(0)), opening_from_json(ops.at(1))};
      slot.has_openings = true;
      break;
    }
    case EventKind::round_verdict: {
      auto& slot = round_slot(p.at("round").get<std::size_t>());
      slot.transcript.verdict = round_verdict_from_string(p.at("verdict").get<std::string>());
      slot.has_verdict = true;
      break;
    }
    case EventKind::session_verdict:
      rec.verdict = session_verdict_from_string(p.at("verdict").get<std::string>());
      rec.rounds_played = p.at("rounds_played").get<std::size_t>();
      rec.fault_reason = p.value("reason", "");
      break;
    case EventKind::human_input:
      rec.human_inputs.push_back(p);
      break;
    case EventKind::experiment_stage:
      break;
  }
}

}  // namespace detail

// Loads every session in a log, in order of first appearance.
inline std::vector<SessionRecord> load_sessions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot read " + path.string());
  std::vector<SessionRecord> out;
  std::map<std::string, std::size_t> index;
  std::map<std::string, std::string> last_hash;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto ev = EventRecord::from_line(line);
      auto [it, inserted] = index.try_emplace(ev.session, out.size());
      if (inserted) {
        out.emplace_back();
        out.back().id = ev.session;
      }
      auto& rec = out[it->second];
      const std::uint64_t expected = rec.events.empty() ? 1 : rec.events.back().seq + 1;
      if (ev.seq != expected)
        throw Error(ErrorCode::integrity, "sequence gap: expected " + std::to_string(expected) + ", got " +
                                              std::to_string(ev.seq));
      if (rec.chain_ok && ev.hash != ev.content_hash()) {
        rec.chain_ok = false;
        rec.chain_problem = "line hash mismatch at seq " + std::to_string(ev.seq);
      }
      if (rec.chain_ok && ev.prev != last_hash[ev.session]) {
        rec.chain_ok = false;
        rec.chain_problem = "hash chain broken at seq " + std::to_string(ev.seq);
      }
      last_hash[ev.session] = ev.hash;
      detail::apply_event(rec, ev);
      rec.events.push_back(std::move(ev));
    } catch (const Error& e) {
      throw Error(e.code() == ErrorCode::integrity ? ErrorCode::integrity : ErrorCode::parse_error,
                  path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const std::exception& e) {
      throw Error(ErrorCode::parse_error, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline SessionRecord load_session(const std::filesystem::path& path, const std::string& session_id) {
  for (auto& rec : load_sessions(path))
    if (rec.id == session_id) return std::move(rec);
  throw Error(ErrorCode::not_found, "session " + session_id + " not in " + path.string());
}

// Re-derives every round verdict from the stored commitments and openings and
// checks it, the hash chain and the session outcome against the log. Throws
// an integrity error on the first discrepancy.
inline std::vector<RoundVerdict> replay(const SessionRecord& rec) {
  auto fail = [&](const std::string& why) { throw Error(ErrorCode::integrity, "session " + rec.id + ": " + why); };
  if (!rec.chain_ok) fail(rec.chain_problem);
  if (!rec.meta) fail("missing session_created event");
  const auto& g = rec.meta->graph;
  std::vector<RoundVerdict> verdicts;
  for (std::size_t i = 0; i < rec.rounds.size(); ++i) {
    const auto& r = rec.rounds[i];
    if (!r.has_verdict) {
      if (i + 1 == rec.rounds.size() && (!rec.verdict || *rec.verdict == SessionVerdict::fault)) break;
      fail("round " + std::to_string(i) + " has no verdict");
    }
    if (!verdicts.empty() && verdicts.back() == RoundVerdict::reject && rec.meta->abort_on_reject)
      fail("round " + std::to_string(i) + " follows a reject");
    const auto& t = r.transcript;
    if (t.commitments.size() != g.n()) fail("round " + std::to_string(i) + " commits to the wrong vertex count");
    if (!r.has_challenge || !g.has_edge(t.challenge)) fail("round " + std::to_string(i) + " challenge is not an edge");
    if (!r.has_openings) fail("round " + std::to_string(i) + " has no openings");
    const auto derived = verifier_check_round(t.commitments, t.challenge, t.openings);
    if (derived != t.verdict)
      fail("round " + std::to_string(i) + " verdict mismatch: stored " + to_string(t.verdict) + ", derived " +
           to_string(derived));
    verdicts.push_back(derived);
  }
  if (rec.verdict) {
    if (rec.rounds_played != verdicts.size()) fail("rounds_played disagrees with the log");
    const bool any_reject =
        std::any_of(verdicts.begin(), verdicts.end(), [](RoundVerdict v) { return v == RoundVerdict::reject; });
    const std::size_t planned = rec.meta->rounds;
    switch (*rec.verdict) {
      case SessionVerdict::accepted:
        if (any_reject || verdicts.size() != planned) fail("accepted session with a reject or missing rounds");
        break;
      case SessionVerdict::rejected:
        if (!any_reject) fail("rejected session without a rejected round");
        break;
      case SessionVerdict::fault:
        break;
    }
  }
  return verdicts;
}

inline std::filesystem::path session_log_path(const std::filesystem::path& dir, const std::string& session_id) {
  return dir / "sessions" / (session_id + ".jsonl");
}

}  // namespace zk3col::store
