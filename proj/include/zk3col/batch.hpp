#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "zk3col/agent_spec.hpp"
#include "zk3col/protocol.hpp"
#include "zk3col/session_store.hpp"

namespace zk3col {

struct BatchConfig {
  Graph graph;
  std::optional<Coloring> secret;
  std::string alice = "honest:uniform";
  std::string bob = "uniform";
  std::size_t rounds = 0;  // 0: m^2 capped
  std::uint64_t seed = 0;
  std::size_t sessions = 1;
  bool abort_on_reject = true;
  std::optional<std::filesystem::path> out_dir;  // logs go to out_dir/sessions/<id>.jsonl
  store::Clock clock = store::wall_clock_ms;
  unsigned jobs = 1;
  bool keep_transcripts = false;
};

struct BatchSession {
  std::string id;
  std::uint64_t seed = 0;
  SessionVerdict verdict = SessionVerdict::fault;
  std::size_t rounds_played = 0;
  std::size_t bad_edges = 0;  // monochromatic edges of the committed assignment, when fixed
  std::string fault_reason;
  std::vector<RoundTranscript> transcripts;
};

struct BatchResult {
  std::vector<BatchSession> sessions;  // session-id order
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t faults = 0;
  std::size_t rounds = 0;
  std::size_t m = 0;

  double acceptance_rate() const {
    return sessions.empty() ? 0.0 : static_cast<double>(accepted) / static_cast<double>(sessions.size());
  }
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Wilson score interval.
inline Interval wilson_interval(std::size_t successes, std::size_t n, double z = 1.959963984540054) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double denom = 1.0 + z * z / nn;
  const double centre = (p + z * z / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z * z / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

inline std::string batch_session_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sim-%06zu", index);
  return buf;
}

inline BatchSession run_batch_session(const BatchConfig& cfg, std::size_t index) {
  BatchSession out;
  out.id = batch_session_id(index);
  out.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(index));
  auto prover = make_prover(cfg.alice, cfg.graph, cfg.secret, out.seed);
  auto verifier = make_verifier(cfg.bob, cfg.graph, out.seed);
  if (prover.inbox || verifier.inbox) throw Error(ErrorCode::invalid_argument, "batch runs cannot use human agents");
  if (prover.assignment.size() == cfg.graph.n()) out.bad_edges = monochromatic_edges(cfg.graph, prover.assignment).size();

  SessionConfig sc{cfg.graph, cfg.rounds, out.seed, cfg.abort_on_reject};
  std::optional<store::EventLog> log;
  std::optional<store::SessionLogger> logger;
  if (cfg.out_dir) {
    const auto path = store::session_log_path(*cfg.out_dir, out.id);
    std::filesystem::remove(path);
    log.emplace(path, cfg.clock);
    logger.emplace(*log, out.id);
    store::SessionMeta meta;
    meta.graph = cfg.graph;
    meta.rounds = sc.effective_rounds();
    meta.seed = out.seed;
    meta.abort_on_reject = cfg.abort_on_reject;
    meta.alice = prover.agent->descriptor();
    meta.bob = verifier.agent->descriptor();
    if (cfg.secret) meta.secret = cfg.secret;
    else if (prover.assignment.size() == cfg.graph.n() && is_proper(cfg.graph, prover.assignment))
      meta.secret = prover.assignment;
    meta.extra = {{"alice_spec", cfg.alice}, {"bob_spec", cfg.bob}, {"batch_index", index}};
    logger->created(meta);
  }
  auto result = run_session(sc, *prover.agent, *verifier.agent, logger ? &*logger : nullptr);
  out.verdict = result.verdict;
  out.rounds_played = result.rounds_played;
  out.fault_reason = result.fault_reason;
  if (cfg.keep_transcripts) out.transcripts = std::move(result.transcripts);
  return out;
}

// Runs cfg.sessions independent sessions. Session i is seeded with
// derive_seed(cfg.seed, i), so results do not depend on cfg.jobs.
inline BatchResult run_batch(const BatchConfig& cfg) {
  SessionConfig{cfg.graph, cfg.rounds, cfg.seed, cfg.abort_on_reject}.validate();
  BatchResult res;
  res.m = cfg.graph.m();
  res.rounds = SessionConfig{cfg.graph, cfg.rounds, cfg.seed, cfg.abort_on_reject}.effective_rounds();
  res.sessions.resize(cfg.sessions);
  const unsigned jobs = std::max(1u, std::min<unsigned>(cfg.jobs, static_cast<unsigned>(std::max<std::size_t>(cfg.sessions, 1))));
  if (jobs == 1) {
    for (std::size_t i = 0; i < cfg.sessions; ++i) res.sessions[i] = run_batch_session(cfg, i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    std::vector<std::thread> workers;
    for (unsigned w = 0; w < jobs; ++w)
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < cfg.sessions; i = next++) {
          try {
            res.sessions[i] = run_batch_session(cfg, i);
          } catch (...) {
            std::lock_guard lock(failure_mu);
            if (!failure) failure = std::current_exception();
            next = cfg.sessions;
          }
        }
      });
    for (auto& t : workers) t.join();
    if (failure) std::rethrow_exception(failure);
  }
  for (const auto& s : res.sessions) {
    switch (s.verdict) {
      case SessionVerdict::accepted: ++res.accepted; break;
      case SessionVerdict::rejected: ++res.rejected; break;
      case SessionVerdict::fault: ++res.faults; break;
    }
  }
  return res;
}

}  // namespace zk3col
