#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "zk3col/agents.hpp"
#include "zk3col/commitment.hpp"
#include "zk3col/error.hpp"
#include "zk3col/graph.hpp"
#include "zk3col/permutation.hpp"
#include "zk3col/rng.hpp"

namespace zk3col {

inline constexpr std::size_t kMaxRounds = 10'000;

enum class RoundVerdict { accept, reject };
enum class SessionVerdict { accepted, rejected, fault };

inline const char* to_string(RoundVerdict v) { return v == RoundVerdict::accept ? "accept" : "reject"; }
inline const char* to_string(SessionVerdict v) {
  switch (v) {
    case SessionVerdict::accepted: return "accepted";
    case SessionVerdict::rejected: return "rejected";
    case SessionVerdict::fault: return "fault";
  }
  return "?";
}

struct SessionConfig {
  Graph graph;
  std::size_t rounds = 0;  // 0 selects the default, m^2 (capped)
  std::uint64_t seed = 0;
  bool abort_on_reject = true;

  std::size_t effective_rounds() const {
    if (rounds != 0) return rounds;
    return std::min(kMaxRounds, graph.m() * graph.m());
  }

  void validate() const {
    if (graph.m() == 0) throw Error(ErrorCode::invalid_argument, "session graph has no edges");
    const auto r = effective_rounds();
    if (r < 1 || r > kMaxRounds)
      throw Error(ErrorCode::invalid_argument, "rounds must be in [1, " + std::to_string(kMaxRounds) + "]");
  }
};

using OpeningPair = std::pair<Opening, Opening>;

struct RoundTranscript {
  std::size_t round_index = 0;
  std::vector<Commitment> commitments;
  Edge challenge;
  OpeningPair openings;
  RoundVerdict verdict = RoundVerdict::reject;
};

struct SessionResult {
  SessionVerdict verdict = SessionVerdict::fault;
  std::size_t rounds_played = 0;
  std::vector<RoundTranscript> transcripts;
  std::uint64_t seed = 0;
  std::string alice;
  std::string bob;
  std::string fault_reason;
};

// ---- Step 1: commit ------------------------------------------------------

struct CommitRound {
  std::vector<Commitment> commitments;  // vertex order
  std::vector<Opening> openings;        // private to the prover
};

// Applies phi to the assignment and commits to every vertex under a fresh salt.
// The assignment need not be proper.
inline CommitRound prover_commit_round(const Coloring& assignment, const Permutation& phi, Rng& rng) {
  const Coloring permuted = apply_permutation(phi, assignment);
  CommitRound out;
  out.commitments.reserve(permuted.size());
  out.openings.reserve(permuted.size());
  for (Vertex v = 0; v < permuted.size(); ++v) {
    Opening op{v, permuted[v], random_salt(rng)};
    out.commitments.push_back(commit(op.vertex, op.color, op.salt));
    out.openings.push_back(op);
  }
  return out;
}

// ---- Step 2: challenge ---------------------------------------------------

inline Edge verifier_challenge(const Graph& g, EdgeSelector& selector, std::vector<Edge>& history) {
  const Edge e = selector.select(g);
  if (!g.has_edge(e))
    throw Error(ErrorCode::protocol_violation,
                "verifier challenged non-edge (" + std::to_string(e.u) + "," + std::to_string(e.v) + ")");
  history.push_back(e);
  return e;
}

// ---- Step 3: open ----------------------------------------------------------

inline OpeningPair prover_open(std::span<const Opening> private_openings, const Graph& g, Edge edge) {
  if (!g.has_edge(edge))
    throw Error(ErrorCode::protocol_violation,
                "cannot open non-edge (" + std::to_string(edge.u) + "," + std::to_string(edge.v) + ")");
  if (edge.u > edge.v) std::swap(edge.u, edge.v);
  return {private_openings[edge.u], private_openings[edge.v]};
}

// Prover-side state for one round: refuses to open anything but the edge it
// was challenged on.
class ProverRound {
 public:
  ProverRound(const Graph& g, CommitRound committed) : graph_(&g), committed_(std::move(committed)) {}

  const std::vector<Commitment>& commitments() const { return committed_.commitments; }
  const std::vector<Opening>& private_openings() const { return committed_.openings; }

  void receive_challenge(Edge e) {
    if (challenge_) throw Error(ErrorCode::protocol_violation, "round already challenged");
    if (!graph_->has_edge(e)) throw Error(ErrorCode::protocol_violation, "challenge is not an edge");
    if (e.u > e.v) std::swap(e.u, e.v);
    challenge_ = e;
  }

  OpeningPair open(Edge requested) const {
    if (requested.u > requested.v) std::swap(requested.u, requested.v);
    if (!challenge_ || *challenge_ != requested)
      throw Error(ErrorCode::protocol_violation, "opening requested for an edge other than the challenge");
    return prover_open(committed_.openings, *graph_, requested);
  }

 private:
  const Graph* graph_;
  CommitRound committed_;
  std::optional<Edge> challenge_;
};

// ---- Step 4: check -------------------------------------------------------

inline RoundVerdict verifier_check_round(std::span<const Commitment> commitments, Edge edge,
                                         const OpeningPair& openings) {
  if (edge.u > edge.v) std::swap(edge.u, edge.v);
  const auto& [a, b] = openings;
  const bool endpoints = (a.vertex == edge.u && b.vertex == edge.v) || (a.vertex == edge.v && b.vertex == edge.u);
  if (!endpoints || a.vertex >= commitments.size() || b.vertex >= commitments.size()) return RoundVerdict::reject;
  if (!verify_opening(commitments[a.vertex], a) || !verify_opening(commitments[b.vertex], b))
    return RoundVerdict::reject;
  if (!is_valid_color(a.color) || !is_valid_color(b.color)) return RoundVerdict::reject;
  return a.color != b.color ? RoundVerdict::accept : RoundVerdict::reject;
}

// ---- Agents ----------------------------------------------------------------

class ProverAgent {
 public:
  virtual ~ProverAgent() = default;
  virtual std::string descriptor() const = 0;
  // The assignment committed this round, before the color permutation.
  virtual Coloring assignment(std::span<const Edge> challenge_history) = 0;
  virtual Permutation next_permutation() = 0;
  // False while waiting on external input.
  virtual bool ready() const { return true; }
  virtual OpeningPair open(const ProverRound& round, Edge challenge) { return round.open(challenge); }
};

class VerifierAgent {
 public:
  VerifierAgent(EdgeSelector selector, std::string descriptor, std::shared_ptr<ExternalInbox<Edge>> inbox = nullptr)
      : selector_(std::move(selector)), descriptor_(std::move(descriptor)), inbox_(std::move(inbox)) {}

  const std::string& descriptor() const { return descriptor_; }
  bool ready() const { return !inbox_ || inbox_->has_pending(); }
  Edge challenge(const Graph& g, std::vector<Edge>& history) { return verifier_challenge(g, selector_, history); }
  const EdgeSelector& selector() const { return selector_; }

 private:
  EdgeSelector selector_;
  std::string descriptor_;
  std::shared_ptr<ExternalInbox<Edge>> inbox_;
};

// Prover with a fixed assignment (the secret coloring when honest, any
// assignment when cheating) and a permutation source.
class FixedAssignmentProver : public ProverAgent {
 public:
  FixedAssignmentProver(Coloring assignment, PermutationSource perms, std::string descriptor,
                        std::shared_ptr<ExternalInbox<std::size_t>> inbox = nullptr)
      : assignment_(std::move(assignment)), perms_(std::move(perms)), descriptor_(std::move(descriptor)),
        inbox_(std::move(inbox)) {}

  std::string descriptor() const override { return descriptor_; }
  Coloring assignment(std::span<const Edge>) override { return assignment_; }
  Permutation next_permutation() override { return perms_.sample(); }
  bool ready() const override { return !inbox_ || inbox_->has_pending(); }
  const PermutationSource& permutations() const { return perms_; }

 private:
  Coloring assignment_;
  PermutationSource perms_;
  std::string descriptor_;
  std::shared_ptr<ExternalInbox<std::size_t>> inbox_;
};

// ---- Engine ----------------------------------------------------------------

class SessionObserver {
 public:
  virtual ~SessionObserver() = default;
  virtual void on_commitments(std::size_t /*round*/, std::span<const Commitment>) {}
  virtual void on_challenge(std::size_t /*round*/, Edge) {}
  virtual void on_openings(std::size_t /*round*/, const OpeningPair&) {}
  virtual void on_round_verdict(std::size_t /*round*/, RoundVerdict) {}
  virtual void on_session_verdict(const SessionResult&) {}
};

enum class Phase { awaiting_permutation, awaiting_challenge, finished };

inline const char* to_string(Phase p) {
  switch (p) {
    case Phase::awaiting_permutation: return "awaiting_permutation";
    case Phase::awaiting_challenge: return "awaiting_challenge";
    case Phase::finished: return "finished";
  }
  return "?";
}

// Sequential round state machine. advance() performs one protocol step
// (steps 1, or 2-4) when the agent responsible for it is ready.
class SessionEngine {
 public:
  SessionEngine(SessionConfig cfg, ProverAgent& alice, VerifierAgent& bob, SessionObserver* observer = nullptr)
      : cfg_(std::move(cfg)), alice_(&alice), bob_(&bob), observer_(observer),
        salt_rng_(derive_seed(cfg_.seed, "salts")) {
    cfg_.validate();
    result_.seed = cfg_.seed;
    result_.alice = alice.descriptor();
    result_.bob = bob.descriptor();
  }

  SessionEngine(const SessionEngine&) = delete;
  SessionEngine& operator=(const SessionEngine&) = delete;

  void set_observer(SessionObserver* observer) { observer_ = observer; }
  const SessionConfig& config() const { return cfg_; }
  Phase phase() const { return phase_; }
  std::size_t current_round() const { return round_; }
  const SessionResult& result() const { return result_; }
  const std::vector<Edge>& challenge_history() const { return challenges_; }
  const ProverRound* pending_round() const { return pending_ ? &*pending_ : nullptr; }

  bool next_agent_ready() const {
    switch (phase_) {
      case Phase::awaiting_permutation: return alice_->ready();
      case Phase::awaiting_challenge: return bob_->ready();
      case Phase::finished: return false;
    }
    return false;
  }

  // Returns false when the session is finished.
  bool advance() {
    if (phase_ == Phase::finished) return false;
    try {
      if (phase_ == Phase::awaiting_permutation)
        do_commit();
      else
        do_challenge_and_check();
    } catch (const Error& e) {
      fault(e.what());
    }
    return phase_ != Phase::finished;
  }

  // Advances while the responsible agent has input available.
  void pump() {
    while (phase_ != Phase::finished && next_agent_ready()) advance();
  }

  void fault(const std::string& reason) {
    if (phase_ == Phase::finished) return;
    result_.fault_reason = reason;
    finish(SessionVerdict::fault);
  }

 private:
  void do_commit() {
    const Coloring assignment = alice_->assignment(challenges_);
    if (assignment.size() != cfg_.graph.n())
      throw Error(ErrorCode::protocol_violation, "prover assignment does not cover the graph");
    const Permutation phi = alice_->next_permutation();
    if (phi.k() != kNumColors) throw Error(ErrorCode::protocol_violation, "prover permutation is not on {1,2,3}");
    pending_.emplace(cfg_.graph, prover_commit_round(assignment, phi, salt_rng_));
    if (observer_) observer_->on_commitments(round_, pending_->commitments());
    phase_ = Phase::awaiting_challenge;
  }

  void do_challenge_and_check() {
    const Edge edge = bob_->challenge(cfg_.graph, challenges_);
    if (observer_) observer_->on_challenge(round_, edge);
    pending_->receive_challenge(edge);
    const OpeningPair openings = alice_->open(*pending_, edge);
    const Edge canon{std::min(edge.u, edge.v), std::max(edge.u, edge.v)};
    if (openings.first.vertex != canon.u || openings.second.vertex != canon.v)
      throw Error(ErrorCode::protocol_violation, "prover opened vertices other than the challenged endpoints");
    if (observer_) observer_->on_openings(round_, openings);
    const RoundVerdict verdict = verifier_check_round(pending_->commitments(), canon, openings);
    result_.transcripts.push_back({round_, pending_->commitments(), canon, openings, verdict});
    result_.rounds_played = result_.transcripts.size();
    pending_.reset();
    if (observer_) observer_->on_round_verdict(round_, verdict);
    ++round_;
    if (verdict == RoundVerdict::reject && cfg_.abort_on_reject) {
      finish(SessionVerdict::rejected);
    } else if (round_ >= cfg_.effective_rounds()) {
      const bool all_accept = std::all_of(result_.transcripts.begin(), result_.transcripts.end(),
                                          [](const RoundTranscript& t) { return t.verdict == RoundVerdict::accept; });
      finish(all_accept ? SessionVerdict::accepted : SessionVerdict::rejected);
    } else {
      phase_ = Phase::awaiting_permutation;
    }
  }

  void finish(SessionVerdict verdict) {
    result_.verdict = verdict;
    phase_ = Phase::finished;
    pending_.reset();
    if (observer_) observer_->on_session_verdict(result_);
  }

  SessionConfig cfg_;
  ProverAgent* alice_;
  VerifierAgent* bob_;
  SessionObserver* observer_;
  Rng salt_rng_;
  Phase phase_ = Phase::awaiting_permutation;
  std::size_t round_ = 0;
  std::optional<ProverRound> pending_;
  std::vector<Edge> challenges_;
  SessionResult result_;
};

// Runs a full session, blocking on external agents as needed.
inline SessionResult run_session(const SessionConfig& cfg, ProverAgent& alice, VerifierAgent& bob,
                                 SessionObserver* observer = nullptr) {
  SessionEngine engine(cfg, alice, bob, observer);
  while (engine.advance()) {
  }
  return engine.result();
}

// ---- Soundness -------------------------------------------------------------

struct SoundnessBound {
  double exact = 0.0;        // (1 - 1/m)^R
  double approximate = 0.0;  // exp(-R/m); equals e^-m at R = m^2
};

inline double acceptance_probability(std::size_t bad_edges, std::size_t m, std::size_t rounds) {
  if (m == 0) throw Error(ErrorCode::invalid_argument, "edge count must be positive");
  if (bad_edges > m) throw Error(ErrorCode::invalid_argument, "more bad edges than edges");
  return std::pow(1.0 - static_cast<double>(bad_edges) / static_cast<double>(m), static_cast<double>(rounds));
}

inline SoundnessBound soundness_bound(std::size_t m, std::size_t rounds) {
  return {acceptance_probability(1, m, rounds), std::exp(-static_cast<double>(rounds) / static_cast<double>(m))};
}

}  // namespace zk3col
