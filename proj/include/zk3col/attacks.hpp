#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "zk3col/agents.hpp"
#include "zk3col/error.hpp"
#include "zk3col/graph.hpp"
#include "zk3col/permutation.hpp"
#include "zk3col/protocol.hpp"

namespace zk3col {

// Probability of each edge (canonical order) being the next challenge.
struct EdgeDistribution {
  std::vector<double> probabilities;

  static EdgeDistribution uniform(std::size_t m) {
    return {std::vector<double>(m, 1.0 / static_cast<double>(m))};
  }

  void validate(std::size_t m) const {
    if (probabilities.size() != m) throw Error(ErrorCode::invalid_argument, "edge distribution has wrong length");
    double sum = 0.0;
    for (double p : probabilities) {
      if (!(p >= 0.0)) throw Error(ErrorCode::invalid_argument, "edge distribution has a negative entry");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::invalid_argument, "edge distribution does not sum to 1");
  }
};

// Smoothed frequency estimate of the verifier's next challenge. Order 1
// conditions on the most recent challenge and falls back to order 0 when that
// row carries no mass.
inline EdgeDistribution predict_edge_distribution(std::span<const Edge> history, const Graph& g, int order = 0,
                                                  double smoothing = 0.5) {
  if (order != 0 && order != 1) throw Error(ErrorCode::invalid_argument, "prediction order must be 0 or 1");
  if (smoothing < 0.0) throw Error(ErrorCode::invalid_argument, "negative smoothing");
  const std::size_t m = g.m();
  std::vector<std::size_t> idx;
  idx.reserve(history.size());
  for (const auto& e : history) {
    auto i = g.edge_index(e);
    if (!i) throw Error(ErrorCode::invalid_argument, "history contains a non-edge");
    idx.push_back(*i);
  }
  auto normalize = [&](std::vector<double> counts) -> std::optional<EdgeDistribution> {
    double total = 0.0;
    for (auto& c : counts) total += (c += smoothing);
    if (!(total > 0.0)) return std::nullopt;
    for (auto& c : counts) c /= total;
    return EdgeDistribution{std::move(counts)};
  };
  if (idx.empty()) return EdgeDistribution::uniform(m);

  std::vector<double> marginal(m, 0.0);
  for (auto i : idx) marginal[i] += 1.0;
  if (order == 1 && idx.size() >= 2) {
    std::vector<double> row(m, 0.0);
    for (std::size_t t = 1; t < idx.size(); ++t)
      if (idx[t - 1] == idx.back()) row[idx[t]] += 1.0;
    if (auto d = normalize(row)) return *d;
  }
  if (auto d = normalize(marginal)) return *d;
  return EdgeDistribution::uniform(m);
}

inline double expected_catch(const Graph& g, const Coloring& c, const EdgeDistribution& q) {
  return conflict_weight(g, c, q.probabilities);
}

// The cheating prover's assignment: minimizes the probability that the
// challenge lands on a monochromatic edge.
inline Coloring cheat_coloring(const Graph& g, const EdgeDistribution& q, std::uint64_t seed,
                               LocalSearchOptions opts = {}) {
  q.validate(g.m());
  return min_conflict_coloring(g, q.probabilities, seed, opts);
}

// ---- Secret recovery from biased permutations -----------------------------

struct PermutationPrior {
  enum class Kind { uniform, identity, model };
  Kind kind = Kind::uniform;
  std::optional<TransitionModel> model;

  static PermutationPrior uniform() { return {Kind::uniform, std::nullopt}; }
  static PermutationPrior identity() { return {Kind::identity, std::nullopt}; }
  static PermutationPrior from_model(TransitionModel m) {
    if (m.k != kNumColors) throw Error(ErrorCode::invalid_argument, "permutation model must be over S_3");
    m.validate();
    return {Kind::model, std::move(m)};
  }

  // Per-round weight of each phi in S_3, indexed by rank. Order-1 models
  // contribute their stationary distribution since the previous phi is hidden.
  std::array<double, 6> weights() const {
    std::array<double, 6> w{};
    switch (kind) {
      case Kind::uniform: w.fill(1.0 / 6.0); break;
      case Kind::identity: w[0] = 1.0; break;
      case Kind::model: {
        const auto pi = stationary_distribution(*model);
        std::copy(pi.begin(), pi.end(), w.begin());
        break;
      }
    }
    return w;
  }

  std::string describe() const {
    switch (kind) {
      case Kind::uniform: return "uniform";
      case Kind::identity: return "identity";
      case Kind::model: return "model";
    }
    return "?";
  }
};

struct PartitionHypothesis {
  std::vector<std::optional<int>> class_of;   // per vertex, label 1..3 when covered
  std::vector<std::array<double, 3>> votes;   // accumulated per-class votes
  std::vector<double> margin;                 // (top - runner-up) / total votes, 0 when uncovered

  std::vector<Vertex> covered() const {
    std::vector<Vertex> out;
    for (Vertex v = 0; v < class_of.size(); ++v)
      if (class_of[v]) out.push_back(v);
    return out;
  }

  std::array<std::vector<Vertex>, 3> classes() const {
    std::array<std::vector<Vertex>, 3> out;
    for (Vertex v = 0; v < class_of.size(); ++v)
      if (class_of[v]) out[*class_of[v] - 1].push_back(v);
    return out;
  }

  double pair_confidence(Vertex u, Vertex v) const { return std::min(margin.at(u), margin.at(v)); }
};

// Each opened vertex votes for the pre-permutation classes its opened color
// maps back to, weighted by the prior over phi. Majority wins; exact ties
// leave the vertex uncovered, so under a uniform prior nothing is learned.
inline PartitionHypothesis infer_partition(std::span<const RoundTranscript> transcripts,
                                           const PermutationPrior& prior) {
  PartitionHypothesis h;
  if (transcripts.empty()) return h;
  const std::size_t n = transcripts.front().commitments.size();
  for (std::size_t i = 0; i < transcripts.size(); ++i) {
    if (transcripts[i].commitments.size() != n || (i > 0 && transcripts[i].round_index <= transcripts[i - 1].round_index))
      throw Error(ErrorCode::invalid_argument, "transcripts come from more than one session");
  }
  const auto w = prior.weights();
  double total_w = 0.0;
  for (double x : w) total_w += x;
  std::array<Permutation, 6> perms;
  for (std::size_t r = 0; r < 6; ++r) perms[r] = Permutation::from_rank(3, r);

  h.votes.assign(n, {0.0, 0.0, 0.0});
  for (const auto& t : transcripts) {
    for (const Opening* op : {&t.openings.first, &t.openings.second}) {
      if (!is_valid_color(op->color) || op->vertex >= n) continue;
      for (std::size_t r = 0; r < 6; ++r) {
        if (w[r] <= 0.0) continue;
        h.votes[op->vertex][perms[r].inverse(op->color) - 1] += w[r] / total_w;
      }
    }
  }
  h.class_of.assign(n, std::nullopt);
  h.margin.assign(n, 0.0);
  for (Vertex v = 0; v < n; ++v) {
    const auto& vv = h.votes[v];
    const double total = vv[0] + vv[1] + vv[2];
    if (total <= 0.0) continue;
    std::array<int, 3> order{0, 1, 2};
    std::sort(order.begin(), order.end(), [&](int a, int b) { return vv[a] > vv[b]; });
    const double margin = vv[order[0]] - vv[order[1]];
    if (margin <= 1e-9 * total) continue;
    h.class_of[v] = order[0] + 1;
    h.margin[v] = margin / total;
  }
  return h;
}

struct PartitionScore {
  double coverage = 0.0;          // fraction of vertices covered
  std::size_t pairs = 0;          // covered pairs compared
  std::optional<double> accuracy; // absent when fewer than two vertices are covered
};

// Same-class/different-class agreement over covered vertex pairs. Colors are
// only recoverable up to relabeling, so labels themselves are not compared.
inline PartitionScore partition_accuracy(const PartitionHypothesis& h, const Coloring& truth) {
  PartitionScore s;
  if (h.class_of.empty() || truth.size() == 0) return s;
  if (h.class_of.size() != truth.size())
    throw Error(ErrorCode::invalid_argument, "hypothesis and coloring disagree on vertex count");
  const auto cov = h.covered();
  s.coverage = static_cast<double>(cov.size()) / static_cast<double>(truth.size());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < cov.size(); ++i)
    for (std::size_t j = i + 1; j < cov.size(); ++j) {
      const bool said_same = h.class_of[cov[i]] == h.class_of[cov[j]];
      const bool is_same = truth[cov[i]] == truth[cov[j]];
      correct += said_same == is_same;
      ++s.pairs;
    }
  if (s.pairs > 0) s.accuracy = static_cast<double>(correct) / static_cast<double>(s.pairs);
  return s;
}

// Re-solves the cheating assignment each round against the predicted
// challenge distribution.
class AdaptiveCheatingProver : public ProverAgent {
 public:
  AdaptiveCheatingProver(const Graph& g, PermutationSource perms, std::uint64_t seed, std::string descriptor = "adaptive",
                         int order = 0)
      : graph_(g), perms_(std::move(perms)), seed_(seed), descriptor_(std::move(descriptor)), order_(order) {}

  std::string descriptor() const override { return descriptor_; }
  Coloring assignment(std::span<const Edge> history) override {
    const auto q = predict_edge_distribution(history, graph_, order_);
    return cheat_coloring(graph_, q, derive_seed(seed_, history.size()));
  }
  Permutation next_permutation() override { return perms_.sample(); }

 private:
  Graph graph_;
  PermutationSource perms_;
  std::uint64_t seed_;
  std::string descriptor_;
  int order_;
};

}  // namespace zk3col
