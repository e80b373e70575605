#pragma once

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "zk3col/error.hpp"
#include "zk3col/graph.hpp"
#include "zk3col/permutation.hpp"
#include "zk3col/rng.hpp"

namespace zk3col {

// Markov model over permutation ranks of S_k. Order 0 models have every row
// equal to the initial distribution.
struct TransitionModel {
  std::size_t k = 3;
  int order = 1;
  std::vector<double> initial;
  std::vector<std::vector<double>> rows;

  std::size_t states() const { return factorial(k); }

  void validate() const {
    if (k < 2 || k > 4) throw Error(ErrorCode::invalid_argument, "transition model: k must be 2, 3 or 4");
    if (order != 0 && order != 1) throw Error(ErrorCode::invalid_argument, "transition model: order must be 0 or 1");
    const auto s = states();
    auto check = [s](const std::vector<double>& row, const char* what) {
      if (row.size() != s) throw Error(ErrorCode::invalid_argument, std::string(what) + " has wrong length");
      double sum = 0.0;
      for (double p : row) {
        if (!(p >= 0.0)) throw Error(ErrorCode::invalid_argument, std::string(what) + " has a negative entry");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::invalid_argument, std::string(what) + " does not sum to 1");
    };
    check(initial, "initial distribution");
    if (rows.size() != s) throw Error(ErrorCode::invalid_argument, "transition matrix has wrong row count");
    for (const auto& row : rows) check(row, "transition row");
  }

  const std::vector<double>& next_distribution(std::optional<std::size_t> previous) const {
    if (order == 0 || !previous) return initial;
    return rows.at(*previous);
  }
};

namespace models {

inline TransitionModel uniform(std::size_t k) {
  const auto s = factorial(k);
  std::vector<double> row(s, 1.0 / static_cast<double>(s));
  return {k, 0, row, std::vector<std::vector<double>>(s, row)};
}

// Plays the identity with probability p_stay, otherwise a uniform draw from S_k.
inline TransitionModel identity_sticky(std::size_t k, double p_stay) {
  if (!(p_stay >= 0.0 && p_stay <= 1.0)) throw Error(ErrorCode::invalid_argument, "p_stay must be in [0,1]");
  const auto s = factorial(k);
  std::vector<double> row(s, (1.0 - p_stay) / static_cast<double>(s));
  row[0] += p_stay;
  return {k, 0, row, std::vector<std::vector<double>>(s, row)};
}

// With probability p_avoid the next choice is forced to differ from the
// previous one; p_avoid = 1 gives a zero diagonal and uniform off-diagonal rows.
inline TransitionModel repetition_avoider(std::size_t k, double p_avoid) {
  if (!(p_avoid >= 0.0 && p_avoid <= 1.0)) throw Error(ErrorCode::invalid_argument, "p_avoid must be in [0,1]");
  const auto s = factorial(k);
  const double diag = (1.0 - p_avoid) / static_cast<double>(s);
  const double off = (1.0 - diag) / static_cast<double>(s - 1);
  std::vector<std::vector<double>> rows(s, std::vector<double>(s, off));
  for (std::size_t i = 0; i < s; ++i) rows[i][i] = diag;
  return {k, 1, std::vector<double>(s, 1.0 / static_cast<double>(s)), rows};
}

// Steps to the next rank (mod k!) with probability p, otherwise uniform.
inline TransitionModel cycle_preference(std::size_t k, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::invalid_argument, "cycle probability must be in [0,1]");
  const auto s = factorial(k);
  std::vector<std::vector<double>> rows(s, std::vector<double>(s, (1.0 - p) / static_cast<double>(s)));
  for (std::size_t i = 0; i < s; ++i) rows[i][(i + 1) % s] += p;
  return {k, 1, std::vector<double>(s, 1.0 / static_cast<double>(s)), rows};
}

}  // namespace models

// Order-1 maximum-likelihood fit with additive smoothing.
inline TransitionModel fit_markov(std::span<const std::size_t> seq, std::size_t k, double smoothing = 0.5) {
  if (k < 2 || k > 4) throw Error(ErrorCode::invalid_argument, "fit_markov: k must be 2, 3 or 4");
  if (seq.empty()) throw Error(ErrorCode::invalid_argument, "fit_markov: empty sequence");
  if (smoothing < 0.0) throw Error(ErrorCode::invalid_argument, "fit_markov: negative smoothing");
  const auto s = factorial(k);
  std::vector<double> freq(s, 0.0);
  std::vector<std::vector<double>> counts(s, std::vector<double>(s, 0.0));
  for (std::size_t t = 0; t < seq.size(); ++t) {
    if (seq[t] >= s) throw Error(ErrorCode::invalid_argument, "fit_markov: symbol " + std::to_string(seq[t]) + " out of range");
    freq[seq[t]] += 1.0;
    if (t > 0) counts[seq[t - 1]][seq[t]] += 1.0;
  }
  auto normalize = [&](std::vector<double> row) {
    double total = 0.0;
    for (auto& x : row) total += (x += smoothing);
    if (total <= 0.0) return std::vector<double>(s, 1.0 / static_cast<double>(s));
    for (auto& x : row) x /= total;
    return row;
  };
  TransitionModel model{k, 1, normalize(freq), {}};
  model.rows.reserve(s);
  for (auto& row : counts) model.rows.push_back(normalize(row));
  return model;
}

// Stationary distribution of the chain (initial distribution for order 0).
// Solved directly, so periodic chains are handled.
inline std::vector<double> stationary_distribution(const TransitionModel& model) {
  if (model.order == 0) return model.initial;
  const auto s = model.states();
  // Solve pi (P - I) = 0 with the last equation replaced by sum(pi) = 1.
  std::vector<std::vector<double>> a(s, std::vector<double>(s + 1, 0.0));
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j < s; ++j) a[j][i] = model.rows[i][j] - (i == j ? 1.0 : 0.0);
  for (std::size_t i = 0; i < s; ++i) a[s - 1][i] = 1.0;
  a[s - 1][s] = 1.0;
  for (std::size_t col = 0; col < s; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < s; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    if (std::abs(a[pivot][col]) < 1e-14) return model.initial;  // reducible chain; no unique answer
    std::swap(a[col], a[pivot]);
    for (std::size_t r = 0; r < s; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c <= s; ++c) a[r][c] -= f * a[col][c];
    }
  }
  std::vector<double> pi(s);
  for (std::size_t i = 0; i < s; ++i) pi[i] = std::max(0.0, a[i][s] / a[i][i]);
  return pi;
}

// Long-run accuracy of the best next-symbol guess when the model is known.
inline double bayes_hit_rate(const TransitionModel& model) {
  const auto pi = stationary_distribution(model);
  if (model.order == 0) return *std::max_element(model.initial.begin(), model.initial.end());
  double rate = 0.0;
  for (std::size_t i = 0; i < pi.size(); ++i)
    rate += pi[i] * *std::max_element(model.rows[i].begin(), model.rows[i].end());
  return rate;
}

// Hand-off point for values produced in another execution context (a human
// acting through the service). Single consumer.
template <typename T>
class ExternalInbox {
 public:
  void submit(T value) {
    {
      std::lock_guard lock(mu_);
      pending_.push_back(std::move(value));
    }
    cv_.notify_one();
  }

  T take(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    if (!cv_.wait_for(lock, timeout, [&] { return !pending_.empty(); }))
      throw Error(ErrorCode::timeout, "timed out waiting for external input");
    T value = std::move(pending_.front());
    pending_.pop_front();
    return value;
  }

  bool has_pending() const {
    std::lock_guard lock(mu_);
    return !pending_.empty();
  }

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<T> pending_;
};

inline constexpr std::chrono::milliseconds kDefaultExternalTimeout{120'000};

enum class PermutationSourceKind { uniform, biased_markov, scripted, external };

class PermutationSource {
 public:
  static PermutationSource uniform(std::size_t k, std::uint64_t seed) {
    PermutationSource s(PermutationSourceKind::uniform, k);
    s.rng_ = Rng(seed);
    return s;
  }
  static PermutationSource biased(TransitionModel model, std::uint64_t seed) {
    model.validate();
    PermutationSource s(PermutationSourceKind::biased_markov, model.k);
    s.model_ = std::move(model);
    s.rng_ = Rng(seed);
    return s;
  }
  static PermutationSource scripted(std::size_t k, std::vector<std::size_t> ranks) {
    for (auto r : ranks)
      if (r >= factorial(k)) throw Error(ErrorCode::invalid_argument, "scripted rank out of range");
    PermutationSource s(PermutationSourceKind::scripted, k);
    s.script_ = std::move(ranks);
    return s;
  }
  static PermutationSource external(std::size_t k, std::shared_ptr<ExternalInbox<std::size_t>> inbox,
                                    std::chrono::milliseconds timeout = kDefaultExternalTimeout) {
    PermutationSource s(PermutationSourceKind::external, k);
    s.inbox_ = std::move(inbox);
    s.timeout_ = timeout;
    return s;
  }

  PermutationSourceKind kind() const { return kind_; }
  std::size_t k() const { return k_; }
  const std::vector<std::size_t>& history() const { return history_; }
  const std::optional<TransitionModel>& model() const { return model_; }

  Permutation sample() {
    std::size_t rank = 0;
    switch (kind_) {
      case PermutationSourceKind::uniform:
        rank = rng_.uniform_index(factorial(k_));
        break;
      case PermutationSourceKind::biased_markov: {
        std::optional<std::size_t> prev;
        if (!history_.empty()) prev = history_.back();
        rank = rng_.categorical(model_->next_distribution(prev));
        break;
      }
      case PermutationSourceKind::scripted:
        if (history_.size() >= script_.size()) throw Error(ErrorCode::exhausted, "permutation script exhausted");
        rank = script_[history_.size()];
        break;
      case PermutationSourceKind::external:
        rank = inbox_->take(timeout_);
        if (rank >= factorial(k_)) throw Error(ErrorCode::invalid_argument, "external rank out of range");
        break;
    }
    history_.push_back(rank);
    return Permutation::from_rank(k_, rank);
  }

 private:
  PermutationSource(PermutationSourceKind kind, std::size_t k) : kind_(kind), k_(k) {
    if (k < 2 || k > 4) throw Error(ErrorCode::invalid_argument, "permutation source: k must be 2, 3 or 4");
  }

  PermutationSourceKind kind_;
  std::size_t k_;
  Rng rng_;
  std::optional<TransitionModel> model_;
  std::vector<std::size_t> script_;
  std::shared_ptr<ExternalInbox<std::size_t>> inbox_;
  std::chrono::milliseconds timeout_{kDefaultExternalTimeout};
  std::vector<std::size_t> history_;
};

enum class EdgeSelectorKind { uniform, weighted, markov_recency, scripted, external };

// Challenge source for the verifier. Emits edges of the bound graph, except
// that scripted and external selectors pass their input through unchecked so
// that the protocol layer can detect a faulty agent.
class EdgeSelector {
 public:
  static EdgeSelector uniform(std::size_t m, std::uint64_t seed) {
    EdgeSelector s(EdgeSelectorKind::uniform, m);
    s.rng_ = Rng(seed);
    return s;
  }
  static EdgeSelector weighted(std::vector<double> weights, std::uint64_t seed) {
    EdgeSelector s(EdgeSelectorKind::weighted, weights.size());
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw Error(ErrorCode::invalid_argument, "edge weights must be nonnegative");
      total += w;
    }
    if (!(total > 0.0)) throw Error(ErrorCode::invalid_argument, "edge weights sum to zero");
    s.weights_ = std::move(weights);
    s.rng_ = Rng(seed);
    return s;
  }
  // The weight of an edge last chosen a draws ago is 1 - (1 - decay) / 2^(a-1);
  // never-chosen edges have weight 1. decay = 0 forbids immediate repeats.
  static EdgeSelector markov_recency(std::size_t m, double decay, std::uint64_t seed) {
    if (!(decay >= 0.0 && decay <= 1.0)) throw Error(ErrorCode::invalid_argument, "recency decay must be in [0,1]");
    EdgeSelector s(EdgeSelectorKind::markov_recency, m);
    s.decay_ = decay;
    s.rng_ = Rng(seed);
    return s;
  }
  static EdgeSelector scripted(std::vector<Edge> script) {
    EdgeSelector s(EdgeSelectorKind::scripted, 0);
    s.script_ = std::move(script);
    return s;
  }
  static EdgeSelector external(std::shared_ptr<ExternalInbox<Edge>> inbox,
                               std::chrono::milliseconds timeout = kDefaultExternalTimeout) {
    EdgeSelector s(EdgeSelectorKind::external, 0);
    s.inbox_ = std::move(inbox);
    s.timeout_ = timeout;
    return s;
  }

  EdgeSelectorKind kind() const { return kind_; }
  const std::vector<Edge>& history() const { return history_; }

  Edge select(const Graph& g) {
    if (expected_m_ != 0 && expected_m_ != g.m())
      throw Error(ErrorCode::invalid_argument, "edge selector bound to " + std::to_string(expected_m_) +
                                                   " edges, graph has " + std::to_string(g.m()));
    Edge e;
    switch (kind_) {
      case EdgeSelectorKind::uniform:
        e = g.edge(rng_.uniform_index(g.m()));
        break;
      case EdgeSelectorKind::weighted:
        e = g.edge(rng_.categorical(weights_));
        break;
      case EdgeSelectorKind::markov_recency: {
        if (last_seen_.empty()) last_seen_.assign(g.m(), 0);
        std::vector<double> w(g.m(), 1.0);
        const std::size_t now = history_.size() + 1;
        for (std::size_t i = 0; i < g.m(); ++i)
          if (last_seen_[i] != 0) w[i] = 1.0 - (1.0 - decay_) * std::ldexp(1.0, -static_cast<int>(now - last_seen_[i] - 1));
        const auto idx = rng_.categorical(w);
        last_seen_[idx] = now;
        e = g.edge(idx);
        break;
      }
      case EdgeSelectorKind::scripted:
        if (history_.size() >= script_.size()) throw Error(ErrorCode::exhausted, "challenge script exhausted");
        e = script_[history_.size()];
        break;
      case EdgeSelectorKind::external:
        e = inbox_->take(timeout_);
        break;
    }
    history_.push_back(e);
    return e;
  }

 private:
  EdgeSelector(EdgeSelectorKind kind, std::size_t m) : kind_(kind), expected_m_(m) {}

  EdgeSelectorKind kind_;
  std::size_t expected_m_;
  Rng rng_;
  std::vector<double> weights_;
  double decay_ = 1.0;
  std::vector<std::size_t> last_seen_;
  std::vector<Edge> script_;
  std::shared_ptr<ExternalInbox<Edge>> inbox_;
  std::chrono::milliseconds timeout_{kDefaultExternalTimeout};
  std::vector<Edge> history_;
};

}  // namespace zk3col
