#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "zk3col/agents.hpp"
#include "zk3col/error.hpp"
#include "zk3col/permutation.hpp"
#include "zk3col/rng.hpp"
#include "zk3col/stats.hpp"

namespace zk3col::lab {

struct SymbolSequence {
  std::size_t k = 3;
  std::vector<std::size_t> symbols;  // permutation ranks, 0..k!-1
  std::string subject;
  std::string test;
  bool history_visible = false;

  std::size_t alphabet() const { return factorial(k); }

  void validate() const {
    if (k < 2 || k > 4) throw Error(ErrorCode::invalid_argument, "sequence k must be 2, 3 or 4");
    for (auto s : symbols)
      if (s >= alphabet())
        throw Error(ErrorCode::invalid_argument, "symbol " + std::to_string(s) + " out of range for k=" + std::to_string(k));
  }
};

using Counts = std::vector<double>;
using Table = std::vector<std::vector<double>>;

inline Counts symbol_counts(const SymbolSequence& seq) {
  Counts c(seq.alphabet(), 0.0);
  for (auto s : seq.symbols) c.at(s) += 1.0;
  return c;
}

inline Table transition_counts(const SymbolSequence& seq) {
  Table t(seq.alphabet(), Counts(seq.alphabet(), 0.0));
  for (std::size_t i = 1; i < seq.symbols.size(); ++i) t.at(seq.symbols[i - 1]).at(seq.symbols[i]) += 1.0;
  return t;
}

// ---- Uniformity -------------------------------------------------------------

inline stats::ChiSquare chi_square_uniform(const Counts& counts) {
  double total = 0.0;
  for (double c : counts) total += c;
  if (total < 5.0 * static_cast<double>(counts.size()))
    throw Error(ErrorCode::insufficient_data, "uniformity test needs at least 5 symbols per category");
  const Counts expected(counts.size(), total / static_cast<double>(counts.size()));
  return stats::pearson(counts, expected);
}

inline stats::ChiSquare chi_square_uniform(const SymbolSequence& seq) {
  seq.validate();
  return chi_square_uniform(symbol_counts(seq));
}

// ---- Transition independence ------------------------------------------------

// Chi-square test of independence on the (previous, next) contingency table.
// Empty rows and columns are dropped; while some expected count is below 5 the
// two smallest rows (or columns) are merged.
inline stats::ChiSquare transition_independence_test(const Table& table) {
  double n = 0.0;
  for (const auto& row : table)
    for (double x : row) n += x;
  if (n <= 0.0) throw Error(ErrorCode::insufficient_data, "transition test: no transitions");

  Table t;
  for (const auto& row : table) {
    double s = 0.0;
    for (double x : row) s += x;
    if (s > 0.0) t.push_back(row);
  }
  std::vector<std::size_t> live_cols;
  for (std::size_t j = 0; j < table.front().size(); ++j) {
    double s = 0.0;
    for (const auto& row : t) s += row[j];
    if (s > 0.0) live_cols.push_back(j);
  }
  for (auto& row : t) {
    Counts r;
    for (auto j : live_cols) r.push_back(row[j]);
    row = std::move(r);
  }

  auto row_totals = [&] {
    Counts r;
    for (const auto& row : t) {
      double s = 0.0;
      for (double x : row) s += x;
      r.push_back(s);
    }
    return r;
  };
  auto col_totals = [&] {
    Counts c(t.empty() ? 0 : t.front().size(), 0.0);
    for (const auto& row : t)
      for (std::size_t j = 0; j < row.size(); ++j) c[j] += row[j];
    return c;
  };
  auto two_smallest = [](const Counts& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    return std::pair{std::min(idx[0], idx[1]), std::max(idx[0], idx[1])};
  };

  while (t.size() >= 2 && !t.front().empty() && t.front().size() >= 2) {
    const auto rt = row_totals();
    const auto ct = col_totals();
    const double min_r = *std::min_element(rt.begin(), rt.end());
    const double min_c = *std::min_element(ct.begin(), ct.end());
    if (min_r * min_c / n >= 5.0) break;
    if (min_r <= min_c && t.size() > 2) {
      auto [a, b] = two_smallest(rt);
      for (std::size_t j = 0; j < t[a].size(); ++j) t[a][j] += t[b][j];
      t.erase(t.begin() + static_cast<std::ptrdiff_t>(b));
    } else if (t.front().size() > 2) {
      auto [a, b] = two_smallest(ct);
      for (auto& row : t) {
        row[a] += row[b];
        row.erase(row.begin() + static_cast<std::ptrdiff_t>(b));
      }
    } else if (t.size() > 2) {
      auto [a, b] = two_smallest(rt);
      for (std::size_t j = 0; j < t[a].size(); ++j) t[a][j] += t[b][j];
      t.erase(t.begin() + static_cast<std::ptrdiff_t>(b));
    } else {
      throw Error(ErrorCode::insufficient_data, "transition test: too few transitions after pooling");
    }
  }
  if (t.size() < 2 || t.front().size() < 2) {
    // Only one distinct predecessor or successor: deterministic is the same as
    // independent here, but the test has no degrees of freedom.
    throw Error(ErrorCode::insufficient_data, "transition test: degenerate table");
  }
  const auto rt = row_totals();
  const auto ct = col_totals();
  stats::ChiSquare r;
  for (std::size_t i = 0; i < t.size(); ++i)
    for (std::size_t j = 0; j < t[i].size(); ++j) {
      const double e = rt[i] * ct[j] / n;
      r.stat += (t[i][j] - e) * (t[i][j] - e) / e;
    }
  r.df = static_cast<double>((t.size() - 1) * (t.front().size() - 1));
  r.p = stats::chi2_sf(r.stat, r.df);
  return r;
}

inline stats::ChiSquare transition_independence_test(const SymbolSequence& seq) {
  seq.validate();
  if (seq.symbols.size() < 3) throw Error(ErrorCode::insufficient_data, "transition test: sequence too short");
  return transition_independence_test(transition_counts(seq));
}

// ---- Repetition, entropy, prediction ------------------------------------------

struct RepetitionRate {
  double observed = 0.0;
  double expected = 0.0;
};

inline RepetitionRate repetition_rate(const SymbolSequence& seq) {
  seq.validate();
  if (seq.symbols.size() < 2) throw Error(ErrorCode::insufficient_data, "repetition rate needs two symbols");
  std::size_t repeats = 0;
  for (std::size_t i = 1; i < seq.symbols.size(); ++i) repeats += seq.symbols[i] == seq.symbols[i - 1];
  return {static_cast<double>(repeats) / static_cast<double>(seq.symbols.size() - 1),
          1.0 / static_cast<double>(seq.alphabet())};
}

namespace detail {
// Plug-in entropy of a count vector with the Miller-Madow correction.
inline double miller_madow_bits(const Counts& counts) {
  double n = 0.0;
  std::size_t nonzero = 0;
  for (double c : counts) {
    n += c;
    nonzero += c > 0.0;
  }
  if (n <= 0.0) return 0.0;
  double h = 0.0;
  for (double c : counts)
    if (c > 0.0) h -= (c / n) * std::log2(c / n);
  return h + static_cast<double>(nonzero - 1) / (2.0 * n * std::log(2.0));
}
}  // namespace detail

inline double entropy_rate(const SymbolSequence& seq, int order) {
  seq.validate();
  if (seq.symbols.size() < 30) throw Error(ErrorCode::insufficient_data, "entropy rate needs at least 30 symbols");
  if (order != 0 && order != 1) throw Error(ErrorCode::invalid_argument, "entropy order must be 0 or 1");
  const double cap = std::log2(static_cast<double>(seq.alphabet()));
  double h = 0.0;
  if (order == 0) {
    h = detail::miller_madow_bits(symbol_counts(seq));
  } else {
    const auto t = transition_counts(seq);
    const double n = static_cast<double>(seq.symbols.size() - 1);
    for (const auto& row : t) {
      double rn = 0.0;
      for (double x : row) rn += x;
      if (rn > 0.0) h += (rn / n) * detail::miller_madow_bits(row);
    }
  }
  return std::clamp(h, 0.0, cap);
}

// Online next-symbol prediction: at each step t >= 1 guess the argmax of the
// smoothed model fitted on symbols before t (ties to the lowest rank).
inline double predictor_hit_rate(const SymbolSequence& seq, int order, double smoothing = 0.5) {
  seq.validate();
  if (seq.symbols.size() < 10) throw Error(ErrorCode::insufficient_data, "predictor needs at least 10 symbols");
  if (order != 0 && order != 1) throw Error(ErrorCode::invalid_argument, "predictor order must be 0 or 1");
  (void)smoothing;  // additive smoothing shifts every count equally and never changes the argmax
  const std::size_t s = seq.alphabet();
  Counts marginal(s, 0.0);
  Table rows(s, Counts(s, 0.0));
  std::size_t hits = 0;
  marginal[seq.symbols[0]] += 1.0;
  for (std::size_t t = 1; t < seq.symbols.size(); ++t) {
    const Counts& basis = order == 0 ? marginal : rows[seq.symbols[t - 1]];
    const auto guess = static_cast<std::size_t>(std::max_element(basis.begin(), basis.end()) - basis.begin());
    hits += guess == seq.symbols[t];
    marginal[seq.symbols[t]] += 1.0;
    rows[seq.symbols[t - 1]][seq.symbols[t]] += 1.0;
  }
  return static_cast<double>(hits) / static_cast<double>(seq.symbols.size() - 1);
}

// ---- Reports ------------------------------------------------------------------

struct TestReport {
  std::string subject;
  std::string test;
  std::size_t k = 3;
  std::size_t length = 0;
  bool history_visible = false;
  stats::ChiSquare chi2_uniform;
  std::optional<stats::ChiSquare> chi2_transition;
  double entropy_rate0 = 0.0;
  double entropy_rate1 = 0.0;
  RepetitionRate repetition;
  double hit_rate0 = 0.0;
  double hit_rate1 = 0.0;
  Counts symbol_counts;
  Table transition_counts;

  double chance() const { return 1.0 / static_cast<double>(factorial(k)); }
  // Best predictor's accuracy above chance.
  double predictor_uplift() const { return std::max(hit_rate0, hit_rate1) - chance(); }
};

inline std::size_t minimum_length(std::size_t k) { return std::max<std::size_t>(30, 5 * factorial(k)); }

inline TestReport analyze_sequence(const SymbolSequence& seq) {
  seq.validate();
  if (seq.symbols.size() < minimum_length(seq.k))
    throw Error(ErrorCode::insufficient_data, "sequence of length " + std::to_string(seq.symbols.size()) +
                                                  " is shorter than the minimum " + std::to_string(minimum_length(seq.k)));
  TestReport r;
  r.subject = seq.subject;
  r.test = seq.test;
  r.k = seq.k;
  r.length = seq.symbols.size();
  r.history_visible = seq.history_visible;
  r.symbol_counts = symbol_counts(seq);
  r.transition_counts = transition_counts(seq);
  r.chi2_uniform = chi_square_uniform(r.symbol_counts);
  try {
    r.chi2_transition = transition_independence_test(r.transition_counts);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::insufficient_data) throw;
  }
  r.entropy_rate0 = entropy_rate(seq, 0);
  r.entropy_rate1 = entropy_rate(seq, 1);
  r.repetition = repetition_rate(seq);
  r.hit_rate0 = predictor_hit_rate(seq, 0);
  r.hit_rate1 = predictor_hit_rate(seq, 1);
  return r;
}

// ---- Fingerprints -------------------------------------------------------------

struct Fingerprint {
  std::string subject;
  std::size_t k = 3;
  std::vector<double> marginal;
  std::vector<std::vector<double>> transitions;
};

inline Fingerprint fingerprint(const SymbolSequence& seq, double smoothing = 0.5) {
  seq.validate();
  const auto model = fit_markov(seq.symbols, seq.k, smoothing);
  return {seq.subject, seq.k, model.initial, model.rows};
}

// Mean of the marginal JSD and the average row JSD; 0 for identical
// fingerprints, 1 for disjoint point masses.
inline double fingerprint_distance(const Fingerprint& a, const Fingerprint& b) {
  if (a.k != b.k) throw Error(ErrorCode::invalid_argument, "fingerprints have different k");
  double rows = 0.0;
  for (std::size_t i = 0; i < a.transitions.size(); ++i) rows += stats::jsd(a.transitions[i], b.transitions[i]);
  rows /= static_cast<double>(a.transitions.size());
  return std::clamp(0.5 * (stats::jsd(a.marginal, b.marginal) + rows), 0.0, 1.0);
}

// ---- Aggregation and award ------------------------------------------------------

struct AwardWeights {
  double predictor_uplift = 0.4;
  double transition_deficit = 0.3;
  double uniformity_deficit = 0.3;
};

// p-value deficit on a log scale: 0 at p = 1, saturating at 1 for p <= 1e-6.
// A linear 1 - p is dominated by the spread of p under the null.
inline double p_deficit(double p) {
  if (!(p > 0.0)) return 1.0;
  return std::clamp(-std::log10(p) / 6.0, 0.0, 1.0);
}

// Detectability of a report; lower is more random.
inline double composite_score(const TestReport& r, const AwardWeights& w = {}) {
  const double uplift = std::max(0.0, r.predictor_uplift()) / (1.0 - r.chance());
  const double trans = r.chi2_transition ? p_deficit(r.chi2_transition->p) : 0.0;
  const double unif = p_deficit(r.chi2_uniform.p);
  return w.predictor_uplift * uplift + w.transition_deficit * trans + w.uniformity_deficit * unif;
}

struct GroupAggregate {
  std::size_t k = 3;
  std::size_t reports = 0;
  Counts symbol_counts;
  Table transition_counts;
  stats::ChiSquare chi2_uniform;
  std::optional<stats::ChiSquare> chi2_transition;
  double mean_hit_rate0 = 0.0;
  double mean_hit_rate1 = 0.0;
  double mean_bias = 0.0;  // mean predictor uplift over chance
};

struct AwardEntry {
  std::string subject;
  double score = 0.0;
};

struct AggregateReport {
  std::vector<GroupAggregate> groups;              // ascending k
  std::optional<double> bias_vs_k_correlation;     // absent with fewer than two distinct k
  std::vector<AwardEntry> award_ranking;           // ascending score: most random first
  AwardWeights weights;
};

inline AggregateReport aggregate_reports(std::span<const TestReport> reports, const AwardWeights& weights = {}) {
  if (reports.empty()) throw Error(ErrorCode::invalid_argument, "aggregate_reports: no reports");
  AggregateReport out;
  out.weights = weights;
  std::map<std::size_t, std::vector<const TestReport*>> by_k;
  for (const auto& r : reports) by_k[r.k].push_back(&r);
  for (const auto& [k, group] : by_k) {
    GroupAggregate g;
    g.k = k;
    g.reports = group.size();
    const auto s = factorial(k);
    g.symbol_counts.assign(s, 0.0);
    g.transition_counts.assign(s, Counts(s, 0.0));
    for (const auto* r : group) {
      for (std::size_t i = 0; i < s; ++i) {
        g.symbol_counts[i] += r->symbol_counts[i];
        for (std::size_t j = 0; j < s; ++j) g.transition_counts[i][j] += r->transition_counts[i][j];
      }
      g.mean_hit_rate0 += r->hit_rate0;
      g.mean_hit_rate1 += r->hit_rate1;
      g.mean_bias += r->predictor_uplift();
    }
    const double n = static_cast<double>(group.size());
    g.mean_hit_rate0 /= n;
    g.mean_hit_rate1 /= n;
    g.mean_bias /= n;
    g.chi2_uniform = chi_square_uniform(g.symbol_counts);
    try {
      g.chi2_transition = transition_independence_test(g.transition_counts);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::insufficient_data) throw;
    }
    out.groups.push_back(std::move(g));
  }
  if (out.groups.size() >= 2) {
    std::vector<double> ks, bias;
    for (const auto& g : out.groups) ks.push_back(static_cast<double>(g.k)), bias.push_back(g.mean_bias);
    out.bias_vs_k_correlation = stats::pearson_correlation(ks, bias);
  }

  std::map<std::string, std::pair<double, std::size_t>> per_subject;
  for (const auto& r : reports) {
    auto& [sum, count] = per_subject[r.subject];
    sum += composite_score(r, weights);
    ++count;
  }
  for (const auto& [subject, acc] : per_subject)
    out.award_ranking.push_back({subject, acc.first / static_cast<double>(acc.second)});
  std::stable_sort(out.award_ranking.begin(), out.award_ranking.end(),
                   [](const AwardEntry& a, const AwardEntry& b) { return a.score < b.score; });
  return out;
}

// ---- Experiment plan ------------------------------------------------------------

enum class StageKind { test1, test2, test3, debrief, test4 };

inline const char* to_string(StageKind s) {
  switch (s) {
    case StageKind::test1: return "test1";
    case StageKind::test2: return "test2";
    case StageKind::test3: return "test3";
    case StageKind::debrief: return "debrief";
    case StageKind::test4: return "test4";
  }
  return "?";
}

struct DrawBlock {
  std::size_t k = 3;
  std::size_t draws = 100;
};

struct Stage {
  StageKind kind = StageKind::test1;
  std::vector<DrawBlock> blocks;  // free-generation blocks (tests 1 and 2)
  std::size_t rounds = 0;         // protocol rounds (tests 3 and 4)
  std::string instruction;
  bool award_scoring = false;
  bool dashboards_unlocked = false;
  bool blinded = false;
};

inline constexpr std::string_view kBlindedInstruction =
    "Enter a sequence of permutations that is as random as you can make it. "
    "The permutations will be used for cryptographic purposes.";
inline constexpr std::string_view kInformedInstruction =
    "You are playing the prover in the graph 3-coloring zero-knowledge protocol. "
    "Each permutation you enter relabels the secret coloring for one round; "
    "patterns in your choices let the verifier recover the coloring.";

struct ExperimentPlan {
  std::string subject;
  std::uint64_t seed = 0;
  bool history_visible = false;
  std::vector<Stage> stages;
};

inline ExperimentPlan make_experiment_plan(const std::string& subject, std::uint64_t seed,
                                           std::size_t protocol_rounds = 300) {
  ExperimentPlan plan;
  plan.subject = subject;
  plan.seed = seed;
  Rng rng(derive_seed(seed, subject));
  plan.history_visible = rng.bernoulli(0.5);

  const std::string free_text = "Enter random permutations of the displayed elements.";
  plan.stages.push_back({StageKind::test1, {{3, 100}}, 0, free_text, false, false, false});
  plan.stages.push_back({StageKind::test2, {{2, 100}, {4, 100}}, 0, free_text, false, false, false});
  plan.stages.push_back({StageKind::test3, {}, protocol_rounds, std::string(kBlindedInstruction), true, false, true});
  plan.stages.push_back({StageKind::debrief, {}, 0, "Review your results and the patterns found in them.", false,
                         true, false});
  Stage test4 = plan.stages[2];
  test4.kind = StageKind::test4;
  test4.instruction = std::string(kInformedInstruction);
  test4.dashboards_unlocked = true;
  test4.blinded = false;
  plan.stages.push_back(std::move(test4));
  return plan;
}

inline std::vector<std::size_t> sample_sequence(const TransitionModel& model, std::size_t length, std::uint64_t seed) {
  auto src = PermutationSource::biased(model, seed);
  std::vector<std::size_t> out;
  out.reserve(length);
  for (std::size_t i = 0; i < length; ++i) out.push_back(src.sample().rank());
  return out;
}

}  // namespace zk3col::lab
