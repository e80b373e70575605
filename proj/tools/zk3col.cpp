// zk3col: batch entry points for the 3-coloring protocol lab.

#include <atomic>
#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "zk3col/agent_spec.hpp"
#include "zk3col/attacks.hpp"
#include "zk3col/batch.hpp"
#include "zk3col/http_api.hpp"
#include "zk3col/json_io.hpp"
#include "zk3col/randomness_lab.hpp"
#include "zk3col/session_store.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace zk3col;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kIntegrity = 3 };

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::invalid_argument: return kUsage;
    case ErrorCode::integrity:
    case ErrorCode::sequence_gap:
      return kIntegrity;
    default: return kData;
  }
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + p.string());
  out << text;
}

Coloring read_coloring(const fs::path& p) {
  std::istringstream in(read_text(p));
  std::vector<Color> colors;
  long long c = 0;
  while (in >> c) colors.push_back(static_cast<Color>(c));
  return Coloring(std::move(colors));
}

struct Generated {
  Graph graph;
  std::optional<Coloring> coloring;
};

// planted:N[:P] | complete:N
Generated generate_graph(const std::string& spec, std::uint64_t seed) {
  auto [head, rest] = detail::split_head(spec);
  auto [n_text, p_text] = detail::split_head(rest);
  std::size_t n = 0;
  try {
    n = std::stoul(n_text);
  } catch (const std::exception&) {
    throw Error(ErrorCode::invalid_argument, "bad vertex count in --gen '" + spec + "'");
  }
  if (head == "planted") {
    const double p = p_text.empty() ? 0.5 : detail::parse_probability(p_text, "planted");
    auto inst = planted_3colorable(n, p, seed);
    return {std::move(inst.graph), std::move(inst.coloring)};
  }
  if (head == "complete") {
    std::vector<Edge> edges;
    for (Vertex u = 0; u < n; ++u)
      for (Vertex v = u + 1; v < n; ++v) edges.push_back({u, v});
    std::vector<Color> colors(n);
    for (std::size_t v = 0; v < n; ++v) colors[v] = static_cast<Color>(v % 3 + 1);
    Graph g(n, std::move(edges));
    if (n <= 3) return {std::move(g), Coloring(std::move(colors))};
    return {std::move(g), std::nullopt};  // not 3-colorable
  }
  throw Error(ErrorCode::invalid_argument, "unknown generator '" + spec + "' (planted:N[:P] or complete:N)");
}

// Log files under a path: a single file, DIR/sessions/*.jsonl or DIR/*.jsonl.
std::vector<fs::path> log_files(const fs::path& root) {
  if (!fs::exists(root)) throw Error(ErrorCode::io_error, "no such path " + root.string());
  if (fs::is_regular_file(root)) return {root};
  std::vector<fs::path> out;
  for (const auto& dir : {root / "sessions", root})
    if (fs::is_directory(dir))
      for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".jsonl") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<store::SessionRecord> load_all(const std::vector<fs::path>& roots) {
  std::vector<store::SessionRecord> recs;
  for (const auto& root : roots)
    for (const auto& f : log_files(root))
      for (auto& r : store::load_sessions(f)) recs.push_back(std::move(r));
  std::sort(recs.begin(), recs.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return recs;
}

std::string fmt(double x, int prec = 6) {
  std::ostringstream ss;
  ss << std::setprecision(prec) << x;
  return ss.str();
}

void emit_json(const json& j, const std::string& out) {
  if (out.empty()) std::cout << j.dump(2) << "\n";
  else write_text(out, j.dump(2) + "\n");
}

// ---- gen -------------------------------------------------------------------------

struct GenArgs {
  std::string gen = "planted:12:0.5";
  std::uint64_t seed = 0;
  std::string out;
  std::string coloring_out;
};

int cmd_gen(const GenArgs& a) {
  auto inst = generate_graph(a.gen, a.seed);
  std::string text = to_dimacs(inst.graph);
  if (a.out.empty()) std::cout << text;
  else write_text(a.out, text);
  if (!a.coloring_out.empty()) {
    if (!inst.coloring) throw Error(ErrorCode::invalid_argument, "generator has no proper 3-coloring to write");
    std::ostringstream ss;
    for (std::size_t v = 0; v < inst.coloring->size(); ++v) ss << (v ? " " : "") << (*inst.coloring)[v];
    write_text(a.coloring_out, ss.str() + "\n");
  }
  return kOk;
}

// ---- gen-seq ---------------------------------------------------------------------

struct GenSeqArgs {
  std::string model = "uniform";
  std::size_t k = 3;
  std::size_t length = 300;
  std::size_t subjects = 1;
  std::string subject = "s";
  std::string test = "test1";
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_gen_seq(const GenSeqArgs& a) {
  std::ostringstream ss;
  ss << "subject,test,k,symbol\n";
  for (std::size_t s = 0; s < a.subjects; ++s) {
    const std::string subject = a.subjects == 1 ? a.subject : a.subject + "-" + std::to_string(s + 1);
    auto src = make_permutation_source(a.model, a.k, derive_seed(a.seed, subject)).source;
    for (std::size_t i = 0; i < a.length; ++i) ss << subject << ',' << a.test << ',' << a.k << ',' << src.sample().rank() << '\n';
  }
  if (a.out.empty()) std::cout << ss.str();
  else write_text(a.out, ss.str());
  return kOk;
}

// ---- simulate --------------------------------------------------------------------

struct SimulateArgs {
  std::string graph;
  std::string gen;
  std::string coloring;
  std::string alice = "honest:uniform";
  std::string bob = "uniform";
  std::size_t rounds = 0;
  std::uint64_t seed = 0;
  std::size_t sessions = 1;
  std::string out;
  bool fixed_time = false;
  bool continue_on_reject = false;
  unsigned jobs = 1;
};

int cmd_simulate(const SimulateArgs& a) {
  BatchConfig cfg;
  if (!a.graph.empty() == !a.gen.empty()) throw Error(ErrorCode::invalid_argument, "give exactly one of --graph or --gen");
  if (!a.graph.empty()) {
    cfg.graph = parse_graph(read_text(a.graph));
  } else {
    auto inst = generate_graph(a.gen, derive_seed(a.seed, "graph"));
    cfg.graph = std::move(inst.graph);
    cfg.secret = std::move(inst.coloring);
  }
  if (!a.coloring.empty()) cfg.secret = read_coloring(a.coloring);
  cfg.alice = a.alice;
  cfg.bob = a.bob;
  cfg.rounds = a.rounds;
  cfg.seed = a.seed;
  cfg.sessions = a.sessions;
  cfg.abort_on_reject = !a.continue_on_reject;
  cfg.jobs = a.jobs;
  if (!a.out.empty()) {
    cfg.out_dir = a.out;
    std::error_code ec;
    fs::create_directories(fs::path(a.out) / "sessions", ec);
    if (ec) throw Error(ErrorCode::io_error, "cannot create output directory " + a.out);
  }
  if (a.fixed_time) cfg.clock = [] { return std::int64_t{0}; };
  if (cfg.sessions == 0) throw Error(ErrorCode::invalid_argument, "--sessions must be positive");

  const auto res = run_batch(cfg);
  const auto ci = wilson_interval(res.accepted, res.sessions.size());
  const auto bound = soundness_bound(res.m, res.rounds);
  const double rate = res.acceptance_rate();
  const double sigma = std::sqrt(rate * (1 - rate) / static_cast<double>(res.sessions.size()));

  std::map<std::size_t, std::size_t> bad_hist;
  for (const auto& s : res.sessions) ++bad_hist[s.bad_edges];
  std::optional<double> predicted;
  if (bad_hist.size() == 1 && cfg.alice.rfind("adaptive", 0) != 0 && cfg.abort_on_reject)
    predicted = acceptance_probability(bad_hist.begin()->first, res.m, res.rounds);

  std::cout << "graph          n=" << cfg.graph.n() << " m=" << res.m << "\n"
            << "alice          " << cfg.alice << "\n"
            << "bob            " << cfg.bob << "\n"
            << "rounds         " << res.rounds << "\n"
            << "sessions       " << res.sessions.size() << "\n"
            << "accepted       " << res.accepted << "\n"
            << "rejected       " << res.rejected << "\n"
            << "faults         " << res.faults << "\n"
            << "acceptance     " << fmt(rate) << "  95% CI [" << fmt(ci.lo) << ", " << fmt(ci.hi) << "]  sd " << fmt(sigma)
            << "\n"
            << "bound (1-1/m)^R " << fmt(bound.exact) << "\n"
            << "approx e^(-R/m) " << fmt(bound.approximate) << "\n";
  if (predicted) std::cout << "predicted      " << fmt(*predicted) << "  (bad edges " << bad_hist.begin()->first << ")\n";

  if (!a.out.empty()) {
    json sessions = json::array();
    for (const auto& s : res.sessions)
      sessions.push_back({{"id", s.id}, {"verdict", to_string(s.verdict)}, {"rounds_played", s.rounds_played},
                          {"bad_edges", s.bad_edges}});
    json summary{{"n", cfg.graph.n()},
                 {"m", res.m},
                 {"alice", cfg.alice},
                 {"bob", cfg.bob},
                 {"rounds", res.rounds},
                 {"seed", cfg.seed},
                 {"sessions", res.sessions.size()},
                 {"accepted", res.accepted},
                 {"rejected", res.rejected},
                 {"faults", res.faults},
                 {"acceptance_rate", rate},
                 {"ci95", {ci.lo, ci.hi}},
                 {"soundness_bound", {{"exact", bound.exact}, {"approximate", bound.approximate}}},
                 {"predicted", predicted ? json(*predicted) : json(nullptr)},
                 {"per_session", sessions}};
    write_text(fs::path(a.out) / "summary.json", summary.dump(2) + "\n");
  }
  return res.faults ? kData : kOk;
}

// ---- attack ----------------------------------------------------------------------

struct AttackArgs {
  std::vector<std::string> logs;
  std::string mode = "infer";
  std::string perm_model;
  int order = 0;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_attack(const AttackArgs& a) {
  std::vector<fs::path> roots(a.logs.begin(), a.logs.end());
  const auto recs = load_all(roots);
  if (recs.empty()) throw Error(ErrorCode::insufficient_data, "no sessions found in the given logs");

  json sessions = json::array();
  json report{{"mode", a.mode}};
  if (a.mode == "infer") {
    std::string model = a.perm_model;
    if (model.empty()) {
      std::cerr << "warning: no --perm-model given; assuming \"uniform\"\n";
      model = "uniform";
    }
    const auto prior = make_permutation_prior(model);
    report["perm_model"] = model;
    double cov_sum = 0.0, acc_sum = 0.0;
    std::size_t scored = 0;
    std::cout << std::left << std::setw(16) << "session" << std::setw(8) << "rounds" << std::setw(10) << "coverage"
              << "accuracy\n";
    for (const auto& r : recs) {
      if (!r.meta) continue;
      const auto t = r.transcripts();
      const auto h = infer_partition(t, prior);
      std::optional<PartitionScore> score;
      if (r.meta->secret) score = partition_accuracy(h, *r.meta->secret);
      auto j = attack_report_json(h, score, {{"perm_model", model}, {"rounds", t.size()}});
      j["session"] = r.id;
      sessions.push_back(j);
      if (score) {
        cov_sum += score->coverage;
        if (score->accuracy) acc_sum += *score->accuracy, ++scored;
      }
      std::cout << std::setw(16) << r.id << std::setw(8) << t.size() << std::setw(10)
                << (score ? fmt(score->coverage, 4) : "-")
                << (score && score->accuracy ? fmt(*score->accuracy, 4) : "-") << "\n";
    }
    report["summary"] = {{"sessions", sessions.size()},
                         {"mean_coverage", cov_sum / static_cast<double>(std::max<std::size_t>(sessions.size(), 1))},
                         {"mean_accuracy", scored ? json(acc_sum / static_cast<double>(scored)) : json(nullptr)}};
  } else if (a.mode == "cheat-eval") {
    // Learn the verifier's challenge distribution from the first half of
    // each session and score a cheating assignment on the second half.
    report["order"] = a.order;
    std::cout << std::left << std::setw(16) << "session" << std::setw(14) << "catch(pred)" << std::setw(14)
              << "catch(unif)" << "catch(heldout)\n";
    for (const auto& r : recs) {
      if (!r.meta) continue;
      const auto& g = r.meta->graph;
      std::vector<Edge> challenges;
      for (const auto& t : r.transcripts()) challenges.push_back(t.challenge);
      if (challenges.size() < 2) continue;
      const auto half = challenges.size() / 2;
      std::span<const Edge> train(challenges.data(), half);
      const auto q = predict_edge_distribution(train, g, a.order);
      const auto uq = EdgeDistribution::uniform(g.m());
      const auto cheat = cheat_coloring(g, q, derive_seed(a.seed, r.id));
      const auto naive = cheat_coloring(g, uq, derive_seed(a.seed, r.id));
      std::size_t caught = 0;
      for (std::size_t i = half; i < challenges.size(); ++i)
        caught += cheat[challenges[i].u] == cheat[challenges[i].v];
      const double held = static_cast<double>(caught) / static_cast<double>(challenges.size() - half);
      const double pred = expected_catch(g, cheat, q);
      const double unif = expected_catch(g, naive, uq);
      sessions.push_back({{"session", r.id},
                          {"train_rounds", half},
                          {"test_rounds", challenges.size() - half},
                          {"predicted_catch", pred},
                          {"uniform_catch", unif},
                          {"heldout_catch", held},
                          {"cheat_assignment", cheat.values()}});
      std::cout << std::setw(16) << r.id << std::setw(14) << fmt(pred, 4) << std::setw(14) << fmt(unif, 4)
                << fmt(held, 4) << "\n";
    }
  } else {
    throw Error(ErrorCode::invalid_argument, "unknown --mode '" + a.mode + "' (infer or cheat-eval)");
  }
  report["sessions"] = sessions;
  if (!a.out.empty()) write_text(a.out, report.dump(2) + "\n");
  return kOk;
}

// ---- analyze ---------------------------------------------------------------------

struct AnalyzeArgs {
  std::vector<std::string> inputs;
  std::size_t k = 0;  // 0: all
  bool aggregate = false;
  bool award = false;
  std::string out;
};

std::vector<lab::SymbolSequence> read_sequences(const fs::path& p) {
  std::map<std::tuple<std::string, std::string, std::size_t>, lab::SymbolSequence> seqs;
  std::vector<std::tuple<std::string, std::string, std::size_t>> order;
  auto push = [&](const std::string& subject, const std::string& test, std::size_t k, std::size_t sym) {
    auto key = std::make_tuple(subject, test, k);
    auto [it, fresh] = seqs.try_emplace(key);
    if (fresh) {
      it->second.k = k;
      it->second.subject = subject;
      it->second.test = test;
      order.push_back(key);
    }
    it->second.symbols.push_back(sym);
  };
  if (p.extension() == ".jsonl") {
    for (const auto& r : store::load_sessions(p))
      for (const auto& ev : r.events) {
        if (ev.kind != store::EventKind::human_input || ev.payload.value("role", "") != "alice") continue;
        push(r.id, ev.payload.value("stage", std::string("session")), ev.payload.value("k", std::size_t{3}),
             ev.payload.at("rank").get<std::size_t>());
      }
  } else {
    std::istringstream in(read_text(p));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (lineno == 1 && line.rfind("subject", 0) == 0) continue;
      std::vector<std::string> cols;
      std::stringstream ls(line);
      std::string cell;
      while (std::getline(ls, cell, ',')) cols.push_back(cell);
      auto bad = [&](const std::string& why) {
        return Error(ErrorCode::parse_error, p.string() + ":" + std::to_string(lineno) + ": " + why);
      };
      if (cols.size() != 4) throw bad("expected subject,test,k,symbol");
      std::size_t k = 0, sym = 0;
      try {
        std::size_t used = 0;
        k = std::stoul(cols[2], &used);
        if (used != cols[2].size()) throw std::invalid_argument("k");
        sym = std::stoul(cols[3], &used);
        if (used != cols[3].size()) throw std::invalid_argument("symbol");
      } catch (const std::exception&) {
        throw bad("non-integer k or symbol");
      }
      if (k < 2 || k > 4) throw bad("k must be 2, 3 or 4");
      if (sym >= factorial(k)) throw bad("symbol out of range for k");
      push(cols[0], cols[1], k, sym);
    }
  }
  std::vector<lab::SymbolSequence> out;
  for (const auto& key : order) out.push_back(std::move(seqs[key]));
  return out;
}

int cmd_analyze(const AnalyzeArgs& a) {
  std::vector<lab::TestReport> reports;
  json jr = json::array();
  std::size_t skipped = 0;
  for (const auto& in : a.inputs)
    for (const auto& seq : read_sequences(in)) {
      if (a.k && seq.k != a.k) continue;
      try {
        reports.push_back(lab::analyze_sequence(seq));
        jr.push_back(to_json(reports.back()));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::insufficient_data) throw;
        std::cerr << "warning: skipping " << seq.subject << "/" << seq.test << ": " << e.what() << "\n";
        ++skipped;
      }
    }
  if (reports.empty()) throw Error(ErrorCode::insufficient_data, "no sequence long enough to analyze");

  std::cout << std::left << std::setw(14) << "subject" << std::setw(10) << "test" << std::setw(4) << "k" << std::setw(7)
            << "len" << std::setw(12) << "p(uniform)" << std::setw(12) << "p(trans)" << std::setw(9) << "hit0"
            << "hit1\n";
  for (const auto& r : reports)
    std::cout << std::setw(14) << r.subject << std::setw(10) << r.test << std::setw(4) << r.k << std::setw(7) << r.length
              << std::setw(12) << fmt(r.chi2_uniform.p, 4) << std::setw(12)
              << (r.chi2_transition ? fmt(r.chi2_transition->p, 4) : "-") << std::setw(9) << fmt(r.hit_rate0, 4)
              << fmt(r.hit_rate1, 4) << "\n";

  json out{{"reports", jr}, {"skipped", skipped}};
  if (a.aggregate || a.award) {
    const auto agg = lab::aggregate_reports(reports);
    auto ja = to_json(agg);
    if (!a.award) ja.erase("award_ranking");
    out["aggregate"] = ja;
    if (a.award) {
      std::cout << "\naward ranking (lower score = more random)\n";
      std::size_t place = 1;
      for (const auto& e : agg.award_ranking) std::cout << "  " << place++ << ". " << e.subject << "  " << fmt(e.score, 4) << "\n";
    }
  }
  if (!a.out.empty()) write_text(a.out, out.dump(2) + "\n");
  return kOk;
}

// ---- experiment ------------------------------------------------------------------

struct ExperimentArgs {
  std::string subject = "subject";
  std::uint64_t seed = 0;
  std::size_t rounds = 300;
  std::string model = "uniform";
  std::string informed_model;
  std::string out;
  bool plan_only = false;
};

// Runs a plan end to end with a synthetic subject drawing from --model.
int cmd_experiment(const ExperimentArgs& a) {
  const auto plan = lab::make_experiment_plan(a.subject, a.seed, a.rounds);
  if (a.plan_only) {
    emit_json(to_json(plan), a.out);
    return kOk;
  }
  std::vector<lab::TestReport> reports;
  json stages = json::array();
  // Short blocks (k=4 at 100 draws is below 5 * 4!) are reported, not analyzed.
  auto analyze = [&](const lab::SymbolSequence& seq) -> json {
    try {
      reports.push_back(lab::analyze_sequence(seq));
      return to_json(reports.back());
    } catch (const Error& e) {
      if (e.code() != ErrorCode::insufficient_data) throw;
      return {{"test", seq.test}, {"skipped", e.what()}};
    }
  };
  const auto inst = planted_3colorable(12, 0.5, derive_seed(a.seed, "graph"));
  for (const auto& st : plan.stages) {
    const std::string name = lab::to_string(st.kind);
    const std::string model = st.kind == lab::StageKind::test4 && !a.informed_model.empty() ? a.informed_model : a.model;
    json js{{"stage", name}};
    for (const auto& b : st.blocks) {
      auto src = make_permutation_source(model, b.k, derive_seed(a.seed, name + "/k" + std::to_string(b.k))).source;
      lab::SymbolSequence seq{b.k, {}, a.subject, name + "/k" + std::to_string(b.k), plan.history_visible};
      for (std::size_t i = 0; i < b.draws; ++i) seq.symbols.push_back(src.sample().rank());
      js["blocks"].push_back(analyze(seq));
    }
    if (st.rounds > 0) {
      auto prover = make_prover("honest:" + model, inst.graph, inst.coloring, derive_seed(a.seed, name));
      auto verifier = make_verifier("uniform", inst.graph, derive_seed(a.seed, name));
      auto* fixed = dynamic_cast<FixedAssignmentProver*>(prover.agent.get());
      const auto result = run_session({inst.graph, st.rounds, derive_seed(a.seed, name), false}, *prover.agent,
                                      *verifier.agent);
      lab::SymbolSequence seq{3, fixed->permutations().history(), a.subject, name, plan.history_visible};
      const auto h = infer_partition(result.transcripts, PermutationPrior::from_model(fit_markov(seq.symbols, 3)));
      js["session"] = {{"verdict", to_string(result.verdict)},
                       {"report", analyze(seq)},
                       {"attack", attack_report_json(h, partition_accuracy(h, inst.coloring), {{"perm_model", "fitted"}})}};
    }
    stages.push_back(js);
  }
  json out{{"plan", to_json(plan)}, {"stages", stages}, {"aggregate", to_json(lab::aggregate_reports(reports))}};
  emit_json(out, a.out);
  return kOk;
}

// ---- replay ----------------------------------------------------------------------

struct ReplayArgs {
  std::vector<std::string> logs;
};

int cmd_replay(const ReplayArgs& a) {
  std::vector<store::SessionRecord> recs;
  try {
    recs = load_all({a.logs.begin(), a.logs.end()});
  } catch (const Error& e) {
    if (e.code() == ErrorCode::io_error) throw;
    std::cerr << "replay failed: " << e.what() << "\n";
    return kIntegrity;
  }
  bool ok = true;
  for (const auto& r : recs) {
    try {
      const auto verdicts = store::replay(r);
      std::cout << r.id << "  " << (r.verdict ? to_string(*r.verdict) : "unfinished") << "  rounds=" << verdicts.size()
                << "  ok\n";
    } catch (const Error& e) {
      ok = false;
      std::cout << r.id << "  FAILED  " << e.what() << "\n";
    }
  }
  std::cout << recs.size() << " session(s) replayed" << (ok ? "" : " with failures") << "\n";
  return ok ? kOk : kIntegrity;
}

// ---- serve -----------------------------------------------------------------------

struct ServeArgs {
  std::string data = "data";
  std::string host = "127.0.0.1";
  int port = 8080;
  long long timeout_ms = kDefaultExternalTimeout.count();
};

httplib::Server* g_server = nullptr;

int cmd_serve(const ServeArgs& a) {
  service::SessionManager mgr({a.data, std::chrono::milliseconds(a.timeout_ms)});
  httplib::Server srv;
  service::mount_routes(srv, mgr);
  std::atomic<bool> running{true};
  std::thread sweeper([&] {
    while (running) {
      std::this_thread::sleep_for(std::chrono::milliseconds(250));
      mgr.sweep();
    }
  });
  g_server = &srv;
  std::signal(SIGINT, [](int) { if (g_server) g_server->stop(); });
  std::signal(SIGTERM, [](int) { if (g_server) g_server->stop(); });
  std::cout << "listening on " << a.host << ":" << a.port << " (data " << a.data << ")" << std::endl;
  const bool ok = srv.listen(a.host, a.port);
  running = false;
  sweeper.join();
  if (!ok) {
    std::cerr << "error: cannot listen on " << a.host << ":" << a.port << "\n";
    return kData;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zk3col: graph 3-coloring zero-knowledge protocol lab"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* c_gen = app.add_subcommand("gen", "Generate a graph (edge-list text)");
  c_gen->add_option("--gen", gen.gen, "planted:N[:P] or complete:N")->capture_default_str();
  c_gen->add_option("--seed", gen.seed);
  c_gen->add_option("--out", gen.out, "Graph file (default stdout)");
  c_gen->add_option("--coloring-out", gen.coloring_out, "Write the planted coloring here");

  GenSeqArgs gs;
  auto* c_gs = app.add_subcommand("gen-seq", "Sample permutation sequences as CSV");
  c_gs->add_option("--model", gs.model, "uniform|identity|sticky:P|avoider:P|cycle:P|markov:FILE")->capture_default_str();
  c_gs->add_option("--k", gs.k)->check(CLI::Range(2, 4))->capture_default_str();
  c_gs->add_option("--length", gs.length)->capture_default_str();
  c_gs->add_option("--subjects", gs.subjects)->capture_default_str();
  c_gs->add_option("--subject", gs.subject)->capture_default_str();
  c_gs->add_option("--test", gs.test)->capture_default_str();
  c_gs->add_option("--seed", gs.seed);
  c_gs->add_option("--out", gs.out);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Run protocol sessions between simulated agents");
  c_sim->add_option("--graph", sim.graph, "Edge-list graph file");
  c_sim->add_option("--gen", sim.gen, "planted:N[:P] or complete:N");
  c_sim->add_option("--coloring", sim.coloring, "Secret coloring file (whitespace-separated colors)");
  c_sim->add_option("--alice", sim.alice, "[honest:|cheat:|adaptive:]<perm source>")->capture_default_str();
  c_sim->add_option("--bob", sim.bob, "uniform|weighted:W,..|recency:D|script:FILE")->capture_default_str();
  c_sim->add_option("--rounds", sim.rounds, "Rounds per session (0 = m^2, capped)");
  c_sim->add_option("--seed", sim.seed);
  c_sim->add_option("--sessions", sim.sessions)->capture_default_str();
  c_sim->add_option("--out", sim.out, "Directory for logs and summary.json");
  c_sim->add_flag("--fixed-time", sim.fixed_time, "Write ts=0 so logs are byte-identical across runs");
  c_sim->add_flag("--continue-on-reject", sim.continue_on_reject, "Play every round even after a reject");
  c_sim->add_option("--jobs", sim.jobs, "Worker threads")->capture_default_str();

  AttackArgs att;
  auto* c_att = app.add_subcommand("attack", "Run attacks over stored transcripts");
  c_att->add_option("--logs", att.logs, "Log files or directories")->required();
  c_att->add_option("--mode", att.mode, "infer or cheat-eval")->capture_default_str();
  c_att->add_option("--perm-model", att.perm_model, "Assumed permutation model for infer");
  c_att->add_option("--order", att.order, "Challenge predictor order for cheat-eval")->check(CLI::Range(0, 1));
  c_att->add_option("--seed", att.seed);
  c_att->add_option("--out", att.out, "Report JSON file");

  AnalyzeArgs an;
  auto* c_an = app.add_subcommand("analyze", "Randomness battery over symbol sequences");
  c_an->add_option("--input", an.inputs, "CSV (subject,test,k,symbol) or JSONL logs")->required();
  c_an->add_option("--k", an.k, "Only analyze sequences over k elements");
  c_an->add_flag("--aggregate", an.aggregate);
  c_an->add_flag("--award", an.award);
  c_an->add_option("--out", an.out, "Report JSON file");

  ExperimentArgs ex;
  auto* c_ex = app.add_subcommand("experiment", "Run an experiment plan with a synthetic subject");
  c_ex->add_option("--subject", ex.subject)->capture_default_str();
  c_ex->add_option("--seed", ex.seed);
  c_ex->add_option("--rounds", ex.rounds)->capture_default_str();
  c_ex->add_option("--model", ex.model, "Subject's permutation model")->capture_default_str();
  c_ex->add_option("--informed-model", ex.informed_model, "Model used after the debrief");
  c_ex->add_flag("--plan-only", ex.plan_only);
  c_ex->add_option("--out", ex.out);

  ReplayArgs rp;
  auto* c_rp = app.add_subcommand("replay", "Re-derive verdicts from logs and check integrity");
  c_rp->add_option("logs", rp.logs, "Log files or directories")->required();

  ServeArgs sv;
  auto* c_sv = app.add_subcommand("serve", "Serve the HTTP session API");
  c_sv->add_option("--data", sv.data)->capture_default_str();
  c_sv->add_option("--host", sv.host)->capture_default_str();
  c_sv->add_option("--port", sv.port)->capture_default_str();
  c_sv->add_option("--timeout-ms", sv.timeout_ms, "Human input timeout")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*c_gen) return cmd_gen(gen);
    if (*c_gs) return cmd_gen_seq(gs);
    if (*c_sim) return cmd_simulate(sim);
    if (*c_att) return cmd_attack(att);
    if (*c_an) return cmd_analyze(an);
    if (*c_ex) return cmd_experiment(ex);
    if (*c_rp) return cmd_replay(rp);
    if (*c_sv) return cmd_serve(sv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
