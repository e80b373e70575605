#include <gtest/gtest.h>

#include <fstream>

#include "zk3col/batch.hpp"
#include "zk3col/session_store.hpp"

using namespace zk3col;
using namespace zk3col::store;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("zk3col_store_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

void write_lines(const fs::path& p, const std::vector<std::string>& lines) {
  std::ofstream out(p, std::ios::trunc);
  for (const auto& l : lines) out << l << '\n';
}

BatchConfig small_batch(const fs::path& dir, const std::string& alice, std::size_t sessions) {
  auto inst = planted_3colorable(8, 0.5, 3);
  BatchConfig cfg;
  cfg.graph = inst.graph;
  cfg.secret = inst.coloring;
  cfg.alice = alice;
  cfg.bob = "uniform";
  cfg.rounds = 12;
  cfg.seed = 42;
  cfg.sessions = sessions;
  cfg.out_dir = dir;
  cfg.clock = [] { return std::int64_t{0}; };
  return cfg;
}

// True when loading or replaying the file raises an error.
bool detected(const fs::path& p) {
  try {
    for (const auto& rec : load_sessions(p)) replay(rec);
  } catch (const Error&) {
    return true;
  }
  return false;
}

// Collects JSON pointers to every scalar leaf.
void leaves(const json& j, const json::json_pointer& at, std::vector<json::json_pointer>& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) leaves(it.value(), at / it.key(), out);
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) leaves(j[i], at / i, out);
  } else {
    out.push_back(at);
  }
}

json mutate(const json& v, Rng& rng) {
  if (v.is_boolean()) return !v.get<bool>();
  if (v.is_number_unsigned()) return v.get<std::uint64_t>() + 1 + rng.uniform_index(3);
  if (v.is_number_integer()) return v.get<std::int64_t>() + 1 + static_cast<std::int64_t>(rng.uniform_index(3));
  if (v.is_number_float()) return v.get<double>() + 0.5;
  if (v.is_string()) {
    auto s = v.get<std::string>();
    if (s.empty()) return std::string("0");
    auto& c = s[rng.uniform_index(s.size())];
    c = c == '0' ? '1' : '0';
    return s;
  }
  return 0;
}

}  // namespace

TEST(EventRecord, RoundTripsThroughOneLine) {
  EventRecord r;
  r.seq = 7;
  r.ts = -3;
  r.session = "s\"x";
  r.kind = EventKind::challenge_posted;
  r.payload = {{"round", 2}, {"edge", {1, 4}}};
  r.prev = "abcd";
  r.hash = r.content_hash();
  const auto line = r.to_line();
  EXPECT_EQ(line.find('\n'), std::string::npos);
  EXPECT_EQ(EventRecord::from_line(line), r);
  EXPECT_NE(line.find("\"v\":1"), std::string::npos);
}

TEST(EventRecord, RejectsMalformedLines) {
  EXPECT_THROW(EventRecord::from_line("{"), Error);
  EXPECT_THROW(EventRecord::from_line("{\"v\":2}"), Error);
  EXPECT_THROW(EventRecord::from_line(R"({"v":1,"seq":1,"ts":0,"session":"a","kind":"nope","payload":{},"prev":"","hash":""})"),
               Error);
  EXPECT_THROW(event_kind_from_string("round_over"), Error);
}

TEST(EventLog, ResumesSequenceAndChainAfterReopen) {
  auto dir = fresh_dir("resume");
  const auto path = dir / "log.jsonl";
  {
    EventLog log(path, [] { return std::int64_t{5}; });
    log.append("a", EventKind::human_input, {{"x", 1}});
    log.append("b", EventKind::human_input, {{"x", 2}});
  }
  EventLog log(path);
  EXPECT_EQ(log.last_seq("a"), 1u);
  EXPECT_EQ(log.last_seq("zzz"), 0u);
  auto r = log.append("a", EventKind::human_input, {{"x", 3}});
  EXPECT_EQ(r.seq, 2u);
  auto recs = load_sessions(path);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_TRUE(recs[0].chain_ok);
  EXPECT_EQ(recs[0].human_inputs.size(), 2u);
  EXPECT_EQ(recs[0].events[1].prev, recs[0].events[0].hash);
}

TEST(EventLog, RefusesSequenceGaps) {
  auto dir = fresh_dir("gap");
  EventLog log(dir / "log.jsonl");
  EventRecord r;
  r.session = "s";
  r.seq = 2;
  try {
    log.append(r);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::sequence_gap);
  }
}

TEST(Load, ReportsLineNumbers) {
  auto dir = fresh_dir("lines");
  const auto path = dir / "x.jsonl";
  write_lines(path, {"", "not json"});
  try {
    load_sessions(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::parse_error);
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
  write_lines(path, {});
  EXPECT_TRUE(load_sessions(path).empty());
  EXPECT_THROW(load_sessions(dir / "missing.jsonl"), Error);
  EXPECT_THROW(load_session(path, "nobody"), Error);
}

TEST(Replay, StoredSessionsReplayToTheirVerdicts) {
  auto dir = fresh_dir("replay");
  auto honest = small_batch(dir, "honest:uniform", 60);
  auto res = run_batch(honest);
  auto cheat = small_batch(dir, "cheat:uniform", 40);
  cheat.graph = Graph(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}});
  cheat.secret.reset();
  cheat.rounds = 36;
  cheat.seed = 43;
  for (std::size_t i = 0; i < cheat.sessions; ++i) {
    auto s = run_batch_session(cheat, 100 + i);
    auto rec = load_session(session_log_path(dir, s.id), s.id);
    auto v = replay(rec);
    EXPECT_EQ(v.size(), s.rounds_played);
    EXPECT_EQ(*rec.verdict, s.verdict);
  }
  for (const auto& s : res.sessions) {
    auto rec = load_session(session_log_path(dir, s.id), s.id);
    ASSERT_TRUE(rec.meta);
    EXPECT_EQ(rec.meta->alice, "honest:uniform");
    EXPECT_EQ(replay(rec).size(), 12u);
    EXPECT_EQ(*rec.verdict, SessionVerdict::accepted);
    EXPECT_EQ(rec.transcripts().size(), 12u);
  }
}

TEST(Replay, EverySingleFieldTamperingIsDetected) {
  auto dir = fresh_dir("tamper");
  auto cfg = small_batch(dir, "honest:sticky:0.5", 10);
  run_batch(cfg);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir / "sessions")) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) ASSERT_FALSE(detected(f)) << f;

  Rng rng(2024);
  const auto scratch = dir / "scratch.jsonl";
  for (int trial = 0; trial < 1000; ++trial) {
    const auto& f = files[rng.uniform_index(files.size())];
    auto lines = read_lines(f);
    const auto li = rng.uniform_index(lines.size());
    auto j = json::parse(lines[li]);
    std::vector<json::json_pointer> ptrs;
    leaves(j, json::json_pointer(), ptrs);
    const auto& ptr = ptrs[rng.uniform_index(ptrs.size())];
    const auto before = j.at(ptr);
    j.at(ptr) = mutate(before, rng);
    ASSERT_NE(j.at(ptr), before);
    lines[li] = j.dump();
    write_lines(scratch, lines);
    ASSERT_TRUE(detected(scratch)) << "line " << li << " field " << ptr.to_string();
  }
}

TEST(Replay, DroppedOrReorderedLinesAreDetected) {
  auto dir = fresh_dir("drop");
  run_batch(small_batch(dir, "honest:uniform", 1));
  const auto f = session_log_path(dir, batch_session_id(0));
  auto lines = read_lines(f);
  const auto scratch = dir / "s.jsonl";
  for (std::size_t i = 0; i + 1 < lines.size(); ++i) {
    auto copy = lines;
    copy.erase(copy.begin() + static_cast<std::ptrdiff_t>(i));
    write_lines(scratch, copy);
    EXPECT_TRUE(detected(scratch)) << i;
  }
  // A truncated tail reads as a session still in progress.
  write_lines(scratch, std::vector<std::string>(lines.begin(), lines.end() - 1));
  EXPECT_FALSE(detected(scratch));
  EXPECT_FALSE(load_sessions(scratch)[0].verdict);
  auto swapped = lines;
  std::swap(swapped[2], swapped[3]);
  write_lines(scratch, swapped);
  EXPECT_TRUE(detected(scratch));
}

TEST(Replay, ForgedVerdictWithConsistentHashesIsStillCaught) {
  // Rewrites a round verdict and re-seals the whole chain: only the
  // re-derivation from commitments and openings can notice.
  auto dir = fresh_dir("forge");
  run_batch(small_batch(dir, "honest:uniform", 1));
  const auto f = session_log_path(dir, batch_session_id(0));
  std::vector<EventRecord> evs;
  for (const auto& l : read_lines(f)) evs.push_back(EventRecord::from_line(l));
  for (auto& e : evs)
    if (e.kind == EventKind::round_verdict && e.payload.at("round") == 3) e.payload["verdict"] = "reject";
  const auto scratch = dir / "sealed.jsonl";
  fs::remove(scratch);
  {
    EventLog log(scratch);
    for (auto e : evs) log.append(e);
  }
  auto recs = load_sessions(scratch);
  ASSERT_TRUE(recs[0].chain_ok);
  try {
    replay(recs[0]);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::integrity);
    EXPECT_NE(std::string(e.what()).find("round 3"), std::string::npos) << e.what();
  }
}

TEST(Batch, ResultsDoNotDependOnJobCount) {
  auto cfg = small_batch(fresh_dir("jobs1"), "cheat:uniform", 40);
  cfg.graph = Graph(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}});
  cfg.secret.reset();
  cfg.out_dir.reset();
  cfg.jobs = 1;
  auto a = run_batch(cfg);
  cfg.jobs = 4;
  auto b = run_batch(cfg);
  ASSERT_EQ(a.sessions.size(), b.sessions.size());
  for (std::size_t i = 0; i < a.sessions.size(); ++i) {
    EXPECT_EQ(a.sessions[i].verdict, b.sessions[i].verdict);
    EXPECT_EQ(a.sessions[i].rounds_played, b.sessions[i].rounds_played);
  }
  EXPECT_EQ(a.accepted + a.rejected + a.faults, 40u);
}

TEST(Batch, WilsonInterval) {
  auto w = wilson_interval(0, 0);
  EXPECT_EQ(w.lo, 0.0);
  EXPECT_EQ(w.hi, 1.0);
  // 50 of 100: centre 0.5, half-width 1.96*sqrt(.25/100+.96/40000)/1.0384
  auto h = wilson_interval(50, 100);
  EXPECT_NEAR(h.lo, 0.40383153, 1e-6);
  EXPECT_NEAR(h.hi, 0.59616847, 1e-6);
  EXPECT_EQ(wilson_interval(0, 10).lo, 0.0);
}
