// Acceptance checks. One PASS/FAIL/SKIP line per criterion; exit status is
// nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>

#include "beads/beads.hpp"
#include "beads/cli.hpp"

namespace fs = std::filesystem;
using namespace beads;

namespace {

const fs::path kFixtures = BEADS_FIXTURES_DIR;

struct Outcome {
  enum { Pass, Fail, Skip } state = Pass;
  std::string detail;
};

Outcome fail(std::string why) { return {Outcome::Fail, std::move(why)}; }
Outcome skip(std::string why) { return {Outcome::Skip, std::move(why)}; }

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

std::string fmt(double v, int digits = 3) {
  std::ostringstream s;
  s.precision(digits);
  s << std::fixed << v;
  return s.str();
}

int cli_run(std::vector<std::string> args, std::string& out) {
  std::ostringstream o, e;
  int code = cli::run(args, o, e);
  out = o.str() + e.str();
  return code;
}

Outcome table2() {
  Timer t;
  std::string out;
  int code = cli_run({"--store", (kFixtures / "store").string(), "report", "tb2024", "th2024", "--sets",
                      "gold_tb,gold_th", "--format", "csv"},
                     out);
  double secs = t.seconds();
  if (code != 0) return fail("report exited " + std::to_string(code) + ": " + out);
  const std::map<std::string, std::string> want{{"SE", "43,35,40,33"}, {"CH", "38,31,37,28"}, {"PB", "29,22,22,14"},
                                                {"AEX", "17,9,13,6"},  {"AF", "32,24,34,28"},  {"PER", "21,18,12,7"},
                                                {"PD", "14,10,7,3"}};
  for (const auto& [tag, counts] : want)
    if (out.find("\n" + tag + "," + counts + ",") == std::string::npos) return fail("row " + tag + " != " + counts);
  if (secs >= 1.0) return fail("took " + fmt(secs) + " s");
  return {Outcome::Pass, "7 rows exact in " + fmt(secs) + " s"};
}

Outcome agreement70() {
  Timer t;
  std::string out;
  int code = cli_run(
      {"--store", (kFixtures / "store").string(), "compare", "gold_tb", "mock_tb", "--format", "json"}, out);
  double secs = t.seconds();
  if (code != 0) return fail("compare exited " + std::to_string(code));
  double rate = nlohmann::json::parse(out.substr(0, out.rfind('}') + 1))["exact_match_rate"];
  if (std::fabs(rate - 0.700) > 0.0005) return fail("exact_match_rate " + fmt(rate, 4));
  if (secs >= 1.0) return fail("took " + fmt(secs) + " s");
  return {Outcome::Pass, "exact_match_rate " + fmt(rate) + " in " + fmt(secs) + " s"};
}

Outcome context_effect() {
  auto reg = load_registry();
  auto corpus = load_corpus(kFixtures / "store" / "corpora" / "th_context.json");
  MockClient client(RuleTable::bundled(reg));
  auto tag_at = [&](std::size_t radius) {
    RunConfig cfg;
    cfg.radius = radius;
    auto run = autotag_corpus(client, PromptTemplate::bundled(), reg, corpus, cfg, "ctx", "mock");
    std::vector<std::string> tags;
    for (std::size_t row = 0; row < 5; ++row) {
      const Annotation* a = run.set.find(make_unit_id(corpus.debate_id(), 3 * row + 1));
      tags.push_back(a ? a->primary_tag : "<none>");
    }
    return tags;
  };
  auto with = tag_at(1), without = tag_at(0);
  const std::vector<std::string> expected{"DIS", "ANS", "AEX", "CH", "REB"};
  if (with != expected) return fail("radius 1 gave " + text::join(with, ","));
  if (corpus.unit_at(10).text != "That’s not true.") return fail("fixture row 4 text changed");
  if (without[3] == with[3]) return fail("radius 0 did not change the \"That's not true.\" row");
  return {Outcome::Pass, "radius 1 " + text::join(with, ",") + "; radius 0 " + text::join(without, ",")};
}

Outcome cleaning() {
  auto raw = RawTranscript::from_text("golden", text::read_file(kFixtures / "cleaning" / "raw.txt"));
  auto once = clean(raw);
  std::string joined;
  for (const auto& l : once.lines) joined += l + "\n";
  if (joined != text::read_file(kFixtures / "cleaning" / "expected.txt")) return fail("cleaned text differs");
  if (removal_log_jsonl(once.removed) != text::read_file(kFixtures / "cleaning" / "expected_removed.jsonl"))
    return fail("removal log differs");
  auto twice = clean(std::span<const std::string>(once.lines));
  if (twice.lines != once.lines || !twice.removed.empty()) return fail("clean is not idempotent");
  return {Outcome::Pass, std::to_string(once.removed.size()) + " lines removed, idempotent"};
}

// Per-unit brute force over two tag vectors ("" = unannotated).
struct Naive {
  std::size_t n = 0, exact = 0, overlap = 0;
  double kappa = 0;
};

Naive naive(const std::vector<std::string>& g, const std::vector<std::string>& g2, const std::vector<std::string>& o,
            const std::vector<std::string>& o2) {
  Naive r;
  std::map<std::string, double> rows, cols;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i].empty() || o[i].empty()) continue;
    ++r.n;
    rows[g[i]] += 1;
    cols[o[i]] += 1;
    if (g[i] == o[i]) ++r.exact;
    bool ov = g[i] == o[i] || g[i] == o2[i] || (!g2[i].empty() && (g2[i] == o[i] || g2[i] == o2[i]));
    if (ov) ++r.overlap;
  }
  if (r.n == 0) return r;
  double po = static_cast<double>(r.exact) / r.n, pe = 0;
  for (const auto& [k, v] : rows) pe += v / r.n * (cols.count(k) ? cols[k] / r.n : 0.0);
  r.kappa = pe >= 1.0 ? 1.0 : (po - pe) / (1.0 - pe);
  return r;
}

Outcome agreement_properties() {
  auto reg = load_registry();
  const std::vector<std::string> tags{"S", "CH", "AF", "SE", "PB"};
  std::mt19937 rng(1000);
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t units = 1 + rng() % 20;
    std::vector<std::string> ls;
    for (std::size_t i = 0; i < units; ++i) ls.push_back("A: Unit " + std::to_string(i) + ".");
    auto corpus = segment(parse_turns(ls), "rnd");
    std::size_t ntags = 1 + rng() % tags.size();
    auto pick = [&] { return tags[rng() % ntags]; };
    std::vector<std::string> g(units), g2(units), o(units), o2(units);
    auto gold = make_set("g", "rnd", "a", Provenance::Human);
    auto other = make_set("o", "rnd", "b", Provenance::Model);
    for (std::size_t i = 0; i < units; ++i) {
      auto id = corpus.unit_at(i).unit_id;
      if (rng() % 5 != 0) {
        g[i] = pick();
        if (rng() % 4 == 0 && (g2[i] = pick()) == g[i]) g2[i].clear();
        gold = upsert_annotation(gold, {id, g[i], g2[i].empty() ? std::vector<std::string>{} : std::vector{g2[i]}, "a",
                                        Provenance::Human, {}, {}},
                                 reg, corpus);
      }
      if (rng() % 5 != 0) {
        o[i] = rng() % 2 ? pick() : (g[i].empty() ? pick() : g[i]);
        if (rng() % 4 == 0 && (o2[i] = pick()) == o[i]) o2[i].clear();
        other = upsert_annotation(other, {id, o[i], o2[i].empty() ? std::vector<std::string>{} : std::vector{o2[i]}, "b",
                                          Provenance::Model, {}, {}},
                                  reg, corpus);
      }
    }
    auto want = naive(g, g2, o, o2);
    if (want.n == 0) {
      try {
        compare(gold, other, corpus);
        return fail("trial " + std::to_string(trial) + ": empty intersection not rejected");
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::EmptyIntersection) return fail("wrong error for empty intersection");
      }
      continue;
    }
    auto r = compare(gold, other, corpus);
    double n = static_cast<double>(want.n);
    if (r.compared_units != want.n || std::fabs(r.exact_match_rate - want.exact / n) > 1e-12 ||
        std::fabs(r.overlap_rate - want.overlap / n) > 1e-12 || std::fabs(r.kappa - want.kappa) > 1e-9)
      return fail("trial " + std::to_string(trial) + " disagrees with brute force");
    if (r.kappa < -1.0 || r.kappa > 1.0) return fail("kappa out of range");
    if (compare(gold, gold, corpus).kappa != 1.0) return fail("self kappa != 1");
  }
  ConfusionMatrix m{{"A", "B"}, {{40, 10}, {20, 30}}};
  double k = cohen_kappa(m);
  if (std::fabs(k - 0.4) > 1e-9) return fail("hand matrix kappa " + fmt(k, 6));
  return {Outcome::Pass, "1000 random pairs match brute force; hand matrix kappa " + fmt(k)};
}

Outcome persistence() {
  auto reg = load_registry();
  auto tmp = fs::temp_directory_path() / ("beads_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(tmp);
  struct Cleanup {
    fs::path p;
    ~Cleanup() {
      std::error_code ec;
      fs::remove_all(p, ec);
    }
  } cleanup{tmp};

  std::map<std::string, Corpus> corpora;
  for (const auto& entry : fs::directory_iterator(kFixtures / "store" / "corpora")) {
    auto name = entry.path().filename().string();
    if (!name.ends_with(".json")) continue;
    auto c = load_corpus(entry.path());
    save_corpus(c, tmp / name);
    if (load_corpus(tmp / name) != c) return fail("corpus " + name + " changed on round trip");
    corpora.emplace(c.debate_id(), std::move(c));
  }
  std::size_t sets = 0;
  for (const auto& entry : fs::directory_iterator(kFixtures / "store" / "sets")) {
    auto name = entry.path().filename().string();
    if (entry.path().extension() != ".jsonl") continue;
    auto header = read_set_header(entry.path());
    const auto& c = corpora.at(header.debate_id);
    auto s = load_set(entry.path(), reg, c);
    save_set(s, tmp / name);
    auto back = load_set(tmp / name, reg, c);
    if (!(back == s) || back.header.created_at != s.header.created_at) return fail("set " + name + " changed");
    if (text::read_file(tmp / name) != text::read_file(entry.path())) return fail("set " + name + " bytes changed");
    ++sets;
  }

  // malformed inputs must name the offending line
  auto lines = text::split_lines(text::read_file(kFixtures / "store" / "sets" / "gold_context.jsonl"));
  lines[2] = R"({"unit_id":"th_context#0001","primary_tag":"XYZ","secondary_tags":[]})";
  std::string broken;
  for (const auto& l : lines) broken += l + "\n";
  text::write_file_atomic(tmp / "broken.jsonl", broken);
  try {
    load_set(tmp / "broken.jsonl", reg, corpora.at("th_context"));
    return fail("malformed set accepted");
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::MalformedRecord || e.line() != 3u) return fail(std::string("set error: ") + e.what());
  }
  text::write_file_atomic(tmp / "broken.json", "{\n  \"debate_id\": \"x\",\n  oops\n}\n");
  try {
    load_corpus(tmp / "broken.json");
    return fail("malformed corpus accepted");
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::MalformedCorpusFile || e.line() != 3u)
      return fail(std::string("corpus error: ") + e.what());
  }
  return {Outcome::Pass, std::to_string(corpora.size()) + " corpora and " + std::to_string(sets) +
                             " sets lossless; malformed files report line 3"};
}

Outcome full_transcripts() {
  struct Target {
    const char* env;
    const char* id;
    double words;
    double units;
  };
  const Target targets[]{{"BEADS_TB_TRANSCRIPT", "tb", 19219, 1450}, {"BEADS_TH_TRANSCRIPT", "th", 18123, 1472}};
  std::string detail;
  bool any = false;
  for (const auto& t : targets) {
    const char* path = std::getenv(t.env);
    if (!path || !*path) continue;
    any = true;
    auto raw = RawTranscript::from_text(t.id, text::read_file(path));
    auto st = stats(ingest(raw).corpus);
    double words = static_cast<double>(st.word_count), units = static_cast<double>(st.unit_count);
    std::string line = std::string(t.id) + " words " + std::to_string(st.word_count) + ", units " +
                       std::to_string(st.unit_count);
    if (std::fabs(words - t.words) > 0.02 * t.words || std::fabs(units - t.units) > 0.05 * t.units)
      return fail(line);
    detail += (detail.empty() ? "" : "; ") + line;
  }
  if (!any) return skip("set BEADS_TB_TRANSCRIPT / BEADS_TH_TRANSCRIPT to transcript files to run");
  return {Outcome::Pass, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"table2-reproduction", table2},
      {"agreement-70-percent", agreement70},
      {"context-effect-harness", context_effect},
      {"cleaning-golden", cleaning},
      {"agreement-properties", agreement_properties},
      {"persistence-round-trips", persistence},
      {"full-transcript-stats", full_transcripts},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = fail(std::string("exception: ") + e.what());
    }
    const char* label = o.state == Outcome::Pass ? "PASS" : o.state == Outcome::Fail ? "FAIL" : "SKIP";
    if (o.state == Outcome::Fail) ++failures;
    std::cout << label << " " << name << ": " << o.detail << "\n";
  }
  return failures == 0 ? 0 : 1;
}
