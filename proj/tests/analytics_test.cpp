#include <gtest/gtest.h>

#include <map>
#include <numeric>
#include <random>
#include <string>

#include "beads/analytics.hpp"
#include "support.hpp"

using namespace beads;
using testing_support::fixtures;
using testing_support::kind_of;

namespace {

const TagRegistry& registry() {
  static const TagRegistry r = load_registry();
  return r;
}

struct Loaded {
  Corpus corpus;
  AnnotationSet gold;
};

const Loaded& debate(const std::string& id) {
  static std::map<std::string, Loaded> cache;
  auto it = cache.find(id);
  if (it == cache.end()) {
    auto c = load_corpus(fixtures() / "store" / "corpora" / (id + ".json"));
    auto set_file = id == "tb2024" ? "gold_tb.jsonl" : "gold_th.jsonl";
    auto s = load_set(fixtures() / "store" / "sets" / set_file, registry(), c);
    it = cache.emplace(id, Loaded{std::move(c), std::move(s)}).first;
  }
  return it->second;
}

FrequencyTable table(const std::string& id, CountMode mode = CountMode::PrimaryOnly, bool moderators = false) {
  return tag_frequencies(debate(id).gold, debate(id).corpus, mode, moderators);
}

const std::vector<std::string> kTable2Tags{"SE", "CH", "PB", "AEX", "AF", "PER", "PD"};

// tag -> {tb TRUMP, tb BIDEN, th TRUMP, th HARRIS}
const std::map<std::string, std::array<std::size_t, 4>> kTable2{
    {"SE", {43, 35, 40, 33}}, {"CH", {38, 31, 37, 28}}, {"PB", {29, 22, 22, 14}}, {"AEX", {17, 9, 13, 6}},
    {"AF", {32, 24, 34, 28}}, {"PER", {21, 18, 12, 7}}, {"PD", {14, 10, 7, 3}}};

}  // namespace

TEST(Frequencies, FixturesReproduceTable) {
  auto tb = table("tb2024"), th = table("th2024");
  EXPECT_EQ(tb.speakers, (std::vector<std::string>{"TRUMP", "BIDEN"}));
  EXPECT_EQ(th.speakers, (std::vector<std::string>{"TRUMP", "HARRIS"}));
  for (const auto& [tag, want] : kTable2) {
    EXPECT_EQ(tb.count(tag, "TRUMP"), want[0]) << tag;
    EXPECT_EQ(tb.count(tag, "BIDEN"), want[1]) << tag;
    EXPECT_EQ(th.count(tag, "TRUMP"), want[2]) << tag;
    EXPECT_EQ(th.count(tag, "HARRIS"), want[3]) << tag;
  }
}

TEST(Frequencies, PrimaryCountsPartitionAnnotatedUnits) {
  for (const char* id : {"tb2024", "th2024"}) {
    for (bool mods : {false, true}) {
      auto t = table(id, CountMode::PrimaryOnly, mods);
      std::map<std::string, std::size_t> per_speaker;
      for (const auto& [key, n] : t.counts) per_speaker[key.second] += n;
      std::size_t total = 0;
      for (const auto& s : t.speakers) {
        EXPECT_EQ(per_speaker[s], t.annotated_units_by_speaker[s]) << id << " " << s;
        total += per_speaker[s];
      }
      if (mods) EXPECT_EQ(total, debate(id).gold.size());
    }
  }
}

TEST(Frequencies, ModeratorsExcludedByDefault) {
  EXPECT_FALSE(table("tb2024").has_speaker("MODERATOR"));
  auto with = table("tb2024", CountMode::PrimaryOnly, true);
  EXPECT_TRUE(with.has_speaker("MODERATOR"));
  EXPECT_GT(with.count("OQ", "MODERATOR"), 0u);
}

TEST(Frequencies, IncludeSecondaryAddsSecondaries) {
  auto primary = table("tb2024"), both = table("tb2024", CountMode::IncludeSecondary);
  std::size_t secondaries = 0;
  for (const auto& [_, a] : debate("tb2024").gold.annotations)
    if (!debate("tb2024").corpus.is_moderator(debate("tb2024").corpus.speaker_at(
            *debate("tb2024").corpus.seq_of(a.unit_id))))
      secondaries += a.secondary_tags.size();
  std::size_t p = 0, b = 0;
  for (const auto& [_, n] : primary.counts) p += n;
  for (const auto& [_, n] : both.counts) b += n;
  EXPECT_GT(secondaries, 0u);
  EXPECT_EQ(b, p + secondaries);
  EXPECT_GE(both.count("AF", "TRUMP"), primary.count("AF", "TRUMP"));
}

TEST(Frequencies, InsertionOrderInvariant) {
  const auto& d = debate("th2024");
  std::vector<Annotation> anns;
  for (const auto& [_, a] : d.gold.annotations) anns.push_back(a);
  std::mt19937 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(anns.begin(), anns.end(), rng);
    auto set = make_set("shuffled", d.corpus.debate_id(), "expert", Provenance::Human);
    for (const auto& a : anns) set = upsert_annotation(std::move(set), a, registry(), d.corpus);
    EXPECT_EQ(tag_frequencies(set, d.corpus), table("th2024"));
  }
}

TEST(Frequencies, CrossDebateRejected) {
  EXPECT_EQ(kind_of([] { tag_frequencies(debate("tb2024").gold, debate("th2024").corpus); }),
            ErrorKind::CrossDebate);
}

TEST(TopK, TrumpFirstDebate) {
  auto top = top_k_categories(table("tb2024"), "TRUMP", 5, default_bias_tags(registry()));
  std::vector<std::string> codes;
  for (const auto& c : top) codes.push_back(c.code);
  EXPECT_EQ(codes, (std::vector<std::string>{"SE", "CH", "AF", "PB", "PER"}));
  EXPECT_EQ(top[0].count, 43u);
}

TEST(TopK, TiesBreakByCodeAndZerosDropped) {
  FrequencyTable t;
  t.debate_id = "d";
  t.speakers = {"A"};
  t.counts = {{{"PB", "A"}, 3}, {{"AF", "A"}, 3}, {{"SE", "A"}, 5}, {{"CH", "A"}, 0}};
  auto top = top_k_categories(t, "A", 10, {"SE", "PB", "AF", "CH", "GB"});
  ASSERT_EQ(top.size(), 3u);
  EXPECT_EQ(top[0], (TagCount{"SE", 5}));
  EXPECT_EQ(top[1], (TagCount{"AF", 3}));
  EXPECT_EQ(top[2], (TagCount{"PB", 3}));
  EXPECT_EQ(top_k_categories(t, "A", 1, {"AF", "PB"}).front().code, "AF");
}

TEST(TopK, Errors) {
  auto t = table("tb2024");
  EXPECT_EQ(kind_of([&] { top_k_categories(t, "HARRIS", 5, {"SE"}); }), ErrorKind::UnknownSpeaker);
  EXPECT_EQ(kind_of([&] { top_k_categories(t, "TRUMP", 0, {"SE"}); }), ErrorKind::InvalidArgument);
  EXPECT_EQ(kind_of([&] { top_k_categories(t, "TRUMP", 3, {}); }), ErrorKind::InvalidArgument);
}

TEST(TopK, DefaultBiasTagsExcludeStructural) {
  auto tags = default_bias_tags(registry());
  for (const char* c : {"SE", "CH", "AF", "PB", "PER", "PD", "AEX"})
    EXPECT_NE(std::find(tags.begin(), tags.end(), c), tags.end()) << c;
  for (const char* c : {"S", "OQ", "DIS", "ANS"}) EXPECT_EQ(std::find(tags.begin(), tags.end(), c), tags.end()) << c;
}

TEST(CompareDebates, SevenRows) {
  auto cmp = compare_debates(table("tb2024"), table("th2024"), kTable2Tags, registry());
  ASSERT_EQ(cmp.rows.size(), 7u);
  for (const auto& row : cmp.rows) {
    const auto& want = kTable2.at(row.tag);
    EXPECT_EQ(row.first, (std::vector<std::size_t>{want[0], want[1]})) << row.tag;
    EXPECT_EQ(row.second, (std::vector<std::size_t>{want[2], want[3]})) << row.tag;
  }
  auto gb = compare_debates(table("tb2024"), table("th2024"), {"gb"}, registry());
  EXPECT_EQ(gb.rows[0].tag, "GB");
  EXPECT_EQ(gb.rows[0].first, (std::vector<std::size_t>{0, 0}));
  EXPECT_EQ(kind_of([] { compare_debates(table("tb2024"), table("tb2024"), {"SE"}, registry()); }),
            ErrorKind::SameDebate);
  EXPECT_EQ(kind_of([] { compare_debates(table("tb2024"), table("th2024"), {"XYZ"}, registry()); }),
            ErrorKind::UnknownTag);
}

TEST(Render, CsvRows) {
  auto cmp = compare_debates(table("tb2024"), table("th2024"), kTable2Tags, registry(), {{"se", "a, quoted \"note\""}});
  auto csv = render_metrics(cmp, "csv", registry());
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "tag,tb2024:TRUMP,tb2024:BIDEN,th2024:TRUMP,th2024:HARRIS,note");
  EXPECT_NE(csv.find("\nSE,43,35,40,33,\"a, quoted \"\"note\"\"\"\n"), std::string::npos);
  EXPECT_NE(csv.find("\nPD,14,10,7,3,\n"), std::string::npos);

  auto empty = compare_debates(table("tb2024"), table("th2024"), {}, registry());
  auto header_only = render_metrics(empty, "csv", registry());
  EXPECT_EQ(std::count(header_only.begin(), header_only.end(), '\n'), 1);
  EXPECT_EQ(kind_of([&] { render_metrics(cmp, "pdf", registry()); }), ErrorKind::UnknownFormat);
}

TEST(Render, MarkdownLayout) {
  auto cmp = compare_debates(table("tb2024"), table("th2024"), kTable2Tags, registry(), {{"PD", "less | dismissive"}});
  auto md = render_metrics(cmp, "md", registry());
  EXPECT_NE(md.find("| Category | tb2024 | th2024 | Key Difference |"), std::string::npos);
  EXPECT_NE(md.find("| 43 (T), 35 (B) | 40 (T), 33 (H) |"), std::string::npos);
  EXPECT_NE(md.find("less \\| dismissive"), std::string::npos);
  EXPECT_NE(md.find("counting mode: primary_only"), std::string::npos);
}
