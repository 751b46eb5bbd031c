// Regenerates the committed fixture store under <fixtures-dir>:
//   raw/*.txt                synthetic transcripts built from quoted debate excerpts
//   store/corpora/*          ingested corpora and removal logs
//   store/sets/*.jsonl       gold (human) and mock (model) annotation sets
//   store/notes/*.json       key-difference notes for the cross-debate report
//
// usage: make_fixtures <fixtures-dir>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "beads/beads.hpp"

namespace fs = std::filesystem;
using namespace beads;

namespace {

constexpr const char* kStamp = "2024-10-01T00:00:00Z";

struct Planned {
  std::string speaker;
  std::string text;
  std::string tag;
  std::vector<std::string> secondary;
};

using Pools = std::map<std::string, std::vector<std::string>>;

struct SpeakerPlan {
  std::string name;
  std::vector<std::pair<std::string, int>> counts;  // tag, number of units
  Pools pools;
};

// Weighted round robin: always emit the tag with the most units left.
std::vector<Planned> expand(const SpeakerPlan& plan) {
  auto left = plan.counts;
  std::map<std::string, std::size_t> cursor;
  std::vector<Planned> out;
  for (;;) {
    auto it = std::max_element(left.begin(), left.end(),
                               [](const auto& a, const auto& b) { return a.second < b.second; });
    if (it == left.end() || it->second == 0) break;
    const auto& pool = plan.pools.at(it->first);
    std::string text = pool[cursor[it->first]++ % pool.size()];
    out.push_back({plan.name, std::move(text), it->first, {}});
    --it->second;
  }
  return out;
}

struct Debate {
  std::string id;
  std::string source;
  std::string header;
  std::vector<std::string> questions;
  SpeakerPlan first;
  SpeakerPlan second;
};

// Interleaves moderator questions and candidate turns of 3 to 6 units, and
// injects broadcast noise the cleaner must strip.
std::pair<std::string, std::vector<Planned>> build_transcript(const Debate& d) {
  auto a = expand(d.first);
  auto b = expand(d.second);
  std::vector<Planned> plan;
  std::string raw = d.header + "\n\n";
  std::size_t ia = 0, ib = 0, q = 0, turn = 0;
  const std::size_t sizes[] = {4, 3, 5, 6, 3, 4, 5};

  auto moderator = [&](const std::string& text, const std::string& tag) {
    raw += "MODERATOR: " + text + "\n";
    plan.push_back({"MODERATOR", text, tag, {}});
  };
  auto speak = [&](const std::vector<Planned>& units, std::size_t& i, std::size_t n) {
    if (i >= units.size()) return;
    std::string line = units[i].speaker + ":";
    std::size_t end = std::min(units.size(), i + n);
    for (std::size_t k = i; k < end; ++k) {
      // every third turn wraps onto a continuation line
      if (k == i + 2 && turn % 3 == 0) {
        raw += line + "\n";
        line = units[k].text;
      } else {
        line += " " + units[k].text;
      }
      plan.push_back(units[k]);
    }
    raw += line + "\n";
    i = end;
    ++turn;
  };

  moderator("Good evening and welcome to tonight's presidential debate.", "S");
  moderator("Each candidate will have two minutes to answer.", "S");
  while (ia < a.size() || ib < b.size()) {
    moderator(d.questions[q % d.questions.size()], "OQ");
    ++q;
    speak(a, ia, sizes[turn % 7]);
    speak(b, ib, sizes[turn % 7]);
    if (q % 6 == 0) raw += "\n(COMMERCIAL BREAK)\n\n";
    if (q % 4 == 0) {
      char stamp[32];
      std::snprintf(stamp, sizeof stamp, "%zu:%02zu", 21 + q / 30, (q * 7) % 60);
      raw += std::string(stamp) + "\n";
    }
    if (q % 9 == 0) raw += "[applause]\n";
  }
  // pad with moderator statements so the unit count is a multiple of ten
  while (plan.size() % 10 != 0) moderator("Thank you both.", "S");
  raw += "\n" + d.header + "\n";
  return {raw, plan};
}

Corpus ingest_checked(const std::string& id, const std::string& source, const std::string& raw,
                      const std::vector<Planned>& plan, const Store& store) {
  auto result = ingest(RawTranscript::from_text(id, raw, source), {"MODERATOR"});
  const Corpus& c = result.corpus;
  if (c.unit_count() != plan.size()) {
    std::cerr << id << ": planned " << plan.size() << " units, segmenter produced " << c.unit_count() << "\n";
    std::exit(1);
  }
  for (std::size_t i = 0; i < plan.size(); ++i) {
    if (c.unit_at(i).text != plan[i].text || c.speaker_at(i) != plan[i].speaker) {
      std::cerr << id << ": unit " << i << " is '" << c.unit_at(i).text << "', planned '" << plan[i].text << "'\n";
      std::exit(1);
    }
  }
  store.save_corpus(c, result.removed);
  return c;
}

AnnotationSet build_set(const std::string& set_id, const Corpus& c, const std::string& annotator, Provenance prov,
                        const std::vector<Planned>& plan) {
  AnnotationSet s;
  s.header = {set_id, c.debate_id(), annotator, prov, kStamp};
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const auto& id = c.unit_at(i).unit_id;
    s.annotations[id] = {id, plan[i].tag, plan[i].secondary, annotator, prov, std::nullopt, kStamp};
  }
  return s;
}

// Model set disagreeing with gold on units whose index mod 10 is 2, 5 or 8:
// exactly 30% of the corpus.
AnnotationSet build_mock(const std::string& set_id, const AnnotationSet& gold, const Corpus& c) {
  static const std::map<std::string, std::string> confusable{
      {"SE", "AF"},   {"AF", "SE"},   {"CH", "AEX"}, {"AEX", "CH"},  {"PB", "SE"},   {"PER", "PD"},
      {"PD", "PER"},  {"S", "EXPL"},  {"OQ", "S"},   {"AP", "SE"},   {"EXPL", "S"},  {"CORR", "CH"},
      {"REB", "CH"},  {"INT", "T_REQ"}, {"T_REQ", "INT"}, {"SEEP", "OQ"}, {"ATTR", "PB"}, {"CB", "PB"},
      {"CBIAS", "PB"}};
  AnnotationSet s;
  s.header = {set_id, c.debate_id(), "mock-rules", Provenance::Model, kStamp};
  for (std::size_t i = 0; i < c.unit_count(); ++i) {
    const Annotation& g = *gold.find(c.unit_at(i).unit_id);
    Annotation a{g.unit_id, g.primary_tag, {}, "mock-rules", Provenance::Model, std::nullopt, kStamp};
    if (i % 10 == 2 || i % 10 == 5 || i % 10 == 8) {
      a.primary_tag = confusable.at(g.primary_tag);
      // overlapping rhetorical strategies: keep gold's tag as a secondary on some
      if (i % 10 == 5) a.secondary_tags = {g.primary_tag};
      a.rationale = "context misread";
    }
    s.annotations[a.unit_id] = a;
  }
  return s;
}

const Pools kShared{
    {"S",
     {"Let me talk about the economy.", "I have a plan for working families.", "We will bring down prices.",
      "I will protect social security.", "We need to secure the border."}},
    {"AP", {"A true American stands with me.", "Proud Americans know where they stand."}},
    {"EXPL", {"Let me explain why I did that.", "Here’s why we made that choice."}},
    {"CORR", {"Let me correct that.", "Just to clarify, that’s inaccurate."}},
    {"INT", {"Let me finish!", "Excuse me, I wasn’t done."}},
    {"T_REQ", {"Can I respond to that?", "May I answer that, please?"}},
    {"SEEP", {"Why didn’t you act sooner?", "Can you explain that position?"}},
    {"ATTR", {"Trump left us chaos.", "Trump is responsible for the mess."}},
    {"CB", {"Everyone knows Biden's plan is a disaster.", "Common sense tells you this policy is wrong."}},
    {"CBIAS", {"They send criminals over here.", "Systemic inequality has long been ignored."}},
    {"REB", {"That’s just something they told her to say.", "You’re repeating talking points."}},
};

Pools with_shared(Pools own) {
  for (const auto& [k, v] : kShared) own.emplace(k, v);
  return own;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fixtures <fixtures-dir>\n";
    return 2;
  }
  fs::path root = argv[1];
  Store store(root / "store");
  auto registry = load_registry();

  Debate tb{
      "tb2024",
      "CNN",
      "CNN PRESIDENTIAL DEBATE",
      {"What will you do about inflation?", "How would you secure the southern border?",
       "What is your plan for health care?", "Why should voters trust you on foreign policy?",
       "How will you protect democracy?"},
      {"TRUMP",
       {{"SE", 43}, {"CH", 38}, {"AF", 32}, {"PB", 29}, {"PER", 21}, {"AEX", 17}, {"PD", 14}, {"S", 9},
        {"REB", 4}, {"CB", 3}, {"CBIAS", 2}, {"INT", 3}, {"T_REQ", 2}, {"CORR", 1}, {"EXPL", 2}},
       with_shared({{"SE",
                     {"We are a failing nation.", "They never talk about the failures.",
                      "Inflation has destroyed family budgets.", "Nobody mentions what happened in Afghanistan."}},
                    {"CH", {"That’s a lie.", "You know it’s a lie.", "That’s not true.", "Great job, Joe look where we are now."}},
                    {"AF",
                     {"Millions of criminals are crossing the border.", "We’re headed for destruction under Biden.",
                      "We are on the verge of a third world war."}},
                    {"PB", {"The other party is corrupt and incompetent.", "Their policies are wrecking this economy."}},
                    {"PER", {"He can’t even finish a sentence.", "He is the worst president we have ever had."}},
                    {"AEX", {"You said that, Joe.", "Everyone heard it.", "You can’t deny it now."}},
                    {"PD", {"This man destroyed America.", "This man has no idea what he is doing."}}})},
      {"BIDEN",
       {{"SE", 35}, {"CH", 31}, {"AF", 24}, {"PB", 22}, {"PER", 18}, {"AEX", 9}, {"PD", 10}, {"S", 14},
        {"ATTR", 4}, {"AP", 3}, {"EXPL", 4}, {"SEEP", 2}, {"CORR", 3}},
       with_shared({{"SE",
                     {"We are the most admired country in the world.",
                      "I never heard a president talk like this before.", "We created millions of new jobs."}},
                    {"CH", {"That’s simply not true.", "He is lying again.", "None of that is accurate."}},
                    {"AF", {"Our democracy is at stake.", "He will take away your freedoms."}},
                    {"PB", {"His party only cares about big donors.", "They want to cut your benefits."}},
                    {"PER", {"He has no sense of decency.", "He is a convicted felon."}},
                    {"AEX", {"You’re the one who said it.", "Tell the truth for once."}},
                    {"PD", {"This guy doesn’t know what he is talking about.", "He makes things up."}}})}};

  Debate th{
      "th2024",
      "ABC",
      "ABC NEWS PRESIDENTIAL DEBATE",
      {"What is your plan for the economy?", "How would you handle immigration?",
       "Where do you stand on abortion?", "How would you end the war in Ukraine?",
       "What would you do about energy prices?"},
      {"TRUMP",
       {{"SE", 40}, {"CH", 37}, {"AF", 34}, {"PB", 22}, {"AEX", 13}, {"PER", 12}, {"PD", 7}, {"S", 10},
        {"REB", 3}, {"INT", 4}, {"CBIAS", 2}, {"T_REQ", 3}, {"CORR", 2}, {"SEEP", 1}},
       with_shared({{"SE",
                     {"They destroyed our energy sector.", "They only talk about the good numbers.",
                      "Nobody mentions the price of groceries."}},
                    {"CH",
                     {"You have no idea what you’re talking about.", "That’s not true.", "That never happened."}},
                    {"AF",
                     {"They are destroying our country.", "Our cities are overrun with crime.",
                      "We are going to end up in a depression."}},
                    {"PB", {"Her party has wrecked the economy.", "They are radical left liberals."}},
                    {"AEX",
                     {"You keep talking but never answer the question.", "That’s your problem.",
                      "She’s lying again."}},
                    {"PER", {"She is a terrible vice president.", "She can’t do a simple interview."}},
                    {"PD", {"She doesn’t know what she’s doing.", "She has no plan at all."}}})},
      {"HARRIS",
       {{"SE", 33}, {"CH", 28}, {"AF", 28}, {"PB", 14}, {"AEX", 6}, {"PER", 7}, {"PD", 3}, {"S", 12},
        {"AP", 5}, {"ATTR", 4}, {"EXPL", 4}, {"SEEP", 3}, {"CORR", 2}, {"REB", 2}, {"CB", 2}},
       with_shared({{"SE",
                     {"I believe in the promise of America.", "They only highlight the good parts of his record.",
                      "We have an opportunity economy."}},
                    {"CH", {"That is simply not accurate.", "That’s not what the facts show."}},
                    {"AF", {"We can’t afford four more years of this chaos.", "He will sign a national abortion ban."}},
                    {"PB", {"Your party doesn’t understand working Americans.", "His project is extreme."}},
                    {"AEX", {"You keep interrupting and lying.", "Answer the question."}},
                    {"PER", {"He is weak and unfit to lead.", "He was fired by millions of people."}},
                    {"PD", {"He is not worth listening to tonight.", "He said nothing new."}}})}};

  fs::create_directories(root / "raw");
  std::map<std::string, AnnotationSet> gold;
  std::map<std::string, Corpus> corpora;
  for (const Debate* d : {&tb, &th}) {
    auto [raw, plan] = build_transcript(*d);
    // double-tagged excerpts: selective emphasis carrying an appeal to fear
    for (auto& p : plan)
      if (p.text == "We are a failing nation." || p.text == "They destroyed our energy sector.")
        p.secondary = {"AF"};
    text::write_file_atomic(root / "raw" / (d->id + ".txt"), raw);
    Corpus c = ingest_checked(d->id, d->source, raw, plan, store);
    std::string set_id = d->id == "tb2024" ? "gold_tb" : "gold_th";
    auto g = build_set(set_id, c, "expert", Provenance::Human, plan);
    store.save_set(g);
    auto mock = build_mock(d->id == "tb2024" ? "mock_tb" : "mock_th", g, c);
    store.save_set(mock);
    gold.emplace(d->id, std::move(g));
    corpora.emplace(d->id, std::move(c));
  }

  // context-effect rows: previous, target, next
  std::vector<Planned> t1{
      {"TRUMP", "Your healthcare plan is leaving millions uninsured.", "PB", {}},
      {"HARRIS", "Yes, but that is not entirely true.", "DIS", {}},
      {"HARRIS", "Let me explain why that claim is misleading.", "EXPL", {}},
      {"MODERATOR", "What specific steps did you take to strengthen the economy?", "OQ", {}},
      {"TRUMP", "We implemented tariffs to protect American jobs.", "ANS", {}},
      {"TRUMP", "These tariffs created new manufacturing opportunities.", "SE", {}},
      {"HARRIS", "We’ll fix immigration by investing more in surveillance.", "S", {}},
      {"TRUMP", "Can you explain how that’s going to work?", "AEX", {}},
      {"TRUMP", "That sounds good, but there’s no clarity on execution.", "CH", {}},
      {"TRUMP", "You opened the borders and let crime run rampant.", "AF", {}},
      {"HARRIS", "That’s not true.", "CH", {}},
      {"HARRIS", "You’re making that up just to scare people.", "REB", {}},
      {"TRUMP", "Your administration abandoned local businesses during the pandemic.", "PB", {}},
      {"HARRIS", "We’ve provided support for small businesses.", "REB", {}},
      {"HARRIS", "In fact, we issued thousands of recovery grants.", "SE", {}}};
  std::string raw1;
  for (std::size_t i = 0; i < t1.size(); ++i) {
    if (i > 0 && t1[i].speaker == t1[i - 1].speaker && i != 9)
      raw1.back() = ' ', raw1 += t1[i].text + "\n";
    else
      raw1 += t1[i].speaker + ": " + t1[i].text + "\n";
  }
  text::write_file_atomic(root / "raw" / "th_context.txt", raw1);
  Corpus c1 = ingest_checked("th_context", "ABC", raw1, t1, store);
  store.save_set(build_set("gold_context", c1, "expert", Provenance::Human, t1));

  nlohmann::json notes{{"SE", "T stresses failures, H stresses positive national messages"},
                       {"CH", "B challenges often but with less force"},
                       {"PB", "incumbency makes B the larger target"},
                       {"AEX", "T vs B is the more hostile exchange"},
                       {"AF", "fear appeals rise against H"},
                       {"PER", "B draws the harsher personal attacks"},
                       {"PD", "H meets less dismissiveness than B"}};
  text::write_file_atomic(root / "store" / "notes" / "tb2024_th2024.json", notes.dump(2) + "\n");

  for (const auto& [id, c] : corpora) {
    auto st = stats(c);
    std::cout << id << ": " << st.unit_count << " units, " << st.word_count << " words\n";
  }
  std::cout << "th_context: " << c1.unit_count() << " units\n";
  return 0;
}
