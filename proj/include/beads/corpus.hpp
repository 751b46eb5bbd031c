#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "beads/bundled.hpp"
#include "beads/error.hpp"
#include "beads/text.hpp"

namespace beads {

struct RawTranscript {
  std::string debate_id;
  std::string source_label;
  std::vector<std::string> lines;

  static RawTranscript from_text(std::string debate_id, std::string_view content,
                                 std::string source_label = {}) {
    if (debate_id.empty()) throw Error(ErrorKind::InvalidArgument, "debate_id must be non-empty");
    return {std::move(debate_id), std::move(source_label), text::split_lines(content)};
  }
};

// ---------------------------------------------------------------------------
// Cleaning

struct NoiseRule {
  std::string name;
  std::string pattern;
  std::regex re;
};

class NoiseRules {
 public:
  NoiseRules() = default;

  static NoiseRules from_json(const nlohmann::json& doc) {
    NoiseRules out;
    if (!doc.is_object() || !doc.contains("rules") || !doc["rules"].is_array())
      throw Error(ErrorKind::MalformedConfig, "noise rules document needs a 'rules' array");
    for (const auto& r : doc["rules"]) {
      if (!r.contains("name") || !r.contains("pattern"))
        throw Error(ErrorKind::MalformedConfig, "noise rule needs 'name' and 'pattern'");
      out.add(r["name"].get<std::string>(), r["pattern"].get<std::string>());
    }
    return out;
  }

  static const NoiseRules& bundled() {
    static const NoiseRules rules = from_json(nlohmann::json::parse(bundled::noise_rules_json));
    return rules;
  }

  void add(std::string name, std::string pattern) {
    try {
      std::regex re(pattern, std::regex::ECMAScript);
      rules_.push_back({std::move(name), std::move(pattern), std::move(re)});
    } catch (const std::regex_error& e) {
      throw Error(ErrorKind::MalformedConfig, "noise rule '" + name + "': " + e.what());
    }
  }

  /// Name of the first rule matching the whole line, or nullptr.
  const std::string* match(const std::string& line) const {
    for (const auto& r : rules_)
      if (std::regex_match(line, r.re)) return &r.name;
    return nullptr;
  }

  const std::vector<NoiseRule>& rules() const noexcept { return rules_; }

 private:
  std::vector<NoiseRule> rules_;
};

struct Removal {
  std::size_t line_no = 0;  // 1-based, relative to the input lines
  std::string rule;
  std::string text;

  friend bool operator==(const Removal&, const Removal&) = default;
};

struct CleanResult {
  std::vector<std::string> lines;
  std::vector<Removal> removed;

  friend bool operator==(const CleanResult&, const CleanResult&) = default;
};

inline CleanResult clean(std::span<const std::string> lines,
                         const NoiseRules& rules = NoiseRules::bundled()) {
  CleanResult out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (const std::string* rule = rules.match(lines[i]))
      out.removed.push_back({i + 1, *rule, lines[i]});
    else
      out.lines.push_back(lines[i]);
  }
  return out;
}

inline CleanResult clean(const RawTranscript& raw, const NoiseRules& rules = NoiseRules::bundled()) {
  return clean(std::span<const std::string>(raw.lines), rules);
}

inline std::string removal_log_jsonl(const std::vector<Removal>& removed) {
  std::string out;
  for (const auto& r : removed) {
    out += nlohmann::json{{"line_no", r.line_no}, {"rule", r.rule}, {"text", r.text}}.dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Turns and units

struct SpeechUnit {
  std::string unit_id;
  std::string text;
  std::size_t turn_id = 0;
  std::size_t seq = 0;

  friend bool operator==(const SpeechUnit&, const SpeechUnit&) = default;
};

struct Turn {
  std::size_t turn_id = 0;
  std::string speaker;
  std::vector<SpeechUnit> units;

  friend bool operator==(const Turn&, const Turn&) = default;
};

inline std::string make_unit_id(std::string_view debate_id, std::size_t seq) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%04zu", seq);
  return std::string(debate_id) + "#" + buf;
}

namespace detail {

// Uppercase name of at most four words, then a colon.
inline const std::regex& speaker_prefix_re() {
  static const std::regex re(R"(^\s*([A-Z][A-Z.'\-]*(?:[ \t]+[A-Z][A-Z.'\-]*){0,3})\s*:(.*)$)");
  return re;
}

}  // namespace detail

/// Groups cleaned lines into speaker turns. Each returned turn carries one
/// provisional unit holding the turn's joined text; `segment` splits it.
inline std::vector<Turn> parse_turns(std::span<const std::string> lines) {
  std::vector<Turn> turns;
  std::vector<std::string> pieces;
  bool open = false;
  std::string speaker;

  auto flush = [&] {
    if (!open) return;
    std::string joined = text::join(pieces, " ");
    if (!joined.empty()) {
      Turn t;
      t.turn_id = turns.size();
      t.speaker = speaker;
      t.units.push_back({"", std::move(joined), t.turn_id, t.turn_id});
      turns.push_back(std::move(t));
    }
    pieces.clear();
  };

  std::smatch m;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    std::string_view body = text::trim(line);
    if (body.empty()) continue;
    if (std::regex_match(line, m, detail::speaker_prefix_re())) {
      flush();
      open = true;
      speaker = text::squeeze(m[1].str());
      std::string_view rest = text::trim(std::string_view(line).substr(m.position(2)));
      if (!rest.empty()) pieces.emplace_back(text::squeeze(rest));
      continue;
    }
    if (!open)
      throw Error(ErrorKind::OrphanLine, "content before any speaker prefix: '" + std::string(body) + "'",
                  i + 1);
    pieces.emplace_back(text::squeeze(body));
  }
  flush();
  return turns;
}

/// Sentence-level splitter: breaks after . ! ? (plus any closing quotes)
/// when followed by whitespace and an uppercase letter or opening quote,
/// unless the word ending in '.' is a listed abbreviation.
class Segmenter {
 public:
  Segmenter() = default;
  explicit Segmenter(std::vector<std::string> abbreviations)
      : abbreviations_(abbreviations.begin(), abbreviations.end()) {}

  static const Segmenter& bundled() {
    static const Segmenter seg = [] {
      auto doc = nlohmann::json::parse(bundled::abbreviations_json);
      return Segmenter(doc.at("abbreviations").get<std::vector<std::string>>());
    }();
    return seg;
  }

  void add_abbreviation(std::string abbr) { abbreviations_.insert(std::move(abbr)); }

  std::vector<std::string> split(std::string_view s) const {
    std::vector<std::string> out;
    std::size_t start = 0;
    const std::size_t n = s.size();
    std::size_t i = 0;
    while (i < n) {
      char c = s[i];
      if (c != '.' && c != '!' && c != '?') {
        ++i;
        continue;
      }
      std::size_t j = i + 1;
      while (j < n && (s[j] == '.' || s[j] == '!' || s[j] == '?')) ++j;
      const bool single_period = c == '.' && j == i + 1;
      j = skip_closers(s, j);
      if (j >= n || !text::is_space(s[j])) {
        i = j;
        continue;
      }
      std::size_t k = j;
      while (k < n && text::is_space(s[k])) ++k;
      if (k >= n || !starts_sentence(s, k) || (single_period && is_abbreviation(s, start, i))) {
        i = j;
        continue;
      }
      push(out, s.substr(start, j - start));
      start = k;
      i = k;
    }
    if (start < n) push(out, s.substr(start));
    return out;
  }

 private:
  static bool has_utf8(std::string_view s, std::size_t i, std::string_view seq) {
    return s.substr(i, seq.size()) == seq;
  }

  static std::size_t skip_closers(std::string_view s, std::size_t j) {
    for (;;) {
      if (j < s.size() && (s[j] == '"' || s[j] == '\'' || s[j] == ')' || s[j] == ']')) {
        ++j;
      } else if (has_utf8(s, j, "\xE2\x80\x9D") || has_utf8(s, j, "\xE2\x80\x99")) {
        j += 3;
      } else {
        return j;
      }
    }
  }

  static bool starts_sentence(std::string_view s, std::size_t k) {
    char c = s[k];
    if (c >= 'A' && c <= 'Z') return true;
    if (c == '"' || c == '\'') return true;
    return has_utf8(s, k, "\xE2\x80\x9C") || has_utf8(s, k, "\xE2\x80\x98");
  }

  // The whitespace-delimited token ending at the period at `dot`.
  bool is_abbreviation(std::string_view s, std::size_t start, std::size_t dot) const {
    std::size_t b = dot;
    while (b > start && !text::is_space(s[b - 1])) --b;
    std::string_view token = s.substr(b, dot + 1 - b);
    while (!token.empty() && (token.front() == '"' || token.front() == '\'' || token.front() == '('))
      token.remove_prefix(1);
    return abbreviations_.count(std::string(token)) > 0;
  }

  static void push(std::vector<std::string>& out, std::string_view piece) {
    auto t = text::trim(piece);
    if (!t.empty()) out.emplace_back(t);
  }

  std::unordered_set<std::string> abbreviations_;
};

// ---------------------------------------------------------------------------
// Corpus

struct SpeakerStats {
  std::size_t word_count = 0;
  std::size_t unit_count = 0;

  friend bool operator==(const SpeakerStats&, const SpeakerStats&) = default;
};

struct CorpusStats {
  std::size_t word_count = 0;
  std::size_t sentence_count = 0;
  std::size_t unit_count = 0;
  std::map<std::string, SpeakerStats> per_speaker;

  friend bool operator==(const CorpusStats&, const CorpusStats&) = default;
};

/// A cleaned, speaker-attributed, segmented debate transcript. Construction
/// validates the unit invariants (unique ids, seq = 0..N-1 in order, non-empty
/// texts and turns) and builds the seq/id lookup tables.
class Corpus {
 public:
  struct UnitRef {
    std::size_t turn_index;
    std::size_t unit_index;
  };

  Corpus() = default;

  Corpus(std::string debate_id, std::string source_label, std::vector<Turn> turns,
         std::vector<std::string> moderators = {}, std::vector<std::string> speakers = {})
      : debate_id_(std::move(debate_id)),
        source_label_(std::move(source_label)),
        speakers_(std::move(speakers)),
        moderators_(std::move(moderators)),
        turns_(std::move(turns)) {
    build_index();
  }

  const std::string& debate_id() const noexcept { return debate_id_; }
  const std::string& source_label() const noexcept { return source_label_; }
  const std::vector<std::string>& speakers() const noexcept { return speakers_; }
  const std::vector<std::string>& moderators() const noexcept { return moderators_; }
  const std::vector<Turn>& turns() const noexcept { return turns_; }
  std::size_t unit_count() const noexcept { return order_.size(); }
  bool empty() const noexcept { return order_.empty(); }

  bool is_moderator(std::string_view speaker) const {
    return std::find(moderators_.begin(), moderators_.end(), speaker) != moderators_.end();
  }

  const SpeechUnit& unit_at(std::size_t seq) const {
    const auto& r = order_.at(seq);
    return turns_[r.turn_index].units[r.unit_index];
  }

  const std::string& speaker_at(std::size_t seq) const {
    return turns_[order_.at(seq).turn_index].speaker;
  }

  std::optional<std::size_t> seq_of(std::string_view unit_id) const {
    auto it = by_id_.find(std::string(unit_id));
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
  }

  bool contains(std::string_view unit_id) const { return seq_of(unit_id).has_value(); }

  friend bool operator==(const Corpus& a, const Corpus& b) {
    return a.debate_id_ == b.debate_id_ && a.source_label_ == b.source_label_ &&
           a.speakers_ == b.speakers_ && a.moderators_ == b.moderators_ && a.turns_ == b.turns_;
  }

 private:
  void build_index() {
    auto bad = [](const std::string& why) { return Error(ErrorKind::MalformedCorpusFile, why); };
    if (debate_id_.empty()) throw bad("debate_id must be non-empty");
    std::unordered_set<std::string> listed(speakers_.begin(), speakers_.end());
    const bool derive_speakers = speakers_.empty();
    for (std::size_t t = 0; t < turns_.size(); ++t) {
      const Turn& turn = turns_[t];
      if (turn.units.empty()) throw bad("turn " + std::to_string(turn.turn_id) + " has no units");
      if (derive_speakers) {
        if (listed.insert(turn.speaker).second) speakers_.push_back(turn.speaker);
      } else if (!listed.count(turn.speaker)) {
        throw bad("speaker '" + turn.speaker + "' not in speaker list");
      }
      for (std::size_t u = 0; u < turn.units.size(); ++u) {
        const SpeechUnit& unit = turn.units[u];
        if (unit.seq != order_.size())
          throw bad("unit " + unit.unit_id + " has seq " + std::to_string(unit.seq) + ", expected " +
                    std::to_string(order_.size()));
        if (text::trim(unit.text).empty()) throw bad("unit " + unit.unit_id + " has empty text");
        if (unit.turn_id != turn.turn_id) throw bad("unit " + unit.unit_id + " names the wrong turn");
        if (!by_id_.emplace(unit.unit_id, order_.size()).second)
          throw bad("duplicate unit_id " + unit.unit_id);
        order_.push_back({t, u});
      }
    }
  }

  std::string debate_id_;
  std::string source_label_;
  std::vector<std::string> speakers_;
  std::vector<std::string> moderators_;
  std::vector<Turn> turns_;
  std::vector<UnitRef> order_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

/// Splits each provisional turn into sentence units and assigns global seq
/// numbers and `<debate_id>#<seq>` ids.
inline Corpus segment(std::span<const Turn> turns, const std::string& debate_id,
                      std::string source_label = {}, const Segmenter& segmenter = Segmenter::bundled(),
                      std::vector<std::string> moderators = {}) {
  std::vector<Turn> out;
  std::size_t seq = 0;
  for (const Turn& provisional : turns) {
    Turn t;
    t.turn_id = out.size();
    t.speaker = provisional.speaker;
    std::vector<std::string> texts;
    for (const auto& u : provisional.units) texts.push_back(u.text);
    for (const auto& sentence : segmenter.split(text::join(texts, " "))) {
      t.units.push_back({make_unit_id(debate_id, seq), sentence, t.turn_id, seq});
      ++seq;
    }
    if (!t.units.empty()) out.push_back(std::move(t));
  }
  return Corpus(debate_id, std::move(source_label), std::move(out), std::move(moderators));
}

inline std::size_t word_count(std::string_view s) { return text::split_whitespace(s).size(); }

inline CorpusStats stats(const Corpus& corpus) {
  CorpusStats st;
  for (const auto& turn : corpus.turns()) {
    auto& sp = st.per_speaker[turn.speaker];
    for (const auto& unit : turn.units) {
      std::size_t words = word_count(unit.text);
      sp.word_count += words;
      sp.unit_count += 1;
      st.word_count += words;
      st.unit_count += 1;
    }
  }
  st.sentence_count = st.unit_count;
  return st;
}

/// Full ingest pipeline: clean, parse turns, segment.
struct IngestResult {
  Corpus corpus;
  std::vector<Removal> removed;
};

inline IngestResult ingest(const RawTranscript& raw, std::vector<std::string> moderators = {},
                           const NoiseRules& rules = NoiseRules::bundled(),
                           const Segmenter& segmenter = Segmenter::bundled()) {
  CleanResult cleaned = clean(raw, rules);
  auto turns = parse_turns(cleaned.lines);
  for (auto& m : moderators) m = text::to_upper(text::squeeze(m));
  return {segment(turns, raw.debate_id, raw.source_label, segmenter, std::move(moderators)),
          std::move(cleaned.removed)};
}

// ---------------------------------------------------------------------------
// Persistence

inline nlohmann::json to_json(const CorpusStats& st) {
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [speaker, s] : st.per_speaker)
    per[speaker] = {{"word_count", s.word_count}, {"unit_count", s.unit_count}};
  return {{"word_count", st.word_count},
          {"sentence_count", st.sentence_count},
          {"unit_count", st.unit_count},
          {"per_speaker", std::move(per)}};
}

inline nlohmann::json to_json(const Corpus& corpus) {
  nlohmann::json turns = nlohmann::json::array();
  for (const auto& t : corpus.turns()) {
    nlohmann::json units = nlohmann::json::array();
    for (const auto& u : t.units) units.push_back({{"unit_id", u.unit_id}, {"seq", u.seq}, {"text", u.text}});
    turns.push_back({{"turn_id", t.turn_id}, {"speaker", t.speaker}, {"units", std::move(units)}});
  }
  return {{"debate_id", corpus.debate_id()},
          {"source_label", corpus.source_label()},
          {"speakers", corpus.speakers()},
          {"moderators", corpus.moderators()},
          {"turns", std::move(turns)},
          {"stats", to_json(stats(corpus))}};
}

inline Corpus corpus_from_json(const nlohmann::json& doc) {
  auto bad = [](const std::string& why) { return Error(ErrorKind::MalformedCorpusFile, why); };
  try {
    if (!doc.is_object()) throw bad("corpus document is not an object");
    std::vector<Turn> turns;
    for (const auto& jt : doc.at("turns")) {
      Turn t;
      t.turn_id = jt.at("turn_id").get<std::size_t>();
      t.speaker = jt.at("speaker").get<std::string>();
      for (const auto& ju : jt.at("units"))
        t.units.push_back({ju.at("unit_id").get<std::string>(), ju.at("text").get<std::string>(), t.turn_id,
                           ju.at("seq").get<std::size_t>()});
      turns.push_back(std::move(t));
    }
    std::vector<std::string> moderators;
    if (doc.contains("moderators")) moderators = doc["moderators"].get<std::vector<std::string>>();
    return Corpus(doc.at("debate_id").get<std::string>(), doc.value("source_label", std::string{}),
                  std::move(turns), std::move(moderators), doc.at("speakers").get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw bad(e.what());
  }
}

inline void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  text::write_file_atomic(path, to_json(corpus).dump(2) + "\n");
}

inline Corpus load_corpus(const std::filesystem::path& path) {
  std::string content = text::read_file(path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(content);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t upto = std::min(content.size(), e.byte > 0 ? e.byte - 1 : 0);
    std::size_t line = 1 + static_cast<std::size_t>(std::count(content.begin(), content.begin() + upto, '\n'));
    throw Error(ErrorKind::MalformedCorpusFile, path.string() + ": " + e.what(), line);
  }
  return corpus_from_json(doc);
}

}  // namespace beads
