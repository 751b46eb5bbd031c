#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "beads/annotation.hpp"
#include "beads/corpus.hpp"
#include "beads/error.hpp"
#include "beads/schema.hpp"
#include "beads/text.hpp"

namespace beads {

enum class CountMode { PrimaryOnly, IncludeSecondary };

inline constexpr std::string_view to_string(CountMode m) {
  return m == CountMode::PrimaryOnly ? "primary_only" : "include_secondary";
}

inline std::optional<CountMode> parse_count_mode(std::string_view s) {
  if (s == "primary_only") return CountMode::PrimaryOnly;
  if (s == "include_secondary") return CountMode::IncludeSecondary;
  return std::nullopt;
}

struct FrequencyTable {
  std::string debate_id;
  CountMode mode = CountMode::PrimaryOnly;
  std::vector<std::string> speakers;  // corpus first-appearance order
  std::map<std::pair<std::string, std::string>, std::size_t> counts;  // (tag, speaker)
  std::map<std::string, std::size_t> total_units_by_speaker;
  std::map<std::string, std::size_t> annotated_units_by_speaker;

  std::size_t count(std::string_view tag, std::string_view speaker) const {
    auto it = counts.find({std::string(tag), std::string(speaker)});
    return it == counts.end() ? 0 : it->second;
  }

  bool has_speaker(std::string_view speaker) const {
    return std::find(speakers.begin(), speakers.end(), speaker) != speakers.end();
  }

  friend bool operator==(const FrequencyTable&, const FrequencyTable&) = default;
};

/// Per-(tag, speaker) counts; the speaker of an annotation is the speaker of
/// its unit's turn. Moderators listed on the corpus are skipped unless
/// `include_moderators`.
inline FrequencyTable tag_frequencies(const AnnotationSet& set, const Corpus& corpus,
                                      CountMode mode = CountMode::PrimaryOnly, bool include_moderators = false) {
  if (set.header.debate_id != corpus.debate_id())
    throw Error(ErrorKind::CrossDebate, "set " + set.header.set_id + " is not over " + corpus.debate_id());
  FrequencyTable t;
  t.debate_id = corpus.debate_id();
  t.mode = mode;
  auto counted = [&](const std::string& s) { return include_moderators || !corpus.is_moderator(s); };
  for (const auto& s : corpus.speakers()) {
    if (!counted(s)) continue;
    t.speakers.push_back(s);
    t.total_units_by_speaker[s] = 0;
    t.annotated_units_by_speaker[s] = 0;
  }
  for (std::size_t seq = 0; seq < corpus.unit_count(); ++seq) {
    const std::string& speaker = corpus.speaker_at(seq);
    if (!counted(speaker)) continue;
    ++t.total_units_by_speaker[speaker];
    const Annotation* a = set.find(corpus.unit_at(seq).unit_id);
    if (!a) continue;
    ++t.annotated_units_by_speaker[speaker];
    ++t.counts[{a->primary_tag, speaker}];
    if (mode == CountMode::IncludeSecondary)
      for (const auto& tag : a->secondary_tags) ++t.counts[{tag, speaker}];
  }
  return t;
}

struct TagCount {
  std::string code;
  std::size_t count = 0;

  friend bool operator==(const TagCount&, const TagCount&) = default;
};

/// Tags from the BEADS and Analysis layers outside the Structural category.
inline std::vector<std::string> default_bias_tags(const TagRegistry& registry) {
  std::vector<std::string> out;
  for (const auto& t : registry.tags())
    if ((t.layer == Layer::Beads || t.layer == Layer::Analysis) && t.category != Category::Structural)
      out.push_back(t.code);
  return out;
}

/// Descending by count, ties by code ascending; zero counts are omitted.
inline std::vector<TagCount> top_k_categories(const FrequencyTable& table, std::string_view speaker, std::size_t k,
                                              const std::vector<std::string>& eligible) {
  if (!table.has_speaker(speaker))
    throw Error(ErrorKind::UnknownSpeaker, "speaker '" + std::string(speaker) + "' not in " + table.debate_id);
  if (k == 0) throw Error(ErrorKind::InvalidArgument, "k must be at least 1");
  if (eligible.empty()) throw Error(ErrorKind::InvalidArgument, "eligible tag list is empty");
  std::vector<TagCount> all;
  for (const auto& code : eligible) {
    if (std::any_of(all.begin(), all.end(), [&](const TagCount& c) { return c.code == code; })) continue;
    if (auto n = table.count(code, speaker); n > 0) all.push_back({code, n});
  }
  std::sort(all.begin(), all.end(), [](const TagCount& a, const TagCount& b) {
    return a.count != b.count ? a.count > b.count : a.code < b.code;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

// ---------------------------------------------------------------------------
// Cross-debate comparison

struct DebateSide {
  std::string debate_id;
  std::vector<std::string> speakers;
};

struct ComparisonRow {
  std::string tag;
  std::vector<std::size_t> first;   // per speaker of debates.first
  std::vector<std::size_t> second;  // per speaker of debates.second
  std::string note;

  friend bool operator==(const ComparisonRow&, const ComparisonRow&) = default;
};

struct DebateComparison {
  DebateSide first;
  DebateSide second;
  CountMode mode = CountMode::PrimaryOnly;
  std::vector<ComparisonRow> rows;
};

/// One row per requested tag with both debates' per-speaker
/// counts. `notes` maps tag code to the human-authored key-difference text.
inline DebateComparison compare_debates(const FrequencyTable& t1, const FrequencyTable& t2,
                                        const std::vector<std::string>& tags, const TagRegistry& registry,
                                        const std::map<std::string, std::string>& notes = {}) {
  if (t1.debate_id == t2.debate_id)
    throw Error(ErrorKind::SameDebate, "both tables are for debate " + t1.debate_id);
  DebateComparison cmp;
  cmp.first = {t1.debate_id, t1.speakers};
  cmp.second = {t2.debate_id, t2.speakers};
  cmp.mode = t1.mode;
  std::map<std::string, std::string> canonical_notes;
  for (const auto& [tag, note] : notes) canonical_notes[resolve_tag(registry, tag).code] = note;
  for (const auto& raw : tags) {
    ComparisonRow row;
    row.tag = resolve_tag(registry, raw).code;
    for (const auto& s : t1.speakers) row.first.push_back(t1.count(row.tag, s));
    for (const auto& s : t2.speakers) row.second.push_back(t2.count(row.tag, s));
    if (auto it = canonical_notes.find(row.tag); it != canonical_notes.end()) row.note = it->second;
    cmp.rows.push_back(std::move(row));
  }
  return cmp;
}

namespace detail {

inline std::string speaker_initial(const std::string& speaker) {
  auto words = text::split_whitespace(speaker);
  return words.empty() ? "?" : words.back().substr(0, 1);
}

inline std::string md_cell(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out;
}

}  // namespace detail

inline std::string render_metrics_csv(const DebateComparison& cmp) {
  std::vector<std::string> header{"tag"};
  for (const auto& s : cmp.first.speakers) header.push_back(text::csv_field(cmp.first.debate_id + ":" + s));
  for (const auto& s : cmp.second.speakers) header.push_back(text::csv_field(cmp.second.debate_id + ":" + s));
  header.emplace_back("note");
  std::string out = text::join(header, ",") + "\n";
  for (const auto& row : cmp.rows) {
    std::vector<std::string> cells{text::csv_field(row.tag)};
    for (auto c : row.first) cells.push_back(std::to_string(c));
    for (auto c : row.second) cells.push_back(std::to_string(c));
    cells.push_back(text::csv_field(row.note));
    out += text::join(cells, ",") + "\n";
  }
  return out;
}

inline std::string render_metrics_md(const DebateComparison& cmp, const TagRegistry& registry) {
  auto side = [](const std::vector<std::size_t>& counts, const std::vector<std::string>& speakers) {
    std::vector<std::string> parts;
    for (std::size_t i = 0; i < counts.size(); ++i)
      parts.push_back(std::to_string(counts[i]) + " (" + detail::speaker_initial(speakers[i]) + ")");
    return text::join(parts, ", ");
  };
  auto roster = [](const DebateSide& d) {
    std::vector<std::string> parts;
    for (const auto& s : d.speakers) parts.push_back(detail::speaker_initial(s) + " = " + s);
    return d.debate_id + " (" + text::join(parts, ", ") + ")";
  };
  std::ostringstream out;
  out << "counting mode: " << to_string(cmp.mode) << "\n";
  out << "speakers: " << roster(cmp.first) << "; " << roster(cmp.second) << "\n\n";
  out << "| Category | " << cmp.first.debate_id << " | " << cmp.second.debate_id << " | Key Difference |\n";
  out << "|---|---|---|---|\n";
  for (const auto& row : cmp.rows) {
    const TagDef* def = registry.find(row.tag);
    std::string label = def ? def->name + " (" + def->display() + ")" : row.tag;
    out << "| " << detail::md_cell(label) << " | " << side(row.first, cmp.first.speakers) << " | "
        << side(row.second, cmp.second.speakers) << " | " << detail::md_cell(row.note) << " |\n";
  }
  return out.str();
}

inline std::string render_metrics(const DebateComparison& cmp, std::string_view format, const TagRegistry& registry) {
  if (format == "csv") return render_metrics_csv(cmp);
  if (format == "md") return render_metrics_md(cmp, registry);
  throw Error(ErrorKind::UnknownFormat, "unknown format '" + std::string(format) + "' (md, csv)");
}

inline nlohmann::json to_json(const FrequencyTable& t) {
  nlohmann::json counts = nlohmann::json::array();
  for (const auto& [key, n] : t.counts) counts.push_back({{"tag", key.first}, {"speaker", key.second}, {"count", n}});
  return {{"debate_id", t.debate_id},
          {"mode", std::string(to_string(t.mode))},
          {"speakers", t.speakers},
          {"counts", std::move(counts)},
          {"total_units_by_speaker", t.total_units_by_speaker},
          {"annotated_units_by_speaker", t.annotated_units_by_speaker}};
}

}  // namespace beads
