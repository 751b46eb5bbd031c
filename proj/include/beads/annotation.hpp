#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "beads/corpus.hpp"
#include "beads/error.hpp"
#include "beads/schema.hpp"
#include "beads/text.hpp"

namespace beads {

enum class Provenance { Human, Model };

inline constexpr std::string_view to_string(Provenance p) {
  return p == Provenance::Human ? "human" : "model";
}

inline std::optional<Provenance> parse_provenance(std::string_view s) {
  if (s == "human") return Provenance::Human;
  if (s == "model") return Provenance::Model;
  return std::nullopt;
}

struct Annotation {
  std::string unit_id;
  std::string primary_tag;
  std::vector<std::string> secondary_tags;
  std::string annotator_id;
  Provenance provenance = Provenance::Human;
  std::optional<std::string> rationale;
  std::string created_at;  // ISO-8601 UTC; metadata only

  /// All tags, primary first.
  std::vector<std::string> all_tags() const {
    std::vector<std::string> out{primary_tag};
    out.insert(out.end(), secondary_tags.begin(), secondary_tags.end());
    return out;
  }

  friend bool operator==(const Annotation& a, const Annotation& b) {
    return a.unit_id == b.unit_id && a.primary_tag == b.primary_tag &&
           a.secondary_tags == b.secondary_tags && a.annotator_id == b.annotator_id &&
           a.provenance == b.provenance && a.rationale == b.rationale;
  }
};

struct SetHeader {
  std::string set_id;
  std::string debate_id;
  std::string annotator_id;
  Provenance provenance = Provenance::Human;
  std::string created_at;

  friend bool operator==(const SetHeader& a, const SetHeader& b) {
    return a.set_id == b.set_id && a.debate_id == b.debate_id && a.annotator_id == b.annotator_id &&
           a.provenance == b.provenance;
  }
};

/// At most one annotation per unit; every annotation shares the set's
/// provenance. Keyed by unit_id.
struct AnnotationSet {
  SetHeader header;
  std::map<std::string, Annotation> annotations;

  std::size_t size() const noexcept { return annotations.size(); }
  bool empty() const noexcept { return annotations.empty(); }

  const Annotation* find(std::string_view unit_id) const {
    auto it = annotations.find(std::string(unit_id));
    return it == annotations.end() ? nullptr : &it->second;
  }

  friend bool operator==(const AnnotationSet&, const AnnotationSet&) = default;
};

inline AnnotationSet make_set(std::string set_id, std::string debate_id, std::string annotator_id,
                              Provenance provenance) {
  AnnotationSet s;
  s.header = {std::move(set_id), std::move(debate_id), std::move(annotator_id), provenance,
              text::utc_now_iso8601()};
  return s;
}

// ---------------------------------------------------------------------------
// Context windows

struct WindowUnit {
  std::string unit_id;
  std::size_t seq = 0;
  std::string speaker;
  std::string text;

  friend bool operator==(const WindowUnit&, const WindowUnit&) = default;
};

struct ContextWindow {
  WindowUnit target;
  std::vector<WindowUnit> before;  // corpus order, nearest last
  std::vector<WindowUnit> after;   // corpus order, nearest first
  std::size_t radius = 0;

  const WindowUnit* previous() const { return before.empty() ? nullptr : &before.back(); }
  const WindowUnit* next() const { return after.empty() ? nullptr : &after.front(); }

  friend bool operator==(const ContextWindow&, const ContextWindow&) = default;
};

inline WindowUnit window_unit(const Corpus& corpus, std::size_t seq) {
  const auto& u = corpus.unit_at(seq);
  return {u.unit_id, u.seq, corpus.speaker_at(seq), u.text};
}

inline ContextWindow context_window(const Corpus& corpus, std::string_view unit_id, std::size_t radius = 1) {
  auto seq = corpus.seq_of(unit_id);
  if (!seq) throw Error(ErrorKind::UnknownUnit, "unknown unit '" + std::string(unit_id) + "'");
  ContextWindow w;
  w.radius = radius;
  w.target = window_unit(corpus, *seq);
  std::size_t first = *seq >= radius ? *seq - radius : 0;
  std::size_t last = std::min(corpus.unit_count() - 1, *seq + radius);
  for (std::size_t s = first; s < *seq; ++s) w.before.push_back(window_unit(corpus, s));
  for (std::size_t s = *seq + 1; s <= last; ++s) w.after.push_back(window_unit(corpus, s));
  return w;
}

inline nlohmann::json to_json(const WindowUnit& u) {
  return {{"unit_id", u.unit_id}, {"seq", u.seq}, {"speaker", u.speaker}, {"text", u.text}};
}

inline nlohmann::json to_json(const ContextWindow& w) {
  nlohmann::json before = nlohmann::json::array(), after = nlohmann::json::array();
  for (const auto& u : w.before) before.push_back(to_json(u));
  for (const auto& u : w.after) after.push_back(to_json(u));
  return {{"radius", w.radius}, {"target", to_json(w.target)}, {"before", before}, {"after", after}};
}

// ---------------------------------------------------------------------------
// Mutation

/// Canonicalizes every code through the registry and enforces the tag
/// invariants: secondaries are deduplicated and never repeat the primary.
inline Annotation normalized(Annotation a, const TagRegistry& registry) {
  a.primary_tag = resolve_tag(registry, a.primary_tag).code;
  std::vector<std::string> secondaries;
  for (const auto& raw : a.secondary_tags) {
    std::string code = resolve_tag(registry, raw).code;
    if (code == a.primary_tag) continue;
    if (std::find(secondaries.begin(), secondaries.end(), code) != secondaries.end()) continue;
    secondaries.push_back(std::move(code));
  }
  a.secondary_tags = std::move(secondaries);
  if (a.rationale && a.rationale->empty()) a.rationale.reset();
  return a;
}

inline AnnotationSet upsert_annotation(AnnotationSet set, Annotation annotation, const TagRegistry& registry,
                                       const Corpus& corpus) {
  if (set.header.debate_id != corpus.debate_id())
    throw Error(ErrorKind::CrossDebate,
                "set " + set.header.set_id + " belongs to " + set.header.debate_id + ", not " + corpus.debate_id());
  if (annotation.provenance != set.header.provenance)
    throw Error(ErrorKind::ProvenanceMismatch, std::string("annotation provenance ") +
                                                   std::string(to_string(annotation.provenance)) + " in " +
                                                   std::string(to_string(set.header.provenance)) + " set");
  if (!corpus.contains(annotation.unit_id))
    throw Error(ErrorKind::UnknownUnit, "unknown unit '" + annotation.unit_id + "'");
  annotation = normalized(std::move(annotation), registry);
  if (annotation.annotator_id.empty()) annotation.annotator_id = set.header.annotator_id;
  if (annotation.created_at.empty()) annotation.created_at = text::utc_now_iso8601();
  std::string key = annotation.unit_id;
  set.annotations.insert_or_assign(std::move(key), std::move(annotation));
  return set;
}

struct Coverage {
  std::size_t annotated = 0;
  std::size_t total = 0;
  std::vector<std::string> missing;  // seq order

  friend bool operator==(const Coverage&, const Coverage&) = default;
};

inline Coverage coverage(const AnnotationSet& set, const Corpus& corpus) {
  Coverage c;
  c.total = corpus.unit_count();
  for (std::size_t seq = 0; seq < corpus.unit_count(); ++seq) {
    const auto& id = corpus.unit_at(seq).unit_id;
    if (set.find(id))
      ++c.annotated;
    else
      c.missing.push_back(id);
  }
  return c;
}

// ---------------------------------------------------------------------------
// JSON-lines persistence

inline nlohmann::json to_json(const SetHeader& h) {
  return {{"set_id", h.set_id},
          {"debate_id", h.debate_id},
          {"annotator_id", h.annotator_id},
          {"provenance", std::string(to_string(h.provenance))},
          {"created_at", h.created_at}};
}

inline nlohmann::json to_json(const Annotation& a) {
  nlohmann::json j{{"unit_id", a.unit_id},
                   {"primary_tag", a.primary_tag},
                   {"secondary_tags", a.secondary_tags},
                   {"created_at", a.created_at}};
  if (a.rationale) j["rationale"] = *a.rationale;
  return j;
}

inline std::string to_jsonl(const AnnotationSet& set) {
  std::string out = to_json(set.header).dump() + "\n";
  for (const auto& [_, a] : set.annotations) out += to_json(a).dump() + "\n";
  return out;
}

inline void save_set(const AnnotationSet& set, const std::filesystem::path& path) {
  text::write_file_atomic(path, to_jsonl(set));
}

namespace detail {

inline SetHeader parse_set_header(std::string_view line) {
  auto bad = [](const std::string& why) { return Error(ErrorKind::MalformedRecord, "header: " + why, 1); };
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw bad(e.what());
  }
  if (!j.is_object()) throw bad("not an object");
  SetHeader h;
  try {
    h.set_id = j.at("set_id").get<std::string>();
    h.debate_id = j.at("debate_id").get<std::string>();
    h.annotator_id = j.at("annotator_id").get<std::string>();
    auto p = parse_provenance(j.at("provenance").get<std::string>());
    if (!p) throw bad("provenance must be 'human' or 'model'");
    h.provenance = *p;
    h.created_at = j.value("created_at", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw bad(e.what());
  }
  if (h.set_id.empty()) throw bad("empty set_id");
  return h;
}

}  // namespace detail

/// Reads only the header record (line 1) of an annotation file.
inline SetHeader read_set_header(const std::filesystem::path& path) {
  std::string content = text::read_file(path);
  auto nl = content.find('\n');
  std::string_view first = std::string_view(content).substr(0, nl);
  if (text::trim(first).empty()) throw Error(ErrorKind::MalformedRecord, "missing header record", 1);
  return detail::parse_set_header(first);
}

inline AnnotationSet parse_set_jsonl(std::string_view content, const TagRegistry& registry, const Corpus& corpus) {
  auto lines = text::split_lines(content);
  if (lines.empty() || text::trim(lines[0]).empty())
    throw Error(ErrorKind::MalformedRecord, "missing header record", 1);
  AnnotationSet set;
  set.header = detail::parse_set_header(lines[0]);
  if (set.header.debate_id != corpus.debate_id())
    throw Error(ErrorKind::CrossDebate,
                "set " + set.header.set_id + " belongs to " + set.header.debate_id + ", not " + corpus.debate_id());

  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (text::trim(lines[i]).empty()) continue;
    auto bad = [line_no](const std::string& why) { return Error(ErrorKind::MalformedRecord, why, line_no); };
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(lines[i]);
    } catch (const nlohmann::json::parse_error& e) {
      throw bad(e.what());
    }
    Annotation a;
    try {
      a.unit_id = j.at("unit_id").get<std::string>();
      a.primary_tag = j.at("primary_tag").get<std::string>();
      if (j.contains("secondary_tags")) a.secondary_tags = j["secondary_tags"].get<std::vector<std::string>>();
      if (j.contains("rationale") && !j["rationale"].is_null()) a.rationale = j["rationale"].get<std::string>();
      a.created_at = j.value("created_at", std::string{});
    } catch (const nlohmann::json::exception& e) {
      throw bad(e.what());
    }
    if (!corpus.contains(a.unit_id)) throw bad("unknown unit '" + a.unit_id + "'");
    try {
      a = normalized(std::move(a), registry);
    } catch (const Error& e) {
      throw bad(e.detail());
    }
    a.annotator_id = set.header.annotator_id;
    a.provenance = set.header.provenance;
    std::string key = a.unit_id;
    if (!set.annotations.emplace(std::move(key), std::move(a)).second)
      throw bad("duplicate unit_id '" + j["unit_id"].get<std::string>() + "'");
  }
  return set;
}

inline AnnotationSet load_set(const std::filesystem::path& path, const TagRegistry& registry, const Corpus& corpus) {
  return parse_set_jsonl(text::read_file(path), registry, corpus);
}

}  // namespace beads
