#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <functional>
#include <mutex>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "beads/annotation.hpp"
#include "beads/bundled.hpp"
#include "beads/corpus.hpp"
#include "beads/error.hpp"
#include "beads/schema.hpp"
#include "beads/text.hpp"

namespace beads {

// ---------------------------------------------------------------------------
// Prompt construction

enum class GlossaryStyle { Full, CodesOnly };

struct PromptTemplate {
  std::string id = "default";
  std::string version;
  std::string system_preamble;
  GlossaryStyle tag_glossary_style = GlossaryStyle::Full;
  std::string reasoning_instruction;
  std::string output_grammar;

  static PromptTemplate from_json(const nlohmann::json& j) {
    try {
      PromptTemplate t;
      t.id = j.value("id", std::string("default"));
      t.version = j.at("version").get<std::string>();
      t.system_preamble = j.at("system_preamble").get<std::string>();
      auto style = j.value("tag_glossary_style", std::string("full"));
      if (style == "full")
        t.tag_glossary_style = GlossaryStyle::Full;
      else if (style == "codes_only")
        t.tag_glossary_style = GlossaryStyle::CodesOnly;
      else
        throw Error(ErrorKind::MalformedConfig, "unknown tag_glossary_style '" + style + "'");
      t.reasoning_instruction = j.at("reasoning_instruction").get<std::string>();
      t.output_grammar = j.at("output_grammar").get<std::string>();
      return t;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::MalformedConfig, std::string("prompt template: ") + e.what());
    }
  }

  static const PromptTemplate& bundled() {
    static const PromptTemplate t = from_json(nlohmann::json::parse(bundled::prompt_template_json));
    return t;
  }
};

inline std::string build_prompt(const PromptTemplate& tmpl, const TagRegistry& registry,
                                const ContextWindow& window) {
  std::ostringstream out;
  out << tmpl.system_preamble << "\n\n";
  out << "Tag set:\n";
  if (tmpl.tag_glossary_style == GlossaryStyle::Full) {
    for (const auto& t : registry.tags()) {
      out << "- " << t.code << " (" << t.name << "): " << t.description;
      if (t.generic_example) out << " e.g. \"" << *t.generic_example << "\"";
      out << "\n";
    }
  } else {
    std::vector<std::string> codes;
    for (const auto& t : registry.tags()) codes.push_back(t.code);
    out << text::join(codes, ", ") << "\n";
  }
  out << "\nDialogue:\n";
  for (const auto& u : window.before) out << "Previous [" << u.speaker << "]: " << u.text << "\n";
  out << "Target [" << window.target.speaker << "]: " << window.target.text << "\n";
  for (const auto& u : window.after) out << "Next [" << u.speaker << "]: " << u.text << "\n";
  out << "\n" << tmpl.reasoning_instruction << "\n\n" << tmpl.output_grammar << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Verdicts

struct TaggerVerdict {
  std::string unit_id;
  std::string primary_tag;
  std::vector<std::string> secondary_tags;
  std::string rationale;
  std::string raw_response;

  friend bool operator==(const TaggerVerdict&, const TaggerVerdict&) = default;
};

/// Renders a verdict in the output grammar understood by `parse_verdict`.
inline std::string render_verdict(const TaggerVerdict& v) {
  std::string out;
  if (!v.rationale.empty()) out += "REASON: " + text::squeeze(v.rationale) + "\n";
  std::vector<std::string> codes{v.primary_tag};
  codes.insert(codes.end(), v.secondary_tags.begin(), v.secondary_tags.end());
  out += "TAG: " + text::join(codes, ", ") + "\n";
  return out;
}

namespace detail {

inline const std::regex& tag_line_re() {
  static const std::regex re(R"(^\s*\**\s*TAGS?\s*\**\s*:\s*\**\s*(.*?)\s*\**\s*$)", std::regex::icase);
  return re;
}

inline const std::regex& reason_line_re() {
  static const std::regex re(R"(^\s*\**\s*REASON\s*\**\s*:\s*(.*?)\s*$)", std::regex::icase);
  return re;
}

}  // namespace detail

/// Grammar-first: the last `TAG: A[, B...]` line wins, first code is the
/// primary. Fallback: uppercase tokens on the last non-empty line that are
/// registered codes.
inline TaggerVerdict parse_verdict(std::string_view raw_response, const TagRegistry& registry,
                                   std::string unit_id = {}) {
  TaggerVerdict v;
  v.unit_id = std::move(unit_id);
  v.raw_response = std::string(raw_response);
  auto lines = text::split_lines(raw_response);

  std::optional<std::string> tag_payload;
  std::smatch m;
  for (const auto& line : lines) {
    if (std::regex_match(line, m, detail::tag_line_re()))
      tag_payload = m[1].str();
    else if (std::regex_match(line, m, detail::reason_line_re()))
      v.rationale = m[1].str();
  }

  std::vector<std::string> codes;
  if (tag_payload) {
    for (const auto& piece : text::split(*tag_payload, ',')) {
      auto token = text::trim(piece);
      if (token.empty()) continue;
      codes.push_back(resolve_tag(registry, token).code);
    }
  } else {
    auto last = std::find_if(lines.rbegin(), lines.rend(),
                             [](const std::string& l) { return !text::trim(l).empty(); });
    if (last != lines.rend()) {
      for (auto token : text::split_whitespace(*last)) {
        auto b = token.find_first_not_of("\"'*(.,;:!?)");
        auto e = token.find_last_not_of("\"'*(.,;:!?)");
        if (b == std::string::npos) continue;
        token = token.substr(b, e - b + 1);
        if (token != text::to_upper(token)) continue;
        if (const TagDef* def = registry.find(canonical_code(token))) codes.push_back(def->code);
      }
    }
  }
  if (codes.empty()) throw Error(ErrorKind::NoTagLine, "response has no TAG line");

  v.primary_tag = codes.front();
  for (std::size_t i = 1; i < codes.size(); ++i)
    if (codes[i] != v.primary_tag &&
        std::find(v.secondary_tags.begin(), v.secondary_tags.end(), codes[i]) == v.secondary_tags.end())
      v.secondary_tags.push_back(codes[i]);
  return v;
}

// ---------------------------------------------------------------------------
// Offline rule-based tagger

struct TagRule {
  std::string name;
  std::string target_pattern;    // empty: no constraint
  std::string previous_pattern;  // empty: no constraint; otherwise a previous unit must exist
  std::string tag;
  std::optional<std::regex> target_re;
  std::optional<std::regex> previous_re;
};

class RuleTable {
 public:
  static RuleTable from_json(const nlohmann::json& doc, const TagRegistry& registry) {
    RuleTable t;
    try {
      t.default_tag_ = resolve_tag(registry, doc.at("default_tag").get<std::string>()).code;
      for (const auto& r : doc.at("rules")) {
        TagRule rule;
        rule.name = r.at("name").get<std::string>();
        rule.tag = resolve_tag(registry, r.at("tag").get<std::string>()).code;
        rule.target_pattern = r.value("target", std::string{});
        rule.previous_pattern = r.value("previous", std::string{});
        auto flags = std::regex::ECMAScript | std::regex::icase;
        if (!rule.target_pattern.empty()) rule.target_re.emplace(rule.target_pattern, flags);
        if (!rule.previous_pattern.empty()) rule.previous_re.emplace(rule.previous_pattern, flags);
        t.rules_.push_back(std::move(rule));
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::MalformedConfig, std::string("rule table: ") + e.what());
    } catch (const std::regex_error& e) {
      throw Error(ErrorKind::MalformedConfig, std::string("rule table: ") + e.what());
    }
    return t;
  }

  static RuleTable bundled(const TagRegistry& registry) {
    return from_json(nlohmann::json::parse(bundled::mock_rules_json), registry);
  }

  const std::vector<TagRule>& rules() const noexcept { return rules_; }
  const std::string& default_tag() const noexcept { return default_tag_; }

 private:
  std::vector<TagRule> rules_;
  std::string default_tag_;
};

/// First matching rule wins; `default_tag` otherwise. Only the nearest
/// previous unit of the window is consulted.
inline TaggerVerdict mock_tag(const RuleTable& rules, const ContextWindow& window) {
  const WindowUnit* prev = window.previous();
  for (const auto& rule : rules.rules()) {
    if (rule.target_re && !std::regex_search(window.target.text, *rule.target_re)) continue;
    if (rule.previous_re && (!prev || !std::regex_search(prev->text, *rule.previous_re))) continue;
    TaggerVerdict v{window.target.unit_id, rule.tag, {}, "matched rule '" + rule.name + "'", {}};
    v.raw_response = render_verdict(v);
    return v;
  }
  TaggerVerdict v{window.target.unit_id, rules.default_tag(), {}, "no rule matched; default tag", {}};
  v.raw_response = render_verdict(v);
  return v;
}

// ---------------------------------------------------------------------------
// Endpoint abstraction and corpus runs

/// Transport-level failure worth retrying (connection refused, timeout,
/// 429/5xx).
class TransientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TagRequest {
  std::string prompt;
  const ContextWindow* window = nullptr;
};

/// Send text, receive text. Implementations must be callable concurrently.
class TaggingClient {
 public:
  virtual ~TaggingClient() = default;
  virtual std::string complete(const TagRequest& request) = 0;
  virtual std::string model_name() const = 0;
};

/// Answers from a rule table in the output grammar; never touches the network.
class MockClient : public TaggingClient {
 public:
  explicit MockClient(RuleTable rules) : rules_(std::move(rules)) {}

  std::string complete(const TagRequest& request) override {
    if (!request.window) throw Error(ErrorKind::InvalidArgument, "mock client needs the context window");
    return mock_tag(rules_, *request.window).raw_response;
  }

  std::string model_name() const override { return "mock-rules"; }

 private:
  RuleTable rules_;
};

struct RunConfig {
  std::size_t radius = 1;
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{500};
  std::size_t max_concurrent = 4;
};

struct UnitFailure {
  std::string unit_id;
  std::string error_kind;
  std::string detail;

  friend bool operator==(const UnitFailure&, const UnitFailure&) = default;
};

struct AutotagRun {
  AnnotationSet set;
  std::vector<UnitFailure> failures;  // seq order
  bool aborted = false;               // EndpointUnreachable after retries
  std::string started_at;
  std::string finished_at;
};

inline std::string failures_jsonl(const std::vector<UnitFailure>& failures) {
  std::string out;
  for (const auto& f : failures)
    out += nlohmann::json{{"unit_id", f.unit_id}, {"error_kind", f.error_kind}, {"detail", f.detail}}.dump() + "\n";
  return out;
}

/// Tags every unit of `corpus` through `client`. Transient failures are
/// retried with exponential backoff; a unit that still fails aborts the run
/// (remaining units are not sent) and is recorded with EndpointUnreachable.
/// Unparseable responses are recorded per unit and do not abort.
inline AutotagRun autotag_corpus(TaggingClient& client, const PromptTemplate& tmpl, const TagRegistry& registry,
                                 const Corpus& corpus, const RunConfig& config, const std::string& set_id,
                                 const std::string& annotator_id,
                                 const std::function<void(std::size_t done, std::size_t total)>& progress = {}) {
  AutotagRun run;
  run.started_at = text::utc_now_iso8601();
  run.set = make_set(set_id, corpus.debate_id(), annotator_id, Provenance::Model);

  const std::size_t total = corpus.unit_count();
  std::vector<std::optional<TaggerVerdict>> verdicts(total);
  std::vector<std::optional<UnitFailure>> failures(total);
  std::atomic<std::size_t> next{0}, done{0};
  std::atomic<bool> abort{false};
  std::mutex progress_mu;

  auto work = [&] {
    for (;;) {
      if (abort.load()) return;
      std::size_t seq = next.fetch_add(1);
      if (seq >= total) return;
      const auto& unit = corpus.unit_at(seq);
      ContextWindow window = context_window(corpus, unit.unit_id, config.radius);
      TagRequest req{build_prompt(tmpl, registry, window), &window};

      std::optional<std::string> response;
      std::optional<UnitFailure> rejected;
      std::string last_error;
      auto backoff = config.initial_backoff;
      for (int attempt = 0; attempt <= config.max_retries && !response && !rejected; ++attempt) {
        if (attempt > 0) {
          std::this_thread::sleep_for(backoff);
          backoff *= 2;
        }
        try {
          response = client.complete(req);
        } catch (const TransientError& e) {
          last_error = e.what();
        } catch (const Error& e) {
          rejected = UnitFailure{unit.unit_id, std::string(to_string(e.kind())), e.detail()};
        } catch (const std::exception& e) {
          rejected = UnitFailure{unit.unit_id, "InvalidResponse", e.what()};
        }
      }
      if (rejected) {
        failures[seq] = std::move(rejected);
      } else if (!response) {
        failures[seq] = UnitFailure{unit.unit_id, "EndpointUnreachable",
                                    "gave up after " + std::to_string(config.max_retries + 1) +
                                        " attempts: " + last_error};
        abort.store(true);
        return;
      } else {
        try {
          verdicts[seq] = parse_verdict(*response, registry, unit.unit_id);
        } catch (const Error& e) {
          failures[seq] = UnitFailure{unit.unit_id, std::string(to_string(e.kind())), e.detail()};
        }
      }
      std::size_t d = ++done;
      if (progress) {
        std::lock_guard lock(progress_mu);
        progress(d, total);
      }
    }
  };

  std::size_t workers = std::max<std::size_t>(1, std::min(config.max_concurrent, total));
  {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i + 1 < workers; ++i) pool.emplace_back(work);
    work();
  }

  for (std::size_t seq = 0; seq < total; ++seq) {
    if (failures[seq]) run.failures.push_back(*failures[seq]);
    if (!verdicts[seq]) continue;
    const auto& v = *verdicts[seq];
    Annotation a;
    a.unit_id = v.unit_id;
    a.primary_tag = v.primary_tag;
    a.secondary_tags = v.secondary_tags;
    a.annotator_id = annotator_id;
    a.provenance = Provenance::Model;
    if (!v.rationale.empty()) a.rationale = v.rationale;
    run.set = upsert_annotation(std::move(run.set), std::move(a), registry, corpus);
  }
  run.aborted = abort.load();
  run.finished_at = text::utc_now_iso8601();
  return run;
}

inline nlohmann::json run_manifest(const AutotagRun& run, const PromptTemplate& tmpl, const RunConfig& config,
                                   const std::string& model, std::size_t units_total) {
  return {{"set_id", run.set.header.set_id},
          {"debate_id", run.set.header.debate_id},
          {"annotator_id", run.set.header.annotator_id},
          {"template_id", tmpl.id},
          {"template_version", tmpl.version},
          {"radius", config.radius},
          {"model", model},
          {"max_retries", config.max_retries},
          {"max_concurrent", config.max_concurrent},
          {"started_at", run.started_at},
          {"finished_at", run.finished_at},
          {"units_total", units_total},
          {"units_tagged", run.set.size()},
          {"failures", run.failures.size()},
          {"aborted", run.aborted}};
}

}  // namespace beads
