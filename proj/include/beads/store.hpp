#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "beads/annotation.hpp"
#include "beads/autotag.hpp"
#include "beads/corpus.hpp"
#include "beads/error.hpp"
#include "beads/schema.hpp"
#include "beads/text.hpp"

namespace beads {

/// On-disk layout shared by the CLI and the service:
///
///   <root>/corpora/<debate_id>.json            corpus
///   <root>/corpora/<debate_id>.removed.jsonl   cleaning removal log
///   <root>/sets/<set_id>.jsonl                 annotation set
///   <root>/sets/<set_id>.manifest.json         autotag run manifest
///   <root>/sets/<set_id>.failures.jsonl        autotag failure report
///   <root>/templates/<id>.json                 prompt templates ("default" is bundled)
///   <root>/registry.json                       optional registry overrides
///   <root>/mock_rules.json                     optional mock rule table
class Store {
 public:
  explicit Store(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const noexcept { return root_; }

  std::filesystem::path corpus_path(const std::string& debate_id) const {
    return root_ / "corpora" / (debate_id + ".json");
  }
  std::filesystem::path removal_log_path(const std::string& debate_id) const {
    return root_ / "corpora" / (debate_id + ".removed.jsonl");
  }
  std::filesystem::path set_path(const std::string& set_id) const { return root_ / "sets" / (set_id + ".jsonl"); }
  std::filesystem::path manifest_path(const std::string& set_id) const {
    return root_ / "sets" / (set_id + ".manifest.json");
  }
  std::filesystem::path failures_path(const std::string& set_id) const {
    return root_ / "sets" / (set_id + ".failures.jsonl");
  }

  /// Fails with StoreUnreadable unless the root is an existing directory.
  void require_readable() const {
    std::error_code ec;
    if (!std::filesystem::is_directory(root_, ec))
      throw Error(ErrorKind::StoreUnreadable, "store " + root_.string() + " is not a readable directory");
  }

  TagRegistry registry() const {
    auto override_file = root_ / "registry.json";
    if (std::filesystem::exists(override_file)) return load_registry_file(override_file);
    return load_registry();
  }

  RuleTable mock_rules(const TagRegistry& registry) const {
    auto file = root_ / "mock_rules.json";
    if (std::filesystem::exists(file)) return RuleTable::from_json(nlohmann::json::parse(text::read_file(file)), registry);
    return RuleTable::bundled(registry);
  }

  PromptTemplate prompt_template(const std::string& id) const {
    auto file = root_ / "templates" / (id + ".json");
    if (std::filesystem::exists(file)) {
      auto t = PromptTemplate::from_json(nlohmann::json::parse(text::read_file(file)));
      t.id = id;
      return t;
    }
    if (id == "default") return PromptTemplate::bundled();
    throw Error(ErrorKind::NotFound, "no prompt template '" + id + "'");
  }

  bool has_corpus(const std::string& debate_id) const { return std::filesystem::exists(corpus_path(debate_id)); }

  Corpus load_corpus(const std::string& debate_id) const {
    auto path = corpus_path(debate_id);
    if (!std::filesystem::exists(path)) throw Error(ErrorKind::NotFound, "no corpus '" + debate_id + "' in store");
    return beads::load_corpus(path);
  }

  void save_corpus(const Corpus& corpus, const std::vector<Removal>& removed) const {
    beads::save_corpus(corpus, corpus_path(corpus.debate_id()));
    text::write_file_atomic(removal_log_path(corpus.debate_id()), removal_log_jsonl(removed));
  }

  std::vector<std::string> corpus_ids() const {
    std::vector<std::string> ids;
    for (const auto& p : list_dir(root_ / "corpora")) {
      auto name = p.filename().string();
      if (name.size() > 5 && name.ends_with(".json") && !name.ends_with(".removed.json"))
        ids.push_back(name.substr(0, name.size() - 5));
    }
    std::sort(ids.begin(), ids.end());
    return ids;
  }

  /// Accepts a set id or a path to a .jsonl file.
  std::filesystem::path resolve_set(const std::string& set_ref) const {
    std::filesystem::path as_path(set_ref);
    if (as_path.extension() == ".jsonl" && std::filesystem::exists(as_path)) return as_path;
    return set_path(set_ref);
  }

  bool has_set(const std::string& set_ref) const { return std::filesystem::exists(resolve_set(set_ref)); }

  SetHeader set_header(const std::string& set_ref) const {
    auto path = resolve_set(set_ref);
    if (!std::filesystem::exists(path)) throw Error(ErrorKind::NotFound, "no annotation set '" + set_ref + "'");
    return read_set_header(path);
  }

  AnnotationSet load_set(const std::string& set_ref, const TagRegistry& registry) const {
    auto header = set_header(set_ref);
    return beads::load_set(resolve_set(set_ref), registry, load_corpus(header.debate_id));
  }

  AnnotationSet load_set(const std::string& set_ref, const TagRegistry& registry, const Corpus& corpus) const {
    auto path = resolve_set(set_ref);
    if (!std::filesystem::exists(path)) throw Error(ErrorKind::NotFound, "no annotation set '" + set_ref + "'");
    return beads::load_set(path, registry, corpus);
  }

  void save_set(const AnnotationSet& set) const { beads::save_set(set, set_path(set.header.set_id)); }

  std::vector<SetHeader> set_headers() const {
    std::vector<SetHeader> out;
    for (const auto& p : list_dir(root_ / "sets")) {
      if (p.extension() != ".jsonl" || p.filename().string().ends_with(".failures.jsonl")) continue;
      try {
        out.push_back(read_set_header(p));
      } catch (const Error&) {
        // unreadable sets are skipped in listings
      }
    }
    std::sort(out.begin(), out.end(), [](const SetHeader& a, const SetHeader& b) { return a.set_id < b.set_id; });
    return out;
  }

  /// Per-set exclusive lock serializing writers.
  std::timed_mutex& set_lock(const std::string& set_id) const {
    std::lock_guard guard(locks_mu_);
    auto& slot = locks_[set_id];
    if (!slot) slot = std::make_unique<std::timed_mutex>();
    return *slot;
  }

 private:
  static std::vector<std::filesystem::path> list_dir(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> out;
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) return out;
    for (const auto& entry : std::filesystem::directory_iterator(dir, ec))
      if (entry.is_regular_file()) out.push_back(entry.path());
    return out;
  }

  std::filesystem::path root_;
  mutable std::mutex locks_mu_;
  mutable std::map<std::string, std::unique_ptr<std::timed_mutex>> locks_;
};

}  // namespace beads
