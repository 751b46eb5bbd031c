#pragma once

#include <array>
#include <filesystem>
#include <optional>
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

enum class Layer { DamslCore, PoliticalExtension, Beads, Analysis };

enum class Category {
  IdeologicalFraming,
  EmotionalPersuasion,
  IdentityFraming,
  InteractiveDynamics,
  ClarificationTurnTaking,
  Structural,
};

inline constexpr std::array<Layer, 4> kAllLayers{Layer::DamslCore, Layer::PoliticalExtension,
                                                 Layer::Beads, Layer::Analysis};

inline constexpr std::string_view to_string(Layer layer) {
  switch (layer) {
    case Layer::DamslCore: return "DamslCore";
    case Layer::PoliticalExtension: return "PoliticalExtension";
    case Layer::Beads: return "Beads";
    case Layer::Analysis: return "Analysis";
  }
  return "";
}

inline constexpr std::string_view to_string(Category category) {
  switch (category) {
    case Category::IdeologicalFraming: return "IdeologicalFraming";
    case Category::EmotionalPersuasion: return "EmotionalPersuasion";
    case Category::IdentityFraming: return "IdentityFraming";
    case Category::InteractiveDynamics: return "InteractiveDynamics";
    case Category::ClarificationTurnTaking: return "ClarificationTurnTaking";
    case Category::Structural: return "Structural";
  }
  return "";
}

inline std::optional<Layer> parse_layer(std::string_view s) {
  for (Layer l : kAllLayers)
    if (to_string(l) == s) return l;
  return std::nullopt;
}

inline std::optional<Category> parse_category(std::string_view s) {
  for (int i = 0; i <= static_cast<int>(Category::Structural); ++i) {
    auto c = static_cast<Category>(i);
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

struct TagDef {
  std::string code;  // canonical form, e.g. "T_REQ"
  std::string name;
  Layer layer = Layer::Analysis;
  Category category = Category::Structural;
  std::string description;
  std::optional<std::string> generic_example;
  std::optional<std::string> display_code;  // e.g. "T REQ"; falls back to code

  const std::string& display() const { return display_code ? *display_code : code; }

  friend bool operator==(const TagDef&, const TagDef&) = default;
};

/// Trim, uppercase, and turn internal whitespace runs into a single '_'.
inline std::string canonical_code(std::string_view raw) {
  std::string squeezed = text::squeeze(raw);
  for (char& c : squeezed)
    if (c == ' ') c = '_';
  return text::to_upper(squeezed);
}

/// Uppercase alphanumerics with at most one internal '_' separator.
inline bool is_valid_code(std::string_view code) {
  if (code.empty()) return false;
  int separators = 0;
  for (std::size_t i = 0; i < code.size(); ++i) {
    char c = code[i];
    if (c == '_') {
      if (i == 0 || i + 1 == code.size() || ++separators > 1) return false;
    } else if (!((c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9'))) {
      return false;
    }
  }
  return true;
}

/// Immutable, ordered tag vocabulary. Construction enforces code validity and
/// uniqueness, so every instance satisfies the registry invariants.
class TagRegistry {
 public:
  TagRegistry() = default;

  TagRegistry(std::string version, std::vector<TagDef> tags)
      : version_(std::move(version)), tags_(std::move(tags)) {
    for (std::size_t i = 0; i < tags_.size(); ++i) {
      const auto& code = tags_[i].code;
      if (!is_valid_code(code))
        throw Error(ErrorKind::MalformedConfig, "invalid tag code '" + code + "'");
      if (!index_.emplace(code, i).second)
        throw Error(ErrorKind::DuplicateCode, "tag code '" + code + "' defined twice");
    }
  }

  const std::string& version() const noexcept { return version_; }
  const std::vector<TagDef>& tags() const noexcept { return tags_; }
  std::size_t size() const noexcept { return tags_.size(); }

  /// Lookup by canonical code; nullptr when unregistered.
  const TagDef* find(std::string_view canonical) const {
    auto it = index_.find(std::string(canonical));
    return it == index_.end() ? nullptr : &tags_[it->second];
  }

  /// Position of a tag in registry order (used for stable report ordering).
  std::optional<std::size_t> position(std::string_view canonical) const {
    auto it = index_.find(std::string(canonical));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  friend bool operator==(const TagRegistry& a, const TagRegistry& b) {
    return a.version_ == b.version_ && a.tags_ == b.tags_;
  }

 private:
  std::string version_;
  std::vector<TagDef> tags_;
  std::unordered_map<std::string, std::size_t> index_;
};

namespace detail {

inline std::string required_string(const nlohmann::json& rec, const char* key, std::size_t i) {
  auto it = rec.find(key);
  if (it == rec.end() || !it->is_string())
    throw Error(ErrorKind::MalformedConfig,
                "tag record " + std::to_string(i) + " lacks string field '" + key + "'");
  return it->get<std::string>();
}

inline TagDef parse_tag_record(const nlohmann::json& rec, std::size_t i) {
  if (!rec.is_object())
    throw Error(ErrorKind::MalformedConfig, "tag record " + std::to_string(i) + " is not an object");
  TagDef def;
  std::string raw_code = required_string(rec, "code", i);
  def.code = canonical_code(raw_code);
  if (!is_valid_code(def.code))
    throw Error(ErrorKind::MalformedConfig, "invalid tag code '" + raw_code + "'");
  def.name = required_string(rec, "name", i);
  def.description = required_string(rec, "description", i);
  auto layer = parse_layer(required_string(rec, "layer", i));
  if (!layer) throw Error(ErrorKind::MalformedConfig, "tag " + def.code + ": unknown layer");
  def.layer = *layer;
  auto category = parse_category(required_string(rec, "category", i));
  if (!category) throw Error(ErrorKind::MalformedConfig, "tag " + def.code + ": unknown category");
  def.category = *category;
  if (auto it = rec.find("generic_example"); it != rec.end() && it->is_string())
    def.generic_example = it->get<std::string>();
  if (auto it = rec.find("display_code"); it != rec.end() && it->is_string())
    def.display_code = it->get<std::string>();
  else if (text::squeeze(raw_code) != def.code)
    def.display_code = text::to_upper(text::squeeze(raw_code));
  return def;
}

struct RegistryDoc {
  std::optional<std::string> version;
  std::vector<TagDef> tags;
};

inline RegistryDoc parse_registry_doc(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("tags") || !doc["tags"].is_array())
    throw Error(ErrorKind::MalformedConfig, "registry document needs a 'tags' array");
  RegistryDoc out;
  if (auto it = doc.find("version"); it != doc.end() && it->is_string())
    out.version = it->get<std::string>();
  std::unordered_set<std::string> seen;
  const auto& tags = doc["tags"];
  for (std::size_t i = 0; i < tags.size(); ++i) {
    TagDef def = parse_tag_record(tags[i], i);
    if (!seen.insert(def.code).second)
      throw Error(ErrorKind::DuplicateCode, "tag code '" + def.code + "' defined twice");
    out.tags.push_back(std::move(def));
  }
  return out;
}

inline nlohmann::json parse_json_text(std::string_view source) {
  try {
    return nlohmann::json::parse(source);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::MalformedConfig, e.what());
  }
}

}  // namespace detail

/// The bundled default registry: DAMSL core, political extensions, the 15
/// BEADS tags and the analysis tags.
inline TagRegistry load_registry() {
  auto doc = detail::parse_registry_doc(detail::parse_json_text(bundled::registry_json));
  return TagRegistry(doc.version.value_or("1.0"), std::move(doc.tags));
}

/// Default registry merged with `overrides`: records whose code already
/// exists replace the default in place, new codes are appended.
inline TagRegistry load_registry(const nlohmann::json& overrides) {
  TagRegistry base = load_registry();
  auto doc = detail::parse_registry_doc(overrides);
  std::vector<TagDef> merged = base.tags();
  for (auto& def : doc.tags) {
    if (auto pos = base.position(def.code))
      merged[*pos] = std::move(def);
    else
      merged.push_back(std::move(def));
  }
  return TagRegistry(doc.version.value_or(base.version()), std::move(merged));
}

inline TagRegistry load_registry_text(std::string_view overrides) {
  return load_registry(detail::parse_json_text(overrides));
}

inline TagRegistry load_registry_file(const std::filesystem::path& path) {
  return load_registry_text(text::read_file(path));
}

inline const TagDef& resolve_tag(const TagRegistry& registry, std::string_view raw) {
  std::string code = canonical_code(raw);
  const TagDef* def = registry.find(code);
  if (!def) throw Error(ErrorKind::UnknownTag, "unknown tag '" + std::string(text::trim(raw)) + "'");
  return *def;
}

inline std::vector<TagDef> tags_in_layer(const TagRegistry& registry, Layer layer) {
  std::vector<TagDef> out;
  for (const auto& t : registry.tags())
    if (t.layer == layer) out.push_back(t);
  return out;
}

inline std::vector<TagDef> tags_in_layer(const TagRegistry& registry, std::string_view layer) {
  auto parsed = parse_layer(layer);
  if (!parsed) throw Error(ErrorKind::UnknownLayer, "unknown layer '" + std::string(layer) + "'");
  return tags_in_layer(registry, *parsed);
}

inline nlohmann::json to_json(const TagDef& t) {
  nlohmann::json j{{"code", t.code},
                   {"name", t.name},
                   {"layer", std::string(to_string(t.layer))},
                   {"category", std::string(to_string(t.category))},
                   {"description", t.description}};
  if (t.generic_example) j["generic_example"] = *t.generic_example;
  if (t.display_code) j["display_code"] = *t.display_code;
  return j;
}

inline nlohmann::json to_json(const TagRegistry& registry) {
  nlohmann::json tags = nlohmann::json::array();
  for (const auto& t : registry.tags()) tags.push_back(to_json(t));
  return {{"version", registry.version()}, {"tags", std::move(tags)}};
}

}  // namespace beads
