#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "beads/annotation.hpp"
#include "beads/corpus.hpp"
#include "beads/error.hpp"
#include "beads/text.hpp"

namespace beads {

/// Rows are the gold primary tag, columns the other set's primary tag.
struct ConfusionMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<std::size_t>> counts;

  static ConfusionMatrix from_pairs(const std::vector<std::pair<std::string, std::string>>& pairs) {
    std::set<std::string> seen;
    for (const auto& [g, o] : pairs) {
      seen.insert(g);
      seen.insert(o);
    }
    ConfusionMatrix m;
    m.labels.assign(seen.begin(), seen.end());
    m.counts.assign(m.labels.size(), std::vector<std::size_t>(m.labels.size(), 0));
    for (const auto& [g, o] : pairs) ++m.counts[*m.index_of(g)][*m.index_of(o)];
    return m;
  }

  std::optional<std::size_t> index_of(std::string_view label) const {
    auto it = std::lower_bound(labels.begin(), labels.end(), label);
    if (it == labels.end() || *it != label) return std::nullopt;
    return static_cast<std::size_t>(it - labels.begin());
  }

  std::size_t total() const {
    std::size_t t = 0;
    for (const auto& row : counts)
      for (auto c : row) t += c;
    return t;
  }

  std::size_t diagonal() const {
    std::size_t d = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) d += counts[i][i];
    return d;
  }

  std::size_t row_sum(std::size_t i) const {
    std::size_t s = 0;
    for (auto c : counts[i]) s += c;
    return s;
  }

  std::size_t col_sum(std::size_t j) const {
    std::size_t s = 0;
    for (const auto& row : counts) s += row[j];
    return s;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Cohen's kappa, (p_o - p_e) / (1 - p_e). A single-label matrix (p_e = 1)
/// has p_o = 1 too and yields exactly 1.
inline double cohen_kappa(const ConfusionMatrix& m) {
  const double total = static_cast<double>(m.total());
  if (total <= 0) throw Error(ErrorKind::EmptyMatrix, "confusion matrix has no observations");
  const double p_o = static_cast<double>(m.diagonal()) / total;
  double p_e = 0;
  for (std::size_t i = 0; i < m.labels.size(); ++i)
    p_e += (static_cast<double>(m.row_sum(i)) / total) * (static_cast<double>(m.col_sum(i)) / total);
  if (p_e >= 1.0) return 1.0;
  return std::clamp((p_o - p_e) / (1.0 - p_e), -1.0, 1.0);
}

struct Discrepancy {
  std::string unit_id;
  std::string gold_primary;
  std::string other_primary;
  ContextWindow window;
  std::string note;

  friend bool operator==(const Discrepancy&, const Discrepancy&) = default;
};

struct ComparisonReport {
  std::string gold_set_id;
  std::string other_set_id;
  std::string debate_id;
  std::size_t compared_units = 0;
  std::size_t exact_matches = 0;
  std::size_t overlapping = 0;
  double exact_match_rate = 0;
  double overlap_rate = 0;
  double kappa = 0;
  ConfusionMatrix confusion;
  std::vector<Discrepancy> discrepancies;  // seq order
};

inline ComparisonReport compare(const AnnotationSet& gold, const AnnotationSet& other, const Corpus& corpus) {
  if (gold.header.debate_id != other.header.debate_id)
    throw Error(ErrorKind::DebateMismatch,
                "gold is over " + gold.header.debate_id + ", other is over " + other.header.debate_id);
  if (gold.header.debate_id != corpus.debate_id())
    throw Error(ErrorKind::DebateMismatch, "sets are over " + gold.header.debate_id + ", corpus is " + corpus.debate_id());

  ComparisonReport r;
  r.gold_set_id = gold.header.set_id;
  r.other_set_id = other.header.set_id;
  r.debate_id = corpus.debate_id();

  std::vector<std::pair<std::string, std::string>> pairs;
  for (std::size_t seq = 0; seq < corpus.unit_count(); ++seq) {
    const auto& id = corpus.unit_at(seq).unit_id;
    const Annotation* g = gold.find(id);
    const Annotation* o = other.find(id);
    if (!g || !o) continue;
    ++r.compared_units;
    pairs.emplace_back(g->primary_tag, o->primary_tag);
    if (g->primary_tag == o->primary_tag) {
      ++r.exact_matches;
    } else {
      r.discrepancies.push_back({id, g->primary_tag, o->primary_tag, context_window(corpus, id, 1), {}});
    }
    auto gt = g->all_tags(), ot = o->all_tags();
    bool overlap = std::any_of(gt.begin(), gt.end(),
                               [&](const std::string& t) { return std::find(ot.begin(), ot.end(), t) != ot.end(); });
    if (overlap) ++r.overlapping;
  }
  if (r.compared_units == 0)
    throw Error(ErrorKind::EmptyIntersection, "sets " + r.gold_set_id + " and " + r.other_set_id + " share no units");

  const double n = static_cast<double>(r.compared_units);
  r.exact_match_rate = static_cast<double>(r.exact_matches) / n;
  r.overlap_rate = static_cast<double>(r.overlapping) / n;
  r.confusion = ConfusionMatrix::from_pairs(pairs);
  r.kappa = cohen_kappa(r.confusion);
  return r;
}

// ---------------------------------------------------------------------------
// Rendering

namespace detail {

inline std::string percent(double rate) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", rate * 100.0);
  return buf;
}

inline std::string fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

struct Confusion {
  std::string gold, other;
  std::size_t count;
};

inline std::vector<Confusion> top_confusions(const ConfusionMatrix& m, std::size_t k) {
  std::vector<Confusion> out;
  for (std::size_t i = 0; i < m.labels.size(); ++i)
    for (std::size_t j = 0; j < m.labels.size(); ++j)
      if (i != j && m.counts[i][j] > 0) out.push_back({m.labels[i], m.labels[j], m.counts[i][j]});
  std::stable_sort(out.begin(), out.end(), [](const Confusion& a, const Confusion& b) {
    return std::tie(b.count, a.gold, a.other) < std::tie(a.count, b.gold, b.other);
  });
  if (out.size() > k) out.resize(k);
  return out;
}

}  // namespace detail

inline nlohmann::json to_json(const ComparisonReport& r) {
  nlohmann::json discrepancies = nlohmann::json::array();
  for (const auto& d : r.discrepancies)
    discrepancies.push_back({{"unit_id", d.unit_id},
                             {"gold_primary", d.gold_primary},
                             {"other_primary", d.other_primary},
                             {"window", to_json(d.window)},
                             {"note", d.note}});
  return {{"gold_set_id", r.gold_set_id},
          {"other_set_id", r.other_set_id},
          {"debate_id", r.debate_id},
          {"compared_units", r.compared_units},
          {"exact_matches", r.exact_matches},
          {"exact_match_rate", r.exact_match_rate},
          {"overlap_rate", r.overlap_rate},
          {"kappa", r.kappa},
          {"confusion", {{"labels", r.confusion.labels}, {"counts", r.confusion.counts}}},
          {"discrepancies", std::move(discrepancies)}};
}

inline std::string render_comparison_csv(const ComparisonReport& r) {
  std::string out = "gold\\other";
  for (const auto& l : r.confusion.labels) out += "," + text::csv_field(l);
  out += "\n";
  for (std::size_t i = 0; i < r.confusion.labels.size(); ++i) {
    out += text::csv_field(r.confusion.labels[i]);
    for (auto c : r.confusion.counts[i]) out += "," + std::to_string(c);
    out += "\n";
  }
  return out;
}

inline std::string render_comparison_md(const ComparisonReport& r, std::size_t max_discrepancies) {
  std::ostringstream out;
  out << "# Agreement: " << r.gold_set_id << " vs " << r.other_set_id << "\n\n";
  out << "- debate: " << r.debate_id << "\n";
  out << "- compared units: " << r.compared_units << "\n";
  out << "- exact match: " << detail::percent(r.exact_match_rate) << " (" << r.exact_matches << "/"
      << r.compared_units << ")\n";
  out << "- tag overlap: " << detail::percent(r.overlap_rate) << "\n";
  out << "- cohen's kappa: " << detail::fixed(r.kappa, 3) << "\n";

  auto confusions = detail::top_confusions(r.confusion, 10);
  out << "\n## Top confusions\n\n";
  if (confusions.empty()) {
    out << "none\n";
  } else {
    out << "| gold | other | count |\n|---|---|---|\n";
    for (const auto& c : confusions) out << "| " << c.gold << " | " << c.other << " | " << c.count << " |\n";
  }

  std::size_t shown = std::min(max_discrepancies, r.discrepancies.size());
  out << "\n## Discrepancies (" << shown << " of " << r.discrepancies.size() << ")\n";
  for (std::size_t i = 0; i < shown; ++i) {
    const auto& d = r.discrepancies[i];
    out << "\n### " << d.unit_id << ": gold " << d.gold_primary << ", other " << d.other_primary << "\n\n";
    for (const auto& u : d.window.before) out << "> Previous [" << u.speaker << "]: " << u.text << "\n";
    out << "> **Target [" << d.window.target.speaker << "]: " << d.window.target.text << "**\n";
    for (const auto& u : d.window.after) out << "> Next [" << u.speaker << "]: " << u.text << "\n";
    if (!d.note.empty()) out << "\nnote: " << d.note << "\n";
  }
  return out.str();
}

inline std::string render_comparison(const ComparisonReport& r, std::string_view format,
                                     std::size_t max_discrepancies = 10) {
  if (format == "md") return render_comparison_md(r, max_discrepancies);
  if (format == "csv") return render_comparison_csv(r);
  if (format == "json") return to_json(r).dump(2) + "\n";
  throw Error(ErrorKind::UnknownFormat, "unknown format '" + std::string(format) + "' (md, csv, json)");
}

}  // namespace beads
