#pragma once

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <pthread.h>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "beads/agreement.hpp"
#include "beads/analytics.hpp"
#include "beads/annotation.hpp"
#include "beads/autotag.hpp"
#include "beads/corpus.hpp"
#include "beads/error.hpp"
#include "beads/http_client.hpp"
#include "beads/schema.hpp"
#include "beads/service.hpp"
#include "beads/store.hpp"
#include "beads/text.hpp"

namespace beads::cli {

inline constexpr int kOk = 0;
inline constexpr int kDomainError = 1;
inline constexpr int kUsageError = 2;

inline std::string default_store() {
  if (const char* env = std::getenv("BEADS_STORE"); env && *env) return env;
  return "store";
}

inline void print_stats(std::ostream& out, const std::string& debate_id, const CorpusStats& st) {
  out << "debate: " << debate_id << "\n";
  out << "words: " << st.word_count << "\n";
  out << "sentences: " << st.sentence_count << "\n";
  out << "units: " << st.unit_count << "\n";
  out << "speakers:\n";
  for (const auto& [speaker, s] : st.per_speaker)
    out << "  " << speaker << ": words=" << s.word_count << " units=" << s.unit_count << "\n";
}

inline void emit(std::ostream& out, const std::string& content, const std::string& out_path) {
  if (out_path.empty())
    out << content;
  else
    text::write_file_atomic(out_path, content);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (const auto& piece : text::split(s, ',')) {
    auto t = text::trim(piece);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

/// Blocks SIGINT/SIGTERM in the calling thread (inherited by threads it
/// starts) and stops `service` when one arrives.
inline int serve_until_signal(Service& service, const std::string& host, int port, std::ostream& err) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    err << "received signal " << sig << ", shutting down\n";
    service.stop();
  });
  try {
    err << "serving " << service.store().root().string() << " on http://" << host << ":" << port << "\n";
    service.listen(host, port);
  } catch (...) {
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    throw;
  }
  if (waiter.joinable()) {
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
  }
  return kOk;
}

/// Runs the `beads` command line. Machine-readable output goes to `out`,
/// diagnostics to `err`. Returns the process exit code.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"beads: bias-enriched dialogue-act annotation toolkit", "beads"};
  app.require_subcommand(1);
  std::string store_dir = default_store();
  app.add_option("--store", store_dir, "store directory (default: $BEADS_STORE or ./store)");

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "clean, parse and segment a raw transcript into the store");
  std::string raw_path, debate_id, source_label;
  std::vector<std::string> moderators;
  std::string noise_rules_path;
  ingest_cmd->add_option("raw", raw_path, "raw transcript (UTF-8 text)")->required();
  ingest_cmd->add_option("--debate-id", debate_id, "debate identifier")->required();
  ingest_cmd->add_option("--source", source_label, "source label, e.g. broadcaster");
  ingest_cmd->add_option("--moderator", moderators, "speaker to treat as moderator (repeatable)");
  ingest_cmd->add_option("--noise-rules", noise_rules_path, "noise rule config replacing the bundled rules");

  // stats
  auto* stats_cmd = app.add_subcommand("stats", "print corpus statistics");
  std::string stats_debate;
  bool stats_json = false;
  stats_cmd->add_option("debate-id", stats_debate)->required();
  stats_cmd->add_flag("--json", stats_json, "print JSON");

  // autotag
  auto* autotag_cmd = app.add_subcommand("autotag", "produce a model annotation set");
  std::string at_debate, at_annotator, at_endpoint, at_set_id, at_template = "default";
  bool at_mock = false;
  std::size_t at_radius = 1;
  std::optional<std::size_t> at_concurrency;
  autotag_cmd->add_option("debate-id", at_debate)->required();
  autotag_cmd->add_option("--annotator", at_annotator, "annotator id recorded on the set")->required();
  auto* mock_flag = autotag_cmd->add_flag("--mock", at_mock, "use the offline rule-based tagger");
  auto* endpoint_opt = autotag_cmd->add_option("--endpoint-config", at_endpoint, "endpoint config JSON");
  mock_flag->excludes(endpoint_opt);
  autotag_cmd->add_option("--radius", at_radius, "context radius (default 1)");
  autotag_cmd->add_option("--set-id", at_set_id, "set id (default <annotator>_<debate-id>)");
  autotag_cmd->add_option("--template", at_template, "prompt template id (default: bundled)");
  autotag_cmd->add_option("--max-concurrent", at_concurrency, "max concurrent requests");

  // compare
  auto* compare_cmd = app.add_subcommand("compare", "compare two annotation sets");
  std::string gold_ref, other_ref, cmp_format = "md", cmp_out;
  std::size_t cmp_max = 10;
  compare_cmd->add_option("gold", gold_ref)->required();
  compare_cmd->add_option("other", other_ref)->required();
  compare_cmd->add_option("--format", cmp_format, "md | csv | json");
  compare_cmd->add_option("--max-discrepancies", cmp_max, "discrepancies listed in md output");
  compare_cmd->add_option("--out", cmp_out, "write to file instead of stdout");

  // report
  auto* report_cmd = app.add_subcommand("report", "cross-debate tag frequency table");
  std::string d1, d2, sets_arg, tags_arg = "SE,CH,PB,AEX,AF,PER,PD", rep_format = "md", rep_mode = "primary_only",
                                 notes_path, rep_out;
  bool rep_moderators = false;
  report_cmd->add_option("debate-1", d1)->required();
  report_cmd->add_option("debate-2", d2)->required();
  report_cmd->add_option("--sets", sets_arg, "gold set ids for the two debates: <set1,set2>")->required();
  report_cmd->add_option("--tags", tags_arg, "tag codes, comma separated");
  report_cmd->add_option("--format", rep_format, "md | csv");
  report_cmd->add_option("--mode", rep_mode, "primary_only | include_secondary");
  report_cmd->add_option("--notes", notes_path, "JSON {tag: key-difference note}");
  report_cmd->add_flag("--include-moderators", rep_moderators);
  report_cmd->add_option("--out", rep_out, "write to file instead of stdout");

  // top
  auto* top_cmd = app.add_subcommand("top", "most frequent bias categories for a speaker");
  std::string top_set, top_speaker, top_mode = "primary_only";
  std::size_t top_k = 5;
  top_cmd->add_option("--set", top_set)->required();
  top_cmd->add_option("--speaker", top_speaker)->required();
  top_cmd->add_option("--k", top_k, "number of categories (default 5)");
  top_cmd->add_option("--mode", top_mode, "primary_only | include_secondary");

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "run the HTTP API and annotation UI");
  int port = 8787;
  std::string host = "127.0.0.1", static_dir, serve_endpoint;
  serve_cmd->add_option("--port", port, "port (default 8787)");
  serve_cmd->add_option("--host", host, "bind address (default loopback)");
  serve_cmd->add_option("--static", static_dir, "UI bundle directory served at /");
  serve_cmd->add_option("--endpoint-config", serve_endpoint, "endpoint config enabling live autotag runs");

  std::vector<std::string> argv_storage{"beads"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    err << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kUsageError;
  }

  try {
    Store store(store_dir);

    if (*ingest_cmd) {
      auto raw = RawTranscript::from_text(debate_id, text::read_file(raw_path), source_label);
      std::optional<NoiseRules> custom_rules;
      if (!noise_rules_path.empty())
        custom_rules = NoiseRules::from_json(nlohmann::json::parse(text::read_file(noise_rules_path)));
      auto result = ingest(raw, moderators, custom_rules ? *custom_rules : NoiseRules::bundled());
      store.save_corpus(result.corpus, result.removed);
      err << "removed " << result.removed.size() << " noise lines; wrote " << store.corpus_path(debate_id).string()
          << "\n";
      print_stats(out, debate_id, stats(result.corpus));
      return kOk;
    }

    if (*stats_cmd) {
      auto corpus = store.load_corpus(stats_debate);
      auto st = stats(corpus);
      if (stats_json)
        out << to_json(st).dump(2) << "\n";
      else
        print_stats(out, stats_debate, st);
      return kOk;
    }

    if (*autotag_cmd) {
      if (!at_mock && at_endpoint.empty()) {
        err << "error: one of --mock or --endpoint-config is required\n" << autotag_cmd->help();
        return kUsageError;
      }
      auto registry = store.registry();
      auto corpus = store.load_corpus(at_debate);
      auto tmpl = store.prompt_template(at_template);
      RunConfig config;
      config.radius = at_radius;
      std::unique_ptr<TaggingClient> client;
      if (at_mock) {
        client = std::make_unique<MockClient>(store.mock_rules(registry));
        config.initial_backoff = std::chrono::milliseconds(0);
      } else {
        auto endpoint = EndpointConfig::load(at_endpoint);
        config.max_retries = endpoint.max_retries;
        config.max_concurrent = endpoint.max_concurrent;
        client = std::make_unique<HttpTaggingClient>(endpoint);
      }
      if (at_concurrency) config.max_concurrent = *at_concurrency;
      std::string set_id = at_set_id.empty() ? at_annotator + "_" + at_debate : at_set_id;
      auto run = autotag_corpus(*client, tmpl, registry, corpus, config, set_id, at_annotator);
      store.save_set(run.set);
      text::write_file_atomic(store.manifest_path(set_id),
                              run_manifest(run, tmpl, config, client->model_name(), corpus.unit_count()).dump(2) + "\n");
      text::write_file_atomic(store.failures_path(set_id), failures_jsonl(run.failures));
      out << "set: " << set_id << "\n";
      out << "tagged: " << run.set.size() << "/" << corpus.unit_count() << "\n";
      out << "failures: " << run.failures.size() << "\n";
      if (run.aborted)
        throw Error(ErrorKind::EndpointUnreachable,
                    "run aborted; partial set and failure report written to " + store.set_path(set_id).string());
      return kOk;
    }

    if (*compare_cmd) {
      auto registry = store.registry();
      auto gold_header = store.set_header(gold_ref);
      auto other_header = store.set_header(other_ref);
      if (gold_header.debate_id != other_header.debate_id)
        throw Error(ErrorKind::DebateMismatch,
                    "gold is over " + gold_header.debate_id + ", other is over " + other_header.debate_id);
      auto corpus = store.load_corpus(gold_header.debate_id);
      auto report = compare(store.load_set(gold_ref, registry, corpus), store.load_set(other_ref, registry, corpus), corpus);
      emit(out, render_comparison(report, cmp_format, cmp_max), cmp_out);
      return kOk;
    }

    if (*report_cmd) {
      auto registry = store.registry();
      auto set_ids = split_list(sets_arg);
      if (set_ids.size() != 2) {
        err << "error: --sets needs exactly two set ids\n" << report_cmd->help();
        return kUsageError;
      }
      auto mode = parse_count_mode(rep_mode);
      if (!mode) throw Error(ErrorKind::InvalidArgument, "mode must be primary_only or include_secondary");
      auto c1 = store.load_corpus(d1);
      auto c2 = store.load_corpus(d2);
      auto t1 = tag_frequencies(store.load_set(set_ids[0], registry, c1), c1, *mode, rep_moderators);
      auto t2 = tag_frequencies(store.load_set(set_ids[1], registry, c2), c2, *mode, rep_moderators);
      std::map<std::string, std::string> notes;
      std::filesystem::path notes_file = notes_path.empty() ? store.root() / "notes" / (d1 + "_" + d2 + ".json")
                                                            : std::filesystem::path(notes_path);
      if (!notes_path.empty() || std::filesystem::exists(notes_file))
        notes = nlohmann::json::parse(text::read_file(notes_file)).get<std::map<std::string, std::string>>();
      auto cmp = compare_debates(t1, t2, split_list(tags_arg), registry, notes);
      emit(out, render_metrics(cmp, rep_format, registry), rep_out);
      return kOk;
    }

    if (*top_cmd) {
      auto registry = store.registry();
      auto mode = parse_count_mode(top_mode);
      if (!mode) throw Error(ErrorKind::InvalidArgument, "mode must be primary_only or include_secondary");
      auto header = store.set_header(top_set);
      auto corpus = store.load_corpus(header.debate_id);
      auto table = tag_frequencies(store.load_set(top_set, registry, corpus), corpus, *mode);
      for (const auto& tc : top_k_categories(table, text::to_upper(text::squeeze(top_speaker)), top_k,
                                             default_bias_tags(registry)))
        out << tc.code << "\t" << tc.count << "\n";
      return kOk;
    }

    if (*serve_cmd) {
      ServiceOptions options;
      options.static_dir = static_dir;
      if (!serve_endpoint.empty()) options.live_endpoint = EndpointConfig::load(serve_endpoint);
      Service service(store_dir, options);
      return serve_until_signal(service, host, port, err);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kDomainError;
  } catch (const nlohmann::json::exception& e) {
    err << "error: MalformedConfig: " << e.what() << "\n";
    return kDomainError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: IoFailure: " << e.what() << "\n";
    return kDomainError;
  }
  return kUsageError;
}

}  // namespace beads::cli
