#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "beads/agreement.hpp"
#include "beads/analytics.hpp"
#include "beads/annotation.hpp"
#include "beads/autotag.hpp"
#include "beads/corpus.hpp"
#include "beads/error.hpp"
#include "beads/http_client.hpp"
#include "beads/schema.hpp"
#include "beads/store.hpp"

namespace beads {

struct ServiceOptions {
  std::filesystem::path static_dir;             // served at "/" when set
  std::optional<EndpointConfig> live_endpoint;  // enables client=live autotag runs
  std::chrono::milliseconds lock_timeout{2000};
  std::size_t default_page = 100;
  std::size_t max_page = 1000;
};

struct RunStatus {
  std::string run_id;
  std::string state;  // running | completed | aborted | failed
  std::string set_id;
  std::string debate_id;
  std::size_t done = 0;
  std::size_t total = 0;
  std::size_t failures = 0;
  std::string error;
};

inline nlohmann::json to_json(const RunStatus& r) {
  return {{"run_id", r.run_id}, {"state", r.state},       {"set_id", r.set_id},     {"debate_id", r.debate_id},
          {"done", r.done},     {"total", r.total},       {"failures", r.failures}, {"error", r.error}};
}

inline int http_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotFound:
    case ErrorKind::UnknownUnit:
      return 404;
    case ErrorKind::SetBusy:
      return 409;
    case ErrorKind::InvalidArgument:
    case ErrorKind::MalformedConfig:
      return 400;
    case ErrorKind::IoFailure:
    case ErrorKind::StoreUnreadable:
    case ErrorKind::MalformedCorpusFile:
      return 500;
    default:
      return 422;
  }
}

/// HTTP/JSON API over a Store. Writes to one annotation set are serialized by
/// the store's per-set lock; autotag runs execute on background threads.
class Service {
 public:
  Service(std::filesystem::path store_root, ServiceOptions options = {})
      : store_(std::move(store_root)), options_(std::move(options)) {
    store_.require_readable();
    registry_ = store_.registry();
    // httplib defaults to SO_REUSEPORT, which lets a second server share the port
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    routes();
  }

  ~Service() { stop(); }

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds and serves until `stop()`. Throws PortInUse when the bind fails.
  void listen(const std::string& host, int port) {
    if (!server_.bind_to_port(host, port))
      throw Error(ErrorKind::PortInUse, "cannot bind " + host + ":" + std::to_string(port));
    server_.listen_after_bind();
  }

  /// Binds to an ephemeral port and returns it; call `listen_after_bind()`.
  int bind_any(const std::string& host = "127.0.0.1") {
    int port = server_.bind_to_any_port(host);
    if (port < 0) throw Error(ErrorKind::PortInUse, "cannot bind " + host);
    return port;
  }

  void listen_after_bind() { server_.listen_after_bind(); }

  bool running() const { return server_.is_running(); }
  void wait_until_ready() const { server_.wait_until_ready(); }

  /// Stops accepting requests and waits for background runs to flush.
  void stop() {
    server_.stop();
    std::vector<std::thread> runs;
    {
      std::lock_guard lock(runs_mu_);
      runs.swap(run_threads_);
    }
    for (auto& t : runs)
      if (t.joinable()) t.join();
  }

  const Store& store() const { return store_; }

 private:
  using Req = httplib::Request;
  using Res = httplib::Response;

  static void send_json(Res& res, const nlohmann::json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void send_error(Res& res, ErrorKind kind, const std::string& detail, int status) {
    send_json(res, {{"error_kind", std::string(to_string(kind))}, {"detail", detail}}, status);
  }

  template <class F>
  auto guarded(F f) {
    return [f = std::move(f)](const Req& req, Res& res) {
      try {
        f(req, res);
      } catch (const Error& e) {
        send_error(res, e.kind(), e.detail(), http_status(e.kind()));
      } catch (const nlohmann::json::exception& e) {
        send_error(res, ErrorKind::InvalidArgument, e.what(), 400);
      } catch (const std::exception& e) {
        send_error(res, ErrorKind::IoFailure, e.what(), 500);
      }
    };
  }

  static nlohmann::json body_json(const Req& req) {
    try {
      auto j = nlohmann::json::parse(req.body);
      if (!j.is_object()) throw Error(ErrorKind::InvalidArgument, "request body must be a JSON object");
      return j;
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::InvalidArgument, std::string("request body: ") + e.what());
    }
  }

  static std::size_t size_param(const Req& req, const char* key, std::size_t fallback) {
    if (!req.has_param(key)) return fallback;
    try {
      long long v = std::stoll(req.get_param_value(key));
      if (v < 0) throw Error(ErrorKind::InvalidArgument, std::string(key) + " must be non-negative");
      return static_cast<std::size_t>(v);
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::InvalidArgument, std::string(key) + " must be an integer");
    }
  }

  static std::string required_param(const Req& req, const char* key) {
    if (!req.has_param(key)) throw Error(ErrorKind::InvalidArgument, std::string("missing query parameter '") + key + "'");
    return req.get_param_value(key);
  }

  Corpus corpus_for_unit(const std::string& unit_id) const {
    auto hash = unit_id.rfind('#');
    if (hash == std::string::npos) throw Error(ErrorKind::UnknownUnit, "unknown unit '" + unit_id + "'");
    std::string debate = unit_id.substr(0, hash);
    if (!store_.has_corpus(debate)) throw Error(ErrorKind::UnknownUnit, "unknown unit '" + unit_id + "'");
    return store_.load_corpus(debate);
  }

  nlohmann::json set_json(const AnnotationSet& set) const {
    nlohmann::json anns = nlohmann::json::array();
    for (const auto& [_, a] : set.annotations) anns.push_back(to_json(a));
    return {{"header", to_json(set.header)}, {"annotations", std::move(anns)}};
  }

  std::unique_lock<std::timed_mutex> lock_set(const std::string& set_id) const {
    std::unique_lock lock(store_.set_lock(set_id), std::defer_lock);
    if (!lock.try_lock_for(options_.lock_timeout))
      throw Error(ErrorKind::SetBusy, "set " + set_id + " is being written by another request");
    return lock;
  }

  void routes() {
    server_.Get("/api/registry", guarded([this](const Req&, Res& res) { send_json(res, to_json(registry_)); }));

    server_.Get("/api/corpora", guarded([this](const Req&, Res& res) {
      nlohmann::json out = nlohmann::json::array();
      for (const auto& id : store_.corpus_ids()) {
        auto c = store_.load_corpus(id);
        out.push_back({{"debate_id", id}, {"unit_count", c.unit_count()}, {"speakers", c.speakers()}});
      }
      send_json(res, out);
    }));

    server_.Get(R"(/api/corpora/([^/]+)/units)", guarded([this](const Req& req, Res& res) {
      auto corpus = store_.load_corpus(req.matches[1]);
      std::size_t offset = size_param(req, "offset", 0);
      std::size_t limit = std::min(size_param(req, "limit", options_.default_page), options_.max_page);
      nlohmann::json units = nlohmann::json::array();
      for (std::size_t seq = offset; seq < corpus.unit_count() && seq < offset + limit; ++seq) {
        const auto& u = corpus.unit_at(seq);
        units.push_back({{"unit_id", u.unit_id},
                         {"seq", u.seq},
                         {"turn_id", u.turn_id},
                         {"speaker", corpus.speaker_at(seq)},
                         {"text", u.text}});
      }
      send_json(res, {{"debate_id", corpus.debate_id()},
                      {"offset", offset},
                      {"limit", limit},
                      {"total", corpus.unit_count()},
                      {"units", std::move(units)}});
    }));

    server_.Get(R"(/api/units/(.+)/context)", guarded([this](const Req& req, Res& res) {
      std::string unit_id = req.matches[1];
      auto corpus = corpus_for_unit(unit_id);
      send_json(res, to_json(context_window(corpus, unit_id, size_param(req, "radius", 1))));
    }));

    server_.Get("/api/sets", guarded([this](const Req&, Res& res) {
      nlohmann::json out = nlohmann::json::array();
      for (const auto& h : store_.set_headers()) out.push_back(to_json(h));
      send_json(res, out);
    }));

    server_.Post("/api/sets", guarded([this](const Req& req, Res& res) {
      auto body = body_json(req);
      auto header = detail::parse_set_header(body.dump());
      if (!store_.has_corpus(header.debate_id))
        throw Error(ErrorKind::NotFound, "no corpus '" + header.debate_id + "' in store");
      auto lock = lock_set(header.set_id);
      if (store_.has_set(header.set_id))
        return send_error(res, ErrorKind::InvalidArgument, "set " + header.set_id + " already exists", 409);
      auto set = make_set(header.set_id, header.debate_id, header.annotator_id, header.provenance);
      store_.save_set(set);
      send_json(res, to_json(set.header), 201);
    }));

    server_.Get(R"(/api/sets/([^/]+))", guarded([this](const Req& req, Res& res) {
      send_json(res, set_json(store_.load_set(req.matches[1], registry_)));
    }));

    server_.Post(R"(/api/sets/([^/]+)/annotations)", guarded([this](const Req& req, Res& res) {
      std::string set_id = req.matches[1];
      auto body = body_json(req);
      auto lock = lock_set(set_id);
      auto header = store_.set_header(set_id);
      auto corpus = store_.load_corpus(header.debate_id);
      auto set = store_.load_set(set_id, registry_, corpus);
      Annotation a;
      a.unit_id = body.at("unit_id").get<std::string>();
      a.primary_tag = body.at("primary_tag").get<std::string>();
      if (body.contains("secondary_tags")) a.secondary_tags = body["secondary_tags"].get<std::vector<std::string>>();
      if (body.contains("rationale") && body["rationale"].is_string()) a.rationale = body["rationale"].get<std::string>();
      a.provenance = set.header.provenance;
      if (body.contains("provenance")) {
        auto p = parse_provenance(body["provenance"].get<std::string>());
        if (!p) throw Error(ErrorKind::InvalidArgument, "provenance must be 'human' or 'model'");
        a.provenance = *p;
      }
      a.annotator_id = body.value("annotator_id", set.header.annotator_id);
      std::string unit_id = a.unit_id;
      set = upsert_annotation(std::move(set), std::move(a), registry_, corpus);
      store_.save_set(set);
      send_json(res, to_json(*set.find(unit_id)));
    }));

    server_.Get(R"(/api/sets/([^/]+)/coverage)", guarded([this](const Req& req, Res& res) {
      auto header = store_.set_header(req.matches[1]);
      auto corpus = store_.load_corpus(header.debate_id);
      auto cov = coverage(store_.load_set(req.matches[1], registry_, corpus), corpus);
      send_json(res, {{"set_id", header.set_id},
                      {"annotated", cov.annotated},
                      {"total", cov.total},
                      {"missing", cov.missing}});
    }));

    server_.Post("/api/autotag", guarded([this](const Req& req, Res& res) { start_run(body_json(req), res); }));

    server_.Get(R"(/api/runs/([^/]+))", guarded([this](const Req& req, Res& res) {
      std::lock_guard lock(runs_mu_);
      auto it = runs_.find(req.matches[1]);
      if (it == runs_.end()) throw Error(ErrorKind::NotFound, "no run '" + std::string(req.matches[1]) + "'");
      send_json(res, to_json(it->second));
    }));

    server_.Get("/api/agreement", guarded([this](const Req& req, Res& res) {
      auto gold_header = store_.set_header(required_param(req, "gold"));
      auto other_header = store_.set_header(required_param(req, "other"));
      if (gold_header.debate_id != other_header.debate_id)
        throw Error(ErrorKind::DebateMismatch,
                    "gold is over " + gold_header.debate_id + ", other is over " + other_header.debate_id);
      auto corpus = store_.load_corpus(gold_header.debate_id);
      auto report = compare(store_.load_set(req.get_param_value("gold"), registry_, corpus),
                            store_.load_set(req.get_param_value("other"), registry_, corpus), corpus);
      send_json(res, to_json(report));
    }));

    server_.Get("/api/metrics", guarded([this](const Req& req, Res& res) {
      std::string set_id = required_param(req, "set");
      auto mode = parse_count_mode(req.has_param("mode") ? req.get_param_value("mode") : "primary_only");
      if (!mode) throw Error(ErrorKind::InvalidArgument, "mode must be primary_only or include_secondary");
      bool include_moderators = req.has_param("include_moderators") && req.get_param_value("include_moderators") == "true";
      auto header = store_.set_header(set_id);
      auto corpus = store_.load_corpus(header.debate_id);
      auto table = tag_frequencies(store_.load_set(set_id, registry_, corpus), corpus, *mode, include_moderators);
      send_json(res, to_json(table));
    }));

    if (!options_.static_dir.empty() && std::filesystem::is_directory(options_.static_dir)) {
      server_.set_mount_point("/", options_.static_dir.string());
    } else {
      server_.Get("/", [](const Req&, Res& res) {
        res.set_content("beads annotation service: API under /api (no UI bundle configured)\n", "text/plain");
      });
    }
  }

  void start_run(const nlohmann::json& body, Res& res) {
    std::string debate_id = body.at("debate_id").get<std::string>();
    std::string template_id = body.value("template_id", std::string("default"));
    std::size_t radius = body.value("radius", std::size_t{1});
    std::string client_kind = body.value("client", std::string("mock"));
    std::string annotator = body.value("annotator_id", client_kind == "mock" ? std::string("mock") : std::string("model"));
    std::string set_id = body.value("set_id", annotator + "_" + debate_id);

    auto corpus = std::make_shared<Corpus>(store_.load_corpus(debate_id));
    auto tmpl = store_.prompt_template(template_id);
    std::shared_ptr<TaggingClient> client;
    RunConfig config;
    config.radius = radius;
    if (client_kind == "mock") {
      client = std::make_shared<MockClient>(store_.mock_rules(registry_));
      config.initial_backoff = std::chrono::milliseconds(0);
    } else if (client_kind == "live") {
      if (!options_.live_endpoint)
        throw Error(ErrorKind::InvalidArgument, "live client requested but no endpoint config was given to serve");
      client = std::make_shared<HttpTaggingClient>(*options_.live_endpoint);
      config.max_retries = options_.live_endpoint->max_retries;
      config.max_concurrent = options_.live_endpoint->max_concurrent;
    } else {
      throw Error(ErrorKind::InvalidArgument, "client must be 'mock' or 'live'");
    }

    RunStatus status;
    status.run_id = "run-" + std::to_string(++run_counter_) + "-" + set_id;
    status.state = "running";
    status.set_id = set_id;
    status.debate_id = debate_id;
    status.total = corpus->unit_count();
    {
      std::lock_guard lock(runs_mu_);
      runs_[status.run_id] = status;
    }

    std::string run_id = status.run_id;
    std::lock_guard lock(runs_mu_);
    run_threads_.emplace_back([this, run_id, set_id, annotator, corpus, tmpl, client, config] {
      auto update = [&](auto fn) {
        std::lock_guard g(runs_mu_);
        fn(runs_[run_id]);
      };
      try {
        auto run = autotag_corpus(*client, tmpl, registry_, *corpus, config, set_id, annotator,
                                  [&](std::size_t done, std::size_t) { update([&](RunStatus& s) { s.done = done; }); });
        {
          std::unique_lock set_lock(store_.set_lock(set_id));
          store_.save_set(run.set);
          text::write_file_atomic(store_.manifest_path(set_id),
                                  run_manifest(run, tmpl, config, client->model_name(), corpus->unit_count()).dump(2) + "\n");
          text::write_file_atomic(store_.failures_path(set_id), failures_jsonl(run.failures));
        }
        update([&](RunStatus& s) {
          s.state = run.aborted ? "aborted" : "completed";
          s.failures = run.failures.size();
          if (run.aborted) s.error = "EndpointUnreachable";
        });
      } catch (const std::exception& e) {
        update([&](RunStatus& s) {
          s.state = "failed";
          s.error = e.what();
        });
      }
    });
    send_json(res, {{"run_id", run_id}, {"set_id", set_id}}, 202);
  }

  Store store_;
  ServiceOptions options_;
  TagRegistry registry_;
  httplib::Server server_;
  std::mutex runs_mu_;
  std::map<std::string, RunStatus> runs_;
  std::vector<std::thread> run_threads_;
  std::atomic<std::size_t> run_counter_{0};
};

}  // namespace beads
