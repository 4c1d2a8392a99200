#include "concord/service.hpp"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <mutex>
#include <thread>
#include <unordered_map>

#include <httplib.h>

#include "concord/error.hpp"
#include "util.hpp"

namespace concord {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

struct Snapshot {
  std::vector<std::shared_ptr<const RoundState>> rounds;
};

struct StoredResponse {
  int status;
  std::string body;
};

void send_json(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, std::string_view message) {
  ordered_json body;
  body["error"] = {{"code", code}, {"message", message}};
  send_json(res, status, body);
}

std::chrono::sys_seconds now_seconds() {
  return std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now());
}

ordered_json turn_json(const Turn& t) {
  ordered_json j;
  j["turn_id"] = t.turn_id;
  j["index"] = t.index;
  j["speaker"] = std::string(to_string(t.speaker));
  j["text"] = t.text;
  j["annotation"] = t.annotation ? ordered_json(t.annotation->value()) : ordered_json(nullptr);
  return j;
}

// The turn itself plus up to two turns on either side.
ordered_json turn_context_json(const Corpus& corpus, const std::string& turn_id) {
  const auto* turn = corpus.find_turn(turn_id);
  if (turn == nullptr) return nullptr;
  const auto* dialog = corpus.find_dialog(turn->dialog_id);
  ordered_json j = turn_json(*turn);
  j["dialog_id"] = turn->dialog_id;
  j["participants"] = dialog->participants;
  auto excerpt = ordered_json::array();
  const auto lo = turn->index >= 2 ? turn->index - 2 : 0;
  const auto hi = std::min(dialog->turns.size(), turn->index + 3);
  for (auto i = lo; i < hi; ++i) excerpt.push_back(turn_json(dialog->turns[i]));
  j["context"] = std::move(excerpt);
  return j;
}

ordered_json round_summary_json(const RoundState& s) {
  ordered_json j;
  j["round"] = s.round;
  j["corpus_version"] = s.corpus_version();
  j["model"] = s.model;
  j["disagreements"] = {{"total", s.total()}, {"open", s.open_count()}, {"closed", s.closed_count()}};
  j["verdicts"] = s.verdicts.size();
  const auto t = s.tallies();
  ordered_json tallies;
  for (std::size_t c = 0; c < kVerdictCategoryCount; ++c) {
    tallies[std::string(to_string(static_cast<VerdictCategory>(c)))] = t[c];
  }
  j["verdict_tallies"] = std::move(tallies);
  return j;
}

ordered_json verdict_response(const LedgerEntry& entry) {
  ordered_json j;
  j["entry"] = to_json(entry);
  return j;
}

}  // namespace

struct TriageService::Impl {
  ServiceConfig config;
  std::shared_ptr<ClassifierBackend> backend;
  std::unique_ptr<TriageSession> session;

  std::mutex write_mutex;  // serializes every mutation of `session`
  mutable std::mutex snapshot_mutex;
  std::shared_ptr<const Snapshot> snapshot;
  std::unordered_map<std::string, StoredResponse> idempotent;  // guarded by write_mutex

  httplib::Server server;
  std::thread listener;
  int bound_port = -1;

  Impl(ServiceConfig cfg, std::shared_ptr<ClassifierBackend> be) : config(std::move(cfg)), backend(std::move(be)) {
    if (!backend) backend = make_backend(config.backend);
    session = std::make_unique<TriageSession>(
        TriageSession::open(config.corpus_path, config.ledger_path, config.pipeline, backend));
    for (const auto& e : session->ledger()) remember(e);
    publish();
    routes();
  }

  void remember(const LedgerEntry& e) {
    if (!e.idempotency_key) return;
    const int status = 201;
    ordered_json body = verdict_response(e);
    if (e.event == LedgerEvent::round_advanced) body["round"] = e.round;
    idempotent[*e.idempotency_key] = {status, body.dump()};
  }

  void publish() {
    auto snap = std::make_shared<Snapshot>();
    snap->rounds = session->rounds();
    std::lock_guard lock(snapshot_mutex);
    snapshot = std::move(snap);
  }

  std::shared_ptr<const Snapshot> read() const {
    std::lock_guard lock(snapshot_mutex);
    return snapshot;
  }

  const RoundState* round_of(const Snapshot& snap, const std::string& text, httplib::Response& res) const {
    std::size_t n = 0;
    try {
      n = std::stoul(text);
    } catch (const std::exception&) {
      n = 0;
    }
    if (n == 0 || n > snap.rounds.size()) {
      send_error(res, 404, "not_found", "no round " + text);
      return nullptr;
    }
    return snap.rounds[n - 1].get();
  }

  bool authorized(const httplib::Request& req) const {
    if (config.auth_token.empty()) return true;
    return req.get_header_value("Authorization") == "Bearer " + config.auth_token;
  }

  // Runs a mutation under the writer lock with idempotency replay.
  template <typename F>
  void mutate(const httplib::Request& req, httplib::Response& res, F&& body) {
    std::lock_guard lock(write_mutex);
    const auto key = req.get_header_value("Idempotency-Key");
    if (!key.empty()) {
      if (const auto it = idempotent.find(key); it != idempotent.end()) {
        res.status = it->second.status;
        res.set_content(it->second.body, "application/json");
        return;
      }
    }
    try {
      body(key.empty() ? std::nullopt : std::optional<std::string>(key));
    } catch (const StateError& e) {
      send_error(res, 409, "state_error", e.what());
    } catch (const ConflictError& e) {
      send_error(res, 409, "conflict", e.what());
    } catch (const ValidationError& e) {
      send_error(res, 422, "validation_error", e.what());
    } catch (const TransportError& e) {
      send_error(res, 502, "backend_unreachable", e.what());
    } catch (const BackendError& e) {
      send_error(res, 502, "backend_error", e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, "bad_request", e.what());
    }
  }

  void routes() {
    // The library default adds SO_REUSEPORT, which would let a second
    // instance share a busy port.
    server.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
    });
    server.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
      if (req.path.rfind("/api/", 0) == 0 && !authorized(req)) {
        send_error(res, 401, "unauthorized", "missing or invalid bearer token");
        return httplib::Server::HandlerResponse::Handled;
      }
      return httplib::Server::HandlerResponse::Unhandled;
    });
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
      } catch (...) {
        send_error(res, 500, "internal", "unknown error");
      }
    });
    server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
      if (res.body.empty() && res.status == 404) send_error(res, 404, "not_found", "no route for " + req.path);
    });

    server.Get("/api/rounds", [this](const httplib::Request&, httplib::Response& res) {
      const auto snap = read();
      ordered_json j;
      j["current_round"] = snap->rounds.back()->round;
      auto rounds = ordered_json::array();
      for (const auto& r : snap->rounds) rounds.push_back(round_summary_json(*r));
      j["rounds"] = std::move(rounds);
      send_json(res, 200, j);
    });

    server.Get(R"(/api/rounds/(\d+)/metrics)", [this](const httplib::Request& req, httplib::Response& res) {
      const auto snap = read();
      const auto* round = round_of(*snap, req.matches[1], res);
      if (round == nullptr) return;
      ordered_json j;
      j["round"] = round->round;
      j["corpus_version"] = round->corpus_version();
      j["metrics"] = to_json(round->metrics);
      send_json(res, 200, j);
    });

    server.Get(R"(/api/rounds/(\d+)/disagreements)", [this](const httplib::Request& req, httplib::Response& res) {
      const auto snap = read();
      const auto* round = round_of(*snap, req.matches[1], res);
      if (round == nullptr) return;
      const auto status = req.has_param("status") ? req.get_param_value("status") : std::string("all");
      if (status != "open" && status != "closed" && status != "all") {
        send_error(res, 400, "bad_request", "status must be open, closed or all");
        return;
      }
      auto items = ordered_json::array();
      for (std::size_t i = 0; i < round->disagreements.size(); ++i) {
        const auto& d = round->disagreements[i];
        const auto* verdict = round->latest_verdict(d.pair.pair_id);
        if ((status == "open" && verdict) || (status == "closed" && !verdict)) continue;
        auto item = to_json(d);
        item["rank"] = i;
        item["status"] = verdict ? "closed" : "open";
        item["verdict"] = verdict ? to_json(*verdict) : ordered_json(nullptr);
        items.push_back(std::move(item));
      }
      ordered_json j;
      j["round"] = round->round;
      j["status"] = status;
      j["cursor"] = round->first_open_index();
      j["total"] = round->total();
      j["open"] = round->open_count();
      j["items"] = std::move(items);
      send_json(res, 200, j);
    });

    server.Get(R"(/api/pairs/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto snap = read();
      const auto& round = *snap->rounds.back();
      const std::string pair_id = req.matches[1];
      const auto& pairs = round.dataset->pairs;
      const auto it = std::lower_bound(pairs.begin(), pairs.end(), pair_id,
                                       [](const PairInstance& p, const std::string& id) { return p.pair_id < id; });
      if (it == pairs.end() || it->pair_id != pair_id) {
        send_error(res, 404, "not_found", "no pair " + pair_id + " in round " + std::to_string(round.round));
        return;
      }
      ordered_json j;
      j["pair_id"] = it->pair_id;
      j["round"] = round.round;
      j["gold"] = it->gold;
      j["split"] = std::string(to_string(round.dataset->split_of[static_cast<std::size_t>(it - pairs.begin())]));
      j["turn1"] = turn_context_json(*round.corpus, it->q1_id);
      j["turn2"] = turn_context_json(*round.corpus, it->q2_id);
      if (const auto* d = round.find_disagreement(pair_id)) {
        j["disagreement"] = to_json(*d);
        const auto* verdict = round.latest_verdict(pair_id);
        j["verdict"] = verdict ? to_json(*verdict) : ordered_json(nullptr);
      } else {
        j["disagreement"] = nullptr;
      }
      send_json(res, 200, j);
    });

    server.Post("/api/verdicts", [this](const httplib::Request& req, httplib::Response& res) {
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::exception& e) {
        send_error(res, 400, "bad_request", std::string("body is not JSON: ") + e.what());
        return;
      }
      mutate(req, res, [&](std::optional<std::string> key) {
        if (!body.is_object() || !body.contains("pair_id") || !body["pair_id"].is_string()) {
          throw ValidationError("verdict needs a pair_id");
        }
        Verdict v;
        v.pair_id = body["pair_id"].get<std::string>();
        v.category = verdict_category_from_string(body.value("category", std::string()));
        v.note = body.value("note", std::string());
        v.actor = body.value("actor", std::string("anonymous"));
        v.timestamp = body.contains("timestamp") ? detail::parse_iso8601(body["timestamp"].get<std::string>())
                                                 : now_seconds();
        std::optional<RevisionAction> action;
        if (body.contains("revision") && !body["revision"].is_null()) {
          action = revision_action_from_json(body["revision"]);
        }
        const auto& round = session->current();
        if (round.find_disagreement(v.pair_id) == nullptr) {
          send_error(res, 404, "not_found",
                     "pair " + v.pair_id + " is not a disagreement of round " + std::to_string(round.round));
          return;
        }
        const auto& entry = session->add_verdict(v, std::move(action), std::move(key));
        remember(entry);
        publish();
        send_json(res, 201, verdict_response(entry));
      });
    });

    server.Post("/api/rounds/next", [this](const httplib::Request& req, httplib::Response& res) {
      json body = json::object();
      if (!req.body.empty()) {
        try {
          body = json::parse(req.body);
        } catch (const json::exception& e) {
          send_error(res, 400, "bad_request", std::string("body is not JSON: ") + e.what());
          return;
        }
      }
      mutate(req, res, [&](std::optional<std::string> key) {
        const auto& entry =
            session->advance_round(body.value("actor", std::string("anonymous")), now_seconds(), std::move(key));
        remember(entry);
        publish();
        auto j = verdict_response(entry);
        j["round"] = entry.round;
        send_json(res, 201, j);
      });
    });

    server.Get("/api/corpus/version", [this](const httplib::Request&, httplib::Response& res) {
      const auto snap = read();
      const auto& corpus = *snap->rounds.back()->corpus;
      ordered_json j;
      j["version_id"] = corpus.version_id();
      j["parent_version"] = corpus.parent_version() ? ordered_json(*corpus.parent_version()) : ordered_json(nullptr);
      j["dialogs"] = corpus.dialogs().size();
      j["questions"] = corpus.questions().size();
      j["round"] = snap->rounds.back()->round;
      send_json(res, 200, j);
    });
  }
};

TriageService::TriageService(ServiceConfig config) : TriageService(std::move(config), nullptr) {}

TriageService::TriageService(ServiceConfig config, std::shared_ptr<ClassifierBackend> backend)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(backend))) {}

TriageService::~TriageService() { stop(); }

int TriageService::start() {
  auto& s = impl_->server;
  if (impl_->config.port == 0) {
    impl_->bound_port = s.bind_to_any_port(impl_->config.host);
  } else if (s.bind_to_port(impl_->config.host, impl_->config.port)) {
    impl_->bound_port = impl_->config.port;
  } else {
    impl_->bound_port = -1;
  }
  if (impl_->bound_port < 0) {
    throw Error("cannot bind " + impl_->config.host + ":" + std::to_string(impl_->config.port));
  }
  impl_->listener = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return impl_->bound_port;
}

void TriageService::wait() {
  if (impl_ && impl_->listener.joinable()) impl_->listener.join();
}

void TriageService::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->listener.joinable()) impl_->listener.join();
}

std::shared_ptr<const RoundState> TriageService::current_round() const { return impl_->read()->rounds.back(); }

}  // namespace concord
