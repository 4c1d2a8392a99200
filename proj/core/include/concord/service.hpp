#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "concord/classifier.hpp"
#include "concord/triage.hpp"

namespace concord {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path corpus_path;
  std::filesystem::path ledger_path;
  BackendDescriptor backend;
  PipelineConfig pipeline;
  /// Static bearer token; empty disables authentication.
  std::string auth_token;
};

/// REST front end over a TriageSession.
///
///   GET  /api/rounds
///   GET  /api/rounds/{n}/metrics
///   GET  /api/rounds/{n}/disagreements?status=open|closed|all
///   GET  /api/pairs/{pair_id}
///   POST /api/verdicts
///   POST /api/rounds/next
///   GET  /api/corpus/version
///
/// State is recovered from the corpus and ledger files on construction.
/// Mutations go through a single writer; reads use the last published
/// snapshot. POSTs carrying an Idempotency-Key header are answered from the
/// ledger when the key was seen before.
class TriageService {
 public:
  /// Loads and replays; throws on unreadable corpus or inconsistent ledger.
  explicit TriageService(ServiceConfig config);
  /// Also used for tests that bring their own backend instance.
  TriageService(ServiceConfig config, std::shared_ptr<ClassifierBackend> backend);
  ~TriageService();

  TriageService(const TriageService&) = delete;
  TriageService& operator=(const TriageService&) = delete;

  /// Binds and starts serving on a background thread. Returns the bound
  /// port. Throws Error when the port cannot be bound.
  int start();
  /// Blocks until stop() is called.
  void wait();
  void stop();

  std::shared_ptr<const RoundState> current_round() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace concord
