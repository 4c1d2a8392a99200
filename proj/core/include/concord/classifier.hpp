#pragma once

// Paraphrase classifier backends. The library never links an ML runtime:
// real models sit behind the HTTP protocol implemented by RemoteBackend,
// and two built-in backends (oracle, lexical) exist for testing the
// pipeline end to end.

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "concord/pairs.hpp"

namespace concord {

inline constexpr double kDefaultDecisionThreshold = 0.5;

/// predicted == 1 iff score >= threshold.
inline int decide(double score, double threshold = kDefaultDecisionThreshold) {
  return score >= threshold ? 1 : 0;
}

struct PredictionRecord {
  std::string pair_id;
  int predicted = 0;
  double score = 0.0;  // probability of paraphrase

  bool operator==(const PredictionRecord&) const = default;
};

enum class BackendKind { remote, oracle, lexical };

std::string_view to_string(BackendKind kind);
BackendKind backend_kind_from_string(std::string_view text);

struct BackendDescriptor {
  BackendKind kind = BackendKind::lexical;
  std::string endpoint;  // remote only, e.g. "http://127.0.0.1:8500"
  /// Backend parameters:
  ///   threshold        decision threshold (all kinds), default 0.5
  ///   reference_corpus oracle: corpus JSONL whose labels define the truth
  ///   batch_size       remote: pairs per request, default 256
  ///   max_in_flight    remote: concurrent requests, default 4
  ///   timeout_s        remote: per-request timeout, default 60
  ///   staging_dir      remote: where training slices are written
  std::map<std::string, std::string> params;

  /// Throws ValidationError; a remote descriptor needs an endpoint.
  void validate() const;
  double threshold() const;
};

/// Refuses backends whose predictions are derived from the annotations
/// themselves, which would make an annotation audit circular.
void ensure_backend_allowed_for_audit(const BackendDescriptor& backend);

enum class JobStatus { running, succeeded, failed };

std::string_view to_string(JobStatus status);
JobStatus job_status_from_string(std::string_view text);

struct TrainJob {
  std::string job_id;
  JobStatus status = JobStatus::running;
  std::string detail;
};

class ClassifierBackend {
 public:
  virtual ~ClassifierBackend() = default;

  virtual std::string model_name() const = 0;

  /// Starts training. Built-in backends return an already succeeded job.
  virtual TrainJob train(std::span<const PairInstance> train_pairs, std::span<const PairInstance> val_pairs,
                         const nlohmann::json& config) = 0;
  virtual TrainJob poll(const std::string& job_id) = 0;

  /// One record per input pair, in input order. Either every pair gets a
  /// prediction or the call throws.
  virtual std::vector<PredictionRecord> predict(std::span<const PairInstance> pairs) = 0;
};

/// Polls until the job leaves the running state. Throws BackendError when the
/// job fails and TransportError on timeout.
TrainJob wait_for_training(ClassifierBackend& backend, TrainJob job,
                           std::chrono::milliseconds poll_interval = std::chrono::milliseconds(500),
                           std::chrono::milliseconds timeout = std::chrono::hours(12));

/// Predicts gold, or label equality under a reference labelling when one is
/// given (turn_id -> label).
class OracleBackend final : public ClassifierBackend {
 public:
  OracleBackend() = default;
  explicit OracleBackend(std::unordered_map<std::string, AnnotationLabel> reference);
  static OracleBackend from_corpus(const Corpus& reference);

  std::string model_name() const override;
  TrainJob train(std::span<const PairInstance>, std::span<const PairInstance>, const nlohmann::json&) override;
  TrainJob poll(const std::string& job_id) override;
  std::vector<PredictionRecord> predict(std::span<const PairInstance> pairs) override;

 private:
  std::optional<std::unordered_map<std::string, AnnotationLabel>> reference_;
};

/// Jaccard similarity of the two token sets. Tokens are whitespace separated,
/// ASCII-lowercased and stripped of leading/trailing punctuation; empty
/// tokens are dropped. Two empty sets score 1.0.
double lexical_score(std::string_view text1, std::string_view text2);

class LexicalBackend final : public ClassifierBackend {
 public:
  explicit LexicalBackend(double threshold = kDefaultDecisionThreshold);

  std::string model_name() const override;
  TrainJob train(std::span<const PairInstance>, std::span<const PairInstance>, const nlohmann::json&) override;
  TrainJob poll(const std::string& job_id) override;
  std::vector<PredictionRecord> predict(std::span<const PairInstance> pairs) override;

 private:
  double threshold_;
};

struct RemoteOptions {
  std::size_t batch_size = 256;
  std::size_t max_in_flight = 4;
  std::chrono::seconds timeout{60};
  double threshold = kDefaultDecisionThreshold;
  std::filesystem::path staging_dir;  // empty: system temp dir
  std::string bearer_token;
};

/// Client for the /v1 backend protocol.
class RemoteBackend final : public ClassifierBackend {
 public:
  RemoteBackend(std::string endpoint, RemoteOptions options = {});

  /// GET /v1/health. Returns the served model name.
  std::string health() const;

  std::string model_name() const override;
  /// Writes both slices as pairs TSV into the staging dir and posts their
  /// file:// URIs.
  TrainJob train(std::span<const PairInstance> train_pairs, std::span<const PairInstance> val_pairs,
                 const nlohmann::json& config) override;
  TrainJob poll(const std::string& job_id) override;
  std::vector<PredictionRecord> predict(std::span<const PairInstance> pairs) override;

  const std::string& endpoint() const noexcept { return endpoint_; }

 private:
  std::string endpoint_;
  RemoteOptions options_;
};

std::unique_ptr<ClassifierBackend> make_backend(const BackendDescriptor& descriptor);

// Wire format helpers, shared with the service layer and contract tests.
nlohmann::json predict_request_json(std::span<const PairInstance> pairs);
/// Parses a /v1/predict response for the given request pairs. The client's
/// threshold decides `predicted` from the score. Throws BackendError when
/// ids, order or scores do not match the request.
std::vector<PredictionRecord> parse_predict_response(const nlohmann::json& body,
                                                     std::span<const PairInstance> request,
                                                     double threshold = kDefaultDecisionThreshold);

nlohmann::ordered_json to_json(const PredictionRecord& record);
PredictionRecord prediction_from_json(const nlohmann::json& j, double threshold = kDefaultDecisionThreshold);

/// Predictions JSONL, one {"pair_id","label","score"} object per line.
void write_predictions(std::span<const PredictionRecord> predictions, std::ostream& out);
std::vector<PredictionRecord> read_predictions(std::istream& in, double threshold = kDefaultDecisionThreshold);

}  // namespace concord
