#include "concord/classifier.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <set>
#include <thread>

#include "concord/error.hpp"
#include "util.hpp"

namespace concord {

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::remote: return "remote";
    case BackendKind::oracle: return "oracle";
    case BackendKind::lexical: return "lexical";
  }
  return "lexical";
}

BackendKind backend_kind_from_string(std::string_view text) {
  if (text == "remote") return BackendKind::remote;
  if (text == "oracle") return BackendKind::oracle;
  if (text == "lexical") return BackendKind::lexical;
  throw ValidationError("unknown backend '" + std::string(text) + "'");
}

std::string_view to_string(JobStatus status) {
  switch (status) {
    case JobStatus::running: return "running";
    case JobStatus::succeeded: return "succeeded";
    case JobStatus::failed: return "failed";
  }
  return "failed";
}

JobStatus job_status_from_string(std::string_view text) {
  if (text == "running") return JobStatus::running;
  if (text == "succeeded") return JobStatus::succeeded;
  if (text == "failed") return JobStatus::failed;
  throw BackendError("unknown job status '" + std::string(text) + "'");
}

namespace {

double param_double(const std::map<std::string, std::string>& params, const std::string& key, double fallback) {
  const auto it = params.find(key);
  if (it == params.end()) return fallback;
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("backend parameter " + key + "='" + it->second + "' is not a number");
  }
}

std::size_t param_size(const std::map<std::string, std::string>& params, const std::string& key,
                       std::size_t fallback) {
  const auto it = params.find(key);
  if (it == params.end()) return fallback;
  std::size_t v = 0;
  const auto* end = it->second.data() + it->second.size();
  const auto [ptr, ec] = std::from_chars(it->second.data(), end, v);
  if (ec != std::errc() || ptr != end || v == 0) {
    throw ValidationError("backend parameter " + key + "='" + it->second + "' must be a positive integer");
  }
  return v;
}

TrainJob completed_job(std::string id) { return {std::move(id), JobStatus::succeeded, "built-in backend"}; }

}  // namespace

void BackendDescriptor::validate() const {
  if (kind == BackendKind::remote && endpoint.empty()) {
    throw ValidationError("remote backend requires an endpoint");
  }
  if (kind != BackendKind::remote && !endpoint.empty()) {
    throw ValidationError("endpoint is only valid for the remote backend");
  }
  const double t = threshold();
  if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("threshold must lie in [0,1]");
}

double BackendDescriptor::threshold() const { return param_double(params, "threshold", kDefaultDecisionThreshold); }

void ensure_backend_allowed_for_audit(const BackendDescriptor& backend) {
  if (backend.kind == BackendKind::oracle) {
    throw ValidationError(
        "the oracle backend echoes the annotation labels, so auditing annotations with it is circular; "
        "use --backend lexical or --backend remote");
  }
}

TrainJob wait_for_training(ClassifierBackend& backend, TrainJob job, std::chrono::milliseconds poll_interval,
                           std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (job.status == JobStatus::running) {
    if (std::chrono::steady_clock::now() >= deadline) {
      throw TransportError("training job " + job.job_id + " did not finish in time");
    }
    std::this_thread::sleep_for(poll_interval);
    job = backend.poll(job.job_id);
  }
  if (job.status == JobStatus::failed) throw BackendError("training job " + job.job_id + " failed: " + job.detail);
  return job;
}

// Oracle

OracleBackend::OracleBackend(std::unordered_map<std::string, AnnotationLabel> reference)
    : reference_(std::move(reference)) {}

OracleBackend OracleBackend::from_corpus(const Corpus& reference) {
  std::unordered_map<std::string, AnnotationLabel> labels;
  for (const auto& q : reference.questions()) labels.emplace(q.turn_id, q.label);
  return OracleBackend(std::move(labels));
}

std::string OracleBackend::model_name() const { return reference_ ? "oracle(reference)" : "oracle"; }

TrainJob OracleBackend::train(std::span<const PairInstance>, std::span<const PairInstance>, const nlohmann::json&) {
  return completed_job("oracle");
}

TrainJob OracleBackend::poll(const std::string& job_id) { return completed_job(job_id); }

std::vector<PredictionRecord> OracleBackend::predict(std::span<const PairInstance> pairs) {
  std::vector<PredictionRecord> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    int label = p.gold;
    if (reference_) {
      const auto a = reference_->find(p.q1_id);
      const auto b = reference_->find(p.q2_id);
      if (a == reference_->end() || b == reference_->end()) {
        throw BackendError("oracle reference has no label for pair " + p.pair_id);
      }
      label = a->second == b->second ? 1 : 0;
    }
    out.push_back({p.pair_id, label, static_cast<double>(label)});
  }
  return out;
}

// Lexical

namespace {

bool is_ascii_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return (u >= 33 && u <= 47) || (u >= 58 && u <= 64) || (u >= 91 && u <= 96) || (u >= 123 && u <= 126);
}

std::vector<std::string> token_set(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && detail::is_ascii_space(text[i])) ++i;
    auto j = i;
    while (j < text.size() && !detail::is_ascii_space(text[j])) ++j;
    auto token = text.substr(i, j - i);
    while (!token.empty() && is_ascii_punct(token.front())) token.remove_prefix(1);
    while (!token.empty() && is_ascii_punct(token.back())) token.remove_suffix(1);
    if (!token.empty()) tokens.push_back(detail::ascii_lower(token));
    i = j;
  }
  std::sort(tokens.begin(), tokens.end());
  tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
  return tokens;
}

}  // namespace

double lexical_score(std::string_view text1, std::string_view text2) {
  const auto a = token_set(text1);
  const auto b = token_set(text2);
  if (a.empty() && b.empty()) return 1.0;
  std::size_t common = 0;
  for (auto ia = a.begin(), ib = b.begin(); ia != a.end() && ib != b.end();) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++common;
      ++ia;
      ++ib;
    }
  }
  const auto unite = a.size() + b.size() - common;
  return static_cast<double>(common) / static_cast<double>(unite);
}

LexicalBackend::LexicalBackend(double threshold) : threshold_(threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ValidationError("threshold must lie in [0,1]");
}

std::string LexicalBackend::model_name() const { return "lexical-jaccard"; }

TrainJob LexicalBackend::train(std::span<const PairInstance>, std::span<const PairInstance>, const nlohmann::json&) {
  return completed_job("lexical");
}

TrainJob LexicalBackend::poll(const std::string& job_id) { return completed_job(job_id); }

std::vector<PredictionRecord> LexicalBackend::predict(std::span<const PairInstance> pairs) {
  std::vector<PredictionRecord> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    const double score = lexical_score(p.text1, p.text2);
    out.push_back({p.pair_id, decide(score, threshold_), score});
  }
  return out;
}

// Factory

std::unique_ptr<ClassifierBackend> make_backend(const BackendDescriptor& descriptor) {
  descriptor.validate();
  const auto& params = descriptor.params;
  switch (descriptor.kind) {
    case BackendKind::oracle:
      if (const auto it = params.find("reference_corpus"); it != params.end()) {
        return std::make_unique<OracleBackend>(OracleBackend::from_corpus(load_corpus(it->second)));
      }
      return std::make_unique<OracleBackend>();
    case BackendKind::lexical:
      return std::make_unique<LexicalBackend>(descriptor.threshold());
    case BackendKind::remote: {
      RemoteOptions options;
      options.batch_size = param_size(params, "batch_size", options.batch_size);
      options.max_in_flight = param_size(params, "max_in_flight", options.max_in_flight);
      options.timeout = std::chrono::seconds(param_size(params, "timeout_s", 60));
      options.threshold = descriptor.threshold();
      if (const auto it = params.find("staging_dir"); it != params.end()) options.staging_dir = it->second;
      if (const auto it = params.find("token"); it != params.end()) options.bearer_token = it->second;
      return std::make_unique<RemoteBackend>(descriptor.endpoint, options);
    }
  }
  throw ValidationError("unsupported backend");
}

// Wire format

nlohmann::json predict_request_json(std::span<const PairInstance> pairs) {
  auto arr = nlohmann::json::array();
  for (const auto& p : pairs) arr.push_back({{"pair_id", p.pair_id}, {"text1", p.text1}, {"text2", p.text2}});
  return {{"pairs", std::move(arr)}};
}

PredictionRecord prediction_from_json(const nlohmann::json& j, double threshold) {
  if (!j.is_object() || !j.contains("pair_id") || !j["pair_id"].is_string()) {
    throw BackendError("prediction without a string pair_id");
  }
  PredictionRecord r;
  r.pair_id = j["pair_id"].get<std::string>();
  const auto score = j.find("score");
  const auto label = j.find("label");
  if (score != j.end() && score->is_number()) {
    r.score = score->get<double>();
  } else if (label != j.end() && label->is_number_integer()) {
    r.score = static_cast<double>(label->get<int>());
  } else {
    throw BackendError("prediction " + r.pair_id + " has neither score nor label");
  }
  if (!(r.score >= 0.0 && r.score <= 1.0)) {
    throw BackendError("prediction " + r.pair_id + " has a score outside [0,1]");
  }
  if (label != j.end() && !(label->is_number_integer() && (label->get<int>() == 0 || label->get<int>() == 1))) {
    throw BackendError("prediction " + r.pair_id + " has a label other than 0/1");
  }
  r.predicted = decide(r.score, threshold);
  return r;
}

std::vector<PredictionRecord> parse_predict_response(const nlohmann::json& body,
                                                     std::span<const PairInstance> request, double threshold) {
  if (!body.is_object() || !body.contains("predictions") || !body["predictions"].is_array()) {
    throw BackendError("predict response lacks a predictions array");
  }
  const auto& arr = body["predictions"];
  if (arr.size() != request.size()) {
    throw BackendError("predict response has " + std::to_string(arr.size()) + " predictions for " +
                       std::to_string(request.size()) + " pairs");
  }
  std::vector<PredictionRecord> out;
  out.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    auto r = prediction_from_json(arr[i], threshold);
    if (r.pair_id != request[i].pair_id) {
      throw BackendError("predict response out of order at " + std::to_string(i) + ": expected " +
                         request[i].pair_id + ", got " + r.pair_id);
    }
    out.push_back(std::move(r));
  }
  return out;
}

nlohmann::ordered_json to_json(const PredictionRecord& record) {
  nlohmann::ordered_json j;
  j["pair_id"] = record.pair_id;
  j["label"] = record.predicted;
  j["score"] = record.score;
  return j;
}

void write_predictions(std::span<const PredictionRecord> predictions, std::ostream& out) {
  for (const auto& r : predictions) out << to_json(r).dump() << '\n';
}

std::vector<PredictionRecord> read_predictions(std::istream& in, double threshold) {
  std::vector<PredictionRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    try {
      out.push_back(prediction_from_json(nlohmann::json::parse(line), threshold));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, e.what());
    } catch (const BackendError& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return out;
}

}  // namespace concord
