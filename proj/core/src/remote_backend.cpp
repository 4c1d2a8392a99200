#include <atomic>
#include <exception>
#include <mutex>
#include <random>
#include <thread>

#include <httplib.h>

#include "concord/classifier.hpp"
#include "concord/error.hpp"

namespace concord {

namespace {

httplib::Client make_client(const std::string& endpoint, const RemoteOptions& options) {
  httplib::Client client(endpoint);
  if (!client.is_valid()) throw ValidationError("invalid backend endpoint '" + endpoint + "'");
  const auto secs = static_cast<time_t>(options.timeout.count());
  client.set_connection_timeout(secs, 0);
  client.set_read_timeout(secs, 0);
  client.set_write_timeout(secs, 0);
  if (!options.bearer_token.empty()) client.set_bearer_token_auth(options.bearer_token);
  return client;
}

nlohmann::json checked_body(const httplib::Result& res, const std::string& what) {
  if (!res) throw TransportError(what + ": " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300) {
    throw BackendError(what + ": HTTP " + std::to_string(res->status) + " " + res->body);
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(what + ": response is not JSON (" + e.what() + ")");
  }
}

TrainJob job_from_json(const nlohmann::json& body, std::string job_id) {
  if (!body.is_object() || !body.contains("status") || !body["status"].is_string()) {
    throw BackendError("train status response lacks a status");
  }
  TrainJob job;
  job.job_id = std::move(job_id);
  job.status = job_status_from_string(body["status"].get<std::string>());
  if (body.contains("detail") && body["detail"].is_string()) job.detail = body["detail"].get<std::string>();
  return job;
}

std::filesystem::path write_slice(const std::filesystem::path& dir, std::string_view stem,
                                  std::span<const PairInstance> pairs, Split which) {
  PairDataset slice;
  slice.pairs.assign(pairs.begin(), pairs.end());
  slice.split_of.assign(pairs.size(), which);
  std::random_device rd;
  auto path = dir / (std::string(stem) + "-" + std::to_string(rd()) + ".tsv");
  save_pairs(slice, path);
  return std::filesystem::absolute(path);
}

}  // namespace

RemoteBackend::RemoteBackend(std::string endpoint, RemoteOptions options)
    : endpoint_(std::move(endpoint)), options_(std::move(options)) {
  if (endpoint_.empty()) throw ValidationError("remote backend requires an endpoint");
  if (options_.batch_size == 0 || options_.max_in_flight == 0) {
    throw ValidationError("batch size and in-flight limit must be positive");
  }
}

std::string RemoteBackend::health() const {
  auto client = make_client(endpoint_, options_);
  const auto body = checked_body(client.Get("/v1/health"), "GET /v1/health");
  if (!body.is_object() || !body.value("ok", false)) throw BackendError("backend reports unhealthy");
  return body.value("model", std::string("unknown"));
}

std::string RemoteBackend::model_name() const { return health(); }

TrainJob RemoteBackend::train(std::span<const PairInstance> train_pairs, std::span<const PairInstance> val_pairs,
                              const nlohmann::json& config) {
  const auto dir = options_.staging_dir.empty() ? std::filesystem::temp_directory_path() : options_.staging_dir;
  std::filesystem::create_directories(dir);
  const auto train_path = write_slice(dir, "concord-train", train_pairs, Split::train);
  const auto val_path = write_slice(dir, "concord-val", val_pairs, Split::val);

  nlohmann::json request{{"train_uri", "file://" + train_path.string()},
                         {"val_uri", "file://" + val_path.string()},
                         {"config", config.is_null() ? nlohmann::json::object() : config}};
  auto client = make_client(endpoint_, options_);
  const auto body = checked_body(client.Post("/v1/train", request.dump(), "application/json"), "POST /v1/train");
  if (!body.is_object() || !body.contains("job_id") || !body["job_id"].is_string()) {
    throw BackendError("train response lacks a job_id");
  }
  return {body["job_id"].get<std::string>(), JobStatus::running, ""};
}

TrainJob RemoteBackend::poll(const std::string& job_id) {
  auto client = make_client(endpoint_, options_);
  const auto path = "/v1/train/" + httplib::detail::encode_url(job_id);
  return job_from_json(checked_body(client.Get(path), "GET " + path), job_id);
}

std::vector<PredictionRecord> RemoteBackend::predict(std::span<const PairInstance> pairs) {
  if (pairs.empty()) throw EmptyDomainError("predict needs at least one pair");
  const std::size_t batch = options_.batch_size;
  const std::size_t n_batches = (pairs.size() + batch - 1) / batch;
  std::vector<std::vector<PredictionRecord>> results(n_batches);

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto worker = [&] {
    try {
      auto client = make_client(endpoint_, options_);
      for (;;) {
        const auto b = next.fetch_add(1);
        if (b >= n_batches || failed.load()) return;
        const auto chunk = pairs.subspan(b * batch, std::min(batch, pairs.size() - b * batch));
        const auto body = checked_body(
            client.Post("/v1/predict", predict_request_json(chunk).dump(), "application/json"),
            "POST /v1/predict");
        results[b] = parse_predict_response(body, chunk, options_.threshold);
      }
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
      failed = true;
    }
  };

  const std::size_t n_workers = std::min(options_.max_in_flight, n_batches);
  std::vector<std::thread> threads;
  threads.reserve(n_workers);
  for (std::size_t i = 0; i < n_workers; ++i) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);

  std::vector<PredictionRecord> out;
  out.reserve(pairs.size());
  for (auto& r : results) std::move(r.begin(), r.end(), std::back_inserter(out));
  return out;
}

}  // namespace concord
