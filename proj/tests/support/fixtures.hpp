#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "concord/classifier.hpp"
#include "concord/corpus.hpp"
#include "concord/triage.hpp"

namespace concord::testing {

/// Two dialogs, six turns, two of them annotated questions.
std::string two_dialog_jsonl();
Corpus two_dialog_corpus();

/// One annotated question per entry of `labels`, each followed by an answer
/// turn, `per_dialog` questions per dialog. Question i has turn id "q<i>".
Corpus corpus_from_labels(const std::vector<std::string>& labels, std::size_t per_dialog = 5);

/// {A:3, C:2} -> {"A","A","A","C","C"}.
std::vector<std::string> expand_counts(const std::vector<std::pair<std::string, std::size_t>>& counts);

/// Label multiplicities with 147 non-hapax labels covering 543 questions and
/// 4588 same-label ordered pairs, followed by 553 hapax labels.
std::vector<std::pair<std::string, std::size_t>> full_scale_label_counts();

/// The counts above as a corpus of 110 dialogs between 25 participants.
Corpus full_scale_corpus();

/// `n_questions` questions with labels drawn uniformly from `n_labels`.
Corpus random_corpus(std::mt19937_64& rng, std::size_t n_questions, std::size_t n_labels);

/// A corpus reproducing the 22 reviewed disagreements of a published error
/// analysis: 16 prediction errors, 4 annotation errors and 2 data
/// preparation errors, with the verdicts a reviewer would give.
struct ScriptedVerdict {
  std::size_t number;
  std::string q1;
  std::string q2;
  VerdictCategory category;
  std::optional<RevisionAction> action;

  std::string pair_id() const { return make_pair_id(q1, q2); }
};

struct ErrorAnalysisFixture {
  Corpus corpus;
  std::vector<ScriptedVerdict> verdicts;
  /// Labels the questions should carry once every annotation error is fixed.
  std::unordered_map<std::string, AnnotationLabel> true_labels;
  /// Pair ids a classifier gets wrong.
  std::set<std::string> flipped_pairs() const;
};

ErrorAnalysisFixture error_analysis_fixture();

/// Predicts gold, except for the listed pair ids whose prediction is
/// flipped. Flipped pairs score 0.9 / 0.1, others 1 / 0.
class ScriptedBackend final : public ClassifierBackend {
 public:
  explicit ScriptedBackend(std::set<std::string> flipped) : flipped_(std::move(flipped)) {}
  std::string model_name() const override { return "scripted"; }
  TrainJob train(std::span<const PairInstance>, std::span<const PairInstance>, const nlohmann::json&) override {
    return {"scripted", JobStatus::succeeded, ""};
  }
  TrainJob poll(const std::string& id) override { return {id, JobStatus::succeeded, ""}; }
  std::vector<PredictionRecord> predict(std::span<const PairInstance> pairs) override;

 private:
  std::set<std::string> flipped_;
};

/// Forwards to a backend that tests can swap between rounds.
class SwitchableBackend final : public ClassifierBackend {
 public:
  explicit SwitchableBackend(std::shared_ptr<ClassifierBackend> initial) : current_(std::move(initial)) {}
  void use(std::shared_ptr<ClassifierBackend> next) {
    std::lock_guard lock(mutex_);
    current_ = std::move(next);
  }
  std::string model_name() const override { return get()->model_name(); }
  TrainJob train(std::span<const PairInstance> t, std::span<const PairInstance> v, const nlohmann::json& c) override {
    return get()->train(t, v, c);
  }
  TrainJob poll(const std::string& id) override { return get()->poll(id); }
  std::vector<PredictionRecord> predict(std::span<const PairInstance> pairs) override { return get()->predict(pairs); }

 private:
  std::shared_ptr<ClassifierBackend> get() const {
    std::lock_guard lock(mutex_);
    return current_;
  }
  mutable std::mutex mutex_;
  std::shared_ptr<ClassifierBackend> current_;
};

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::string slurp(const std::filesystem::path& path);
void spit(const std::filesystem::path& path, const std::string& content);

}  // namespace concord::testing
