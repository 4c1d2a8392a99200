#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "concord/classifier.hpp"
#include "concord/corpus.hpp"
#include "concord/pairs.hpp"

namespace concord {

/// Confusion counts against annotation-derived gold labels.
///
/// Precision, recall and F1 are empty when their denominator is zero rather
/// than reported as 0. error_reduction_vs_baseline is the majority-class
/// error divided by the model error, empty when the model makes no errors.
struct MetricsReport {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
  std::size_t n = 0;
  double accuracy = 0.0;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
  double majority_baseline_accuracy = 0.0;
  std::optional<double> error_reduction_vs_baseline;

  bool operator==(const MetricsReport&) const = default;
};

/// Derives every rate from the four confusion counts.
MetricsReport metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn);

/// Throws CoverageError unless the prediction ids are exactly the gold ids
/// (no missing, extra or repeated ids) and EmptyDomainError for an empty
/// slice.
MetricsReport evaluate(std::span<const PredictionRecord> predictions, std::span<const PairInstance> gold);

struct Disagreement {
  PairInstance pair;
  int gold = 0;
  int predicted = 0;
  double score = 0.0;
  AnnotationLabel label1;
  AnnotationLabel label2;

  bool operator==(const Disagreement&) const = default;
};

/// Pairs where prediction and gold differ, most confident first (descending
/// |score - 0.5|), ties by pair_id. Coverage rules as for evaluate().
std::vector<Disagreement> extract_disagreements(std::span<const PredictionRecord> predictions,
                                                std::span<const PairInstance> gold, const Corpus& corpus);

/// "99.9725%".
std::string format_percent(double ratio);

nlohmann::ordered_json to_json(const MetricsReport& report);
nlohmann::ordered_json to_json(const Disagreement& disagreement);
void write_disagreements(std::span<const Disagreement> queue, std::ostream& out);

}  // namespace concord
