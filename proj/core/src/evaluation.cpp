#include "concord/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <unordered_map>

#include "concord/error.hpp"

namespace concord {

MetricsReport metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
  MetricsReport m;
  m.tp = tp;
  m.fp = fp;
  m.tn = tn;
  m.fn = fn;
  m.n = tp + fp + tn + fn;
  if (m.n == 0) throw EmptyDomainError("cannot evaluate an empty slice");
  const auto n = static_cast<double>(m.n);
  m.accuracy = static_cast<double>(tp + tn) / n;
  if (tp + fp > 0) m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (m.precision && m.recall && *m.precision + *m.recall > 0) {
    m.f1 = 2 * *m.precision * *m.recall / (*m.precision + *m.recall);
  }
  const double positive_ratio = static_cast<double>(tp + fn) / n;
  m.majority_baseline_accuracy = std::max(positive_ratio, 1.0 - positive_ratio);
  const auto errors = fp + fn;
  if (errors > 0) {
    // Ratio of error counts; both errors share the denominator n.
    const double baseline_errors = static_cast<double>(std::min(tp + fn, fp + tn));
    m.error_reduction_vs_baseline = baseline_errors / static_cast<double>(errors);
  }
  return m;
}

namespace {

// Maps each gold pair_id to its index, verifying exact coverage.
std::vector<std::size_t> align(std::span<const PredictionRecord> predictions, std::span<const PairInstance> gold) {
  std::unordered_map<std::string_view, std::size_t> index;
  index.reserve(gold.size());
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (!index.emplace(gold[i].pair_id, i).second) {
      throw CoverageError("gold slice repeats pair " + gold[i].pair_id);
    }
  }
  std::vector<std::size_t> position(predictions.size());
  std::vector<bool> seen(gold.size(), false);
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    const auto it = index.find(predictions[k].pair_id);
    if (it == index.end()) throw CoverageError("prediction for unknown pair " + predictions[k].pair_id);
    if (seen[it->second]) throw CoverageError("pair " + predictions[k].pair_id + " predicted twice");
    seen[it->second] = true;
    position[k] = it->second;
  }
  if (predictions.size() != gold.size()) {
    const auto missing = std::find(seen.begin(), seen.end(), false) - seen.begin();
    throw CoverageError("no prediction for pair " + gold[static_cast<std::size_t>(missing)].pair_id);
  }
  return position;
}

}  // namespace

MetricsReport evaluate(std::span<const PredictionRecord> predictions, std::span<const PairInstance> gold) {
  if (gold.empty()) throw EmptyDomainError("cannot evaluate an empty slice");
  const auto position = align(predictions, gold);
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    const bool truth = gold[position[k]].gold == 1;
    const bool said = predictions[k].predicted == 1;
    if (truth && said) {
      ++tp;
    } else if (!truth && said) {
      ++fp;
    } else if (!truth) {
      ++tn;
    } else {
      ++fn;
    }
  }
  return metrics_from_counts(tp, fp, tn, fn);
}

std::vector<Disagreement> extract_disagreements(std::span<const PredictionRecord> predictions,
                                                std::span<const PairInstance> gold, const Corpus& corpus) {
  const auto position = align(predictions, gold);
  auto label_of = [&](const std::string& turn_id) {
    const auto* turn = corpus.find_turn(turn_id);
    if (turn == nullptr || !turn->annotation) {
      throw ValidationError("pair references turn " + turn_id + " which has no annotation in the corpus");
    }
    return *turn->annotation;
  };

  std::vector<Disagreement> out;
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    const auto& pair = gold[position[k]];
    const auto& pred = predictions[k];
    if (pair.gold == pred.predicted) continue;
    out.push_back({pair, pair.gold, pred.predicted, pred.score, label_of(pair.q1_id), label_of(pair.q2_id)});
  }
  std::sort(out.begin(), out.end(), [](const Disagreement& a, const Disagreement& b) {
    const double ca = std::abs(a.score - 0.5);
    const double cb = std::abs(b.score - 0.5);
    if (ca != cb) return ca > cb;
    return a.pair.pair_id < b.pair.pair_id;
  });
  return out;
}

std::string format_percent(double ratio) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f%%", ratio * 100.0);
  return buf;
}

nlohmann::ordered_json to_json(const MetricsReport& m) {
  auto opt = [](const std::optional<double>& v) -> nlohmann::ordered_json {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  auto opt_pct = [](const std::optional<double>& v) -> nlohmann::ordered_json {
    return v ? nlohmann::ordered_json(format_percent(*v)) : nlohmann::ordered_json(nullptr);
  };
  nlohmann::ordered_json j;
  j["n"] = m.n;
  j["tp"] = m.tp;
  j["fp"] = m.fp;
  j["tn"] = m.tn;
  j["fn"] = m.fn;
  j["accuracy"] = m.accuracy;
  j["precision"] = opt(m.precision);
  j["recall"] = opt(m.recall);
  j["f1"] = opt(m.f1);
  j["majority_baseline_accuracy"] = m.majority_baseline_accuracy;
  j["error_reduction_vs_baseline"] = opt(m.error_reduction_vs_baseline);
  j["percent"] = {{"accuracy", format_percent(m.accuracy)},
                  {"precision", opt_pct(m.precision)},
                  {"recall", opt_pct(m.recall)},
                  {"f1", opt_pct(m.f1)},
                  {"majority_baseline_accuracy", format_percent(m.majority_baseline_accuracy)},
                  {"error", format_percent(1.0 - m.accuracy)}};
  return j;
}

nlohmann::ordered_json to_json(const Disagreement& d) {
  nlohmann::ordered_json j;
  j["pair_id"] = d.pair.pair_id;
  j["gold"] = d.gold;
  j["predicted"] = d.predicted;
  j["score"] = d.score;
  j["label1"] = d.label1.value();
  j["label2"] = d.label2.value();
  j["text1"] = d.pair.text1;
  j["text2"] = d.pair.text2;
  return j;
}

void write_disagreements(std::span<const Disagreement> queue, std::ostream& out) {
  for (const auto& d : queue) out << to_json(d).dump() << '\n';
}

}  // namespace concord
