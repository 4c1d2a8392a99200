#pragma once

// Paraphrase-pair datasets built from annotated questions: two questions are
// a positive pair iff they carry the same label. Every ordered pair (i, j),
// i != j, is emitted, so n questions give n(n-1) pairs.

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "concord/corpus.hpp"

namespace concord {

enum class Split : std::uint8_t { train = 0, val = 1, test = 2 };
inline constexpr std::size_t kSplitCount = 3;
inline constexpr std::array<Split, kSplitCount> kAllSplits{Split::train, Split::val, Split::test};

std::string_view to_string(Split split);
Split split_from_string(std::string_view text);

struct PairInstance {
  std::string pair_id;  // "<q1_id>::<q2_id>"
  std::string q1_id;
  std::string q2_id;
  std::string text1;
  std::string text2;
  int gold = 0;

  bool operator==(const PairInstance&) const = default;
};

std::string make_pair_id(std::string_view q1_id, std::string_view q2_id);

struct PartitionStats {
  std::size_t n_pairs = 0;
  std::size_t n_positive = 0;
  double positive_ratio = 0.0;

  bool operator==(const PartitionStats&) const = default;
};

struct DatasetStats {
  std::size_t n_questions = 0;
  std::size_t n_pairs = 0;
  std::size_t n_positive = 0;
  double positive_ratio = 0.0;
  std::array<PartitionStats, kSplitCount> per_split{};

  bool operator==(const DatasetStats&) const = default;
};

/// Train/val/test request. Either fractions (apportioned by largest
/// remainder) or exact partition sizes.
struct SplitSpec {
  /// Defaults reproduce a 200000 / 14306 / 80000 partition of 294306 pairs.
  std::array<double, kSplitCount> fractions{200000.0 / 294306.0, 14306.0 / 294306.0,
                                            80000.0 / 294306.0};
  std::optional<std::array<std::size_t, kSplitCount>> sizes;
  std::uint64_t seed = 20;
  bool stratified = true;
  /// Keep every pair of a question in one partition; pairs whose questions
  /// fall in different partitions are dropped.
  bool group_by_question = false;

  /// Throws ValidationError for out-of-range fractions or a sum != 1.
  void validate() const;
};

/// Pairs sorted by pair_id, plus an optional partition assignment
/// (`split_of[i]` belongs to `pairs[i]`; empty when unsplit).
struct PairDataset {
  std::vector<PairInstance> pairs;
  std::vector<Split> split_of;
  DatasetStats stats;
  std::uint64_t seed = 0;

  bool is_split() const noexcept { return !split_of.empty(); }
  std::optional<Split> split_of_pair(std::string_view pair_id) const;
  std::vector<PairInstance> slice(Split split) const;

  /// Seed is provenance only and does not take part in equality.
  bool operator==(const PairDataset& other) const {
    return pairs == other.pairs && split_of == other.split_of && stats == other.stats;
  }
};

/// Questions whose label occurs at least `min_count` times, in corpus order.
std::vector<AnnotatedQuestion> filter_hapaxes(const Corpus& corpus, std::size_t min_count = 2);

/// All ordered pairs of distinct questions. Throws EmptyDomainError for
/// fewer than two questions and ValidationError for repeated turn ids.
PairDataset build_pairs(std::span<const AnnotatedQuestion> questions);

/// Assigns every pair to a partition. Deterministic in (dataset, spec): pairs
/// are ordered by pair_id, then shuffled with a seeded Fisher-Yates. When
/// stratified, positives and negatives are apportioned and shuffled
/// separately so each partition's positive count is within one of its
/// proportional share. Throws StratificationError when a partition that was
/// asked for receives none of a non-empty class.
PairDataset split(PairDataset dataset, const SplitSpec& spec);

/// Keeps all positives and a seeded sample of as many negatives. Drops any
/// existing split assignment.
PairDataset balance(const PairDataset& dataset, std::uint64_t seed);

/// Recomputes `stats` from pairs and assignments.
DatasetStats compute_stats(const std::vector<PairInstance>& pairs, const std::vector<Split>& split_of);

/// Largest-remainder apportionment of `total` proportionally to `weights`.
/// Ties in the remainder go to the earlier partition.
std::array<std::size_t, kSplitCount> apportion(std::size_t total,
                                               const std::array<double, kSplitCount>& weights);

/// Pairs TSV: header then one row per pair; tab, newline and backslash in
/// text are escaped as \t, \n and \\. Requires a split dataset.
void export_pairs(const PairDataset& dataset, std::ostream& sink);
void save_pairs(const PairDataset& dataset, const std::filesystem::path& path);
/// Throws ParseError with the 1-based line number of a malformed row.
PairDataset import_pairs(std::istream& source);
PairDataset load_pairs(const std::filesystem::path& path);

inline constexpr std::string_view kPairsTsvHeader =
    "pair_id\tq1_id\tq2_id\tlabel\tsplit\ttext1\ttext2";

std::string escape_tsv_field(std::string_view text);
std::string unescape_tsv_field(std::string_view text);

}  // namespace concord
