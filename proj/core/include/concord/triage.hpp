#pragma once

// Human triage of model/annotation disagreements and the revision cycle:
// disagreements -> verdicts -> revisions -> new corpus version -> new round.

#include <array>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "concord/classifier.hpp"
#include "concord/corpus.hpp"
#include "concord/evaluation.hpp"
#include "concord/pairs.hpp"

namespace concord {

enum class VerdictCategory { prediction_error = 0, annotation_error = 1, prep_error = 2 };
inline constexpr std::size_t kVerdictCategoryCount = 3;

std::string_view to_string(VerdictCategory category);
VerdictCategory verdict_category_from_string(std::string_view text);

struct Verdict {
  std::string pair_id;
  VerdictCategory category = VerdictCategory::prediction_error;
  std::string note;
  std::string actor;
  std::chrono::sys_seconds timestamp{};

  bool operator==(const Verdict&) const = default;
};

struct RelabelTurn {
  std::string turn_id;
  AnnotationLabel new_label;
  bool operator==(const RelabelTurn&) const = default;
};

struct MergeLabels {
  AnnotationLabel source;
  AnnotationLabel target;
  bool operator==(const MergeLabels&) const = default;
};

struct EditText {
  std::string turn_id;
  std::string new_text;
  bool operator==(const EditText&) const = default;
};

using RevisionAction = std::variant<RelabelTurn, MergeLabels, EditText>;

struct Revision {
  std::uint64_t rev_id = 0;
  RevisionAction action;
  std::string provenance;  // pair_id of the triggering verdict

  bool operator==(const Revision&) const = default;
};

/// Checks an action against a corpus: the turn exists (and is a questioner
/// turn for RelabelTurn), merge source differs from target, new text is not
/// blank. Throws ValidationError.
void validate_action(const RevisionAction& action, const Corpus& corpus);

/// Applies revisions in order and returns the next corpus version. Throws
/// ConflictError naming the revision that references a turn or label that no
/// longer exists at its point in the sequence.
Corpus apply_revisions(const Corpus& corpus, std::span<const Revision> revisions);

nlohmann::ordered_json to_json(const RevisionAction& action);
RevisionAction revision_action_from_json(const nlohmann::json& j);

// Ledger

enum class LedgerEvent { verdict, round_advanced };

/// One line of the append-only ledger. Verdict entries carry the verdict and
/// its optional action; round_advanced entries mark the end of a round.
struct LedgerEntry {
  std::uint64_t rev_id = 0;
  LedgerEvent event = LedgerEvent::verdict;
  std::chrono::sys_seconds timestamp{};
  std::string actor;
  std::uint32_t round = 1;  // round the verdict belongs to, or the round being entered
  std::string pair_id;
  VerdictCategory category = VerdictCategory::prediction_error;
  std::string note;
  std::optional<RevisionAction> action;
  std::optional<std::string> idempotency_key;

  bool operator==(const LedgerEntry&) const = default;
};

/// ISO 8601 UTC timestamps as written to the ledger ("2020-03-01T12:00:00Z").
/// Parsing accepts a "Z" or "+00:00" suffix and drops fractional seconds.
std::string format_timestamp(std::chrono::sys_seconds instant);
std::chrono::sys_seconds parse_timestamp(std::string_view text);

nlohmann::ordered_json to_json(const LedgerEntry& entry);
LedgerEntry ledger_entry_from_json(const nlohmann::json& j);

/// Throws ParseError with the line number of a malformed entry.
std::vector<LedgerEntry> read_ledger(std::istream& in);
/// A missing file is an empty ledger.
std::vector<LedgerEntry> load_ledger(const std::filesystem::path& path);
void append_ledger_entry(const std::filesystem::path& path, const LedgerEntry& entry);

/// Revisions implied by a round's ledger entries: the latest verdict per
/// pair wins, and an action identical to one already staged is not staged
/// twice. Order is ledger order.
std::vector<Revision> staged_revisions(std::span<const LedgerEntry> round_entries);

/// Corpus obtained by applying every round's staged revisions in ledger
/// order. With `include_pending`, revisions of the unfinished last round are
/// applied as well. Runs no classifier.
Corpus replay_corpus(const Corpus& base, std::span<const LedgerEntry> ledger, bool include_pending = true);

// Rounds

enum class EvalScope { test, all };

std::string_view to_string(EvalScope scope);
EvalScope eval_scope_from_string(std::string_view text);

struct PipelineConfig {
  std::size_t min_count = 2;
  SplitSpec split;
  /// Which pairs are predicted, scored and triaged.
  EvalScope scope = EvalScope::test;
  bool balance = false;
  nlohmann::json train_config = nlohmann::json::object();
};

struct RoundState {
  std::uint32_t round = 1;
  std::shared_ptr<const Corpus> corpus;
  std::shared_ptr<const PairDataset> dataset;
  std::string model;
  MetricsReport metrics;
  std::vector<Disagreement> disagreements;  // ranked
  std::vector<LedgerEntry> verdicts;        // this round's verdict entries, ledger order
  std::uint64_t next_rev_id = 1;

  std::uint64_t corpus_version() const { return corpus->version_id(); }
  std::size_t total() const { return disagreements.size(); }
  std::size_t closed_count() const { return latest_.size(); }
  std::size_t open_count() const { return total() - closed_count(); }

  const Disagreement* find_disagreement(std::string_view pair_id) const;
  /// nullptr while the pair is open.
  const LedgerEntry* latest_verdict(std::string_view pair_id) const;
  bool is_open(std::string_view pair_id) const { return latest_verdict(pair_id) == nullptr; }
  /// Index of the first open disagreement in ranked order, or total().
  std::size_t first_open_index() const;
  std::vector<Revision> staged() const { return staged_revisions(verdicts); }
  /// Latest-verdict counts per category.
  std::array<std::size_t, kVerdictCategoryCount> tallies() const;

 private:
  friend RoundState run_round(std::shared_ptr<const Corpus>, std::uint32_t, const PipelineConfig&,
                              ClassifierBackend&, std::uint64_t);
  friend RoundState record_verdict(RoundState, const LedgerEntry&);

  std::unordered_map<std::string, std::size_t> index_;   // pair_id -> disagreements position
  std::unordered_map<std::string, std::size_t> latest_;  // pair_id -> verdicts position
};

/// Builds, splits, trains, predicts, evaluates and ranks disagreements.
RoundState run_round(std::shared_ptr<const Corpus> corpus, std::uint32_t round, const PipelineConfig& config,
                     ClassifierBackend& backend, std::uint64_t next_rev_id = 1);

/// Adds a verdict. The pair must be a disagreement of the round; a later
/// verdict on the same pair supersedes the earlier one. Annotation and
/// preparation errors need an action, prediction errors must not have one.
/// `entry.rev_id` must equal state.next_rev_id (0 assigns it).
RoundState record_verdict(RoundState state, const LedgerEntry& entry);
RoundState record_verdict(RoundState state, const Verdict& verdict, std::optional<RevisionAction> action,
                          std::optional<std::string> idempotency_key = std::nullopt);

/// Applies the staged revisions and runs the next round from scratch. Throws
/// StateError while disagreements are still open. Consumes one rev_id for
/// the round marker.
RoundState next_round(const RoundState& state, const PipelineConfig& config, ClassifierBackend& backend);

nlohmann::ordered_json round_report_json(const RoundState& state);

/// A corpus plus its ledger, replayed into the current round. Appends go to
/// the ledger file when one is configured. Not thread-safe; callers
/// serialize mutations.
class TriageSession {
 public:
  TriageSession(Corpus base, std::vector<LedgerEntry> ledger, PipelineConfig config,
                std::shared_ptr<ClassifierBackend> backend, std::optional<std::filesystem::path> ledger_path = {});

  static TriageSession open(const std::filesystem::path& corpus_path, const std::filesystem::path& ledger_path,
                            PipelineConfig config, std::shared_ptr<ClassifierBackend> backend);

  const RoundState& current() const { return *rounds_.back(); }
  std::shared_ptr<const RoundState> current_ptr() const { return rounds_.back(); }
  /// Every round so far, index 0 is round 1.
  const std::vector<std::shared_ptr<const RoundState>>& rounds() const { return rounds_; }
  const std::vector<LedgerEntry>& ledger() const { return ledger_; }
  const Corpus& base_corpus() const { return base_; }

  /// Entry previously written with this idempotency key, if any.
  const LedgerEntry* find_by_idempotency_key(std::string_view key) const;

  const LedgerEntry& add_verdict(const Verdict& verdict, std::optional<RevisionAction> action,
                                 std::optional<std::string> idempotency_key = std::nullopt);
  const LedgerEntry& advance_round(const std::string& actor, std::chrono::sys_seconds timestamp,
                                   std::optional<std::string> idempotency_key = std::nullopt);

 private:
  void persist(const LedgerEntry& entry);

  Corpus base_;
  std::vector<LedgerEntry> ledger_;
  PipelineConfig config_;
  std::shared_ptr<ClassifierBackend> backend_;
  std::optional<std::filesystem::path> ledger_path_;
  std::vector<std::shared_ptr<const RoundState>> rounds_;
};

}  // namespace concord
