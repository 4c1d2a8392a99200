#include "concord/triage.hpp"

#include <algorithm>
#include <unordered_map>

#include "concord/error.hpp"
#include "util.hpp"

namespace concord {

std::string_view to_string(EvalScope scope) { return scope == EvalScope::test ? "test" : "all"; }

EvalScope eval_scope_from_string(std::string_view text) {
  if (text == "test") return EvalScope::test;
  if (text == "all") return EvalScope::all;
  throw ValidationError("unknown evaluation scope '" + std::string(text) + "' (expected test or all)");
}

namespace {

bool label_occurs(const Corpus& corpus, const AnnotationLabel& label) {
  return std::any_of(corpus.questions().begin(), corpus.questions().end(),
                     [&](const AnnotatedQuestion& q) { return q.label == label; });
}

}  // namespace

void validate_action(const RevisionAction& action, const Corpus& corpus) {
  if (const auto* r = std::get_if<RelabelTurn>(&action)) {
    const auto* turn = corpus.find_turn(r->turn_id);
    if (turn == nullptr) throw ValidationError("relabel target turn '" + r->turn_id + "' does not exist");
    if (turn->speaker != Speaker::questioner) {
      throw ValidationError("relabel target turn '" + r->turn_id + "' is not a question turn");
    }
  } else if (const auto* m = std::get_if<MergeLabels>(&action)) {
    if (m->source == m->target) throw ValidationError("merge source and target are the same label");
  } else if (const auto* e = std::get_if<EditText>(&action)) {
    if (corpus.find_turn(e->turn_id) == nullptr) {
      throw ValidationError("edit target turn '" + e->turn_id + "' does not exist");
    }
    if (detail::trim(e->new_text).empty()) throw ValidationError("replacement text is empty");
  }
}

Corpus apply_revisions(const Corpus& corpus, std::span<const Revision> revisions) {
  auto dialogs = corpus.dialogs();
  std::unordered_map<std::string, Turn*> turns;
  for (auto& d : dialogs) {
    for (auto& t : d.turns) turns.emplace(t.turn_id, &t);
  }
  auto turn_for = [&](std::uint64_t rev_id, const std::string& turn_id) -> Turn& {
    const auto it = turns.find(turn_id);
    if (it == turns.end()) throw ConflictError(rev_id, "turn '" + turn_id + "' does not exist");
    return *it->second;
  };

  for (const auto& rev : revisions) {
    if (const auto* r = std::get_if<RelabelTurn>(&rev.action)) {
      auto& turn = turn_for(rev.rev_id, r->turn_id);
      if (turn.speaker != Speaker::questioner) {
        throw ConflictError(rev.rev_id, "turn '" + r->turn_id + "' is not a question turn");
      }
      turn.annotation = r->new_label;
    } else if (const auto* m = std::get_if<MergeLabels>(&rev.action)) {
      if (m->source == m->target) throw ConflictError(rev.rev_id, "merge source equals target");
      std::size_t rewritten = 0;
      for (auto& d : dialogs) {
        for (auto& t : d.turns) {
          if (t.annotation && *t.annotation == m->source) {
            t.annotation = m->target;
            ++rewritten;
          }
        }
      }
      if (rewritten == 0) throw ConflictError(rev.rev_id, "label '" + m->source.value() + "' no longer occurs");
    } else if (const auto* e = std::get_if<EditText>(&rev.action)) {
      auto& turn = turn_for(rev.rev_id, e->turn_id);
      if (detail::trim(e->new_text).empty()) throw ConflictError(rev.rev_id, "replacement text is empty");
      turn.text = e->new_text;
    }
  }
  return corpus.revised(std::move(dialogs));
}

// RoundState

const Disagreement* RoundState::find_disagreement(std::string_view pair_id) const {
  const auto it = index_.find(std::string(pair_id));
  return it == index_.end() ? nullptr : &disagreements[it->second];
}

const LedgerEntry* RoundState::latest_verdict(std::string_view pair_id) const {
  const auto it = latest_.find(std::string(pair_id));
  return it == latest_.end() ? nullptr : &verdicts[it->second];
}

std::size_t RoundState::first_open_index() const {
  for (std::size_t i = 0; i < disagreements.size(); ++i) {
    if (is_open(disagreements[i].pair.pair_id)) return i;
  }
  return disagreements.size();
}

std::array<std::size_t, kVerdictCategoryCount> RoundState::tallies() const {
  std::array<std::size_t, kVerdictCategoryCount> counts{};
  for (const auto& [pair_id, pos] : latest_) ++counts[static_cast<std::size_t>(verdicts[pos].category)];
  return counts;
}

RoundState run_round(std::shared_ptr<const Corpus> corpus, std::uint32_t round, const PipelineConfig& config,
                     ClassifierBackend& backend, std::uint64_t next_rev_id) {
  auto dataset = build_pairs(filter_hapaxes(*corpus, config.min_count));
  if (config.balance) dataset = balance(dataset, config.split.seed);
  dataset = split(std::move(dataset), config.split);

  const auto train = dataset.slice(Split::train);
  const auto val = dataset.slice(Split::val);
  wait_for_training(backend, backend.train(train, val, config.train_config));

  const std::vector<PairInstance> eval_pairs = config.scope == EvalScope::test ? dataset.slice(Split::test)
                                                                               : dataset.pairs;
  const auto predictions = backend.predict(eval_pairs);

  RoundState state;
  state.round = round;
  state.model = backend.model_name();
  state.metrics = evaluate(predictions, eval_pairs);
  state.disagreements = extract_disagreements(predictions, eval_pairs, *corpus);
  for (std::size_t i = 0; i < state.disagreements.size(); ++i) {
    state.index_.emplace(state.disagreements[i].pair.pair_id, i);
  }
  state.corpus = std::move(corpus);
  state.dataset = std::make_shared<const PairDataset>(std::move(dataset));
  state.next_rev_id = next_rev_id;
  return state;
}

RoundState record_verdict(RoundState state, const LedgerEntry& entry) {
  if (entry.event != LedgerEvent::verdict) throw ValidationError("not a verdict entry");
  if (entry.rev_id != 0 && entry.rev_id != state.next_rev_id) {
    throw StateError("verdict rev_id " + std::to_string(entry.rev_id) + " but the ledger is at " +
                     std::to_string(state.next_rev_id));
  }
  if (entry.round != state.round) {
    throw StateError("verdict for round " + std::to_string(entry.round) + " while round " +
                     std::to_string(state.round) + " is active");
  }
  if (state.find_disagreement(entry.pair_id) == nullptr) {
    throw ValidationError("pair '" + entry.pair_id + "' is not a disagreement of round " +
                          std::to_string(state.round));
  }
  if (entry.category == VerdictCategory::prediction_error) {
    if (entry.action) throw ValidationError("a prediction_error verdict cannot carry a revision");
  } else if (!entry.action) {
    throw ValidationError(std::string(to_string(entry.category)) + " verdict requires a revision");
  }
  if (entry.action) {
    validate_action(*entry.action, *state.corpus);
    if (const auto* m = std::get_if<MergeLabels>(&*entry.action); m && !label_occurs(*state.corpus, m->source)) {
      throw ValidationError("merge source label '" + m->source.value() + "' does not occur in the corpus");
    }
  }

  auto recorded = entry;
  recorded.rev_id = state.next_rev_id++;
  state.verdicts.push_back(std::move(recorded));
  state.latest_[entry.pair_id] = state.verdicts.size() - 1;
  return state;
}

RoundState record_verdict(RoundState state, const Verdict& verdict, std::optional<RevisionAction> action,
                          std::optional<std::string> idempotency_key) {
  LedgerEntry entry;
  entry.event = LedgerEvent::verdict;
  entry.timestamp = verdict.timestamp;
  entry.actor = verdict.actor;
  entry.round = state.round;
  entry.pair_id = verdict.pair_id;
  entry.category = verdict.category;
  entry.note = verdict.note;
  entry.action = std::move(action);
  entry.idempotency_key = std::move(idempotency_key);
  return record_verdict(std::move(state), entry);
}

RoundState next_round(const RoundState& state, const PipelineConfig& config, ClassifierBackend& backend) {
  if (state.open_count() > 0) {
    throw StateError(std::to_string(state.open_count()) + " disagreement(s) of round " +
                     std::to_string(state.round) + " are still open");
  }
  const auto revisions = state.staged();
  auto revised = std::make_shared<const Corpus>(apply_revisions(*state.corpus, revisions));
  return run_round(std::move(revised), state.round + 1, config, backend, state.next_rev_id + 1);
}

nlohmann::ordered_json round_report_json(const RoundState& state) {
  nlohmann::ordered_json j;
  j["round"] = state.round;
  j["corpus_version"] = state.corpus_version();
  j["model"] = state.model;
  j["n_questions"] = state.dataset->stats.n_questions;
  j["n_pairs"] = state.dataset->stats.n_pairs;
  j["n_positive"] = state.dataset->stats.n_positive;
  j["metrics"] = to_json(state.metrics);
  j["disagreements"] = {{"total", state.total()}, {"open", state.open_count()}, {"closed", state.closed_count()}};
  const auto t = state.tallies();
  nlohmann::ordered_json tallies;
  for (std::size_t c = 0; c < kVerdictCategoryCount; ++c) {
    tallies[std::string(to_string(static_cast<VerdictCategory>(c)))] = t[c];
  }
  j["verdict_tallies"] = std::move(tallies);
  auto staged = nlohmann::ordered_json::array();
  for (const auto& r : state.staged()) {
    staged.push_back({{"rev_id", r.rev_id}, {"provenance", r.provenance}, {"action", to_json(r.action)}});
  }
  j["staged_revisions"] = std::move(staged);
  return j;
}

// TriageSession

TriageSession::TriageSession(Corpus base, std::vector<LedgerEntry> ledger, PipelineConfig config,
                             std::shared_ptr<ClassifierBackend> backend,
                             std::optional<std::filesystem::path> ledger_path)
    : base_(std::move(base)),
      config_(std::move(config)),
      backend_(std::move(backend)),
      ledger_path_(std::move(ledger_path)) {
  if (!backend_) throw ValidationError("triage session needs a backend");
  rounds_.push_back(
      std::make_shared<const RoundState>(run_round(std::make_shared<const Corpus>(base_), 1, config_, *backend_)));
  for (const auto& entry : ledger) {
    const auto& cur = current();
    if (entry.rev_id != cur.next_rev_id) {
      throw StateError("ledger entry " + std::to_string(entry.rev_id) + " out of sequence (expected " +
                       std::to_string(cur.next_rev_id) + ")");
    }
    if (entry.event == LedgerEvent::verdict) {
      rounds_.back() = std::make_shared<const RoundState>(record_verdict(cur, entry));
    } else {
      if (entry.round != cur.round + 1) throw StateError("round marker out of sequence");
      rounds_.push_back(std::make_shared<const RoundState>(next_round(cur, config_, *backend_)));
    }
    ledger_.push_back(entry);
  }
}

TriageSession TriageSession::open(const std::filesystem::path& corpus_path, const std::filesystem::path& ledger_path,
                                  PipelineConfig config, std::shared_ptr<ClassifierBackend> backend) {
  return TriageSession(load_corpus(corpus_path), load_ledger(ledger_path), std::move(config), std::move(backend),
                       ledger_path);
}

const LedgerEntry* TriageSession::find_by_idempotency_key(std::string_view key) const {
  for (const auto& e : ledger_) {
    if (e.idempotency_key && *e.idempotency_key == key) return &e;
  }
  return nullptr;
}

void TriageSession::persist(const LedgerEntry& entry) {
  if (ledger_path_) append_ledger_entry(*ledger_path_, entry);
}

const LedgerEntry& TriageSession::add_verdict(const Verdict& verdict, std::optional<RevisionAction> action,
                                              std::optional<std::string> idempotency_key) {
  auto next = record_verdict(current(), verdict, std::move(action), std::move(idempotency_key));
  const auto& entry = next.verdicts.back();
  persist(entry);
  ledger_.push_back(entry);
  rounds_.back() = std::make_shared<const RoundState>(std::move(next));
  return ledger_.back();
}

const LedgerEntry& TriageSession::advance_round(const std::string& actor, std::chrono::sys_seconds timestamp,
                                                std::optional<std::string> idempotency_key) {
  const auto& cur = current();
  auto next = next_round(cur, config_, *backend_);
  LedgerEntry marker;
  marker.rev_id = cur.next_rev_id;
  marker.event = LedgerEvent::round_advanced;
  marker.timestamp = timestamp;
  marker.actor = actor;
  marker.round = next.round;
  marker.idempotency_key = std::move(idempotency_key);
  persist(marker);
  ledger_.push_back(std::move(marker));
  rounds_.push_back(std::make_shared<const RoundState>(std::move(next)));
  return ledger_.back();
}

}  // namespace concord
