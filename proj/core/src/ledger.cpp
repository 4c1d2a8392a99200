#include <algorithm>
#include <fstream>
#include <istream>
#include <set>
#include <unordered_map>

#include "concord/error.hpp"
#include "concord/triage.hpp"
#include "util.hpp"

namespace concord {

std::string_view to_string(VerdictCategory category) {
  switch (category) {
    case VerdictCategory::prediction_error: return "prediction_error";
    case VerdictCategory::annotation_error: return "annotation_error";
    case VerdictCategory::prep_error: return "prep_error";
  }
  return "prediction_error";
}

VerdictCategory verdict_category_from_string(std::string_view text) {
  if (text == "prediction_error" || text == "pred") return VerdictCategory::prediction_error;
  if (text == "annotation_error" || text == "ann") return VerdictCategory::annotation_error;
  if (text == "prep_error" || text == "prep") return VerdictCategory::prep_error;
  throw ValidationError("unknown verdict category '" + std::string(text) +
                        "' (expected prediction_error, annotation_error or prep_error)");
}

nlohmann::ordered_json to_json(const RevisionAction& action) {
  nlohmann::ordered_json j;
  std::visit(
      [&](const auto& a) {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, RelabelTurn>) {
          j["type"] = "relabel_turn";
          j["turn_id"] = a.turn_id;
          j["new_label"] = a.new_label.value();
        } else if constexpr (std::is_same_v<T, MergeLabels>) {
          j["type"] = "merge_labels";
          j["source"] = a.source.value();
          j["target"] = a.target.value();
        } else {
          j["type"] = "edit_text";
          j["turn_id"] = a.turn_id;
          j["new_text"] = a.new_text;
        }
      },
      action);
  return j;
}

namespace {

std::string string_field(const nlohmann::json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_string()) throw ValidationError(std::string("missing string field '") + key + "'");
  return it->get<std::string>();
}

}  // namespace

RevisionAction revision_action_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("revision action must be an object");
  const auto type = string_field(j, "type");
  if (type == "relabel_turn") return RelabelTurn{string_field(j, "turn_id"), AnnotationLabel(string_field(j, "new_label"))};
  if (type == "merge_labels") {
    return MergeLabels{AnnotationLabel(string_field(j, "source")), AnnotationLabel(string_field(j, "target"))};
  }
  if (type == "edit_text") return EditText{string_field(j, "turn_id"), string_field(j, "new_text")};
  throw ValidationError("unknown revision type '" + type + "'");
}

std::string format_timestamp(std::chrono::sys_seconds instant) { return detail::format_iso8601(instant); }

std::chrono::sys_seconds parse_timestamp(std::string_view text) { return detail::parse_iso8601(text); }

nlohmann::ordered_json to_json(const LedgerEntry& e) {
  nlohmann::ordered_json j;
  j["rev_id"] = e.rev_id;
  j["timestamp"] = detail::format_iso8601(e.timestamp);
  j["actor"] = e.actor;
  if (e.event == LedgerEvent::round_advanced) {
    j["event"] = "round_advanced";
    j["round"] = e.round;
  } else {
    j["pair_id"] = e.pair_id;
    j["category"] = std::string(to_string(e.category));
    j["action"] = e.action ? to_json(*e.action) : nlohmann::ordered_json(nullptr);
    j["round"] = e.round;
    j["note"] = e.note;
  }
  if (e.idempotency_key) j["idempotency_key"] = *e.idempotency_key;
  return j;
}

LedgerEntry ledger_entry_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("ledger entry must be an object");
  LedgerEntry e;
  const auto rev = j.find("rev_id");
  if (rev == j.end() || !rev->is_number_unsigned()) throw ValidationError("missing rev_id");
  e.rev_id = rev->get<std::uint64_t>();
  e.timestamp = detail::parse_iso8601(string_field(j, "timestamp"));
  e.actor = string_field(j, "actor");
  if (const auto it = j.find("round"); it != j.end()) {
    if (!it->is_number_unsigned() || it->get<std::uint64_t>() == 0) throw ValidationError("round must be >= 1");
    e.round = it->get<std::uint32_t>();
  }
  if (const auto it = j.find("idempotency_key"); it != j.end() && it->is_string()) {
    e.idempotency_key = it->get<std::string>();
  }
  const auto ev = j.find("event");
  if (ev != j.end() && *ev == "round_advanced") {
    e.event = LedgerEvent::round_advanced;
    if (!j.contains("round")) throw ValidationError("round_advanced entry without round");
    return e;
  }
  if (ev != j.end() && *ev != "verdict") throw ValidationError("unknown ledger event");
  e.event = LedgerEvent::verdict;
  e.pair_id = string_field(j, "pair_id");
  e.category = verdict_category_from_string(string_field(j, "category"));
  if (const auto it = j.find("note"); it != j.end() && it->is_string()) e.note = it->get<std::string>();
  if (const auto it = j.find("action"); it != j.end() && !it->is_null()) e.action = revision_action_from_json(*it);
  return e;
}

std::vector<LedgerEntry> read_ledger(std::istream& in) {
  std::vector<LedgerEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    try {
      entries.push_back(ledger_entry_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, e.what());
    } catch (const ValidationError& e) {
      throw ParseError(line_no, e.what());
    }
    if (entries.back().rev_id != entries.size()) {
      throw ParseError(line_no, "rev_id " + std::to_string(entries.back().rev_id) + " out of sequence");
    }
  }
  return entries;
}

std::vector<LedgerEntry> load_ledger(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return {};
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open ledger " + path.string());
  return read_ledger(in);
}

void append_ledger_entry(const std::filesystem::path& path, const LedgerEntry& entry) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw Error("cannot append to ledger " + path.string());
  out << to_json(entry).dump() << '\n';
  out.flush();
  if (!out) throw Error("write to ledger " + path.string() + " failed");
}

std::vector<Revision> staged_revisions(std::span<const LedgerEntry> round_entries) {
  std::unordered_map<std::string, std::uint64_t> latest;
  for (const auto& e : round_entries) {
    if (e.event == LedgerEvent::verdict) latest[e.pair_id] = e.rev_id;
  }
  std::vector<Revision> staged;
  for (const auto& e : round_entries) {
    if (e.event != LedgerEvent::verdict || !e.action || latest.at(e.pair_id) != e.rev_id) continue;
    const bool duplicate = std::any_of(staged.begin(), staged.end(),
                                       [&](const Revision& r) { return r.action == *e.action; });
    if (!duplicate) staged.push_back({e.rev_id, *e.action, e.pair_id});
  }
  return staged;
}

Corpus replay_corpus(const Corpus& base, std::span<const LedgerEntry> ledger, bool include_pending) {
  Corpus corpus = base;
  std::size_t round_begin = 0;
  for (std::size_t i = 0; i < ledger.size(); ++i) {
    if (ledger[i].event != LedgerEvent::round_advanced) continue;
    corpus = apply_revisions(corpus, staged_revisions(ledger.subspan(round_begin, i - round_begin)));
    round_begin = i + 1;
  }
  if (include_pending && round_begin < ledger.size()) {
    corpus = apply_revisions(corpus, staged_revisions(ledger.subspan(round_begin)));
  }
  return corpus;
}

}  // namespace concord
