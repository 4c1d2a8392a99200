#include "concord/corpus.hpp"

#include <fstream>
#include <istream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <unordered_set>

#include "concord/error.hpp"
#include "util.hpp"

namespace concord {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Speaker speaker) {
  return speaker == Speaker::questioner ? "questioner" : "answerer";
}

Speaker speaker_from_string(std::string_view text) {
  if (text == "questioner") return Speaker::questioner;
  if (text == "answerer") return Speaker::answerer;
  throw ValidationError("unknown speaker '" + std::string(text) + "'");
}

AnnotationLabel::AnnotationLabel(std::string_view raw) : value_(detail::trim(raw)) {
  if (value_.empty()) throw ValidationError("annotation label is empty");
}

Corpus::Corpus() = default;

Corpus Corpus::from_dialogs(std::vector<Dialog> dialogs, std::uint64_t version_id,
                            std::optional<std::uint64_t> parent_version) {
  if (version_id == 0) throw ValidationError("corpus version ids start at 1");
  if (parent_version && *parent_version + 1 != version_id) {
    throw ValidationError("corpus version must be parent version + 1");
  }

  Corpus corpus;
  corpus.version_id_ = version_id;
  corpus.parent_version_ = parent_version;

  for (std::size_t d = 0; d < dialogs.size(); ++d) {
    auto& dialog = dialogs[d];
    if (dialog.dialog_id.empty()) throw ValidationError("dialog_id is empty");
    if (!corpus.dialog_index_.emplace(dialog.dialog_id, d).second) {
      throw ValidationError("duplicate dialog_id '" + dialog.dialog_id + "'");
    }
    for (std::size_t t = 0; t < dialog.turns.size(); ++t) {
      auto& turn = dialog.turns[t];
      turn.dialog_id = dialog.dialog_id;
      const std::string where = "dialog '" + dialog.dialog_id + "' turn '" + turn.turn_id + "'";
      if (turn.turn_id.empty()) throw ValidationError("empty turn_id in dialog '" + dialog.dialog_id + "'");
      if (turn.index != t) {
        throw ValidationError(where + ": index " + std::to_string(turn.index) + " but expected " +
                              std::to_string(t) + " (indices must be contiguous from 0)");
      }
      if (detail::trim(turn.text).empty()) throw ValidationError(where + ": text is empty");
      if (turn.annotation && turn.speaker != Speaker::questioner) {
        throw ValidationError(where + ": annotation on an answerer turn");
      }
      if (!corpus.turn_index_.emplace(turn.turn_id, std::make_pair(d, t)).second) {
        throw ValidationError("duplicate turn_id '" + turn.turn_id + "'");
      }
      ++corpus.turn_count_;
      if (turn.annotation) {
        corpus.questions_.push_back({turn.turn_id, turn.dialog_id, turn.text, *turn.annotation});
      }
    }
  }
  corpus.dialogs_ = std::move(dialogs);
  return corpus;
}

Corpus Corpus::revised(std::vector<Dialog> dialogs) const {
  return from_dialogs(std::move(dialogs), version_id_ + 1, version_id_);
}

const Turn* Corpus::find_turn(std::string_view turn_id) const {
  const auto it = turn_index_.find(std::string(turn_id));
  if (it == turn_index_.end()) return nullptr;
  return &dialogs_[it->second.first].turns[it->second.second];
}

const Dialog* Corpus::find_dialog(std::string_view dialog_id) const {
  const auto it = dialog_index_.find(std::string(dialog_id));
  return it == dialog_index_.end() ? nullptr : &dialogs_[it->second];
}

namespace {

const json& require(const json& obj, const char* key, json::value_t type, std::size_t line) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(line, std::string("missing key '") + key + "'");
  const bool ok = type == json::value_t::number_unsigned ? it->is_number_integer()
                                                         : it->type() == type;
  if (!ok) throw ParseError(line, std::string("key '") + key + "' has the wrong type");
  return *it;
}

Dialog dialog_from_json(const json& obj, std::size_t line) {
  if (!obj.is_object()) throw ParseError(line, "expected a dialog object");
  Dialog dialog;
  dialog.dialog_id = require(obj, "dialog_id", json::value_t::string, line).get<std::string>();
  for (const auto& p : require(obj, "participants", json::value_t::array, line)) {
    if (!p.is_string()) throw ParseError(line, "participants must be strings");
    dialog.participants.push_back(p.get<std::string>());
  }
  for (const auto& jt : require(obj, "turns", json::value_t::array, line)) {
    if (!jt.is_object()) throw ParseError(line, "turns must be objects");
    Turn turn;
    turn.turn_id = require(jt, "turn_id", json::value_t::string, line).get<std::string>();
    const auto& index = require(jt, "index", json::value_t::number_unsigned, line);
    if (index.get<long long>() < 0) throw ParseError(line, "turn index is negative");
    turn.index = index.get<std::size_t>();
    try {
      turn.speaker = speaker_from_string(
          require(jt, "speaker", json::value_t::string, line).get<std::string>());
    } catch (const ValidationError& e) {
      throw ParseError(line, e.what());
    }
    turn.text = require(jt, "text", json::value_t::string, line).get<std::string>();
    if (const auto it = jt.find("annotation"); it != jt.end() && !it->is_null()) {
      if (!it->is_string()) throw ParseError(line, "annotation must be a string");
      turn.annotation = AnnotationLabel(it->get<std::string>());
    }
    dialog.turns.push_back(std::move(turn));
  }
  return dialog;
}

ordered_json dialog_to_json(const Dialog& dialog) {
  ordered_json turns = ordered_json::array();
  for (const auto& turn : dialog.turns) {
    ordered_json jt;
    jt["turn_id"] = turn.turn_id;
    jt["index"] = turn.index;
    jt["speaker"] = std::string(to_string(turn.speaker));
    jt["text"] = turn.text;
    if (turn.annotation) jt["annotation"] = turn.annotation->value();
    turns.push_back(std::move(jt));
  }
  ordered_json obj;
  obj["dialog_id"] = dialog.dialog_id;
  obj["participants"] = dialog.participants;
  obj["turns"] = std::move(turns);
  return obj;
}

}  // namespace

Corpus parse_corpus(std::istream& input) {
  std::vector<Dialog> dialogs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(input, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
    }
    try {
      dialogs.push_back(dialog_from_json(obj, line_no));
    } catch (const ValidationError& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return Corpus::from_dialogs(std::move(dialogs));
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open corpus " + path.string());
  return parse_corpus(in);
}

void serialize_corpus(const Corpus& corpus, std::ostream& output) {
  for (const auto& dialog : corpus.dialogs()) {
    output << dialog_to_json(dialog).dump() << '\n';
  }
}

std::string serialize_corpus(const Corpus& corpus) {
  std::ostringstream out;
  serialize_corpus(corpus, out);
  return out.str();
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  detail::write_file_atomic(path, serialize_corpus(corpus));
}

std::map<AnnotationLabel, std::size_t> annotation_histogram(const Corpus& corpus) {
  std::map<AnnotationLabel, std::size_t> counts;
  for (const auto& q : corpus.questions()) ++counts[q.label];
  return counts;
}

}  // namespace concord
