#pragma once

// Annotated dialog corpora: turns, semantic labels, versioned corpus values
// and the JSONL on-disk format (one dialog object per line).

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace concord {

enum class Speaker { questioner, answerer };

std::string_view to_string(Speaker speaker);
Speaker speaker_from_string(std::string_view text);

/// A semantic predicate label such as "e.valence==negative".
///
/// The label is an opaque string: construction trims leading and trailing
/// whitespace and nothing else. Two labels are equal iff the trimmed
/// strings are byte-equal.
class AnnotationLabel {
 public:
  explicit AnnotationLabel(std::string_view raw);

  const std::string& value() const noexcept { return value_; }

  friend bool operator==(const AnnotationLabel&, const AnnotationLabel&) = default;
  friend auto operator<=>(const AnnotationLabel&, const AnnotationLabel&) = default;

 private:
  std::string value_;
};

struct Turn {
  std::string turn_id;
  std::string dialog_id;
  std::size_t index = 0;
  Speaker speaker = Speaker::questioner;
  std::string text;  // verbatim, never normalized
  std::optional<AnnotationLabel> annotation;

  bool operator==(const Turn&) const = default;
};

struct Dialog {
  std::string dialog_id;
  std::vector<std::string> participants;
  std::vector<Turn> turns;

  bool operator==(const Dialog&) const = default;
};

/// A questioner turn together with its label. Holds copies so it stays valid
/// independently of the corpus it came from.
struct AnnotatedQuestion {
  std::string turn_id;
  std::string dialog_id;
  std::string text;
  AnnotationLabel label;

  bool operator==(const AnnotatedQuestion&) const = default;
};

/// Immutable, validated corpus value.
///
/// A revised corpus is a new value whose version is the parent's plus one.
/// Safe to share between threads once constructed.
class Corpus {
 public:
  /// Empty corpus at version 1.
  Corpus();

  /// Validates and indexes `dialogs`. Throws ValidationError when a turn
  /// invariant is broken (duplicate ids, non-contiguous indices, empty text,
  /// annotation on an answerer turn).
  static Corpus from_dialogs(std::vector<Dialog> dialogs, std::uint64_t version_id = 1,
                             std::optional<std::uint64_t> parent_version = std::nullopt);

  /// Builds the child version of this corpus from edited dialogs.
  Corpus revised(std::vector<Dialog> dialogs) const;

  std::uint64_t version_id() const noexcept { return version_id_; }
  std::optional<std::uint64_t> parent_version() const noexcept { return parent_version_; }

  const std::vector<Dialog>& dialogs() const noexcept { return dialogs_; }
  const std::vector<AnnotatedQuestion>& questions() const noexcept { return questions_; }
  std::size_t turn_count() const noexcept { return turn_count_; }

  /// nullptr when the id is unknown.
  const Turn* find_turn(std::string_view turn_id) const;
  const Dialog* find_dialog(std::string_view dialog_id) const;

  /// Same dialogs, ignoring version bookkeeping.
  bool same_content(const Corpus& other) const { return dialogs_ == other.dialogs_; }

  bool operator==(const Corpus& other) const {
    return version_id_ == other.version_id_ && parent_version_ == other.parent_version_ &&
           dialogs_ == other.dialogs_;
  }

 private:
  std::uint64_t version_id_ = 1;
  std::optional<std::uint64_t> parent_version_;
  std::vector<Dialog> dialogs_;
  std::vector<AnnotatedQuestion> questions_;
  std::size_t turn_count_ = 0;
  // turn_id -> (dialog position, turn position)
  std::unordered_map<std::string, std::pair<std::size_t, std::size_t>> turn_index_;
  std::unordered_map<std::string, std::size_t> dialog_index_;
};

/// Reads corpus JSONL. Blank lines are skipped. Throws ParseError (with the
/// line number) on malformed JSON or schema violations and ValidationError
/// on invariant violations.
Corpus parse_corpus(std::istream& input);
Corpus load_corpus(const std::filesystem::path& path);

void serialize_corpus(const Corpus& corpus, std::ostream& output);
std::string serialize_corpus(const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

/// Label -> number of annotated questions carrying it.
std::map<AnnotationLabel, std::size_t> annotation_histogram(const Corpus& corpus);

}  // namespace concord
