#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "concord/corpus.hpp"

namespace concord {

using WordSet = std::unordered_set<std::string>;

/// The bundled list of the 10k most frequent English words (lowercase).
const WordSet& bundled_common_words();

/// One word per line; blank lines and lines starting with '#' are skipped.
/// Words are lowercased on load.
WordSet load_word_list(const std::filesystem::path& path);

/// A username occurrence found in a turn. `applied` is false when the
/// occurrence was left in place because the username is a dictionary word.
struct Replacement {
  std::string turn_id;
  std::size_t offset = 0;  // byte offset in the original text
  std::string original_span;
  std::string replacement_token;
  bool applied = true;

  bool operator==(const Replacement&) const = default;
};

struct AnonymizationReport {
  std::vector<Replacement> replacements;
  /// Subset of `replacements` whose span is a dictionary word.
  std::vector<Replacement> collisions;
  /// Usernames that are dictionary words, whether or not they occur.
  std::vector<std::string> collided_usernames;
};

struct AnonymizeOptions {
  /// Replace dictionary-word usernames anyway.
  bool force = false;
  std::string token_prefix = "user";
};

/// Replaces whole-word, case-sensitive occurrences of each username with
/// `<prefix><index>`, where index is the username's position in the list.
/// Usernames that are (case-insensitively) dictionary words are reported as
/// collisions and left in place unless `options.force` is set.
///
/// Returns the input corpus unchanged when nothing was replaced, otherwise
/// the next corpus version. Labels, turn ids and turn order never change.
std::pair<Corpus, AnonymizationReport> anonymize(const Corpus& corpus,
                                                 std::span<const std::string> usernames,
                                                 const WordSet& dictionary,
                                                 const AnonymizeOptions& options = {});

/// Turn ids whose text contains a `<prefix>NN` token right after an article
/// ("a", "an", "the"), a position where a person's name does not fit.
/// When `only_indices` is set, only tokens with those NN values count.
std::vector<std::string> audit_anonymization(
    const Corpus& corpus, std::string_view token_prefix = "user",
    const std::optional<std::set<std::size_t>>& only_indices = std::nullopt);

nlohmann::ordered_json to_json(const AnonymizationReport& report);

}  // namespace concord
