#include "concord/anonymize.hpp"

#include <algorithm>
#include <fstream>

#include "concord/error.hpp"
#include "util.hpp"

namespace concord {

namespace detail {
extern const std::string_view kCommonWordsData;
}

namespace {

WordSet parse_word_list(std::string_view data) {
  WordSet words;
  std::size_t pos = 0;
  while (pos < data.size()) {
    auto end = data.find('\n', pos);
    if (end == std::string_view::npos) end = data.size();
    const auto word = detail::trim(data.substr(pos, end - pos));
    if (!word.empty() && word.front() != '#') words.insert(detail::ascii_lower(word));
    pos = end + 1;
  }
  return words;
}

bool whole_word_at(std::string_view text, std::size_t pos, std::size_t len) {
  if (pos > 0 && detail::is_word_char(text[pos - 1])) return false;
  const auto end = pos + len;
  if (end < text.size() && detail::is_word_char(text[end])) return false;
  return true;
}

struct Match {
  std::size_t offset;
  std::size_t length;
  std::size_t user;
};

}  // namespace

const WordSet& bundled_common_words() {
  static const WordSet words = parse_word_list(detail::kCommonWordsData);
  return words;
}

WordSet load_word_list(const std::filesystem::path& path) {
  return parse_word_list(detail::read_file(path));
}

std::pair<Corpus, AnonymizationReport> anonymize(const Corpus& corpus,
                                                 std::span<const std::string> usernames,
                                                 const WordSet& dictionary,
                                                 const AnonymizeOptions& options) {
  AnonymizationReport report;
  std::vector<bool> collides(usernames.size(), false);
  for (std::size_t u = 0; u < usernames.size(); ++u) {
    if (usernames[u].empty()) throw ValidationError("usernames must be non-empty");
    if (dictionary.contains(detail::ascii_lower(usernames[u]))) {
      collides[u] = true;
      report.collided_usernames.push_back(usernames[u]);
    }
  }
  if (usernames.empty()) return {corpus, std::move(report)};

  bool changed = false;
  std::vector<Dialog> dialogs = corpus.dialogs();
  for (auto& dialog : dialogs) {
    for (auto& turn : dialog.turns) {
      const std::string_view text = turn.text;
      std::vector<Match> matches;
      for (std::size_t u = 0; u < usernames.size(); ++u) {
        const auto& name = usernames[u];
        for (auto pos = text.find(name); pos != std::string_view::npos;
             pos = text.find(name, pos + 1)) {
          if (whole_word_at(text, pos, name.size())) matches.push_back({pos, name.size(), u});
        }
      }
      if (matches.empty()) continue;
      // Leftmost first; at equal offsets the longer name wins.
      std::sort(matches.begin(), matches.end(), [](const Match& a, const Match& b) {
        return a.offset != b.offset ? a.offset < b.offset : a.length > b.length;
      });

      std::string rewritten;
      std::size_t cursor = 0;
      for (const auto& m : matches) {
        if (m.offset < cursor) continue;  // overlaps an earlier match
        Replacement r{turn.turn_id, m.offset, std::string(text.substr(m.offset, m.length)),
                      options.token_prefix + std::to_string(m.user),
                      !collides[m.user] || options.force};
        rewritten.append(text.substr(cursor, m.offset - cursor));
        rewritten.append(r.applied ? r.replacement_token : r.original_span);
        cursor = m.offset + m.length;
        if (collides[m.user]) report.collisions.push_back(r);
        report.replacements.push_back(std::move(r));
      }
      rewritten.append(text.substr(cursor));
      if (rewritten != turn.text) {
        turn.text = std::move(rewritten);
        changed = true;
      }
    }
  }
  if (!changed) return {corpus, std::move(report)};
  return {corpus.revised(std::move(dialogs)), std::move(report)};
}

std::vector<std::string> audit_anonymization(const Corpus& corpus, std::string_view token_prefix,
                                             const std::optional<std::set<std::size_t>>& only_indices) {
  std::vector<std::string> suspects;
  if (token_prefix.empty()) throw ValidationError("replacement token prefix is empty");
  for (const auto& dialog : corpus.dialogs()) {
    for (const auto& turn : dialog.turns) {
      const std::string_view text = turn.text;
      bool suspect = false;
      for (auto pos = text.find(token_prefix); pos != std::string_view::npos && !suspect;
           pos = text.find(token_prefix, pos + 1)) {
        auto end = pos + token_prefix.size();
        const auto digits_begin = end;
        while (end < text.size() && text[end] >= '0' && text[end] <= '9') ++end;
        if (end == digits_begin || !whole_word_at(text, pos, end - pos)) continue;
        if (only_indices) {
          const auto digits = text.substr(digits_begin, end - digits_begin);
          if (digits.size() > 9 || !only_indices->contains(std::stoul(std::string(digits)))) continue;
        }
        // Previous word, skipping whitespace only.
        auto w_end = pos;
        while (w_end > 0 && detail::is_ascii_space(text[w_end - 1])) --w_end;
        if (w_end == pos) continue;
        auto w_begin = w_end;
        while (w_begin > 0 && detail::is_word_char(text[w_begin - 1])) --w_begin;
        const auto prev = detail::ascii_lower(text.substr(w_begin, w_end - w_begin));
        if (prev == "a" || prev == "an" || prev == "the") suspect = true;
      }
      if (suspect) suspects.push_back(turn.turn_id);
    }
  }
  return suspects;
}

nlohmann::ordered_json to_json(const AnonymizationReport& report) {
  auto encode = [](const std::vector<Replacement>& list) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : list) {
      nlohmann::ordered_json j;
      j["turn_id"] = r.turn_id;
      j["offset"] = r.offset;
      j["original_span"] = r.original_span;
      j["replacement_token"] = r.replacement_token;
      j["applied"] = r.applied;
      arr.push_back(std::move(j));
    }
    return arr;
  };
  nlohmann::ordered_json j;
  j["replacements"] = encode(report.replacements);
  j["collisions"] = encode(report.collisions);
  j["collided_usernames"] = report.collided_usernames;
  return j;
}

}  // namespace concord
