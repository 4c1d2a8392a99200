#include "concord/pairs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "concord/error.hpp"
#include "util.hpp"

namespace concord {

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

Split split_from_string(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "val") return Split::val;
  if (text == "test") return Split::test;
  throw ValidationError("unknown split '" + std::string(text) + "'");
}

std::string make_pair_id(std::string_view q1_id, std::string_view q2_id) {
  std::string id;
  id.reserve(q1_id.size() + q2_id.size() + 2);
  id.append(q1_id).append("::").append(q2_id);
  return id;
}

void SplitSpec::validate() const {
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0 && f <= 1.0)) throw ValidationError("split fractions must lie in [0,1]");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("split fractions must sum to 1");
  if (sizes && group_by_question) {
    throw ValidationError("exact partition sizes cannot be combined with question grouping");
  }
}

std::optional<Split> PairDataset::split_of_pair(std::string_view pair_id) const {
  if (!is_split()) return std::nullopt;
  const auto it = std::lower_bound(pairs.begin(), pairs.end(), pair_id,
                                   [](const PairInstance& p, std::string_view id) { return p.pair_id < id; });
  if (it == pairs.end() || it->pair_id != pair_id) return std::nullopt;
  return split_of[static_cast<std::size_t>(it - pairs.begin())];
}

std::vector<PairInstance> PairDataset::slice(Split which) const {
  if (!is_split()) throw ValidationError("dataset has not been split");
  std::vector<PairInstance> out;
  out.reserve(stats.per_split[static_cast<std::size_t>(which)].n_pairs);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (split_of[i] == which) out.push_back(pairs[i]);
  }
  return out;
}

std::vector<AnnotatedQuestion> filter_hapaxes(const Corpus& corpus, std::size_t min_count) {
  if (min_count < 1) throw ValidationError("min_count must be at least 1");
  const auto histogram = annotation_histogram(corpus);
  std::vector<AnnotatedQuestion> kept;
  for (const auto& q : corpus.questions()) {
    if (histogram.at(q.label) >= min_count) kept.push_back(q);
  }
  return kept;
}

DatasetStats compute_stats(const std::vector<PairInstance>& pairs, const std::vector<Split>& split_of) {
  DatasetStats stats;
  std::set<std::string_view> questions;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    questions.insert(p.q1_id);
    questions.insert(p.q2_id);
    ++stats.n_pairs;
    stats.n_positive += static_cast<std::size_t>(p.gold);
    if (!split_of.empty()) {
      auto& part = stats.per_split[static_cast<std::size_t>(split_of[i])];
      ++part.n_pairs;
      part.n_positive += static_cast<std::size_t>(p.gold);
    }
  }
  stats.n_questions = questions.size();
  auto ratio = [](std::size_t pos, std::size_t n) {
    return n == 0 ? 0.0 : static_cast<double>(pos) / static_cast<double>(n);
  };
  stats.positive_ratio = ratio(stats.n_positive, stats.n_pairs);
  for (auto& part : stats.per_split) part.positive_ratio = ratio(part.n_positive, part.n_pairs);
  return stats;
}

PairDataset build_pairs(std::span<const AnnotatedQuestion> questions) {
  if (questions.size() < 2) throw EmptyDomainError("need at least two questions to build pairs");
  {
    std::set<std::string_view> ids;
    for (const auto& q : questions) {
      if (!ids.insert(q.turn_id).second) throw ValidationError("question '" + q.turn_id + "' repeated");
    }
  }
  PairDataset dataset;
  const auto n = questions.size();
  dataset.pairs.reserve(n * (n - 1));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto& a = questions[i];
      const auto& b = questions[j];
      dataset.pairs.push_back({make_pair_id(a.turn_id, b.turn_id), a.turn_id, b.turn_id, a.text, b.text,
                               a.label == b.label ? 1 : 0});
    }
  }
  std::sort(dataset.pairs.begin(), dataset.pairs.end(),
            [](const PairInstance& x, const PairInstance& y) { return x.pair_id < y.pair_id; });
  dataset.stats = compute_stats(dataset.pairs, dataset.split_of);
  return dataset;
}

std::array<std::size_t, kSplitCount> apportion(std::size_t total,
                                               const std::array<double, kSplitCount>& weights) {
  long double sum = 0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ValidationError("apportionment weights must be non-negative");
    sum += w;
  }
  std::array<std::size_t, kSplitCount> counts{};
  if (total == 0) return counts;
  if (sum <= 0) throw ValidationError("apportionment weights are all zero");

  std::array<long double, kSplitCount> remainder{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < kSplitCount; ++i) {
    const long double quota = static_cast<long double>(total) * weights[i] / sum;
    counts[i] = static_cast<std::size_t>(std::floor(quota));
    remainder[i] = quota - static_cast<long double>(counts[i]);
    assigned += counts[i];
  }
  std::array<std::size_t, kSplitCount> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < total; k = (k + 1) % kSplitCount) {
    // Never hand a seat to a zero-weight partition.
    if (weights[order[k]] > 0.0) {
      ++counts[order[k]];
      ++assigned;
    }
  }
  return counts;
}

namespace {

std::array<double, kSplitCount> as_weights(const std::array<std::size_t, kSplitCount>& sizes) {
  return {static_cast<double>(sizes[0]), static_cast<double>(sizes[1]), static_cast<double>(sizes[2])};
}

void assign_in_order(const std::vector<std::size_t>& shuffled,
                     const std::array<std::size_t, kSplitCount>& counts, std::vector<Split>& split_of) {
  std::size_t k = 0;
  for (std::size_t part = 0; part < kSplitCount; ++part) {
    for (std::size_t c = 0; c < counts[part]; ++c) split_of[shuffled[k++]] = kAllSplits[part];
  }
}

PairDataset split_by_question(PairDataset dataset, const SplitSpec& spec) {
  std::set<std::string> ids;
  for (const auto& p : dataset.pairs) ids.insert(p.q1_id);
  std::vector<std::string> questions(ids.begin(), ids.end());
  std::mt19937_64 rng(spec.seed);
  detail::portable_shuffle(questions, rng);
  const auto counts = apportion(questions.size(), spec.fractions);

  std::unordered_map<std::string, Split> home;
  std::size_t k = 0;
  for (std::size_t part = 0; part < kSplitCount; ++part) {
    for (std::size_t c = 0; c < counts[part]; ++c) home.emplace(questions[k++], kAllSplits[part]);
  }

  std::vector<PairInstance> kept;
  std::vector<Split> split_of;
  for (auto& p : dataset.pairs) {
    const auto s1 = home.at(p.q1_id);
    if (s1 != home.at(p.q2_id)) continue;
    kept.push_back(std::move(p));
    split_of.push_back(s1);
  }
  dataset.pairs = std::move(kept);
  dataset.split_of = std::move(split_of);
  dataset.stats = compute_stats(dataset.pairs, dataset.split_of);
  dataset.seed = spec.seed;
  return dataset;
}

}  // namespace

PairDataset split(PairDataset dataset, const SplitSpec& spec) {
  spec.validate();
  if (!std::is_sorted(dataset.pairs.begin(), dataset.pairs.end(),
                      [](const PairInstance& x, const PairInstance& y) { return x.pair_id < y.pair_id; })) {
    std::sort(dataset.pairs.begin(), dataset.pairs.end(),
              [](const PairInstance& x, const PairInstance& y) { return x.pair_id < y.pair_id; });
  }
  if (spec.group_by_question) return split_by_question(std::move(dataset), spec);

  const std::size_t n = dataset.pairs.size();
  std::array<std::size_t, kSplitCount> sizes{};
  if (spec.sizes) {
    sizes = *spec.sizes;
    if (sizes[0] + sizes[1] + sizes[2] != n) {
      throw ValidationError("partition sizes sum to " + std::to_string(sizes[0] + sizes[1] + sizes[2]) +
                            " but the dataset has " + std::to_string(n) + " pairs");
    }
  } else {
    sizes = apportion(n, spec.fractions);
  }

  std::mt19937_64 rng(spec.seed);
  std::vector<Split> split_of(n, Split::train);
  if (!spec.stratified) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    detail::portable_shuffle(all, rng);
    assign_in_order(all, sizes, split_of);
  } else {
    std::vector<std::size_t> positives;
    std::vector<std::size_t> negatives;
    for (std::size_t i = 0; i < n; ++i) (dataset.pairs[i].gold ? positives : negatives).push_back(i);

    std::array<std::size_t, kSplitCount> pos_counts{};
    if (n > 0) pos_counts = apportion(positives.size(), as_weights(sizes));
    std::array<std::size_t, kSplitCount> neg_counts{};
    for (std::size_t part = 0; part < kSplitCount; ++part) neg_counts[part] = sizes[part] - pos_counts[part];

    for (std::size_t part = 0; part < kSplitCount; ++part) {
      if (sizes[part] == 0) continue;
      if ((!positives.empty() && pos_counts[part] == 0) || (!negatives.empty() && neg_counts[part] == 0)) {
        throw StratificationError("partition '" + std::string(to_string(kAllSplits[part])) +
                                  "' would receive no " + (pos_counts[part] == 0 ? "positive" : "negative") +
                                  " pairs; adjust the split fractions");
      }
    }
    detail::portable_shuffle(positives, rng);
    detail::portable_shuffle(negatives, rng);
    assign_in_order(positives, pos_counts, split_of);
    assign_in_order(negatives, neg_counts, split_of);
  }
  dataset.split_of = std::move(split_of);
  dataset.stats = compute_stats(dataset.pairs, dataset.split_of);
  dataset.seed = spec.seed;
  return dataset;
}

PairDataset balance(const PairDataset& dataset, std::uint64_t seed) {
  std::vector<std::size_t> negatives;
  std::vector<PairInstance> kept;
  for (std::size_t i = 0; i < dataset.pairs.size(); ++i) {
    if (dataset.pairs[i].gold) {
      kept.push_back(dataset.pairs[i]);
    } else {
      negatives.push_back(i);
    }
  }
  std::mt19937_64 rng(seed);
  detail::portable_shuffle(negatives, rng);
  negatives.resize(std::min(negatives.size(), kept.size()));
  for (auto i : negatives) kept.push_back(dataset.pairs[i]);
  std::sort(kept.begin(), kept.end(),
            [](const PairInstance& x, const PairInstance& y) { return x.pair_id < y.pair_id; });
  PairDataset out;
  out.pairs = std::move(kept);
  out.stats = compute_stats(out.pairs, out.split_of);
  out.seed = seed;
  return out;
}

std::string escape_tsv_field(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\\': out += "\\\\"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape_tsv_field(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '\\') {
      out += text[i];
      continue;
    }
    if (++i == text.size()) throw ValidationError("dangling backslash");
    switch (text[i]) {
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      case '\\': out += '\\'; break;
      default: throw ValidationError(std::string("unknown escape \\") + text[i]);
    }
  }
  return out;
}

void export_pairs(const PairDataset& dataset, std::ostream& sink) {
  if (!dataset.is_split()) throw ValidationError("pairs must be split before export");
  sink << kPairsTsvHeader << '\n';
  for (std::size_t i = 0; i < dataset.pairs.size(); ++i) {
    const auto& p = dataset.pairs[i];
    sink << escape_tsv_field(p.pair_id) << '\t' << escape_tsv_field(p.q1_id) << '\t'
         << escape_tsv_field(p.q2_id) << '\t' << p.gold << '\t' << to_string(dataset.split_of[i]) << '\t'
         << escape_tsv_field(p.text1) << '\t' << escape_tsv_field(p.text2) << '\n';
  }
}

void save_pairs(const PairDataset& dataset, const std::filesystem::path& path) {
  std::ostringstream out;
  export_pairs(dataset, out);
  detail::write_file_atomic(path, out.str());
}

PairDataset import_pairs(std::istream& source) {
  PairDataset dataset;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(source, line)) throw ParseError(1, "missing header");
  ++line_no;
  if (line != kPairsTsvHeader) throw ParseError(1, "unexpected header");

  std::vector<std::string_view> fields;
  std::unordered_set<std::string> seen;
  while (std::getline(source, line)) {
    ++line_no;
    if (line.empty()) continue;
    fields.clear();
    std::string_view rest = line;
    for (;;) {
      const auto tab = rest.find('\t');
      fields.push_back(rest.substr(0, tab));
      if (tab == std::string_view::npos) break;
      rest.remove_prefix(tab + 1);
    }
    if (fields.size() != 7) {
      throw ParseError(line_no, "expected 7 fields, found " + std::to_string(fields.size()));
    }
    try {
      PairInstance p;
      p.pair_id = unescape_tsv_field(fields[0]);
      p.q1_id = unescape_tsv_field(fields[1]);
      p.q2_id = unescape_tsv_field(fields[2]);
      if (fields[3] != "0" && fields[3] != "1") throw ValidationError("label must be 0 or 1");
      p.gold = fields[3] == "1" ? 1 : 0;
      const auto which = split_from_string(fields[4]);
      p.text1 = unescape_tsv_field(fields[5]);
      p.text2 = unescape_tsv_field(fields[6]);
      if (p.q1_id == p.q2_id) throw ValidationError("a pair needs two distinct questions");
      if (p.pair_id != make_pair_id(p.q1_id, p.q2_id)) throw ValidationError("pair_id does not match q1_id::q2_id");
      if (!seen.insert(p.pair_id).second) throw ValidationError("duplicate pair_id '" + p.pair_id + "'");
      dataset.pairs.push_back(std::move(p));
      dataset.split_of.push_back(which);
    } catch (const ValidationError& e) {
      throw ParseError(line_no, e.what());
    }
  }

  // Keep the canonical pair_id order regardless of the file's row order.
  std::vector<std::size_t> order(dataset.pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return dataset.pairs[a].pair_id < dataset.pairs[b].pair_id; });
  if (!std::is_sorted(order.begin(), order.end())) {
    std::vector<PairInstance> pairs;
    std::vector<Split> splits;
    for (auto i : order) {
      pairs.push_back(std::move(dataset.pairs[i]));
      splits.push_back(dataset.split_of[i]);
    }
    dataset.pairs = std::move(pairs);
    dataset.split_of = std::move(splits);
  }
  dataset.stats = compute_stats(dataset.pairs, dataset.split_of);
  return dataset;
}

PairDataset load_pairs(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open pairs file " + path.string());
  return import_pairs(in);
}

}  // namespace concord
