#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "concord/error.hpp"
#include "concord/pairs.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

#ifndef CONCORD_TEST_FIXTURES
#error "CONCORD_TEST_FIXTURES must point at tests/fixtures"
#endif

namespace concord {
namespace {

using testing::corpus_from_labels;
using testing::expand_counts;

std::vector<std::string> turn_ids(const std::vector<AnnotatedQuestion>& qs) {
  std::vector<std::string> ids;
  for (const auto& q : qs) ids.push_back(q.turn_id);
  return ids;
}

PairDataset twenty_pairs() {
  return build_pairs(filter_hapaxes(corpus_from_labels(expand_counts({{"A", 3}, {"C", 2}}))));
}

std::string exported(const PairDataset& d) {
  std::ostringstream out;
  export_pairs(d, out);
  return out.str();
}

TEST(FilterHapaxes, KeepsLabelsSeenTwiceInCorpusOrder) {
  const auto c = corpus_from_labels({"A", "B", "C", "A", "C", "A"});
  EXPECT_EQ(turn_ids(filter_hapaxes(c)), (std::vector<std::string>{"q0", "q2", "q3", "q4", "q5"}));
}

TEST(FilterHapaxes, AllHapaxesGiveNothing) {
  EXPECT_TRUE(filter_hapaxes(corpus_from_labels({"A", "B", "C"})).empty());
}

TEST(FilterHapaxes, MatchesRecountForAnyThreshold) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = testing::random_corpus(rng, rng() % 80, 1 + rng() % 30);
    const std::size_t min_count = 1 + rng() % 5;
    EXPECT_EQ(filter_hapaxes(c, min_count), testing::brute_force_filter(c, min_count));
  }
}

TEST(BuildPairs, TwoIdenticalLabels) {
  const auto d = build_pairs(filter_hapaxes(corpus_from_labels({"A", "A"})));
  ASSERT_EQ(d.pairs.size(), 2u);
  EXPECT_EQ(d.pairs[0].pair_id, "q0::q1");
  EXPECT_EQ(d.pairs[1].pair_id, "q1::q0");
  EXPECT_EQ(d.pairs[0].gold, 1);
  EXPECT_EQ(d.pairs[1].gold, 1);
  EXPECT_FALSE(d.is_split());
}

TEST(BuildPairs, TwentyPairsEightPositive) {
  const auto d = twenty_pairs();
  EXPECT_EQ(d.stats.n_questions, 5u);
  EXPECT_EQ(d.stats.n_pairs, 20u);
  EXPECT_EQ(d.stats.n_positive, 8u);
  EXPECT_DOUBLE_EQ(d.stats.positive_ratio, 0.4);
}

TEST(BuildPairs, MatchesBruteForceOnRandomCorpora) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 60; ++trial) {
    const auto c = testing::random_corpus(rng, 2 + rng() % 99, 1 + rng() % 20);
    const auto qs = c.questions();
    const auto d = build_pairs(qs);
    const auto oracle = testing::brute_force_pair_counts(qs);
    const auto n = qs.size();
    EXPECT_EQ(d.pairs.size(), n * (n - 1));
    EXPECT_EQ(d.stats.n_pairs, oracle.pairs);
    EXPECT_EQ(d.stats.n_positive, oracle.positives);

    std::map<std::string, int> gold;
    for (const auto& p : d.pairs) {
      EXPECT_NE(p.q1_id, p.q2_id);
      gold[p.pair_id] = p.gold;
    }
    for (const auto& p : d.pairs) {
      const auto mirror = gold.find(make_pair_id(p.q2_id, p.q1_id));
      ASSERT_NE(mirror, gold.end());
      EXPECT_EQ(mirror->second, p.gold);
    }
    EXPECT_TRUE(std::is_sorted(d.pairs.begin(), d.pairs.end(),
                               [](const auto& a, const auto& b) { return a.pair_id < b.pair_id; }));
  }
}

TEST(BuildPairs, PositivesEqualSumOfCTimesCMinusOne) {
  const auto counts = testing::full_scale_label_counts();
  std::vector<std::size_t> multiplicities;
  for (const auto& [label, c] : counts) multiplicities.push_back(c);
  const auto d = build_pairs(testing::full_scale_corpus().questions());
  EXPECT_EQ(d.stats.n_positive, testing::sum_c_c_minus_1(multiplicities));
}

TEST(BuildPairs, FewerThanTwoQuestionsIsEmptyDomain) {
  EXPECT_THROW(build_pairs({}), EmptyDomainError);
  const auto one = corpus_from_labels({"A"});
  EXPECT_THROW(build_pairs(one.questions()), EmptyDomainError);
}

TEST(BuildPairs, RepeatedTurnIdIsValidationError) {
  const AnnotatedQuestion q{"t", "d", "x?", AnnotationLabel("A")};
  const std::vector<AnnotatedQuestion> qs{q, q};
  EXPECT_THROW(build_pairs(qs), ValidationError);
}

TEST(BuildPairs, RelabelToFreshLabelRemovesTwoCMinusOnePositives) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const auto c = testing::random_corpus(rng, 3 + rng() % 60, 1 + rng() % 8);
    auto qs = c.questions();
    const std::size_t pick = rng() % qs.size();
    std::size_t multiplicity = 0;
    for (const auto& q : qs) multiplicity += q.label == qs[pick].label;
    const auto before = build_pairs(qs).stats.n_positive;
    qs[pick].label = AnnotationLabel("fresh-label");
    const auto after = build_pairs(qs).stats.n_positive;
    EXPECT_EQ(before - after, 2 * (multiplicity - 1));
  }
}

TEST(Apportion, ExampleFractionsByLargestRemainder) {
  const std::array<double, 3> f{0.6795, 0.0486, 0.2719};
  const auto seats = apportion(294306, f);
  EXPECT_TRUE(testing::is_largest_remainder(294306, f, seats));
  EXPECT_EQ(seats, (std::array<std::size_t, 3>{199981, 14303, 80022}));
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_LE(std::abs(static_cast<double>(seats[i]) - (std::array<double, 3>{200000, 14306, 80000}[i])), 25.0);
  }
}

TEST(Apportion, DefaultFractionsGiveExactPartitionSizes) {
  EXPECT_EQ(apportion(294306, SplitSpec{}.fractions), (std::array<std::size_t, 3>{200000, 14306, 80000}));
}

TEST(Apportion, RandomWeightsSatisfyLargestRemainderProperty) {
  std::mt19937_64 rng(24);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    std::array<double, 3> w{u(rng), u(rng), u(rng)};
    if (trial % 7 == 0) w[rng() % 3] = 0.0;
    if (w[0] + w[1] + w[2] == 0.0) continue;
    const std::size_t total = rng() % 5000;
    EXPECT_TRUE(testing::is_largest_remainder(total, w, apportion(total, w))) << trial;
  }
}

TEST(Apportion, TieGoesToEarlierPartition) {
  EXPECT_EQ(apportion(1, {1.0, 1.0, 1.0}), (std::array<std::size_t, 3>{1, 0, 0}));
  EXPECT_EQ(apportion(2, {1.0, 1.0, 1.0}), (std::array<std::size_t, 3>{1, 1, 0}));
}

TEST(SplitSpec, Validation) {
  SplitSpec s;
  s.fractions = {0.5, 0.5, 0.5};
  EXPECT_THROW(s.validate(), ValidationError);
  s.fractions = {1.2, -0.1, -0.1};
  EXPECT_THROW(s.validate(), ValidationError);
  s.fractions = {0.5, 0.25, 0.25};
  EXPECT_NO_THROW(s.validate());
  s.group_by_question = true;
  s.sizes = std::array<std::size_t, 3>{1, 1, 1};
  EXPECT_THROW(s.validate(), ValidationError);
}

TEST(Split, AllToTrain) {
  SplitSpec s;
  s.fractions = {1.0, 0.0, 0.0};
  const auto d = split(twenty_pairs(), s);
  ASSERT_EQ(d.split_of.size(), 20u);
  for (const auto p : d.split_of) EXPECT_EQ(p, Split::train);
  EXPECT_EQ(d.stats.per_split[0].n_pairs, 20u);
}

TEST(Split, PartitionsAreDisjointAndExhaustive) {
  SplitSpec s;
  s.fractions = {0.5, 0.25, 0.25};
  const auto d = split(twenty_pairs(), s);
  std::size_t total = 0;
  for (const auto part : kAllSplits) total += d.slice(part).size();
  EXPECT_EQ(total, 20u);
  EXPECT_EQ(d.stats.per_split[0].n_pairs, 10u);
  EXPECT_EQ(d.stats.per_split[1].n_pairs, 5u);
  EXPECT_EQ(d.stats.per_split[2].n_pairs, 5u);
  EXPECT_EQ(d.stats.per_split[0].n_positive, 4u);
  EXPECT_EQ(d.stats.per_split[1].n_positive, 2u);
  EXPECT_EQ(d.stats.per_split[2].n_positive, 2u);
}

TEST(Split, SeededAssignmentMatchesGoldenFile) {
  SplitSpec s;
  s.fractions = {0.5, 0.25, 0.25};
  s.seed = 7;
  const auto first = exported(split(twenty_pairs(), s));
  const auto second = exported(split(twenty_pairs(), s));
  EXPECT_EQ(first, second);
  const auto golden = testing::slurp(std::filesystem::path(CONCORD_TEST_FIXTURES) / "golden" / "split_seed7.tsv");
  ASSERT_FALSE(golden.empty());
  EXPECT_EQ(first, golden);
}

TEST(Split, DifferentSeedsDiffer) {
  SplitSpec a;
  SplitSpec b;
  b.seed = a.seed + 1;
  std::mt19937_64 rng(2);
  const auto d = build_pairs(testing::random_corpus(rng, 60, 6).questions());
  EXPECT_NE(split(d, a).split_of, split(d, b).split_of);
}

TEST(Split, InputOrderDoesNotMatter) {
  auto d = twenty_pairs();
  SplitSpec s;
  s.fractions = {0.5, 0.25, 0.25};
  const auto expected = split(d, s);
  std::reverse(d.pairs.begin(), d.pairs.end());
  EXPECT_EQ(split(d, s), expected);
}

TEST(Split, StratifiedPositivesWithinOneOfShare) {
  std::mt19937_64 rng(25);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const auto d = build_pairs(testing::random_corpus(rng, 20 + rng() % 60, 2 + rng() % 10).questions());
    SplitSpec s;
    std::array<double, 3> w{u(rng), u(rng), u(rng)};
    const double sum = w[0] + w[1] + w[2];
    s.fractions = {w[0] / sum, w[1] / sum, 1.0 - w[0] / sum - w[1] / sum};
    s.seed = rng();
    PairDataset out;
    try {
      out = split(d, s);
    } catch (const StratificationError&) {
      continue;
    }
    for (const auto part : kAllSplits) {
      const auto& ps = out.stats.per_split[static_cast<std::size_t>(part)];
      const double share = static_cast<double>(d.stats.n_positive) * static_cast<double>(ps.n_pairs) /
                           static_cast<double>(d.stats.n_pairs);
      EXPECT_LE(std::abs(static_cast<double>(ps.n_positive) - share), 1.0);
    }
  }
}

TEST(Split, StratifiedRatioWithinTwoTenthsOfAPointOnFullScaleCorpus) {
  const auto d = split(build_pairs(filter_hapaxes(testing::full_scale_corpus())), SplitSpec{});
  EXPECT_EQ(d.stats.per_split[0].n_pairs, 200000u);
  EXPECT_EQ(d.stats.per_split[1].n_pairs, 14306u);
  EXPECT_EQ(d.stats.per_split[2].n_pairs, 80000u);
  for (const auto& ps : d.stats.per_split) {
    EXPECT_LE(std::abs(ps.positive_ratio - d.stats.positive_ratio), 0.002);
  }
}

TEST(Split, EmptyClassInRequestedPartitionIsStratificationError) {
  SplitSpec s;
  s.sizes = std::array<std::size_t, 3>{18, 1, 1};
  EXPECT_THROW(split(twenty_pairs(), s), StratificationError);
  s.stratified = false;
  EXPECT_NO_THROW(split(twenty_pairs(), s));
}

TEST(Split, SizesMustCoverDataset) {
  SplitSpec s;
  s.sizes = std::array<std::size_t, 3>{10, 5, 4};
  EXPECT_THROW(split(twenty_pairs(), s), ValidationError);
}

TEST(Split, GroupByQuestionKeepsQuestionsTogether) {
  std::mt19937_64 rng(26);
  const auto d = build_pairs(testing::random_corpus(rng, 40, 5).questions());
  SplitSpec s;
  s.group_by_question = true;
  s.fractions = {0.6, 0.2, 0.2};
  const auto out = split(d, s);
  std::map<std::string, Split> home;
  for (std::size_t i = 0; i < out.pairs.size(); ++i) {
    for (const auto& q : {out.pairs[i].q1_id, out.pairs[i].q2_id}) {
      const auto [it, inserted] = home.emplace(q, out.split_of[i]);
      EXPECT_EQ(it->second, out.split_of[i]);
    }
  }
  // 24 / 8 / 8 questions keep n_k(n_k - 1) pairs each.
  EXPECT_EQ(out.pairs.size(), 24u * 23 + 8u * 7 + 8u * 7);
}

TEST(Balance, KeepsPositivesAndSamplesEqualNegatives) {
  std::mt19937_64 rng(27);
  const auto d = build_pairs(testing::random_corpus(rng, 50, 6).questions());
  const auto b = balance(d, 3);
  EXPECT_EQ(b.stats.n_positive * 2, b.stats.n_pairs);
  EXPECT_EQ(b.stats.n_positive, d.stats.n_positive);
  EXPECT_EQ(balance(d, 3), b);
  EXPECT_NE(balance(d, 4), b);
}

TEST(PairsTsv, TwoPairsGiveThreeLines) {
  SplitSpec s;
  s.fractions = {1.0, 0.0, 0.0};
  const auto d = split(build_pairs(filter_hapaxes(corpus_from_labels({"A", "A"}))), s);
  const auto text = exported(d);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, kPairsTsvHeader);
  std::getline(in, line);
  EXPECT_EQ(line, "q0::q1\tq0\tq1\t1\ttrain\tquestion 0 about A?\tquestion 1 about A?");
}

TEST(PairsTsv, FullScaleCorpusExportHas294307Lines) {
  const auto d = split(build_pairs(filter_hapaxes(testing::full_scale_corpus())), SplitSpec{});
  const auto text = exported(d);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 294307);
}

TEST(PairsTsv, EscapesRoundTrip) {
  for (const std::string s : {"", "plain", "tab\there", "new\nline", "back\\slash", "\\t literal", "\t\n\\"}) {
    EXPECT_EQ(unescape_tsv_field(escape_tsv_field(s)), s);
    EXPECT_EQ(escape_tsv_field(s).find('\t'), std::string::npos);
    EXPECT_EQ(escape_tsv_field(s).find('\n'), std::string::npos);
  }
}

TEST(PairsTsv, RoundTripOnRandomDatasets) {
  std::mt19937_64 rng(28);
  const std::vector<std::string> pieces{"a", "\t", "\n", "\\", "é", " ", "?", "\\n"};
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Dialog> dialogs{{"d", {}, {}}};
    const std::size_t n = 2 + rng() % 12;
    for (std::size_t i = 0; i < n; ++i) {
      std::string text = "x";
      for (int k = 0; k < 6; ++k) text += pieces[rng() % pieces.size()];
      dialogs[0].turns.push_back({"t" + std::to_string(i), "d", i, Speaker::questioner, text,
                                  AnnotationLabel("L" + std::to_string(rng() % 3))});
    }
    SplitSpec s;
    s.stratified = false;
    s.seed = rng();
    const auto d = split(build_pairs(Corpus::from_dialogs(dialogs).questions()), s);
    std::istringstream in(exported(d));
    EXPECT_EQ(import_pairs(in), d);
  }
}

TEST(PairsTsv, ExportRequiresSplit) {
  std::ostringstream out;
  EXPECT_THROW(export_pairs(twenty_pairs(), out), ValidationError);
}

TEST(PairsTsv, MalformedRowsReportLineNumbers) {
  const std::string header = std::string(kPairsTsvHeader) + "\n";
  const std::string good = "a::b\ta\tb\t1\ttrain\tx\ty\n";
  auto line_of = [](const std::string& text) -> std::size_t {
    std::istringstream in(text);
    try {
      import_pairs(in);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  EXPECT_EQ(line_of("wrong header\n" + good), 1u);
  EXPECT_EQ(line_of(header + good + "b::a\tb\ta\t1\ttrain\tx\n"), 3u);
  EXPECT_EQ(line_of(header + good + "b::a\tb\ta\t2\ttrain\tx\ty\n"), 3u);
  EXPECT_EQ(line_of(header + good + "b::a\tb\ta\t1\tdev\tx\ty\n"), 3u);
  EXPECT_EQ(line_of(header + good + "b::c\tb\ta\t1\ttrain\tx\ty\n"), 3u);
  EXPECT_EQ(line_of(header + good + good), 3u);
  EXPECT_EQ(line_of(header + good), 0u);
}

TEST(PairsTsv, FileRoundTrip) {
  testing::TempDir dir;
  SplitSpec s;
  s.fractions = {0.5, 0.25, 0.25};
  const auto d = split(twenty_pairs(), s);
  save_pairs(d, dir / "p.tsv");
  EXPECT_EQ(load_pairs(dir / "p.tsv"), d);
}

}  // namespace
}  // namespace concord
