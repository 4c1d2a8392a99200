#include "fixtures.hpp"

#include <fstream>
#include <sstream>

namespace concord::testing {

std::string two_dialog_jsonl() {
  return R"j({"dialog_id":"d1","participants":["alice","bob"],"turns":[)j"
         R"j({"turn_id":"d1-0","index":0,"speaker":"questioner","text":"is it a positive emotion?","annotation":"e.valence==positive"},)j"
         R"j({"turn_id":"d1-1","index":1,"speaker":"answerer","text":"no"},)j"
         R"j({"turn_id":"d1-2","index":2,"speaker":"questioner","text":"is it sadness?"}]})j"
         "\n"
         R"j({"dialog_id":"d2","participants":["carol","dave"],"turns":[)j"
         R"j({"turn_id":"d2-0","index":0,"speaker":"questioner","text":"is it like anger?","annotation":"similar(e,anger)"},)j"
         R"j({"turn_id":"d2-1","index":1,"speaker":"answerer","text":"not really"},)j"
         R"j({"turn_id":"d2-2","index":2,"speaker":"answerer","text":"maybe a bit"}]})j"
         "\n";
}

Corpus two_dialog_corpus() {
  std::istringstream in(two_dialog_jsonl());
  return parse_corpus(in);
}

namespace {

void add_question(Dialog& d, const std::string& turn_id, const std::string& text, const std::string& label,
                  const std::string& answer) {
  d.turns.push_back({turn_id, d.dialog_id, d.turns.size(), Speaker::questioner, text, AnnotationLabel(label)});
  d.turns.push_back({turn_id + "-a", d.dialog_id, d.turns.size(), Speaker::answerer, answer, std::nullopt});
}

}  // namespace

Corpus corpus_from_labels(const std::vector<std::string>& labels, std::size_t per_dialog) {
  std::vector<Dialog> dialogs;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i % per_dialog == 0) {
      const auto k = dialogs.size();
      dialogs.push_back({"dlg" + std::to_string(k), {"asker" + std::to_string(k), "guesser" + std::to_string(k)}, {}});
    }
    add_question(dialogs.back(), "q" + std::to_string(i), "question " + std::to_string(i) + " about " + labels[i] + "?",
                 labels[i], i % 2 == 0 ? "yes" : "no");
  }
  return Corpus::from_dialogs(std::move(dialogs));
}

std::vector<std::string> expand_counts(const std::vector<std::pair<std::string, std::size_t>>& counts) {
  std::vector<std::string> labels;
  for (const auto& [label, c] : counts) labels.insert(labels.end(), c, label);
  return labels;
}

std::vector<std::pair<std::string, std::size_t>> full_scale_label_counts() {
  std::vector<std::pair<std::string, std::size_t>> counts;
  auto add = [&](std::size_t c) { counts.emplace_back("prop" + std::to_string(counts.size()) + "(e)", c); };
  for (const std::size_t c : {40, 35, 17, 16, 16, 11, 11, 10, 10, 5}) add(c);
  for (int i = 0; i < 98; ++i) add(3);
  for (int i = 0; i < 39; ++i) add(2);
  for (int i = 0; i < 553; ++i) add(1);
  return counts;
}

Corpus full_scale_corpus() {
  constexpr std::size_t kDialogs = 110;
  constexpr std::size_t kParticipants = 25;
  const auto labels = expand_counts(full_scale_label_counts());
  std::vector<Dialog> dialogs;
  for (std::size_t k = 0; k < kDialogs; ++k) {
    dialogs.push_back({"game" + std::to_string(k),
                       {"player" + std::to_string(k % kParticipants), "player" + std::to_string((k + 7) % kParticipants)},
                       {}});
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    add_question(dialogs[i % kDialogs], "q" + std::to_string(i),
                 "question " + std::to_string(i) + " probing " + labels[i] + "?", labels[i], "maybe");
  }
  return Corpus::from_dialogs(std::move(dialogs));
}

Corpus random_corpus(std::mt19937_64& rng, std::size_t n_questions, std::size_t n_labels) {
  std::vector<std::string> labels;
  labels.reserve(n_questions);
  for (std::size_t i = 0; i < n_questions; ++i) labels.push_back("L" + std::to_string(rng() % n_labels));
  return corpus_from_labels(labels);
}

// Error-analysis fixture

std::set<std::string> ErrorAnalysisFixture::flipped_pairs() const {
  std::set<std::string> ids;
  for (const auto& v : verdicts) ids.insert(v.pair_id());
  return ids;
}

ErrorAnalysisFixture error_analysis_fixture() {
  struct Q {
    const char* id;
    const char* text;
    const char* label;       // as annotated
    const char* true_label;  // after correction
  };
  const std::vector<Q> questions = {
      {"a1", "Do you feel like this when someone close to you dies?", "cause(death,e)", "cause(death,e)"},
      {"a2", "do you feel it when someone dear has passed away?", "cause(death,e)", "cause(death,e)"},
      {"a3", "would you feel it if someone close to you had died? ", "cause(death,e)", "cause(death,e)"},
      {"b1", "jealosy?", "e==jealousy", "e==jealousy"},
      {"b2", "haha, jealousy?", "e==jealousy", "e==jealousy"},
      {"b3", "Jealousy?", "e==jealousy", "e==jealousy"},
      {"c1", "id it related to sth disappointing? *is", "associated(e,disappointment)", "similar(e,disappointment)"},
      {"c2", "similar to disappointed?", "similar(e,disappointment)", "similar(e,disappointment)"},
      {"c3", "is it close to being disappointed", "similar(e,disappointment)", "similar(e,disappointment)"},
      {"c4", "is it associated with disappointment?", "associated(e,disappointment)", "similar(e,disappointment)"},
      {"d1", "would you feel it if you had an exam the next day?", "cause(exam,e)", "cause(exam,e)"},
      {"d2", "would you feel it if you had a user13 the next day?", "cause(exam,e)", "cause(exam,e)"},
      {"e1", "stronger thanoverwhelmed?", "intensity(e)>intensity(overwhelmed)",
       "intensity(e)>intensity(overwhelmed)"},
      {"e2", "is it more intense than overwhelmed?", "intensity(e)>intensity(overwhelmed)",
       "intensity(e)>intensity(overwhelmed)"},
      {"f1", "is it melancholic?", "e==melancholy", "e==melancholy"},
      {"f2", "is it less severe that depressed, sth like melancholic", "e==melancholy", "e==melancholy"},
      {"g1", "is it like misery?", "e==misery", "e==misery"},
      {"g2", "misery?", "e==misery", "e==misery"},
      {"h1", "is it like being optimistic?", "e==optimism", "e==optimism"},
      {"h2", "is it kinda like being optmistic?", "e==optimism", "e==optimism"},
      {"i1", "is it like depression?", "similar(e,depression)", "similar(e,depression)"},
      {"i2", "so would this be an emotion that might be assimilated to depression", "associated(e,depression)",
       "similar(e,depression)"},
      {"i3", "is it sort of like being depressed?", "similar(e,depression)", "similar(e,depression)"},
      {"i4", "is it associated with depression?", "associated(e,depression)", "associated(e,depression)"},
      {"j1", "is it shy?", "e==shyness", "e==shyness"},
      {"j2", "is it like being shy?", "e==shyness", "e==shyness"},
      {"k1", "so more like plain happy?", "similar(e,happiness)", "similar(e,happiness)"},
      {"k2", "is it similar to happy?", "similar(e,happiness)", "similar(e,happiness)"},
      {"l1", "is it associated with being aggravated?", "e==aggravation", "e==aggravation"},
      {"l2", "how about with aggravation?", "e==aggravation", "e==aggravation"},
      {"m1", "would you most likely feel this towards someone you don't know?", "cause(strangers,e)",
       "cause(strangers,e)"},
      {"m2", "thanks, do you feel the emotion towards strangers?", "cause(strangers,e)", "cause(strangers,e)"},
      {"n1", "is there another person involved?", "associated(e,otherPerson)", "associated(e,otherPeople)"},
      {"n2", "does it relate to how you feel about other people?", "associated(e,otherPeople)",
       "associated(e,otherPeople)"},
      {"n3", "is this emotion always related to another persons influence?", "associated(e,otherPeople)",
       "associated(e,otherPeople)"},
      {"n4", "does it involve someone else?", "associated(e,otherPerson)", "associated(e,otherPeople)"},
      {"o1", "felt during betrayal?", "cause(betrayal,e)", "cause(betrayal,e)"},
      {"o2", "are there other situations when you'd feel this emotions besides betrayal?", "e.situations>1",
       "e.situations>1"},
      {"o3", "is it caused by betrayal?", "cause(betrayal,e)", "cause(betrayal,e)"},
      {"o4", "can you feel it in many situations?", "e.situations>1", "e.situations>1"},
  };

  ErrorAnalysisFixture f;
  std::vector<Dialog> dialogs;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    if (i % 4 == 0) {
      const auto k = dialogs.size();
      dialogs.push_back({"emo" + std::to_string(k), {"player" + std::to_string(k), "player" + std::to_string(k + 1)}, {}});
    }
    add_question(dialogs.back(), questions[i].id, questions[i].text, questions[i].label, i % 3 == 0 ? "yes" : "no");
    f.true_labels.emplace(questions[i].id, AnnotationLabel(questions[i].true_label));
  }
  f.corpus = Corpus::from_dialogs(std::move(dialogs));

  using C = VerdictCategory;
  const MergeLabels disappointment{AnnotationLabel("associated(e,disappointment)"),
                                   AnnotationLabel("similar(e,disappointment)")};
  const RelabelTurn depression{"i2", AnnotationLabel("similar(e,depression)")};
  const MergeLabels other_people{AnnotationLabel("associated(e,otherPerson)"),
                                 AnnotationLabel("associated(e,otherPeople)")};
  const EditText exam{"d2", "would you feel it if you had an exam the next day?"};
  f.verdicts = {
      {1, "a1", "a2", C::prediction_error, std::nullopt},
      {2, "b1", "b2", C::prediction_error, std::nullopt},
      {3, "c1", "c2", C::annotation_error, disappointment},
      {4, "d1", "d2", C::prep_error, exam},
      {5, "e1", "e2", C::prediction_error, std::nullopt},
      {6, "a2", "a3", C::prediction_error, std::nullopt},
      {7, "f1", "f2", C::prediction_error, std::nullopt},
      {8, "g1", "g2", C::prediction_error, std::nullopt},
      {9, "h1", "h2", C::prediction_error, std::nullopt},
      {10, "h2", "h1", C::prediction_error, std::nullopt},
      {11, "c1", "c3", C::annotation_error, disappointment},
      {12, "b3", "b1", C::prediction_error, std::nullopt},
      {13, "i1", "i2", C::annotation_error, depression},
      {14, "j1", "j2", C::prediction_error, std::nullopt},
      {15, "a2", "a1", C::prediction_error, std::nullopt},
      {16, "k1", "k2", C::prediction_error, std::nullopt},
      {17, "l1", "l2", C::prediction_error, std::nullopt},
      {18, "m1", "m2", C::prediction_error, std::nullopt},
      {19, "n1", "n2", C::annotation_error, other_people},
      {20, "n2", "n3", C::prediction_error, std::nullopt},
      {21, "o1", "o2", C::prediction_error, std::nullopt},
      {22, "d2", "d1", C::prep_error, exam},
  };
  return f;
}

std::vector<PredictionRecord> ScriptedBackend::predict(std::span<const PairInstance> pairs) {
  std::vector<PredictionRecord> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (flipped_.count(p.pair_id) > 0) {
      const int predicted = 1 - p.gold;
      out.push_back({p.pair_id, predicted, predicted == 1 ? 0.9 : 0.1});
    } else {
      out.push_back({p.pair_id, p.gold, static_cast<double>(p.gold)});
    }
  }
  return out;
}

TempDir::TempDir() {
  std::random_device rd;
  const auto base = std::filesystem::temp_directory_path();
  for (;;) {
    path_ = base / ("concord-test-" + std::to_string(rd()));
    if (std::filesystem::create_directory(path_)) break;
  }
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

}  // namespace concord::testing
