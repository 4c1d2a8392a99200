#include "cli.hpp"

#include <pthread.h>
#include <signal.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "concord/anonymize.hpp"
#include "concord/classifier.hpp"
#include "concord/corpus.hpp"
#include "concord/error.hpp"
#include "concord/evaluation.hpp"
#include "concord/pairs.hpp"
#include "concord/service.hpp"
#include "concord/triage.hpp"

namespace concord::cli {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// Flags shared by several subcommands. They live on the root app so a
// config file can set them with top-level keys.
struct Shared {
  std::uint64_t seed = 20;
  std::size_t min_count = 2;
  bool balance = false;
  std::vector<double> fractions;
  std::vector<std::size_t> sizes;
  bool no_stratify = false;
  bool group_by_question = false;
  std::string scope = "test";
  std::string train_config;

  std::string backend;
  std::string endpoint;
  std::string reference_corpus;
  double threshold = kDefaultDecisionThreshold;
  std::size_t batch_size = 256;
  std::size_t max_in_flight = 4;
  int timeout_s = 60;
  std::string staging_dir;
  std::string backend_token;

  CLI::Option* backend_opt = nullptr;
  CLI::Option* endpoint_opt = nullptr;
  CLI::Option* reference_opt = nullptr;
  CLI::Option* batch_opt = nullptr;
  CLI::Option* in_flight_opt = nullptr;
};

void print_json(std::ostream& out, const ordered_json& j) { out << j.dump(2) << '\n'; }

json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

SplitSpec split_spec(const Shared& s) {
  SplitSpec spec;
  spec.seed = s.seed;
  spec.stratified = !s.no_stratify;
  spec.group_by_question = s.group_by_question;
  if (!s.fractions.empty()) {
    if (s.fractions.size() != kSplitCount) throw ValidationError("--fractions takes three values");
    std::copy(s.fractions.begin(), s.fractions.end(), spec.fractions.begin());
  }
  if (!s.sizes.empty()) {
    if (s.sizes.size() != kSplitCount) throw ValidationError("--sizes takes three values");
    std::array<std::size_t, kSplitCount> sizes{};
    std::copy(s.sizes.begin(), s.sizes.end(), sizes.begin());
    spec.sizes = sizes;
  }
  spec.validate();
  return spec;
}

PipelineConfig pipeline_config(const Shared& s) {
  PipelineConfig config;
  config.min_count = s.min_count;
  config.split = split_spec(s);
  config.scope = eval_scope_from_string(s.scope);
  config.balance = s.balance;
  if (!s.train_config.empty()) config.train_config = read_json_file(s.train_config);
  return config;
}

BackendDescriptor backend_descriptor(const Shared& s) {
  std::string endpoint = s.endpoint;
  if (endpoint.empty()) {
    if (const char* env = std::getenv("CONCORD_BACKEND_URL")) endpoint = env;
  }
  BackendDescriptor d;
  if (s.backend.empty()) {
    d.kind = endpoint.empty() ? BackendKind::lexical : BackendKind::remote;
  } else {
    d.kind = backend_kind_from_string(s.backend);
  }
  // Flags that only make sense for one backend kind are rejected up front.
  if (d.kind != BackendKind::remote) {
    for (const auto* opt : {s.endpoint_opt, s.batch_opt, s.in_flight_opt}) {
      if (opt->count() > 0) {
        throw ValidationError(opt->get_name() + " only applies to --backend remote, not " +
                              std::string(to_string(d.kind)));
      }
    }
  }
  if (d.kind != BackendKind::oracle && s.reference_opt->count() > 0) {
    throw ValidationError("--reference-corpus only applies to --backend oracle");
  }
  d.params["threshold"] = std::to_string(s.threshold);
  if (d.kind == BackendKind::remote) {
    d.endpoint = endpoint;
    d.params["batch_size"] = std::to_string(s.batch_size);
    d.params["max_in_flight"] = std::to_string(s.max_in_flight);
    d.params["timeout_s"] = std::to_string(s.timeout_s);
    if (!s.staging_dir.empty()) d.params["staging_dir"] = s.staging_dir;
    if (!s.backend_token.empty()) d.params["token"] = s.backend_token;
  }
  if (d.kind == BackendKind::oracle && !s.reference_corpus.empty()) {
    d.params["reference_corpus"] = s.reference_corpus;
  }
  d.validate();
  return d;
}

std::vector<PairInstance> select_pairs(const PairDataset& dataset, const std::string& which) {
  if (which == "all") return dataset.pairs;
  if (!dataset.is_split()) throw ValidationError("pairs file carries no split assignment");
  return dataset.slice(split_from_string(which));
}

ordered_json stats_json(const DatasetStats& stats) {
  ordered_json j;
  j["n_questions"] = stats.n_questions;
  j["n_pairs"] = stats.n_pairs;
  j["n_positive"] = stats.n_positive;
  j["positive_ratio"] = stats.positive_ratio;
  ordered_json per;
  for (const auto split : kAllSplits) {
    const auto& p = stats.per_split[static_cast<std::size_t>(split)];
    per[std::string(to_string(split))] = {
        {"n_pairs", p.n_pairs}, {"n_positive", p.n_positive}, {"positive_ratio", p.positive_ratio}};
  }
  j["per_split"] = std::move(per);
  return j;
}

std::chrono::sys_seconds timestamp_or_now(const std::string& text) {
  if (!text.empty()) return parse_timestamp(text);
  return std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now());
}

ordered_json rounds_json(const TriageSession& session) {
  ordered_json j;
  j["current_round"] = session.current().round;
  auto rounds = ordered_json::array();
  for (const auto& r : session.rounds()) rounds.push_back(round_report_json(*r));
  j["rounds"] = std::move(rounds);
  return j;
}

// Blocks SIGINT/SIGTERM for every thread, serves, and stops on either signal.
void serve_until_signalled(TriageService& service, std::ostream& err) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  const int port = service.start();
  err << "listening on port " << port << std::endl;
  int sig = 0;
  sigwait(&set, &sig);
  service.stop();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Paraphrase-pair datasets from annotated dialogs, classifier audits and triage rounds", "concord"};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML-style key = value file; command-line flags take precedence");
  app.failure_message(CLI::FailureMessage::help);

  Shared s;
  app.add_option("--seed", s.seed, "Split and balance seed")->capture_default_str();
  app.add_option("--min-label-count", s.min_count, "Drop labels occurring fewer times")->capture_default_str();
  app.add_flag("--balance", s.balance, "Downsample negatives to the positive count");
  app.add_option("--fractions", s.fractions, "Train, val and test fractions")->expected(3)->delimiter(',');
  app.add_option("--sizes", s.sizes, "Exact train, val and test sizes")->expected(3)->delimiter(',');
  app.add_flag("--no-stratify", s.no_stratify, "Shuffle without preserving the positive ratio");
  app.add_flag("--group-by-question", s.group_by_question, "Keep all pairs of a question in one partition");
  app.add_option("--scope", s.scope, "Pairs triaged in a round")
      ->check(CLI::IsMember({"test", "all"}))
      ->capture_default_str();
  app.add_option("--train-config", s.train_config, "JSON file passed to the backend's training job");
  s.backend_opt = app.add_option("--backend", s.backend, "remote, oracle or lexical")
                      ->check(CLI::IsMember({"remote", "oracle", "lexical"}));
  s.endpoint_opt = app.add_option("--endpoint", s.endpoint, "Remote backend URL (default $CONCORD_BACKEND_URL)");
  s.reference_opt = app.add_option("--reference-corpus", s.reference_corpus, "Oracle: corpus defining true labels");
  app.add_option("--threshold", s.threshold, "Decision threshold on scores")->capture_default_str();
  s.batch_opt = app.add_option("--batch-size", s.batch_size, "Remote: pairs per request")->capture_default_str();
  s.in_flight_opt =
      app.add_option("--max-in-flight", s.max_in_flight, "Remote: concurrent requests")->capture_default_str();
  app.add_option("--timeout", s.timeout_s, "Remote: seconds per request")->capture_default_str();
  app.add_option("--staging-dir", s.staging_dir, "Remote: where training slices are written");
  app.add_option("--backend-token", s.backend_token, "Remote: bearer token");

  std::function<int()> action;

  // ingest
  std::string corpus_path, out_path;
  {
    auto* cmd = app.add_subcommand("ingest", "Validate a corpus JSONL file and summarize it");
    cmd->add_option("--corpus", corpus_path, "Corpus JSONL")->required();
    cmd->add_option("--out", out_path, "Write the normalized corpus here");
    cmd->callback([&] {
      action = [&] {
        const auto corpus = load_corpus(corpus_path);
        if (!out_path.empty()) save_corpus(corpus, out_path);
        const auto histogram = annotation_histogram(corpus);
        std::size_t hapaxes = 0;
        for (const auto& [label, count] : histogram) hapaxes += count == 1 ? 1 : 0;
        std::set<std::string> participants;
        for (const auto& d : corpus.dialogs()) participants.insert(d.participants.begin(), d.participants.end());
        ordered_json j;
        j["version_id"] = corpus.version_id();
        j["dialogs"] = corpus.dialogs().size();
        j["participants"] = participants.size();
        j["turns"] = corpus.turn_count();
        j["questions"] = corpus.questions().size();
        j["distinct_labels"] = histogram.size();
        j["hapax_labels"] = hapaxes;
        print_json(out, j);
        return kExitOk;
      };
    });
  }

  // anonymize
  std::string usernames_path, dictionary_path, report_path, token_prefix = "user";
  bool force = false;
  {
    auto* cmd = app.add_subcommand("anonymize", "Replace usernames with indexed tokens");
    cmd->add_option("--corpus", corpus_path, "Corpus JSONL")->required();
    cmd->add_option("--usernames", usernames_path, "One username per line")->required();
    cmd->add_option("--dictionary", dictionary_path, "Common-word list (default: bundled 10k list)");
    cmd->add_option("--prefix", token_prefix, "Replacement token prefix")->capture_default_str();
    cmd->add_flag("--force", force, "Replace usernames that are dictionary words too");
    cmd->add_option("--out", out_path, "Anonymized corpus JSONL")->required();
    cmd->add_option("--report", report_path, "Write the full report JSON here");
    cmd->callback([&] {
      action = [&] {
        const auto corpus = load_corpus(corpus_path);
        const auto usernames = read_lines(usernames_path);
        const WordSet custom = dictionary_path.empty() ? WordSet{} : load_word_list(dictionary_path);
        const WordSet& dictionary = dictionary_path.empty() ? bundled_common_words() : custom;
        const auto [result, report] = anonymize(corpus, usernames, dictionary, {force, token_prefix});
        save_corpus(result, out_path);
        const auto report_json = to_json(report);
        if (!report_path.empty()) {
          std::ofstream r(report_path, std::ios::binary);
          if (!r) throw Error("cannot write " + report_path);
          r << report_json.dump(2) << '\n';
        }
        std::size_t applied = 0;
        for (const auto& rep : report.replacements) applied += rep.applied ? 1 : 0;
        ordered_json j;
        j["version_id"] = result.version_id();
        j["replacements"] = applied;
        j["skipped_collisions"] = report.collisions.size();
        j["collided_usernames"] = report.collided_usernames;
        print_json(out, j);
        return kExitOk;
      };
    });
  }

  // audit
  std::string queue_path;
  std::vector<std::size_t> audit_indices;
  {
    auto* cmd = app.add_subcommand("audit", "Audit annotations with a classifier and check anonymization tokens");
    cmd->add_option("--corpus", corpus_path, "Corpus JSONL")->required();
    cmd->add_option("--prefix", token_prefix, "Anonymization token prefix")->capture_default_str();
    cmd->add_option("--token-indices", audit_indices, "Only flag tokens with these indices")->delimiter(',');
    cmd->add_option("--out", queue_path, "Write the disagreement queue JSONL here");
    cmd->callback([&] {
      action = [&] {
        const auto descriptor = backend_descriptor(s);
        ensure_backend_allowed_for_audit(descriptor);
        const auto config = pipeline_config(s);
        auto corpus = std::make_shared<const Corpus>(load_corpus(corpus_path));
        auto backend = make_backend(descriptor);
        const auto state = run_round(corpus, 1, config, *backend);
        if (!queue_path.empty()) {
          std::ofstream q(queue_path, std::ios::binary);
          if (!q) throw Error("cannot write " + queue_path);
          write_disagreements(state.disagreements, q);
        }
        std::optional<std::set<std::size_t>> only;
        if (!audit_indices.empty()) only = std::set<std::size_t>(audit_indices.begin(), audit_indices.end());
        ordered_json j;
        j["model"] = state.model;
        j["metrics"] = to_json(state.metrics);
        j["disagreements"] = state.disagreements.size();
        j["anonymization_suspects"] = audit_anonymization(*corpus, token_prefix, only);
        print_json(out, j);
        return kExitOk;
      };
    });
  }

  // pairs build|split|export
  std::string pairs_path, which_split = "test";
  {
    auto* pairs = app.add_subcommand("pairs", "Build, split and export pair datasets");
    pairs->require_subcommand(1);

    auto* build = pairs->add_subcommand("build", "Build and split all ordered question pairs");
    build->add_option("--corpus", corpus_path, "Corpus JSONL")->required();
    build->add_option("--out", out_path, "Pairs TSV")->required();
    build->callback([&] {
      action = [&] {
        const auto corpus = load_corpus(corpus_path);
        const auto questions = filter_hapaxes(corpus, s.min_count);
        auto dataset = build_pairs(questions);
        if (s.balance) dataset = balance(dataset, s.seed);
        dataset = split(std::move(dataset), split_spec(s));
        save_pairs(dataset, out_path);
        print_json(out, stats_json(dataset.stats));
        return kExitOk;
      };
    });

    auto* resplit = pairs->add_subcommand("split", "Reassign the partitions of a pairs file");
    resplit->add_option("--pairs", pairs_path, "Pairs TSV")->required();
    resplit->add_option("--out", out_path, "Pairs TSV")->required();
    resplit->callback([&] {
      action = [&] {
        auto dataset = load_pairs(pairs_path);
        if (s.balance) dataset = balance(dataset, s.seed);
        dataset = split(std::move(dataset), split_spec(s));
        save_pairs(dataset, out_path);
        print_json(out, stats_json(dataset.stats));
        return kExitOk;
      };
    });

    auto* exp = pairs->add_subcommand("export", "Write one partition of a pairs file");
    exp->add_option("--pairs", pairs_path, "Pairs TSV")->required();
    exp->add_option("--split", which_split, "train, val or test")
        ->check(CLI::IsMember({"train", "val", "test"}))
        ->capture_default_str();
    exp->add_option("--out", out_path, "Pairs TSV")->required();
    exp->callback([&] {
      action = [&] {
        const auto dataset = load_pairs(pairs_path);
        const auto wanted = split_from_string(which_split);
        PairDataset part;
        for (std::size_t i = 0; i < dataset.pairs.size(); ++i) {
          if (dataset.split_of[i] != wanted) continue;
          part.pairs.push_back(dataset.pairs[i]);
          part.split_of.push_back(wanted);
        }
        part.stats = compute_stats(part.pairs, part.split_of);
        save_pairs(part, out_path);
        print_json(out, stats_json(part.stats));
        return kExitOk;
      };
    });
  }

  // train
  {
    auto* cmd = app.add_subcommand("train", "Train the backend on the train and val partitions");
    cmd->add_option("--pairs", pairs_path, "Pairs TSV")->required();
    cmd->callback([&] {
      action = [&] {
        const auto descriptor = backend_descriptor(s);
        const auto config = pipeline_config(s);
        const auto dataset = load_pairs(pairs_path);
        auto backend = make_backend(descriptor);
        const auto train = select_pairs(dataset, "train");
        const auto val = select_pairs(dataset, "val");
        const auto job = wait_for_training(*backend, backend->train(train, val, config.train_config));
        ordered_json j;
        j["job_id"] = job.job_id;
        j["status"] = std::string(to_string(job.status));
        j["model"] = backend->model_name();
        j["train_pairs"] = train.size();
        j["val_pairs"] = val.size();
        print_json(out, j);
        return kExitOk;
      };
    });
  }

  // predict
  {
    auto* cmd = app.add_subcommand("predict", "Score pairs with the backend");
    cmd->add_option("--pairs", pairs_path, "Pairs TSV")->required();
    cmd->add_option("--split", which_split, "train, val, test or all")
        ->check(CLI::IsMember({"train", "val", "test", "all"}))
        ->capture_default_str();
    cmd->add_option("--out", out_path, "Predictions JSONL")->required();
    cmd->callback([&] {
      action = [&] {
        const auto descriptor = backend_descriptor(s);
        const auto dataset = load_pairs(pairs_path);
        auto backend = make_backend(descriptor);
        const auto pairs = select_pairs(dataset, which_split);
        const auto predictions = backend->predict(pairs);
        std::ofstream p(out_path, std::ios::binary);
        if (!p) throw Error("cannot write " + out_path);
        write_predictions(predictions, p);
        std::size_t positive = 0;
        for (const auto& rec : predictions) positive += static_cast<std::size_t>(rec.predicted);
        ordered_json j;
        j["model"] = backend->model_name();
        j["predictions"] = predictions.size();
        j["predicted_positive"] = positive;
        print_json(out, j);
        return kExitOk;
      };
    });
  }

  // evaluate
  std::string preds_path;
  {
    auto* cmd = app.add_subcommand("evaluate", "Score predictions against gold labels");
    cmd->add_option("--preds", preds_path, "Predictions JSONL")->required();
    cmd->add_option("--pairs", pairs_path, "Pairs TSV")->required();
    cmd->add_option("--split", which_split, "train, val, test or all")
        ->check(CLI::IsMember({"train", "val", "test", "all"}))
        ->capture_default_str();
    cmd->callback([&] {
      action = [&] {
        const auto dataset = load_pairs(pairs_path);
        std::ifstream p(preds_path, std::ios::binary);
        if (!p) throw Error("cannot open " + preds_path);
        const auto predictions = read_predictions(p, s.threshold);
        print_json(out, to_json(evaluate(predictions, select_pairs(dataset, which_split))));
        return kExitOk;
      };
    });
  }

  // disagreements
  {
    auto* cmd = app.add_subcommand("disagreements", "Rank pairs where prediction and gold differ");
    cmd->add_option("--preds", preds_path, "Predictions JSONL")->required();
    cmd->add_option("--pairs", pairs_path, "Pairs TSV")->required();
    cmd->add_option("--corpus", corpus_path, "Corpus JSONL the pairs were built from")->required();
    cmd->add_option("--split", which_split, "train, val, test or all")
        ->check(CLI::IsMember({"train", "val", "test", "all"}))
        ->capture_default_str();
    cmd->add_option("--out", out_path, "Disagreement queue JSONL")->required();
    cmd->callback([&] {
      action = [&] {
        const auto corpus = load_corpus(corpus_path);
        const auto dataset = load_pairs(pairs_path);
        std::ifstream p(preds_path, std::ios::binary);
        if (!p) throw Error("cannot open " + preds_path);
        const auto predictions = read_predictions(p, s.threshold);
        const auto queue = extract_disagreements(predictions, select_pairs(dataset, which_split), corpus);
        std::ofstream q(out_path, std::ios::binary);
        if (!q) throw Error("cannot write " + out_path);
        write_disagreements(queue, q);
        ordered_json j;
        j["disagreements"] = queue.size();
        print_json(out, j);
        return kExitOk;
      };
    });
  }

  // triage serve
  std::string ledger_path, host = "127.0.0.1", auth_token;
  int port = 8080;
  {
    auto* triage = app.add_subcommand("triage", "Triage service");
    triage->require_subcommand(1);
    auto* serve = triage->add_subcommand("serve", "Serve the review REST API");
    serve->add_option("--corpus", corpus_path, "Base corpus JSONL")->required();
    serve->add_option("--ledger", ledger_path, "Ledger JSONL")->required();
    serve->add_option("--host", host, "Bind address")->capture_default_str();
    serve->add_option("--port", port, "Port, 0 for any")->capture_default_str();
    serve->add_option("--token", auth_token, "Bearer token required on /api (default: none)");
    serve->callback([&] {
      action = [&] {
        ServiceConfig config;
        config.host = host;
        config.port = port;
        config.corpus_path = corpus_path;
        config.ledger_path = ledger_path;
        config.backend = backend_descriptor(s);
        config.pipeline = pipeline_config(s);
        config.auth_token = auth_token;
        TriageService service(std::move(config));
        serve_until_signalled(service, err);
        return kExitOk;
      };
    });
  }

  // verdict add
  std::string pair_id, category, note, actor = "cli", action_json, timestamp;
  {
    auto* verdict = app.add_subcommand("verdict", "Record triage verdicts");
    verdict->require_subcommand(1);
    auto* add = verdict->add_subcommand("add", "Append a verdict to the ledger");
    add->add_option("--corpus", corpus_path, "Base corpus JSONL")->required();
    add->add_option("--ledger", ledger_path, "Ledger JSONL")->required();
    add->add_option("--pair", pair_id, "Disagreement pair id")->required();
    add->add_option("--category", category, "prediction_error, annotation_error or prep_error")->required();
    add->add_option("--action", action_json, "Revision as JSON, e.g. {\"type\":\"relabel_turn\",...}");
    add->add_option("--note", note, "Free-text note");
    add->add_option("--actor", actor, "Who decided")->capture_default_str();
    add->add_option("--timestamp", timestamp, "ISO 8601 UTC (default: now)");
    add->callback([&] {
      action = [&] {
        auto session = TriageSession::open(corpus_path, ledger_path, pipeline_config(s),
                                           make_backend(backend_descriptor(s)));
        Verdict v{pair_id, verdict_category_from_string(category), note, actor, timestamp_or_now(timestamp)};
        std::optional<RevisionAction> revision;
        if (!action_json.empty()) {
          try {
            revision = revision_action_from_json(json::parse(action_json));
          } catch (const json::exception& e) {
            throw ValidationError(std::string("--action is not JSON: ") + e.what());
          }
        }
        const auto& entry = session.add_verdict(v, std::move(revision));
        ordered_json j;
        j["entry"] = to_json(entry);
        j["open"] = session.current().open_count();
        print_json(out, j);
        return kExitOk;
      };
    });
  }

  // apply
  bool closed_rounds_only = false;
  {
    auto* cmd = app.add_subcommand("apply", "Replay the ledger's revisions onto the base corpus");
    cmd->add_option("--corpus", corpus_path, "Base corpus JSONL")->required();
    cmd->add_option("--ledger", ledger_path, "Ledger JSONL")->required();
    cmd->add_option("--out", out_path, "Revised corpus JSONL")->required();
    cmd->add_flag("--closed-rounds-only", closed_rounds_only, "Skip revisions staged in the unfinished round");
    cmd->callback([&] {
      action = [&] {
        const auto base = load_corpus(corpus_path);
        const auto ledger = load_ledger(ledger_path);
        const auto revised = replay_corpus(base, ledger, !closed_rounds_only);
        save_corpus(revised, out_path);
        ordered_json j;
        j["version_id"] = revised.version_id();
        j["ledger_entries"] = ledger.size();
        j["questions"] = revised.questions().size();
        print_json(out, j);
        return kExitOk;
      };
    });
  }

  // round next
  {
    auto* round = app.add_subcommand("round", "Round control");
    round->require_subcommand(1);
    auto* next = round->add_subcommand("next", "Apply staged revisions and run the next round");
    next->add_option("--corpus", corpus_path, "Base corpus JSONL")->required();
    next->add_option("--ledger", ledger_path, "Ledger JSONL")->required();
    next->add_option("--actor", actor, "Who advanced the round")->capture_default_str();
    next->add_option("--timestamp", timestamp, "ISO 8601 UTC (default: now)");
    next->callback([&] {
      action = [&] {
        auto session = TriageSession::open(corpus_path, ledger_path, pipeline_config(s),
                                           make_backend(backend_descriptor(s)));
        session.advance_round(actor, timestamp_or_now(timestamp));
        print_json(out, round_report_json(session.current()));
        return kExitOk;
      };
    });
  }

  // report
  {
    auto* cmd = app.add_subcommand("report", "Metrics and triage tallies for every round");
    cmd->add_option("--corpus", corpus_path, "Base corpus JSONL")->required();
    cmd->add_option("--ledger", ledger_path, "Ledger JSONL")->required();
    cmd->callback([&] {
      action = [&] {
        const auto session = TriageSession::open(corpus_path, ledger_path, pipeline_config(s),
                                                 make_backend(backend_descriptor(s)));
        print_json(out, rounds_json(session));
        return kExitOk;
      };
    });
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
      app.exit(e, out, err);
      return kExitOk;
    }
    app.exit(e, err, err);
    return kExitValidation;
  }

  try {
    return action ? action() : kExitValidation;
  } catch (const TransportError& e) {
    err << "error: backend unreachable: " << e.what() << '\n';
    return kExitBackend;
  } catch (const BackendError& e) {
    err << "error: backend: " << e.what() << '\n';
    return kExitBackend;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
}

}  // namespace concord::cli
