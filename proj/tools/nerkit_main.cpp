// Copyright 2026 The nerkit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// nerkit command-line front end: train, tag, eval, lexmatch.
//
// Exit codes: 0 success, 1 usage/config error, 2 data error,
// 3 diverged or failed trial.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "nerkit/nerkit.hpp"

namespace {

using namespace nerkit;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitFailed = 3;

// "NAME=PATH", or a bare path named after its file stem.
std::pair<std::string, std::string> split_lexicon_arg(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq == std::string::npos) {
    return {std::filesystem::path(arg).stem().string(), arg};
  }
  if (eq == 0 || eq + 1 == arg.size()) {
    throw ConfigError("bad --lexicon value '" + arg + "', expected NAME=PATH");
  }
  return {arg.substr(0, eq), arg.substr(eq + 1)};
}

struct OutputTarget {
  std::ofstream file;
  std::ostream* stream = &std::cout;

  explicit OutputTarget(const std::string& path) {
    if (path.empty() || path == "-") return;
    file.open(path, std::ios::trunc);
    if (!file) throw DataError("cannot open '" + path + "' for writing");
    stream = &file;
  }
};

struct TrainArgs {
  std::string config_path, train, dev, model_dir, embeddings, mode = "partial",
      encoding = "bioes", fail_metric;
  std::vector<std::string> lexicons;
  std::uint64_t seed = 0;
  double dropout = 0, lr = 0, fail_threshold = 0;
  std::size_t epochs = 0, batch_size = 0, lstm_size = 0;
  bool quiet = false;
};

int run_train(const TrainArgs& a, const CLI::App& cmd) {
  RunConfig rc;
  if (!a.config_path.empty()) {
    std::ifstream in(a.config_path);
    if (!in) throw ConfigError("cannot open config '" + a.config_path + "'");
    try {
      rc = nlohmann::json::parse(in).get<RunConfig>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("bad config file: " + std::string(e.what()));
    }
  }
  const auto given = [&](const char* name) { return cmd.count(name) > 0; };
  if (given("--train")) rc.train_path = a.train;
  if (given("--dev")) rc.dev_path = a.dev;
  if (given("--model-dir")) rc.model_dir = a.model_dir;
  if (given("--embeddings")) rc.embeddings = a.embeddings;
  if (given("--seed")) rc.seed = a.seed;
  if (given("--dropout")) rc.dropout = a.dropout;
  if (given("--lr")) rc.learning_rate = a.lr;
  if (given("--epochs")) rc.epochs = a.epochs;
  if (given("--batch-size")) rc.batch_size = a.batch_size;
  if (given("--lstm-size")) rc.lstm_size = a.lstm_size;
  if (given("--fail-metric")) rc.failure.metric = parse_failure_metric(a.fail_metric);
  if (given("--fail-threshold")) rc.failure.threshold = a.fail_threshold;
  if (given("--lexicon")) {
    rc.lexicons.clear();
    for (const std::string& arg : a.lexicons) {
      auto [name, path] = split_lexicon_arg(arg);
      rc.lexicons.push_back({name, path, a.mode, a.encoding});
    }
  }
  rc.validate();
  if (rc.failure.metric == FailureMetric::kDevF1 && rc.dev_path.empty()) {
    throw ConfigError("failure metric dev_f1 needs a dev set");
  }
  std::cerr << "effective config: " << nlohmann::json(rc).dump() << "\n";

  TrainResult result;
  try {
    result = train_from_files(rc, a.quiet ? nullptr : &std::cerr);
  } catch (const TrainingDiverged& e) {
    std::cerr << "status: diverged (" << e.what() << ")\n";
    return kExitFailed;
  }
  if (detect_failed_trial(result.log, rc.failure) == TrialOutcome::kFail) {
    std::cerr << "status: failed_trial (" << to_string(rc.failure.metric) << " below "
              << rc.failure.threshold << ")\n";
    return kExitFailed;
  }
  std::cerr << "status: ok, model written to " << result.final_checkpoint.string() << "\n";
  return kExitOk;
}

struct TagArgs {
  std::string model, input, output, embeddings;
  std::vector<std::string> lexicons;
  bool constrained = false;
};

int run_tag(const TagArgs& a) {
  std::map<std::string, std::string> overrides;
  for (const std::string& arg : a.lexicons) {
    auto [name, path] = split_lexicon_arg(arg);
    overrides[name] = path;
  }
  const TaggerModel model = load_checkpoint(a.model, overrides, a.embeddings);
  ConllOptions opts;
  opts.labeled = false;
  Corpus corpus = read_conll(a.input, opts);
  preprocess_corpus(corpus, model.config.split_digits);
  const TaggedCorpus tagged = tag_corpus(model, corpus, a.constrained);
  OutputTarget out(a.output);
  write_conll(*out.stream, corpus, &tagged.tags);
  return kExitOk;
}

// First sentence index (and its first line) where the two corpora stop
// lining up, or nothing.
std::optional<std::pair<std::size_t, std::size_t>> first_divergence(const Corpus& gold,
                                                                    const Corpus& pred) {
  const std::size_t n = std::min(gold.sentences.size(), pred.sentences.size());
  for (std::size_t s = 0; s < n; ++s) {
    const Sentence& g = gold.sentences[s];
    const Sentence& p = pred.sentences[s];
    if (g.size() != p.size() || g.tokens != p.tokens) {
      return std::make_pair(s, g.lines.empty() ? 0 : g.lines.front());
    }
  }
  if (gold.sentences.size() != pred.sentences.size()) {
    const std::size_t line = n < gold.sentences.size() && !gold.sentences[n].lines.empty()
                                 ? gold.sentences[n].lines.front()
                                 : 0;
    return std::make_pair(n, line);
  }
  return std::nullopt;
}

struct EvalArgs {
  std::string gold, pred, dialect = "auto";
};

int run_eval(const EvalArgs& a) {
  ConllOptions gold_opts;
  gold_opts.dialect = parse_dialect(a.dialect);
  const Corpus gold = read_conll(a.gold, gold_opts);
  ConllOptions pred_opts;
  pred_opts.dialect = TagDialect::kBioes;
  const Corpus pred = read_conll(a.pred, pred_opts);
  if (auto d = first_divergence(gold, pred)) {
    throw AlignmentError("gold and predictions diverge at sentence " +
                         std::to_string(d->first + 1) + " (gold line " +
                         std::to_string(d->second) + ")");
  }
  std::vector<std::vector<EntitySpan>> gs, ps;
  std::size_t tokens = 0;
  for (const Sentence& s : gold.sentences) {
    gs.push_back(bioes_strings_to_spans(s.tags));
    tokens += s.size();
  }
  for (const Sentence& s : pred.sentences) ps.push_back(bioes_strings_to_spans(s.tags));
  EvalReport report = evaluate_f1(gs, ps);
  report.tokens = tokens;
  std::cout << format_report(report);
  return kExitOk;
}

struct LexmatchArgs {
  std::vector<std::string> lexicons, categories;
  std::string input, output, mode = "partial", encoding = "bioes";
};

int run_lexmatch(const LexmatchArgs& a) {
  const MatchMode mode = parse_match_mode(a.mode);
  const LexEncoding encoding = parse_lex_encoding(a.encoding);
  std::map<std::string, std::string> category_map;
  for (const std::string& c : a.categories) category_map[c] = c;
  std::vector<Lexicon> lexicons;
  for (const std::string& arg : a.lexicons) {
    lexicons.push_back(load_lexicon(split_lexicon_arg(arg).second, category_map));
  }
  ConllOptions opts;
  opts.labeled = false;
  const Corpus corpus = read_conll(a.input, opts);
  std::vector<std::vector<std::string>> extra;
  for (const Sentence& s : corpus.sentences) {
    std::vector<std::string> cols(s.size());
    for (const Lexicon& lex : lexicons) {
      const MatchMarks marks = match_sentence(lex, s.tokens, mode);
      for (std::size_t c = 0; c < marks.size(); ++c) {
        for (std::size_t t = 0; t < s.size(); ++t) {
          if (!cols[t].empty()) cols[t] += ' ';
          if (encoding == LexEncoding::kBioes) {
            cols[t] += mark_letter(marks[c][t]);
          } else {
            cols[t] += marks[c][t] == LexMark::kO ? 'N' : 'Y';
          }
        }
      }
    }
    extra.push_back(std::move(cols));
  }
  OutputTarget out(a.output);
  for (const Lexicon& lex : lexicons) {
    *out.stream << "# columns:";
    for (const std::string& c : lex.category_names()) *out.stream << ' ' << c;
    *out.stream << '\n';
  }
  bool any_columns = false;
  for (const Lexicon& lex : lexicons) any_columns |= lex.num_categories() > 0;
  write_conll(*out.stream, corpus, any_columns ? &extra : nullptr);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nerkit: BLSTM-CNN named entity recognition toolkit"};
  app.require_subcommand(1);

  TrainArgs ta;
  CLI::App* train = app.add_subcommand("train", "train a tagger");
  train->add_option("--config", ta.config_path, "JSON run configuration");
  train->add_option("--train", ta.train, "training corpus (CoNLL columns)");
  train->add_option("--dev", ta.dev, "development corpus");
  train->add_option("--model-dir", ta.model_dir, "output directory for checkpoints");
  train->add_option("--seed", ta.seed, "random seed");
  train->add_option("--dropout", ta.dropout, "probability of discarding an LSTM output");
  train->add_option("--lr", ta.lr, "learning rate");
  train->add_option("--epochs", ta.epochs, "number of epochs");
  train->add_option("--batch-size", ta.batch_size, "sentences per mini-batch");
  train->add_option("--lstm-size", ta.lstm_size, "LSTM state size");
  train->add_option("--embeddings", ta.embeddings, "pretrained word embeddings");
  train->add_option("--lexicon", ta.lexicons, "lexicon feature NAME=PATH (repeatable)");
  train->add_option("--mode", ta.mode, "lexicon match mode for --lexicon: exact, partial, collobert");
  train->add_option("--encoding", ta.encoding, "lexicon encoding for --lexicon: bioes, yn");
  train->add_option("--fail-metric", ta.fail_metric, "none, dev_f1 or train_subset_f1");
  train->add_option("--fail-threshold", ta.fail_threshold, "minimum final F1 for a passing trial");
  train->add_flag("--quiet", ta.quiet, "no per-epoch progress");

  TagArgs tg;
  CLI::App* tag = app.add_subcommand("tag", "tag a corpus with a trained model");
  tag->add_option("--model", tg.model, "checkpoint (.nstp)")->required();
  tag->add_option("--input", tg.input, "input CoNLL file")->required();
  tag->add_option("--output", tg.output, "output file (default stdout)");
  tag->add_option("--lexicon", tg.lexicons, "override a lexicon path NAME=PATH");
  tag->add_option("--embeddings", tg.embeddings, "embeddings to check against the model");
  tag->add_flag("--constrained", tg.constrained, "restrict output to valid BIOES sequences");

  EvalArgs ev;
  CLI::App* eval = app.add_subcommand("eval", "score predictions against gold tags");
  eval->add_option("--gold", ev.gold, "gold CoNLL file (tag in last column)")->required();
  eval->add_option("--pred", ev.pred, "predicted CoNLL file (tag in last column)")->required();
  eval->add_option("--dialect", ev.dialect, "gold tag dialect: auto, iob1, bio2, bioes");

  LexmatchArgs lm;
  CLI::App* lexmatch = app.add_subcommand("lexmatch", "annotate tokens with lexicon matches");
  lexmatch->add_option("--lexicon", lm.lexicons, "lexicon NAME=PATH (repeatable)")->required();
  lexmatch->add_option("--input", lm.input, "input CoNLL file")->required();
  lexmatch->add_option("--output", lm.output, "output file (default stdout)");
  lexmatch->add_option("--mode", lm.mode, "exact, partial or collobert");
  lexmatch->add_option("--encoding", lm.encoding, "bioes or yn");
  lexmatch->add_option("--categories", lm.categories,
                       "fixed category list; other labels are an error")
      ->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train) return run_train(ta, *train);
    if (*tag) return run_tag(tg);
    if (*eval) return run_eval(ev);
    if (*lexmatch) return run_lexmatch(lm);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const TrainingDiverged& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return kExitFailed;
  } catch (const Error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
