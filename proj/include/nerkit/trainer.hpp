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

#ifndef NERKIT_TRAINER_HPP_
#define NERKIT_TRAINER_HPP_

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nerkit/data_io.hpp"
#include "nerkit/errors.hpp"
#include "nerkit/model.hpp"
#include "nerkit/parameters.hpp"
#include "nerkit/tagger.hpp"
#include "nerkit/tagging.hpp"

namespace nerkit {

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_subset_f1 = 0.0;
  std::optional<double> dev_f1;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::string status = "ok";  // ok | diverged
};

inline nlohmann::json to_json(const EpochRecord& r) {
  nlohmann::json j = {{"epoch", r.epoch},
                      {"train_loss", r.train_loss},
                      {"train_subset_f1", r.train_subset_f1},
                      {"seconds", r.seconds}};
  j["dev_f1"] = r.dev_f1 ? nlohmann::json(*r.dev_f1) : nlohmann::json(nullptr);
  return j;
}

enum class TrialOutcome { kPass, kFail };

/// A trial fails when the rule's metric at the final epoch is below the
/// threshold.
inline TrialOutcome detect_failed_trial(const TrainLog& log, const FailureRule& rule) {
  if (rule.metric == FailureMetric::kNone) return TrialOutcome::kPass;
  if (log.epochs.empty()) throw ConfigError("training log has no completed epochs");
  const EpochRecord& last = log.epochs.back();
  double value = 0.0;
  if (rule.metric == FailureMetric::kDevF1) {
    if (!last.dev_f1) throw ConfigError("failure rule needs dev F1 but no dev set was used");
    value = *last.dev_f1;
  } else {
    value = last.train_subset_f1;
  }
  return value < rule.threshold ? TrialOutcome::kFail : TrialOutcome::kPass;
}

struct TaggedCorpus {
  std::vector<std::vector<std::string>> tags;  // predicted BIOES strings
  EvalReport report;                            // empty when the corpus is unlabeled
};

inline TaggedCorpus tag_corpus(const TaggerModel& m, const Corpus& corpus, bool constrained,
                               std::size_t first = 0) {
  TaggedCorpus out;
  std::vector<std::vector<EntitySpan>> gold, pred;
  for (std::size_t s = first; s < corpus.sentences.size(); ++s) {
    const Sentence& sent = corpus.sentences[s];
    const std::vector<int> ids = m.predict(m.featurize(sent), constrained);
    std::vector<std::string> tags;
    for (int id : ids) tags.push_back(m.vocabs.tags.name(id));
    pred.push_back(bioes_to_spans(ids, m.vocabs.tags));
    out.tags.push_back(std::move(tags));
    out.report.tokens += sent.size();
    if (corpus.labeled) gold.push_back(bioes_strings_to_spans(sent.tags));
  }
  if (corpus.labeled) {
    const std::size_t tokens = out.report.tokens;
    out.report = evaluate_f1(gold, pred);
    out.report.tokens = tokens;
  }
  return out;
}

/// Holds an exclusive lock file in a model directory for its lifetime.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& dir) : path_(dir / "LOCK") {
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) {
      throw ConfigError("model directory '" + dir.string() +
                        "' is locked by another training run (remove LOCK if stale)");
    }
    std::fclose(f);
  }
  ~DirectoryLock() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  std::filesystem::path path_;
};

struct TrainResult {
  TaggerModel model;
  TrainLog log;
  std::filesystem::path final_checkpoint;
};

inline std::string epoch_name(std::size_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "epoch_%03zu", epoch);
  return buf;
}

/// Mini-batch SGD over equal-length batches. Writes per-epoch checkpoints,
/// the best-dev checkpoint ("best.nstp"), the final model ("model.nstp"),
/// per-epoch dev predictions and a JSON-lines log into `model_dir`.
/// On divergence the partial log is written and TrainingDiverged rethrown.
inline TrainResult train_model(const RunConfig& rc, Corpus train, std::optional<Corpus> dev,
                               std::ostream* progress = nullptr) {
  rc.validate();
  namespace fs = std::filesystem;
  const fs::path dir = rc.model_dir.empty() ? fs::path(".") : fs::path(rc.model_dir);
  fs::create_directories(dir);
  DirectoryLock lock(dir);

  preprocess_corpus(train, rc.split_digits);
  if (dev) preprocess_corpus(*dev, rc.split_digits);

  std::optional<PretrainedEmbeddings> pretrained;
  if (!rc.embeddings.empty()) pretrained = load_embeddings(rc.embeddings);

  TrainResult result;
  TaggerModel& m = result.model;
  m.config = rc;
  m.vocabs = build_vocabs(train, pretrained ? &*pretrained : nullptr);
  m.lexicons = load_lexicon_features(rc.lexicons);
  m.model = model_config_for(rc, m.vocabs, m.lexicons);

  Rng rng(rc.seed);
  m.params = init_parameters(m.model, rng, pretrained ? &*pretrained : nullptr, &m.vocabs.words);

  std::vector<FeaturizedSentence> features;
  features.reserve(train.sentences.size());
  for (const Sentence& s : train.sentences) features.push_back(m.featurize(s));

  std::ofstream log_file(dir / "train_log.jsonl", std::ios::trunc);
  const std::size_t subset_start =
      train.sentences.size() > rc.train_subset_size ? train.sentences.size() - rc.train_subset_size : 0;
  double best_dev = -1.0;

  result.final_checkpoint = dir / "model.nstp";
  for (std::size_t epoch = 1; epoch <= rc.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    double loss_sum = 0.0;
    try {
      for (const Batch& b : make_batches(train, rc.batch_size, rng)) {
        std::vector<const FeaturizedSentence*> batch;
        for (std::size_t i : b.sentences) batch.push_back(&features[i]);
        loss_sum += loss_and_gradients(batch, m.params, m.model, rng) *
                    static_cast<double>(batch.size());
        sgd_update(m.params, rc.learning_rate);
      }
    } catch (const TrainingDiverged&) {
      result.log.status = "diverged";
      log_file << nlohmann::json{{"epoch", epoch}, {"status", "diverged"}}.dump() << "\n";
      throw;
    }
    rec.train_loss = loss_sum / static_cast<double>(train.sentences.size());
    rec.train_subset_f1 = tag_corpus(m, train, false, subset_start).report.f1();
    bool improved = false;
    if (dev) {
      const TaggedCorpus tagged = tag_corpus(m, *dev, false);
      rec.dev_f1 = tagged.report.f1();
      if (rc.write_dev_predictions) {
        std::ofstream out(dir / ("dev_pred_" + epoch_name(epoch) + ".txt"), std::ios::trunc);
        write_conll(out, *dev, &tagged.tags);
      }
      if (*rec.dev_f1 > best_dev) {
        best_dev = *rec.dev_f1;
        improved = true;
      }
    }
    if (epoch % rc.checkpoint_every == 0 || epoch == rc.epochs) {
      save_checkpoint(m, dir / (epoch_name(epoch) + ".nstp"), epoch);
    }
    if (improved) save_checkpoint(m, dir / "best.nstp", epoch);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log_file << to_json(rec).dump() << "\n";
    log_file.flush();
    if (progress) {
      *progress << "epoch " << epoch << " loss " << rec.train_loss << " train_f1 "
                << format_percent(rec.train_subset_f1);
      if (rec.dev_f1) *progress << " dev_f1 " << format_percent(*rec.dev_f1);
      *progress << "\n";
    }
    result.log.epochs.push_back(rec);
  }
  save_checkpoint(m, result.final_checkpoint, rc.epochs);
  return result;
}

inline TrainResult train_from_files(const RunConfig& rc, std::ostream* progress = nullptr) {
  if (rc.train_path.empty()) throw ConfigError("no training file given");
  ConllOptions opts;
  opts.dialect = parse_dialect(rc.tag_dialect);
  Corpus train = read_conll(rc.train_path, opts);
  std::optional<Corpus> dev;
  if (!rc.dev_path.empty()) dev = read_conll(rc.dev_path, opts);
  return train_model(rc, std::move(train), std::move(dev), progress);
}

}  // namespace nerkit

#endif  // NERKIT_TRAINER_HPP_
