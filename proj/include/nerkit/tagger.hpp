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

// Run configuration, the trained-model bundle, and checkpoint files.
//
// A checkpoint is a parameter file (NSTP1) plus a JSON sidecar at
// "<path>.json" holding the run configuration, vocabularies, tag
// categories and lexicon layout needed to rebuild the featurizer.

#ifndef NERKIT_TAGGER_HPP_
#define NERKIT_TAGGER_HPP_

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nerkit/crf.hpp"
#include "nerkit/data_io.hpp"
#include "nerkit/errors.hpp"
#include "nerkit/lexicon.hpp"
#include "nerkit/model.hpp"
#include "nerkit/parameters.hpp"
#include "nerkit/tagging.hpp"
#include "nerkit/word_features.hpp"

namespace nerkit {

struct LexiconSpec {
  std::string name;
  std::string path;
  std::string mode = "partial";
  std::string encoding = "bioes";

  friend bool operator==(const LexiconSpec&, const LexiconSpec&) = default;
};

enum class FailureMetric { kNone, kDevF1, kTrainSubsetF1 };

struct FailureRule {
  FailureMetric metric = FailureMetric::kNone;
  double threshold = 0.0;

  friend bool operator==(const FailureRule&, const FailureRule&) = default;
};

inline FailureMetric parse_failure_metric(const std::string& s) {
  if (s == "none") return FailureMetric::kNone;
  if (s == "dev_f1") return FailureMetric::kDevF1;
  if (s == "train_subset_f1") return FailureMetric::kTrainSubsetF1;
  throw ConfigError("unknown failure metric '" + s + "'");
}

inline std::string to_string(FailureMetric m) {
  switch (m) {
    case FailureMetric::kNone: return "none";
    case FailureMetric::kDevF1: return "dev_f1";
    case FailureMetric::kTrainSubsetF1: return "train_subset_f1";
  }
  return "none";
}

/// Every knob of a training run. Defaults are the CoNLL-2003 settings.
struct RunConfig {
  std::string train_path;
  std::string dev_path;
  std::string model_dir;
  std::string embeddings;
  std::vector<LexiconSpec> lexicons;

  std::uint64_t seed = 1;
  std::size_t epochs = 80;
  std::size_t batch_size = 9;
  double learning_rate = 0.0105;
  double dropout = 0.68;

  std::size_t word_dim = 50;
  bool use_caps = true;
  bool use_char_cnn = true;
  std::size_t char_dim = 25;
  bool use_char_type = false;
  std::size_t conv_width = 3;
  std::size_t cnn_filters = 53;
  std::size_t lstm_size = 275;
  std::size_t lstm_layers = 1;

  std::string tag_dialect = "auto";
  bool split_digits = false;
  std::size_t checkpoint_every = 1;
  bool write_dev_predictions = true;
  std::size_t train_subset_size = 5000;
  FailureRule failure;

  void validate() const {
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
    if (lstm_size == 0 || lstm_layers == 0) throw ConfigError("LSTM size and layers must be >= 1");
    if (use_char_cnn && (conv_width == 0 || conv_width % 2 == 0)) {
      throw ConfigError("conv_width must be odd and >= 1");
    }
    if (use_char_cnn && (cnn_filters == 0 || char_dim == 0)) {
      throw ConfigError("cnn_filters and char_dim must be >= 1");
    }
    if (word_dim == 0) throw ConfigError("word_dim must be >= 1");
    if (checkpoint_every == 0) throw ConfigError("checkpoint_every must be >= 1");
    if (!(failure.threshold >= 0.0 && failure.threshold <= 100.0)) {
      throw ConfigError("failure threshold must be in [0, 100]");
    }
    parse_dialect(tag_dialect);
    for (const LexiconSpec& l : lexicons) {
      if (l.name.empty() || l.path.empty()) throw ConfigError("lexicon needs a name and a path");
      parse_match_mode(l.mode);
      parse_lex_encoding(l.encoding);
    }
  }
};

inline void to_json(nlohmann::json& j, const LexiconSpec& l) {
  j = {{"name", l.name}, {"path", l.path}, {"mode", l.mode}, {"encoding", l.encoding}};
}

inline void from_json(const nlohmann::json& j, LexiconSpec& l) {
  l.name = j.at("name").get<std::string>();
  l.path = j.at("path").get<std::string>();
  l.mode = j.value("mode", l.mode);
  l.encoding = j.value("encoding", l.encoding);
}

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  j = nlohmann::json{
      {"train", c.train_path},
      {"dev", c.dev_path},
      {"model_dir", c.model_dir},
      {"embeddings", c.embeddings},
      {"lexicons", c.lexicons},
      {"seed", c.seed},
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"learning_rate", c.learning_rate},
      {"dropout", c.dropout},
      {"word_dim", c.word_dim},
      {"use_caps", c.use_caps},
      {"use_char_cnn", c.use_char_cnn},
      {"char_dim", c.char_dim},
      {"use_char_type", c.use_char_type},
      {"conv_width", c.conv_width},
      {"cnn_filters", c.cnn_filters},
      {"lstm_size", c.lstm_size},
      {"lstm_layers", c.lstm_layers},
      {"tag_dialect", c.tag_dialect},
      {"split_digits", c.split_digits},
      {"checkpoint_every", c.checkpoint_every},
      {"write_dev_predictions", c.write_dev_predictions},
      {"train_subset_size", c.train_subset_size},
      {"failure_metric", to_string(c.failure.metric)},
      {"failure_threshold", c.failure.threshold},
  };
}

// Unknown keys are rejected so that typos do not silently fall back to
// defaults.
inline void from_json(const nlohmann::json& j, RunConfig& c) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::vector<std::string> known = {
      "train", "dev", "model_dir", "embeddings", "lexicons", "seed", "epochs",
      "batch_size", "learning_rate", "dropout", "word_dim", "use_caps", "use_char_cnn",
      "char_dim", "use_char_type", "conv_width", "cnn_filters", "lstm_size", "lstm_layers",
      "tag_dialect", "split_digits", "checkpoint_every", "write_dev_predictions",
      "train_subset_size", "failure_metric", "failure_threshold"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  try {
    c.train_path = j.value("train", c.train_path);
    c.dev_path = j.value("dev", c.dev_path);
    c.model_dir = j.value("model_dir", c.model_dir);
    c.embeddings = j.value("embeddings", c.embeddings);
    if (j.contains("lexicons")) c.lexicons = j.at("lexicons").get<std::vector<LexiconSpec>>();
    c.seed = j.value("seed", c.seed);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.dropout = j.value("dropout", c.dropout);
    c.word_dim = j.value("word_dim", c.word_dim);
    c.use_caps = j.value("use_caps", c.use_caps);
    c.use_char_cnn = j.value("use_char_cnn", c.use_char_cnn);
    c.char_dim = j.value("char_dim", c.char_dim);
    c.use_char_type = j.value("use_char_type", c.use_char_type);
    c.conv_width = j.value("conv_width", c.conv_width);
    c.cnn_filters = j.value("cnn_filters", c.cnn_filters);
    c.lstm_size = j.value("lstm_size", c.lstm_size);
    c.lstm_layers = j.value("lstm_layers", c.lstm_layers);
    c.tag_dialect = j.value("tag_dialect", c.tag_dialect);
    c.split_digits = j.value("split_digits", c.split_digits);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.write_dev_predictions = j.value("write_dev_predictions", c.write_dev_predictions);
    c.train_subset_size = j.value("train_subset_size", c.train_subset_size);
    c.failure.metric = parse_failure_metric(j.value("failure_metric", to_string(c.failure.metric)));
    c.failure.threshold = j.value("failure_threshold", c.failure.threshold);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
}

inline std::vector<LexiconFeature> load_lexicon_features(const std::vector<LexiconSpec>& specs) {
  std::vector<LexiconFeature> out;
  for (const LexiconSpec& s : specs) {
    LexiconFeature f;
    f.name = s.name;
    f.lexicon = load_lexicon(s.path);
    f.mode = parse_match_mode(s.mode);
    f.encoding = parse_lex_encoding(s.encoding);
    out.push_back(std::move(f));
  }
  return out;
}

inline ModelConfig model_config_for(const RunConfig& rc, const Vocabularies& v,
                                    const std::vector<LexiconFeature>& lexicons) {
  ModelConfig m;
  m.layout.word_dim = rc.word_dim;
  m.layout.use_caps = rc.use_caps;
  m.layout.use_char_cnn = rc.use_char_cnn;
  m.layout.cnn_filters = rc.cnn_filters;
  m.layout.lexicon_dim = 0;
  for (const LexiconFeature& f : lexicons) m.layout.lexicon_dim += f.width();
  m.word_vocab = v.words.size();
  m.char_vocab = v.chars.size();
  m.num_tags = v.tags.size();
  m.char_dim = rc.char_dim;
  m.use_char_type = rc.use_char_type;
  m.conv_width = rc.conv_width;
  m.lstm_size = rc.lstm_size;
  m.lstm_layers = rc.lstm_layers;
  m.dropout = rc.dropout;
  return m;
}

/// A trained (or freshly initialized) tagger with everything needed to
/// featurize raw sentences.
struct TaggerModel {
  RunConfig config;
  Vocabularies vocabs;
  std::vector<LexiconFeature> lexicons;
  ModelConfig model;
  ParameterSet params;

  FeaturizedSentence featurize(const Sentence& s) const {
    FeaturizedSentence fs;
    fs.tokens.resize(s.size());
    std::vector<std::vector<double>> lex(s.size());
    for (const LexiconFeature& f : lexicons) {
      const MatchMarks marks = match_sentence(f.lexicon, s.tokens, f.mode);
      const auto enc = encode_lexicon_features(marks, f.encoding);
      for (std::size_t t = 0; t < s.size(); ++t) {
        if (enc.empty()) continue;
        lex[t].insert(lex[t].end(), enc[t].begin(), enc[t].end());
      }
    }
    for (std::size_t t = 0; t < s.size(); ++t) {
      TokenFeatures& tok = fs.tokens[t];
      tok.word = word_id(s.tokens[t], vocabs.words);
      tok.caps = caps_feature(s.tokens[t]);
      if (model.layout.use_char_cnn) {
        tok.chars = encode_characters(s.tokens[t], vocabs.chars, model.conv_width,
                                      model.use_char_type);
      }
      tok.lexicon = std::move(lex[t]);
    }
    if (!s.tags.empty()) {
      try {
        for (const std::string& tag : s.tags) fs.gold.push_back(vocabs.tags.id(tag));
      } catch (const DataError&) {
        fs.gold.clear();  // category unseen in training; usable for scoring only
      }
    }
    return fs;
  }

  std::vector<int> predict(const FeaturizedSentence& fs, bool constrained) const {
    if (fs.size() == 0) return {};
    const Tensor scores = tag_scores(fs, params, model);
    if (constrained) {
      const TransitionMask mask = bioes_transition_mask(vocabs.tags);
      return viterbi(scores, params.value(names::kTransitions), &mask);
    }
    return viterbi(scores, params.value(names::kTransitions));
  }

  std::vector<std::string> predict_tags(const Sentence& s, bool constrained) const {
    std::vector<std::string> out;
    for (int id : predict(featurize(s), constrained)) out.push_back(vocabs.tags.name(id));
    return out;
  }
};

inline nlohmann::json checkpoint_metadata(const TaggerModel& m, std::size_t epoch) {
  std::vector<std::uint32_t> chars;
  for (char32_t c : m.vocabs.chars.characters()) chars.push_back(static_cast<std::uint32_t>(c));
  nlohmann::json lex = nlohmann::json::array();
  for (const LexiconFeature& f : m.lexicons) {
    lex.push_back({{"name", f.name},
                   {"mode", to_string(f.mode)},
                   {"encoding", to_string(f.encoding)},
                   {"categories", f.lexicon.category_names()}});
  }
  return {{"format", "nerkit-checkpoint-1"},
          {"epoch", epoch},
          {"config", m.config},
          {"words", m.vocabs.words.words()},
          {"chars", chars},
          {"tag_categories", m.vocabs.tags.categories()},
          {"lexicon_layout", lex}};
}

inline std::filesystem::path metadata_path(const std::filesystem::path& params_path) {
  return params_path.string() + ".json";
}

inline void save_checkpoint(const TaggerModel& m, const std::filesystem::path& path,
                            std::size_t epoch) {
  save_parameters(m.params, path);
  write_file_bytes(metadata_path(path), checkpoint_metadata(m, epoch).dump(1) + "\n");
}

/// Rebuilds a tagger from a checkpoint. Lexicons are loaded from the paths
/// recorded at training time unless `lexicon_paths` overrides them by name;
/// either way their categories must match the stored layout.
inline TaggerModel load_checkpoint(const std::filesystem::path& path,
                                   const std::map<std::string, std::string>& lexicon_paths = {},
                                   const std::string& embeddings_path = "") {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_file_bytes(metadata_path(path)));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad checkpoint metadata '" + metadata_path(path).string() + "': " + e.what());
  }
  TaggerModel m;
  try {
    m.config = meta.at("config").get<RunConfig>();
    for (const auto& w : meta.at("words")) m.vocabs.words.add_key(w.get<std::string>());
    for (std::uint32_t c : meta.at("chars").get<std::vector<std::uint32_t>>()) {
      m.vocabs.chars.add(static_cast<char32_t>(c));
    }
    m.vocabs.tags = TagSet(meta.at("tag_categories").get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad checkpoint metadata: ") + e.what());
  }
  for (const auto& [name, p] : lexicon_paths) {
    auto it = std::find_if(m.config.lexicons.begin(), m.config.lexicons.end(),
                           [&](const LexiconSpec& s) { return s.name == name; });
    if (it == m.config.lexicons.end()) {
      throw ConfigError("model has no lexicon feature named '" + name + "'");
    }
    it->path = p;
  }
  m.lexicons = load_lexicon_features(m.config.lexicons);
  const auto& layout = meta.at("lexicon_layout");
  if (layout.size() != m.lexicons.size()) throw ConfigError("lexicon count differs from checkpoint");
  for (std::size_t i = 0; i < m.lexicons.size(); ++i) {
    const auto cats = layout[i].at("categories").get<std::vector<std::string>>();
    if (cats != m.lexicons[i].lexicon.category_names()) {
      throw ConfigError("lexicon '" + m.lexicons[i].name +
                        "' categories differ from those the model was trained with");
    }
  }
  if (!embeddings_path.empty()) {
    const PretrainedEmbeddings emb = load_embeddings(embeddings_path);
    if (emb.dim != m.config.word_dim) {
      throw ConfigError("embeddings have " + std::to_string(emb.dim) +
                        " dimensions, model was trained with " +
                        std::to_string(m.config.word_dim));
    }
  }
  m.model = model_config_for(m.config, m.vocabs, m.lexicons);
  m.params = load_parameters(path);
  Rng probe(0);
  const ParameterSet expected = init_parameters(m.model, probe);
  for (const auto& [name, p] : expected) {
    if (!m.params.contains(name) || m.params.value(name).shape() != p.value.shape()) {
      throw ConfigError("checkpoint parameter '" + name + "' missing or misshapen");
    }
  }
  if (m.params.size() != expected.size()) throw ConfigError("checkpoint has unexpected parameters");
  return m;
}

}  // namespace nerkit

#endif  // NERKIT_TAGGER_HPP_
