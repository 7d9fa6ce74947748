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

// The tagger network: token vectors feed two independent stacked LSTMs, one
// reading left to right and one right to left. Each direction's top layer
// goes through its own linear layer and log-softmax, and the two per-token
// vectors are summed into the tag score matrix consumed by the CRF layer.

#ifndef NERKIT_MODEL_HPP_
#define NERKIT_MODEL_HPP_

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "nerkit/char_cnn.hpp"
#include "nerkit/crf.hpp"
#include "nerkit/errors.hpp"
#include "nerkit/layers.hpp"
#include "nerkit/parameters.hpp"
#include "nerkit/rng.hpp"
#include "nerkit/tensor.hpp"
#include "nerkit/word_features.hpp"

namespace nerkit {

struct ModelConfig {
  FeatureLayout layout;
  std::size_t word_vocab = 1;
  std::size_t char_vocab = 2;
  std::size_t num_tags = 1;

  std::size_t char_dim = 25;
  bool use_char_type = false;
  std::size_t char_type_dim = 4;
  std::size_t conv_width = 3;

  std::size_t lstm_size = 275;
  std::size_t lstm_layers = 1;
  double dropout = 0.68;

  void validate() const {
    if (word_vocab == 0 || num_tags == 0 || lstm_size == 0 || lstm_layers == 0) {
      throw ConfigError("model dimensions must be positive");
    }
    if (layout.input_dim() == 0) throw ConfigError("token vector is empty");
    if (layout.use_char_cnn) {
      if (char_dim == 0 || layout.cnn_filters == 0) {
        throw ConfigError("char CNN dimensions must be positive");
      }
      if (conv_width == 0 || conv_width % 2 == 0) {
        throw ConfigError("convolution width must be odd and >= 1");
      }
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) {
      throw ConfigError("dropout must be in [0, 1)");
    }
  }
};

namespace names {
inline const std::string kWordTable = "word_embeddings";
inline const std::string kCharTable = "char_embeddings";
inline const std::string kCharTypeTable = "char_type_embeddings";
inline const std::string kCnnFilters = "char_cnn.filters";
inline const std::string kCnnBias = "char_cnn.bias";
inline const std::string kTransitions = "transitions";

inline const std::array<std::string, 2> kDirections = {"forward", "backward"};

inline std::string lstm(std::size_t dir, std::size_t layer, const char* part) {
  return "lstm." + kDirections[dir] + "." + std::to_string(layer) + "." + part;
}
inline std::string output(std::size_t dir, const char* part) {
  return "output." + kDirections[dir] + "." + part;
}
}  // namespace names

/// Creates and initializes every trainable tensor. Lookup tables are drawn
/// from N(0,1) except the character table (U[-0.5, 0.5]); other weights from
/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)); the transition matrix starts at zero.
/// Pretrained vectors, when given, overwrite the rows of their vocabulary
/// keys.
inline ParameterSet init_parameters(const ModelConfig& cfg, Rng& rng,
                                    const PretrainedEmbeddings* pretrained = nullptr,
                                    const WordVocab* vocab = nullptr) {
  cfg.validate();
  ParameterSet ps;
  const std::size_t D = cfg.layout.word_dim;
  Tensor& words = ps.add(names::kWordTable, {cfg.word_vocab, D}).value;
  init_normal(words, rng);
  if (pretrained && pretrained->dim != 0) {
    if (pretrained->dim != D) {
      throw ConfigError("pretrained embeddings have " + std::to_string(pretrained->dim) +
                        " dimensions, model expects " + std::to_string(D));
    }
    if (!vocab) throw ConfigError("pretrained embeddings need a vocabulary");
    for (std::size_t i = 0; i < pretrained->keys.size(); ++i) {
      const int id = vocab->key_id(pretrained->keys[i]);
      if (id == WordVocab::kUnknown) continue;
      if (static_cast<std::size_t>(id) >= cfg.word_vocab) {
        throw ConfigError("vocabulary larger than the word table");
      }
      std::copy(pretrained->vectors[i].begin(), pretrained->vectors[i].end(),
                words.row(static_cast<std::size_t>(id)).begin());
    }
  }
  if (cfg.layout.use_char_cnn) {
    init_uniform(ps.add(names::kCharTable, {cfg.char_vocab, cfg.char_dim}).value, -0.5, 0.5, rng);
    std::size_t depth = cfg.char_dim;
    if (cfg.use_char_type) {
      init_normal(ps.add(names::kCharTypeTable, {kNumCharTypes, cfg.char_type_dim}).value, rng);
      depth += cfg.char_type_dim;
    }
    const std::size_t fan_in = cfg.conv_width * depth;
    init_fan_in(ps.add(names::kCnnFilters, {cfg.layout.cnn_filters, fan_in}).value, fan_in, rng);
    init_fan_in(ps.add(names::kCnnBias, {cfg.layout.cnn_filters}).value, fan_in, rng);
  }
  const std::size_t H = cfg.lstm_size;
  for (std::size_t dir = 0; dir < 2; ++dir) {
    for (std::size_t l = 0; l < cfg.lstm_layers; ++l) {
      const std::size_t in = l == 0 ? cfg.layout.input_dim() : H;
      init_fan_in(ps.add(names::lstm(dir, l, "input_weights"), {4 * H, in}).value, in, rng);
      init_fan_in(ps.add(names::lstm(dir, l, "recurrent_weights"), {4 * H, H}).value, H, rng);
      init_fan_in(ps.add(names::lstm(dir, l, "bias"), {4 * H}).value, H, rng);
    }
    init_fan_in(ps.add(names::output(dir, "weights"), {cfg.num_tags, H}).value, H, rng);
    init_fan_in(ps.add(names::output(dir, "bias"), {cfg.num_tags}).value, H, rng);
  }
  ps.add(names::kTransitions, {cfg.num_tags + 1, cfg.num_tags});
  return ps;
}

struct FeaturizedSentence {
  std::vector<TokenFeatures> tokens;
  std::vector<int> gold;  // empty when unlabeled

  std::size_t size() const { return tokens.size(); }
};

struct DirectionPass {
  std::vector<std::size_t> order;                    // token index per step
  std::vector<std::vector<LstmStep>> steps;          // [layer][step]
  std::vector<std::vector<std::vector<double>>> dropout_scale;  // [layer][step]
  std::vector<std::vector<double>> top;              // dropped top output per step
  std::vector<std::vector<double>> log_probs;        // per step
};

struct ForwardPass {
  std::vector<std::vector<double>> inputs;  // token vectors
  std::vector<CharCnnOutput> cnn;
  std::array<DirectionPass, 2> directions;
  Tensor scores;  // T x K
};

namespace detail {

inline CharCnnParams cnn_params(const ParameterSet& ps, const ModelConfig& cfg) {
  return CharCnnParams{ps.value(names::kCharTable),
                       cfg.use_char_type ? &ps.value(names::kCharTypeTable) : nullptr,
                       ps.value(names::kCnnFilters), ps.value(names::kCnnBias), cfg.conv_width};
}

inline LstmCellParams lstm_params(const ParameterSet& ps, std::size_t dir, std::size_t layer) {
  return LstmCellParams{ps.value(names::lstm(dir, layer, "input_weights")),
                        ps.value(names::lstm(dir, layer, "recurrent_weights")),
                        ps.value(names::lstm(dir, layer, "bias"))};
}

}  // namespace detail

inline ForwardPass network_forward(const FeaturizedSentence& sent, const ParameterSet& ps,
                                   const ModelConfig& cfg, Mode mode, Rng& rng) {
  const std::size_t T = sent.size();
  if (T == 0) throw ShapeError("network_forward: empty sentence");
  const std::size_t H = cfg.lstm_size;
  const std::size_t K = cfg.num_tags;
  ForwardPass fp;
  fp.inputs.reserve(T);
  const Tensor& words = ps.value(names::kWordTable);
  for (const TokenFeatures& tok : sent.tokens) {
    std::vector<double> cnn;
    if (cfg.layout.use_char_cnn) {
      fp.cnn.push_back(char_cnn_forward(tok.chars, detail::cnn_params(ps, cfg)));
      cnn = fp.cnn.back().features;
    }
    fp.inputs.push_back(assemble_word_vector(tok, words, cnn, cfg.layout));
  }

  fp.scores = Tensor::matrix(T, K);
  for (std::size_t dir = 0; dir < 2; ++dir) {
    DirectionPass& d = fp.directions[dir];
    d.order.resize(T);
    for (std::size_t s = 0; s < T; ++s) d.order[s] = dir == 0 ? s : T - 1 - s;
    d.steps.resize(cfg.lstm_layers);
    d.dropout_scale.resize(cfg.lstm_layers);
    std::vector<std::vector<double>> layer_in(T);
    for (std::size_t s = 0; s < T; ++s) layer_in[s] = fp.inputs[d.order[s]];
    for (std::size_t l = 0; l < cfg.lstm_layers; ++l) {
      const LstmCellParams p = detail::lstm_params(ps, dir, l);
      std::vector<double> h(H, 0.0), c(H, 0.0);
      for (std::size_t s = 0; s < T; ++s) {
        d.steps[l].push_back(lstm_step(p, layer_in[s], h, c));
        h = d.steps[l].back().h;
        c = d.steps[l].back().c;
        DropoutResult dr = dropout_apply(h, cfg.dropout, mode, rng);
        layer_in[s] = std::move(dr.output);
        d.dropout_scale[l].push_back(std::move(dr.scale));
      }
    }
    d.top = std::move(layer_in);
    const Tensor& w = ps.value(names::output(dir, "weights"));
    const Tensor& b = ps.value(names::output(dir, "bias"));
    for (std::size_t s = 0; s < T; ++s) {
      d.log_probs.push_back(log_softmax(linear_forward(w, b, d.top[s])));
      auto row = fp.scores.row(d.order[s]);
      for (std::size_t k = 0; k < K; ++k) row[k] += d.log_probs[s][k];
    }
  }
  return fp;
}

/// Accumulates gradients of every network parameter given dL/dscores.
inline void network_backward(const FeaturizedSentence& sent, ParameterSet& ps,
                             const ModelConfig& cfg, const ForwardPass& fp,
                             const Tensor& grad_scores) {
  const std::size_t T = sent.size();
  const std::size_t H = cfg.lstm_size;
  const std::size_t D = cfg.layout.input_dim();
  std::vector<std::vector<double>> d_inputs(T, std::vector<double>(D, 0.0));

  for (std::size_t dir = 0; dir < 2; ++dir) {
    const DirectionPass& d = fp.directions[dir];
    const Tensor& w = ps.value(names::output(dir, "weights"));
    Parameter& wp = ps.at(names::output(dir, "weights"));
    Parameter& bp = ps.at(names::output(dir, "bias"));
    // External gradient into each layer's (pre-dropout) output h.
    std::vector<std::vector<double>> d_h(T, std::vector<double>(H, 0.0));
    for (std::size_t s = 0; s < T; ++s) {
      const std::vector<double> dz =
          log_softmax_backward(d.log_probs[s], grad_scores.row(d.order[s]));
      linear_backward(w, d.top[s], dz, wp.grad, bp.grad, d_h[s]);
    }
    for (std::size_t l = cfg.lstm_layers; l-- > 0;) {
      const LstmCellParams p = detail::lstm_params(ps, dir, l);
      LstmCellGrads g{ps.grad(names::lstm(dir, l, "input_weights")),
                      ps.grad(names::lstm(dir, l, "recurrent_weights")),
                      ps.grad(names::lstm(dir, l, "bias"))};
      for (std::size_t s = 0; s < T; ++s) dropout_backward(d.dropout_scale[l][s], d_h[s]);
      std::vector<double> dh_next(H, 0.0), dc_next(H, 0.0), dx, dh_prev, dc_prev;
      std::vector<std::vector<double>> d_below(T);
      for (std::size_t s = T; s-- > 0;) {
        std::vector<double> dh = d_h[s];
        for (std::size_t j = 0; j < H; ++j) dh[j] += dh_next[j];
        lstm_step_backward(p, d.steps[l][s], dh, dc_next, g, dx, dh_prev, dc_prev);
        d_below[s] = dx;
        dh_next = dh_prev;
        dc_next = dc_prev;
      }
      if (l > 0) {
        d_h = std::move(d_below);
      } else {
        for (std::size_t s = 0; s < T; ++s) {
          auto& di = d_inputs[d.order[s]];
          for (std::size_t k = 0; k < D; ++k) di[k] += d_below[s][k];
        }
      }
    }
  }

  Tensor& dwords = ps.grad(names::kWordTable);
  const std::size_t wd = cfg.layout.word_dim;
  for (std::size_t t = 0; t < T; ++t) {
    auto row = dwords.row(static_cast<std::size_t>(sent.tokens[t].word));
    for (std::size_t k = 0; k < wd; ++k) row[k] += d_inputs[t][k];
  }
  if (cfg.layout.use_char_cnn) {
    const CharCnnParams p = detail::cnn_params(ps, cfg);
    CharCnnGrads g{ps.grad(names::kCharTable),
                   cfg.use_char_type ? &ps.grad(names::kCharTypeTable) : nullptr,
                   ps.grad(names::kCnnFilters), ps.grad(names::kCnnBias)};
    const std::size_t off = cfg.layout.cnn_offset();
    for (std::size_t t = 0; t < T; ++t) {
      std::span<const double> dcnn(d_inputs[t].data() + off, cfg.layout.cnn_filters);
      char_cnn_backward(sent.tokens[t].chars, p, fp.cnn[t], dcnn, g);
    }
  }
}

/// Tag scores only, eval mode.
inline Tensor tag_scores(const FeaturizedSentence& sent, const ParameterSet& ps,
                         const ModelConfig& cfg) {
  Rng unused(0);
  return network_forward(sent, ps, cfg, Mode::kEval, unused).scores;
}

/// Mean negative log-likelihood over the batch; gradients of that mean are
/// added to the parameter set's accumulators.
inline double loss_and_gradients(std::span<const FeaturizedSentence* const> batch,
                                 ParameterSet& ps, const ModelConfig& cfg, Rng& rng,
                                 Mode mode = Mode::kTrain) {
  if (batch.empty()) return 0.0;
  const std::size_t T = batch.front()->size();
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const FeaturizedSentence* sent : batch) {
    if (sent->size() != T) throw ShapeError("mini-batch sentences differ in length");
    if (sent->gold.size() != T) throw DataError("sentence has no gold tags");
    const ForwardPass fp = network_forward(*sent, ps, cfg, mode, rng);
    LogLikelihood ll = log_likelihood(fp.scores, ps.value(names::kTransitions), sent->gold);
    if (!std::isfinite(ll.log_prob)) throw TrainingDiverged("non-finite loss");
    total += -ll.log_prob;
    Tensor& dtrans = ps.grad(names::kTransitions);
    for (std::size_t i = 0; i < dtrans.size(); ++i) dtrans[i] += inv_n * ll.grad_transitions[i];
    for (double& g : ll.grad_scores.data()) g *= inv_n;
    network_backward(*sent, ps, cfg, fp, ll.grad_scores);
  }
  return total * inv_n;
}

}  // namespace nerkit

#endif  // NERKIT_MODEL_HPP_
