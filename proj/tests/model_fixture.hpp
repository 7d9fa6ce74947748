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

// Small random networks and sentences for gradient and invariance checks.

#ifndef NERKIT_TESTS_MODEL_FIXTURE_HPP_
#define NERKIT_TESTS_MODEL_FIXTURE_HPP_

#include <vector>

#include "nerkit/model.hpp"
#include "test_util.hpp"

namespace nerkit::testing {

struct TinyNetOptions {
  std::size_t word_dim = 4;
  std::size_t word_vocab = 6;
  std::size_t char_vocab = 7;
  std::size_t char_dim = 3;
  std::size_t filters = 3;
  std::size_t conv_width = 3;
  bool char_type = false;
  bool caps = true;
  std::size_t lexicon_dim = 0;
  std::size_t lstm_size = 5;
  std::size_t layers = 1;
  std::size_t tags = 5;
  double dropout = 0.0;
};

inline ModelConfig tiny_config(const TinyNetOptions& o) {
  ModelConfig cfg;
  cfg.layout.word_dim = o.word_dim;
  cfg.layout.use_caps = o.caps;
  cfg.layout.use_char_cnn = o.filters > 0;
  cfg.layout.cnn_filters = o.filters;
  cfg.layout.lexicon_dim = o.lexicon_dim;
  cfg.word_vocab = o.word_vocab;
  cfg.char_vocab = o.char_vocab;
  cfg.num_tags = o.tags;
  cfg.char_dim = o.char_dim;
  cfg.use_char_type = o.char_type;
  cfg.conv_width = o.conv_width;
  cfg.lstm_size = o.lstm_size;
  cfg.lstm_layers = o.layers;
  cfg.dropout = o.dropout;
  return cfg;
}

// Initializes normally, then overwrites every tensor (transitions included)
// with U(-scale, scale) so no gradient is trivially zero.
inline ParameterSet random_parameters(const ModelConfig& cfg, Rng& rng, double scale = 0.5) {
  ParameterSet ps = init_parameters(cfg, rng);
  for (auto& [name, p] : ps) {
    for (double& v : p.value.data()) v = rng.uniform(-scale, scale);
  }
  return ps;
}

inline FeaturizedSentence random_sentence(const ModelConfig& cfg, std::size_t T, Rng& rng) {
  FeaturizedSentence s;
  const std::size_t pad = char_padding(cfg.conv_width);
  for (std::size_t t = 0; t < T; ++t) {
    TokenFeatures tok;
    tok.word = static_cast<int>(rng.below(cfg.word_vocab));
    tok.caps = static_cast<CapsClass>(rng.below(kNumCapsClasses));
    if (cfg.layout.use_char_cnn) {
      const std::size_t n = 1 + rng.below(4);
      for (std::size_t i = 0; i < n + 2 * pad; ++i) {
        const bool edge = i < pad || i >= n + pad;
        tok.chars.chars.push_back(edge ? CharVocab::kPadding
                                       : 1 + static_cast<int>(rng.below(cfg.char_vocab - 1)));
        if (cfg.use_char_type) tok.chars.types.push_back(static_cast<int>(rng.below(kNumCharTypes)));
      }
    }
    for (std::size_t k = 0; k < cfg.layout.lexicon_dim; ++k) {
      tok.lexicon.push_back(rng.bernoulli(0.3) ? 1.0 : 0.0);
    }
    s.tokens.push_back(std::move(tok));
    s.gold.push_back(static_cast<int>(rng.below(cfg.num_tags)));
  }
  return s;
}

// Loss of one mini-batch with a fixed dropout stream: the same seed yields
// the same masks, so the loss is a smooth function of the parameters.
inline double batch_loss(const std::vector<FeaturizedSentence>& batch, ParameterSet& ps,
                         const ModelConfig& cfg, std::uint64_t dropout_seed, Mode mode) {
  std::vector<const FeaturizedSentence*> ptrs;
  for (const auto& s : batch) ptrs.push_back(&s);
  Rng rng(dropout_seed);
  const double loss = loss_and_gradients(ptrs, ps, cfg, rng, mode);
  ps.zero_grad();
  return loss;
}

// Worst relative error between backpropagated gradients and central
// differences with step h over every scalar of every parameter.
template <typename Difference>
double network_grad_error(const std::vector<FeaturizedSentence>& batch, ParameterSet& ps,
                          const ModelConfig& cfg, std::uint64_t dropout_seed, Mode mode,
                          Difference diff) {
  std::vector<const FeaturizedSentence*> ptrs;
  for (const auto& s : batch) ptrs.push_back(&s);
  ps.zero_grad();
  Rng rng(dropout_seed);
  loss_and_gradients(ptrs, ps, cfg, rng, mode);
  std::vector<Tensor> analytic;
  for (auto& [name, p] : ps) analytic.push_back(p.grad);
  ps.zero_grad();
  const auto f = [&] { return batch_loss(batch, ps, cfg, dropout_seed, mode); };
  double worst = 0.0;
  std::size_t i = 0;
  for (auto& [name, p] : ps) {
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      worst = std::max(worst, relative_error(analytic[i][k], diff(f, p.value[k])));
    }
    ++i;
  }
  return worst;
}

}  // namespace nerkit::testing

#endif  // NERKIT_TESTS_MODEL_FIXTURE_HPP_
