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

// Sentence-level structured scoring over a tag-transition matrix.
//
// Scores are a T x K matrix (row t holds the network score of every tag at
// token t). The transition matrix is (K+1) x K: row 0 holds the scores for
// starting in each tag, row i+1 the scores for moving from tag i.

#ifndef NERKIT_CRF_HPP_
#define NERKIT_CRF_HPP_

#include <cassert>
#include <cmath>
#include <span>
#include <vector>

#include "nerkit/errors.hpp"
#include "nerkit/tagging.hpp"
#include "nerkit/tensor.hpp"

namespace nerkit {

inline void check_crf_shapes(const Tensor& scores, const Tensor& transitions) {
  if (scores.rank() != 2 || transitions.rank() != 2) {
    throw ShapeError("crf: scores and transitions must be 2-d");
  }
  const std::size_t K = scores.cols();
  if (transitions.rows() != K + 1 || transitions.cols() != K) {
    throw ShapeError("crf: transitions " + shape_string(transitions.shape()) +
                     " do not match " + std::to_string(K) + " tags");
  }
}

inline double sequence_score(const Tensor& scores, const Tensor& transitions,
                             std::span<const int> tags) {
  check_crf_shapes(scores, transitions);
  require_size(tags.size(), scores.rows(), "crf tag sequence");
  double s = 0.0;
  std::size_t prev_row = 0;
  for (std::size_t t = 0; t < tags.size(); ++t) {
    const auto tag = static_cast<std::size_t>(tags[t]);
    s += transitions.at(prev_row, tag) + scores.at(t, tag);
    prev_row = tag + 1;
  }
  return s;
}

struct LogLikelihood {
  double log_prob = 0.0;    // S(gold) - logZ
  double log_z = 0.0;
  Tensor grad_scores;       // d(-log_prob)/d scores
  Tensor grad_transitions;  // d(-log_prob)/d transitions
};

// Forward recursion in log space: alpha[t][j] = log sum over prefixes ending
// in tag j at position t.
inline Tensor crf_forward_alphas(const Tensor& f, const Tensor& a) {
  const std::size_t T = f.rows(), K = f.cols();
  Tensor alpha = Tensor::matrix(T, K);
  std::vector<double> buf(K);
  for (std::size_t j = 0; j < K; ++j) alpha.at(0, j) = a.at(0, j) + f.at(0, j);
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t j = 0; j < K; ++j) {
      for (std::size_t i = 0; i < K; ++i) buf[i] = alpha.at(t - 1, i) + a.at(i + 1, j);
      alpha.at(t, j) = f.at(t, j) + log_sum_exp(buf);
    }
  }
  return alpha;
}

inline double crf_log_partition(const Tensor& scores, const Tensor& transitions) {
  check_crf_shapes(scores, transitions);
  if (scores.rows() == 0) return 0.0;
  const Tensor alpha = crf_forward_alphas(scores, transitions);
  return log_sum_exp(alpha.row(scores.rows() - 1));
}

/// Log-likelihood of the gold sequence and the gradients of its negation,
/// which are the forward-backward marginals minus the gold indicators.
inline LogLikelihood log_likelihood(const Tensor& f, const Tensor& a,
                                    std::span<const int> gold) {
  check_crf_shapes(f, a);
  require_size(gold.size(), f.rows(), "crf gold sequence");
  const std::size_t T = f.rows(), K = f.cols();
  LogLikelihood out;
  out.grad_scores = Tensor::matrix(T, K);
  out.grad_transitions = Tensor::matrix(K + 1, K);
  if (T == 0) return out;

  const Tensor alpha = crf_forward_alphas(f, a);
  Tensor beta = Tensor::matrix(T, K);  // beta[T-1] = 0
  std::vector<double> buf(K);
  for (std::size_t t = T - 1; t-- > 0;) {
    for (std::size_t i = 0; i < K; ++i) {
      for (std::size_t j = 0; j < K; ++j) {
        buf[j] = a.at(i + 1, j) + f.at(t + 1, j) + beta.at(t + 1, j);
      }
      beta.at(t, i) = log_sum_exp(buf);
    }
  }
  out.log_z = log_sum_exp(alpha.row(T - 1));
  out.log_prob = sequence_score(f, a, gold) - out.log_z;

  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < K; ++j) {
      out.grad_scores.at(t, j) = std::exp(alpha.at(t, j) + beta.at(t, j) - out.log_z);
    }
  }
  for (std::size_t j = 0; j < K; ++j) out.grad_transitions.at(0, j) = out.grad_scores.at(0, j);
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t i = 0; i < K; ++i) {
      for (std::size_t j = 0; j < K; ++j) {
        out.grad_transitions.at(i + 1, j) +=
            std::exp(alpha.at(t - 1, i) + a.at(i + 1, j) + f.at(t, j) +
                     beta.at(t, j) - out.log_z);
      }
    }
  }
  std::size_t prev_row = 0;
  for (std::size_t t = 0; t < T; ++t) {
    const auto g = static_cast<std::size_t>(gold[t]);
    out.grad_scores.at(t, g) -= 1.0;
    out.grad_transitions.at(prev_row, g) -= 1.0;
    prev_row = g + 1;
  }
  return out;
}

/// Which transitions are structurally allowed. Same (K+1) x K layout as the
/// transition matrix; `end[j]` says whether a sequence may finish in j.
struct TransitionMask {
  std::vector<std::vector<bool>> allowed;
  std::vector<bool> end;
};

inline TransitionMask bioes_transition_mask(const TagSet& tagset) {
  const std::size_t K = tagset.size();
  TransitionMask m;
  m.allowed.assign(K + 1, std::vector<bool>(K, false));
  m.end.assign(K, false);
  for (std::size_t j = 0; j < K; ++j) {
    const int jj = static_cast<int>(j);
    m.allowed[0][j] = tagset.can_start(jj);
    m.end[j] = tagset.can_end(jj);
    for (std::size_t i = 0; i < K; ++i) {
      m.allowed[i + 1][j] = tagset.follows(static_cast<int>(i), jj);
    }
  }
  return m;
}

/// Highest-scoring tag sequence. Ties resolve to the smallest tag id at each
/// backtracking step. Disallowed transitions under `mask` score -inf.
inline std::vector<int> viterbi(const Tensor& f, const Tensor& a,
                                const TransitionMask* mask = nullptr) {
  check_crf_shapes(f, a);
  const std::size_t T = f.rows(), K = f.cols();
  if (T == 0) return {};
  const auto trans = [&](std::size_t row, std::size_t j) -> double {
    if (mask && !mask->allowed[row][j]) return -INFINITY;
    return a.at(row, j);
  };
  std::vector<double> delta(K), next(K);
  std::vector<std::vector<int>> back(T, std::vector<int>(K, 0));
  for (std::size_t j = 0; j < K; ++j) delta[j] = trans(0, j) + f.at(0, j);
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t j = 0; j < K; ++j) {
      double best = -INFINITY;
      int arg = 0;
      for (std::size_t i = 0; i < K; ++i) {
        const double s = delta[i] + trans(i + 1, j);
        if (s > best) {
          best = s;
          arg = static_cast<int>(i);
        }
      }
      next[j] = best + f.at(t, j);
      back[t][j] = arg;
    }
    std::swap(delta, next);
  }
  double best = -INFINITY;
  int last = 0;
  for (std::size_t j = 0; j < K; ++j) {
    if (mask && !mask->end[j]) continue;
    if (delta[j] > best) {
      best = delta[j];
      last = static_cast<int>(j);
    }
  }
  assert(std::isfinite(best) && "no admissible tag sequence");
  std::vector<int> path(T);
  path[T - 1] = last;
  for (std::size_t t = T - 1; t > 0; --t) {
    path[t - 1] = back[t][static_cast<std::size_t>(path[t])];
  }
  return path;
}

}  // namespace nerkit

#endif  // NERKIT_CRF_HPP_
