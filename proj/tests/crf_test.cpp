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

#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "crf_oracle.hpp"
#include "nerkit/crf.hpp"
#include "test_util.hpp"

namespace nerkit {
namespace {

using testing::enumerate;
using testing::random_tensor;

struct Instance {
  Tensor f, a;
  std::vector<int> gold;
};

Instance random_instance(Rng& rng, std::size_t max_t = 6, std::size_t max_k = 5,
                         double scale = 2.0) {
  const std::size_t T = 1 + rng.below(max_t), K = 1 + rng.below(max_k);
  Instance in{random_tensor({T, K}, rng, scale), random_tensor({K + 1, K}, rng, scale), {}};
  for (std::size_t t = 0; t < T; ++t) in.gold.push_back(static_cast<int>(rng.below(K)));
  return in;
}

TEST(SequenceScore, Examples) {
  Tensor f = Tensor::matrix(1, 2);
  f.at(0, 0) = 0.3;
  f.at(0, 1) = 0.7;
  Tensor a = Tensor::matrix(3, 2);
  a.at(0, 0) = 0.1;
  a.at(0, 1) = 0.2;
  EXPECT_DOUBLE_EQ(sequence_score(f, a, std::vector<int>{1}), 0.9);

  Rng rng(1);
  const Tensor g = random_tensor({4, 3}, rng);
  const Tensor zero = Tensor::matrix(4, 3);
  const std::vector<int> tags = {2, 0, 0, 1};
  EXPECT_DOUBLE_EQ(sequence_score(g, zero, tags), g.at(0, 2) + g.at(1, 0) + g.at(2, 0) + g.at(3, 1));
}

TEST(SequenceScore, MatchesDirectEvaluation) {
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const Instance in = random_instance(rng);
    EXPECT_NEAR(sequence_score(in.f, in.a, in.gold), testing::brute_score(in.f, in.a, in.gold), 1e-12);
  }
}

TEST(SequenceScore, ShapeChecks) {
  EXPECT_THROW(sequence_score(Tensor::matrix(2, 3), Tensor::matrix(3, 3), std::vector<int>{0, 0}),
               ShapeError);
  EXPECT_THROW(sequence_score(Tensor::matrix(2, 3), Tensor::matrix(4, 3), std::vector<int>{0}),
               ShapeError);
}

TEST(LogLikelihood, UniformSingleToken) {
  const Tensor f = Tensor::matrix(1, 2), a = Tensor::matrix(3, 2);
  for (int g : {0, 1}) {
    EXPECT_NEAR(log_likelihood(f, a, std::vector<int>{g}).log_prob, -std::numbers::ln2, 1e-15);
  }
}

TEST(LogLikelihood, SaturatedGoldIsCertain) {
  Rng rng(3);
  const std::size_t T = 5, K = 4;
  Tensor f = Tensor::matrix(T, K, -50.0);
  std::vector<int> gold;
  for (std::size_t t = 0; t < T; ++t) {
    gold.push_back(static_cast<int>(rng.below(K)));
    f.at(t, static_cast<std::size_t>(gold.back())) = 50.0;
  }
  const Tensor a = Tensor::matrix(K + 1, K);
  EXPECT_EQ(viterbi(f, a), gold);
  EXPECT_NEAR(log_likelihood(f, a, gold).log_prob, 0.0, 1e-12);
}

TEST(LogLikelihood, PartitionMatchesEnumeration) {
  Rng rng(4);
  for (int i = 0; i < 500; ++i) {
    const Instance in = random_instance(rng);
    const auto e = enumerate(in.f, in.a);
    ASSERT_NEAR(crf_log_partition(in.f, in.a), e.log_z, 1e-9);
    const LogLikelihood ll = log_likelihood(in.f, in.a, in.gold);
    ASSERT_NEAR(ll.log_z, e.log_z, 1e-9);
    ASSERT_LE(ll.log_prob, 1e-12);
  }
}

TEST(LogLikelihood, GradientsAreMarginalsMinusGold) {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const Instance in = random_instance(rng);
    const auto e = enumerate(in.f, in.a);
    const LogLikelihood ll = log_likelihood(in.f, in.a, in.gold);
    Tensor want_f = e.marg_scores, want_a = e.marg_transitions;
    for (std::size_t t = 0; t < in.gold.size(); ++t) {
      const auto g = static_cast<std::size_t>(in.gold[t]);
      want_f.at(t, g) -= 1.0;
      want_a.at(t == 0 ? 0 : static_cast<std::size_t>(in.gold[t - 1]) + 1, g) -= 1.0;
    }
    for (std::size_t k = 0; k < want_f.size(); ++k) ASSERT_NEAR(ll.grad_scores[k], want_f[k], 1e-9);
    for (std::size_t k = 0; k < want_a.size(); ++k) {
      ASSERT_NEAR(ll.grad_transitions[k], want_a[k], 1e-9);
    }
  }
}

TEST(LogLikelihood, GradientsMatchFiniteDifferences) {
  Rng rng(6);
  for (int i = 0; i < 50; ++i) {
    Instance in = random_instance(rng, 6, 5, 1.0);
    const LogLikelihood ll = log_likelihood(in.f, in.a, in.gold);
    const auto loss = [&] { return -log_likelihood(in.f, in.a, in.gold).log_prob; };
    EXPECT_LE(testing::max_grad_error_five_point(loss, in.f, ll.grad_scores), 1e-6);
    EXPECT_LE(testing::max_grad_error_five_point(loss, in.a, ll.grad_transitions), 1e-6);
  }
}

TEST(LogLikelihood, ScoreGradientRowsSumToZero) {
  Rng rng(7);
  for (int i = 0; i < 100; ++i) {
    const Instance in = random_instance(rng);
    const LogLikelihood ll = log_likelihood(in.f, in.a, in.gold);
    for (std::size_t t = 0; t < in.f.rows(); ++t) {
      double s = 0;
      for (double g : ll.grad_scores.row(t)) s += g;
      EXPECT_NEAR(s, 0.0, 1e-12);
    }
  }
}

TEST(LogLikelihood, PositionwiseShiftInvariance) {
  Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    const Instance in = random_instance(rng);
    Tensor shifted = in.f;
    for (std::size_t t = 0; t < shifted.rows(); ++t) {
      const double c = rng.uniform(-5, 5);
      for (double& v : shifted.row(t)) v += c;
    }
    EXPECT_NEAR(log_likelihood(shifted, in.a, in.gold).log_prob,
                log_likelihood(in.f, in.a, in.gold).log_prob, 1e-10);
  }
}

TEST(Viterbi, NoCouplingIsPositionwiseArgmax) {
  Rng rng(9);
  for (int i = 0; i < 100; ++i) {
    const Instance in = random_instance(rng);
    const Tensor zero = Tensor::matrix(in.a.rows(), in.a.cols());
    const auto path = viterbi(in.f, zero);
    for (std::size_t t = 0; t < in.f.rows(); ++t) {
      const auto row = in.f.row(t);
      EXPECT_EQ(path[t], std::max_element(row.begin(), row.end()) - row.begin());
    }
  }
}

TEST(Viterbi, AchievesExhaustiveMaximum) {
  Rng rng(10);
  for (int i = 0; i < 500; ++i) {
    const Instance in = random_instance(rng);
    const auto e = enumerate(in.f, in.a);
    const auto path = viterbi(in.f, in.a);
    ASSERT_EQ(path.size(), in.f.rows());
    ASSERT_EQ(testing::brute_score(in.f, in.a, path), e.best);
  }
}

TEST(Viterbi, ShiftInvariance) {
  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    const Instance in = random_instance(rng);
    Tensor f = in.f, a = in.a;
    // Binary fractions keep the shifted sums exact.
    for (double& v : f.data()) v += 0.75;
    for (double& v : a.data()) v += 0.75;
    EXPECT_EQ(viterbi(f, a), viterbi(in.f, in.a));
  }
}

TEST(Viterbi, TiesGoToSmallestId) {
  const Tensor f = Tensor::matrix(3, 4), a = Tensor::matrix(5, 4);
  EXPECT_EQ(viterbi(f, a), (std::vector<int>{0, 0, 0}));
}

TEST(Viterbi, EmptySentence) {
  EXPECT_TRUE(viterbi(Tensor::matrix(0, 3), Tensor::matrix(4, 3)).empty());
}

TEST(Viterbi, ConstrainedIsValidAndOptimalAmongValid) {
  Rng rng(12);
  for (int i = 0; i < 300; ++i) {
    const std::size_t cats = 1 + rng.below(2);
    const TagSet ts(cats == 1 ? std::vector<std::string>{"X"} : std::vector<std::string>{"X", "Y"});
    const std::size_t K = ts.size();
    const std::size_t T = 1 + rng.below(cats == 1 ? 6 : 4);
    const Tensor f = random_tensor({T, K}, rng, 3.0), a = random_tensor({K + 1, K}, rng, 3.0);
    const TransitionMask mask = bioes_transition_mask(ts);
    const auto path = viterbi(f, a, &mask);
    ASSERT_TRUE(ts.is_valid(path));
    double best = -INFINITY;
    testing::for_each_sequence(T, K, [&](const std::vector<int>& seq) {
      if (ts.is_valid(seq)) best = std::max(best, testing::brute_score(f, a, seq));
    });
    ASSERT_EQ(testing::brute_score(f, a, path), best);
  }
}

TEST(TransitionMask, MatchesSchemeTable) {
  const TagSet ts({"LOC", "PER"});
  const TransitionMask m = bioes_transition_mask(ts);
  const int b_per = ts.id("B-PER"), i_per = ts.id("I-PER"), e_per = ts.id("E-PER");
  const int i_loc = ts.id("I-LOC"), s_loc = ts.id("S-LOC");
  const auto allowed = [&](int from, int to) {
    return m.allowed[static_cast<std::size_t>(from) + 1][static_cast<std::size_t>(to)];
  };
  EXPECT_TRUE(allowed(b_per, i_per));
  EXPECT_TRUE(allowed(b_per, e_per));
  EXPECT_FALSE(allowed(b_per, i_loc));
  EXPECT_FALSE(allowed(0, e_per));
  EXPECT_TRUE(allowed(e_per, s_loc));
  EXPECT_FALSE(allowed(i_per, 0));
  EXPECT_FALSE(m.allowed[0][static_cast<std::size_t>(i_per)]);
  EXPECT_TRUE(m.allowed[0][static_cast<std::size_t>(s_loc)]);
  EXPECT_FALSE(m.end[static_cast<std::size_t>(b_per)]);
  EXPECT_TRUE(m.end[static_cast<std::size_t>(e_per)]);
}

}  // namespace
}  // namespace nerkit
