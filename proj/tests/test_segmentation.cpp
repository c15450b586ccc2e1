#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "redsds/datasets.hpp"
#include "redsds/error.hpp"
#include "redsds/hsmm.hpp"
#include "redsds/segmentation.hpp"
#include "support.hpp"

using namespace redsds;
using namespace redsds::segmentation;

namespace {

std::vector<int> random_labels(std::size_t n, int K, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d(0, K - 1);
  std::vector<int> v(n);
  for (int& x : v) x = d(rng);
  return v;
}

std::vector<int> relabel(const std::vector<int>& v, const std::vector<int>& perm) {
  std::vector<int> out;
  for (int x : v) out.push_back(perm[static_cast<std::size_t>(x)]);
  return out;
}

double identity_accuracy(const std::vector<int>& a, const std::vector<int>& b) {
  double hits = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) hits += a[i] == b[i];
  return hits / static_cast<double>(a.size());
}

}  // namespace

TEST(Segment, ConcentratedPosterior) {
  const std::size_t T = 5, K = 3;
  std::vector<double> marg(T * K, 0.0);
  for (std::size_t t = 0; t < T; ++t) marg[t * K + 2] = 1.0;
  EXPECT_EQ(argmax_labels(marg, T, K), std::vector<int>(T, 2));
}

TEST(Segment, TiesGoToSmallerIndex) {
  std::vector<double> marg(4 * 3, 1.0 / 3.0);
  EXPECT_EQ(argmax_labels(marg, 4, 3), std::vector<int>(4, 0));
  std::vector<double> pair{0.2, 0.4, 0.4};
  EXPECT_EQ(argmax_labels(pair, 1, 3), std::vector<int>{1});
}

TEST(Segment, MarginalizesCountsBeforeArgmax) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    hsmm::DiscretePosterior p = hsmm::posterior(support::random_dp(12, 3, 1, 4, rng));
    const auto labels = segment(p);
    for (std::size_t t = 0; t < 12; ++t) {
      std::vector<double> s(3, 0.0);
      for (std::size_t z = 0; z < 3; ++z)
        for (std::size_t c = 1; c <= 4; ++c) s[z] += p.gamma_at(t, z, c);
      EXPECT_EQ(labels[t], std::max_element(s.begin(), s.end()) - s.begin());
    }
  }
}

TEST(Segment, InvariantToMonotoneTransform) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> marg(50 * 4);
  for (double& x : marg) x = u(rng);
  auto base = argmax_labels(marg, 50, 4);
  std::vector<double> t1 = marg, t2 = marg;
  for (double& x : t1) x = std::log(x);
  for (double& x : t2) x = 3.0 * x * x * x + 1.0;
  EXPECT_EQ(argmax_labels(t1, 50, 4), base);
  EXPECT_EQ(argmax_labels(t2, 50, 4), base);
}

TEST(Assignment, MatchesExhaustiveSearch) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (std::size_t n : {1, 2, 3, 4, 5}) {
    for (int trial = 0; trial < 30; ++trial) {
      std::vector<std::vector<double>> w(n, std::vector<double>(n));
      for (auto& row : w)
        for (double& x : row) x = std::floor(u(rng));
      auto a = max_weight_assignment(w);
      double got = 0.0;
      std::vector<std::size_t> seen(a.begin(), a.end());
      std::sort(seen.begin(), seen.end());
      for (std::size_t i = 0; i < n; ++i) {
        EXPECT_EQ(seen[i], i);
        got += w[i][a[i]];
      }
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      double best = -1.0;
      do {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += w[i][perm[i]];
        best = std::max(best, s);
      } while (std::next_permutation(perm.begin(), perm.end()));
      EXPECT_DOUBLE_EQ(got, best);
    }
  }
}

TEST(MatchedAccuracy, PermutedLabelsScoreOne) {
  std::mt19937_64 rng(4);
  auto truth = random_labels(200, 4, rng);
  EXPECT_DOUBLE_EQ(matched_accuracy(relabel(truth, {2, 0, 3, 1}), truth), 1.0);
}

TEST(MatchedAccuracy, ConstantPredictionOnBalancedTruth) {
  std::vector<int> truth(100);
  for (std::size_t i = 0; i < 100; ++i) truth[i] = i < 50 ? 0 : 1;
  EXPECT_DOUBLE_EQ(matched_accuracy(std::vector<int>(100, 1), truth), 0.5);
}

TEST(MatchedAccuracy, ThreeClassesAgainstAllPermutations) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    auto pred = random_labels(40, 3, rng), truth = random_labels(40, 3, rng);
    std::vector<int> perm{0, 1, 2};
    double best = 0.0;
    do best = std::max(best, identity_accuracy(relabel(pred, perm), truth));
    while (std::next_permutation(perm.begin(), perm.end()));
    EXPECT_DOUBLE_EQ(matched_accuracy(pred, truth), best);
    EXPECT_GE(matched_accuracy(pred, truth), identity_accuracy(pred, truth));
  }
}

TEST(MatchedAccuracy, UnequalLabelCounts) {
  // more predicted labels than true ones: extra labels stay unmatched
  std::vector<int> pred{0, 0, 1, 1, 2, 2}, truth{0, 0, 0, 1, 1, 1};
  EXPECT_NEAR(matched_accuracy(pred, truth), 4.0 / 6.0, 1e-15);
  auto map = best_label_mapping(pred, truth);
  ASSERT_EQ(map.size(), 3u);
  EXPECT_EQ(std::count(map.begin(), map.end(), -1), 1);
}

TEST(MatchedAccuracy, LengthMismatch) {
  EXPECT_THROW(matched_accuracy(std::vector<int>{0, 1}, std::vector<int>{0}), ContractError);
  EXPECT_THROW(nmi(std::vector<int>{0, 1}, std::vector<int>{0}), ContractError);
  EXPECT_THROW(ari(std::vector<int>{0, 1}, std::vector<int>{0}), ContractError);
}

TEST(Nmi, IdenticalLabelings) {
  std::mt19937_64 rng(6);
  auto a = random_labels(300, 3, rng);
  EXPECT_NEAR(nmi(a, a), 1.0, 1e-12);
  EXPECT_NEAR(nmi(relabel(a, {1, 2, 0}), a), 1.0, 1e-12);
}

TEST(Nmi, IndependentLabelings) {
  std::mt19937_64 rng(7);
  auto a = random_labels(10000, 3, rng), b = random_labels(10000, 2, rng);
  EXPECT_LT(nmi(a, b), 0.05);
  EXPECT_GE(nmi(a, b), 0.0);
}

TEST(Nmi, KnownValue) {
  // pred {0,0,1,1}, truth {0,1,1,1}: MI and entropies by hand
  std::vector<int> p{0, 0, 1, 1}, t{0, 1, 1, 1};
  const double hp = std::log(2.0);
  const double ht = -(0.25 * std::log(0.25) + 0.75 * std::log(0.75));
  const double mi = 0.25 * std::log(0.25 / (0.5 * 0.25)) + 0.25 * std::log(0.25 / (0.5 * 0.75)) +
                    0.5 * std::log(0.5 / (0.5 * 0.75));
  EXPECT_NEAR(nmi(p, t), mi / (0.5 * (hp + ht)), 1e-12);
}

TEST(Nmi, DegenerateConventions) {
  EXPECT_EQ(nmi(std::vector<int>{1, 1, 1}, std::vector<int>{0, 0, 0}), 1.0);
  EXPECT_EQ(nmi(std::vector<int>{1, 1, 1, 1}, std::vector<int>{0, 0, 1, 1}), 0.0);
}

TEST(Ari, IdenticalAndPermuted) {
  std::mt19937_64 rng(8);
  auto a = random_labels(300, 4, rng);
  EXPECT_NEAR(ari(a, a), 1.0, 1e-12);
  EXPECT_NEAR(ari(relabel(a, {3, 1, 0, 2}), a), 1.0, 1e-12);
}

TEST(Ari, RandomLabelings) {
  std::mt19937_64 rng(9);
  auto a = random_labels(10000, 3, rng), b = random_labels(10000, 3, rng);
  EXPECT_LT(std::abs(ari(a, b)), 0.05);
}

TEST(Ari, KnownValue) {
  // sklearn: adjusted_rand_score([0,0,1,1],[0,0,1,2]) = 0.5714285714285715
  EXPECT_NEAR(ari(std::vector<int>{0, 0, 1, 2}, std::vector<int>{0, 0, 1, 1}), 4.0 / 7.0, 1e-12);
}

TEST(Metrics, PermutationInvariance) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = random_labels(120, 3, rng), t = random_labels(120, 3, rng);
    auto q = relabel(p, {2, 0, 1});
    EXPECT_DOUBLE_EQ(matched_accuracy(p, t), matched_accuracy(q, t));
    EXPECT_NEAR(nmi(p, t), nmi(q, t), 1e-12);
    EXPECT_NEAR(ari(p, t), ari(q, t), 1e-12);
  }
}

TEST(SegmentRecords, LabelsEverySeries) {
  model::ModelConfig cfg;
  cfg.num_switches = 2;
  cfg.max_duration = 5;
  cfg.state_dim = 2;
  nn::ParamStore store;
  std::mt19937_64 rng(11);
  model::SwitchingModel model(cfg, store, rng);
  inference::InferenceNetwork net(cfg, store, rng);
  auto recs = data::gen_bouncing_ball(5, 30, 3);
  auto segs = segment_records(model, net, recs, {}, 2);
  ASSERT_EQ(segs.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(segs[i].id, recs[i].id);
    ASSERT_EQ(segs[i].labels.size(), 30u);
    EXPECT_EQ(segs[i].labels, argmax_labels(segs[i].switch_marginals, 30, 2));
    for (std::size_t t = 0; t < 30; ++t)
      EXPECT_NEAR(segs[i].switch_marginals[t * 2] + segs[i].switch_marginals[t * 2 + 1], 1.0, 1e-9);
  }
  // batching does not change the result
  auto one = segment_records(model, net, std::span(recs).subspan(3, 1), {}, 64);
  for (std::size_t t = 0; t < 60; ++t) EXPECT_NEAR(one[0].switch_marginals[t], segs[3].switch_marginals[t], 1e-10);
}
