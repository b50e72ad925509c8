#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "ncpd/disambiguation.hpp"
#include "support/fixtures.hpp"

using namespace ncpd;

namespace {

/// Hand-built forward pass: per-replica losses and a per-replica argmax class.
BatchForward fake_forward(const std::vector<double>& losses, const std::vector<Label>& labels,
                          const std::vector<Label>& argmax, int c) {
  BatchForward f;
  const auto b = static_cast<Eigen::Index>(losses.size());
  f.labels = labels;
  f.losses = Eigen::Map<const Vector>(losses.data(), b);
  f.probabilities = Matrix::Constant(b, c, 0.5 / c);
  for (Eigen::Index k = 0; k < b; ++k) f.probabilities(k, argmax[static_cast<std::size_t>(k)]) += 0.5;
  return f;
}

DuplicatedDataset dd_from_sets(std::vector<CandidateSet> sets, int c) {
  PartialLabelDataset ds;
  ds.num_classes = c;
  ds.features = Matrix::Zero(static_cast<Eigen::Index>(sets.size()), 1);
  ds.candidate_sets = std::move(sets);
  return duplicate(ds);
}

Minibatch whole(const DuplicatedDataset& dd) {
  Minibatch b;
  for (std::size_t g = 0; g < dd.num_groups(); ++g) b.groups.push_back(g);
  for (std::size_t k = 0; k < dd.num_replicas(); ++k) b.replicas.push_back(k);
  return b;
}

}  // namespace

TEST(Schedule, ClosedFormValues) {
  const ScheduleConfig cfg{100};
  EXPECT_NEAR(schedule_T(0, cfg), 0.006737946999085467, 1e-12);
  EXPECT_NEAR(schedule_T(50, cfg), 0.2865047968601901, 1e-12);
  EXPECT_NEAR(schedule_T(100, cfg), 1.0, 1e-12);
  EXPECT_EQ(schedule_T(101, cfg), 1.0);
  EXPECT_EQ(schedule_T(5000, cfg), 1.0);
}

TEST(Schedule, MonotoneAndBounded) {
  for (int tr : {1, 7, 100, 250}) {
    double prev = 0.0;
    for (int t = 0; t <= 2 * tr + 3; ++t) {
      const double v = schedule_T(t, {tr});
      EXPECT_GT(v, 0.0);
      EXPECT_LE(v, 1.0);
      EXPECT_GE(v, prev);
      prev = v;
    }
  }
  EXPECT_THROW(schedule_T(1, {0}), DataError);
}

TEST(SelectReliable, EarlyEpochsSelectNothing) {
  auto dd = dd_from_sets({{0, 1}, {0, 1}}, 2);
  auto f = fake_forward({0.1, 2.0, 0.3, 1.5}, {0, 1, 0, 1}, {0, 0, 0, 0}, 2);
  EXPECT_TRUE(select_reliable(whole(dd), f, schedule_T(0)).empty());
}

TEST(SelectReliable, WorkedExample) {
  auto dd = dd_from_sets({{0, 1}, {0, 1}}, 2);
  auto f = fake_forward({0.1, 2.0, 0.3, 1.5}, {0, 1, 0, 1}, {0, 0, 0, 0}, 2);
  EXPECT_EQ(select_reliable(whole(dd), f, 0.5), (std::vector<std::size_t>{0, 2}));
}

TEST(SelectReliable, PredictionOutsideCandidateSetNeverReliable) {
  auto dd = dd_from_sets({{0, 1}, {2, 3}}, 4);
  auto f = fake_forward({0.01, 0.02, 0.03, 0.04}, {0, 1, 2, 3}, {0, 0, 1, 1}, 4);
  const auto rel = select_reliable(whole(dd), f, 1.0);
  EXPECT_EQ(rel, (std::vector<std::size_t>{0}));
}

TEST(SelectReliable, LossTiesBrokenByReplicaIndex) {
  auto dd = dd_from_sets({{0}, {0}, {0}}, 1);
  auto f = fake_forward({0.5, 0.5, 0.5}, {0, 0, 0}, {0, 0, 0}, 1);
  EXPECT_EQ(select_reliable(whole(dd), f, 0.67), (std::vector<std::size_t>{0, 1}));
}

TEST(UpdateConfidences, SoftmaxAndUniformExamples) {
  std::vector<double> out(3);
  softmax_confidence(std::vector<double>{0, 0, 0}, out);
  for (double v : out) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);

  std::vector<double> two(2);
  softmax_confidence(std::vector<double>{0.0, std::log(2.0)}, two);
  EXPECT_NEAR(two[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(two[1], 1.0 / 3.0, 1e-15);

  auto dd = dd_from_sets({{0, 1, 2, 3}}, 4);
  auto c = update_confidences(whole(dd), dd, std::vector<double>{0.1, 5, 3, 2}, {}, ConfidenceRule::progressive);
  EXPECT_EQ(c.weights, (std::vector<double>{0.25, 0.25, 0.25, 0.25}));
  EXPECT_FALSE(c.group_simple[0]);
}

TEST(UpdateConfidences, SimpleGroupsGetSoftmaxComplicatedUniform) {
  auto dd = dd_from_sets({{0, 1}, {0, 1, 2}}, 3);
  const std::vector<double> losses{0.0, std::log(2.0), 1.0, 2.0, 3.0};
  auto c = update_confidences(whole(dd), dd, losses, {0}, ConfidenceRule::progressive);
  EXPECT_NEAR(c.weights[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(c.weights[1], 1.0 / 3.0, 1e-15);
  for (int k = 2; k < 5; ++k) EXPECT_DOUBLE_EQ(c.weights[static_cast<std::size_t>(k)], 1.0 / 3.0);

  auto all = update_confidences(whole(dd), dd, losses, {}, ConfidenceRule::all_softmax);
  EXPECT_NEAR(all.weights[0], 2.0 / 3.0, 1e-15);
  EXPECT_GT(all.weights[2], all.weights[3]);
  auto uni = update_confidences(whole(dd), dd, losses, {0}, ConfidenceRule::all_uniform);
  EXPECT_EQ(uni.weights[0], 0.5);
}

TEST(UpdateConfidences, RejectsNonAtomicBatch) {
  auto dd = dd_from_sets({{0, 1}, {0, 1}}, 2);
  Minibatch partial{{0, 1}, {0, 1, 2}};
  EXPECT_THROW(update_confidences(partial, dd, std::vector<double>{1, 2, 3}, {}, ConfidenceRule::progressive),
               DataError);
}

// Properties over random batches drawn from a real network's forward passes.
TEST(Disambiguation, ScreeningAndNormalizationProperties) {
  auto clean = fixtures::gaussian_blobs({{0, 0}, {2, 0}, {0, 2}, {2, 2}}, 120, 6);
  auto dd = duplicate(generate_controlled(clean, 0.7, 2, 3));
  Rng rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    auto params = init_mlp(2, 4, rng.next(), MlpConfig{.hidden = 8});
    const double T = rng.uniform();
    for (const auto& batch : group_minibatches(dd, 32, rng.next(), 0)) {
      Matrix x(static_cast<Eigen::Index>(batch.replicas.size()), 2);
      std::vector<Label> y;
      for (std::size_t k = 0; k < batch.replicas.size(); ++k) {
        x.row(static_cast<Eigen::Index>(k)) = dd.replica_features(batch.replicas[k]);
        y.push_back(dd.replica_labels[batch.replicas[k]]);
      }
      auto f = forward(params, x, y);
      auto c = disambiguate_batch(batch, dd, f, T, ConfidenceRule::progressive);
      EXPECT_LE(c.reliable.size(), screening_cutoff(T, batch.replicas.size()));
      std::set<std::size_t> groups;
      for (auto pos : c.reliable) EXPECT_TRUE(groups.insert(dd.group_of[batch.replicas[pos]]).second);

      std::size_t pos = 0;
      for (auto g : batch.groups) {
        const auto n = dd.group_sizes[g];
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          EXPECT_GT(c.weights[pos + j], 0.0);
          EXPECT_LE(c.weights[pos + j], 1.0);
          sum += c.weights[pos + j];
        }
        EXPECT_NEAR(sum, 1.0, 1e-9);
        // Shift invariance of the loss softmax.
        std::vector<double> l(f.losses.data() + pos, f.losses.data() + pos + n), shifted = l, a(n), b(n);
        const double shift = 10.0 * rng.uniform();
        for (auto& v : shifted) v += shift;
        softmax_confidence(l, a);
        softmax_confidence(shifted, b);
        for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(a[j], b[j], 1e-12);
        pos += n;
      }
    }
  }
}

TEST(Disambiguation, FullScheduleWithCorrectPredictionsMakesEveryGroupSimple) {
  auto dd = dd_from_sets({{0, 1}, {1, 2}, {0, 2}, {2}}, 3);
  // Each group's shared argmax lies in its candidate set.
  auto f = fake_forward({0.2, 0.9, 0.4, 0.3, 1.1, 0.8, 0.05}, {0, 1, 1, 2, 0, 2, 2}, {0, 0, 2, 2, 2, 2, 2}, 3);
  auto c = disambiguate_batch(whole(dd), dd, f, 1.0, ConfidenceRule::progressive);
  for (bool s : c.group_simple) EXPECT_TRUE(s);
}

TEST(DisambiguationAccuracy, OneHotAtTruthIsPerfect) {
  auto dd = dd_from_sets({{0, 1}, {0, 1, 2}, {1}}, 3);
  ConfidenceVector cv;
  cv.scores = {0.0, 1.0, 0.0, 0.0, 1.0, 1.0};
  auto rep = disambiguation_accuracy(cv, dd, std::vector<Label>{1, 2, 1});
  EXPECT_EQ(rep.ambiguous_groups, 2u);
  EXPECT_DOUBLE_EQ(rep.accuracy, 1.0);
  EXPECT_EQ(rep.tied_groups, 0u);
}

TEST(DisambiguationAccuracy, UniformReportsTies) {
  auto dd = dd_from_sets({{0, 1}, {0, 1, 2}, {1}}, 3);
  auto cv = ConfidenceVector::uniform(dd);
  auto rep = disambiguation_accuracy(cv, dd, std::vector<Label>{0, 2, 1});
  EXPECT_EQ(rep.tied_groups, 2u);
  EXPECT_DOUBLE_EQ(rep.accuracy, 0.5);  // tie resolves to the lowest replica
  EXPECT_THROW(disambiguation_accuracy(cv, dd, std::vector<Label>{0}), DataError);
}

TEST(DisambiguationAccuracy, MatchesBruteForceRecount) {
  auto clean = fixtures::gaussian_blobs({{0, 0}, {2, 0}, {0, 2}, {2, 2}, {1, 1}}, 60, 2);
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    auto ds = generate_controlled(clean, rng.uniform(), 1 + static_cast<int>(rng.index(4)), rng.next());
    auto dd = duplicate(ds);
    ConfidenceVector cv = ConfidenceVector::uniform(dd);
    for (const auto& r : dd.replicas_of) {
      std::vector<double> l(r.size());
      for (auto& v : l) v = std::floor(rng.uniform() * 3);  // coarse values force ties
      softmax_confidence(l, std::span<double>(cv.scores.data() + r.begin, r.size()));
    }
    // Recount: for each ambiguous instance, find the first candidate whose
    // confidence equals the group maximum.
    std::size_t amb = 0, ok = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto& s = ds.candidate_sets[i];
      if (s.size() < 2) continue;
      ++amb;
      const auto r = dd.replicas_of[i];
      double mx = -1;
      for (auto k = r.begin; k < r.end; ++k) mx = std::max(mx, cv.scores[k]);
      for (std::size_t j = 0; j < s.size(); ++j) {
        if (cv.scores[r.begin + j] == mx) {
          ok += s[j] == (*ds.true_labels)[i] ? 1 : 0;
          break;
        }
      }
    }
    auto rep = disambiguation_accuracy(cv, dd, *ds.true_labels);
    EXPECT_EQ(rep.ambiguous_groups, amb);
    EXPECT_EQ(rep.correct, ok);
  }
}
