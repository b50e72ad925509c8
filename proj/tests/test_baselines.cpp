#include <gtest/gtest.h>

#include "ncpd/baselines.hpp"
#include "support/fixtures.hpp"

using namespace ncpd;

namespace {

PartialLabelDataset on_a_line(std::vector<CandidateSet> sets, int c) {
  PartialLabelDataset ds;
  ds.num_classes = c;
  ds.features.resize(static_cast<Eigen::Index>(sets.size()), 1);
  for (Eigen::Index i = 0; i < ds.features.rows(); ++i) ds.features(i, 0) = static_cast<double>(i + 1);
  ds.candidate_sets = std::move(sets);
  return ds;
}

RowVector point(double v) {
  RowVector x(1);
  x << v;
  return x;
}

}  // namespace

TEST(Plknn, VotesOverCandidateSets) {
  auto model = plknn_fit(on_a_line({{1, 2}, {2}, {2, 3}, {0}}, 4), 3);
  EXPECT_EQ(plknn_predict(model, point(0.0)), 2);
}

TEST(Plknn, SingleNeighborTakesLowestCandidate) {
  auto model = plknn_fit(on_a_line({{1, 3}, {0}}, 4), 1);
  EXPECT_EQ(plknn_predict(model, point(0.9)), 1);
}

TEST(Plknn, FullTieGoesToLowestLabel) {
  auto model = plknn_fit(on_a_line({{2, 3}, {2, 3}, {2, 3}}, 4), 3);
  EXPECT_EQ(plknn_predict(model, point(2.0)), 2);
}

TEST(Plknn, DistanceTiesGoToLowerTrainingIndex) {
  auto model = plknn_fit(on_a_line({{3}, {0}, {1}}, 4), 1);
  EXPECT_EQ(plknn_predict(model, point(2.0)), 0);
  // x = 1.5 is equidistant from indices 0 and 1; index 0 takes the slot.
  EXPECT_EQ(plknn_predict(model, point(1.5)), 3);
}

TEST(Plknn, Errors) {
  auto ds = on_a_line({{0}, {1}}, 2);
  EXPECT_THROW(plknn_fit(ds, 3), DataError);
  EXPECT_THROW(plknn_fit(ds, 0), DataError);
  auto model = plknn_fit(ds, 2);
  RowVector wide(2);
  wide << 1.0, 2.0;
  EXPECT_THROW(plknn_predict(model, wide), DataError);
}

// Property: agreement with an exhaustive recount on random small problems.
TEST(Plknn, MatchesExhaustiveRecount) {
  Rng rng(314);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = 1 + rng.index(50);
    const int c = 2 + static_cast<int>(rng.index(5));
    const int d = 1 + static_cast<int>(rng.index(3));
    PartialLabelDataset ds;
    ds.num_classes = c;
    ds.features.resize(static_cast<Eigen::Index>(n), d);
    // Coarse integer grid so distance ties actually occur.
    for (Eigen::Index k = 0; k < ds.features.size(); ++k) ds.features.data()[k] = static_cast<double>(rng.index(4));
    for (std::size_t i = 0; i < n; ++i) {
      CandidateSet s;
      for (Label y = 0; y < c; ++y) {
        if (rng.uniform() < 0.4) s.push_back(y);
      }
      if (s.empty()) s.push_back(static_cast<Label>(rng.index(static_cast<std::size_t>(c))));
      ds.candidate_sets.push_back(s);
    }
    const int k = 1 + static_cast<int>(rng.index(n));
    const auto model = plknn_fit(ds, k);
    for (int q = 0; q < 5; ++q) {
      RowVector x(d);
      for (int j = 0; j < d; ++j) x(j) = static_cast<double>(rng.index(4));
      if (plknn_predict(model, x) != fixtures::brute_force_plknn(ds.features, ds.candidate_sets, c, k, x)) {
        ++mismatches;
      }
    }
  }
  EXPECT_EQ(mismatches, 0u);
}

TEST(Plknn, SelectKIsFromGridAndDeterministic) {
  auto clean = fixtures::gaussian_blobs({{0, 0}, {3, 0}, {0, 3}}, 90, 2);
  auto ds = generate_controlled(clean, 0.5, 1, 3);
  const int k = plknn_select_k(ds, 5);
  EXPECT_NE(std::find(kPlknnGrid.begin(), kPlknnGrid.end(), k), kPlknnGrid.end());
  EXPECT_EQ(plknn_select_k(ds, 5), k);

  // Ground truth must not influence the choice.
  auto hidden = ds;
  hidden.true_labels.reset();
  EXPECT_EQ(plknn_select_k(hidden, 5), k);

  // Grid values larger than the inner training folds are skipped.
  auto tiny = ds.subset(fixtures::iota_indices(12));
  EXPECT_EQ(plknn_select_k(tiny, 1), 5);
}

TEST(UniformAverage, WeightsAreAlwaysUniform) {
  auto clean = fixtures::gaussian_blobs({{0, 0}, {3, 0}, {0, 3}, {3, 3}}, 100, 4);
  auto dd = duplicate(standardize_features(generate_controlled(clean, 0.7, 2, 1)).first);
  TrainConfig cfg;
  cfg.total_epochs = 8;
  cfg.t_r = 2;  // short ramp so the screening schedule is saturated early
  cfg.batch_size = 30;
  cfg.mlp.hidden = 8;
  std::size_t checked = 0;
  auto model = uniform_average_train(dd, cfg, nullptr, [&](const BatchEvent& ev) {
    EXPECT_EQ(ev.fwd_beta, nullptr);
    for (std::size_t k = 0; k < ev.batch.replicas.size(); ++k) {
      const auto size = dd.group_sizes[dd.group_of[ev.batch.replicas[k]]];
      EXPECT_EQ(ev.weights_for_alpha[k], 1.0 / static_cast<double>(size));
      ++checked;
    }
  });
  EXPECT_EQ(model.mode, TrainMode::uniform_avg);
  EXPECT_FALSE(model.beta.has_value());
  EXPECT_EQ(checked, 8 * dd.num_replicas());
}
