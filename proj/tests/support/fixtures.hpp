// Test-only helpers: synthetic data and independent reference implementations
// used as oracles. Nothing here calls into the code path it checks.
#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "ncpd/ncpd.hpp"

namespace ncpd::fixtures {

/// Isotropic Gaussian blobs with unit variance. Class k is centered at
/// `centers[k]`. Labels are balanced (instance i has class i mod c).
inline PartialLabelDataset gaussian_blobs(const std::vector<std::vector<double>>& centers, std::size_t n,
                                          std::uint64_t seed, double sigma = 1.0) {
  const int c = static_cast<int>(centers.size());
  const auto d = centers.front().size();
  Rng rng(seed);
  PartialLabelDataset ds;
  ds.num_classes = c;
  ds.labels = LabelMapping::integers(c);
  ds.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::vector<Label> truth(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Label y = static_cast<Label>(i % static_cast<std::size_t>(c));
    for (std::size_t j = 0; j < d; ++j) {
      ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          centers[static_cast<std::size_t>(y)][j] + sigma * rng.normal();
    }
    truth[i] = y;
    ds.candidate_sets.push_back({y});
  }
  for (std::size_t j = 0; j < d; ++j) ds.feature_names.push_back("x" + std::to_string(j));
  ds.true_labels = truth;
  return ds;
}

/// Two classes in d=2 whose means are `separation` standard deviations apart.
inline PartialLabelDataset two_blobs(std::size_t n, std::uint64_t seed, double separation = 4.0) {
  return gaussian_blobs({{-separation / 2, 0.0}, {separation / 2, 0.0}}, n, seed);
}

/// Naive loop implementation of the forward pass: probabilities and per-sample
/// losses, no Eigen expressions.
struct NaiveForward {
  std::vector<std::vector<double>> probs;
  std::vector<double> losses;
};

inline NaiveForward naive_forward(const MlpParameters& p, const Matrix& x, const std::vector<Label>& labels) {
  const auto& w = p.weights;
  const int d = p.input_dim(), h = p.hidden_dim(), c = p.num_classes();
  NaiveForward out;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    std::vector<double> a1(h), a2(h), z(c);
    for (int j = 0; j < h; ++j) {
      double s = w.b1(j);
      for (int i = 0; i < d; ++i) s += x(r, i) * w.w1(i, j);
      a1[j] = s > 0 ? s : 0;
    }
    for (int j = 0; j < h; ++j) {
      double s = w.b2(j);
      for (int i = 0; i < h; ++i) s += a1[i] * w.w2(i, j);
      a2[j] = s > 0 ? s : 0;
    }
    for (int j = 0; j < c; ++j) {
      double s = w.b3(j);
      for (int i = 0; i < h; ++i) s += a2[i] * w.w3(i, j);
      z[j] = s;
    }
    const double m = *std::max_element(z.begin(), z.end());
    double total = 0;
    for (auto& v : z) total += std::exp(v - m);
    std::vector<double> pr(c);
    for (int j = 0; j < c; ++j) pr[j] = std::exp(z[j] - m) / total;
    out.losses.push_back(-std::log(std::max(pr[labels[static_cast<std::size_t>(r)]], 1e-12)));
    out.probs.push_back(pr);
  }
  return out;
}

/// Plain supervised minibatch training with unit weights: the reference the
/// partial-label trainers must collapse to when every candidate set is a
/// singleton. Uses the same batch schedule and initialization seeds.
inline MlpParameters plain_supervised(const DuplicatedDataset& dd, const TrainConfig& cfg, std::uint64_t init_seed) {
  MlpParameters p = init_mlp(static_cast<int>(dd.dim()), dd.num_classes, init_seed, cfg.mlp);
  for (int epoch = 0; epoch < cfg.total_epochs; ++epoch) {
    for (const auto& batch : group_minibatches(dd, cfg.batch_size, cfg.shuffle_seed(), static_cast<std::uint64_t>(epoch))) {
      Matrix x(static_cast<Eigen::Index>(batch.replicas.size()), dd.features.cols());
      std::vector<Label> y;
      for (std::size_t k = 0; k < batch.replicas.size(); ++k) {
        x.row(static_cast<Eigen::Index>(k)) = dd.features.row(static_cast<Eigen::Index>(dd.group_of[batch.replicas[k]]));
        y.push_back(dd.replica_labels[batch.replicas[k]]);
      }
      const std::vector<double> ones(y.size(), 1.0);
      const auto f = forward(p, x, y);
      adam_step(p, backward(p, f, ones));
    }
  }
  return p;
}

/// Exhaustive PLKNN: sort all training points by (distance, index), count
/// votes of the first k, scan labels in ascending order for the maximum.
inline Label brute_force_plknn(const Matrix& train, const std::vector<CandidateSet>& sets, int c, int k,
                               const RowVector& x) {
  std::vector<std::pair<double, std::size_t>> all;
  for (Eigen::Index i = 0; i < train.rows(); ++i) {
    double d2 = 0;
    for (Eigen::Index j = 0; j < train.cols(); ++j) d2 += (train(i, j) - x(j)) * (train(i, j) - x(j));
    all.push_back({d2, static_cast<std::size_t>(i)});
  }
  std::sort(all.begin(), all.end());
  Label best = 0;
  int best_votes = -1;
  for (Label y = 0; y < c; ++y) {
    int votes = 0;
    for (int m = 0; m < k; ++m) {
      const auto& s = sets[all[static_cast<std::size_t>(m)].second];
      votes += std::count(s.begin(), s.end(), y) > 0 ? 1 : 0;
    }
    if (votes > best_votes) {
      best_votes = votes;
      best = y;
    }
  }
  return best;
}

inline std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

/// 80/20 train/holdout split of a clean dataset by a seeded permutation.
struct HoldoutSplit {
  PartialLabelDataset train;
  PartialLabelDataset test;
};

inline HoldoutSplit holdout_split(const PartialLabelDataset& ds, std::uint64_t seed, double test_fraction = 0.2) {
  auto idx = iota_indices(ds.size());
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(idx));
  const auto n_test = static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(ds.size())));
  std::vector<std::size_t> te(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> tr(idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
  return {ds.subset(tr), ds.subset(te)};
}

inline std::string glass_path() { return std::string(NCPD_DATA_DIR) + "/glass.csv"; }

inline CsvSchema glass_schema() {
  CsvSchema s;
  s.label_column = "type";
  s.drop_columns = {"Id"};
  return s;
}

}  // namespace ncpd::fixtures
