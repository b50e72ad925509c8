// Comparison methods: PLKNN candidate voting and the uniform-averaging MLP.
#pragma once

#include <algorithm>
#include <array>
#include <numeric>
#include <span>
#include <vector>

#include "ncpd/cooperation.hpp"
#include "ncpd/dataset.hpp"

namespace ncpd {

inline constexpr std::array<int, 4> kPlknnGrid{5, 10, 15, 20};

struct PlknnModel {
  Matrix features;
  std::vector<CandidateSet> candidate_sets;
  int num_classes = 0;
  int k = 10;
};

inline PlknnModel plknn_fit(const PartialLabelDataset& train, int k) {
  if (k < 1) throw DataError("k must be at least 1");
  if (static_cast<std::size_t>(k) > train.size()) {
    throw DataError("k=" + std::to_string(k) + " exceeds training size " + std::to_string(train.size()));
  }
  return PlknnModel{train.features, train.candidate_sets, train.num_classes, k};
}

/// Votes over the candidate sets of the k Euclidean-nearest training
/// instances (distance ties toward the lower training index); the most voted
/// label wins, ties toward the lower label.
template <typename Row>
Label plknn_predict(const PlknnModel& model, const Row& x) {
  const auto n = static_cast<std::size_t>(model.features.rows());
  if (model.k < 1 || static_cast<std::size_t>(model.k) > n) throw DataError("k exceeds training size");
  if (x.size() != model.features.cols()) throw DataError("feature dimension mismatch");
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d2 = (model.features.row(static_cast<Eigen::Index>(i)) - x).squaredNorm();
    dist[i] = {d2, i};
  }
  const auto k = static_cast<std::size_t>(model.k);
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
  std::vector<int> votes(static_cast<std::size_t>(model.num_classes), 0);
  for (std::size_t m = 0; m < k; ++m) {
    for (Label l : model.candidate_sets[dist[m].second]) ++votes[static_cast<std::size_t>(l)];
  }
  return static_cast<Label>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

inline std::vector<Label> plknn_predict_all(const PlknnModel& model, const Matrix& x) {
  std::vector<Label> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) out[static_cast<std::size_t>(i)] = plknn_predict(model, x.row(i));
  return out;
}

/// Picks k from the grid by inner cross-validation on the training data. The
/// score is candidate coverage (held-out prediction inside its candidate set),
/// so ground truth is never consulted. Ties go to the smaller k.
inline int plknn_select_k(const PartialLabelDataset& train, std::uint64_t seed, int inner_folds = 5,
                          std::span<const int> grid = kPlknnGrid) {
  const int folds = std::min<int>(inner_folds, static_cast<int>(train.size()));
  if (folds < 2) throw DataError("too few instances to select k");
  const auto split = make_folds(train.size(), folds, derive_seed(seed, {seed_tag::kInnerFolds}));
  int best_k = -1;
  double best_score = -1.0;
  for (int k : grid) {
    double hits = 0.0;
    bool feasible = true;
    for (int f = 0; f < folds && feasible; ++f) {
      const auto tr = split.train_indices(f);
      if (static_cast<std::size_t>(k) > tr.size()) {
        feasible = false;
        break;
      }
      const auto model = plknn_fit(train.subset(tr), k);
      for (auto i : split.test_indices(f)) {
        const Label l = plknn_predict(model, train.features.row(static_cast<Eigen::Index>(i)));
        const auto& s = train.candidate_sets[i];
        hits += std::binary_search(s.begin(), s.end(), l) ? 1.0 : 0.0;
      }
    }
    if (!feasible) continue;
    const double score = hits / static_cast<double>(train.size());
    if (score > best_score) {
      best_score = score;
      best_k = k;
    }
  }
  if (best_k < 0) throw DataError("no k in the grid fits the training size");
  return best_k;
}

/// Single network trained with uniform confidences 1/|S_i| in every batch.
inline TrainedModel uniform_average_train(const DuplicatedDataset& dd, TrainConfig cfg,
                                          const LabeledSet* holdout = nullptr, const TrainObserver& observer = {}) {
  cfg.mode = TrainMode::uniform_avg;
  return train(dd, cfg, holdout, observer);
}

}  // namespace ncpd
