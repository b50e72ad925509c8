// Cooperative training of two networks that exchange per-batch confidence
// vectors, the single-network and no-screening ablations, and inference.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ncpd/disambiguation.hpp"
#include "ncpd/duplication.hpp"
#include "ncpd/mlp.hpp"

namespace ncpd {

enum class TrainMode {
  full,         // two networks, progressive disambiguation, confidence exchange
  no_nc,        // one network consuming its own confidences
  no_pd,        // two networks, softmax confidences for every group from epoch 0
  uniform_avg,  // one network, uniform confidences always (averaging baseline)
};

inline std::string_view to_string(TrainMode m) {
  switch (m) {
    case TrainMode::full:
      return "full";
    case TrainMode::no_nc:
      return "no_nc";
    case TrainMode::no_pd:
      return "no_pd";
    case TrainMode::uniform_avg:
      return "uniform_avg";
  }
  return "?";
}

inline bool is_cooperative(TrainMode m) { return m == TrainMode::full || m == TrainMode::no_pd; }

inline ConfidenceRule confidence_rule(TrainMode m) {
  switch (m) {
    case TrainMode::no_pd:
      return ConfidenceRule::all_softmax;
    case TrainMode::uniform_avg:
      return ConfidenceRule::all_uniform;
    default:
      return ConfidenceRule::progressive;
  }
}

struct TrainConfig {
  std::size_t batch_size = 128;
  int t_r = 100;
  int total_epochs = 200;
  MlpConfig mlp;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::full;
  bool standardize = true;
  // Stop after this many epochs without improvement of the training-set
  // candidate coverage (prediction in S_i). 0 disables.
  int patience = 0;
  // Initialization seeds; derived from `seed` when unset.
  std::optional<std::uint64_t> alpha_init_seed;
  std::optional<std::uint64_t> beta_init_seed;

  std::uint64_t alpha_seed() const { return alpha_init_seed.value_or(derive_seed(seed, {seed_tag::kAlphaInit})); }
  std::uint64_t beta_seed() const { return beta_init_seed.value_or(derive_seed(seed, {seed_tag::kBetaInit})); }
  std::uint64_t shuffle_seed() const { return derive_seed(seed, {seed_tag::kShuffle}); }

  void validate() const {
    if (batch_size < 1) throw DataError("batch_size must be positive");
    if (t_r < 1) throw DataError("t_r must be at least 1");
    if (total_epochs < 1) throw DataError("total_epochs must be at least 1");
    if (mlp.hidden < 1) throw DataError("hidden width must be positive");
    if (!(mlp.learning_rate > 0.0)) throw DataError("learning rate must be positive");
    if (patience < 0) throw DataError("patience must be nonnegative");
  }
};

/// Labeled evaluation data for the per-epoch validation curve.
struct LabeledSet {
  Matrix features;
  std::vector<Label> labels;
};

struct CurveRow {
  int epoch = 0;
  double T = 0.0;
  double train_loss_alpha = 0.0;  // sum of weighted batch losses / groups
  double train_loss_beta = std::numeric_limits<double>::quiet_NaN();
  double val_accuracy = std::numeric_limits<double>::quiet_NaN();
  double disambiguation_accuracy = std::numeric_limits<double>::quiet_NaN();
  double reliable_fraction = 0.0;  // groups treated as simple / groups, mean over networks
};

struct TrainedModel {
  TrainMode mode = TrainMode::full;
  MlpParameters alpha;
  std::optional<MlpParameters> beta;
  std::vector<CurveRow> curve;
};

/// Everything observable about one batch update, delivered before the Adam
/// steps are applied. Pointers for the second network are null in
/// single-network modes.
struct BatchEvent {
  int epoch;
  std::size_t batch_index;
  double T;
  const DuplicatedDataset& data;
  const Minibatch& batch;
  const BatchForward& fwd_alpha;
  const BatchForward* fwd_beta;
  const BatchConfidence& conf_alpha;  // produced by alpha
  const BatchConfidence* conf_beta;   // produced by beta
  std::span<const double> weights_for_alpha;  // what alpha backpropagates with
  std::span<const double> weights_for_beta;
  const MlpParameters& alpha_before;
  const MlpParameters* beta_before;
  const MlpGradients& grad_alpha;
  const MlpGradients* grad_beta;
};

using TrainObserver = std::function<void(const BatchEvent&)>;

/// Averaged class probabilities of the model's networks.
inline Matrix predict_proba(const TrainedModel& model, const Matrix& features) {
  Matrix p = predict_proba(model.alpha, features);
  if (model.beta) {
    p += predict_proba(*model.beta, features);
    p *= 0.5;
  }
  return p;
}

/// Argmax of the averaged probabilities, ties toward the lower class.
inline std::vector<Label> predict(const TrainedModel& model, const Matrix& features) {
  const Matrix p = predict_proba(model, features);
  std::vector<Label> out(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index k = 0; k < p.rows(); ++k) {
    Eigen::Index best = 0;
    p.row(k).maxCoeff(&best);
    out[static_cast<std::size_t>(k)] = static_cast<Label>(best);
  }
  return out;
}

inline double accuracy(std::span<const Label> predicted, std::span<const Label> truth) {
  if (predicted.size() != truth.size()) throw DataError("prediction/truth length mismatch");
  if (truth.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

namespace detail {

inline Matrix gather_rows(const DuplicatedDataset& dd, const Minibatch& batch) {
  Matrix x(static_cast<Eigen::Index>(batch.replicas.size()), dd.features.cols());
  for (std::size_t k = 0; k < batch.replicas.size(); ++k) {
    x.row(static_cast<Eigen::Index>(k)) = dd.replica_features(batch.replicas[k]);
  }
  return x;
}

inline std::vector<Label> gather_labels(const DuplicatedDataset& dd, const Minibatch& batch) {
  std::vector<Label> y(batch.replicas.size());
  for (std::size_t k = 0; k < batch.replicas.size(); ++k) y[k] = dd.replica_labels[batch.replicas[k]];
  return y;
}

/// Fraction of groups whose prediction lies in the candidate set.
inline double candidate_coverage(const TrainedModel& model, const DuplicatedDataset& dd) {
  const auto pred = predict(model, dd.features);
  std::size_t hit = 0;
  for (std::size_t g = 0; g < dd.num_groups(); ++g) {
    const auto r = dd.replicas_of[g];
    for (auto k = r.begin; k < r.end; ++k) {
      if (dd.replica_labels[k] == pred[g]) {
        ++hit;
        break;
      }
    }
  }
  return static_cast<double>(hit) / static_cast<double>(dd.num_groups());
}

inline double simple_fraction(const BatchConfidence& c) {
  std::size_t s = 0;
  for (bool b : c.group_simple) s += b ? 1 : 0;
  return static_cast<double>(s);
}

}  // namespace detail

/// Runs the training loop selected by cfg.mode. In cooperative modes each
/// network backpropagates its own per-replica losses weighted by the
/// confidences its peer computed for the same batch.
inline TrainedModel train(const DuplicatedDataset& dd, const TrainConfig& cfg,
                          const LabeledSet* holdout = nullptr, const TrainObserver& observer = {}) {
  cfg.validate();
  if (dd.num_groups() == 0) throw DataError("cannot train on an empty dataset");
  if (dd.max_group_size() > cfg.batch_size) {
    throw DataError("batch_size " + std::to_string(cfg.batch_size) + " is smaller than the largest group (" +
                    std::to_string(dd.max_group_size()) + ")");
  }
  const bool coop = is_cooperative(cfg.mode);
  const ConfidenceRule rule = confidence_rule(cfg.mode);
  const int d = static_cast<int>(dd.dim());
  const ScheduleConfig schedule{cfg.t_r};

  TrainedModel model;
  model.mode = cfg.mode;
  model.alpha = init_mlp(d, dd.num_classes, cfg.alpha_seed(), cfg.mlp);
  if (coop) model.beta = init_mlp(d, dd.num_classes, cfg.beta_seed(), cfg.mlp);

  ConfidenceVector confidences = ConfidenceVector::uniform(dd);
  double best_coverage = -1.0;
  int stale = 0;

  for (int epoch = 0; epoch < cfg.total_epochs; ++epoch) {
    const double T = schedule_T(epoch, schedule);
    CurveRow row;
    row.epoch = epoch;
    row.T = T;
    double loss_a = 0.0, loss_b = 0.0, simple_a = 0.0, simple_b = 0.0;

    const auto batches = group_minibatches(dd, cfg.batch_size, cfg.shuffle_seed(), static_cast<std::uint64_t>(epoch));
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const auto& batch = batches[bi];
      const Matrix x = detail::gather_rows(dd, batch);
      const auto y = detail::gather_labels(dd, batch);

      const BatchForward fa = forward(model.alpha, x, y);
      const BatchConfidence ca = disambiguate_batch(batch, dd, fa, T, rule);
      std::optional<BatchForward> fb;
      std::optional<BatchConfidence> cb;
      if (coop) {
        fb = forward(*model.beta, x, y);
        cb = disambiguate_batch(batch, dd, *fb, T, rule);
      }
      const std::span<const double> w_alpha = coop ? std::span<const double>(cb->weights) : std::span<const double>(ca.weights);
      const std::span<const double> w_beta = coop ? std::span<const double>(ca.weights) : std::span<const double>();

      const double la = weighted_loss(fa, w_alpha);
      const double lb = coop ? weighted_loss(*fb, w_beta) : 0.0;
      if (!std::isfinite(la) || !std::isfinite(lb)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(bi));
      }
      const MlpGradients ga = backward(model.alpha, fa, w_alpha);
      std::optional<MlpGradients> gb;
      if (coop) gb = backward(*model.beta, *fb, w_beta);

      if (observer) {
        observer(BatchEvent{epoch, bi, T, dd, batch, fa, coop ? &*fb : nullptr, ca, coop ? &*cb : nullptr, w_alpha,
                            w_beta, model.alpha, coop ? &*model.beta : nullptr, ga, coop ? &*gb : nullptr});
      }
      try {
        adam_step(model.alpha, ga);
        if (coop) adam_step(*model.beta, *gb);
      } catch (const TrainingError& e) {
        throw TrainingError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(bi) + ")");
      }

      confidences.assign(batch, ca.weights);
      loss_a += la;
      loss_b += lb;
      simple_a += detail::simple_fraction(ca);
      if (coop) simple_b += detail::simple_fraction(*cb);
    }

    const double groups = static_cast<double>(dd.num_groups());
    row.train_loss_alpha = loss_a / groups;
    if (coop) row.train_loss_beta = loss_b / groups;
    row.reliable_fraction = coop ? (simple_a + simple_b) / (2.0 * groups) : simple_a / groups;
    if (holdout) row.val_accuracy = accuracy(predict(model, holdout->features), holdout->labels);
    if (dd.group_truth) row.disambiguation_accuracy = disambiguation_accuracy(confidences, dd, *dd.group_truth).accuracy;
    model.curve.push_back(row);

    if (cfg.patience > 0) {
      const double coverage = detail::candidate_coverage(model, dd);
      if (coverage > best_coverage) {
        best_coverage = coverage;
        stale = 0;
      } else if (++stale >= cfg.patience) {
        break;
      }
    }
  }
  return model;
}

inline TrainedModel train_no_nc(const DuplicatedDataset& dd, TrainConfig cfg, const LabeledSet* holdout = nullptr,
                                const TrainObserver& observer = {}) {
  cfg.mode = TrainMode::no_nc;
  return train(dd, cfg, holdout, observer);
}

inline TrainedModel train_no_pd(const DuplicatedDataset& dd, TrainConfig cfg, const LabeledSet* holdout = nullptr,
                                const TrainObserver& observer = {}) {
  cfg.mode = TrainMode::no_pd;
  return train(dd, cfg, holdout, observer);
}

inline void write_curve_csv(std::ostream& out, const std::vector<CurveRow>& curve) {
  out << "epoch,T_t,train_loss_alpha,train_loss_beta,val_accuracy,disambiguation_accuracy,reliable_fraction\n";
  for (const auto& r : curve) {
    out << r.epoch << ',' << detail::format_double(r.T) << ',' << detail::format_double(r.train_loss_alpha) << ','
        << detail::format_double(r.train_loss_beta) << ',' << detail::format_double(r.val_accuracy) << ','
        << detail::format_double(r.disambiguation_accuracy) << ',' << detail::format_double(r.reliable_fraction)
        << '\n';
  }
}

}  // namespace ncpd
