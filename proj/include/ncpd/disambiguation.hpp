// Progressive disambiguation: the T(t) schedule, reliable-replica screening and
// per-batch group confidence vectors.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <vector>

#include "ncpd/duplication.hpp"
#include "ncpd/mlp.hpp"

namespace ncpd {

struct ScheduleConfig {
  int t_r = 100;
};

/// Fraction of each batch eligible for screening at epoch t:
/// exp(-5 (t/t_r - 1)^2) up to t_r, then 1.
inline double schedule_T(double t, const ScheduleConfig& cfg = {}) {
  if (cfg.t_r < 1) throw DataError("t_r must be at least 1");
  if (t < 0) throw DataError("epoch index must be nonnegative");
  if (t > cfg.t_r) return 1.0;
  const double u = t / static_cast<double>(cfg.t_r) - 1.0;
  return std::exp(-5.0 * u * u);
}

/// Number of smallest-loss replicas eligible in a batch of `batch_size`.
inline std::size_t screening_cutoff(double T, std::size_t batch_size) {
  return static_cast<std::size_t>(std::floor(T * static_cast<double>(batch_size)));
}

/// Reliable replicas of a batch: among the floor(T*B) smallest losses (ties
/// ordered by replica index), those whose argmax prediction equals their
/// label. Returns batch positions in ascending order. Replicas of a group share
/// features, hence one prediction, so at most one replica per group passes.
inline std::vector<std::size_t> select_reliable(const Minibatch& batch, const BatchForward& fwd, double T) {
  const std::size_t b = fwd.batch_size();
  if (batch.replicas.size() != b) throw DataError("forward pass does not cover the batch");
  std::vector<std::size_t> order(b);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) {
    const double la = fwd.losses(static_cast<Eigen::Index>(a));
    const double lc = fwd.losses(static_cast<Eigen::Index>(c));
    if (la != lc) return la < lc;
    return batch.replicas[a] < batch.replicas[c];
  });
  const std::size_t cutoff = std::min(screening_cutoff(T, b), b);
  std::vector<std::size_t> reliable;
  for (std::size_t k = 0; k < cutoff; ++k) {
    const std::size_t pos = order[k];
    if (fwd.prediction(pos) == fwd.labels[pos]) reliable.push_back(pos);
  }
  std::sort(reliable.begin(), reliable.end());
  return reliable;
}

/// Loss-softmax confidences of one group: exp(-l_j) / sum_k exp(-l_k),
/// evaluated relative to the group's smallest loss.
inline void softmax_confidence(std::span<const double> losses, std::span<double> out) {
  const double lo = *std::min_element(losses.begin(), losses.end());
  double total = 0.0;
  for (std::size_t j = 0; j < losses.size(); ++j) {
    out[j] = std::exp(-(losses[j] - lo));
    total += out[j];
  }
  for (auto& v : out) v /= total;
}

inline void uniform_confidence(std::span<double> out) {
  const double v = 1.0 / static_cast<double>(out.size());
  for (auto& x : out) x = v;
}

enum class ConfidenceRule {
  progressive,  // softmax for groups holding a reliable replica, uniform otherwise
  all_softmax,  // softmax for every group (screening bypassed)
  all_uniform,  // uniform for every group
};

/// Confidence weights for one batch, aligned with Minibatch::replicas.
struct BatchConfidence {
  std::vector<double> weights;
  std::vector<std::size_t> reliable;  // batch positions
  std::vector<bool> group_simple;     // aligned with Minibatch::groups
};

/// Relies on group-atomic batches: each group's replicas are contiguous in
/// `batch.replicas`, in the order of `batch.groups`.
inline BatchConfidence update_confidences(const Minibatch& batch, const DuplicatedDataset& dd,
                                          std::span<const double> losses, std::vector<std::size_t> reliable,
                                          ConfidenceRule rule) {
  if (losses.size() != batch.replicas.size()) throw DataError("loss vector does not cover the batch");
  BatchConfidence out;
  out.weights.assign(batch.replicas.size(), 0.0);
  out.group_simple.assign(batch.groups.size(), false);
  std::vector<bool> is_reliable(batch.replicas.size(), false);
  for (auto pos : reliable) is_reliable[pos] = true;
  out.reliable = std::move(reliable);

  std::size_t pos = 0;
  for (std::size_t gi = 0; gi < batch.groups.size(); ++gi) {
    const auto range = dd.replicas_of[batch.groups[gi]];
    const std::size_t len = range.size();
    if (pos + len > batch.replicas.size() || batch.replicas[pos] != range.begin) {
      throw DataError("batch is not group-atomic");
    }
    bool simple = false;
    switch (rule) {
      case ConfidenceRule::progressive:
        for (std::size_t j = 0; j < len; ++j) simple = simple || is_reliable[pos + j];
        break;
      case ConfidenceRule::all_softmax:
        simple = true;
        break;
      case ConfidenceRule::all_uniform:
        simple = false;
        break;
    }
    std::span<double> w(out.weights.data() + pos, len);
    if (simple) {
      softmax_confidence(losses.subspan(pos, len), w);
    } else {
      uniform_confidence(w);
    }
    out.group_simple[gi] = simple;
    pos += len;
  }
  if (pos != batch.replicas.size()) throw DataError("batch is not group-atomic");
  return out;
}

/// Screening plus confidence update for one network's forward pass.
inline BatchConfidence disambiguate_batch(const Minibatch& batch, const DuplicatedDataset& dd,
                                          const BatchForward& fwd, double T, ConfidenceRule rule) {
  std::vector<std::size_t> reliable;
  if (rule == ConfidenceRule::progressive) reliable = select_reliable(batch, fwd, T);
  const std::span<const double> losses(fwd.losses.data(), static_cast<std::size_t>(fwd.losses.size()));
  return update_confidences(batch, dd, losses, std::move(reliable), rule);
}

/// Per-replica confidence scores for the whole dataset, one normalized
/// segment per group. Starts uniform.
struct ConfidenceVector {
  std::vector<double> scores;

  static ConfidenceVector uniform(const DuplicatedDataset& dd) {
    ConfidenceVector cv;
    cv.scores.resize(dd.num_replicas());
    for (const auto& r : dd.replicas_of) uniform_confidence(std::span<double>(cv.scores.data() + r.begin, r.size()));
    return cv;
  }

  void assign(const Minibatch& batch, std::span<const double> weights) {
    for (std::size_t k = 0; k < batch.replicas.size(); ++k) scores[batch.replicas[k]] = weights[k];
  }

  std::span<const double> group(const DuplicatedDataset& dd, std::size_t g) const {
    const auto r = dd.replicas_of[g];
    return {scores.data() + r.begin, r.size()};
  }
};

struct DisambiguationReport {
  double accuracy = std::numeric_limits<double>::quiet_NaN();  // NaN when no group is ambiguous
  std::size_t ambiguous_groups = 0;
  std::size_t correct = 0;
  std::size_t tied_groups = 0;  // groups whose maximum confidence is shared
};

/// Fraction of groups with more than one replica whose highest-confidence
/// replica (lowest index on ties) carries the true label.
inline DisambiguationReport disambiguation_accuracy(const ConfidenceVector& conf, const DuplicatedDataset& dd,
                                                    std::span<const Label> truth) {
  if (truth.size() != dd.num_groups()) throw DataError("ground truth required for every group");
  DisambiguationReport rep;
  for (std::size_t g = 0; g < dd.num_groups(); ++g) {
    const auto r = dd.replicas_of[g];
    if (r.size() < 2) continue;
    ++rep.ambiguous_groups;
    std::size_t best = r.begin;
    std::size_t ties = 1;
    for (auto k = r.begin + 1; k < r.end; ++k) {
      if (conf.scores[k] > conf.scores[best]) {
        best = k;
        ties = 1;
      } else if (conf.scores[k] == conf.scores[best]) {
        ++ties;
      }
    }
    if (ties > 1) ++rep.tied_groups;
    if (dd.replica_labels[best] == truth[g]) ++rep.correct;
  }
  if (rep.ambiguous_groups > 0) {
    rep.accuracy = static_cast<double>(rep.correct) / static_cast<double>(rep.ambiguous_groups);
  }
  return rep;
}

/// Header for write_confidence_rows().
inline void write_confidence_header(std::ostream& out) {
  out << "epoch,group,replica,label,loss,confidence,is_reliable\n";
}

inline void write_confidence_rows(std::ostream& out, int epoch, const Minibatch& batch, const DuplicatedDataset& dd,
                                  const BatchForward& fwd, const BatchConfidence& conf) {
  std::vector<bool> rel(batch.replicas.size(), false);
  for (auto p : conf.reliable) rel[p] = true;
  for (std::size_t k = 0; k < batch.replicas.size(); ++k) {
    const auto replica = batch.replicas[k];
    out << epoch << ',' << dd.group_of[replica] << ',' << replica << ',' << dd.replica_labels[replica] << ','
        << detail::format_double(fwd.losses(static_cast<Eigen::Index>(k))) << ','
        << detail::format_double(conf.weights[k]) << ',' << (rel[k] ? 1 : 0) << '\n';
  }
}

}  // namespace ncpd
