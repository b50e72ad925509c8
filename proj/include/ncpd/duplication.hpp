// Duplicated (replica) representation of a partial-label dataset and
// group-atomic minibatch scheduling.
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ncpd/common.hpp"
#include "ncpd/dataset.hpp"

namespace ncpd {

/// Half-open replica index range [begin, end) of one multi-birth group.
struct ReplicaRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

/// Each instance x_i with candidate set S_i becomes |S_i| replicas, one per
/// candidate label; the replicas of one instance form a multi-birth group and
/// occupy a contiguous index range. Replicas reference the parent feature row.
struct DuplicatedDataset {
  Matrix features;                       // N x d, one row per group
  std::vector<Label> replica_labels;     // n
  std::vector<std::size_t> group_of;     // n -> [0, N)
  std::vector<ReplicaRange> replicas_of; // N
  std::vector<std::size_t> group_sizes;  // N
  int num_classes = 0;
  std::optional<std::vector<Label>> group_truth;  // scoring only

  std::size_t num_replicas() const { return replica_labels.size(); }
  std::size_t num_groups() const { return replicas_of.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }

  std::size_t max_group_size() const {
    std::size_t m = 0;
    for (auto s : group_sizes) m = std::max(m, s);
    return m;
  }

  auto replica_features(std::size_t replica) const {
    return features.row(static_cast<Eigen::Index>(group_of[replica]));
  }

  /// Inverse of duplicate(): the candidate sets implied by the replicas.
  std::vector<CandidateSet> candidate_sets() const {
    std::vector<CandidateSet> out(num_groups());
    for (std::size_t k = 0; k < num_replicas(); ++k) out[group_of[k]].push_back(replica_labels[k]);
    return out;
  }
};

inline DuplicatedDataset duplicate(const PartialLabelDataset& ds) {
  ds.validate();
  DuplicatedDataset dd;
  dd.features = ds.features;
  dd.num_classes = ds.num_classes;
  dd.group_truth = ds.true_labels;
  dd.replicas_of.reserve(ds.size());
  dd.group_sizes.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& s = ds.candidate_sets[i];
    ReplicaRange r{dd.replica_labels.size(), dd.replica_labels.size() + s.size()};
    for (Label l : s) {
      dd.replica_labels.push_back(l);
      dd.group_of.push_back(i);
    }
    dd.replicas_of.push_back(r);
    dd.group_sizes.push_back(s.size());
  }
  return dd;
}

/// One minibatch: whole groups and their replicas in a fixed order.
struct Minibatch {
  std::vector<std::size_t> groups;
  std::vector<std::size_t> replicas;  // concatenated replica ranges of `groups`
};

/// Shuffles groups per (seed, epoch) and packs whole groups greedily into
/// batches of at most batch_size replicas. A group is never split.
inline std::vector<Minibatch> group_minibatches(const DuplicatedDataset& dd, std::size_t batch_size,
                                                std::uint64_t seed, std::uint64_t epoch) {
  if (batch_size == 0) throw DataError("batch_size must be positive");
  if (dd.max_group_size() > batch_size) {
    throw DataError("a group of " + std::to_string(dd.max_group_size()) + " replicas exceeds batch_size " +
                    std::to_string(batch_size));
  }
  std::vector<std::size_t> order(dd.num_groups());
  for (std::size_t g = 0; g < order.size(); ++g) order[g] = g;
  Rng rng(derive_seed(seed, {seed_tag::kShuffle, epoch}));
  rng.shuffle(std::span<std::size_t>(order));

  std::vector<Minibatch> batches;
  Minibatch cur;
  for (auto g : order) {
    const auto range = dd.replicas_of[g];
    if (cur.replicas.size() + range.size() > batch_size) {
      batches.push_back(std::move(cur));
      cur = Minibatch{};
    }
    cur.groups.push_back(g);
    for (auto k = range.begin; k < range.end; ++k) cur.replicas.push_back(k);
  }
  if (!cur.replicas.empty()) batches.push_back(std::move(cur));
  return batches;
}

}  // namespace ncpd
