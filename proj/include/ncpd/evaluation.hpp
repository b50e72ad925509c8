// Cross-validation, accuracy aggregation, paired t-tests and comparison tables.
#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <future>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "ncpd/baselines.hpp"
#include "ncpd/cooperation.hpp"
#include "ncpd/dataset.hpp"
#include "ncpd/duplication.hpp"

namespace ncpd {

using json = nlohmann::ordered_json;

enum class Method { ncpd, ncpd_no_nc, ncpd_no_pd, uniform_avg, plknn };

inline constexpr std::array<Method, 5> kAllMethods{Method::ncpd, Method::ncpd_no_nc, Method::ncpd_no_pd,
                                                   Method::uniform_avg, Method::plknn};

inline std::string_view method_name(Method m) {
  switch (m) {
    case Method::ncpd:
      return "ncpd";
    case Method::ncpd_no_nc:
      return "ncpd-no-nc";
    case Method::ncpd_no_pd:
      return "ncpd-no-pd";
    case Method::uniform_avg:
      return "uniform-avg";
    case Method::plknn:
      return "plknn";
  }
  return "?";
}

inline std::optional<Method> parse_method(std::string_view name) {
  for (auto m : kAllMethods) {
    if (method_name(m) == name) return m;
  }
  return std::nullopt;
}

inline TrainMode train_mode(Method m) {
  switch (m) {
    case Method::ncpd_no_nc:
      return TrainMode::no_nc;
    case Method::ncpd_no_pd:
      return TrainMode::no_pd;
    case Method::uniform_avg:
      return TrainMode::uniform_avg;
    default:
      return TrainMode::full;
  }
}

/// A method plus everything needed to run it.
struct MethodSpec {
  Method method = Method::ncpd;
  TrainConfig train;  // neural methods; `standardize` applies to all methods
  int plknn_k = 0;    // 0: select from the grid by inner cross-validation
};

inline json config_snapshot(const MethodSpec& spec) {
  json j;
  j["method"] = method_name(spec.method);
  j["standardize"] = spec.train.standardize;
  if (spec.method == Method::plknn) {
    j["plknn_k"] = spec.plknn_k;
    return j;
  }
  j["mode"] = to_string(train_mode(spec.method));
  j["batch_size"] = spec.train.batch_size;
  j["t_r"] = spec.train.t_r;
  j["epochs"] = spec.train.total_epochs;
  j["hidden"] = spec.train.mlp.hidden;
  j["learning_rate"] = spec.train.mlp.learning_rate;
  j["adam_beta1"] = spec.train.mlp.beta1;
  j["adam_beta2"] = spec.train.mlp.beta2;
  j["adam_epsilon"] = spec.train.mlp.epsilon;
  j["patience"] = spec.train.patience;
  return j;
}

struct ExperimentResult {
  std::string method;
  std::string dataset;
  std::vector<double> fold_accuracies;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation (divisor folds - 1)
  json config = json::object();
  std::uint64_t seed = 0;
  int fold_count = 0;
  std::uint64_t fold_fingerprint = 0;
  double wall_seconds = 0.0;

  /// `with_timing=false` drops the wall-clock field for reproducibility checks.
  json to_json(bool with_timing = true) const {
    json j;
    j["method"] = method;
    j["dataset"] = dataset;
    j["seed"] = seed;
    j["fold_count"] = fold_count;
    j["fold_fingerprint"] = fold_fingerprint;
    j["fold_accuracies"] = fold_accuracies;
    j["mean"] = mean;
    j["std"] = stddev;
    j["config"] = config;
    if (with_timing) j["wall_seconds"] = wall_seconds;
    return j;
  }

  static ExperimentResult from_json(const json& j) {
    ExperimentResult r;
    r.method = j.at("method").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.fold_count = j.at("fold_count").get<int>();
    r.fold_fingerprint = j.at("fold_fingerprint").get<std::uint64_t>();
    r.fold_accuracies = j.at("fold_accuracies").get<std::vector<double>>();
    r.mean = j.at("mean").get<double>();
    r.stddev = j.at("std").get<double>();
    r.config = j.value("config", json::object());
    r.wall_seconds = j.value("wall_seconds", 0.0);
    return r;
  }
};

inline double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double sample_stddev(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

inline void summarize(ExperimentResult& r) {
  r.mean = mean_of(r.fold_accuracies);
  r.stddev = sample_stddev(r.fold_accuracies);
}

/// Per-fold artifacts handed to a run_cv callback: the trained neural model
/// (null for PLKNN) and the chosen k (PLKNN only).
struct FoldArtifacts {
  int fold = 0;
  double accuracy = 0.0;
  std::optional<TrainedModel> model;
  int plknn_k = 0;
};

/// Trains on `train`, scores on `test`. Standardization statistics come from
/// `train` only.
inline FoldArtifacts run_split(const PartialLabelDataset& train_in, const PartialLabelDataset& test_in,
                               const MethodSpec& spec, std::uint64_t seed, const TrainObserver& observer = {}) {
  if (!test_in.has_truth()) throw DataError("scoring requires ground-truth labels on the test split");
  PartialLabelDataset train_ds = train_in;
  PartialLabelDataset test_ds = test_in;
  if (spec.train.standardize) {
    auto [tr, stats] = standardize_features(train_in);
    train_ds = std::move(tr);
    test_ds = standardize_features(test_in, stats).first;
  }
  FoldArtifacts out;
  if (spec.method == Method::plknn) {
    out.plknn_k = spec.plknn_k > 0 ? spec.plknn_k : plknn_select_k(train_ds, seed);
    const auto model = plknn_fit(train_ds, out.plknn_k);
    out.accuracy = accuracy(plknn_predict_all(model, test_ds.features), *test_ds.true_labels);
    return out;
  }
  TrainConfig cfg = spec.train;
  cfg.mode = train_mode(spec.method);
  cfg.seed = seed;
  const auto dd = duplicate(train_ds);
  const LabeledSet holdout{test_ds.features, *test_ds.true_labels};
  auto model = train(dd, cfg, &holdout, observer);
  out.accuracy = accuracy(predict(model, test_ds.features), *test_ds.true_labels);
  out.model = std::move(model);
  return out;
}

using FoldCallback = std::function<void(const FoldArtifacts&)>;
// Builds the training observer for one fold; called on the fold's thread.
using ObserverFactory = std::function<TrainObserver(int fold)>;

/// k-fold cross-validation. Folds may run on `jobs` threads; results and
/// callbacks are delivered in fold order.
inline ExperimentResult run_cv(const PartialLabelDataset& ds, const MethodSpec& spec, int fold_count,
                               std::uint64_t seed, const std::string& dataset_name = "dataset", int jobs = 1,
                               const FoldCallback& on_fold = {}, const ObserverFactory& observers = {}) {
  if (!ds.has_truth()) throw DataError("cross-validation scoring requires ground-truth labels");
  const auto start = std::chrono::steady_clock::now();
  const auto split = make_folds(ds.size(), fold_count, seed);

  auto run_fold = [&](int f) {
    auto art = run_split(ds.subset(split.train_indices(f)), ds.subset(split.test_indices(f)), spec,
                         derive_seed(seed, {seed_tag::kFoldTrain, static_cast<std::uint64_t>(f)}),
                         observers ? observers(f) : TrainObserver{});
    art.fold = f;
    return art;
  };

  std::vector<FoldArtifacts> folds(static_cast<std::size_t>(fold_count));
  if (jobs <= 1) {
    for (int f = 0; f < fold_count; ++f) folds[static_cast<std::size_t>(f)] = run_fold(f);
  } else {
    for (int base = 0; base < fold_count; base += jobs) {
      std::vector<std::future<FoldArtifacts>> pending;
      for (int f = base; f < std::min(fold_count, base + jobs); ++f) {
        pending.push_back(std::async(std::launch::async, run_fold, f));
      }
      for (std::size_t k = 0; k < pending.size(); ++k) {
        folds[static_cast<std::size_t>(base) + k] = pending[k].get();
      }
    }
  }

  ExperimentResult r;
  r.method = std::string(method_name(spec.method));
  r.dataset = dataset_name;
  r.seed = seed;
  r.fold_count = fold_count;
  r.fold_fingerprint = split.fingerprint();
  r.config = config_snapshot(spec);
  for (const auto& art : folds) {
    r.fold_accuracies.push_back(art.accuracy);
    if (on_fold) on_fold(art);
  }
  if (spec.method == Method::plknn && spec.plknn_k == 0) {
    json ks = json::array();
    for (const auto& art : folds) ks.push_back(art.plknn_k);
    r.config["selected_k"] = ks;
  }
  summarize(r);
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

/// One seeded train/test split instead of cross-validation. The result holds a
/// single accuracy (fold_count 1, std 0).
inline ExperimentResult run_holdout(const PartialLabelDataset& ds, const MethodSpec& spec, double test_fraction,
                                    std::uint64_t seed, const std::string& dataset_name = "dataset",
                                    const FoldCallback& on_fold = {}, const ObserverFactory& observers = {}) {
  if (!ds.has_truth()) throw DataError("holdout scoring requires ground-truth labels");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw DataError("holdout fraction must lie in (0, 1)");
  const auto n_test = static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(ds.size())));
  if (n_test == 0 || n_test == ds.size()) throw DataError("holdout split leaves an empty side");
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, {seed_tag::kFolds}));
  rng.shuffle(std::span<std::size_t>(order));
  FoldSplit split{2, std::vector<int>(ds.size(), 1)};
  for (std::size_t k = 0; k < n_test; ++k) split.assignments[order[k]] = 0;

  auto art = run_split(ds.subset(split.train_indices(0)), ds.subset(split.test_indices(0)), spec,
                       derive_seed(seed, {seed_tag::kFoldTrain, 0}), observers ? observers(0) : TrainObserver{});
  ExperimentResult r;
  r.method = std::string(method_name(spec.method));
  r.dataset = dataset_name;
  r.seed = seed;
  r.fold_count = 1;
  r.fold_fingerprint = split.fingerprint();
  r.config = config_snapshot(spec);
  r.config["holdout_fraction"] = test_fraction;
  if (spec.method == Method::plknn && spec.plknn_k == 0) r.config["selected_k"] = json::array({art.plknn_k});
  r.fold_accuracies = {art.accuracy};
  if (on_fold) on_fold(art);
  summarize(r);
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

// ---------------------------------------------------------------------------
// Significance
// ---------------------------------------------------------------------------

enum class Verdict { superior, inferior, not_significant };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::superior:
      return "superior";
    case Verdict::inferior:
      return "inferior";
    case Verdict::not_significant:
      return "not significant";
  }
  return "?";
}

struct TTestResult {
  Verdict verdict = Verdict::not_significant;
  double t = 0.0;  // +-inf for a nonzero constant difference
  int df = 0;
  double critical = 0.0;
  double mean_difference = 0.0;
};

/// Two-tailed Student t critical values for df = 1..30.
inline double t_critical(int df, double alpha) {
  static constexpr std::array<double, 30> k10{6.314, 2.920, 2.353, 2.132, 2.015, 1.943, 1.895, 1.860, 1.833, 1.812,
                                              1.796, 1.782, 1.771, 1.761, 1.753, 1.746, 1.740, 1.734, 1.729, 1.725,
                                              1.721, 1.717, 1.714, 1.711, 1.708, 1.706, 1.703, 1.701, 1.699, 1.697};
  static constexpr std::array<double, 30> k05{12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
                                              2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
                                              2.080,  2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042};
  static constexpr std::array<double, 30> k01{63.657, 9.925, 5.841, 4.604, 4.032, 3.707, 3.499, 3.355, 3.250, 3.169,
                                              3.106,  3.055, 3.012, 2.977, 2.947, 2.921, 2.898, 2.878, 2.861, 2.845,
                                              2.831,  2.819, 2.807, 2.797, 2.787, 2.779, 2.771, 2.763, 2.756, 2.750};
  if (df < 1 || df > 30) throw DataError("t critical table covers 1..30 degrees of freedom");
  const auto i = static_cast<std::size_t>(df - 1);
  if (alpha == 0.10) return k10[i];
  if (alpha == 0.05) return k05[i];
  if (alpha == 0.01) return k01[i];
  throw DataError("supported significance levels are 0.10, 0.05 and 0.01");
}

/// Paired two-tailed t-test on fold-wise differences a - b. A nonzero
/// difference with zero variance is significant; identical folds are not.
inline TTestResult paired_t_test(const ExperimentResult& a, const ExperimentResult& b, double alpha = 0.05) {
  if (a.fold_accuracies.size() != b.fold_accuracies.size()) throw DataError("results have different fold counts");
  if (a.fold_fingerprint != b.fold_fingerprint) throw DataError("results use different fold splits");
  const std::size_t n = a.fold_accuracies.size();
  if (n < 2) throw DataError("paired t-test needs at least two folds");
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = a.fold_accuracies[i] - b.fold_accuracies[i];
  TTestResult r;
  r.df = static_cast<int>(n) - 1;
  r.critical = t_critical(r.df, alpha);
  r.mean_difference = mean_of(diff);
  const double sd = sample_stddev(diff);
  if (sd == 0.0) {
    if (r.mean_difference == 0.0) return r;
    r.t = r.mean_difference > 0 ? INFINITY : -INFINITY;
  } else {
    r.t = r.mean_difference / (sd / std::sqrt(static_cast<double>(n)));
  }
  if (std::abs(r.t) > r.critical) r.verdict = r.t > 0 ? Verdict::superior : Verdict::inferior;
  return r;
}

// ---------------------------------------------------------------------------
// Comparison table
// ---------------------------------------------------------------------------

struct ComparisonTable {
  std::string text;
  std::string csv;
};

inline constexpr const char* kSuperiorMarker = "•";  // reference significantly better
inline constexpr const char* kInferiorMarker = "◦";  // reference significantly worse

/// Rows per dataset, columns per method (first-appearance order), mean +- std,
/// with a marker where the reference method differs significantly.
inline ComparisonTable comparison_table(const std::vector<ExperimentResult>& results, const std::string& reference,
                                        double alpha = 0.05) {
  std::vector<std::string> datasets, methods;
  std::map<std::pair<std::string, std::string>, const ExperimentResult*> cell;
  for (const auto& r : results) {
    if (std::find(datasets.begin(), datasets.end(), r.dataset) == datasets.end()) datasets.push_back(r.dataset);
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
    cell[{r.dataset, r.method}] = &r;
  }
  if (std::find(methods.begin(), methods.end(), reference) == methods.end()) {
    throw DataError("reference method '" + reference + "' not among the results");
  }
  for (const auto& ds : datasets) {
    const ExperimentResult* first = nullptr;
    for (const auto& m : methods) {
      auto it = cell.find({ds, m});
      if (it == cell.end()) continue;
      if (first && (first->fold_fingerprint != it->second->fold_fingerprint || first->seed != it->second->seed)) {
        throw DataError("results for '" + ds + "' were produced with different fold seeds");
      }
      first = it->second;
    }
  }

  auto fixed3 = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return std::string(buf);
  };

  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> header{"dataset"};
  for (const auto& m : methods) header.push_back(m);
  grid.push_back(header);
  std::ostringstream csv;
  csv << "dataset,method,mean,std,fold_count,verdict_vs_reference,marker\n";
  for (const auto& ds : datasets) {
    std::vector<std::string> row{ds};
    auto ref_it = cell.find({ds, reference});
    for (const auto& m : methods) {
      auto it = cell.find({ds, m});
      if (it == cell.end()) {
        row.push_back("-");
        continue;
      }
      const auto& r = *it->second;
      std::string marker, verdict;
      if (m != reference && ref_it != cell.end()) {
        const auto t = paired_t_test(*ref_it->second, r, alpha);
        if (t.verdict == Verdict::superior) marker = kSuperiorMarker;
        if (t.verdict == Verdict::inferior) marker = kInferiorMarker;
        verdict = std::string(to_string(t.verdict));
      }
      row.push_back(fixed3(r.mean) + " +- " + fixed3(r.stddev) + (marker.empty() ? "" : " " + marker));
      csv << detail::csv_escape(ds) << ',' << detail::csv_escape(m) << ',' << detail::format_double(r.mean) << ','
          << detail::format_double(r.stddev) << ',' << r.fold_count << ',' << verdict << ',' << marker << '\n';
    }
    grid.push_back(row);
  }

  // Column widths in code points so the UTF-8 markers align.
  auto width = [](const std::string& s) {
    std::size_t w = 0;
    for (unsigned char ch : s) w += (ch & 0xC0) != 0x80 ? 1 : 0;
    return w;
  };
  std::vector<std::size_t> widths(header.size(), 0);
  for (const auto& row : grid) {
    for (std::size_t j = 0; j < row.size(); ++j) widths[j] = std::max(widths[j], width(row[j]));
  }
  std::ostringstream text;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t j = 0; j < grid[i].size(); ++j) {
      text << (j ? " | " : "") << grid[i][j] << std::string(widths[j] - width(grid[i][j]), ' ');
    }
    text << '\n';
    if (i == 0) {
      for (std::size_t j = 0; j < widths.size(); ++j) text << (j ? "-+-" : "") << std::string(widths[j], '-');
      text << '\n';
    }
  }
  if (methods.size() > 1) {
    text << kSuperiorMarker << "/" << kInferiorMarker << ": " << reference
         << " significantly superior/inferior (paired t-test, alpha " << detail::format_double(alpha) << ")\n";
  }
  return {text.str(), csv.str()};
}

/// Parses the CSV emitted by comparison_table(): (dataset, method) -> (mean, std).
inline std::map<std::pair<std::string, std::string>, std::pair<double, double>> parse_comparison_csv(
    const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  std::map<std::pair<std::string, std::string>, std::pair<double, double>> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() < 4) throw DataError("malformed comparison row '" + line + "'");
    out[{cells[0], cells[1]}] = {*detail::parse_double(cells[2]), *detail::parse_double(cells[3])};
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON-lines store
// ---------------------------------------------------------------------------

inline void append_jsonl(std::ostream& out, const ExperimentResult& r, bool with_timing = true) {
  out << r.to_json(with_timing).dump() << '\n';
}

inline std::vector<ExperimentResult> read_jsonl(std::istream& in) {
  std::vector<ExperimentResult> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("fold_accuracies")) continue;  // non-result records
    out.push_back(ExperimentResult::from_json(j));
  }
  return out;
}

}  // namespace ncpd
