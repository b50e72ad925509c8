// Partial-label datasets: CSV I/O, the controlled (p, r) corruption protocol,
// feature standardization and cross-validation folds.
#pragma once

#include <algorithm>
#include <cmath>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ncpd/common.hpp"

namespace ncpd {

using CandidateSet = std::vector<Label>;  // sorted ascending, unique

/// Dense label codes [0, c) and the original token for each code.
struct LabelMapping {
  std::vector<std::string> names;

  int size() const { return static_cast<int>(names.size()); }

  std::optional<Label> find(std::string_view token) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == token) return static_cast<Label>(i);
    }
    return std::nullopt;
  }

  const std::string& name(Label l) const { return names.at(static_cast<std::size_t>(l)); }

  /// Identity mapping "0", "1", ..., "c-1".
  static LabelMapping integers(int c) {
    LabelMapping m;
    for (int i = 0; i < c; ++i) m.names.push_back(std::to_string(i));
    return m;
  }
};

/// Feature matrix plus one candidate label set per instance. Ground-truth labels
/// are optional and only ever read for scoring.
struct PartialLabelDataset {
  Matrix features;
  std::vector<CandidateSet> candidate_sets;
  std::optional<std::vector<Label>> true_labels;
  int num_classes = 0;
  LabelMapping labels;
  std::vector<std::string> feature_names;

  std::size_t size() const { return candidate_sets.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }
  bool has_truth() const { return true_labels.has_value(); }

  /// Throws DataError describing the first violated invariant.
  void validate() const {
    if (num_classes < 1) throw DataError("num_classes must be positive");
    if (static_cast<std::size_t>(features.rows()) != candidate_sets.size()) {
      throw DataError("feature rows (" + std::to_string(features.rows()) + ") != candidate sets (" +
                      std::to_string(candidate_sets.size()) + ")");
    }
    for (std::size_t i = 0; i < candidate_sets.size(); ++i) {
      const auto& s = candidate_sets[i];
      if (s.empty()) throw DataError("instance " + std::to_string(i) + " has an empty candidate set");
      for (std::size_t k = 0; k < s.size(); ++k) {
        if (s[k] < 0 || s[k] >= num_classes) {
          throw DataError("instance " + std::to_string(i) + " has label " + std::to_string(s[k]) +
                          " outside [0, " + std::to_string(num_classes) + ")");
        }
        if (k > 0 && s[k - 1] >= s[k]) {
          throw DataError("instance " + std::to_string(i) + " candidate set not sorted/unique");
        }
      }
    }
    if (true_labels) {
      if (true_labels->size() != candidate_sets.size()) throw DataError("true_labels length mismatch");
      for (std::size_t i = 0; i < true_labels->size(); ++i) {
        const auto& s = candidate_sets[i];
        if (!std::binary_search(s.begin(), s.end(), (*true_labels)[i])) {
          throw DataError("instance " + std::to_string(i) + ": true label not in candidate set");
        }
      }
    }
  }

  std::size_t max_set_size() const {
    std::size_t m = 0;
    for (const auto& s : candidate_sets) m = std::max(m, s.size());
    return m;
  }

  double average_set_size() const {
    if (candidate_sets.empty()) return 0.0;
    double total = 0.0;
    for (const auto& s : candidate_sets) total += static_cast<double>(s.size());
    return total / static_cast<double>(candidate_sets.size());
  }

  /// Rows selected by `indices`, in that order.
  PartialLabelDataset subset(std::span<const std::size_t> indices) const {
    PartialLabelDataset out;
    out.num_classes = num_classes;
    out.labels = labels;
    out.feature_names = feature_names;
    out.features.resize(static_cast<Eigen::Index>(indices.size()), features.cols());
    out.candidate_sets.reserve(indices.size());
    std::vector<Label> truth;
    for (std::size_t k = 0; k < indices.size(); ++k) {
      const auto i = indices[k];
      out.features.row(static_cast<Eigen::Index>(k)) = features.row(static_cast<Eigen::Index>(i));
      out.candidate_sets.push_back(candidate_sets[i]);
      if (true_labels) truth.push_back((*true_labels)[i]);
    }
    if (true_labels) out.true_labels = std::move(truth);
    return out;
  }
};

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

enum class LabelEncoding {
  first_appearance,  // arbitrary tokens, coded by order of first appearance
  integer,           // tokens are non-negative integers used as codes directly
};

/// Describes which CSV columns hold what. Exactly one of `label_column` and
/// `candidate_column` must be set.
struct CsvSchema {
  std::vector<std::string> feature_columns;  // empty: every remaining column
  std::vector<std::string> drop_columns;
  std::string label_column;
  std::string candidate_column;
  std::string truth_column;  // optional ground truth alongside a candidate column
  LabelEncoding encoding = LabelEncoding::first_appearance;
  std::optional<LabelMapping> fixed_mapping;  // tokens outside it are errors
  std::optional<int> num_classes;             // integer encoding: override inferred c
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

inline std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return v;
}

inline std::vector<std::string> split_tokens(const std::string& cell, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : cell) {
    if (ch == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

/// Shortest decimal that round-trips exactly.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

/// Resolves label tokens to codes under a CsvSchema's encoding rules.
class LabelCoder {
 public:
  explicit LabelCoder(const CsvSchema& schema) : schema_(schema) {
    if (schema.fixed_mapping) mapping_ = *schema.fixed_mapping;
  }

  Label code(const std::string& token, std::size_t line) {
    auto fail = [&](const std::string& why) {
      return DataError("line " + std::to_string(line) + ": " + why + " '" + token + "'");
    };
    if (token.empty()) throw fail("empty label token");
    if (schema_.fixed_mapping) {
      if (auto l = mapping_.find(token)) return *l;
      throw fail("unknown label token");
    }
    if (schema_.encoding == LabelEncoding::integer) {
      int v = 0;
      auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
      if (ec != std::errc() || ptr != token.data() + token.size() || v < 0) {
        throw fail("label token is not a non-negative integer");
      }
      if (schema_.num_classes && v >= *schema_.num_classes) throw fail("unknown label token");
      max_code_ = std::max(max_code_, v);
      return v;
    }
    if (auto l = mapping_.find(token)) return *l;
    mapping_.names.push_back(token);
    return mapping_.size() - 1;
  }

  LabelMapping finish(int& num_classes) const {
    if (schema_.fixed_mapping) {
      num_classes = mapping_.size();
      return mapping_;
    }
    if (schema_.encoding == LabelEncoding::integer) {
      num_classes = schema_.num_classes.value_or(max_code_ + 1);
      return LabelMapping::integers(num_classes);
    }
    num_classes = mapping_.size();
    return mapping_;
  }

 private:
  const CsvSchema& schema_;
  LabelMapping mapping_;
  int max_code_ = -1;
};

}  // namespace detail

/// Parses a header-led CSV stream. `source` names the stream in errors.
inline PartialLabelDataset parse_csv(std::istream& in, const CsvSchema& schema,
                                     const std::string& source = "<stream>") {
  const bool clean = !schema.label_column.empty();
  if (clean == !schema.candidate_column.empty()) {
    throw DataError("schema must name exactly one of a label column or a candidate column");
  }
  std::string line;
  if (!std::getline(in, line)) throw DataError(source + ": missing header row");
  auto header = detail::split_csv_line(line);
  for (auto& h : header) h = detail::trim(h);

  auto column = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError(source + ": no column named '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t label_col = column(clean ? schema.label_column : schema.candidate_column);
  std::optional<std::size_t> truth_col;
  if (!clean && !schema.truth_column.empty()) truth_col = column(schema.truth_column);

  std::vector<std::size_t> feature_cols;
  std::vector<std::string> feature_names;
  if (!schema.feature_columns.empty()) {
    for (const auto& f : schema.feature_columns) {
      feature_cols.push_back(column(f));
      feature_names.push_back(f);
    }
  } else {
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (j == label_col || (truth_col && j == *truth_col)) continue;
      if (std::find(schema.drop_columns.begin(), schema.drop_columns.end(), header[j]) !=
          schema.drop_columns.end()) {
        continue;
      }
      feature_cols.push_back(j);
      feature_names.push_back(header[j]);
    }
  }
  for (const auto& d : schema.drop_columns) column(d);

  detail::LabelCoder coder(schema);
  std::vector<std::vector<double>> rows;
  std::vector<CandidateSet> sets;
  std::vector<Label> truth;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      throw DataError(source + ": line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()));
    }
    std::vector<double> row;
    row.reserve(feature_cols.size());
    for (std::size_t k = 0; k < feature_cols.size(); ++k) {
      const auto cell = detail::trim(cells[feature_cols[k]]);
      auto v = detail::parse_double(cell);
      if (!v || !std::isfinite(*v)) {
        throw DataError(source + ": line " + std::to_string(line_no) + ": non-numeric value '" + cell +
                        "' in feature column '" + feature_names[k] + "'");
      }
      row.push_back(*v);
    }
    const auto label_cell = detail::trim(cells[label_col]);
    if (label_cell.empty()) {
      throw DataError(source + ": line " + std::to_string(line_no) + ": empty " +
                      (clean ? "label" : "candidate set") + " cell");
    }
    CandidateSet s;
    try {
      if (clean) {
        const Label l = coder.code(label_cell, line_no);
        s.push_back(l);
        truth.push_back(l);
      } else {
        for (const auto& tok : detail::split_tokens(label_cell, '|')) s.push_back(coder.code(tok, line_no));
        std::sort(s.begin(), s.end());
        s.erase(std::unique(s.begin(), s.end()), s.end());
        if (truth_col) truth.push_back(coder.code(detail::trim(cells[*truth_col]), line_no));
      }
    } catch (const DataError& e) {
      throw DataError(source + ": " + e.what());
    }
    rows.push_back(std::move(row));
    sets.push_back(std::move(s));
  }

  PartialLabelDataset ds;
  ds.labels = coder.finish(ds.num_classes);
  ds.feature_names = std::move(feature_names);
  ds.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(feature_cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  ds.candidate_sets = std::move(sets);
  if (clean || truth_col) ds.true_labels = std::move(truth);
  if (ds.num_classes < 1) throw DataError(source + ": no data rows");
  ds.validate();
  return ds;
}

inline PartialLabelDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return parse_csv(in, schema, path.string());
}

/// Writes features, a pipe-encoded candidate column and (when known) a truth
/// column. Label tokens use the dataset's mapping.
inline void write_csv(std::ostream& out, const PartialLabelDataset& ds,
                      const std::string& candidate_column = "candidates",
                      const std::string& truth_column = "true_label") {
  for (std::size_t j = 0; j < ds.dim(); ++j) {
    out << detail::csv_escape(j < ds.feature_names.size() ? ds.feature_names[j] : "x" + std::to_string(j))
        << ',';
  }
  out << candidate_column;
  if (ds.has_truth()) out << ',' << truth_column;
  out << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < ds.dim(); ++j) {
      out << detail::format_double(ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)))
          << ',';
    }
    std::string cell;
    for (std::size_t k = 0; k < ds.candidate_sets[i].size(); ++k) {
      if (k) cell.push_back('|');
      cell += ds.labels.name(ds.candidate_sets[i][k]);
    }
    out << detail::csv_escape(cell);
    if (ds.has_truth()) out << ',' << detail::csv_escape(ds.labels.name((*ds.true_labels)[i]));
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

/// Key-value record emitted beside generated datasets.
struct DatasetManifest {
  std::string source;
  double p = 0.0;
  int r = 0;
  std::uint64_t seed = 0;
  std::size_t n = 0;
  std::size_t d = 0;
  int c = 0;
  LabelMapping mapping;
  std::vector<std::string> feature_columns;
  std::string data_file = "dataset.csv";
  std::string candidate_column = "candidates";
  std::string truth_column = "true_label";

  void write(std::ostream& out) const {
    auto join = [](const std::vector<std::string>& v) {
      std::string s;
      for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
      return s;
    };
    out << "format=ncpd-dataset-manifest-v1\n";
    out << "source=" << source << '\n';
    out << "data_file=" << data_file << '\n';
    out << "p=" << detail::format_double(p) << '\n';
    out << "r=" << r << '\n';
    out << "seed=" << seed << '\n';
    out << "N=" << n << '\n';
    out << "d=" << d << '\n';
    out << "c=" << c << '\n';
    out << "feature_columns=" << join(feature_columns) << '\n';
    out << "candidate_column=" << candidate_column << '\n';
    out << "truth_column=" << truth_column << '\n';
    std::vector<std::string> pairs;
    for (int i = 0; i < mapping.size(); ++i) pairs.push_back(std::to_string(i) + ":" + mapping.name(i));
    out << "label_mapping=" << join(pairs) << '\n';
  }

  static DatasetManifest read(std::istream& in) {
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw DataError("manifest: malformed line '" + line + "'");
      kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto get = [&](const std::string& k) -> const std::string& {
      auto it = kv.find(k);
      if (it == kv.end()) throw DataError("manifest: missing key '" + k + "'");
      return it->second;
    };
    DatasetManifest m;
    m.source = get("source");
    m.data_file = get("data_file");
    m.p = std::stod(get("p"));
    m.r = std::stoi(get("r"));
    m.seed = std::stoull(get("seed"));
    m.n = std::stoull(get("N"));
    m.d = std::stoull(get("d"));
    m.c = std::stoi(get("c"));
    m.feature_columns = detail::split_tokens(get("feature_columns"), ',');
    m.candidate_column = get("candidate_column");
    m.truth_column = get("truth_column");
    for (const auto& pair : detail::split_tokens(get("label_mapping"), ',')) {
      const auto colon = pair.find(':');
      if (colon == std::string::npos) throw DataError("manifest: malformed label mapping '" + pair + "'");
      if (std::stoi(pair.substr(0, colon)) != m.mapping.size()) {
        throw DataError("manifest: label mapping codes must be dense and ordered");
      }
      m.mapping.names.push_back(pair.substr(colon + 1));
    }
    if (m.mapping.size() != m.c) throw DataError("manifest: label mapping size differs from c");
    return m;
  }

  CsvSchema schema() const {
    CsvSchema s;
    s.feature_columns = feature_columns;
    s.candidate_column = candidate_column;
    s.truth_column = truth_column;
    s.fixed_mapping = mapping;
    return s;
  }
};

/// Loads a dataset directory written by the generator (manifest.txt + CSV).
inline std::pair<PartialLabelDataset, DatasetManifest> load_dataset_dir(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.txt");
  if (!in) throw DataError("cannot open '" + (dir / "manifest.txt").string() + "'");
  auto manifest = DatasetManifest::read(in);
  auto ds = load_csv(dir / manifest.data_file, manifest.schema());
  if (ds.size() != manifest.n || ds.dim() != manifest.d) {
    throw DataError("dataset in '" + dir.string() + "' does not match its manifest");
  }
  return {std::move(ds), std::move(manifest)};
}

// ---------------------------------------------------------------------------
// Controlled corruption
// ---------------------------------------------------------------------------

/// Number of instances the (p, r) protocol corrupts: round-half-up of p*N.
inline std::size_t corrupted_count(double p, std::size_t n) {
  return static_cast<std::size_t>(std::floor(p * static_cast<double>(n) + 0.5));
}

/// Gives round(p*N) uniformly chosen instances the candidate set
/// {y_i} plus r distinct false labels drawn uniformly from Y \ {y_i}.
inline PartialLabelDataset generate_controlled(const PartialLabelDataset& clean, double p, int r,
                                               std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw DataError("p must lie in [0, 1]");
  if (r < 1) throw DataError("r must be a positive integer");
  if (!clean.has_truth()) throw DataError("controlled corruption requires ground-truth labels");
  if (r > clean.num_classes - 1) {
    throw DataError("cannot draw r=" + std::to_string(r) + " distinct false labels with c=" +
                    std::to_string(clean.num_classes));
  }
  for (std::size_t i = 0; i < clean.size(); ++i) {
    if (clean.candidate_sets[i].size() != 1) throw DataError("controlled corruption requires singleton sets");
  }
  PartialLabelDataset out = clean;
  const std::size_t count = corrupted_count(p, clean.size());
  if (count == 0) return out;

  Rng rng(derive_seed(seed, {seed_tag::kCorrupt}));
  std::vector<std::size_t> order(clean.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(std::span<std::size_t>(order));

  const auto& truth = *clean.true_labels;
  std::vector<Label> pool;
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t i = order[k];
    pool.clear();
    for (Label l = 0; l < clean.num_classes; ++l) {
      if (l != truth[i]) pool.push_back(l);
    }
    CandidateSet s{truth[i]};
    for (int m = 0; m < r; ++m) {
      const std::size_t pick = static_cast<std::size_t>(m) + rng.index(pool.size() - static_cast<std::size_t>(m));
      std::swap(pool[static_cast<std::size_t>(m)], pool[pick]);
      s.push_back(pool[static_cast<std::size_t>(m)]);
    }
    std::sort(s.begin(), s.end());
    out.candidate_sets[i] = std::move(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

struct FeatureStats {
  RowVector mean;
  RowVector stddev;  // population standard deviation
};

inline constexpr double kDegenerateStd = 1e-12;

inline FeatureStats compute_stats(const Matrix& x) {
  FeatureStats s;
  const auto n = static_cast<double>(x.rows());
  s.mean = x.colwise().sum() / n;
  s.stddev.resize(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    s.stddev(j) = std::sqrt((x.col(j).array() - s.mean(j)).square().sum() / n);
  }
  return s;
}

/// z-scores every column; columns whose std is below 1e-12 become 0. Pass the
/// training-fold stats when transforming a test fold.
inline std::pair<PartialLabelDataset, FeatureStats> standardize_features(
    const PartialLabelDataset& ds, const std::optional<FeatureStats>& stats = std::nullopt) {
  if (stats && (static_cast<std::size_t>(stats->mean.size()) != ds.dim() ||
                static_cast<std::size_t>(stats->stddev.size()) != ds.dim())) {
    throw DataError("standardization stats have dimension " + std::to_string(stats->mean.size()) +
                    ", dataset has " + std::to_string(ds.dim()));
  }
  if (!stats && ds.size() == 0) throw DataError("cannot compute statistics of an empty dataset");
  FeatureStats used = stats ? *stats : compute_stats(ds.features);
  PartialLabelDataset out = ds;
  for (Eigen::Index j = 0; j < out.features.cols(); ++j) {
    if (used.stddev(j) < kDegenerateStd) {
      out.features.col(j).setZero();
    } else {
      out.features.col(j) = (out.features.col(j).array() - used.mean(j)) / used.stddev(j);
    }
  }
  return {std::move(out), std::move(used)};
}

// ---------------------------------------------------------------------------
// Folds
// ---------------------------------------------------------------------------

struct FoldSplit {
  int fold_count = 10;
  std::vector<int> assignments;

  std::vector<std::size_t> test_indices(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i) {
      if (assignments[i] == fold) out.push_back(i);
    }
    return out;
  }

  std::vector<std::size_t> train_indices(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i) {
      if (assignments[i] != fold) out.push_back(i);
    }
    return out;
  }

  std::vector<std::size_t> fold_sizes() const {
    std::vector<std::size_t> sizes(static_cast<std::size_t>(fold_count), 0);
    for (int a : assignments) ++sizes[static_cast<std::size_t>(a)];
    return sizes;
  }

  /// FNV-1a over the assignment vector; identifies a split in result files.
  std::uint64_t fingerprint() const {
    detail::Fnv1a h;
    h.u64(static_cast<std::uint64_t>(fold_count));
    for (int a : assignments) h.u64(static_cast<std::uint64_t>(a));
    return h.value();
  }
};

/// Random balanced partition of [0, n) into fold_count folds.
inline FoldSplit make_folds(std::size_t n, int fold_count, std::uint64_t seed) {
  if (fold_count < 2) throw DataError("fold_count must be at least 2");
  if (n < static_cast<std::size_t>(fold_count)) {
    throw DataError("cannot split " + std::to_string(n) + " instances into " + std::to_string(fold_count) +
                    " folds");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(seed, {seed_tag::kFolds}));
  rng.shuffle(std::span<std::size_t>(order));
  FoldSplit split;
  split.fold_count = fold_count;
  split.assignments.assign(n, 0);
  for (std::size_t k = 0; k < n; ++k) {
    split.assignments[order[k]] = static_cast<int>(k % static_cast<std::size_t>(fold_count));
  }
  return split;
}

}  // namespace ncpd
