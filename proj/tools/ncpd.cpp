// ncpd command-line tool: generate corrupted datasets, train and evaluate
// methods, run comparison sweeps.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "ncpd/ncpd.hpp"

namespace fs = std::filesystem;
using namespace ncpd;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

/// Relative output paths resolve against $NCPD_OUT when it is set.
fs::path resolve_out(const std::string& out) {
  fs::path p(out);
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv("NCPD_OUT"); root && *root) return fs::path(root) / p;
  return p;
}

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << content;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

// Clean-input schema flags shared by generate and compare.
struct InputOptions {
  std::string input;
  std::string label_column = "label";
  std::vector<std::string> drop;
  std::vector<std::string> features;
  bool integer_labels = false;

  void add(CLI::App* app) {
    app->add_option("--input", input, "clean CSV with a header row")->required()->check(CLI::ExistingFile);
    app->add_option("--label-column", label_column, "column holding the class label")->capture_default_str();
    app->add_option("--drop", drop, "columns to ignore (repeatable)");
    app->add_option("--features", features, "feature columns (default: every other column)");
    app->add_flag("--integer-labels", integer_labels, "labels are integer codes 0..c-1");
  }

  CsvSchema schema() const {
    CsvSchema s;
    s.label_column = label_column;
    s.drop_columns = drop;
    s.feature_columns = features;
    s.encoding = integer_labels ? LabelEncoding::integer : LabelEncoding::first_appearance;
    return s;
  }
};

// Training flags shared by train and compare.
struct TrainOptions {
  int epochs = 200;
  std::size_t batch_size = 128;
  int t_r = 100;
  int hidden = 128;
  double learning_rate = 1e-3;
  int patience = 0;
  int plknn_k = 0;
  bool no_standardize = false;
  int folds = 10;
  std::uint64_t seed = 0;
  int jobs = 1;

  void add(CLI::App* app) {
    app->add_option("--epochs", epochs, "training epochs")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--batch-size", batch_size, "replicas per minibatch")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--t-r", t_r, "epoch at which the screening schedule saturates")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app->add_option("--hidden", hidden, "hidden layer width")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--lr", learning_rate, "Adam learning rate")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--patience", patience, "early-stopping patience in epochs (0 disables)")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    app->add_option("--plknn-k", plknn_k, "PLKNN neighbour count (0 selects from 5,10,15,20)")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    app->add_flag("--no-standardize", no_standardize, "use raw features");
    app->add_option("--folds", folds, "cross-validation folds")->capture_default_str()->check(CLI::Range(2, 1000));
    app->add_option("--seed", seed, "base seed")->capture_default_str();
    app->add_option("--jobs", jobs, "folds trained concurrently")->capture_default_str()->check(CLI::PositiveNumber);
  }

  MethodSpec spec(Method m) const {
    MethodSpec s;
    s.method = m;
    s.train.total_epochs = epochs;
    s.train.batch_size = batch_size;
    s.train.t_r = t_r;
    s.train.mlp.hidden = hidden;
    s.train.mlp.learning_rate = learning_rate;
    s.train.patience = patience;
    s.train.standardize = !no_standardize;
    s.plknn_k = plknn_k;
    return s;
  }
};

std::string dataset_name(const std::string& dir) {
  auto p = fs::path(dir).lexically_normal();
  if (p.filename().empty()) p = p.parent_path();
  return p.filename().string();
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Writes a generated dataset and its manifest; returns (manifest, csv) text.
std::pair<std::string, std::string> write_dataset_dir(const fs::path& dir, const PartialLabelDataset& ds,
                                                      const std::string& source, double p, int r, std::uint64_t seed) {
  DatasetManifest m;
  m.source = source;
  m.p = p;
  m.r = r;
  m.seed = seed;
  m.n = ds.size();
  m.d = ds.dim();
  m.c = ds.num_classes;
  m.mapping = ds.labels;
  m.feature_columns = ds.feature_names;
  std::ostringstream csv, man;
  write_csv(csv, ds, m.candidate_column, m.truth_column);
  m.write(man);
  write_file(dir / m.data_file, csv.str());
  write_file(dir / "manifest.txt", man.str());
  return {man.str(), csv.str()};
}

std::vector<std::string> method_names() {
  std::vector<std::string> v;
  for (auto m : kAllMethods) v.emplace_back(method_name(m));
  return v;
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

struct GenerateCmd {
  InputOptions in;
  double p = 0.0;
  int r = 1;
  std::uint64_t seed = 0;
  std::string out;

  void add(CLI::App* app) {
    in.add(app);
    app->add_option("--p", p, "proportion of corrupted instances")->required()->check(CLI::Range(0.0, 1.0));
    app->add_option("--r", r, "false-positive labels per corrupted instance")->required()->check(CLI::PositiveNumber);
    app->add_option("--seed", seed, "corruption seed")->capture_default_str();
    app->add_option("--out", out, "output directory")->required();
  }

  int run() const {
    const auto clean = load_csv(in.input, in.schema());
    const auto ds = generate_controlled(clean, p, r, seed);
    const fs::path dir = resolve_out(out);
    write_dataset_dir(dir, ds, in.input, p, r, seed);
    std::cout << "wrote " << ds.size() << " instances (" << corrupted_count(p, ds.size()) << " corrupted, c=" << ds.num_classes
              << ", d=" << ds.dim() << ") to " << dir.string() << '\n';
    return 0;
  }
};

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainCmd {
  std::string dataset;
  std::string method;
  std::string out;
  double holdout = 0.0;
  bool dump_confidences = false;
  TrainOptions opt;

  void add(CLI::App* app) {
    app->add_option("--dataset", dataset, "dataset directory written by generate")
        ->required()
        ->check(CLI::ExistingDirectory);
    app->add_option("--method", method, "method to run")->required()->check(CLI::IsMember(method_names()));
    app->add_option("--out", out, "output directory")->required();
    app->add_option("--holdout", holdout, "evaluate one train/test split with this test fraction instead of CV")
        ->check(CLI::Range(0.0, 1.0));
    app->add_flag("--dump-confidences", dump_confidences, "write per-batch confidences of the first network");
    opt.add(app);
  }

  int run() const {
    const fs::path dir = resolve_out(out);
    const auto [ds, manifest] = load_dataset_dir(dataset);
    const Method m = *parse_method(method);
    const auto spec = opt.spec(m);
    const std::string name = dataset_name(dataset);
    const std::string tag(method_name(m));

    auto on_fold = [&](const FoldArtifacts& art) {
      if (!art.model) return;
      const auto stem = tag + "_fold" + std::to_string(art.fold);
      std::ostringstream curve;
      write_curve_csv(curve, art.model->curve);
      write_file(dir / "curves" / (stem + ".csv"), curve.str());
      std::ostringstream a;
      save_checkpoint(a, art.model->alpha);
      write_file(dir / "checkpoints" / (stem + "_alpha.ckpt"), a.str());
      if (art.model->beta) {
        std::ostringstream b;
        save_checkpoint(b, *art.model->beta);
        write_file(dir / "checkpoints" / (stem + "_beta.ckpt"), b.str());
      }
    };
    ObserverFactory observers;
    if (dump_confidences && m != Method::plknn) {
      fs::create_directories(dir / "confidences");
      observers = [&](int fold) -> TrainObserver {
        auto file = std::make_shared<std::ofstream>(dir / "confidences" / (tag + "_fold" + std::to_string(fold) + ".csv"),
                                                    std::ios::binary);
        write_confidence_header(*file);
        return [file](const BatchEvent& ev) {
          // Rows refer to replicas of the fold's training split.
          write_confidence_rows(*file, ev.epoch, ev.batch, ev.data, ev.fwd_alpha, ev.conf_alpha);
        };
      };
    }

    ExperimentResult r = holdout > 0.0 ? run_holdout(ds, spec, holdout, opt.seed, name, on_fold, observers)
                                       : run_cv(ds, spec, opt.folds, opt.seed, name, opt.jobs, on_fold, observers);
    r.config["dataset_manifest"] = manifest_digest(dataset);

    std::ostringstream jsonl;
    append_jsonl(jsonl, r);
    write_file(dir / "results.jsonl", jsonl.str());
    std::cout << tag << " on " << name << ": " << fixed3(r.mean) << " +- " << fixed3(r.stddev) << " over "
              << r.fold_accuracies.size() << (r.fold_count == 1 ? " holdout split" : " folds") << '\n';
    return 0;
  }

  static std::string manifest_digest(const std::string& dataset_dir) {
    detail::Fnv1a h;
    h.text(read_file(fs::path(dataset_dir) / "manifest.txt"));
    return hex64(h.value());
  }
};

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

struct CompareCmd {
  std::vector<std::string> results;
  InputOptions in;
  std::string name;
  std::vector<double> p_grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  std::vector<int> r_grid{1};
  std::vector<std::string> methods{"ncpd", "plknn", "uniform-avg"};
  std::string reference = "ncpd";
  double alpha = 0.05;
  std::string out;
  TrainOptions opt;
  CLI::Option* input_opt = nullptr;

  void add(CLI::App* app) {
    auto* res = app->add_option("--results", results, "results.jsonl files to tabulate (no training)")
                    ->check(CLI::ExistingFile);
    in.add(app);
    input_opt = app->get_option("--input");
    input_opt->required(false);
    res->excludes(input_opt);
    app->add_option("--name", name, "dataset name used in table rows (default: input file stem)");
    app->add_option("--p-grid", p_grid, "corruption proportions")
        ->delimiter(',')
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    app->add_option("--r-grid", r_grid, "false-positive label counts")
        ->delimiter(',')
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app->add_option("--methods", methods, "methods to compare")
        ->delimiter(',')
        ->capture_default_str()
        ->check(CLI::IsMember(method_names()));
    app->add_option("--reference", reference, "method the significance markers refer to")->capture_default_str();
    app->add_option("--alpha", alpha, "significance level (0.10, 0.05 or 0.01)")
        ->capture_default_str()
        ->check(CLI::IsMember({0.10, 0.05, 0.01}));
    app->add_option("--out", out, "output directory")->required();
    opt.add(app);
  }

  int run() const {
    const fs::path dir = resolve_out(out);
    std::vector<ExperimentResult> all;
    if (!results.empty()) {
      for (const auto& f : results) {
        std::ifstream file(f);
        for (auto& r : read_jsonl(file)) all.push_back(std::move(r));
      }
      if (all.empty()) throw DataError("no results found in the given files");
    } else {
      if (in.input.empty()) throw CLI::RequiredError("--input or --results");
      all = sweep(dir);
    }
    const auto table = comparison_table(all, reference, alpha);
    write_file(dir / "comparison.txt", table.text);
    write_file(dir / "comparison.csv", table.csv);
    std::cout << table.text;
    return 0;
  }

  std::vector<ExperimentResult> sweep(const fs::path& dir) const {
    const auto clean = load_csv(in.input, in.schema());
    const std::string base = name.empty() ? fs::path(in.input).stem().string() : name;
    std::vector<ExperimentResult> all;
    std::size_t trained = 0, cached = 0;
    // (r, method) -> rows of (p, result)
    std::map<std::pair<int, std::string>, std::vector<std::pair<double, ExperimentResult>>> curves;

    for (int r : r_grid) {
      for (double p : p_grid) {
        const auto ds = generate_controlled(clean, p, r, opt.seed);
        const std::string cell = "p" + detail::format_double(p) + "_r" + std::to_string(r);
        const auto [manifest_text, data_text] = write_dataset_dir(dir / "datasets" / cell, ds, in.input, p, r, opt.seed);
        const std::string label = base + " p=" + detail::format_double(p) + " r=" + std::to_string(r);

        for (const auto& mname : methods) {
          const Method method = *parse_method(mname);
          const auto spec = opt.spec(method);
          detail::Fnv1a h;
          h.text(manifest_text);
          h.text(data_text);
          h.text(config_snapshot(spec).dump());
          h.u64(static_cast<std::uint64_t>(opt.folds));
          h.u64(opt.seed);
          const fs::path cache = dir / "cache" / (hex64(h.value()) + ".json");
          ExperimentResult res;
          if (fs::exists(cache)) {
            res = ExperimentResult::from_json(json::parse(read_file(cache)));
            ++cached;
          } else {
            std::cout << "running " << mname << " on " << label << '\n' << std::flush;
            res = run_cv(ds, spec, opt.folds, opt.seed, label, opt.jobs);
            write_file(cache, res.to_json().dump() + "\n");
            ++trained;
          }
          res.dataset = label;
          curves[{r, mname}].push_back({p, res});
          all.push_back(res);
        }
      }
    }

    for (const auto& [key, rows] : curves) {
      std::ostringstream csv;
      csv << "p,mean,std,fold_count\n";
      for (const auto& [p, res] : rows) {
        csv << detail::format_double(p) << ',' << detail::format_double(res.mean) << ','
            << detail::format_double(res.stddev) << ',' << res.fold_count << '\n';
      }
      write_file(dir / "curves" / ("accuracy_vs_p_r" + std::to_string(key.first) + "_" + key.second + ".csv"), csv.str());
    }
    std::ostringstream jsonl;
    for (const auto& r : all) append_jsonl(jsonl, r);
    write_file(dir / "results.jsonl", jsonl.str());
    std::cout << "cells: " << trained << " trained, " << cached << " cached\n";
    return all;
  }
};

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

struct GradcheckCmd {
  int seeds = 100;
  double tolerance = 1e-5;

  void add(CLI::App* app) {
    app->add_option("--seeds", seeds, "number of random seeds")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--tolerance", tolerance, "maximum accepted relative error")->capture_default_str();
  }

  int run() const {
    double worst = 0.0;
    for (int s = 0; s < seeds; ++s) worst = std::max(worst, gradient_check(static_cast<std::uint64_t>(s)));
    std::cout << "max relative error over " << seeds << " seeds: " << worst << '\n';
    return worst < tolerance ? 0 : kExitRuntime;
  }
};

/// Reads the --config file as flat key=value lines and applies every key to
/// the subcommand being run, so files need no [section] headers.
class SubcommandConfig : public CLI::ConfigINI {
 public:
  explicit SubcommandConfig(const CLI::App* app) : app_(app) {}

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    auto items = CLI::ConfigINI::from_config(input);
    const auto selected = app_->get_subcommands();
    if (selected.empty()) return items;
    for (auto& item : items) {
      if (item.parents.empty()) item.parents.push_back(selected.front()->get_name());
    }
    return items;
  }

 private:
  const CLI::App* app_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Partial-label learning with cooperating networks and progressive disambiguation"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "show help for every subcommand");

  GenerateCmd generate;
  TrainCmd train_cmd;
  CompareCmd compare;
  GradcheckCmd gradcheck;
  auto* g = app.add_subcommand("generate", "corrupt a clean dataset with the (p, r) protocol");
  generate.add(g);
  auto* t = app.add_subcommand("train", "cross-validate one method on a generated dataset");
  train_cmd.add(t);
  auto* c = app.add_subcommand("compare", "tabulate results or run a p/r/method sweep");
  compare.add(c);
  auto* k = app.add_subcommand("gradcheck", "check backpropagation against finite differences");
  gradcheck.add(k);
  app.config_formatter(std::make_shared<SubcommandConfig>(&app));
  app.set_config("--config", "", "key=value file of long option names; command-line flags take precedence");
  app.allow_config_extras(CLI::config_extras_mode::error);
  for (auto* sub : {g, t, c, k}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*g) return generate.run();
    if (*t) return train_cmd.run();
    if (*c) return compare.run();
    if (*k) return gradcheck.run();
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
