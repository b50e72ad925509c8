// Corrupts a clean CSV with candidate labels, trains the cooperative model on
// a train split and compares it with PLKNN on the held-out rest.
//
//   quickstart data/glass.csv type 0.3 1 Id

#include <cstdlib>
#include <iostream>
#include <numeric>

#include "ncpd/ncpd.hpp"

int main(int argc, char** argv) {
  if (argc < 3) {
    std::cerr << "usage: " << argv[0] << " <clean.csv> <label-column> [p=0.3] [r=1] [ignored-column...]\n";
    return 2;
  }
  const double p = argc > 3 ? std::atof(argv[3]) : 0.3;
  const int r = argc > 4 ? std::atoi(argv[4]) : 1;

  ncpd::CsvSchema schema;
  schema.label_column = argv[2];
  for (int a = 5; a < argc; ++a) schema.drop_columns.push_back(argv[a]);
  try {
    const auto clean = ncpd::load_csv(argv[1], schema);
    const auto noisy = ncpd::generate_controlled(clean, p, r, 42);

    // 80/20 split
    std::vector<std::size_t> order(noisy.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    ncpd::Rng rng(7);
    rng.shuffle(std::span<std::size_t>(order));
    const auto cut = order.size() / 5;
    const auto test_raw = noisy.subset({order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cut)});
    const auto train_raw = noisy.subset({order.begin() + static_cast<std::ptrdiff_t>(cut), order.end()});
    auto [train, stats] = ncpd::standardize_features(train_raw);
    const auto test = ncpd::standardize_features(test_raw, stats).first;

    ncpd::TrainConfig cfg;
    cfg.seed = 1;
    cfg.total_epochs = 100;
    cfg.t_r = 50;
    const auto dd = ncpd::duplicate(train);
    const ncpd::LabeledSet holdout{test.features, *test.true_labels};
    const auto model = ncpd::train(dd, cfg, &holdout);

    const auto& last = model.curve.back();
    std::cout << clean.size() << " instances, " << clean.num_classes << " classes, p=" << p << " r=" << r << "\n";
    std::cout << "ncpd   test accuracy " << ncpd::accuracy(ncpd::predict(model, test.features), *test.true_labels)
              << ", training-set disambiguation " << last.disambiguation_accuracy << "\n";

    const auto knn = ncpd::plknn_fit(train, ncpd::plknn_select_k(train, 1));
    std::cout << "plknn  test accuracy " << ncpd::accuracy(ncpd::plknn_predict_all(knn, test.features), *test.true_labels)
              << " (k=" << knn.k << ")\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
