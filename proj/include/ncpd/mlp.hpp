// Three-weight-layer perceptron (input -> hidden -> hidden -> output) with
// per-sample cross-entropy, confidence-weighted batch loss, analytic
// gradients and Adam.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ncpd/common.hpp"

namespace ncpd {

struct MlpConfig {
  int hidden = 128;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Weights and biases of all three layers. Also used for gradients and Adam
/// moments, which share the parameter shapes.
struct MlpWeights {
  Matrix w1, w2, w3;  // d x h, h x h, h x c
  RowVector b1, b2, b3;

  static MlpWeights zeros(int d, int h, int c) {
    MlpWeights z;
    z.w1 = Matrix::Zero(d, h);
    z.w2 = Matrix::Zero(h, h);
    z.w3 = Matrix::Zero(h, c);
    z.b1 = RowVector::Zero(h);
    z.b2 = RowVector::Zero(h);
    z.b3 = RowVector::Zero(c);
    return z;
  }

  /// Visits (name, contiguous storage) for every tensor in a fixed order.
  template <typename Fn>
  void for_each(Fn&& fn) {
    fn("w1", w1.data(), w1.size());
    fn("b1", b1.data(), b1.size());
    fn("w2", w2.data(), w2.size());
    fn("b2", b2.data(), b2.size());
    fn("w3", w3.data(), w3.size());
    fn("b3", b3.data(), b3.size());
  }
  template <typename Fn>
  void for_each(Fn&& fn) const {
    fn("w1", w1.data(), w1.size());
    fn("b1", b1.data(), b1.size());
    fn("w2", w2.data(), w2.size());
    fn("b2", b2.data(), b2.size());
    fn("w3", w3.data(), w3.size());
    fn("b3", b3.data(), b3.size());
  }

  bool all_finite() const {
    return w1.allFinite() && w2.allFinite() && w3.allFinite() && b1.allFinite() && b2.allFinite() &&
           b3.allFinite();
  }

  bool same_shape(const MlpWeights& o) const {
    return w1.rows() == o.w1.rows() && w1.cols() == o.w1.cols() && w2.rows() == o.w2.rows() &&
           w2.cols() == o.w2.cols() && w3.rows() == o.w3.rows() && w3.cols() == o.w3.cols() &&
           b1.size() == o.b1.size() && b2.size() == o.b2.size() && b3.size() == o.b3.size();
  }

  bool operator==(const MlpWeights& o) const {
    return same_shape(o) && w1 == o.w1 && w2 == o.w2 && w3 == o.w3 && b1 == o.b1 && b2 == o.b2 &&
           b3 == o.b3;
  }
};

using MlpGradients = MlpWeights;

struct MlpParameters {
  MlpWeights weights;
  MlpWeights first_moment;
  MlpWeights second_moment;
  std::uint64_t step = 0;
  MlpConfig hyper;

  int input_dim() const { return static_cast<int>(weights.w1.rows()); }
  int hidden_dim() const { return static_cast<int>(weights.w1.cols()); }
  int num_classes() const { return static_cast<int>(weights.w3.cols()); }

  bool operator==(const MlpParameters& o) const {
    return weights == o.weights && first_moment == o.first_moment && second_moment == o.second_moment &&
           step == o.step && hyper.hidden == o.hyper.hidden && hyper.learning_rate == o.hyper.learning_rate &&
           hyper.beta1 == o.hyper.beta1 && hyper.beta2 == o.hyper.beta2 && hyper.epsilon == o.hyper.epsilon;
  }
};

/// Glorot-uniform weights, zero biases, zero Adam state.
inline MlpParameters init_mlp(int d, int c, std::uint64_t seed, const MlpConfig& cfg = {}) {
  const int h = cfg.hidden;
  if (d < 1 || h < 1 || c < 1) throw DataError("MLP dimensions must be positive");
  MlpParameters p;
  p.hyper = cfg;
  p.weights = MlpWeights::zeros(d, h, c);
  p.first_moment = MlpWeights::zeros(d, h, c);
  p.second_moment = MlpWeights::zeros(d, h, c);
  Rng rng(seed);
  auto fill = [&](Matrix& w) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = (2.0 * rng.uniform() - 1.0) * limit;
  };
  fill(p.weights.w1);
  fill(p.weights.w2);
  fill(p.weights.w3);
  return p;
}

inline constexpr double kProbabilityFloor = 1e-12;

/// Result of a forward pass over one batch, with the activations backward()
/// needs.
struct BatchForward {
  Matrix input;          // B x d
  Matrix hidden1;        // B x h, post-ReLU
  Matrix hidden2;        // B x h, post-ReLU
  Matrix logits;         // B x c
  Matrix probabilities;  // B x c, softmax rows
  Vector losses;         // B, -log p(label)
  std::vector<Label> labels;

  std::size_t batch_size() const { return labels.size(); }

  /// Argmax of row k, ties toward the lower class index.
  Label prediction(std::size_t k) const {
    Eigen::Index best = 0;
    probabilities.row(static_cast<Eigen::Index>(k)).maxCoeff(&best);
    return static_cast<Label>(best);
  }
};

namespace detail {

inline Matrix relu(const Matrix& z) { return z.cwiseMax(0.0); }

/// Softmax with max subtraction; writes log-sum-exp per row into `lse`.
inline Matrix stable_softmax(const Matrix& logits, Vector& lse) {
  Matrix p(logits.rows(), logits.cols());
  lse.resize(logits.rows());
  for (Eigen::Index k = 0; k < logits.rows(); ++k) {
    const double m = logits.row(k).maxCoeff();
    p.row(k) = (logits.row(k).array() - m).exp();
    const double s = p.row(k).sum();
    p.row(k) /= s;
    lse(k) = m + std::log(s);
  }
  return p;
}

inline void check_features(const Matrix& x, int d) {
  if (x.cols() != d) {
    throw DataError("feature dimension " + std::to_string(x.cols()) + " does not match model input " +
                    std::to_string(d));
  }
  if (!x.allFinite()) throw DataError("non-finite input features");
}

}  // namespace detail

/// Class probabilities for each row of `x`.
inline Matrix predict_proba(const MlpParameters& params, const Matrix& x) {
  detail::check_features(x, params.input_dim());
  const auto& w = params.weights;
  const Matrix a1 = detail::relu((x * w.w1).rowwise() + w.b1);
  const Matrix a2 = detail::relu((a1 * w.w2).rowwise() + w.b2);
  const Matrix z = (a2 * w.w3).rowwise() + w.b3;
  Vector lse;
  return detail::stable_softmax(z, lse);
}

inline BatchForward forward(const MlpParameters& params, const Matrix& x, std::span<const Label> labels) {
  detail::check_features(x, params.input_dim());
  if (static_cast<std::size_t>(x.rows()) != labels.size()) throw DataError("batch features/labels length mismatch");
  const int c = params.num_classes();
  for (Label l : labels) {
    if (l < 0 || l >= c) throw DataError("label " + std::to_string(l) + " outside [0, " + std::to_string(c) + ")");
  }
  const auto& w = params.weights;
  BatchForward f;
  f.input = x;
  f.labels.assign(labels.begin(), labels.end());
  f.hidden1 = detail::relu((x * w.w1).rowwise() + w.b1);
  f.hidden2 = detail::relu((f.hidden1 * w.w2).rowwise() + w.b2);
  f.logits = (f.hidden2 * w.w3).rowwise() + w.b3;
  Vector lse;
  f.probabilities = detail::stable_softmax(f.logits, lse);
  f.losses.resize(x.rows());
  const double cap = -std::log(kProbabilityFloor);
  for (Eigen::Index k = 0; k < x.rows(); ++k) {
    const double l = lse(k) - f.logits(k, labels[static_cast<std::size_t>(k)]);
    f.losses(k) = std::min(std::max(l, 0.0), cap);
  }
  return f;
}

/// w^T l: confidence-weighted sum of per-replica losses (no batch averaging).
inline double weighted_loss(const BatchForward& fwd, std::span<const double> w) {
  if (w.size() != fwd.batch_size()) {
    throw DataError("weight vector has " + std::to_string(w.size()) + " entries, batch has " +
                    std::to_string(fwd.batch_size()));
  }
  double total = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) total += w[k] * fwd.losses(static_cast<Eigen::Index>(k));
  return total;
}

/// Analytic gradient of weighted_loss(fwd, w) with respect to every parameter.
inline MlpGradients backward(const MlpParameters& params, const BatchForward& fwd, std::span<const double> w) {
  if (w.size() != fwd.batch_size()) throw DataError("weight vector length does not match batch");
  const auto& p = params.weights;
  Matrix delta = fwd.probabilities;
  for (std::size_t k = 0; k < fwd.batch_size(); ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    delta(row, fwd.labels[k]) -= 1.0;
    delta.row(row) *= w[k];
  }
  MlpGradients g;
  g.w3 = fwd.hidden2.transpose() * delta;
  g.b3 = delta.colwise().sum();
  Matrix d2 = (delta * p.w3.transpose()).cwiseProduct((fwd.hidden2.array() > 0.0).cast<double>().matrix());
  g.w2 = fwd.hidden1.transpose() * d2;
  g.b2 = d2.colwise().sum();
  Matrix d1 = (d2 * p.w2.transpose()).cwiseProduct((fwd.hidden1.array() > 0.0).cast<double>().matrix());
  g.w1 = fwd.input.transpose() * d1;
  g.b1 = d1.colwise().sum();
  return g;
}

/// One bias-corrected Adam update. Non-finite gradients throw TrainingError and
/// leave the parameters untouched.
inline void adam_step(MlpParameters& params, const MlpGradients& grads) {
  if (!params.weights.same_shape(grads)) throw DataError("gradient shapes do not match parameters");
  if (!grads.all_finite()) throw TrainingError("non-finite gradient at Adam step " + std::to_string(params.step + 1));
  const auto& h = params.hyper;
  params.step += 1;
  const double t = static_cast<double>(params.step);
  const double c1 = 1.0 - std::pow(h.beta1, t);
  const double c2 = 1.0 - std::pow(h.beta2, t);
  auto update = [&](auto& theta, auto& m, auto& v, const auto& g) {
    m = h.beta1 * m + (1.0 - h.beta1) * g;
    v = h.beta2 * v + (1.0 - h.beta2) * g.cwiseProduct(g);
    theta.array() -= h.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + h.epsilon);
  };
  auto& w = params.weights;
  auto& m = params.first_moment;
  auto& v = params.second_moment;
  update(w.w1, m.w1, v.w1, grads.w1);
  update(w.b1, m.b1, v.b1, grads.b1);
  update(w.w2, m.w2, v.w2, grads.w2);
  update(w.b2, m.b2, v.b2, grads.b2);
  update(w.w3, m.w3, v.w3, grads.w3);
  update(w.b3, m.b3, v.b3, grads.b3);
}

// ---------------------------------------------------------------------------
// Gradient check
// ---------------------------------------------------------------------------

struct GradientCheckOptions {
  int d = 4;
  int hidden = 6;
  int c = 3;
  int batch = 5;
  double step = 1e-4;
  // Harness self-test: negate the analytic output-layer gradient.
  bool inject_sign_flip = false;
};

/// Relative error with an absolute floor so that near-zero gradient entries are
/// compared on an absolute scale.
inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

/// Builds a random network and batch and returns the worst relative error
/// between backward() and central finite differences of weighted_loss().
/// Samples whose hidden pre-activations sit within 1e-2 of a ReLU kink are
/// redrawn so the finite differences stay on one linear piece.
inline double gradient_check(std::uint64_t seed, const GradientCheckOptions& opt = {}) {
  MlpConfig cfg;
  cfg.hidden = opt.hidden;
  Rng rng(derive_seed(seed, {0x67726164}));
  MlpParameters params;
  Matrix x(opt.batch, opt.d);
  std::vector<Label> labels(static_cast<std::size_t>(opt.batch));
  std::vector<double> w(static_cast<std::size_t>(opt.batch));
  for (int attempt = 0;; ++attempt) {
    params = init_mlp(opt.d, opt.c, rng.next(), cfg);
    for (Eigen::Index k = 0; k < params.weights.b1.size(); ++k) params.weights.b1(k) = 0.2 * rng.normal();
    for (Eigen::Index k = 0; k < params.weights.b2.size(); ++k) params.weights.b2(k) = 0.2 * rng.normal();
    for (Eigen::Index k = 0; k < params.weights.b3.size(); ++k) params.weights.b3(k) = 0.2 * rng.normal();
    for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = rng.normal();
    for (auto& l : labels) l = static_cast<Label>(rng.index(static_cast<std::size_t>(opt.c)));
    for (auto& v : w) v = rng.uniform();
    const auto& p = params.weights;
    const Matrix z1 = (x * p.w1).rowwise() + p.b1;
    const Matrix z2 = (detail::relu(z1) * p.w2).rowwise() + p.b2;
    if (z1.cwiseAbs().minCoeff() > 1e-2 && z2.cwiseAbs().minCoeff() > 1e-2) break;
    if (attempt > 1000) throw std::logic_error("gradient_check: could not draw a kink-free sample");
  }

  auto fwd = forward(params, x, labels);
  auto grads = backward(params, fwd, w);
  if (opt.inject_sign_flip) grads.w3 = -grads.w3;

  double worst = 0.0;
  MlpParameters probe = params;
  std::vector<double*> probe_slots;
  std::vector<const double*> grad_slots;
  std::vector<Eigen::Index> sizes;
  probe.weights.for_each([&](const char*, double* data, Eigen::Index n) {
    probe_slots.push_back(data);
    sizes.push_back(n);
  });
  grads.for_each([&](const char*, const double* data, Eigen::Index) { grad_slots.push_back(data); });
  for (std::size_t t = 0; t < probe_slots.size(); ++t) {
    for (Eigen::Index k = 0; k < sizes[t]; ++k) {
      double& slot = probe_slots[t][k];
      const double saved = slot;
      slot = saved + opt.step;
      const double up = weighted_loss(forward(probe, x, labels), w);
      slot = saved - opt.step;
      const double down = weighted_loss(forward(probe, x, labels), w);
      slot = saved;
      const double numeric = (up - down) / (2.0 * opt.step);
      worst = std::max(worst, relative_error(grad_slots[t][k], numeric));
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

inline constexpr const char* kCheckpointTag = "ncpd-mlp-checkpoint";
inline constexpr int kCheckpointVersion = 1;

/// Text checkpoint; reals are written as hexfloats so the round trip is exact.
inline void save_checkpoint(std::ostream& out, const MlpParameters& p) {
  auto hex = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return std::string(buf);
  };
  out << kCheckpointTag << ' ' << kCheckpointVersion << '\n';
  out << "dims " << p.input_dim() << ' ' << p.hidden_dim() << ' ' << p.num_classes() << '\n';
  out << "hyper " << hex(p.hyper.learning_rate) << ' ' << hex(p.hyper.beta1) << ' ' << hex(p.hyper.beta2) << ' '
      << hex(p.hyper.epsilon) << '\n';
  out << "step " << p.step << '\n';
  auto dump = [&](const char* group, const MlpWeights& w) {
    w.for_each([&](const char* name, const double* data, Eigen::Index n) {
      out << group << '.' << name << ' ' << n;
      for (Eigen::Index k = 0; k < n; ++k) out << ' ' << hex(data[k]);
      out << '\n';
    });
  };
  dump("param", p.weights);
  dump("adam_m", p.first_moment);
  dump("adam_v", p.second_moment);
}

inline MlpParameters load_checkpoint(std::istream& in) {
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != kCheckpointTag) throw DataError("not an ncpd MLP checkpoint");
  if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  auto expect = [&](const std::string& key) {
    std::string k;
    if (!(in >> k) || k != key) throw DataError("checkpoint: expected '" + key + "'");
  };
  auto real = [&]() {
    std::string s;
    if (!(in >> s)) throw DataError("checkpoint: truncated");
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) throw DataError("checkpoint: bad number '" + s + "'");
    return v;
  };
  int d = 0, h = 0, c = 0;
  expect("dims");
  in >> d >> h >> c;
  if (!in || d < 1 || h < 1 || c < 1) throw DataError("checkpoint: bad dimensions");
  MlpParameters p;
  expect("hyper");
  p.hyper.hidden = h;
  p.hyper.learning_rate = real();
  p.hyper.beta1 = real();
  p.hyper.beta2 = real();
  p.hyper.epsilon = real();
  expect("step");
  in >> p.step;
  p.weights = MlpWeights::zeros(d, h, c);
  p.first_moment = MlpWeights::zeros(d, h, c);
  p.second_moment = MlpWeights::zeros(d, h, c);
  auto load = [&](const std::string& group, MlpWeights& w) {
    w.for_each([&](const char* name, double* data, Eigen::Index n) {
      expect(group + "." + name);
      Eigen::Index count = 0;
      in >> count;
      if (count != n) throw DataError("checkpoint: " + group + "." + name + " has wrong size");
      for (Eigen::Index k = 0; k < n; ++k) data[k] = real();
    });
  };
  load("param", p.weights);
  load("adam_m", p.first_moment);
  load("adam_v", p.second_moment);
  return p;
}

}  // namespace ncpd
