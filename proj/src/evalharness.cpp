// SPDX-License-Identifier: Apache-2.0
#include "author2vec/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace a2v {

namespace {

std::vector<int> encode_labels(std::span<const std::string> labels, const std::vector<std::string>& classes) {
  std::vector<int> out;
  out.reserve(labels.size());
  for (const auto& l : labels) {
    const auto it = std::lower_bound(classes.begin(), classes.end(), l);
    out.push_back(static_cast<int>(it - classes.begin()));
  }
  return out;
}

std::vector<std::string> sorted_classes(std::span<const std::string> labels) {
  std::set<std::string> s(labels.begin(), labels.end());
  return {s.begin(), s.end()};
}

std::string fixed(double v, int digits = 3) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

double softplus(double s) { return std::max(s, 0.0) + std::log1p(std::exp(-std::abs(s))); }
double sigmoid(double s) { return s >= 0 ? 1.0 / (1.0 + std::exp(-s)) : std::exp(s) / (1.0 + std::exp(s)); }

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& x, const std::vector<std::size_t>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

std::string scheme_name(FoldScheme s) { return s == FoldScheme::kfold ? "kfold" : "kfold_reverse"; }

nlohmann::json plan_json(const FoldPlan& plan) {
  return {{"scheme", scheme_name(plan.scheme)}, {"k", plan.k}, {"seed", plan.seed}, {"stratify", plan.stratify}};
}

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json confusion_json(const ConfusionMatrix& cm) {
  return {{"classes", cm.classes}, {"counts", matrix_json(cm.counts)}, {"normalized", matrix_json(cm.normalized())}};
}

}  // namespace

// ------------------------------------------------------------------ metrics

double weighted_f1(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.size() != y_pred.size()) {
    throw DataError("weighted_f1: y_true has " + std::to_string(y_true.size()) + " entries, y_pred " +
                    std::to_string(y_pred.size()));
  }
  if (y_true.empty()) throw DataError("weighted_f1: no samples");
  std::map<int, std::array<std::size_t, 3>> stats;  // tp, fp, fn
  for (int c : y_true) stats[c];
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] == y_pred[i]) {
      ++stats[y_true[i]][0];
    } else {
      ++stats[y_true[i]][2];
      if (auto it = stats.find(y_pred[i]); it != stats.end()) ++it->second[1];
    }
  }
  double total = 0.0;
  for (const auto& [c, s] : stats) {
    const auto [tp, fp, fn] = s;
    const double support = static_cast<double>(tp + fn);
    const double denom = static_cast<double>(2 * tp + fp + fn);
    const double f1 = denom > 0 ? 2.0 * static_cast<double>(tp) / denom : 0.0;
    total += support * f1;
  }
  return total / static_cast<double>(y_true.size());
}

double weighted_f1(std::span<const std::string> y_true, std::span<const std::string> y_pred) {
  std::vector<std::string> all(y_true.begin(), y_true.end());
  all.insert(all.end(), y_pred.begin(), y_pred.end());
  const auto classes = sorted_classes(all);
  const auto t = encode_labels(y_true, classes);
  const auto p = encode_labels(y_pred, classes);
  return weighted_f1(std::span<const int>(t), std::span<const int>(p));
}

double topk_accuracy(const Eigen::MatrixXd& scores, std::span<const int> y_true, std::size_t k) {
  if (static_cast<std::size_t>(scores.rows()) != y_true.size()) throw DataError("topk_accuracy: row count mismatch");
  if (k == 0 || k > static_cast<std::size_t>(scores.cols())) throw DataError("topk_accuracy: k out of range");
  if (y_true.empty()) return 0.0;
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const Eigen::Index t = y_true[static_cast<std::size_t>(i)];
    const double st = scores(i, t);
    std::size_t rank = 0;
    for (Eigen::Index j = 0; j < scores.cols(); ++j) {
      if (scores(i, j) > st || (scores(i, j) == st && j < t)) ++rank;
    }
    if (rank < k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(y_true.size());
}

double accuracy(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.size() != y_pred.size()) throw DataError("accuracy: length mismatch");
  if (y_true.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) hits += y_true[i] == y_pred[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(y_true.size());
}

Eigen::MatrixXd ConfusionMatrix::normalized() const {
  Eigen::MatrixXd n = counts;
  for (Eigen::Index r = 0; r < n.rows(); ++r) {
    const double support = n.row(r).sum();
    if (support > 0) n.row(r) /= support;
  }
  return n;
}

void ConfusionMatrix::write_csv(const std::filesystem::path& path, bool normalize) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write confusion matrix " + path.string());
  const Eigen::MatrixXd m = normalize ? normalized() : counts;
  out << "true\\predicted";
  for (const auto& c : classes) out << ',' << c;
  out << '\n';
  out << std::setprecision(17);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out << classes[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << ',' << m(r, c);
    out << '\n';
  }
}

ConfusionMatrix make_confusion(std::vector<std::string> classes) {
  const auto n = static_cast<Eigen::Index>(classes.size());
  return ConfusionMatrix{std::move(classes), Eigen::MatrixXd::Zero(n, n)};
}

double chance_weighted_f1(std::span<const std::string> labels) {
  std::map<std::string, double> counts;
  for (const auto& l : labels) counts[l] += 1;
  double s = 0.0;
  for (const auto& [_, c] : counts) {
    const double p = c / static_cast<double>(labels.size());
    s += p * p;
  }
  return s;
}

// --------------------------------------------------------------------- folds

FoldSet make_folds(std::span<const std::string> labels, const FoldPlan& plan) {
  if (plan.k < 2) throw ConfigError("fold count k must be >= 2");
  const std::size_t n = labels.size();
  if (n < plan.k) {
    throw DataError("cannot split " + std::to_string(n) + " authors into " + std::to_string(plan.k) + " folds");
  }
  std::mt19937_64 rng(plan.seed);
  std::vector<std::vector<std::size_t>> groups(plan.k);
  std::size_t dealt = 0;
  auto deal = [&](std::vector<std::size_t> idx) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (auto i : idx) groups[dealt++ % plan.k].push_back(i);
  };
  if (plan.stratify) {
    std::map<std::string, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < n; ++i) by_class[labels[i]].push_back(i);
    for (auto& [_, idx] : by_class) deal(std::move(idx));
  } else {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    deal(std::move(idx));
  }

  FoldSet set;
  const auto classes = sorted_classes(labels);
  for (std::size_t f = 0; f < plan.k; ++f) {
    Fold fold;
    for (std::size_t g = 0; g < plan.k; ++g) {
      const bool own = g == f;
      const bool to_test = plan.scheme == FoldScheme::kfold ? own : !own;
      auto& dst = to_test ? fold.test : fold.train;
      dst.insert(dst.end(), groups[g].begin(), groups[g].end());
    }
    std::sort(fold.train.begin(), fold.train.end());
    std::sort(fold.test.begin(), fold.test.end());
    std::set<std::string> seen;
    for (auto i : fold.train) seen.insert(labels[i]);
    for (const auto& c : classes) {
      if (!seen.count(c)) set.warnings.push_back("fold " + std::to_string(f) + ": class '" + c + "' absent from training data");
    }
    set.folds.push_back(std::move(fold));
  }
  return set;
}

// -------------------------------------------------------------------- probes

void ProbeSpec::validate() const {
  if ((kind == ProbeKind::mlp) == hidden.empty()) {
    throw ConfigError("probe hidden layers must be given for mlp probes and only for them");
  }
  if (l2 < 0) throw ConfigError("probe l2 must be non-negative");
  if (max_iters == 0) throw ConfigError("probe max_iters must be positive");
}

std::string ProbeSpec::name() const { return kind == ProbeKind::logreg ? "LR" : "MLP"; }

nlohmann::json ProbeSpec::to_json() const {
  nlohmann::json j{{"kind", kind == ProbeKind::logreg ? "logreg" : "mlp"},
                   {"l2", l2},
                   {"max_iters", max_iters},
                   {"seed", seed}};
  if (kind == ProbeKind::mlp) {
    j["hidden"] = hidden;
    j["learning_rate"] = learning_rate;
    j["validation_fraction"] = validation_fraction;
    j["patience"] = patience;
  }
  return j;
}

std::vector<int> Probe::predict(const Eigen::MatrixXd& x) const {
  const Eigen::MatrixXd p = predict_proba(x);
  std::vector<int> out(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < p.cols(); ++j) {
      if (p(i, j) > p(i, best)) best = j;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

LogisticRegression LogisticRegression::fit(const Eigen::MatrixXd& x, std::span<const int> y, const ProbeSpec& spec) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw DataError("logistic regression: row/label count mismatch");
  const bool has0 = std::find(y.begin(), y.end(), 0) != y.end();
  const bool has1 = std::find(y.begin(), y.end(), 1) != y.end();
  if (!has0 || !has1) throw DataError("logistic regression needs both classes present");
  for (int v : y) {
    if (v != 0 && v != 1) throw DataError("logistic regression labels must be 0/1");
  }

  const double n = static_cast<double>(x.rows());
  Eigen::VectorXd yv(x.rows());
  for (Eigen::Index i = 0; i < yv.size(); ++i) yv[i] = y[static_cast<std::size_t>(i)];
  const double reg = spec.l2 / n;

  auto objective = [&](const Eigen::VectorXd& w, double b) {
    const Eigen::VectorXd s = (x * w).array() + b;
    double f = 0.0;
    for (Eigen::Index i = 0; i < s.size(); ++i) f += softplus(s[i]) - yv[i] * s[i];
    return f / n + 0.5 * reg * w.squaredNorm();
  };

  LogisticRegression model;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(x.cols());
  double b = 0.0;
  double f = objective(w, b);
  double step = 1.0;
  std::size_t it = 0;
  double gnorm = 0.0;
  for (; it < spec.max_iters; ++it) {
    const Eigen::VectorXd s = (x * w).array() + b;
    Eigen::VectorXd resid(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) resid[i] = sigmoid(s[i]) - yv[i];
    const Eigen::VectorXd gw = x.transpose() * resid / n + reg * w;
    const double gb = resid.sum() / n;
    const double g2 = gw.squaredNorm() + gb * gb;
    gnorm = std::sqrt(g2);
    if (gnorm < 1e-6) break;
    // Armijo backtracking.
    for (;;) {
      const Eigen::VectorXd w_new = w - step * gw;
      const double b_new = b - step * gb;
      const double f_new = objective(w_new, b_new);
      if (f_new <= f - 0.5 * step * g2 || step < 1e-16) {
        w = w_new;
        b = b_new;
        f = f_new;
        break;
      }
      step *= 0.5;
    }
    step *= 2.0;
  }
  model.weights_ = std::move(w);
  model.bias_ = b;
  model.info_ = FitInfo{it, gnorm, f};
  return model;
}

Eigen::VectorXd LogisticRegression::decision_function(const Eigen::MatrixXd& x) const {
  return (x * weights_).array() + bias_;
}

Eigen::MatrixXd LogisticRegression::predict_proba(const Eigen::MatrixXd& x) const {
  const Eigen::VectorXd s = decision_function(x);
  Eigen::MatrixXd p(x.rows(), 2);
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    p(i, 1) = sigmoid(s[i]);
    p(i, 0) = 1.0 - p(i, 1);
  }
  return p;
}

OneVsRestLogistic OneVsRestLogistic::fit(const Eigen::MatrixXd& x, std::span<const int> y, std::size_t classes,
                                         const ProbeSpec& spec) {
  OneVsRestLogistic out;
  for (std::size_t c = 0; c < classes; ++c) {
    std::vector<int> binary(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) binary[i] = y[i] == static_cast<int>(c) ? 1 : 0;
    out.models_.push_back(LogisticRegression::fit(x, binary, spec));
  }
  return out;
}

Eigen::MatrixXd OneVsRestLogistic::predict_proba(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd p(x.rows(), static_cast<Eigen::Index>(models_.size()));
  for (std::size_t c = 0; c < models_.size(); ++c) p.col(static_cast<Eigen::Index>(c)) = models_[c].predict_proba(x).col(1);
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double s = p.row(i).sum();
    if (s > 0) p.row(i) /= s;
  }
  return p;
}

MlpProbe MlpProbe::fit(const Eigen::MatrixXd& x, std::span<const int> y, std::size_t classes, const ProbeSpec& spec) {
  spec.validate();
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw DataError("MLP probe: row/label count mismatch");
  if (classes < 2) throw DataError("MLP probe needs at least two classes");
  if (std::set<int>(y.begin(), y.end()).size() < 2) throw DataError("MLP probe needs at least two classes present");

  std::mt19937_64 rng(spec.seed);
  MlpProbe probe;
  std::size_t in = static_cast<std::size_t>(x.cols());
  auto add_layer = [&](std::size_t out, bool relu) {
    Layer l{Eigen::MatrixXd(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in)),
            Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out)), relu};
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (Eigen::Index j = 0; j < l.weights.cols(); ++j) {
      for (Eigen::Index i = 0; i < l.weights.rows(); ++i) l.weights(i, j) = u(rng);
    }
    probe.layers_.push_back(std::move(l));
    in = out;
  };
  for (auto h : spec.hidden) add_layer(h, true);
  add_layer(classes, false);

  // Validation slice for early stopping.
  std::vector<std::size_t> order(y.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::floor(spec.validation_fraction * static_cast<double>(y.size())));
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  std::set<int> train_classes;
  for (auto i : train) train_classes.insert(y[i]);
  if (train_classes.size() < 2) {
    train = order;
    std::sort(train.begin(), train.end());
    val.clear();
  }

  const Eigen::MatrixXd xt = rows_of(x, train).transpose();  // features x n
  const Eigen::MatrixXd xv = rows_of(x, val).transpose();
  auto one_hot = [&](const std::vector<std::size_t>& idx) {
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(classes), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) t(y[idx[i]], static_cast<Eigen::Index>(i)) = 1.0;
    return t;
  };
  const Eigen::MatrixXd yt = one_hot(train);
  const Eigen::MatrixXd yvl = one_hot(val);

  auto forward = [&](const Eigen::MatrixXd& input, std::vector<Eigen::MatrixXd>* acts) {
    Eigen::MatrixXd a = input;
    if (acts) acts->push_back(a);
    for (const auto& l : probe.layers_) {
      a = (l.weights * a).colwise() + l.bias;
      if (l.relu) a = a.cwiseMax(0.0);
      if (acts) acts->push_back(a);
    }
    return a;
  };
  auto softmax_cols = [](Eigen::MatrixXd z) {
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      z.col(c) = (z.col(c).array() - z.col(c).maxCoeff()).exp();
      z.col(c) /= z.col(c).sum();
    }
    return z;
  };
  auto xent = [&](const Eigen::MatrixXd& logits, const Eigen::MatrixXd& targets) {
    const Eigen::MatrixXd p = softmax_cols(logits);
    double loss = 0.0;
    for (Eigen::Index c = 0; c < p.cols(); ++c) {
      for (Eigen::Index k = 0; k < p.rows(); ++k) {
        if (targets(k, c) > 0) loss -= std::log(std::max(p(k, c), 1e-300));
      }
    }
    return loss / static_cast<double>(std::max<Eigen::Index>(p.cols(), 1));
  };

  std::vector<Eigen::MatrixXd> mw, vw;
  std::vector<Eigen::VectorXd> mb, vb;
  for (const auto& l : probe.layers_) {
    mw.push_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
    vw.push_back(mw.back());
    mb.push_back(Eigen::VectorXd::Zero(l.bias.size()));
    vb.push_back(mb.back());
  }
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;

  auto best = probe.layers_;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  const double m = static_cast<double>(train.size());
  std::size_t epoch = 0;
  for (; epoch < spec.max_iters; ++epoch) {
    std::vector<Eigen::MatrixXd> acts;
    const Eigen::MatrixXd logits = forward(xt, &acts);
    Eigen::MatrixXd delta = (softmax_cols(logits) - yt) / m;
    const double t = static_cast<double>(epoch + 1);
    const double c1 = 1.0 - std::pow(b1, t);
    const double c2 = 1.0 - std::pow(b2, t);
    for (std::size_t li = probe.layers_.size(); li-- > 0;) {
      auto& l = probe.layers_[li];
      const Eigen::MatrixXd& a_in = acts[li];
      const Eigen::MatrixXd gw = delta * a_in.transpose() + spec.l2 * l.weights;
      const Eigen::VectorXd gb = delta.rowwise().sum();
      if (li > 0) {
        delta = l.weights.transpose() * delta;
        delta = delta.cwiseProduct((acts[li].array() > 0.0).cast<double>().matrix());
      }
      mw[li] = b1 * mw[li] + (1 - b1) * gw;
      vw[li] = b2 * vw[li] + (1 - b2) * gw.cwiseProduct(gw);
      mb[li] = b1 * mb[li] + (1 - b1) * gb;
      vb[li] = b2 * vb[li] + (1 - b2) * gb.cwiseProduct(gb);
      l.weights.array() -= spec.learning_rate * (mw[li].array() / c1) / ((vw[li].array() / c2).sqrt() + eps);
      l.bias.array() -= spec.learning_rate * (mb[li].array() / c1) / ((vb[li].array() / c2).sqrt() + eps);
    }
    if (!val.empty()) {
      const double v = xent(forward(xv, nullptr), yvl);
      if (v < best_val - 1e-12) {
        best_val = v;
        best = probe.layers_;
        since_best = 0;
      } else if (++since_best >= spec.patience) {
        ++epoch;
        break;
      }
    }
  }
  if (!val.empty()) probe.layers_ = std::move(best);
  probe.epochs_run_ = epoch;
  return probe;
}

Eigen::MatrixXd MlpProbe::predict_proba(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd a = x.transpose();
  for (const auto& l : layers_) {
    a = (l.weights * a).colwise() + l.bias;
    if (l.relu) a = a.cwiseMax(0.0);
  }
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    a.col(c) = (a.col(c).array() - a.col(c).maxCoeff()).exp();
    a.col(c) /= a.col(c).sum();
  }
  return a.transpose();
}

LogisticRegression fit_logreg(const Eigen::MatrixXd& x, std::span<const int> y, const ProbeSpec& spec) {
  return LogisticRegression::fit(x, y, spec);
}

MlpProbe fit_mlp_probe(const Eigen::MatrixXd& x, std::span<const int> y, std::size_t classes, const ProbeSpec& spec) {
  return MlpProbe::fit(x, y, classes, spec);
}

std::unique_ptr<Probe> fit_probe(const Eigen::MatrixXd& x, std::span<const int> y, std::size_t classes,
                                 const ProbeSpec& spec) {
  spec.validate();
  if (spec.kind == ProbeKind::mlp) return std::make_unique<MlpProbe>(MlpProbe::fit(x, y, classes, spec));
  if (classes == 2) return std::make_unique<LogisticRegression>(LogisticRegression::fit(x, y, spec));
  return std::make_unique<OneVsRestLogistic>(OneVsRestLogistic::fit(x, y, classes, spec));
}

// ------------------------------------------------------------------ reports

FoldStats fold_stats(std::span<const double> values) {
  FoldStats s;
  if (values.empty()) return s;
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  s.avg = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - s.avg) * (v - s.avg);
  s.std = std::sqrt(var / static_cast<double>(values.size()));
  return s;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json folds = nlohmann::json::array();
  for (std::size_t i = 0; i < fold_f1.size(); ++i) {
    folds.push_back({{"weighted_f1", fold_f1[i]}, {"accuracy", fold_accuracy[i]}});
  }
  return {{"schema_version", kSchemaVersion},
          {"embedding", embedding_name},
          {"task", task},
          {"authors", authors},
          {"probe", probe.to_json()},
          {"fold_plan", plan_json(plan)},
          {"std_definition", "population (divide by number of folds)"},
          {"folds", folds},
          {"weighted_f1", {{"min", f1.min}, {"max", f1.max}, {"avg", f1.avg}, {"std", f1.std}}},
          {"confusion", confusion_json(confusion)},
          {"warnings", warnings}};
}

std::string EvalReport::text_table() const {
  std::ostringstream os;
  os << task << ": " << probe.name() << ' ' << embedding_name << " (" << scheme_name(plan.scheme)
     << ", k=" << plan.k << ", " << authors << " authors)\n";
  os << "              Min.   Max.   Avg.   Std.\n";
  os << "weighted F1   " << fixed(f1.min) << "  " << fixed(f1.max) << "  " << fixed(f1.avg) << "  " << fixed(f1.std)
     << '\n';
  return os.str();
}

namespace {

struct LabeledMatrix {
  std::vector<std::string> authors;
  Eigen::MatrixXd x;
};

LabeledMatrix gather(const EmbeddingTable& embeddings, const std::vector<std::string>& authors) {
  std::vector<std::string> missing;
  for (const auto& a : authors) {
    if (!embeddings.count(a)) missing.push_back(a);
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size(); ++i) list += (i ? ", " : "") + missing[i];
    throw DataError("missing embeddings for " + std::to_string(missing.size()) + " labeled author(s): " + list);
  }
  if (authors.empty()) throw DataError("no labeled authors to evaluate");
  const auto dim = embeddings.at(authors.front()).size();
  LabeledMatrix m{authors, Eigen::MatrixXd(static_cast<Eigen::Index>(authors.size()), dim)};
  for (std::size_t i = 0; i < authors.size(); ++i) {
    const auto& v = embeddings.at(authors[i]);
    if (v.size() != dim) throw DataError("embedding width differs for author " + authors[i]);
    m.x.row(static_cast<Eigen::Index>(i)) = v.transpose();
  }
  return m;
}

EvalReport evaluate_folds(const LabeledMatrix& data, const std::vector<std::string>& labels, const FoldSet& folds,
                          const FoldPlan& plan, const ProbeSpec& probe, const std::string& name,
                          const std::string& task) {
  probe.validate();
  const auto classes = sorted_classes(labels);
  const auto y = encode_labels(labels, classes);

  EvalReport report;
  report.embedding_name = name;
  report.task = task;
  report.probe = probe;
  report.plan = plan;
  report.authors = labels.size();
  report.confusion = make_confusion(classes);
  report.warnings = folds.warnings;

  for (std::size_t f = 0; f < folds.folds.size(); ++f) {
    const auto& fold = folds.folds[f];
    std::vector<int> ytrain;
    for (auto i : fold.train) ytrain.push_back(y[i]);
    std::vector<int> pred;
    if (std::set<int>(ytrain.begin(), ytrain.end()).size() < 2) {
      report.warnings.push_back("fold " + std::to_string(f) + ": single-class training data, predicting that class");
      pred.assign(fold.test.size(), ytrain.empty() ? 0 : ytrain.front());
    } else {
      const auto model = fit_probe(rows_of(data.x, fold.train), ytrain, classes.size(), probe);
      pred = model->predict(rows_of(data.x, fold.test));
    }
    std::vector<int> ytest;
    for (auto i : fold.test) ytest.push_back(y[i]);
    report.fold_f1.push_back(weighted_f1(ytest, pred));
    report.fold_accuracy.push_back(accuracy(ytest, pred));
    for (std::size_t i = 0; i < fold.test.size(); ++i) {
      report.confusion.add(static_cast<std::size_t>(ytest[i]), static_cast<std::size_t>(pred[i]));
      report.predictions.push_back(Prediction{data.authors[fold.test[i]], f, classes[static_cast<std::size_t>(ytest[i])],
                                              classes[static_cast<std::size_t>(pred[i])]});
    }
  }
  report.f1 = fold_stats(report.fold_f1);
  return report;
}

}  // namespace

EvalReport run_benchmark(const EmbeddingTable& embeddings, const AttributeLabels& labels, const FoldPlan& plan,
                         const ProbeSpec& probe, const std::string& embedding_name, const std::string& task) {
  std::vector<std::string> authors;
  std::vector<std::string> values;
  for (const auto& [a, v] : labels) {
    authors.push_back(a);
    values.push_back(v);
  }
  const auto data = gather(embeddings, authors);
  const auto folds = make_folds(values, plan);
  return evaluate_folds(data, values, folds, plan, probe, embedding_name, task);
}

const std::vector<std::string>& mbti_types() {
  static const std::vector<std::string> types = [] {
    std::vector<std::string> t;
    for (char a : {'I', 'E'})
      for (char b : {'S', 'N'})
        for (char c : {'T', 'F'})
          for (char d : {'J', 'P'}) t.push_back(std::string{a, b, c, d});
    return t;
  }();
  return types;
}

MbtiReport mbti_axis_benchmark(const EmbeddingTable& embeddings, const AttributeLabels& mbti_codes,
                               const FoldPlan& plan, const ProbeSpec& probe, const std::string& embedding_name) {
  std::vector<std::string> authors;
  std::vector<std::string> codes;
  for (const auto& [a, code] : mbti_codes) {
    const auto letters = mbti_axis_labels(code);
    authors.push_back(a);
    codes.emplace_back(letters.begin(), letters.end());
  }
  const auto data = gather(embeddings, authors);
  const auto folds = make_folds(codes, plan);

  MbtiReport out;
  // (author, fold) -> predicted letters
  std::map<std::pair<std::string, std::size_t>, std::string> combined;
  for (std::size_t axis = 0; axis < 4; ++axis) {
    std::vector<std::string> axis_labels;
    for (const auto& c : codes) axis_labels.emplace_back(1, c[axis]);
    out.axes[axis] = evaluate_folds(data, axis_labels, folds, plan, probe, embedding_name,
                                    std::string("MBTI ") + std::string(mbti_axis_name(kMbtiAxes[axis])));
    for (const auto& p : out.axes[axis].predictions) {
      auto& letters = combined[{p.author_id, p.fold}];
      if (letters.empty()) letters = "????";
      letters[axis] = p.predicted[0];
    }
  }
  out.types = make_confusion(mbti_types());
  std::map<std::string, std::size_t> type_index;
  for (std::size_t i = 0; i < mbti_types().size(); ++i) type_index[mbti_types()[i]] = i;
  std::map<std::string, std::string> truth;
  for (std::size_t i = 0; i < authors.size(); ++i) truth[authors[i]] = codes[i];
  for (const auto& [key, letters] : combined) {
    out.types.add(type_index.at(truth.at(key.first)), type_index.at(letters));
  }
  return out;
}

nlohmann::json MbtiReport::to_json() const {
  nlohmann::json j{{"schema_version", EvalReport::kSchemaVersion}};
  nlohmann::json axes_json = nlohmann::json::array();
  for (const auto& a : axes) axes_json.push_back(a.to_json());
  j["axes"] = axes_json;
  j["type_confusion"] = confusion_json(types);
  j["type_confusion_normalization"] = "row-wise by type frequency";
  return j;
}

std::string MbtiReport::text_table() const {
  std::array<MbtiReport, 1> one{*this};
  return mbti_comparison_table(one);
}

std::string comparison_table(std::span<const EvalReport> reports, const std::string& title) {
  std::size_t width = 5;
  for (const auto& r : reports) width = std::max(width, r.probe.name().size() + 1 + r.embedding_name.size());
  std::ostringstream os;
  os << title << '\n';
  os << pad("Model", width) << "  Avg.   Std.\n";
  for (const auto& r : reports) {
    os << pad(r.probe.name() + " " + r.embedding_name, width) << "  " << fixed(r.f1.avg) << "  " << fixed(r.f1.std)
       << '\n';
  }
  return os.str();
}

std::string mbti_comparison_table(std::span<const MbtiReport> reports) {
  std::size_t width = 5;
  for (const auto& r : reports) {
    width = std::max(width, r.axes[0].probe.name().size() + 1 + r.axes[0].embedding_name.size());
  }
  std::ostringstream os;
  os << "F1 score on MBTI dimensions\n";
  os << pad("Model", width) << "  E/I    S/N    T/F    J/P\n";
  for (const auto& r : reports) {
    os << pad(r.axes[0].probe.name() + " " + r.axes[0].embedding_name, width);
    for (const auto& a : r.axes) os << "  " << fixed(a.f1.avg);
    os << '\n';
  }
  return os.str();
}

}  // namespace a2v
