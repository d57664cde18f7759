// SPDX-License-Identifier: Apache-2.0
#pragma once

// Downstream evaluation: fold plans, probe classifiers, metrics and the
// benchmark drivers.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "author2vec/common.hpp"
#include "author2vec/corpus.hpp"

namespace a2v {

// ------------------------------------------------------------------ metrics

/// Support-weighted mean of per-class F1 over the classes present in y_true.
double weighted_f1(std::span<const int> y_true, std::span<const int> y_pred);
double weighted_f1(std::span<const std::string> y_true, std::span<const std::string> y_pred);

/// Fraction of rows whose true class ranks within the k highest scores
/// (equal scores rank the lower class index first).
double topk_accuracy(const Eigen::MatrixXd& scores, std::span<const int> y_true, std::size_t k);

double accuracy(std::span<const int> y_true, std::span<const int> y_pred);

struct ConfusionMatrix {
  std::vector<std::string> classes;
  Eigen::MatrixXd counts;  ///< rows = true class, cols = predicted

  /// Each row divided by its support (rows with zero support stay zero).
  Eigen::MatrixXd normalized() const;
  void add(std::size_t truth, std::size_t predicted) { counts(static_cast<Eigen::Index>(truth), static_cast<Eigen::Index>(predicted)) += 1; }
  void write_csv(const std::filesystem::path& path, bool normalize) const;
};

ConfusionMatrix make_confusion(std::vector<std::string> classes);

/// Expected weighted F1 of a prior-matched random predictor: sum of squared class priors.
double chance_weighted_f1(std::span<const std::string> labels);

// --------------------------------------------------------------------- folds

enum class FoldScheme { kfold, kfold_reverse };

struct FoldPlan {
  FoldScheme scheme = FoldScheme::kfold;
  std::size_t k = 10;
  std::uint64_t seed = 0;
  bool stratify = true;
};

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

struct FoldSet {
  std::vector<Fold> folds;
  std::vector<std::string> warnings;
};

/// `labels[i]` is author i's class; used for stratification and for the
/// class-coverage warnings. Every index lands in exactly one of the k groups;
/// kfold tests on each group once, kfold_reverse trains on each group once.
FoldSet make_folds(std::span<const std::string> labels, const FoldPlan& plan);

// -------------------------------------------------------------------- probes

enum class ProbeKind { logreg, mlp };

struct ProbeSpec {
  ProbeKind kind = ProbeKind::logreg;
  std::vector<std::size_t> hidden;  ///< mlp only
  double l2 = 1.0;
  std::size_t max_iters = 2000;
  std::uint64_t seed = 0;
  double learning_rate = 1e-3;  ///< mlp only
  double validation_fraction = 0.1;  ///< mlp only
  std::size_t patience = 50;  ///< mlp only, in epochs

  static ProbeSpec logistic(double l2 = 1.0) { return ProbeSpec{ProbeKind::logreg, {}, l2}; }
  static ProbeSpec mlp(std::vector<std::size_t> hidden, double l2 = 1e-4) {
    return ProbeSpec{ProbeKind::mlp, std::move(hidden), l2, 500};
  }
  void validate() const;
  std::string name() const;
  nlohmann::json to_json() const;
};

class Probe {
 public:
  virtual ~Probe() = default;
  /// n x classes.
  virtual Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& x) const = 0;
  std::vector<int> predict(const Eigen::MatrixXd& x) const;
};

/// Binary L2-regularized logistic regression fitted by full-batch gradient
/// descent with backtracking line search. Objective is the mean log-loss plus
/// l2 / (2n) * ||w||^2 (bias unpenalized).
class LogisticRegression : public Probe {
 public:
  struct FitInfo {
    std::size_t iterations = 0;
    double gradient_norm = 0.0;
    double objective = 0.0;
  };

  static LogisticRegression fit(const Eigen::MatrixXd& x, std::span<const int> y, const ProbeSpec& spec);

  Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& x) const override;
  Eigen::VectorXd decision_function(const Eigen::MatrixXd& x) const;
  const Eigen::VectorXd& weights() const noexcept { return weights_; }
  double bias() const noexcept { return bias_; }
  const FitInfo& info() const noexcept { return info_; }

 private:
  Eigen::VectorXd weights_;
  double bias_ = 0.0;
  FitInfo info_;
};

/// One-vs-rest wrapper for more than two classes.
class OneVsRestLogistic : public Probe {
 public:
  static OneVsRestLogistic fit(const Eigen::MatrixXd& x, std::span<const int> y, std::size_t classes,
                               const ProbeSpec& spec);
  Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& x) const override;

 private:
  std::vector<LogisticRegression> models_;
};

class MlpProbe : public Probe {
 public:
  static MlpProbe fit(const Eigen::MatrixXd& x, std::span<const int> y, std::size_t classes, const ProbeSpec& spec);
  Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& x) const override;
  std::size_t epochs_run() const noexcept { return epochs_run_; }

 private:
  struct Layer {
    Eigen::MatrixXd weights;
    Eigen::VectorXd bias;
    bool relu = true;
  };
  std::vector<Layer> layers_;
  std::size_t epochs_run_ = 0;
};

LogisticRegression fit_logreg(const Eigen::MatrixXd& x, std::span<const int> y, const ProbeSpec& spec);
MlpProbe fit_mlp_probe(const Eigen::MatrixXd& x, std::span<const int> y, std::size_t classes, const ProbeSpec& spec);
std::unique_ptr<Probe> fit_probe(const Eigen::MatrixXd& x, std::span<const int> y, std::size_t classes,
                                 const ProbeSpec& spec);

// ------------------------------------------------------------------ reports

struct Prediction {
  std::string author_id;
  std::size_t fold = 0;
  std::string truth;
  std::string predicted;
};

struct FoldStats {
  double min = 0.0;
  double max = 0.0;
  double avg = 0.0;
  double std = 0.0;  ///< population standard deviation (divide by n)
};

FoldStats fold_stats(std::span<const double> values);

struct EvalReport {
  static constexpr int kSchemaVersion = 1;

  std::string embedding_name;
  std::string task;
  ProbeSpec probe;
  FoldPlan plan;
  std::size_t authors = 0;
  std::vector<double> fold_f1;
  std::vector<double> fold_accuracy;
  FoldStats f1;
  ConfusionMatrix confusion;
  std::vector<Prediction> predictions;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
  /// Min / Max / Avg / Std layout of the cross-validation tables.
  std::string text_table() const;
};

using EmbeddingTable = std::map<std::string, Eigen::VectorXd>;
using AttributeLabels = std::map<std::string, std::string>;

EvalReport run_benchmark(const EmbeddingTable& embeddings, const AttributeLabels& labels, const FoldPlan& plan,
                         const ProbeSpec& probe, const std::string& embedding_name = "embedding",
                         const std::string& task = "custom");

struct MbtiReport {
  std::array<EvalReport, 4> axes;
  ConfusionMatrix types;  ///< 16 x 16, combined per-axis predictions

  nlohmann::json to_json() const;
  std::string text_table() const;
};

/// All 16 MBTI codes in a fixed order (I/E outermost).
const std::vector<std::string>& mbti_types();

MbtiReport mbti_axis_benchmark(const EmbeddingTable& embeddings, const AttributeLabels& mbti_codes,
                               const FoldPlan& plan, const ProbeSpec& probe,
                               const std::string& embedding_name = "embedding");

/// One row per report ("<probe> <embedding>", Avg., Std.).
std::string comparison_table(std::span<const EvalReport> reports, const std::string& title);
/// One row per embedding, one F1 column per MBTI axis.
std::string mbti_comparison_table(std::span<const MbtiReport> reports);

}  // namespace a2v
