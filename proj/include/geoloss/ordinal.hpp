#pragma once

// Ordinal regression with linear score models: dataset loading, training
// with the g-logistic loss or a baseline loss, metrics and cross-validation.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "geoloss/measures.hpp"

namespace geoloss {

// Labels are 1-based in [1, num_classes]. `folds` is empty or has one
// non-negative entry per sample.
struct OrdinalDataset {
  Matrix features;  // n x k, as read
  std::vector<int> labels;
  std::vector<int> folds;
  int num_classes = 0;

  Index size() const { return features.rows(); }
};

// Rows of comma-separated numbers: features, then the integer label, then
// (if `fold_column`) the integer fold id. Throws ParseError with the row.
OrdinalDataset ParseOrdinalCsv(const std::string& text, int num_classes, bool fold_column = false);
OrdinalDataset LoadOrdinalCsv(const std::string& path, int num_classes, bool fold_column = false);

struct Standardization {
  Vector mean;
  Vector scale;  // standard deviation, 1 for constant columns
};
Standardization FitStandardization(const Matrix& features, const std::vector<Index>& rows);

// Standardized features and 0-based class indices for a subset of rows.
struct Split {
  Matrix x;
  std::vector<Index> y;

  Index size() const { return x.rows(); }
};
Split MakeSplit(const OrdinalDataset& data, const std::vector<Index>& rows,
                const Standardization& stats);
std::vector<Index> AllRows(const OrdinalDataset& data);

// C_ij = (i - j)^2 / 2 on classes 0..d-1.
CostSpec SquaredCost(Index d, double epsilon = 1.0);

struct LinearModel {
  Matrix w;  // d x k
  Vector b;  // d

  static LinearModel Zero(Index d, Index k);
  Vector Scores(const Vector& x) const { return w * x + b; }
};

enum class LossFamily {
  kGLogistic,     // Fenchel-Young loss of the Sinkhorn negentropy, g-softmax link
  kMultinomial,   // Shannon logistic loss, softmax link
  kHinge,         // cost-augmented hinge, argmax link
  kCostLogistic,  // cost-augmented logistic, softmax of cost-shifted scores
};

const char* LossFamilyName(LossFamily family);
LossFamily ParseLossFamily(const std::string& name);

struct SampleLoss {
  double loss = 0;
  Vector gradient;  // d loss / d scores
};

// Loss of class y (0-based) at scores f. For kGLogistic, Omega(delta_y) = 0.
SampleLoss EvaluateSample(LossFamily family, Index y, const ScoreVector& f, const CostSpec& c);

// The predicted distribution of each family's link.
DiscreteMeasure PredictDistribution(const LinearModel& m, const Vector& x, const CostSpec& c,
                                    LossFamily family = LossFamily::kGLogistic);

struct ObjectiveValue {
  double value = 0;      // mean loss + l2 * ||W||^2
  double mean_loss = 0;
  Matrix grad_w;
  Vector grad_b;
};
ObjectiveValue Objective(const LinearModel& m, const Split& data, LossFamily family,
                         const CostSpec& c, double l2);

struct TrainOptions {
  LossFamily family = LossFamily::kGLogistic;
  double l2 = 0.0;
  int epochs = 500;
  double learning_rate = 1.0;
  // Halve the step until the objective does not increase.
  bool halve_on_plateau = true;
  int max_halvings = 40;
  // Stop once the sup-norm of the gradient falls below this.
  double gradient_tol = 1e-9;
  bool record_curves = true;
  std::optional<Split> validation;
  // Seeds the initial scores; 0 means start from W = 0, b = 0.
  std::uint64_t seed = 0;
};

// One row of the training curves. Epoch 0 is the initial model.
struct CurvePoint {
  int epoch = 0;
  std::string split;   // "train" or "validation"
  double fy_loss = 0;  // mean loss of the trained family
  double hausdorff = 0;  // mean D(delta_y, prediction)
};

struct TrainResult {
  LinearModel model;
  std::vector<CurvePoint> curves;
  double objective = 0;
  double learning_rate = 0;  // after halvings
};

// Full-batch gradient descent. Throws NumericalError naming the epoch if the
// objective becomes NaN.
TrainResult Train(const Split& data, const CostSpec& c, const TrainOptions& opts);
TrainResult TrainGLogistic(const Split& data, const CostSpec& c, double l2, int epochs);
TrainResult TrainMultinomial(const Split& data, const CostSpec& c, double l2, int epochs);

void WriteCurvesCsv(std::ostream& out, const std::vector<CurvePoint>& curves);

struct Metrics {
  double hausdorff = 0;
  double mae = 0;
  double accuracy = 0;
};

// Lowest index among the maximal weights.
Index ArgmaxLowest(const DiscreteMeasure& a);

// Labels 0-based. Hausdorff is D(delta_y, prediction) averaged over samples.
Metrics EvaluatePredictions(const std::vector<DiscreteMeasure>& predictions,
                            const std::vector<Index>& labels, const CostSpec& c);
Metrics Evaluate(const LinearModel& m, const Split& data, const CostSpec& c, LossFamily family);

struct MetricSummary {
  double mean = 0;
  double std = 0;  // sample standard deviation, 0 for a single fold
};

struct CrossValidationResult {
  MetricSummary hausdorff, mae, accuracy;
  std::vector<Metrics> fold_metrics;
  std::vector<int> evaluated_folds;
  std::vector<double> chosen_l2;
  std::vector<std::string> warnings;
};

struct CrossValidationOptions {
  LossFamily family = LossFamily::kGLogistic;
  std::vector<double> l2_grid = {0.0};
  int num_folds = 5;  // ignored if the dataset carries folds
  double inner_validation_fraction = 0.2;
  TrainOptions train;
  std::uint64_t seed = 0;
};

// For each fold: standardize on the training rows, choose l2 on an inner
// validation split by the family's own loss, retrain on all training rows,
// evaluate on the held-out fold. Folds whose training rows miss a class are
// skipped with a warning.
CrossValidationResult CrossValidate(const OrdinalDataset& data, const CostSpec& c,
                                    const CrossValidationOptions& opts);

nlohmann::json MetricsJson(const CrossValidationResult& r);
nlohmann::json MetricsJson(const Metrics& m);

struct SyntheticOptions {
  Index n = 600;
  Index k = 4;
  int num_classes = 3;
  double separation = 1.0;  // distance between consecutive class means
  double noise = 1.0;       // per-coordinate standard deviation
  // Per-class standard deviations; overrides `noise` when non-empty.
  std::vector<double> class_noise;
  std::uint64_t seed = 0;
};

// Gaussian class-conditionals whose means lie on a line through the origin,
// in class order, with isotropic covariance; labels uniform over classes.
OrdinalDataset MakeSyntheticOrdinal(const SyntheticOptions& opts);

// Deterministic permutation of 0..n-1.
std::vector<Index> Permutation(Index n, std::uint64_t seed);

}  // namespace geoloss
