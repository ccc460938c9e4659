#pragma once

// Foundational value types (measures, scores, costs, 2-D grids) and the
// numerically stable primitives built on them.

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

namespace geoloss {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Weights at or below this value are treated as outside the support.
inline constexpr double kSupportThreshold = 1e-300;

// Unconstrained real scores on d points. All entries are finite.
class ScoreVector {
 public:
  ScoreVector() = default;
  explicit ScoreVector(Vector values);
  explicit ScoreVector(const std::vector<double>& values);

  const Vector& values() const { return values_; }
  Index size() const { return values_.size(); }
  double operator[](Index i) const { return values_[i]; }

  // f + c * 1
  ScoreVector Shifted(double c) const;

 private:
  Vector values_;
};

// Probability weights on d points. Construction normalizes the input so the
// weights sum to one; negative or non-finite inputs are rejected.
class DiscreteMeasure {
 public:
  DiscreteMeasure() = default;
  explicit DiscreteMeasure(Vector weights);
  explicit DiscreteMeasure(const std::vector<double>& weights);

  static DiscreteMeasure Uniform(Index d);
  static DiscreteMeasure Dirac(Index d, Index j);

  const Vector& weights() const { return weights_; }
  Index size() const { return weights_.size(); }
  double operator[](Index i) const { return weights_[i]; }

  bool InSupport(Index i) const { return weights_[i] > kSupportThreshold; }
  std::vector<Index> Support() const;
  // Index of the single atom if this is a Dirac mass, otherwise nullopt.
  std::optional<Index> DiracIndex() const;

 private:
  Vector weights_;
};

// Pixel-grid squared-Euclidean cost:
//   C((i,j),(k,l)) = ((i-k)^2 + (j-l)^2) / sigma
// on an h x w grid flattened row-major, point (i,j) -> i*w + j.
struct Separable2D {
  Index height = 0;
  Index width = 0;
  double sigma = 1.0;
};

// Symmetric nonnegative cost with zero diagonal, plus the scale epsilon so
// that algorithms see C / epsilon. Either dense, separable, or both.
class CostSpec {
 public:
  CostSpec() = default;
  // Symmetrizes as (C + C^T) / 2. Throws InvalidArgument on a non-square,
  // negative, non-finite or nonzero-diagonal input.
  explicit CostSpec(const Matrix& matrix, double epsilon = 1.0);

  static CostSpec Separable(Index height, Index width, double sigma,
                            double epsilon = 1.0);
  // Returns a copy with a dense matrix equal to the separable formula.
  CostSpec Materialized() const;
  // Same base cost, different epsilon.
  CostSpec WithEpsilon(double epsilon) const;

  Index size() const { return size_; }
  double epsilon() const { return epsilon_; }
  bool was_symmetrized() const { return was_symmetrized_; }
  bool has_dense() const { return dense_.has_value(); }
  const std::optional<Separable2D>& separable() const { return separable_; }

  // Unscaled base entry C_ij.
  double base(Index i, Index j) const;
  // Effective entry C_ij / epsilon; this is what every solver uses.
  double operator()(Index i, Index j) const { return base(i, j) / epsilon_; }
  // Dense effective matrix C / epsilon (materialized on the fly if needed).
  Matrix Effective() const;
  // Dense unscaled matrix.
  const Matrix& base_matrix() const;

 private:
  std::optional<Matrix> dense_;
  std::optional<Separable2D> separable_;
  Index size_ = 0;
  double epsilon_ = 1.0;
  bool was_symmetrized_ = false;
};

// Real values on an h x w grid, stored as an h x w matrix.
struct Grid2D {
  Matrix values;

  Index height() const { return values.rows(); }
  Index width() const { return values.cols(); }
  // Row-major flattening, consistent with Separable2D.
  Vector Flatten() const;
  static Grid2D FromFlat(const Vector& flat, Index height, Index width);
};

// log sum_i exp(v_i), max-shifted. Entries equal to -inf are allowed and
// contribute nothing. Throws InvalidArgument on empty input.
double LogSumExp(std::span<const double> v);
double LogSumExp(const Vector& v);

DiscreteMeasure Softmax(const ScoreVector& v);
// Euclidean projection onto the simplex by sort-and-threshold.
DiscreteMeasure Sparsemax(const ScoreVector& v);

// sum_i a_i log a_i with 0 log 0 = 0.
double ShannonNegentropy(const DiscreteMeasure& a);
// (||a||^2 - 1) / 2.
double GiniNegentropy(const DiscreteMeasure& a);

// Soft C-transform T(f, a)(y) = -2 log <a, exp((f - C(y, .)) / 2)>, summed
// over the support of a only.
ScoreVector CTransform(const ScoreVector& f, const DiscreteMeasure& a,
                       const CostSpec& c);
// Same, with the measure given as log-weights on an explicit support.
Vector CTransformLog(const Vector& f, std::span<const Index> support,
                     const Vector& log_weights, const CostSpec& c);

}  // namespace geoloss
