#include "geoloss/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "geoloss/error.hpp"

namespace geoloss {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void RequireFinite(const Vector& v, const char* what) {
  if (!v.allFinite()) throw InvalidArgument(std::string(what) + ": non-finite entry");
}

Vector ToVector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

}  // namespace

ScoreVector::ScoreVector(Vector values) : values_(std::move(values)) {
  RequireFinite(values_, "ScoreVector");
}

ScoreVector::ScoreVector(const std::vector<double>& values)
    : ScoreVector(ToVector(values)) {}

ScoreVector ScoreVector::Shifted(double c) const {
  return ScoreVector(Vector(values_.array() + c));
}

DiscreteMeasure::DiscreteMeasure(Vector weights) : weights_(std::move(weights)) {
  if (weights_.size() == 0) throw InvalidArgument("DiscreteMeasure: empty input");
  RequireFinite(weights_, "DiscreteMeasure");
  for (Index i = 0; i < weights_.size(); ++i) {
    if (weights_[i] < -1e-12) {
      throw InvalidArgument("DiscreteMeasure: negative weight at index " +
                            std::to_string(i));
    }
    weights_[i] = std::max(weights_[i], 0.0);
  }
  const double total = weights_.sum();
  if (!(total > 0)) throw InvalidArgument("DiscreteMeasure: weights sum to zero");
  weights_ /= total;
}

DiscreteMeasure::DiscreteMeasure(const std::vector<double>& weights)
    : DiscreteMeasure(ToVector(weights)) {}

DiscreteMeasure DiscreteMeasure::Uniform(Index d) {
  if (d < 1) throw InvalidArgument("Uniform: d must be positive");
  return DiscreteMeasure(Vector::Constant(d, 1.0 / static_cast<double>(d)));
}

DiscreteMeasure DiscreteMeasure::Dirac(Index d, Index j) {
  if (j < 0 || j >= d) throw InvalidArgument("Dirac: index out of range");
  Vector w = Vector::Zero(d);
  w[j] = 1.0;
  return DiscreteMeasure(std::move(w));
}

std::vector<Index> DiscreteMeasure::Support() const {
  std::vector<Index> s;
  for (Index i = 0; i < weights_.size(); ++i) {
    if (InSupport(i)) s.push_back(i);
  }
  return s;
}

std::optional<Index> DiscreteMeasure::DiracIndex() const {
  std::optional<Index> found;
  for (Index i = 0; i < weights_.size(); ++i) {
    if (!InSupport(i)) continue;
    if (found) return std::nullopt;
    found = i;
  }
  return found;
}

CostSpec::CostSpec(const Matrix& matrix, double epsilon) : epsilon_(epsilon) {
  if (!(epsilon > 0) || !std::isfinite(epsilon)) {
    throw InvalidArgument("CostSpec: epsilon must be positive and finite");
  }
  if (matrix.rows() != matrix.cols()) {
    throw InvalidArgument("CostSpec: matrix is " + std::to_string(matrix.rows()) + "x" +
                          std::to_string(matrix.cols()) + ", expected square");
  }
  if (matrix.rows() == 0) throw InvalidArgument("CostSpec: empty matrix");
  if (!matrix.allFinite()) throw InvalidArgument("CostSpec: non-finite entry");
  Matrix sym = 0.5 * (matrix + matrix.transpose());
  was_symmetrized_ = (sym.array() != matrix.array()).any();
  for (Index i = 0; i < sym.rows(); ++i) {
    if (std::abs(sym(i, i)) > 1e-12) {
      throw InvalidArgument("CostSpec: nonzero diagonal at " + std::to_string(i));
    }
    sym(i, i) = 0.0;
    for (Index j = 0; j < sym.cols(); ++j) {
      if (sym(i, j) < 0) {
        throw InvalidArgument("CostSpec: negative entry at (" + std::to_string(i) + ", " +
                              std::to_string(j) + ")");
      }
    }
  }
  size_ = sym.rows();
  dense_ = std::move(sym);
}

CostSpec CostSpec::Separable(Index height, Index width, double sigma, double epsilon) {
  if (height < 1 || width < 1) throw InvalidArgument("Separable: empty grid");
  if (!(sigma > 0)) throw InvalidArgument("Separable: sigma must be positive");
  if (!(epsilon > 0)) throw InvalidArgument("Separable: epsilon must be positive");
  CostSpec c;
  c.separable_ = Separable2D{height, width, sigma};
  c.size_ = height * width;
  c.epsilon_ = epsilon;
  return c;
}

CostSpec CostSpec::Materialized() const {
  if (dense_) return *this;
  CostSpec c = *this;
  Matrix m(size_, size_);
  for (Index i = 0; i < size_; ++i) {
    for (Index j = 0; j < size_; ++j) m(i, j) = base(i, j);
  }
  c.dense_ = std::move(m);
  return c;
}

CostSpec CostSpec::WithEpsilon(double epsilon) const {
  if (!(epsilon > 0)) throw InvalidArgument("CostSpec: epsilon must be positive");
  CostSpec c = *this;
  c.epsilon_ = epsilon;
  return c;
}

double CostSpec::base(Index i, Index j) const {
  if (dense_) return (*dense_)(i, j);
  const Separable2D& s = *separable_;
  const double di = static_cast<double>(i / s.width - j / s.width);
  const double dj = static_cast<double>(i % s.width - j % s.width);
  return (di * di + dj * dj) / s.sigma;
}

Matrix CostSpec::Effective() const {
  if (dense_) return *dense_ / epsilon_;
  return Materialized().Effective();
}

const Matrix& CostSpec::base_matrix() const {
  if (!dense_) throw InvalidArgument("CostSpec: dense matrix not materialized");
  return *dense_;
}

Vector Grid2D::Flatten() const {
  Vector flat(values.size());
  for (Index i = 0; i < values.rows(); ++i) {
    for (Index j = 0; j < values.cols(); ++j) flat[i * values.cols() + j] = values(i, j);
  }
  return flat;
}

Grid2D Grid2D::FromFlat(const Vector& flat, Index height, Index width) {
  if (flat.size() != height * width) throw InvalidArgument("Grid2D: size mismatch");
  Grid2D g{Matrix(height, width)};
  for (Index i = 0; i < height; ++i) {
    for (Index j = 0; j < width; ++j) g.values(i, j) = flat[i * width + j];
  }
  return g;
}

double LogSumExp(std::span<const double> v) {
  if (v.empty()) throw InvalidArgument("LogSumExp: empty input");
  const double m = *std::max_element(v.begin(), v.end());
  if (m == kNegInf) return kNegInf;
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - m);
  return m + std::log(sum);
}

double LogSumExp(const Vector& v) {
  return LogSumExp(std::span<const double>(v.data(), static_cast<size_t>(v.size())));
}

DiscreteMeasure Softmax(const ScoreVector& v) {
  const double lse = LogSumExp(v.values());
  return DiscreteMeasure(Vector((v.values().array() - lse).exp()));
}

DiscreteMeasure Sparsemax(const ScoreVector& v) {
  const Index d = v.size();
  if (d == 0) throw InvalidArgument("Sparsemax: empty input");
  std::vector<double> sorted(v.values().data(), v.values().data() + d);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumsum = 0.0;
  double tau = 0.0;
  for (Index k = 0; k < d; ++k) {
    cumsum += sorted[k];
    const double candidate = (cumsum - 1.0) / static_cast<double>(k + 1);
    if (sorted[k] > candidate) tau = candidate;
  }
  return DiscreteMeasure(Vector((v.values().array() - tau).max(0.0)));
}

double ShannonNegentropy(const DiscreteMeasure& a) {
  double h = 0.0;
  for (Index i = 0; i < a.size(); ++i) {
    if (a[i] > 0) h += a[i] * std::log(a[i]);
  }
  return h;
}

double GiniNegentropy(const DiscreteMeasure& a) {
  return 0.5 * (a.weights().squaredNorm() - 1.0);
}

Vector CTransformLog(const Vector& f, std::span<const Index> support,
                     const Vector& log_weights, const CostSpec& c) {
  if (support.empty()) throw InvalidArgument("CTransform: measure has empty support");
  const Index d = c.size();
  const Index s = static_cast<Index>(support.size());
  Vector out(d);
  std::vector<double> terms(static_cast<size_t>(s));
  for (Index y = 0; y < d; ++y) {
    for (Index k = 0; k < s; ++k) {
      terms[k] = log_weights[k] + 0.5 * (f[k] - c(y, support[k]));
    }
    out[y] = -2.0 * LogSumExp(terms);
  }
  return out;
}

ScoreVector CTransform(const ScoreVector& f, const DiscreteMeasure& a, const CostSpec& c) {
  if (f.size() != a.size() || a.size() != c.size()) {
    throw InvalidArgument("CTransform: dimension mismatch");
  }
  const std::vector<Index> support = a.Support();
  if (support.empty()) throw InvalidArgument("CTransform: measure has empty support");
  Vector fs(static_cast<Index>(support.size()));
  Vector lw(fs.size());
  for (size_t k = 0; k < support.size(); ++k) {
    fs[k] = f[support[k]];
    lw[k] = std::log(a[support[k]]);
  }
  return ScoreVector(CTransformLog(fs, support, lw, c));
}

}  // namespace geoloss
