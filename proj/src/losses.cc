#include "geoloss/losses.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "geoloss/error.hpp"

namespace geoloss {

namespace {

void CheckDims(Index a, Index f, Index c, const char* what) {
  if (a != f || f != c) throw InvalidArgument(std::string(what) + ": dimension mismatch");
}

void CheckClass(Index y, Index d) {
  if (y < 0 || y >= d) throw InvalidArgument("class index out of range");
}

}  // namespace

LossValue FyLoss(const DiscreteMeasure& a, const ScoreVector& f, const CostSpec& c,
                 const LossOptions& opts) {
  CheckDims(a.size(), f.size(), c.size(), "FyLoss");
  return FyLoss(a, f, c, SolveConjugate(f, c, opts.conjugate), opts);
}

LossValue FyLoss(const DiscreteMeasure& a, const ScoreVector& f, const CostSpec& c,
                 const ConjugateSolution& conj, const LossOptions& opts) {
  CheckDims(a.size(), f.size(), c.size(), "FyLoss");
  const double omega = Negentropy(a, c, opts.potential);
  LossValue out;
  out.value = conj.value + omega - a.weights().dot(f.values());
  out.gradient = ScoreVector(Vector(conj.measure.weights() - a.weights()));
  return out;
}

ScoreVector Extrapolate(const ScoreVector& f, const CostSpec& c, const ConjugateSolution& conj) {
  const double shift = conj.value;
  const ScoreVector t = CTransform(ScoreVector(Vector(shift - f.values().array())),
                                   conj.measure, c);
  return ScoreVector(Vector(shift - t.values().array()));
}

ScoreVector Extrapolate(const ScoreVector& f, const CostSpec& c, const LossOptions& opts) {
  if (f.size() != c.size()) throw InvalidArgument("Extrapolate: dimension mismatch");
  return Extrapolate(f, c, SolveConjugate(f, c, opts.conjugate));
}

double HausdorffDivergence(const DiscreteMeasure& a, const DiscreteMeasure& b,
                           const CostSpec& c, const FixedPointOptions& opts) {
  CheckDims(a.size(), b.size(), c.size(), "HausdorffDivergence");
  const PotentialResult pb = SymmetricPotential(b, c, opts);
  const double omega_a = Negentropy(a, c, opts);
  return omega_a - pb.negentropy -
         pb.potential.values().dot(a.weights() - b.weights());
}

double DiracHausdorff(Index y, const ScoreVector& f, const CostSpec& c,
                      const ConjugateSolution& conj) {
  CheckDims(f.size(), conj.measure.size(), c.size(), "DiracHausdorff");
  CheckClass(y, f.size());
  // Only entry y of f^E is needed.
  const std::vector<Index> support = conj.measure.Support();
  std::vector<double> terms(support.size());
  for (size_t k = 0; k < support.size(); ++k) {
    const Index j = support[k];
    terms[k] = std::log(conj.measure[j]) + 0.5 * (conj.value - f[j] - c(y, j));
  }
  const double t_y = -2.0 * LogSumExp(terms);
  return t_y;  // g-LSE - f^E_y = g-LSE - (g-LSE - t_y)
}

UpperBoundCheck CheckUpperBound(const DiscreteMeasure& a, const ScoreVector& f,
                                const CostSpec& c, const LossOptions& opts) {
  CheckDims(a.size(), f.size(), c.size(), "CheckUpperBound");
  const ConjugateSolution conj = SolveConjugate(f, c, opts.conjugate);
  UpperBoundCheck out;
  out.loss = FyLoss(a, f, c, conj, opts).value;
  out.divergence = HausdorffDivergence(a, conj.measure, c, opts.potential);
  const ScoreVector fe = Extrapolate(f, c, conj);
  out.slack = a.weights().dot(fe.values() - f.values());
  out.decomposition_error = std::abs(out.divergence - (out.loss - out.slack));
  out.identity_holds = out.decomposition_error <= 1e-6 && out.slack >= -1e-8;
  return out;
}

double CostAugmentedHinge(Index y, const ScoreVector& f, const CostSpec& c) {
  CheckDims(f.size(), f.size(), c.size(), "CostAugmentedHinge");
  CheckClass(y, f.size());
  double best = 0.0;  // i = y contributes exactly 0
  for (Index i = 0; i < f.size(); ++i) best = std::max(best, c(y, i) + f[i] - f[y]);
  return best;
}

double CostAugmentedLogistic(Index y, const ScoreVector& f, const CostSpec& c) {
  CheckDims(f.size(), f.size(), c.size(), "CostAugmentedLogistic");
  CheckClass(y, f.size());
  Vector terms(f.size());
  for (Index i = 0; i < f.size(); ++i) terms[i] = c(y, i) + f[i];
  return LogSumExp(terms) - f[y];
}

}  // namespace geoloss
