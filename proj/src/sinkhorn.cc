#include "geoloss/sinkhorn.hpp"

#include <cmath>
#include <vector>

#include "geoloss/error.hpp"

namespace geoloss {

namespace {

struct Restricted {
  std::vector<Index> support;
  Vector log_weights;
  Matrix cost;  // effective cost on support x support
};

Restricted Restrict(const DiscreteMeasure& a, const CostSpec& c) {
  Restricted r;
  r.support = a.Support();
  const Index s = static_cast<Index>(r.support.size());
  r.log_weights.resize(s);
  r.cost.resize(s, s);
  for (Index i = 0; i < s; ++i) {
    r.log_weights[i] = std::log(a[r.support[i]]);
    for (Index j = 0; j < s; ++j) r.cost(i, j) = c(r.support[i], r.support[j]);
  }
  return r;
}

// T(g, a) evaluated on the support, with g given on the support.
void CTransformOnSupport(const Restricted& r, const Vector& g, Vector& out,
                         std::vector<double>& terms) {
  const Index s = g.size();
  for (Index y = 0; y < s; ++y) {
    for (Index k = 0; k < s; ++k) terms[k] = r.log_weights[k] + 0.5 * (g[k] - r.cost(y, k));
    out[y] = -2.0 * LogSumExp(terms);
  }
}

void CheckDims(const DiscreteMeasure& a, const CostSpec& c) {
  if (a.size() != c.size()) {
    throw InvalidArgument("measure has " + std::to_string(a.size()) +
                          " points but cost has " + std::to_string(c.size()));
  }
}

}  // namespace

TransportResult SinkhornOT(const DiscreteMeasure& a, const DiscreteMeasure& b,
                           const CostSpec& c, double eps, double tol, int max_iter) {
  CheckDims(a, c);
  CheckDims(b, c);
  if (!(eps > 0)) throw InvalidArgument("SinkhornOT: eps must be positive");
  const std::vector<Index> sa = a.Support();
  const std::vector<Index> sb = b.Support();
  const Index na = static_cast<Index>(sa.size());
  const Index nb = static_cast<Index>(sb.size());

  Matrix cost(na, nb);
  for (Index i = 0; i < na; ++i) {
    for (Index j = 0; j < nb; ++j) cost(i, j) = c(sa[i], sb[j]);
  }
  Vector la(na), lb(nb);
  for (Index i = 0; i < na; ++i) la[i] = std::log(a[sa[i]]);
  for (Index j = 0; j < nb; ++j) lb[j] = std::log(b[sb[j]]);

  Vector u = Vector::Zero(na);
  Vector v = Vector::Zero(nb);
  std::vector<double> terms(static_cast<size_t>(std::max(na, nb)));
  Matrix log_plan(na, nb);
  double err = INFINITY;
  int it = 0;
  for (; it < max_iter; ++it) {
    for (Index i = 0; i < na; ++i) {
      for (Index j = 0; j < nb; ++j) terms[j] = lb[j] + (v[j] - cost(i, j)) / eps;
      u[i] = -eps * LogSumExp(std::span<const double>(terms.data(), nb));
    }
    for (Index j = 0; j < nb; ++j) {
      for (Index i = 0; i < na; ++i) terms[i] = la[i] + (u[i] - cost(i, j)) / eps;
      v[j] = -eps * LogSumExp(std::span<const double>(terms.data(), na));
    }
    // Columns match b exactly after the v-update; measure the row defect.
    for (Index i = 0; i < na; ++i) {
      for (Index j = 0; j < nb; ++j) {
        log_plan(i, j) = la[i] + lb[j] + (u[i] + v[j] - cost(i, j)) / eps;
      }
    }
    err = 0.0;
    for (Index i = 0; i < na; ++i) {
      err = std::max(err, std::abs(log_plan.row(i).array().exp().sum() - std::exp(la[i])));
    }
    if (err <= tol) break;
  }
  if (err > tol) throw ConvergenceError("SinkhornOT did not converge", err, it);

  TransportResult result;
  result.plan.matrix = Matrix::Zero(c.size(), c.size());
  double transport = 0.0;
  double kl = 0.0;
  for (Index i = 0; i < na; ++i) {
    for (Index j = 0; j < nb; ++j) {
      const double p = std::exp(log_plan(i, j));
      result.plan.matrix(sa[i], sb[j]) = p;
      transport += p * cost(i, j);
      if (p > 0) kl += p * (log_plan(i, j) - la[i] - lb[j]);
    }
  }
  result.value = transport + eps * kl;
  result.iterations = it + 1;
  result.marginal_error = err;
  return result;
}

PotentialResult SymmetricPotential(const DiscreteMeasure& a, const CostSpec& c,
                                   const FixedPointOptions& opts) {
  CheckDims(a, c);
  if (!(opts.tol > 0)) throw InvalidArgument("SymmetricPotential: tol must be positive");
  const Restricted r = Restrict(a, c);
  const Index s = static_cast<Index>(r.support.size());

  Vector g = Vector::Zero(s);
  Vector tg(s);
  std::vector<double> terms(static_cast<size_t>(s));
  std::vector<double> trace;
  double defect = INFINITY;
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    CTransformOnSupport(r, g, tg, terms);
    defect = (g - tg).cwiseAbs().maxCoeff();
    trace.push_back(defect);
    if (defect <= opts.tol) break;
    g = 0.5 * (g + tg);
  }
  if (defect > opts.tol) {
    throw ConvergenceError("SymmetricPotential did not converge", defect, it,
                           std::move(trace));
  }

  // Extend to every point: f = -T(-f, a) with -f = g on the support.
  const Vector f = -CTransformLog(g, r.support, r.log_weights, c);

  PotentialResult result;
  Vector g_new(s);
  for (Index k = 0; k < s; ++k) g_new[k] = -f[r.support[k]];
  CTransformOnSupport(r, g_new, tg, terms);
  result.residual = (g_new - tg).cwiseAbs().maxCoeff();
  result.potential = ScoreVector(f);
  result.iterations = it + 1;
  result.negentropy = -HomogeneousDual(a, ScoreVector(Vector(-f)), c);
  return result;
}

double HomogeneousDual(const DiscreteMeasure& a, const ScoreVector& g, const CostSpec& c) {
  CheckDims(a, c);
  const Restricted r = Restrict(a, c);
  const Index s = static_cast<Index>(r.support.size());
  double linear = 0.0;
  std::vector<double> terms;
  terms.reserve(static_cast<size_t>(s * s));
  for (Index i = 0; i < s; ++i) {
    const double gi = g[r.support[i]];
    linear += a[r.support[i]] * gi;
    for (Index j = 0; j < s; ++j) {
      const double gj = g[r.support[j]];
      terms.push_back(r.log_weights[i] + r.log_weights[j] + 0.5 * (gi + gj - r.cost(i, j)));
    }
  }
  return linear - LogSumExp(terms);
}

double Negentropy(const DiscreteMeasure& a, const CostSpec& c, const FixedPointOptions& opts) {
  CheckDims(a, c);
  if (a.DiracIndex()) return 0.0;
  return SymmetricPotential(a, c, opts).negentropy;
}

double ScaledNegentropy(const DiscreteMeasure& a, const CostSpec& c, double eps,
                        const FixedPointOptions& opts) {
  if (!(eps > 0)) throw InvalidArgument("ScaledNegentropy: eps must be positive");
  return Negentropy(a, c.WithEpsilon(c.epsilon() * eps), opts);
}

}  // namespace geoloss
