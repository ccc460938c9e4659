#pragma once

// Sinkhorn negentropy Omega(a) = -OT_{C,2}(a, a) / 2, its gradient (the
// symmetric Sinkhorn potential) and a reference entropic OT solver.

#include "geoloss/measures.hpp"

namespace geoloss {

struct FixedPointOptions {
  double tol = 1e-9;  // sup-norm of the fixed-point defect
  int max_iter = 10000;
};

struct PotentialResult {
  ScoreVector potential;  // f = grad Omega(a), defined on every point
  double negentropy = 0;  // Omega(a)
  int iterations = 0;
  double residual = 0;    // sup over supp(a) of |(-f) - T(-f, a)|
};

struct TransportPlan {
  Matrix matrix;
};

struct TransportResult {
  double value = 0;  // <pi, C> + eps KL(pi | a x b)
  TransportPlan plan;
  int iterations = 0;
  double marginal_error = 0;
};

// Entropic OT between a and b with cost c (effective, i.e. C / c.epsilon())
// and regularization eps, by log-domain alternating updates.
// Throws ConvergenceError if the marginal sup-error stays above tol.
TransportResult SinkhornOT(const DiscreteMeasure& a, const DiscreteMeasure& b,
                           const CostSpec& c, double eps, double tol = 1e-10,
                           int max_iter = 100000);

// Solves -f = T(-f, a) with the averaged update g <- (g + T(g, a)) / 2 on
// supp(a), then extends f to every point with one more C-transform.
// Throws ConvergenceError carrying the defect trace.
PotentialResult SymmetricPotential(const DiscreteMeasure& a, const CostSpec& c,
                                   const FixedPointOptions& opts = {});

// Omega(a), from the homogeneous dual evaluated at the symmetric potential.
double Negentropy(const DiscreteMeasure& a, const CostSpec& c,
                  const FixedPointOptions& opts = {});

// Omega_{C/eps}(a).
double ScaledNegentropy(const DiscreteMeasure& a, const CostSpec& c, double eps,
                        const FixedPointOptions& opts = {});

// Value of the homogeneous dual objective at g, restricted to supp(a):
//   <a, g> - log <a x a, exp((g + g - C) / 2)>.
double HomogeneousDual(const DiscreteMeasure& a, const ScoreVector& g, const CostSpec& c);

}  // namespace geoloss
