#pragma once

// Fenchel-Young (g-logistic) loss built on the Sinkhorn negentropy, the
// extrapolation operator, the asymmetric Hausdorff divergence, and the
// cost-augmented hinge / logistic baselines.

#include "geoloss/gsoftmax.hpp"
#include "geoloss/measures.hpp"
#include "geoloss/sinkhorn.hpp"

namespace geoloss {

struct LossOptions {
  SolverOptions conjugate;
  FixedPointOptions potential;
};

struct LossValue {
  double value = 0;
  ScoreVector gradient;  // g-softmax(f) - a
};

// l(a, f) = g-LSE(f) + Omega(a) - <a, f>. Omega(a) comes from the fixed
// point solver and g-LSE from the quasi-Newton solver.
LossValue FyLoss(const DiscreteMeasure& a, const ScoreVector& f, const CostSpec& c,
                 const LossOptions& opts = {});

// Same, reusing a conjugate solution already computed for f.
LossValue FyLoss(const DiscreteMeasure& a, const ScoreVector& f, const CostSpec& c,
                 const ConjugateSolution& conj, const LossOptions& opts = {});

// f^E = -T(-(f - g-LSE(f)), g-softmax(f)) + g-LSE(f).
ScoreVector Extrapolate(const ScoreVector& f, const CostSpec& c, const LossOptions& opts = {});
ScoreVector Extrapolate(const ScoreVector& f, const CostSpec& c, const ConjugateSolution& conj);

// D(a, b) = Omega(a) - Omega(b) - <grad Omega(b), a - b>, with grad Omega(b)
// the symmetric potential of b extended to every point.
double HausdorffDivergence(const DiscreteMeasure& a, const DiscreteMeasure& b,
                           const CostSpec& c, const FixedPointOptions& opts = {});

// D(delta_y, g-softmax(f)) = g-LSE(f) - f^E_y, using that the extended
// potential of g-softmax(f) is f^E - g-LSE(f). One C-transform, no fixed point.
double DiracHausdorff(Index y, const ScoreVector& f, const CostSpec& c,
                      const ConjugateSolution& conj);

struct UpperBoundCheck {
  double divergence = 0;  // D(a, g-softmax(f))
  double loss = 0;        // l(a, f)
  double slack = 0;       // <a, f^E - f>
  // |divergence - (loss - slack)|
  double decomposition_error = 0;
  bool identity_holds = false;  // decomposition_error <= 1e-6 and slack >= -1e-8
};

UpperBoundCheck CheckUpperBound(const DiscreteMeasure& a, const ScoreVector& f,
                                const CostSpec& c, const LossOptions& opts = {});

// max_i c_{y,i} + f_i - f_y. Class indices are 0-based.
double CostAugmentedHinge(Index y, const ScoreVector& f, const CostSpec& c);
// LSE_i (c_{y,i} + f_i) - f_y.
double CostAugmentedLogistic(Index y, const ScoreVector& f, const CostSpec& c);

}  // namespace geoloss
