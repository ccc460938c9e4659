#pragma once

// The conjugate of the Sinkhorn negentropy: g-LSE(f) = -log min_a Phi(a, f)
// and g-softmax(f) = argmin_a Phi(a, f), with
//   Phi(a, f) = <a x a, exp(-(f + f + C) / 2)>.
//
// The minimization runs over log-weights l with a = softmax(l). The objective
// log Phi(softmax(l), f) is invariant to l + c*1, so l is re-centered to
// LSE(l) = 0 after every step. Coordinates that fall below the underflow
// floor are clamped there and, after three consecutive clamps, frozen.
// Once L-BFGS stops, the support it found is refined by an active-set pass
// that solves the first-order conditions on the support exactly.

#include <optional>
#include <vector>

#include "geoloss/error.hpp"
#include "geoloss/measures.hpp"

namespace geoloss {

struct SolverOptions {
  double tol = 1e-8;  // sup-norm of the gradient in log-weight space
  int max_iter = 500;
  int lbfgs_memory = 10;
  double underflow_floor = -745.0;
  bool polish_support = true;
};

struct ConjugateSolution {
  double value = 0;             // g-LSE(f)
  DiscreteMeasure measure;      // g-softmax(f)
  ScoreVector log_weights;      // LSE(log_weights) = 0
  int iterations = 0;
  double gradient_norm = 0;
  int clamped = 0;              // coordinates sitting at the underflow floor
  bool support_polished = false;
  std::vector<double> objective_trace;  // log Phi after each accepted step
};

// Raised when the gradient tolerance is not met; carries the best iterate.
class ConjugateConvergenceError : public ConvergenceError {
 public:
  ConjugateConvergenceError(ConjugateSolution best)
      : ConvergenceError("conjugate solver did not converge", best.gradient_norm,
                         best.iterations, best.objective_trace),
        best_(std::move(best)) {}
  const ConjugateSolution& best() const { return best_; }

 private:
  ConjugateSolution best_;
};

double LogPhi(const DiscreteMeasure& a, const ScoreVector& f, const CostSpec& c);
double Phi(const DiscreteMeasure& a, const ScoreVector& f, const CostSpec& c);

ConjugateSolution SolveConjugate(const ScoreVector& f, const CostSpec& c,
                                 const SolverOptions& opts = {});

double GLse(const ScoreVector& f, const CostSpec& c);
DiscreteMeasure GSoftmax(const ScoreVector& f, const CostSpec& c);

// (K * v) with K = exp(-C / 2) for the separable grid cost, computed as a
// row convolution followed by a column convolution.
Grid2D SeparableKernelApply(const Grid2D& v, const CostSpec& c);

// Same contract as SolveConjugate; Phi and its gradient go through
// SeparableKernelApply. The measure is flattened row-major.
ConjugateSolution SolveConjugateGrid2D(const Grid2D& f, const CostSpec& c,
                                       const SolverOptions& opts = {});

struct KernelDiagnostic {
  double min_eigenvalue = 0;
  bool positive_definite = false;
};

// Smallest eigenvalue of exp(-C / 2). Advisory only.
KernelDiagnostic KernelPdCheck(const CostSpec& c);

// (f + T(-f, a)) / 2 at every point. At a = g-softmax(f) this equals
// g-LSE(f) on the support and is no larger elsewhere.
Vector FirstOrderProfile(const ScoreVector& f, const DiscreteMeasure& a, const CostSpec& c);

}  // namespace geoloss
