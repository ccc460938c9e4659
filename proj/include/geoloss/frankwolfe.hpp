#pragma once

// Frank-Wolfe minimization of Phi_f(a) = <a x a, exp(-(f + f + C) / 2)> over
// probability measures on a finite grid, adding one Dirac per iteration.

#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include "geoloss/measures.hpp"

namespace geoloss {

// Finitely many (index, weight) atoms on a grid of `dimension` points.
// Atoms are kept sorted by index; indices are unique.
class SparseMeasure {
 public:
  SparseMeasure() = default;
  // Duplicate indices are merged; zero weights dropped; weights renormalized.
  SparseMeasure(Index dimension, std::vector<std::pair<Index, double>> atoms);
  static SparseMeasure FromDense(const DiscreteMeasure& a);

  Index dimension() const { return dimension_; }
  const std::vector<std::pair<Index, double>>& atoms() const { return atoms_; }
  DiscreteMeasure ToDense() const;

 private:
  Index dimension_ = 0;
  std::vector<std::pair<Index, double>> atoms_;
};

struct FWStep {
  int iteration = 0;   // 0 is the initial point
  double objective = 0;  // Phi_f(a_t)
  Index atom = -1;     // selected grid index, -1 for the initial row
  double step = 0;     // gamma_t
};

struct FWTrace {
  std::vector<FWStep> steps;
  void WriteCsv(std::ostream& out) const;
};

enum class StepRule { kClassic, kLineSearch };

struct FWOptions {
  int iterations = 100;
  StepRule step_rule = StepRule::kClassic;
  // Starting measure, uniform if unset.
  std::optional<DiscreteMeasure> initial;
  // Classic step is 2 / (t + first_t + 2) at the t-th update (t = 0, 1, ...).
  int first_t = 0;
};

struct FWResult {
  SparseMeasure measure;
  FWTrace trace;
};

// exp(-(f + T(-f, a)) / 2) on every grid point, computed in the log domain.
// Equal to (K a) with K_ij = exp(-(f_i + f_j + C_ij) / 2).
Vector PhiGradient(const ScoreVector& f, const DiscreteMeasure& a, const CostSpec& c);
Vector PhiGradient(const ScoreVector& f, const SparseMeasure& a, const CostSpec& c);

// Lowest index attaining the minimum.
Index LinearMinimizationOracle(const Vector& gradient);

FWResult FwMinimize(const ScoreVector& f, const CostSpec& c, const FWOptions& opts = {});

}  // namespace geoloss
