#include "geoloss/frankwolfe.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>

#include "geoloss/error.hpp"
#include "geoloss/gsoftmax.hpp"

namespace geoloss {

SparseMeasure::SparseMeasure(Index dimension, std::vector<std::pair<Index, double>> atoms)
    : dimension_(dimension) {
  std::map<Index, double> merged;
  for (const auto& [i, w] : atoms) {
    if (i < 0 || i >= dimension) throw InvalidArgument("atom index out of range");
    if (!(w >= 0) || !std::isfinite(w)) throw InvalidArgument("atom weight must be finite and >= 0");
    merged[i] += w;
  }
  double total = 0;
  for (const auto& [i, w] : merged) total += w;
  if (!(total > 0)) throw InvalidArgument("sparse measure has no mass");
  for (const auto& [i, w] : merged)
    if (w > 0) atoms_.emplace_back(i, w / total);
}

SparseMeasure SparseMeasure::FromDense(const DiscreteMeasure& a) {
  std::vector<std::pair<Index, double>> atoms;
  for (Index i = 0; i < a.size(); ++i)
    if (a[i] > 0) atoms.emplace_back(i, a[i]);
  return SparseMeasure(a.size(), std::move(atoms));
}

DiscreteMeasure SparseMeasure::ToDense() const {
  Vector w = Vector::Zero(dimension_);
  for (const auto& [i, v] : atoms_) w[i] = v;
  return DiscreteMeasure(std::move(w));
}

void FWTrace::WriteCsv(std::ostream& out) const {
  out << "iteration,objective,atom,step\n";
  out << std::setprecision(17);
  for (const FWStep& s : steps)
    out << s.iteration << ',' << s.objective << ',' << s.atom << ',' << s.step << '\n';
}

namespace {

// log (K a)_y for every y.
Vector LogPhiGradient(const ScoreVector& f, const DiscreteMeasure& a, const CostSpec& c) {
  if (f.size() != a.size() || f.size() != c.size())
    throw InvalidArgument("PhiGradient: dimension mismatch");
  const std::vector<Index> support = a.Support();
  if (support.empty()) throw InvalidArgument("PhiGradient: empty support");
  Vector neg_f(support.size()), logw(support.size());
  for (size_t k = 0; k < support.size(); ++k) {
    neg_f[k] = -f[support[k]];
    logw[k] = std::log(a[support[k]]);
  }
  const Vector t = CTransformLog(neg_f, support, logw, c);
  return -0.5 * (f.values() + t);
}

}  // namespace

Vector PhiGradient(const ScoreVector& f, const DiscreteMeasure& a, const CostSpec& c) {
  return LogPhiGradient(f, a, c).array().exp();
}

Vector PhiGradient(const ScoreVector& f, const SparseMeasure& a, const CostSpec& c) {
  return PhiGradient(f, a.ToDense(), c);
}

Index LinearMinimizationOracle(const Vector& gradient) {
  if (gradient.size() == 0) throw InvalidArgument("empty gradient");
  Index best = 0;
  for (Index i = 1; i < gradient.size(); ++i)
    if (gradient[i] < gradient[best]) best = i;
  return best;
}

FWResult FwMinimize(const ScoreVector& f, const CostSpec& c, const FWOptions& opts) {
  const Index d = f.size();
  if (d != c.size()) throw InvalidArgument("FwMinimize: dimension mismatch");
  if (opts.iterations < 1) throw InvalidArgument("FwMinimize: iterations must be >= 1");
  Vector w = opts.initial ? opts.initial->weights() : DiscreteMeasure::Uniform(d).weights();
  if (w.size() != d) throw InvalidArgument("FwMinimize: initial measure has wrong dimension");

  FWResult result;
  double log_phi = LogPhi(DiscreteMeasure(w), f, c);
  result.trace.steps.push_back({0, std::exp(log_phi), -1, 0.0});

  for (int t = 0; t < opts.iterations; ++t) {
    const DiscreteMeasure a(w);
    const Vector log_grad = LogPhiGradient(f, a, c);
    const Index y = LinearMinimizationOracle(log_grad);  // exp is monotone

    double gamma;
    if (opts.step_rule == StepRule::kClassic) {
      gamma = 2.0 / (t + opts.first_t + 2.0);
    } else {
      // Phi along the segment, divided by Phi(a):
      //   (1-g)^2 + 2 g (1-g) r1 + g^2 r2,  r1 = (Ka)_y / Phi,  r2 = K_yy / Phi.
      const double r1 = std::exp(log_grad[y] - log_phi);
      const double r2 = std::exp(-f[y] - 0.5 * c(y, y) - log_phi);
      const double curvature = 1.0 - 2.0 * r1 + r2;
      auto value = [&](double g) { return (1 - g) * (1 - g) + 2 * g * (1 - g) * r1 + g * g * r2; };
      if (curvature > 0) {
        gamma = std::clamp((1.0 - r1) / curvature, 0.0, 1.0);
      } else {
        gamma = value(1.0) < value(0.0) ? 1.0 : 0.0;
      }
    }

    Vector next = (1.0 - gamma) * w;
    next[y] += gamma;
    double next_log_phi = LogPhi(DiscreteMeasure(next), f, c);
    if (opts.step_rule == StepRule::kLineSearch && next_log_phi > log_phi) {
      // Rounding made the step useless; stay put.
      gamma = 0.0;
      next = w;
      next_log_phi = log_phi;
    }
    w = std::move(next);
    log_phi = next_log_phi;
    result.trace.steps.push_back({t + 1, std::exp(log_phi), y, gamma});
  }
  result.measure = SparseMeasure::FromDense(DiscreteMeasure(w));
  return result;
}

}  // namespace geoloss
