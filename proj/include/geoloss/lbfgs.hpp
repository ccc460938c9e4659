#pragma once

// Limited-memory BFGS building blocks: the two-loop inverse-Hessian product
// and a strong-Wolfe line search (bracketing + safeguarded cubic zoom).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <utility>
#include <vector>

namespace geoloss::lbfgs {

class History {
 public:
  explicit History(int memory) : memory_(std::max(memory, 1)) {}

  // Stores the pair if it has positive curvature; returns whether it did.
  bool Push(const Eigen::VectorXd& s, const Eigen::VectorXd& y) {
    const double sy = s.dot(y);
    if (!(sy > 1e-16 * s.norm() * y.norm()) || !(sy > 0)) return false;
    if (static_cast<int>(pairs_.size()) == memory_) pairs_.pop_front();
    pairs_.push_back({s, y, 1.0 / sy});
    return true;
  }

  void Clear() { pairs_.clear(); }
  bool empty() const { return pairs_.empty(); }

  // Returns H * g for the implicit inverse-Hessian approximation.
  Eigen::VectorXd Apply(const Eigen::VectorXd& g) const {
    Eigen::VectorXd q = g;
    std::vector<double> alpha(pairs_.size());
    for (size_t k = pairs_.size(); k-- > 0;) {
      alpha[k] = pairs_[k].rho * pairs_[k].s.dot(q);
      q -= alpha[k] * pairs_[k].y;
    }
    if (!pairs_.empty()) {
      const Pair& last = pairs_.back();
      q *= 1.0 / (last.rho * last.y.squaredNorm());
    }
    for (size_t k = 0; k < pairs_.size(); ++k) {
      const double beta = pairs_[k].rho * pairs_[k].y.dot(q);
      q += (alpha[k] - beta) * pairs_[k].s;
    }
    return q;
  }

 private:
  struct Pair {
    Eigen::VectorXd s;
    Eigen::VectorXd y;
    double rho;
  };
  int memory_;
  std::deque<Pair> pairs_;
};

struct LineSearchOptions {
  double c1 = 1e-4;
  double c2 = 0.9;
  double max_step = 1e10;
  int max_evals = 40;
};

struct LineSearchResult {
  bool ok = false;
  double step = 0;
  double value = 0;
  double slope = 0;
  int evals = 0;
};

namespace detail {

// Minimizer of the cubic interpolating (a, fa, ga) and (b, fb, gb), kept
// safely inside the interval; falls back to bisection.
inline double CubicStep(double a, double fa, double ga, double b, double fb, double gb) {
  const double lo = std::min(a, b);
  const double hi = std::max(a, b);
  const double d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - ga * gb;
  double t = 0.5 * (a + b);
  if (disc >= 0) {
    const double d2 = std::copysign(std::sqrt(disc), b - a);
    const double denom = gb - ga + 2.0 * d2;
    if (denom != 0) t = b - (b - a) * (gb + d2 - d1) / denom;
  }
  const double margin = 0.1 * (hi - lo);
  if (!std::isfinite(t) || t < lo + margin || t > hi - margin) t = 0.5 * (a + b);
  return t;
}

}  // namespace detail

// `phi(step)` returns {value, directional derivative} along the search line.
// f0 and g0 are the value and slope at step 0 (g0 < 0 required).
template <class Phi>
LineSearchResult StrongWolfe(Phi&& phi, double f0, double g0, double step0,
                             const LineSearchOptions& opt = {}) {
  LineSearchResult r;
  if (!(g0 < 0)) return r;
  double prev_step = 0.0, prev_f = f0, prev_g = g0;
  double step = std::min(step0, opt.max_step);

  auto zoom = [&](double lo, double flo, double glo, double hi, double fhi, double ghi) {
    while (r.evals < opt.max_evals) {
      const double t = detail::CubicStep(lo, flo, glo, hi, fhi, ghi);
      auto [ft, gt] = phi(t);
      ++r.evals;
      if (!std::isfinite(ft) || ft > f0 + opt.c1 * t * g0 || ft >= flo) {
        hi = t;
        fhi = std::isfinite(ft) ? ft : fhi;
        ghi = std::isfinite(gt) ? gt : ghi;
      } else {
        if (std::abs(gt) <= -opt.c2 * g0) {
          r = {true, t, ft, gt, r.evals};
          return;
        }
        if (gt * (hi - lo) >= 0) {
          hi = lo;
          fhi = flo;
          ghi = glo;
        }
        lo = t;
        flo = ft;
        glo = gt;
      }
      if (std::abs(hi - lo) <= 1e-14 * std::max(1.0, std::abs(lo))) break;
    }
    // Out of budget: accept the best sufficient-decrease point if any.
    if (lo > 0 && flo < f0) r = {true, lo, flo, glo, r.evals};
  };

  for (int i = 0; r.evals < opt.max_evals; ++i) {
    auto [f, g] = phi(step);
    ++r.evals;
    if (!std::isfinite(f) || f > f0 + opt.c1 * step * g0 || (i > 0 && f >= prev_f)) {
      if (!std::isfinite(f)) {
        // Shrink until finite before zooming.
        step = 0.5 * (prev_step + step);
        continue;
      }
      zoom(prev_step, prev_f, prev_g, step, f, g);
      return r;
    }
    if (std::abs(g) <= -opt.c2 * g0) {
      r = {true, step, f, g, r.evals};
      return r;
    }
    if (g >= 0) {
      zoom(step, f, g, prev_step, prev_f, prev_g);
      return r;
    }
    prev_step = step;
    prev_f = f;
    prev_g = g;
    if (step >= opt.max_step) break;
    step = std::min(2.0 * step, opt.max_step);
  }
  if (prev_step > 0 && prev_f < f0) r = {true, prev_step, prev_f, prev_g, r.evals};
  return r;
}

}  // namespace geoloss::lbfgs
