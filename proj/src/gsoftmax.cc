#include "geoloss/gsoftmax.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

#include "geoloss/lbfgs.hpp"

namespace geoloss {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// log Phi(softmax(l), f) and its gradient in l, for some representation of
// the kernel exp(-C / 2).
class Objective {
 public:
  virtual ~Objective() = default;
  virtual Index size() const = 0;
  virtual const Vector& scores() const = 0;
  // Returns log Phi. `log_ratio` receives log((K a)_k / Phi) with
  // K = exp(-(f + f + C) / 2); the gradient is 2 a (exp(log_ratio) - 1).
  virtual double Evaluate(const Vector& l, Vector& grad, Vector& log_ratio) const = 0;
  // Solves exp(-C_SS / 2) z = rhs on the index set S.
  virtual std::optional<Vector> SolveSupport(const std::vector<Index>& s,
                                             const Vector& rhs) const = 0;
};

void Gradient(const Vector& h, const Vector& log_ratio, Vector& grad) {
  grad.resize(h.size());
  for (Index k = 0; k < h.size(); ++k) {
    grad[k] = 2.0 * (std::exp(std::min(h[k] + log_ratio[k], 700.0)) - std::exp(h[k]));
  }
}

class DenseObjective final : public Objective {
 public:
  DenseObjective(const ScoreVector& f, const CostSpec& c) : f_(f.values()), cost_(c.Effective()) {
    const Index d = f_.size();
    exponent_.resize(d, d);
    for (Index i = 0; i < d; ++i) {
      for (Index j = 0; j < d; ++j) exponent_(i, j) = -0.5 * (f_[i] + f_[j] + cost_(i, j));
    }
  }

  Index size() const override { return f_.size(); }
  const Vector& scores() const override { return f_; }

  double Evaluate(const Vector& l, Vector& grad, Vector& log_ratio) const override {
    const Index d = l.size();
    const Vector h = l.array() - LogSumExp(l);
    Vector log_ka(d);
    for (Index k = 0; k < d; ++k) {
      double m = -kInf;
      for (Index j = 0; j < d; ++j) m = std::max(m, h[j] + exponent_(k, j));
      double sum = 0.0;
      for (Index j = 0; j < d; ++j) sum += std::exp(h[j] + exponent_(k, j) - m);
      log_ka[k] = m + std::log(sum);
    }
    const double log_phi = LogSumExp(Vector(h + log_ka));
    log_ratio = log_ka.array() - log_phi;
    Gradient(h, log_ratio, grad);
    return log_phi;
  }

  std::optional<Vector> SolveSupport(const std::vector<Index>& s,
                                     const Vector& rhs) const override {
    const Index n = static_cast<Index>(s.size());
    Matrix g(n, n);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) g(i, j) = std::exp(-0.5 * cost_(s[i], s[j]));
    }
    Eigen::LDLT<Matrix> ldlt(g);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return std::nullopt;
    Vector z = ldlt.solve(rhs);
    if (!z.allFinite() || (g * z - rhs).norm() > 1e-8 * rhs.norm()) return std::nullopt;
    return z;
  }

 private:
  Vector f_;
  Matrix cost_;
  Matrix exponent_;
};

// Separable grid kernel: 1-D Gaussian factors along height and width.
class GridKernel {
 public:
  explicit GridKernel(const CostSpec& c) {
    if (!c.separable()) throw InvalidArgument("cost has no separable 2-D form");
    const Separable2D& s = *c.separable();
    height_ = s.height;
    width_ = s.width;
    const double scale = s.sigma * c.epsilon();
    rows_ = Factor(height_, scale);
    cols_ = Factor(width_, scale);
  }

  Index height() const { return height_; }
  Index width() const { return width_; }

  // K * v for v given as an h x w matrix.
  Matrix Apply(const Matrix& v) const { return rows_ * v * cols_; }

 private:
  static Matrix Factor(Index n, double scale) {
    Matrix k(n, n);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        const double delta = static_cast<double>(i - j);
        k(i, j) = std::exp(-delta * delta / (2.0 * scale));
      }
    }
    return k;
  }

  Index height_ = 0;
  Index width_ = 0;
  Matrix rows_;
  Matrix cols_;
};

class GridObjective final : public Objective {
 public:
  GridObjective(const Vector& f, const CostSpec& c) : f_(f), kernel_(c) {
    if (f_.size() != kernel_.height() * kernel_.width()) {
      throw InvalidArgument("grid scores do not match the cost grid");
    }
  }

  Index size() const override { return f_.size(); }
  const Vector& scores() const override { return f_; }

  double Evaluate(const Vector& l, Vector& grad, Vector& log_ratio) const override {
    const Index d = l.size();
    const Vector h = l.array() - LogSumExp(l);
    const Vector e = h - 0.5 * f_;
    const double shift = e.maxCoeff();
    const Vector u = (e.array() - shift).exp();
    const Vector ku = Convolve(u);
    const double quad = u.dot(ku);
    const double log_phi = std::log(quad) + 2.0 * shift;
    log_ratio.resize(d);
    for (Index k = 0; k < d; ++k) {
      // (K a)_k = exp(-f_k / 2 + shift) * ku_k
      log_ratio[k] = ku[k] > 0 ? -0.5 * f_[k] + shift + std::log(ku[k]) - log_phi : kInf;
    }
    Gradient(h, log_ratio, grad);
    return log_phi;
  }

  std::optional<Vector> SolveSupport(const std::vector<Index>& s,
                                     const Vector& rhs) const override {
    // Conjugate gradients on the masked kernel.
    const Index n = static_cast<Index>(s.size());
    auto apply = [&](const Vector& z) {
      Vector full = Vector::Zero(f_.size());
      for (Index i = 0; i < n; ++i) full[s[i]] = z[i];
      const Vector kz = Convolve(full);
      Vector out(n);
      for (Index i = 0; i < n; ++i) out[i] = kz[s[i]];
      return out;
    };
    Vector x = Vector::Zero(n);
    Vector r = rhs;
    Vector p = r;
    double rr = r.squaredNorm();
    const double target = 1e-28 * rhs.squaredNorm();
    const int max_iter = static_cast<int>(std::max<Index>(50 * n, 1000));
    for (int it = 0; it < max_iter && rr > target; ++it) {
      const Vector ap = apply(p);
      const double pap = p.dot(ap);
      if (!(pap > 0)) return std::nullopt;
      const double step = rr / pap;
      x += step * p;
      r -= step * ap;
      const double rr_new = r.squaredNorm();
      p = r + (rr_new / rr) * p;
      rr = rr_new;
    }
    if (!x.allFinite() || (apply(x) - rhs).norm() > 1e-8 * rhs.norm()) return std::nullopt;
    return x;
  }

 private:
  Vector Convolve(const Vector& flat) const {
    const Grid2D g = Grid2D::FromFlat(flat, kernel_.height(), kernel_.width());
    return Grid2D{kernel_.Apply(g.values)}.Flatten();
  }

  Vector f_;
  GridKernel kernel_;
};

struct State {
  Vector l;
  Vector grad;
  Vector log_ratio;
  double value = 0;
};

void Recenter(Vector& l) { l.array() -= LogSumExp(l); }

// Clamps coordinates below the floor and updates the consecutive-clamp
// counters. Returns true if anything was clamped.
bool Clamp(Vector& l, double floor, std::vector<int>& clamp_count) {
  bool any = false;
  for (Index k = 0; k < l.size(); ++k) {
    if (l[k] <= floor) {
      any = any || l[k] < floor;
      l[k] = floor;
      ++clamp_count[k];
    } else {
      clamp_count[k] = 0;
    }
  }
  return any;
}

// Active-set refinement: on a candidate support S the first-order conditions
// K_SS a_S = Phi * 1 are linear. Coordinates with a nonpositive solution
// leave S; off-support coordinates with (K a)_k < Phi join it.
std::optional<State> PolishSupport(const Objective& obj, const State& start, double floor) {
  const Index d = obj.size();
  const Vector& f = obj.scores();
  const Vector weights = (start.l.array() - LogSumExp(start.l)).exp();
  const double wmax = weights.maxCoeff();
  std::vector<char> in(d, 0);
  for (Index k = 0; k < d; ++k) in[k] = weights[k] > 1e-8 * wmax;

  for (Index round = 0; round < 3 * d + 10; ++round) {
    std::vector<Index> s;
    for (Index k = 0; k < d; ++k) {
      if (in[k]) s.push_back(k);
    }
    if (s.empty()) return std::nullopt;
    const Index n = static_cast<Index>(s.size());
    double fmax = -kInf;
    for (Index k : s) fmax = std::max(fmax, f[k]);
    Vector rhs(n);
    for (Index i = 0; i < n; ++i) rhs[i] = std::exp(0.5 * (f[s[i]] - fmax));
    const std::optional<Vector> z = obj.SolveSupport(s, rhs);
    if (!z) return std::nullopt;
    const Vector x = rhs.cwiseProduct(*z);

    bool removed = false;
    for (Index i = 0; i < n; ++i) {
      if (!(x[i] > 0)) {
        in[s[i]] = 0;
        removed = true;
      }
    }
    if (removed) continue;

    State cand;
    cand.l = Vector::Constant(d, floor);
    const double total = x.sum();
    for (Index i = 0; i < n; ++i) cand.l[s[i]] = std::max(std::log(x[i] / total), floor);
    cand.value = obj.Evaluate(cand.l, cand.grad, cand.log_ratio);

    Index worst = -1;
    double worst_ratio = -1e-10;
    for (Index k = 0; k < d; ++k) {
      if (!in[k] && cand.log_ratio[k] < worst_ratio) {
        worst_ratio = cand.log_ratio[k];
        worst = k;
      }
    }
    if (worst < 0) return cand;
    in[worst] = 1;
  }
  return std::nullopt;
}

ConjugateSolution Solve(const Objective& obj, const SolverOptions& opts) {
  if (!(opts.tol > 0) || opts.max_iter < 1 || opts.lbfgs_memory < 1) {
    throw InvalidArgument("SolverOptions: tol > 0, max_iter >= 1, lbfgs_memory >= 1 required");
  }
  const Index d = obj.size();
  if (d < 1) throw InvalidArgument("SolveConjugate: empty scores");
  const double floor = opts.underflow_floor;

  std::vector<int> clamp_count(static_cast<size_t>(d), 0);
  auto frozen = [&](Index k) { return clamp_count[k] >= 3; };

  State st;
  st.l = obj.scores();
  Recenter(st.l);
  Clamp(st.l, floor, clamp_count);
  st.value = obj.Evaluate(st.l, st.grad, st.log_ratio);

  ConjugateSolution sol;
  sol.objective_trace.push_back(st.value);
  lbfgs::History history(opts.lbfgs_memory);
  int it = 0;
  Vector trial_grad, trial_ratio;
  for (; it < opts.max_iter; ++it) {
    if (st.grad.lpNorm<Eigen::Infinity>() <= opts.tol) break;

    Vector dir = -history.Apply(st.grad);
    for (Index k = 0; k < d; ++k) {
      if (frozen(k)) dir[k] = 0;
    }
    if (!(dir.dot(st.grad) < 0)) {
      history.Clear();
      dir = -st.grad;
      for (Index k = 0; k < d; ++k) {
        if (frozen(k)) dir[k] = 0;
      }
    }
    const double slope0 = dir.dot(st.grad);
    if (!(slope0 < 0)) break;
    const double step0 = history.empty() ? std::min(1.0, 1.0 / dir.lpNorm<Eigen::Infinity>()) : 1.0;

    auto line = [&](double t) {
      const double v = obj.Evaluate(st.l + t * dir, trial_grad, trial_ratio);
      return std::pair<double, double>{v, trial_grad.dot(dir)};
    };
    const lbfgs::LineSearchResult ls = lbfgs::StrongWolfe(line, st.value, slope0, step0);
    if (!ls.ok) {
      if (history.empty()) break;  // stalled along steepest descent
      history.Clear();
      continue;
    }

    State next;
    next.l = st.l + ls.step * dir;
    Recenter(next.l);
    Clamp(next.l, floor, clamp_count);
    next.value = obj.Evaluate(next.l, next.grad, next.log_ratio);

    Vector s = next.l - st.l;
    s.array() -= s.mean();
    history.Push(s, next.grad - st.grad);
    st = std::move(next);
    sol.objective_trace.push_back(st.value);
  }

  if (opts.polish_support) {
    if (std::optional<State> polished = PolishSupport(obj, st, floor)) {
      if (polished->value <= st.value + 1e-12 * std::max(1.0, std::abs(st.value))) {
        st = std::move(*polished);
        sol.support_polished = true;
        if (st.value < sol.objective_trace.back()) sol.objective_trace.push_back(st.value);
      }
    }
  }

  Recenter(st.l);
  for (Index k = 0; k < d; ++k) st.l[k] = std::max(st.l[k], floor);
  sol.value = -st.value;
  sol.log_weights = ScoreVector(st.l);
  // Clamped coordinates are outside the support: their weight is exactly 0.
  Vector w = (st.l.array() - LogSumExp(st.l)).exp();
  for (Index k = 0; k < d; ++k)
    if (st.l[k] <= floor) w[k] = 0.0;
  sol.measure = DiscreteMeasure(std::move(w));
  sol.iterations = it;
  sol.gradient_norm = st.grad.lpNorm<Eigen::Infinity>();
  sol.clamped = static_cast<int>((st.l.array() <= floor).count());
  if (!(sol.gradient_norm <= opts.tol)) throw ConjugateConvergenceError(std::move(sol));
  return sol;
}

}  // namespace

double LogPhi(const DiscreteMeasure& a, const ScoreVector& f, const CostSpec& c) {
  if (a.size() != f.size() || f.size() != c.size()) {
    throw InvalidArgument("Phi: dimension mismatch");
  }
  const std::vector<Index> s = a.Support();
  std::vector<double> terms;
  terms.reserve(s.size() * s.size());
  for (Index i : s) {
    for (Index j : s) {
      terms.push_back(std::log(a[i]) + std::log(a[j]) - 0.5 * (f[i] + f[j] + c(i, j)));
    }
  }
  return LogSumExp(terms);
}

double Phi(const DiscreteMeasure& a, const ScoreVector& f, const CostSpec& c) {
  return std::exp(LogPhi(a, f, c));
}

ConjugateSolution SolveConjugate(const ScoreVector& f, const CostSpec& c,
                                 const SolverOptions& opts) {
  if (f.size() != c.size()) {
    throw InvalidArgument("SolveConjugate: scores have " + std::to_string(f.size()) +
                          " entries but cost has " + std::to_string(c.size()));
  }
  return Solve(DenseObjective(f, c), opts);
}

double GLse(const ScoreVector& f, const CostSpec& c) { return SolveConjugate(f, c).value; }

DiscreteMeasure GSoftmax(const ScoreVector& f, const CostSpec& c) {
  return SolveConjugate(f, c).measure;
}

Grid2D SeparableKernelApply(const Grid2D& v, const CostSpec& c) {
  const GridKernel kernel(c);
  if (v.height() != kernel.height() || v.width() != kernel.width()) {
    throw InvalidArgument("SeparableKernelApply: grid shape does not match the cost");
  }
  return Grid2D{kernel.Apply(v.values)};
}

ConjugateSolution SolveConjugateGrid2D(const Grid2D& f, const CostSpec& c,
                                       const SolverOptions& opts) {
  const Vector flat = f.Flatten();
  if (!flat.allFinite()) throw InvalidArgument("SolveConjugateGrid2D: non-finite score");
  return Solve(GridObjective(flat, c), opts);
}

KernelDiagnostic KernelPdCheck(const CostSpec& c) {
  const Matrix k = (-0.5 * c.Effective().array()).exp().matrix();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(k, Eigen::EigenvaluesOnly);
  KernelDiagnostic diag;
  diag.min_eigenvalue = eig.eigenvalues().minCoeff();
  // Eigenvalues are accurate to about d * eps * ||K||.
  const double noise = 1e-13 * static_cast<double>(c.size()) * eig.eigenvalues().maxCoeff();
  diag.positive_definite = diag.min_eigenvalue > noise;
  return diag;
}

Vector FirstOrderProfile(const ScoreVector& f, const DiscreteMeasure& a, const CostSpec& c) {
  const ScoreVector t = CTransform(ScoreVector(Vector(-f.values())), a, c);
  return 0.5 * (f.values() + t.values());
}

}  // namespace geoloss
