#include <cmath>
#include <functional>
#include <ostream>
#include <random>
#include <string>

#include "cli.hpp"
#include "geoloss/gsoftmax.hpp"
#include "geoloss/losses.hpp"
#include "geoloss/sinkhorn.hpp"

namespace geoloss::cli {

namespace {

// Squared distances between random points, so exp(-C/2) is positive definite.
CostSpec RandomCost(std::mt19937_64& rng, Index d) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix x(d, 2);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < 2; ++j) x(i, j) = normal(rng);
  Matrix c(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) c(i, j) = (x.row(i) - x.row(j)).squaredNorm();
  return CostSpec(c);
}

DiscreteMeasure RandomMeasure(std::mt19937_64& rng, Index d) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Vector w(d);
  for (Index i = 0; i < d; ++i) w[i] = u(rng);
  return DiscreteMeasure(w);
}

ScoreVector RandomScores(std::mt19937_64& rng, Index d) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector f(d);
  for (Index i = 0; i < d; ++i) f[i] = normal(rng);
  return ScoreVector(f);
}

}  // namespace

bool RunSelfTest(unsigned long long seed, std::ostream& out) {
  std::mt19937_64 rng(seed);
  bool all = true;
  auto check = [&](const std::string& name, const std::function<std::string()>& body) {
    std::string failure;
    try {
      failure = body();
    } catch (const std::exception& e) {
      failure = std::string("exception: ") + e.what();
    }
    out << (failure.empty() ? "PASS " : "FAIL ") << name;
    if (!failure.empty()) out << ": " << failure;
    out << '\n';
    all = all && failure.empty();
  };

  check("dirac closed forms", [&]() -> std::string {
    const CostSpec c = RandomCost(rng, 5);
    for (Index j = 0; j < 5; ++j) {
      const DiscreteMeasure dj = DiscreteMeasure::Dirac(5, j);
      const PotentialResult p = SymmetricPotential(dj, c);
      if (std::abs(p.negentropy) > 1e-6) return "Omega(delta) != 0";
      for (Index i = 0; i < 5; ++i) {
        if (std::abs(p.potential[i] + c(i, j)) > 1e-6) return "potential != -C(., j)";
        const double d = HausdorffDivergence(DiscreteMeasure::Dirac(5, i), dj, c);
        if (std::abs(d - c(i, j)) > 1e-6) return "D(delta_i, delta_j) != C_ij";
      }
    }
    return "";
  });

  check("uniform binary constants", [&]() -> std::string {
    Matrix m(2, 2);
    m << 0, 1, 1, 0;
    const CostSpec c(m);
    const double k = std::log((1 + std::exp(-0.5)) / 2);
    if (std::abs(Negentropy(DiscreteMeasure::Uniform(2), c) - k) > 1e-6) return "Omega(u2)";
    if (std::abs(GLse(ScoreVector(Vector::Zero(2)), c) + k) > 1e-6) return "g-LSE(0)";
    return "";
  });

  check("round trip", [&]() -> std::string {
    for (int t = 0; t < 10; ++t) {
      const Index d = 2 + static_cast<Index>(rng() % 10);
      const CostSpec c = RandomCost(rng, d);
      const DiscreteMeasure a = RandomMeasure(rng, d);
      const ConjugateSolution s = SolveConjugate(SymmetricPotential(a, c).potential, c);
      if ((s.measure.weights() - a.weights()).lpNorm<1>() > 1e-5) return "measure mismatch";
      if (std::abs(s.value) > 1e-6) return "g-LSE not 0";
    }
    return "";
  });

  check("g-LSE gradient vs finite differences", [&]() -> std::string {
    for (int t = 0; t < 5; ++t) {
      const Index d = 2 + static_cast<Index>(rng() % 6);
      const CostSpec c = RandomCost(rng, d);
      const ScoreVector f = RandomScores(rng, d);
      const Vector g = SolveConjugate(f, c).measure.weights();
      Vector fd(d);
      for (Index i = 0; i < d; ++i) {
        Vector p = f.values(), m = f.values();
        p[i] += 1e-5;
        m[i] -= 1e-5;
        fd[i] = (GLse(ScoreVector(p), c) - GLse(ScoreVector(m), c)) / 2e-5;
      }
      if ((fd - g).norm() > 1e-4 * std::max(1.0, g.norm())) return "gradient mismatch";
    }
    return "";
  });

  check("loss decomposition", [&]() -> std::string {
    for (int t = 0; t < 10; ++t) {
      const Index d = 2 + static_cast<Index>(rng() % 6);
      const CostSpec c = RandomCost(rng, d);
      const UpperBoundCheck u = CheckUpperBound(RandomMeasure(rng, d), RandomScores(rng, d), c);
      if (!u.identity_holds) return "identity fails";
      if (u.divergence > u.loss + 1e-8) return "bound fails";
    }
    return "";
  });

  check("extrapolation", [&]() -> std::string {
    for (int t = 0; t < 10; ++t) {
      const Index d = 2 + static_cast<Index>(rng() % 6);
      const CostSpec c = RandomCost(rng, d);
      const ScoreVector f = RandomScores(rng, d);
      const ConjugateSolution s = SolveConjugate(f, c);
      const ScoreVector fe = Extrapolate(f, c, s);
      for (Index i = 0; i < d; ++i) {
        if (fe[i] < f[i] - 1e-9) return "f^E < f";
        if (s.measure.InSupport(i) && std::abs(fe[i] - f[i]) > 1e-6) return "f^E != f on support";
      }
      if ((Extrapolate(fe, c).values() - fe.values()).lpNorm<Eigen::Infinity>() > 1e-6)
        return "not idempotent";
    }
    return "";
  });

  check("separable grid solver", [&]() -> std::string {
    const CostSpec grid = CostSpec::Separable(4, 4, 2.0);
    Grid2D f{Matrix(4, 4)};
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Index i = 0; i < 4; ++i)
      for (Index j = 0; j < 4; ++j) f.values(i, j) = normal(rng);
    const ConjugateSolution a = SolveConjugateGrid2D(f, grid);
    const ConjugateSolution b = SolveConjugate(ScoreVector(f.Flatten()), grid.Materialized());
    if (std::abs(a.value - b.value) > 1e-6) return "value mismatch";
    if ((a.measure.weights() - b.measure.weights()).lpNorm<Eigen::Infinity>() > 1e-6)
      return "measure mismatch";
    return "";
  });

  check("primal transport cross-check", [&]() -> std::string {
    for (int t = 0; t < 5; ++t) {
      const Index d = 2 + static_cast<Index>(rng() % 8);
      const CostSpec c = RandomCost(rng, d);
      const DiscreteMeasure a = RandomMeasure(rng, d);
      const double primal = -0.5 * SinkhornOT(a, a, c, 2.0).value;
      if (std::abs(primal - Negentropy(a, c)) > 1e-6) return "dual and primal disagree";
    }
    return "";
  });

  out << (all ? "selftest passed" : "selftest FAILED") << '\n';
  return all;
}

}  // namespace geoloss::cli
