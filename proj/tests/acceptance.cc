// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <string>
#include <vector>

#include "geoloss/frankwolfe.hpp"
#include "geoloss/gsoftmax.hpp"
#include "geoloss/losses.hpp"
#include "geoloss/measures.hpp"
#include "geoloss/ordinal.hpp"
#include "geoloss/sinkhorn.hpp"
#include "test_util.hpp"

namespace geoloss {
namespace {

using testing::Rng;

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Tracks the worst value of some error measure against a bound.
struct Worst {
  double value = 0;
  void Update(double v) { value = std::max(value, std::isnan(v) ? INFINITY : v); }
  bool Within(double bound) const { return value <= bound; }
};

std::string Fmt(const char* format, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double SupDiff(const Vector& a, const Vector& b) { return (a - b).lpNorm<Eigen::Infinity>(); }

Outcome ClosedForms() {
  Rng rng(1001);
  Worst err;
  for (int t = 0; t < 20; ++t) {
    const Index d = testing::UniformIndex(rng, 2, 12);
    const CostSpec c = testing::RandomSymmetricCost(rng, d, 3.0);
    const Index i = testing::UniformIndex(rng, 0, d - 1), j = testing::UniformIndex(rng, 0, d - 1);
    const PotentialResult p = SymmetricPotential(DiscreteMeasure::Dirac(d, j), c);
    err.Update(std::abs(p.negentropy));
    err.Update(SupDiff(p.potential.values(), -c.Effective().col(j)));
    err.Update(std::abs(HausdorffDivergence(DiscreteMeasure::Dirac(d, i),
                                            DiscreteMeasure::Dirac(d, j), c) -
                        c(i, j)));
  }
  const CostSpec zero_one(testing::OneMinusIdentity(2));
  const double closed = std::log((1.0 + std::exp(-0.5)) / 2.0);
  const double omega = Negentropy(DiscreteMeasure::Uniform(2), zero_one);
  const double glse = GLse(ScoreVector(Vector::Zero(2)), zero_one);
  err.Update(std::abs(omega - closed));
  err.Update(std::abs(glse + closed));
  return {err.Within(1e-6),
          Fmt("worst error %.2e; Omega(u2) = %.9f, g-LSE(0) = %.9f", err.value, omega, glse)};
}

Outcome RoundTrip() {
  Rng rng(1002);
  Worst l1, value;
  for (int t = 0; t < 100; ++t) {
    const Index d = testing::UniformIndex(rng, 2, 32);
    const CostSpec c = testing::RandomPdCost(rng, d);
    const DiscreteMeasure a = testing::RandomMeasure(rng, d);
    const ConjugateSolution s = SolveConjugate(SymmetricPotential(a, c).potential, c);
    l1.Update((s.measure.weights() - a.weights()).lpNorm<1>());
    value.Update(std::abs(s.value));
  }
  return {l1.Within(1e-5) && value.Within(1e-6),
          Fmt("max l1 %.2e, max |g-LSE| %.2e over 100 instances", l1.value, value.value)};
}

Outcome BruteForce() {
  Rng rng(1003);
  Worst measure, value;
  for (int t = 0; t < 50; ++t) {
    const Index d = t % 2 == 0 ? 2 : 3;
    const Matrix c = testing::RandomPdCostMatrix(rng, d, testing::Uniform(rng, 0.3, 3.0));
    const ScoreVector f = testing::RandomScores(rng, d);
    const testing::SimplexSearchResult oracle = testing::SimplexGridSearch(f.values(), c);
    const ConjugateSolution s = SolveConjugate(f, CostSpec(c));
    measure.Update(SupDiff(s.measure.weights(), oracle.argmin));
    value.Update(std::abs(s.value + std::log(oracle.min_phi)));
  }
  return {measure.Within(2e-3) && value.Within(1e-4),
          Fmt("max measure diff %.2e, max value diff %.2e", measure.value, value.value)};
}

Outcome GradientConsistency() {
  Rng rng(1004);
  Worst rel;
  for (int t = 0; t < 50; ++t) {
    const Index d = testing::UniformIndex(rng, 2, 16);
    const CostSpec c = testing::RandomPdCost(rng, d);
    const ScoreVector f = testing::RandomScores(rng, d);
    const Vector g = GSoftmax(f, c).weights();
    const Vector fd = testing::CentralDifference(
        [&](const Vector& x) { return GLse(ScoreVector(x), c); }, f.values(), 1e-5);
    rel.Update(SupDiff(fd, g) / std::max(1.0, g.lpNorm<Eigen::Infinity>()));
  }
  return {rel.Within(1e-4), Fmt("max relative error %.2e", rel.value)};
}

Outcome Asymptotics() {
  Rng rng(1005);
  Worst shannon, gini, kernel;
  for (int t = 0; t < 20; ++t) {
    const Index d = testing::UniformIndex(rng, 2, 8);
    const CostSpec c(testing::OneMinusIdentity(d));
    const DiscreteMeasure a = testing::RandomMeasure(rng, d);
    shannon.Update(std::abs(ScaledNegentropy(a, c, 1e-3) - ShannonNegentropy(a)));
    gini.Update(std::abs(1e3 * ScaledNegentropy(a, c, 1e3) - GiniNegentropy(a)));
    const CostSpec g = testing::RandomSymmetricCost(rng, d, 3.0);
    const DiscreteMeasure b = testing::RandomMeasure(rng, d);
    const double limit = -0.5 * b.weights().dot(g.base_matrix() * b.weights());
    kernel.Update(std::abs(1e3 * ScaledNegentropy(b, g, 1e3) - limit));
  }
  return {shannon.Within(1e-2) && gini.Within(1e-2) && kernel.Within(1e-2),
          Fmt("Shannon %.2e, quadratic %.2e, kernel norm %.2e", shannon.value, gini.value,
              kernel.value)};
}

Outcome Limits() {
  Rng rng(1006);
  Worst soft, sparse;
  for (int t = 0; t < 20; ++t) {
    const Index d = testing::UniformIndex(rng, 2, 8);
    const ScoreVector f = testing::RandomScores(rng, d);
    soft.Update(SupDiff(GSoftmax(f, CostSpec(testing::OneMinusIdentity(d), 1e-3)).weights(),
                        Softmax(f).weights()));
    const double eps = 1e3;
    const ScoreVector g = testing::RandomScores(rng, d, 0.5);
    const ScoreVector scaled(Vector(g.values() / eps));
    sparse.Update(SupDiff(GSoftmax(scaled, CostSpec(testing::OneMinusIdentity(d), eps)).weights(),
                          Sparsemax(g).weights()));
  }
  return {soft.Within(1e-2) && sparse.Within(1e-2),
          Fmt("softmax %.2e, sparsemax %.2e", soft.value, sparse.value)};
}

Outcome UpperBound() {
  Rng rng(1007);
  Worst excess, decomposition, negative_slack, equality;
  for (int t = 0; t < 100; ++t) {
    const Index d = testing::UniformIndex(rng, 2, 8);
    const CostSpec c = t % 2 ? testing::RandomPdCost(rng, d) : CostSpec(testing::OneMinusIdentity(d));
    const ScoreVector f = testing::RandomScores(rng, d, 2.0);
    const UpperBoundCheck u = CheckUpperBound(testing::RandomSparseMeasure(rng, d), f, c);
    excess.Update(u.divergence - u.loss);
    decomposition.Update(u.decomposition_error);
    negative_slack.Update(-u.slack);
    // A second measure supported exactly where g-softmax(f) is.
    const DiscreteMeasure g = GSoftmax(f, c);
    Vector w = testing::RandomFullSupportWeights(rng, d);
    for (Index i = 0; i < d; ++i)
      if (!g.InSupport(i)) w[i] = 0;
    const UpperBoundCheck e = CheckUpperBound(DiscreteMeasure(w), f, c);
    equality.Update(std::abs(e.divergence - e.loss));
  }
  return {excess.Within(1e-8) && decomposition.Within(1e-6) && negative_slack.Within(1e-9) &&
              equality.Within(1e-6),
          Fmt("max D - loss %.2e, decomposition %.2e, min slack %.2e, equal-support gap %.2e",
              excess.value, decomposition.value, -negative_slack.value, equality.value)};
}

Outcome Extrapolation() {
  Rng rng(1008);
  Worst below, support, idempotence, translation;
  for (int t = 0; t < 50; ++t) {
    const Index d = testing::UniformIndex(rng, 2, 12);
    const CostSpec c = t % 2 ? testing::RandomPdCost(rng, d) : CostSpec(testing::OneMinusIdentity(d));
    const ScoreVector f = testing::RandomScores(rng, d, 2.0);
    const ConjugateSolution s = SolveConjugate(f, c);
    const ScoreVector fe = Extrapolate(f, c, s);
    for (Index i = 0; i < d; ++i) {
      below.Update(f[i] - fe[i]);
      if (s.measure.InSupport(i)) support.Update(std::abs(fe[i] - f[i]));
    }
    idempotence.Update(SupDiff(Extrapolate(fe, c).values(), fe.values()));
    const double shift = testing::Uniform(rng, -5, 5);
    translation.Update(SupDiff(Extrapolate(f.Shifted(shift), c).values(), fe.Shifted(shift).values()));
  }
  return {below.Within(1e-9) && support.Within(1e-6) && idempotence.Within(1e-6) &&
              translation.Within(1e-9),
          Fmt("max f - fE %.2e, support %.2e, idempotence %.2e, translation %.2e", below.value,
              support.value, idempotence.value, translation.value)};
}

Outcome GridFastPath() {
  Rng rng(1009);
  const CostSpec c = CostSpec::Separable(8, 8, 2.0);
  const CostSpec dense = c.Materialized();
  Matrix k(64, 64);
  for (Index i = 0; i < 64; ++i)
    for (Index j = 0; j < 64; ++j) k(i, j) = std::exp(-0.5 * dense(i, j));
  Worst kernel, value, measure;
  for (int t = 0; t < 10; ++t) {
    Grid2D v{Matrix(8, 8)};
    for (Index i = 0; i < 64; ++i) v.values(i / 8, i % 8) = testing::Normal(rng);
    kernel.Update(SupDiff(SeparableKernelApply(v, c).Flatten(), k * v.Flatten()));
    const ConjugateSolution a = SolveConjugateGrid2D(v, c);
    const ConjugateSolution b = SolveConjugate(ScoreVector(v.Flatten()), dense);
    value.Update(std::abs(a.value - b.value));
    measure.Update(SupDiff(a.measure.weights(), b.measure.weights()));
  }
  return {kernel.Within(1e-10) && value.Within(1e-6) && measure.Within(1e-6),
          Fmt("kernel %.2e, value %.2e, measure %.2e", kernel.value, value.value, measure.value)};
}

Outcome FrankWolfe() {
  const Index d = 64;
  Matrix line(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) line(i, j) = double((i - j) * (i - j));
  const CostSpec c(line);
  const std::vector<Index> spikes = {15, 44};
  Vector w = Vector::Zero(d);
  w[15] = 0.4;
  w[44] = 0.6;
  const ScoreVector f = SymmetricPotential(DiscreteMeasure(w), c).potential;

  FWOptions opts;
  opts.iterations = 200;
  opts.step_rule = StepRule::kLineSearch;
  const FWResult short_run = FwMinimize(f, c, opts);
  auto near_spike = [&](Index i) {
    return std::any_of(spikes.begin(), spikes.end(), [&](Index s) { return std::abs(i - s) <= 1; });
  };
  bool recovered = true;
  for (const auto& [i, v] : short_run.measure.atoms())
    if (v > 0.05 && !near_spike(i)) recovered = false;
  for (Index s : spikes) {
    const bool found = std::any_of(short_run.measure.atoms().begin(), short_run.measure.atoms().end(),
                                   [&](const auto& atom) {
                                     return atom.second > 0.05 && std::abs(atom.first - s) <= 1;
                                   });
    recovered = recovered && found;
  }

  opts.iterations = 1000;
  const FWResult long_run = FwMinimize(f, c, opts);
  const double gap =
      std::abs(-std::log(long_run.trace.steps.back().objective) - GLse(f, c));
  bool monotone = true;
  for (const FWResult* r : {&short_run, &long_run})
    for (size_t k = 1; k < r->trace.steps.size(); ++k)
      monotone = monotone && r->trace.steps[k].objective <= r->trace.steps[k - 1].objective;
  return {recovered && gap <= 1e-3 && monotone,
          Fmt("atoms recovered %s, |-log Phi - g-LSE| at T=1000 %.2e, monotone %s",
              recovered ? "yes" : "no", gap, monotone ? "yes" : "no")};
}

Outcome OrdinalPipeline() {
  const CostSpec c = SquaredCost(3);
  int wins = 0, gap_ok = 0;
  double worst_ratio = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SyntheticOptions so;
    so.seed = seed;
    so.separation = 2.0;
    so.class_noise = {3.0, 1.0, 3.0};
    const OrdinalDataset data = MakeSyntheticOrdinal(so);
    const std::vector<Index> perm = Permutation(data.size(), seed);
    const std::vector<Index> train(perm.begin(), perm.begin() + 450);
    const std::vector<Index> test(perm.begin() + 450, perm.end());
    const Standardization stats = FitStandardization(data.features, train);
    const Split a = MakeSplit(data, train, stats), b = MakeSplit(data, test, stats);

    TrainOptions opts;
    opts.epochs = 500;
    const TrainResult g = Train(a, c, opts);
    const double gap0 = g.curves.front().fy_loss - g.curves.front().hausdorff;
    const double gap = g.curves.back().fy_loss - g.curves.back().hausdorff;
    worst_ratio = std::max(worst_ratio, gap / gap0);
    gap_ok += gap < 0.1 * gap0;

    opts.family = LossFamily::kMultinomial;
    opts.record_curves = false;
    const TrainResult m = Train(a, c, opts);
    wins += Evaluate(g.model, b, c, LossFamily::kGLogistic).hausdorff <=
            Evaluate(m.model, b, c, LossFamily::kMultinomial).hausdorff;
  }
  return {gap_ok == 10 && wins >= 8,
          Fmt("train gap below 10%% on %d/10 seeds (worst ratio %.2e), g-logistic wins %d/10",
              gap_ok, worst_ratio, wins)};
}

Outcome SinkhornCrossCheck() {
  Rng rng(1012);
  Worst err;
  for (int t = 0; t < 50; ++t) {
    const Index d = testing::UniformIndex(rng, 2, 16);
    const CostSpec c = testing::RandomSymmetricCost(rng, d, 3.0);
    const DiscreteMeasure a = testing::RandomMeasure(rng, d);
    err.Update(std::abs(Negentropy(a, c) + 0.5 * SinkhornOT(a, a, c, 2.0).value));
  }
  return {err.Within(1e-6), Fmt("max difference %.2e", err.value)};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
  double time_limit;  // seconds, 0 for none
};

}  // namespace
}  // namespace geoloss

int main() {
  using namespace geoloss;
  const std::vector<Criterion> criteria = {
      {1, "closed-form spot checks", ClosedForms, 1.0},
      {2, "round-trip inversion", RoundTrip, 60.0},
      {3, "brute-force simplex oracle", BruteForce, 120.0},
      {4, "gradient vs finite differences", GradientConsistency, 0},
      {5, "temperature asymptotics", Asymptotics, 0},
      {6, "softmax and sparsemax limits", Limits, 0},
      {7, "Hausdorff upper bound chain", UpperBound, 0},
      {8, "extrapolation properties", Extrapolation, 0},
      {9, "separable 2-D fast path", GridFastPath, 0},
      {10, "Frank-Wolfe spike recovery", FrankWolfe, 0},
      {11, "ordinal pipeline", OrdinalPipeline, 300.0},
      {12, "dual vs primal Sinkhorn", SinkhornCrossCheck, 0},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.time_limit > 0 && secs > c.time_limit) {
      o.pass = false;
      o.detail += Fmt("; over time limit of %.0f s", c.time_limit);
    }
    failures += !o.pass;
    std::printf("%s %2d %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
