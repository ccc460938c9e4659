#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <set>
#include <sstream>

#include "geoloss/error.hpp"
#include "geoloss/gsoftmax.hpp"
#include "geoloss/losses.hpp"
#include "geoloss/ordinal.hpp"
#include "geoloss/sinkhorn.hpp"
#include "test_util.hpp"

namespace geoloss {
namespace {

using testing::Rng;

Split RandomSplit(Rng& rng, Index n, Index k, Index d) {
  Split s;
  s.x.resize(n, k);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < k; ++j) s.x(i, j) = testing::Normal(rng);
  for (Index i = 0; i < n; ++i) s.y.push_back(testing::UniformIndex(rng, 0, d - 1));
  return s;
}

LinearModel RandomModel(Rng& rng, Index d, Index k, double scale = 0.5) {
  LinearModel m = LinearModel::Zero(d, k);
  for (Index i = 0; i < d; ++i) {
    m.b[i] = scale * testing::Normal(rng);
    for (Index j = 0; j < k; ++j) m.w(i, j) = scale * testing::Normal(rng);
  }
  return m;
}

Split SyntheticSplit(Index n, std::uint64_t seed) {
  SyntheticOptions so;
  so.n = n;
  so.seed = seed;
  so.separation = 2.0;
  const OrdinalDataset data = MakeSyntheticOrdinal(so);
  const std::vector<Index> rows = AllRows(data);
  return MakeSplit(data, rows, FitStandardization(data.features, rows));
}

class ScopedEnv {
 public:
  ScopedEnv(const char* name, const char* value) : name_(name) {
    if (const char* old = std::getenv(name)) old_ = old;
    setenv(name, value, 1);
  }
  ~ScopedEnv() {
    if (old_.empty()) {
      unsetenv(name_);
    } else {
      setenv(name_, old_.c_str(), 1);
    }
  }

 private:
  const char* name_;
  std::string old_;
};

TEST(OrdinalCsvTest, ParsesRowsAndLabels) {
  const OrdinalDataset d = ParseOrdinalCsv("1.0,2.0,3\n", 5);
  EXPECT_EQ(d.size(), 1);
  EXPECT_EQ(d.features.cols(), 2);
  EXPECT_EQ(d.labels, std::vector<int>{3});
  EXPECT_TRUE(d.folds.empty());

  const OrdinalDataset f = ParseOrdinalCsv("0.5,1,0\n\n-1,2,1\n", 2, true);
  EXPECT_EQ(f.labels, (std::vector<int>{1, 2}));
  EXPECT_EQ(f.folds, (std::vector<int>{0, 1}));
}

TEST(OrdinalCsvTest, ErrorsCarryRowAndColumn) {
  try {
    ParseOrdinalCsv("1.0,2.0,0\n", 3);
    FAIL() << "label 0 accepted";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 1);
    EXPECT_EQ(e.column(), 3);
  }
  try {
    ParseOrdinalCsv("1,2,1\n1,2,4\n", 3);
    FAIL() << "label 4 accepted";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 2);
  }
  try {
    ParseOrdinalCsv("1,2,1\n1,x,2\n", 3);
    FAIL() << "non-numeric cell accepted";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 2);
    EXPECT_EQ(e.column(), 2);
  }
  EXPECT_THROW(ParseOrdinalCsv("1,2,1.5\n", 3), ParseError);
  EXPECT_THROW(ParseOrdinalCsv("", 3), ParseError);
  EXPECT_THROW(ParseOrdinalCsv("1,2,1\n1,2\n", 3), ParseError);
  EXPECT_THROW(ParseOrdinalCsv("1,2,1,-1\n", 3, true), ParseError);
}

TEST(StandardizationTest, ConstantColumnKeepsUnitScale) {
  Matrix x(4, 2);
  x << 1, 5, 2, 5, 3, 5, 4, 5;
  const Standardization s = FitStandardization(x, {0, 1, 2, 3});
  EXPECT_DOUBLE_EQ(s.scale[1], 1.0);
  EXPECT_DOUBLE_EQ(s.mean[1], 5.0);
  EXPECT_NEAR(s.scale[0], std::sqrt(1.25), 1e-15);

  OrdinalDataset data;
  data.features = x;
  data.labels = {1, 2, 1, 2};
  data.num_classes = 2;
  const Split split = MakeSplit(data, {0, 3}, s);
  EXPECT_TRUE(split.x.allFinite());
  EXPECT_DOUBLE_EQ(split.x(0, 1), 0.0);
  EXPECT_EQ(split.y, (std::vector<Index>{0, 1}));
}

TEST(StandardizationTest, UsesOnlyGivenRows) {
  Matrix x(3, 1);
  x << 0, 2, 100;
  const Standardization s = FitStandardization(x, {0, 1});
  EXPECT_DOUBLE_EQ(s.mean[0], 1.0);
  EXPECT_DOUBLE_EQ(s.scale[0], 1.0);
}

TEST(SquaredCostTest, Formula) {
  const CostSpec c = SquaredCost(3);
  Matrix expected(3, 3);
  expected << 0, .5, 2, .5, 0, .5, 2, .5, 0;
  EXPECT_EQ(c.base_matrix(), expected);
  const Matrix big = SquaredCost(7).base_matrix();
  EXPECT_EQ(big, big.transpose());
  EXPECT_EQ(big.diagonal(), Vector::Zero(7));
}

TEST(LossFamilyTest, NamesRoundTrip) {
  for (LossFamily f : {LossFamily::kGLogistic, LossFamily::kMultinomial, LossFamily::kHinge,
                       LossFamily::kCostLogistic})
    EXPECT_EQ(ParseLossFamily(LossFamilyName(f)), f);
  EXPECT_THROW(ParseLossFamily("nope"), InvalidArgument);
}

TEST(EvaluateSampleTest, MatchesLossModule) {
  Rng rng(90);
  const CostSpec c = SquaredCost(4);
  for (int t = 0; t < 20; ++t) {
    const ScoreVector f = testing::RandomScores(rng, 4);
    const Index y = testing::UniformIndex(rng, 0, 3);
    const DiscreteMeasure dy = DiscreteMeasure::Dirac(4, y);
    EXPECT_NEAR(EvaluateSample(LossFamily::kGLogistic, y, f, c).loss, FyLoss(dy, f, c).value, 1e-9);
    EXPECT_NEAR(EvaluateSample(LossFamily::kMultinomial, y, f, c).loss, LogSumExp(f.values()) - f[y],
                1e-12);
    EXPECT_NEAR(EvaluateSample(LossFamily::kHinge, y, f, c).loss, CostAugmentedHinge(y, f, c), 1e-12);
    EXPECT_NEAR(EvaluateSample(LossFamily::kCostLogistic, y, f, c).loss,
                CostAugmentedLogistic(y, f, c), 1e-12);
  }
}

TEST(ObjectiveTest, GradientMatchesFiniteDifferences) {
  Rng rng(91);
  const Index d = 3, k = 2;
  const CostSpec c = SquaredCost(d);
  const Split data = RandomSplit(rng, 12, k, d);
  for (LossFamily family :
       {LossFamily::kGLogistic, LossFamily::kMultinomial, LossFamily::kCostLogistic}) {
    const LinearModel m = RandomModel(rng, d, k);
    const double l2 = 0.1;
    const ObjectiveValue obj = Objective(m, data, family, c, l2);
    // Parameters packed as (W row-major, b).
    Vector theta(d * k + d);
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < k; ++j) theta[i * k + j] = m.w(i, j);
    theta.tail(d) = m.b;
    auto value = [&](const Vector& p) {
      LinearModel q = LinearModel::Zero(d, k);
      for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < k; ++j) q.w(i, j) = p[i * k + j];
      q.b = p.tail(d);
      return Objective(q, data, family, c, l2).value;
    };
    const Vector fd = testing::CentralDifference(value, theta, 1e-5);
    Vector analytic(d * k + d);
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < k; ++j) analytic[i * k + j] = obj.grad_w(i, j);
    analytic.tail(d) = obj.grad_b;
    EXPECT_LT((fd - analytic).lpNorm<Eigen::Infinity>() /
                  std::max(1.0, analytic.lpNorm<Eigen::Infinity>()),
              1e-4)
        << LossFamilyName(family);
    EXPECT_NEAR(obj.value, obj.mean_loss + l2 * m.w.squaredNorm(), 1e-12);
  }
}

TEST(PredictTest, Examples) {
  Rng rng(92);
  const CostSpec c = SquaredCost(4);
  LinearModel m = LinearModel::Zero(4, 3);
  const Vector x = testing::RandomScores(rng, 3).values();
  EXPECT_LT((PredictDistribution(m, x, c).weights() - GSoftmax(ScoreVector(Vector::Zero(4)), c).weights())
                .lpNorm<Eigen::Infinity>(),
            1e-12);
  for (Index y = 0; y < 4; ++y) {
    m.b = SymmetricPotential(DiscreteMeasure::Dirac(4, y), c).potential.values();
    EXPECT_LT((PredictDistribution(m, x, c).weights() - DiscreteMeasure::Dirac(4, y).weights())
                  .lpNorm<1>(),
              1e-5);
  }
  m = RandomModel(rng, 4, 3);
  LinearModel shifted = m;
  shifted.b.array() += 3.7;
  EXPECT_LT((PredictDistribution(m, x, c).weights() - PredictDistribution(shifted, x, c).weights())
                .lpNorm<Eigen::Infinity>(),
            1e-9);
  EXPECT_LT((PredictDistribution(m, x, c, LossFamily::kMultinomial).weights() -
             Softmax(ScoreVector(m.Scores(x))).weights())
                .lpNorm<Eigen::Infinity>(),
            1e-15);
}

TEST(EvaluateTest, Examples) {
  const CostSpec c = SquaredCost(3);
  std::vector<DiscreteMeasure> exact;
  for (Index y = 0; y < 3; ++y) exact.push_back(DiscreteMeasure::Dirac(3, y));
  const Metrics perfect = EvaluatePredictions(exact, {0, 1, 2}, c);
  EXPECT_NEAR(perfect.hausdorff, 0.0, 1e-12);
  EXPECT_EQ(perfect.mae, 0.0);
  EXPECT_EQ(perfect.accuracy, 1.0);

  const Metrics m = EvaluatePredictions(exact, {0, 2, 2}, c);
  EXPECT_NEAR(m.mae, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(m.accuracy, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(m.hausdorff, 0.5 / 3.0, 1e-9);

  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 3; ++j)
      EXPECT_NEAR(EvaluatePredictions({DiscreteMeasure::Dirac(3, i)}, {j}, c).hausdorff,
                  (i - j) * (i - j) / 2.0, 1e-9);
}

TEST(EvaluateTest, ArgmaxTiesBreakLow) {
  EXPECT_EQ(ArgmaxLowest(DiscreteMeasure(std::vector<double>{0.2, 0.4, 0.4})), 1);
  EXPECT_EQ(ArgmaxLowest(DiscreteMeasure::Uniform(5)), 0);
}

TEST(TrainTest, HeavyPenaltyShrinksWeights) {
  Rng rng(93);
  const CostSpec c = SquaredCost(3);
  const Split data = RandomSplit(rng, 30, 2, 3);
  for (LossFamily family : {LossFamily::kGLogistic, LossFamily::kMultinomial}) {
    TrainOptions o;
    o.family = family;
    o.l2 = 1e4;
    o.epochs = 200;
    o.seed = 5;
    o.record_curves = false;
    const TrainResult r = Train(data, c, o);
    EXPECT_LT(r.model.w.lpNorm<Eigen::Infinity>(), 1e-4) << LossFamilyName(family);
    // Predictions no longer depend on x.
    const DiscreteMeasure p0 = PredictDistribution(r.model, data.x.row(0).transpose(), c, family);
    const DiscreteMeasure p1 = PredictDistribution(r.model, data.x.row(1).transpose(), c, family);
    EXPECT_LT((p0.weights() - p1.weights()).lpNorm<Eigen::Infinity>(), 1e-3);
  }
  TrainOptions o;
  o.family = LossFamily::kMultinomial;
  o.l2 = 1e4;
  o.seed = 5;
  o.record_curves = false;
  Split balanced;
  balanced.x = data.x.topRows(3);
  balanced.y = {0, 1, 2};
  const TrainResult r = Train(balanced, c, o);
  EXPECT_LT((PredictDistribution(r.model, balanced.x.row(0).transpose(), c, o.family).weights()
                 .array() - 1.0 / 3.0).abs().maxCoeff(),
            1e-3);
}

TEST(TrainTest, SinglePointIsInterpolated) {
  const CostSpec c = SquaredCost(3);
  for (Index y = 0; y < 3; ++y) {
    Split s;
    s.x = Matrix::Constant(1, 2, 0.7);
    s.y = {y};
    TrainOptions o;
    o.epochs = 2000;
    const TrainResult r = Train(s, c, o);
    ASSERT_FALSE(r.curves.empty());
    EXPECT_LT(r.curves.back().fy_loss, 1e-3) << "y=" << y;
  }
}

TEST(TrainTest, CurvesRespectTheLossBound) {
  const CostSpec c = SquaredCost(3);
  const Split train = SyntheticSplit(90, 3);
  TrainOptions o;
  o.epochs = 60;
  o.validation = SyntheticSplit(30, 4);
  const TrainResult r = Train(train, c, o);
  std::set<std::string> splits;
  int last_epoch = -1;
  for (const CurvePoint& p : r.curves) {
    splits.insert(p.split);
    EXPECT_GE(p.fy_loss - p.hausdorff, -1e-6) << p.split << " epoch " << p.epoch;
    EXPECT_GE(p.hausdorff, -1e-8);
    last_epoch = std::max(last_epoch, p.epoch);
  }
  EXPECT_EQ(splits, (std::set<std::string>{"train", "validation"}));
  EXPECT_EQ(r.curves.front().epoch, 0);
  EXPECT_LE(last_epoch, 60);

  std::ostringstream csv;
  WriteCurvesCsv(csv, r.curves);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "epoch,split,fy_loss,hausdorff");
}

TEST(TrainTest, MultinomialSeparatesTwoPoints) {
  const CostSpec c = SquaredCost(3);
  Split s;
  s.x.resize(2, 1);
  s.x << -1, 1;
  s.y = {0, 2};
  TrainOptions o;
  o.family = LossFamily::kMultinomial;
  const TrainResult r = Train(s, c, o);
  EXPECT_EQ(Evaluate(r.model, s, c, LossFamily::kMultinomial).accuracy, 1.0);
}

TEST(TrainTest, NonFiniteFeaturesRaiseNumericalError) {
  const CostSpec c = SquaredCost(2);
  Split s;
  s.x.resize(2, 1);
  s.x << 1e300, -1e300;
  s.y = {0, 1};
  TrainOptions o;
  o.family = LossFamily::kMultinomial;
  o.learning_rate = 1e300;
  o.halve_on_plateau = false;
  o.seed = 1;
  EXPECT_THROW(Train(s, c, o), Error);
}

TEST(TrainTest, DeterministicAndThreadCountInvariant) {
  const CostSpec c = SquaredCost(3);
  const Split train = SyntheticSplit(60, 8);
  TrainOptions o;
  o.epochs = 30;
  o.seed = 11;
  TrainResult a, b;
  {
    ScopedEnv env("GEOLOSS_THREADS", "1");
    a = Train(train, c, o);
  }
  {
    ScopedEnv env("GEOLOSS_THREADS", "3");
    b = Train(train, c, o);
  }
  EXPECT_EQ(a.model.w, b.model.w);
  EXPECT_EQ(a.model.b, b.model.b);
  ASSERT_EQ(a.curves.size(), b.curves.size());
  for (size_t i = 0; i < a.curves.size(); ++i) {
    EXPECT_EQ(a.curves[i].fy_loss, b.curves[i].fy_loss);
    EXPECT_EQ(a.curves[i].hausdorff, b.curves[i].hausdorff);
  }
}

TEST(SyntheticTest, ShapeAndDeterminism) {
  SyntheticOptions so;
  so.n = 50;
  so.k = 3;
  so.num_classes = 4;
  so.seed = 9;
  const OrdinalDataset a = MakeSyntheticOrdinal(so);
  const OrdinalDataset b = MakeSyntheticOrdinal(so);
  EXPECT_EQ(a.size(), 50);
  EXPECT_EQ(a.features.cols(), 3);
  EXPECT_EQ(a.num_classes, 4);
  EXPECT_EQ(a.features, b.features);
  EXPECT_EQ(a.labels, b.labels);
  for (int y : a.labels) {
    EXPECT_GE(y, 1);
    EXPECT_LE(y, 4);
  }
  const std::vector<Index> p = Permutation(50, 3);
  std::vector<Index> sorted = p;
  std::sort(sorted.begin(), sorted.end());
  for (Index i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
  EXPECT_EQ(p, Permutation(50, 3));
  EXPECT_NE(p, Permutation(50, 4));
}

TEST(CrossValidateTest, TwoFoldsAgreeOnSymmetricData) {
  SyntheticOptions so;
  so.n = 200;
  so.seed = 21;
  so.separation = 2.0;
  const OrdinalDataset data = MakeSyntheticOrdinal(so);
  CrossValidationOptions o;
  o.family = LossFamily::kMultinomial;
  o.num_folds = 2;
  o.train.epochs = 100;
  o.seed = 1;
  const CrossValidationResult r = CrossValidate(data, SquaredCost(3), o);
  ASSERT_EQ(r.fold_metrics.size(), 2u);
  EXPECT_NEAR(r.fold_metrics[0].accuracy, r.fold_metrics[1].accuracy, 0.15);
  EXPECT_NEAR(r.fold_metrics[0].hausdorff, r.fold_metrics[1].hausdorff, 0.15);
  EXPECT_NEAR(r.accuracy.mean, 0.5 * (r.fold_metrics[0].accuracy + r.fold_metrics[1].accuracy),
              1e-15);
  EXPECT_TRUE(r.warnings.empty());
}

TEST(CrossValidateTest, DeterministicWithGridSelection) {
  SyntheticOptions so;
  so.n = 90;
  so.seed = 22;
  const OrdinalDataset data = MakeSyntheticOrdinal(so);
  CrossValidationOptions o;
  o.num_folds = 3;
  o.l2_grid = {0.0, 0.1, 10.0};
  o.train.epochs = 20;
  o.seed = 4;
  const CrossValidationResult a = CrossValidate(data, SquaredCost(3), o);
  const CrossValidationResult b = CrossValidate(data, SquaredCost(3), o);
  EXPECT_EQ(a.hausdorff.mean, b.hausdorff.mean);
  EXPECT_EQ(a.hausdorff.std, b.hausdorff.std);
  EXPECT_EQ(a.chosen_l2, b.chosen_l2);
  EXPECT_EQ(a.chosen_l2.size(), 3u);
  for (double l2 : a.chosen_l2) EXPECT_TRUE(l2 == 0.0 || l2 == 0.1 || l2 == 10.0);
  const nlohmann::json j = MetricsJson(a);
  EXPECT_EQ(j["hausdorff"]["mean"].get<double>(), a.hausdorff.mean);
  EXPECT_TRUE(j.contains("mae"));
  EXPECT_TRUE(j.contains("accuracy"));
}

TEST(CrossValidateTest, SkipsFoldsMissingAClass) {
  // Class 3 lives only in fold 1, so the fold-1 training rows miss it.
  OrdinalDataset data = ParseOrdinalCsv(
      "0.1,1,0\n0.2,2,0\n0.3,1,0\n"
      "0.9,3,1\n0.8,2,1\n0.7,1,1\n"
      "0.4,2,2\n0.5,1,2\n0.6,2,2\n",
      3, true);
  CrossValidationOptions o;
  o.family = LossFamily::kMultinomial;
  o.train.epochs = 5;
  const CrossValidationResult r = CrossValidate(data, SquaredCost(3), o);
  EXPECT_EQ(r.evaluated_folds, (std::vector<int>{0, 2}));
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_NE(r.warnings[0].find("fold 1"), std::string::npos);
}

}  // namespace
}  // namespace geoloss
