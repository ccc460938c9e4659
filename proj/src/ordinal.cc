#include "geoloss/ordinal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

#include "geoloss/error.hpp"
#include "geoloss/gsoftmax.hpp"
#include "geoloss/io.hpp"
#include "geoloss/losses.hpp"
#include "geoloss/parallel.hpp"

namespace geoloss {

OrdinalDataset ParseOrdinalCsv(const std::string& text, int num_classes, bool fold_column) {
  if (num_classes < 2) throw InvalidArgument("need at least 2 classes");
  const io::CsvTable table = io::ParseCsv(text);
  if (table.rows.empty()) throw ParseError("empty dataset");
  const size_t extra = fold_column ? 2 : 1;
  const size_t width = table.rows[0].size();
  if (width < extra + 1)
    throw ParseError("expected at least one feature column and a label", table.line_numbers[0],
                     static_cast<int>(width));

  OrdinalDataset data;
  data.num_classes = num_classes;
  const Index n = static_cast<Index>(table.rows.size());
  const Index k = static_cast<Index>(width - extra);
  data.features.resize(n, k);
  for (Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<size_t>(i)];
    const int line = table.line_numbers[static_cast<size_t>(i)];
    if (row.size() != width)
      throw ParseError("expected " + std::to_string(width) + " columns, found " +
                           std::to_string(row.size()),
                       line, static_cast<int>(std::min(row.size(), width) + 1));
    for (Index j = 0; j < k; ++j) data.features(i, j) = row[static_cast<size_t>(j)];
    const double label = row[static_cast<size_t>(k)];
    const int label_col = static_cast<int>(k + 1);
    if (label != std::floor(label))
      throw ParseError("label must be an integer", line, label_col);
    if (label < 1 || label > num_classes)
      throw ParseError("label " + io::FormatDouble(label) + " outside [1, " +
                           std::to_string(num_classes) + "]",
                       line, label_col);
    data.labels.push_back(static_cast<int>(label));
    if (fold_column) {
      const double fold = row[static_cast<size_t>(k + 1)];
      if (fold != std::floor(fold) || fold < 0)
        throw ParseError("fold id must be a non-negative integer", line, label_col + 1);
      data.folds.push_back(static_cast<int>(fold));
    }
  }
  return data;
}

OrdinalDataset LoadOrdinalCsv(const std::string& path, int num_classes, bool fold_column) {
  return ParseOrdinalCsv(io::ReadFile(path), num_classes, fold_column);
}

Standardization FitStandardization(const Matrix& features, const std::vector<Index>& rows) {
  if (rows.empty()) throw InvalidArgument("cannot standardize on zero rows");
  const Index k = features.cols();
  Standardization s;
  s.mean = Vector::Zero(k);
  s.scale = Vector::Zero(k);
  for (Index r : rows) s.mean += features.row(r).transpose();
  s.mean /= static_cast<double>(rows.size());
  for (Index r : rows) s.scale += (features.row(r).transpose() - s.mean).array().square().matrix();
  s.scale = (s.scale / static_cast<double>(rows.size())).array().sqrt();
  for (Index j = 0; j < k; ++j)
    if (!(s.scale[j] > 1e-12)) s.scale[j] = 1.0;
  return s;
}

Split MakeSplit(const OrdinalDataset& data, const std::vector<Index>& rows,
                const Standardization& stats) {
  Split s;
  s.x.resize(static_cast<Index>(rows.size()), data.features.cols());
  for (size_t i = 0; i < rows.size(); ++i) {
    s.x.row(static_cast<Index>(i)) =
        ((data.features.row(rows[i]).transpose() - stats.mean).array() / stats.scale.array())
            .transpose();
    s.y.push_back(data.labels[static_cast<size_t>(rows[i])] - 1);
  }
  return s;
}

std::vector<Index> AllRows(const OrdinalDataset& data) {
  std::vector<Index> rows(static_cast<size_t>(data.size()));
  std::iota(rows.begin(), rows.end(), Index{0});
  return rows;
}

CostSpec SquaredCost(Index d, double epsilon) {
  if (d < 2) throw InvalidArgument("SquaredCost: need d >= 2");
  Matrix c(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) c(i, j) = 0.5 * static_cast<double>((i - j) * (i - j));
  return CostSpec(c, epsilon);
}

LinearModel LinearModel::Zero(Index d, Index k) {
  return {Matrix::Zero(d, k), Vector::Zero(d)};
}

const char* LossFamilyName(LossFamily family) {
  switch (family) {
    case LossFamily::kGLogistic: return "g-logistic";
    case LossFamily::kMultinomial: return "multinomial";
    case LossFamily::kHinge: return "hinge";
    case LossFamily::kCostLogistic: return "cost-logistic";
  }
  return "?";
}

LossFamily ParseLossFamily(const std::string& name) {
  for (LossFamily f : {LossFamily::kGLogistic, LossFamily::kMultinomial, LossFamily::kHinge,
                       LossFamily::kCostLogistic})
    if (name == LossFamilyName(f)) return f;
  throw InvalidArgument("unknown loss family '" + name + "'");
}

namespace {

ConjugateSolution SolveTolerant(const ScoreVector& f, const CostSpec& c) {
  try {
    return SolveConjugate(f, c);
  } catch (const ConjugateConvergenceError& e) {
    // Training only needs a good approximate gradient.
    return e.best();
  }
}

Index ArgmaxScores(const Vector& f) {
  Index best = 0;
  for (Index i = 1; i < f.size(); ++i)
    if (f[i] > f[best]) best = i;
  return best;
}

struct SampleEval {
  double loss = 0;
  double hausdorff = 0;
  Vector gradient;
};

// Loss, score gradient and (optionally) D(delta_y, prediction) for one sample.
SampleEval EvaluateOne(LossFamily family, Index y, const ScoreVector& f, const CostSpec& c,
                       bool want_hausdorff) {
  SampleEval out;
  const Index d = f.size();
  switch (family) {
    case LossFamily::kGLogistic: {
      const ConjugateSolution conj = SolveTolerant(f, c);
      out.loss = conj.value - f[y];
      out.gradient = conj.measure.weights();
      out.gradient[y] -= 1.0;
      if (want_hausdorff) out.hausdorff = DiracHausdorff(y, f, c, conj);
      return out;
    }
    case LossFamily::kMultinomial: {
      out.loss = LogSumExp(f.values()) - f[y];
      const DiscreteMeasure p = Softmax(f);
      out.gradient = p.weights();
      out.gradient[y] -= 1.0;
      if (want_hausdorff) out.hausdorff = HausdorffDivergence(DiscreteMeasure::Dirac(d, y), p, c);
      return out;
    }
    case LossFamily::kHinge: {
      Index best = y;
      double best_value = 0.0;
      for (Index i = 0; i < d; ++i) {
        const double v = c(y, i) + f[i] - f[y];
        if (v > best_value) {
          best_value = v;
          best = i;
        }
      }
      out.loss = best_value;
      out.gradient = Vector::Zero(d);
      out.gradient[best] += 1.0;
      out.gradient[y] -= 1.0;
      if (want_hausdorff)
        out.hausdorff = HausdorffDivergence(DiscreteMeasure::Dirac(d, y),
                                            DiscreteMeasure::Dirac(d, ArgmaxScores(f.values())), c);
      return out;
    }
    case LossFamily::kCostLogistic: {
      Vector shifted(d);
      for (Index i = 0; i < d; ++i) shifted[i] = c(y, i) + f[i];
      out.loss = LogSumExp(shifted) - f[y];
      out.gradient = Softmax(ScoreVector(shifted)).weights();
      out.gradient[y] -= 1.0;
      if (want_hausdorff)
        out.hausdorff = HausdorffDivergence(DiscreteMeasure::Dirac(d, y), Softmax(f), c);
      return out;
    }
  }
  throw InvalidArgument("unknown loss family");
}

struct BatchEval {
  double mean_loss = 0;
  double mean_hausdorff = 0;
  double objective = 0;
  Matrix grad_w;
  Vector grad_b;
};

BatchEval EvaluateBatch(const LinearModel& m, const Split& data, LossFamily family,
                        const CostSpec& c, double l2, bool want_gradient, bool want_hausdorff) {
  const Index n = data.size();
  if (n == 0) throw InvalidArgument("empty split");
  if (m.w.rows() != c.size() || m.b.size() != c.size() || m.w.cols() != data.x.cols())
    throw InvalidArgument("model, data and cost dimensions disagree");
  std::vector<SampleEval> per(static_cast<size_t>(n));
  ParallelFor(static_cast<size_t>(n), [&](size_t i) {
    const Vector x = data.x.row(static_cast<Index>(i)).transpose();
    per[i] = EvaluateOne(family, data.y[i], ScoreVector(m.Scores(x)), c, want_hausdorff);
  });

  // Reduce in index order so the result is independent of the thread count.
  BatchEval out;
  if (want_gradient) {
    out.grad_w = Matrix::Zero(m.w.rows(), m.w.cols());
    out.grad_b = Vector::Zero(m.b.size());
  }
  for (Index i = 0; i < n; ++i) {
    const SampleEval& s = per[static_cast<size_t>(i)];
    out.mean_loss += s.loss;
    out.mean_hausdorff += s.hausdorff;
    if (want_gradient) {
      out.grad_w.noalias() += s.gradient * data.x.row(i);
      out.grad_b += s.gradient;
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  out.mean_loss *= inv_n;
  out.mean_hausdorff *= inv_n;
  out.objective = out.mean_loss + l2 * m.w.squaredNorm();
  if (want_gradient) {
    out.grad_w = out.grad_w * inv_n + 2.0 * l2 * m.w;
    out.grad_b *= inv_n;
  }
  return out;
}

}  // namespace

SampleLoss EvaluateSample(LossFamily family, Index y, const ScoreVector& f, const CostSpec& c) {
  if (f.size() != c.size()) throw InvalidArgument("EvaluateSample: dimension mismatch");
  if (y < 0 || y >= f.size()) throw InvalidArgument("EvaluateSample: class out of range");
  SampleEval e = EvaluateOne(family, y, f, c, false);
  return {e.loss, std::move(e.gradient)};
}

DiscreteMeasure PredictDistribution(const LinearModel& m, const Vector& x, const CostSpec& c,
                                    LossFamily family) {
  const ScoreVector f(m.Scores(x));
  if (!f.values().allFinite()) throw NumericalError("non-finite scores");
  switch (family) {
    case LossFamily::kGLogistic: return SolveTolerant(f, c).measure;
    case LossFamily::kMultinomial:
    case LossFamily::kCostLogistic: return Softmax(f);
    case LossFamily::kHinge: return DiscreteMeasure::Dirac(f.size(), ArgmaxScores(f.values()));
  }
  throw InvalidArgument("unknown loss family");
}

ObjectiveValue Objective(const LinearModel& m, const Split& data, LossFamily family,
                         const CostSpec& c, double l2) {
  BatchEval e = EvaluateBatch(m, data, family, c, l2, true, false);
  return {e.objective, e.mean_loss, std::move(e.grad_w), std::move(e.grad_b)};
}

TrainResult Train(const Split& data, const CostSpec& c, const TrainOptions& opts) {
  if (!(opts.l2 >= 0)) throw InvalidArgument("l2 penalty must be >= 0");
  if (opts.epochs < 0) throw InvalidArgument("epochs must be >= 0");
  const Index d = c.size();
  const Index k = data.x.cols();
  TrainResult result;
  result.model = LinearModel::Zero(d, k);
  if (opts.seed != 0) {
    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> normal(0.0, 0.01);
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < k; ++j) result.model.w(i, j) = normal(rng);
  }

  // The g-logistic Hausdorff term is a by-product of the loss evaluation;
  // the other families pay for it only on accepted steps.
  const bool cheap_h = opts.record_curves && opts.family == LossFamily::kGLogistic;
  auto record = [&](int epoch, const BatchEval& train_eval) {
    if (!opts.record_curves) return;
    double h = train_eval.mean_hausdorff;
    if (!cheap_h)
      h = EvaluateBatch(result.model, data, opts.family, c, opts.l2, false, true).mean_hausdorff;
    result.curves.push_back({epoch, "train", train_eval.mean_loss, h});
    if (opts.validation) {
      const BatchEval v =
          EvaluateBatch(result.model, *opts.validation, opts.family, c, opts.l2, false, true);
      result.curves.push_back({epoch, "validation", v.mean_loss, v.mean_hausdorff});
    }
  };

  BatchEval current = EvaluateBatch(result.model, data, opts.family, c, opts.l2, true, cheap_h);
  if (!std::isfinite(current.objective))
    throw NumericalError("objective is not finite at epoch 0");
  record(0, current);

  double lr = opts.learning_rate;
  auto grad_norm = [&](const BatchEval& e) {
    return std::max(e.grad_w.size() ? e.grad_w.lpNorm<Eigen::Infinity>() : 0.0,
                    e.grad_b.lpNorm<Eigen::Infinity>());
  };
  for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
    if (grad_norm(current) <= opts.gradient_tol) break;
    bool accepted = false;
    for (int h = 0; h <= (opts.halve_on_plateau ? opts.max_halvings : 0); ++h) {
      LinearModel cand{result.model.w - lr * current.grad_w, result.model.b - lr * current.grad_b};
      BatchEval next = EvaluateBatch(cand, data, opts.family, c, opts.l2, true, cheap_h);
      const bool finite = std::isfinite(next.objective);
      if (!opts.halve_on_plateau && !finite)
        throw NumericalError("objective is not finite at epoch " + std::to_string(epoch));
      if (!opts.halve_on_plateau || (finite && next.objective <= current.objective)) {
        result.model = std::move(cand);
        current = std::move(next);
        accepted = true;
        break;
      }
      lr *= 0.5;
    }
    if (!accepted) {
      if (!std::isfinite(current.objective))
        throw NumericalError("objective is not finite at epoch " + std::to_string(epoch));
      break;  // no descent left at any tried step
    }
    record(epoch, current);
  }
  result.objective = current.objective;
  result.learning_rate = lr;
  return result;
}

TrainResult TrainGLogistic(const Split& data, const CostSpec& c, double l2, int epochs) {
  TrainOptions o;
  o.family = LossFamily::kGLogistic;
  o.l2 = l2;
  o.epochs = epochs;
  return Train(data, c, o);
}

TrainResult TrainMultinomial(const Split& data, const CostSpec& c, double l2, int epochs) {
  TrainOptions o;
  o.family = LossFamily::kMultinomial;
  o.l2 = l2;
  o.epochs = epochs;
  return Train(data, c, o);
}

void WriteCurvesCsv(std::ostream& out, const std::vector<CurvePoint>& curves) {
  out << "epoch,split,fy_loss,hausdorff\n";
  for (const CurvePoint& p : curves)
    out << p.epoch << ',' << p.split << ',' << io::FormatDouble(p.fy_loss) << ','
        << io::FormatDouble(p.hausdorff) << '\n';
}

Index ArgmaxLowest(const DiscreteMeasure& a) {
  if (a.size() == 0) throw InvalidArgument("empty measure");
  return ArgmaxScores(a.weights());
}

Metrics EvaluatePredictions(const std::vector<DiscreteMeasure>& predictions,
                            const std::vector<Index>& labels, const CostSpec& c) {
  if (predictions.size() != labels.size() || predictions.empty())
    throw InvalidArgument("predictions and labels must be non-empty and of equal length");
  const size_t n = predictions.size();
  std::vector<double> h(n);
  ParallelFor(n, [&](size_t i) {
    const Index d = predictions[i].size();
    h[i] = HausdorffDivergence(DiscreteMeasure::Dirac(d, labels[i]), predictions[i], c);
  });
  Metrics m;
  for (size_t i = 0; i < n; ++i) {
    const Index yhat = ArgmaxLowest(predictions[i]);
    m.hausdorff += h[i];
    m.mae += std::abs(static_cast<double>(yhat - labels[i]));
    m.accuracy += yhat == labels[i] ? 1.0 : 0.0;
  }
  m.hausdorff /= static_cast<double>(n);
  m.mae /= static_cast<double>(n);
  m.accuracy /= static_cast<double>(n);
  return m;
}

Metrics Evaluate(const LinearModel& m, const Split& data, const CostSpec& c, LossFamily family) {
  std::vector<DiscreteMeasure> preds(static_cast<size_t>(data.size()));
  ParallelFor(preds.size(), [&](size_t i) {
    preds[i] = PredictDistribution(m, data.x.row(static_cast<Index>(i)).transpose(), c, family);
  });
  return EvaluatePredictions(preds, data.y, c);
}

std::vector<Index> Permutation(Index n, std::uint64_t seed) {
  std::vector<Index> p(static_cast<size_t>(n));
  std::iota(p.begin(), p.end(), Index{0});
  std::mt19937_64 rng(seed);
  // Explicit Fisher-Yates: std::shuffle's draw pattern is library-specific.
  for (Index i = n - 1; i > 0; --i) {
    const Index j = static_cast<Index>(rng() % static_cast<std::uint64_t>(i + 1));
    std::swap(p[static_cast<size_t>(i)], p[static_cast<size_t>(j)]);
  }
  return p;
}

namespace {

MetricSummary Summarize(const std::vector<double>& v) {
  MetricSummary s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

bool HasAllClasses(const OrdinalDataset& data, const std::vector<Index>& rows) {
  std::set<int> seen;
  for (Index r : rows) seen.insert(data.labels[static_cast<size_t>(r)]);
  return static_cast<int>(seen.size()) == data.num_classes;
}

}  // namespace

CrossValidationResult CrossValidate(const OrdinalDataset& data, const CostSpec& c,
                                    const CrossValidationOptions& opts) {
  if (opts.l2_grid.empty()) throw InvalidArgument("empty l2 grid");
  if (c.size() != data.num_classes) throw InvalidArgument("cost size must equal class count");
  const Index n = data.size();
  std::vector<int> fold_of(static_cast<size_t>(n));
  if (!data.folds.empty()) {
    fold_of = data.folds;
  } else {
    if (opts.num_folds < 2) throw InvalidArgument("need at least 2 folds");
    const std::vector<Index> perm = Permutation(n, opts.seed);
    for (Index i = 0; i < n; ++i)
      fold_of[static_cast<size_t>(perm[static_cast<size_t>(i)])] =
          static_cast<int>(i % opts.num_folds);
  }
  const std::set<int> fold_ids(fold_of.begin(), fold_of.end());
  if (fold_ids.size() < 2) throw InvalidArgument("need at least 2 folds");

  CrossValidationResult result;
  std::vector<double> hs, maes, accs;
  for (int fold : fold_ids) {
    std::vector<Index> train_rows, test_rows;
    for (Index i = 0; i < n; ++i)
      (fold_of[static_cast<size_t>(i)] == fold ? test_rows : train_rows).push_back(i);
    if (!HasAllClasses(data, train_rows)) {
      result.warnings.push_back("fold " + std::to_string(fold) +
                                ": training rows miss a class, fold skipped");
      continue;
    }

    double best_l2 = opts.l2_grid.front();
    if (opts.l2_grid.size() > 1) {
      const std::vector<Index> perm =
          Permutation(static_cast<Index>(train_rows.size()), opts.seed + 7919u * (fold + 1));
      const size_t n_val = std::max<size_t>(
          1, static_cast<size_t>(std::lround(opts.inner_validation_fraction * train_rows.size())));
      std::vector<Index> inner_train, inner_val;
      for (size_t i = 0; i < perm.size(); ++i)
        (i < n_val ? inner_val : inner_train).push_back(train_rows[static_cast<size_t>(perm[i])]);
      const Standardization stats = FitStandardization(data.features, inner_train);
      const Split tr = MakeSplit(data, inner_train, stats);
      const Split va = MakeSplit(data, inner_val, stats);
      double best_loss = std::numeric_limits<double>::infinity();
      for (double l2 : opts.l2_grid) {
        TrainOptions o = opts.train;
        o.family = opts.family;
        o.l2 = l2;
        o.record_curves = false;
        o.validation.reset();
        const TrainResult r = Train(tr, c, o);
        const double loss = EvaluateBatch(r.model, va, opts.family, c, 0.0, false, false).mean_loss;
        if (loss < best_loss) {
          best_loss = loss;
          best_l2 = l2;
        }
      }
    }

    const Standardization stats = FitStandardization(data.features, train_rows);
    TrainOptions o = opts.train;
    o.family = opts.family;
    o.l2 = best_l2;
    o.record_curves = false;
    o.validation.reset();
    const TrainResult r = Train(MakeSplit(data, train_rows, stats), c, o);
    const Metrics m = Evaluate(r.model, MakeSplit(data, test_rows, stats), c, opts.family);
    result.fold_metrics.push_back(m);
    result.evaluated_folds.push_back(fold);
    result.chosen_l2.push_back(best_l2);
    hs.push_back(m.hausdorff);
    maes.push_back(m.mae);
    accs.push_back(m.accuracy);
  }
  if (result.fold_metrics.empty()) throw InvalidArgument("every fold was skipped");
  result.hausdorff = Summarize(hs);
  result.mae = Summarize(maes);
  result.accuracy = Summarize(accs);
  return result;
}

nlohmann::json MetricsJson(const CrossValidationResult& r) {
  auto ms = [](const MetricSummary& s) { return nlohmann::json{{"mean", s.mean}, {"std", s.std}}; };
  return {{"hausdorff", ms(r.hausdorff)},
          {"mae", ms(r.mae)},
          {"accuracy", ms(r.accuracy)},
          {"folds", r.evaluated_folds},
          {"chosen_l2", r.chosen_l2},
          {"warnings", r.warnings}};
}

nlohmann::json MetricsJson(const Metrics& m) {
  return {{"hausdorff", m.hausdorff}, {"mae", m.mae}, {"accuracy", m.accuracy}};
}

OrdinalDataset MakeSyntheticOrdinal(const SyntheticOptions& opts) {
  if (opts.n < 1 || opts.k < 1 || opts.num_classes < 2)
    throw InvalidArgument("synthetic dataset needs n >= 1, k >= 1, at least 2 classes");
  if (!opts.class_noise.empty() &&
      static_cast<int>(opts.class_noise.size()) != opts.num_classes)
    throw InvalidArgument("class_noise needs one entry per class");
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector u(opts.k);
  for (Index j = 0; j < opts.k; ++j) u[j] = normal(rng);
  u.normalize();

  OrdinalDataset data;
  data.num_classes = opts.num_classes;
  data.features.resize(opts.n, opts.k);
  const double center = 0.5 * (opts.num_classes - 1);
  for (Index i = 0; i < opts.n; ++i) {
    const int y = static_cast<int>(rng() % static_cast<std::uint64_t>(opts.num_classes));
    const double sd = opts.class_noise.empty() ? opts.noise : opts.class_noise[static_cast<size_t>(y)];
    for (Index j = 0; j < opts.k; ++j)
      data.features(i, j) = (y - center) * opts.separation * u[j] + sd * normal(rng);
    data.labels.push_back(y + 1);
  }
  return data;
}

}  // namespace geoloss
