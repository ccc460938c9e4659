#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"

#include "geoloss/error.hpp"
#include "geoloss/frankwolfe.hpp"
#include "geoloss/gsoftmax.hpp"
#include "geoloss/io.hpp"
#include "geoloss/losses.hpp"
#include "geoloss/ordinal.hpp"
#include "geoloss/sinkhorn.hpp"

namespace geoloss::cli {

namespace {

using io::Json;

struct Common {
  std::string scores, measure, cost, out;
  std::optional<double> epsilon;
  std::optional<double> tol;
  std::optional<int> max_iter;
  unsigned long long seed = 0;
};

void AddCommon(CLI::App* sub, Common& c, bool scores, bool measure, bool cost) {
  if (scores) sub->add_option("--scores", c.scores, "score vector (CSV or JSON)")->check(CLI::ExistingFile);
  if (measure) sub->add_option("--measure", c.measure, "probability measure (CSV or JSON)")->check(CLI::ExistingFile);
  if (cost) sub->add_option("--cost", c.cost, "cost matrix (CSV or JSON)")->check(CLI::ExistingFile);
  sub->add_option("--epsilon", c.epsilon, "use C / epsilon")->check(CLI::PositiveNumber);
  sub->add_option("--tol", c.tol, "solver tolerance")->check(CLI::PositiveNumber);
  sub->add_option("--max-iter", c.max_iter, "solver iteration cap")->check(CLI::PositiveNumber);
  sub->add_option("--seed", c.seed, "random seed");
  sub->add_option("--out", c.out, "output path (default: standard output)");
}

void Require(const std::string& value, const char* flag) {
  if (value.empty()) throw CLI::RequiredError(flag);
}

CostSpec LoadCostFlag(const Common& c) {
  Require(c.cost, "--cost");
  CostSpec cost = io::LoadCost(c.cost);
  if (c.epsilon) cost = cost.WithEpsilon(*c.epsilon);
  return cost;
}

SolverOptions ConjugateOptions(const Common& c) {
  SolverOptions o;
  if (c.tol) o.tol = *c.tol;
  if (c.max_iter) o.max_iter = *c.max_iter;
  return o;
}

FixedPointOptions PotentialOptions(const Common& c) {
  FixedPointOptions o;
  if (c.tol) o.tol = *c.tol;
  if (c.max_iter) o.max_iter = *c.max_iter;
  return o;
}

void Emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << text;
  } else {
    io::WriteFile(path, text);
  }
}

void CheckSizes(Index a, Index b, const char* what) {
  if (a != b) throw InvalidArgument(std::string(what) + ": sizes " + std::to_string(a) +
                                    " and " + std::to_string(b) + " differ");
}

std::vector<double> ParseList(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw CLI::ValidationError("list", "not a number: '" + item + "'");
    }
  }
  if (out.empty()) throw CLI::ValidationError("list", "empty list");
  return out;
}

int CmdGSoftmax(const Common& c, std::ostream& out) {
  Require(c.scores, "--scores");
  const ScoreVector f = io::LoadScores(c.scores);
  const CostSpec cost = LoadCostFlag(c);
  CheckSizes(f.size(), cost.size(), "scores and cost");
  const ConjugateSolution s = SolveConjugate(f, cost, ConjugateOptions(c));
  Emit(io::Dump(io::ToJson(s)), c.out, out);
  return kOk;
}

int CmdPotential(const Common& c, std::ostream& out) {
  Require(c.measure, "--measure");
  const DiscreteMeasure a = io::LoadMeasure(c.measure);
  const CostSpec cost = LoadCostFlag(c);
  CheckSizes(a.size(), cost.size(), "measure and cost");
  const PotentialResult r = SymmetricPotential(a, cost, PotentialOptions(c));
  Emit(io::Dump(io::ToJson(r)), c.out, out);
  return kOk;
}

int CmdHausdorff(const Common& c, const std::string& a_path, const std::string& b_path,
                 std::ostream& out) {
  Require(a_path, "--a");
  Require(b_path, "--b");
  const DiscreteMeasure a = io::LoadMeasure(a_path);
  const DiscreteMeasure b = io::LoadMeasure(b_path);
  const CostSpec cost = LoadCostFlag(c);
  CheckSizes(a.size(), cost.size(), "measure and cost");
  CheckSizes(b.size(), cost.size(), "measure and cost");
  const double d = HausdorffDivergence(a, b, cost, PotentialOptions(c));
  Emit(io::Dump(Json{{"hausdorff", d}}), c.out, out);
  return kOk;
}

int CmdFyLoss(const Common& c, std::ostream& out) {
  Require(c.measure, "--measure");
  Require(c.scores, "--scores");
  const DiscreteMeasure a = io::LoadMeasure(c.measure);
  const ScoreVector f = io::LoadScores(c.scores);
  const CostSpec cost = LoadCostFlag(c);
  CheckSizes(a.size(), cost.size(), "measure and cost");
  CheckSizes(f.size(), cost.size(), "scores and cost");
  LossOptions opts{ConjugateOptions(c), PotentialOptions(c)};
  const LossValue v = FyLoss(a, f, cost, opts);
  Json grad = Json::array();
  for (Index i = 0; i < v.gradient.size(); ++i) grad.push_back(v.gradient[i]);
  Emit(io::Dump(Json{{"value", v.value}, {"gradient", grad}}), c.out, out);
  return kOk;
}

int CmdFw(const Common& c, int iters, const std::string& rule, const std::string& trace_path,
          std::ostream& out) {
  Require(c.scores, "--scores");
  const ScoreVector f = io::LoadScores(c.scores);
  const CostSpec cost = LoadCostFlag(c);
  CheckSizes(f.size(), cost.size(), "scores and cost");
  FWOptions o;
  o.iterations = iters;
  o.step_rule = rule == "linesearch" ? StepRule::kLineSearch : StepRule::kClassic;
  const FWResult r = FwMinimize(f, cost, o);
  Json atoms = Json::array();
  for (const auto& [i, w] : r.measure.atoms()) atoms.push_back({{"index", i}, {"weight", w}});
  Json j{{"atoms", atoms},
         {"objective", r.trace.steps.back().objective},
         {"iterations", iters},
         {"step_rule", rule}};
  if (trace_path.empty()) {
    Json trace = Json::array();
    for (const FWStep& s : r.trace.steps)
      trace.push_back({{"iteration", s.iteration}, {"objective", s.objective}, {"atom", s.atom},
                       {"step", s.step}});
    j["trace"] = trace;
  } else {
    std::ostringstream csv;
    r.trace.WriteCsv(csv);
    io::WriteFile(trace_path, csv.str());
  }
  Emit(io::Dump(j), c.out, out);
  return kOk;
}

int CmdAsymptotics(const Common& c, const std::string& eps_list, std::ostream& out) {
  Require(c.measure, "--measure");
  const DiscreteMeasure a = io::LoadMeasure(c.measure);
  CostSpec cost;
  if (c.cost.empty()) {
    cost = CostSpec(Matrix::Ones(a.size(), a.size()) - Matrix::Identity(a.size(), a.size()));
  } else {
    cost = io::LoadCost(c.cost);  // --epsilon does not apply; the table sweeps it
  }
  CheckSizes(a.size(), cost.size(), "measure and cost");
  const double shannon = ShannonNegentropy(a);
  const double gini = GiniNegentropy(a);
  const double kernel = -0.5 * a.weights().dot(cost.base_matrix() * a.weights());
  std::ostringstream csv;
  csv << "epsilon,omega,eps_omega,shannon,gini,kernel_limit\n";
  for (double eps : ParseList(eps_list)) {
    if (!(eps > 0)) throw CLI::ValidationError("--eps", "values must be positive");
    const double omega = ScaledNegentropy(a, cost, eps, PotentialOptions(c));
    csv << io::FormatDouble(eps) << ',' << io::FormatDouble(omega) << ','
        << io::FormatDouble(eps * omega) << ',' << io::FormatDouble(shannon) << ','
        << io::FormatDouble(gini) << ',' << io::FormatDouble(kernel) << '\n';
  }
  Emit(csv.str(), c.out, out);
  return kOk;
}

struct TrainArgs {
  std::string data;
  int classes = 0;
  bool fold_column = false;
  bool synthetic = false;
  long n = 600;
  long k = 4;
  std::string family = "g-logistic";
  std::string l2 = "0";
  int epochs = 500;
  double lr = 1.0;
  int folds = 5;
  std::string curves;
  std::string model;
};

int CmdTrainOrdinal(const Common& c, const TrainArgs& t, std::ostream& out, std::ostream& err) {
  OrdinalDataset data;
  if (t.synthetic) {
    SyntheticOptions so;
    so.n = t.n;
    so.k = t.k;
    so.num_classes = t.classes > 0 ? t.classes : 3;
    so.seed = c.seed;
    data = MakeSyntheticOrdinal(so);
  } else {
    Require(t.data, "--data");
    if (t.classes < 2) throw CLI::ValidationError("--classes", "need the class count (>= 2)");
    data = LoadOrdinalCsv(t.data, t.classes, t.fold_column);
  }
  CostSpec cost = c.cost.empty() ? SquaredCost(data.num_classes) : io::LoadCost(c.cost);
  if (c.epsilon) cost = cost.WithEpsilon(*c.epsilon);
  CheckSizes(cost.size(), data.num_classes, "cost and class count");

  CrossValidationOptions cv;
  cv.family = ParseLossFamily(t.family);
  cv.l2_grid = ParseList(t.l2);
  cv.num_folds = t.folds;
  cv.seed = c.seed;
  cv.train.epochs = t.epochs;
  cv.train.learning_rate = t.lr;
  const CrossValidationResult r = CrossValidate(data, cost, cv);
  for (const std::string& w : r.warnings) err << "warning: " << w << '\n';

  if (!t.curves.empty() || !t.model.empty()) {
    // Refit on a seeded train/validation split to emit curves and a model,
    // using the penalty chosen most often across folds.
    std::map<double, int> votes;
    for (double l2 : r.chosen_l2) ++votes[l2];
    double l2 = r.chosen_l2.front();
    for (const auto& [v, n] : votes)
      if (n > votes[l2]) l2 = v;
    const std::vector<Index> perm = Permutation(data.size(), c.seed);
    const size_t n_val = std::max<size_t>(1, perm.size() / 5);
    std::vector<Index> tr(perm.begin() + static_cast<long>(n_val), perm.end());
    std::vector<Index> va(perm.begin(), perm.begin() + static_cast<long>(n_val));
    const Standardization stats = FitStandardization(data.features, tr);
    TrainOptions o = cv.train;
    o.family = cv.family;
    o.l2 = l2;
    o.validation = MakeSplit(data, va, stats);
    const TrainResult fit = Train(MakeSplit(data, tr, stats), cost, o);
    if (!t.curves.empty()) {
      std::ostringstream csv;
      WriteCurvesCsv(csv, fit.curves);
      io::WriteFile(t.curves, csv.str());
    }
    if (!t.model.empty()) {
      Json w = Json::array();
      for (Index i = 0; i < fit.model.w.rows(); ++i) {
        Json row = Json::array();
        for (Index j = 0; j < fit.model.w.cols(); ++j) row.push_back(fit.model.w(i, j));
        w.push_back(row);
      }
      Json b = Json::array();
      for (Index i = 0; i < fit.model.b.size(); ++i) b.push_back(fit.model.b[i]);
      Json mean = Json::array(), scale = Json::array();
      for (Index j = 0; j < stats.mean.size(); ++j) {
        mean.push_back(stats.mean[j]);
        scale.push_back(stats.scale[j]);
      }
      io::WriteFile(t.model, io::Dump(Json{{"family", t.family},
                                           {"l2", l2},
                                           {"W", w},
                                           {"b", b},
                                           {"feature_mean", mean},
                                           {"feature_scale", scale}}));
    }
  }
  Json metrics = MetricsJson(r);
  metrics["family"] = t.family;
  Emit(io::Dump(metrics), c.out, out);
  return kOk;
}

}  // namespace

int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Geometric softmax, Sinkhorn negentropy and related losses"};
  app.name(args.empty() ? "geoloss" : args[0]);
  app.require_subcommand(1);

  Common gs, pot, hd, fy, fw, asy, tro;
  AddCommon(app.add_subcommand("gsoftmax", "g-LSE value and g-softmax measure of scores"), gs,
            true, false, true);
  AddCommon(app.add_subcommand("potential", "symmetric Sinkhorn potential of a measure"), pot,
            false, true, true);

  CLI::App* hd_cmd = app.add_subcommand("hausdorff", "Hausdorff divergence D(a, b)");
  AddCommon(hd_cmd, hd, false, false, true);
  std::string a_path, b_path;
  hd_cmd->add_option("--a", a_path, "first measure")->check(CLI::ExistingFile);
  hd_cmd->add_option("--b", b_path, "second measure")->check(CLI::ExistingFile);

  AddCommon(app.add_subcommand("fyloss", "Fenchel-Young loss and its gradient"), fy, true, true,
            true);

  CLI::App* fw_cmd = app.add_subcommand("fw", "Frank-Wolfe minimization of Phi");
  AddCommon(fw_cmd, fw, true, false, true);
  int fw_iters = 100;
  std::string fw_rule = "linesearch", fw_trace;
  fw_cmd->add_option("--iters", fw_iters, "iterations")->check(CLI::PositiveNumber);
  fw_cmd->add_option("--step-rule", fw_rule, "classic or linesearch")
      ->check(CLI::IsMember({"classic", "linesearch"}));
  fw_cmd->add_option("--trace", fw_trace, "write the trace CSV here");

  CLI::App* asy_cmd = app.add_subcommand("asymptotics", "negentropy across epsilon vs its limits");
  AddCommon(asy_cmd, asy, false, true, true);
  std::string eps_list = "0.001,0.01,0.1,1,10,100,1000";
  asy_cmd->add_option("--eps", eps_list, "comma-separated epsilon values");

  CLI::App* tr_cmd = app.add_subcommand("train-ordinal", "cross-validated ordinal regression");
  AddCommon(tr_cmd, tro, false, false, true);
  TrainArgs ta;
  tr_cmd->add_option("--data", ta.data, "dataset CSV: features..., label[, fold]")
      ->check(CLI::ExistingFile);
  tr_cmd->add_option("--classes", ta.classes, "number of classes");
  tr_cmd->add_flag("--fold-column", ta.fold_column, "last column holds fold ids");
  tr_cmd->add_flag("--synthetic", ta.synthetic, "generate Gaussian ordinal data from --seed");
  tr_cmd->add_option("--n", ta.n, "synthetic sample count")->check(CLI::PositiveNumber);
  tr_cmd->add_option("--k", ta.k, "synthetic feature count")->check(CLI::PositiveNumber);
  tr_cmd->add_option("--family", ta.family, "loss family")
      ->check(CLI::IsMember({"g-logistic", "multinomial", "hinge", "cost-logistic"}));
  tr_cmd->add_option("--l2", ta.l2, "comma-separated penalty grid");
  tr_cmd->add_option("--epochs", ta.epochs, "epochs")->check(CLI::NonNegativeNumber);
  tr_cmd->add_option("--lr", ta.lr, "learning rate")->check(CLI::PositiveNumber);
  tr_cmd->add_option("--folds", ta.folds, "folds when the data has none")->check(CLI::Range(2, 1000));
  tr_cmd->add_option("--curves", ta.curves, "write training curves CSV here");
  tr_cmd->add_option("--model", ta.model, "write the fitted model JSON here");

  CLI::App* st_cmd = app.add_subcommand("selftest", "run the built-in oracle checks");
  unsigned long long st_seed = 0;
  st_cmd->add_option("--seed", st_seed, "random seed");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();  // program name
  try {
    app.parse(rev);
    if (app.got_subcommand("gsoftmax")) return CmdGSoftmax(gs, out);
    if (app.got_subcommand("potential")) return CmdPotential(pot, out);
    if (app.got_subcommand("hausdorff")) return CmdHausdorff(hd, a_path, b_path, out);
    if (app.got_subcommand("fyloss")) return CmdFyLoss(fy, out);
    if (app.got_subcommand("fw")) return CmdFw(fw, fw_iters, fw_rule, fw_trace, out);
    if (app.got_subcommand("asymptotics")) return CmdAsymptotics(asy, eps_list, out);
    if (app.got_subcommand("train-ordinal")) return CmdTrainOrdinal(tro, ta, out, err);
    if (app.got_subcommand("selftest")) return RunSelfTest(st_seed, out) ? kOk : kFailure;
    return kUsage;
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kParse;
  } catch (const InvalidArgument& e) {
    err << "invalid input: " << e.what() << '\n';
    return kParse;
  } catch (const ConvergenceError& e) {
    err << "solver did not converge: " << e.what() << '\n';
    return kSolver;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kSolver;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace geoloss::cli
