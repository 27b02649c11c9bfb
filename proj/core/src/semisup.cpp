#include "colabel/semisup.hpp"

#include <cmath>
#include <unordered_map>

#include "colabel/diff.hpp"
#include "colabel/errors.hpp"

namespace colabel {
namespace {

double point_distance(const Point& a, const Point& b, int dim) {
  double s = 0.0;
  for (int c = 0; c < dim; ++c) {
    const double d = a[c] - b[c];
    s += d * d;
  }
  return std::sqrt(s);
}

// Distance from x to the nearest boundary or pseudo point.
double labeled_distance(const Point& x, const PointSets& sets, int dim) {
  double best = std::numeric_limits<double>::infinity();
  for (const BoundaryPoint& bp : sets.boundary)
    best = std::min(best, point_distance(x, bp.x, dim));
  for (const PseudoLabel& pl : sets.pseudo) best = std::min(best, point_distance(x, pl.x, dim));
  return best;
}

void require_variance(const ModelEval& model, const FidelityCriteria& criteria) {
  if (criteria.variance_threshold && !model.variance)
    throw ConfigError("semisup: variance threshold set but the model has no posterior variance");
}

ModelRound make_round(const std::vector<PseudoLabel>& pseudo, double total_loss,
                      std::optional<LossBreakdown> losses, const MetricsFn& metrics,
                      const std::function<double(const Point&)>& predict) {
  ModelRound round;
  round.pseudo = pseudo;
  round.pseudo_count = pseudo.size();
  round.total_loss = total_loss;
  round.losses = std::move(losses);
  if (metrics) {
    round.metrics = metrics(predict);
    round.has_metrics = true;
  }
  return round;
}

}  // namespace

void validate_criteria(const FidelityCriteria& criteria) {
  if (!(criteria.residual_threshold > 0.0))
    throw ConfigError("semisup: residual threshold must be positive");
  if (criteria.variance_threshold && !(*criteria.variance_threshold > 0.0))
    throw ConfigError("semisup: variance threshold must be positive");
  if (criteria.proximity_threshold && !(*criteria.proximity_threshold > 0.0))
    throw ConfigError("semisup: proximity threshold must be positive");
  if (criteria.total_loss_gate && !(*criteria.total_loss_gate > 0.0))
    throw ConfigError("semisup: total-loss gate must be positive");
  if (!(criteria.hysteresis >= 1.0)) throw ConfigError("semisup: hysteresis must be at least 1");
}

ModelEval make_pinn_eval(const MlpModel& model, const PdeProblem& problem, double total_loss) {
  ModelEval eval;
  eval.jet = [&model, spec = problem.spec](const Point& x) { return eval_jet(model, x, spec); };
  eval.total_loss = total_loss;
  return eval;
}

ModelEval make_pigp_eval(const GpSolution& solution, const PdeProblem& problem) {
  ModelEval eval;
  eval.jet = [&solution, spec = problem.spec](const Point& x) {
    return gp_mean_jet(solution, x, spec);
  };
  eval.variance = [&solution](const Point& x) { return gp_posterior(solution, x).variance; };
  eval.total_loss = solution.objective;
  return eval;
}

std::vector<PseudoLabel> select_pseudo_labels(const ModelEval& model, const PdeProblem& problem,
                                              const PointSets& sets,
                                              const FidelityCriteria& criteria,
                                              PseudoLabel::Source source, int iteration) {
  validate_criteria(criteria);
  require_variance(model, criteria);
  std::vector<PseudoLabel> out;
  for (size_t i = 0; i < sets.test.size(); ++i) {
    const Point& x = sets.test[i];
    const Jet jet = model.jet(x);
    const double residual = std::abs(problem.residual_value(x, jet));
    if (!(residual < criteria.residual_threshold)) continue;

    std::optional<double> variance;
    if (criteria.variance_threshold) {
      variance = model.variance(x);
      if (!(*variance < *criteria.variance_threshold)) continue;
    }
    if (criteria.proximity_threshold &&
        !(labeled_distance(x, sets, problem.dim) < *criteria.proximity_threshold))
      continue;

    PseudoLabel label;
    label.x = x;
    label.value = jet.u;
    label.residual_score = residual;
    label.variance_score = variance;
    label.source = source;
    label.iteration_added = iteration;
    label.test_index = static_cast<int>(i);
    out.push_back(label);
  }
  return out;
}

std::vector<PseudoLabel> prune_pseudo_labels(const ModelEval& model, const PdeProblem& problem,
                                             const std::vector<PseudoLabel>& current,
                                             const FidelityCriteria& criteria) {
  validate_criteria(criteria);
  require_variance(model, criteria);
  std::vector<PseudoLabel> kept;
  kept.reserve(current.size());
  for (const PseudoLabel& label : current) {
    const Jet jet = model.jet(label.x);
    const double residual = std::abs(problem.residual_value(label.x, jet));
    if (!(residual < criteria.residual_threshold * criteria.hysteresis)) continue;
    if (criteria.variance_threshold &&
        !(model.variance(label.x) < *criteria.variance_threshold * criteria.hysteresis))
      continue;
    kept.push_back(label);
  }
  return kept;
}

std::size_t merge_pseudo_labels(std::vector<PseudoLabel>& dest,
                                const std::vector<PseudoLabel>& selected) {
  std::unordered_map<int, size_t> by_test;
  by_test.reserve(dest.size());
  for (size_t i = 0; i < dest.size(); ++i)
    if (dest[i].test_index >= 0) by_test[dest[i].test_index] = i;

  std::size_t appended = 0;
  for (const PseudoLabel& label : selected) {
    const auto hit = label.test_index >= 0 ? by_test.find(label.test_index) : by_test.end();
    if (hit != by_test.end()) {
      PseudoLabel& old = dest[hit->second];
      old.value = label.value;
      old.residual_score = label.residual_score;
      old.variance_score = label.variance_score;
      old.source = label.source;
    } else {
      dest.push_back(label);
      if (label.test_index >= 0) by_test[label.test_index] = dest.size() - 1;
      ++appended;
    }
  }
  return appended;
}

std::vector<PseudoLabel> gp_bootstrap_labels(const ModelEval& pinn, const PdeProblem& problem,
                                             const PointSets& sets, double near_dist,
                                             double residual_tol, const KernelConfig& kernel,
                                             double noise, bool predict_on_all_test,
                                             int iteration) {
  if (!(near_dist > 0.0) || !(residual_tol > 0.0))
    throw ConfigError("gp_bootstrap_labels: filter thresholds must be positive");

  std::vector<double> residuals(sets.test.size());
  std::vector<size_t> survivors;
  std::vector<Point> pts;
  std::vector<double> values;
  for (size_t i = 0; i < sets.test.size(); ++i) {
    const Point& x = sets.test[i];
    const Jet jet = pinn.jet(x);
    residuals[i] = std::abs(problem.residual_value(x, jet));
    if (residuals[i] < residual_tol && labeled_distance(x, sets, problem.dim) < near_dist) {
      survivors.push_back(i);
      pts.push_back(x);
      values.push_back(jet.u);
    }
  }
  if (survivors.size() < 3) return {};

  const GpSolution fit = gp_regress(pts, values, noise, kernel);
  std::vector<size_t> emit;
  if (predict_on_all_test) {
    emit.resize(sets.test.size());
    for (size_t i = 0; i < emit.size(); ++i) emit[i] = i;
  } else {
    emit = survivors;
  }

  std::vector<PseudoLabel> out;
  out.reserve(emit.size());
  for (size_t i : emit) {
    const GpPosterior post = gp_posterior(fit, sets.test[i]);
    PseudoLabel label;
    label.x = sets.test[i];
    label.value = post.mean;
    label.residual_score = residuals[i];
    label.variance_score = post.variance;
    label.source = PseudoLabel::Source::from_plain_gp;
    label.iteration_added = iteration;
    label.test_index = static_cast<int>(i);
    out.push_back(label);
  }
  return out;
}

namespace {

// One selection phase against `target`'s pseudo set. Returns false when the
// pass ran and appended nothing (the loop's break condition).
bool selection_phase(const ModelEval& teacher, const PdeProblem& problem, PointSets& target,
                     const FidelityCriteria& criteria, PseudoLabel::Source source, int iteration) {
  if (criteria.total_loss_gate && !(teacher.total_loss < *criteria.total_loss_gate)) return true;
  if (criteria.prune)
    target.pseudo = prune_pseudo_labels(teacher, problem, target.pseudo, criteria);
  const std::vector<PseudoLabel> selected =
      select_pseudo_labels(teacher, problem, target, criteria, source, iteration);
  return merge_pseudo_labels(target.pseudo, selected) > 0;
}

}  // namespace

SelfTrainResult self_train_pinn(MlpModel& model, const PdeProblem& problem, PointSets& sets,
                                const TrainConfig& round_config, const FidelityCriteria& criteria,
                                int max_rounds, const MetricsFn& metrics) {
  validate_criteria(criteria);
  if (max_rounds < 1) throw ConfigError("self_train_pinn: max_rounds must be at least 1");

  SelfTrainResult result;
  const auto predict = [&model](const Point& x) { return eval_jet(model, x, {}).u; };
  const auto snapshot = [&](int iteration, const LossBreakdown& loss) {
    RoundSnapshot snap;
    snap.iteration = iteration;
    snap.pinn = make_round(sets.pseudo, loss.total, loss, metrics, predict);
    result.snapshots.push_back(std::move(snap));
  };

  TrainResult tr = train_adam(model, problem, sets, round_config);
  snapshot(0, tr.history.back().loss);
  if (tr.diverged) {
    result.diverged = true;
    return result;
  }

  for (int i = 1; i <= max_rounds; ++i) {
    const ModelEval eval = make_pinn_eval(model, problem, tr.history.back().loss.total);
    if (!selection_phase(eval, problem, sets, criteria, PseudoLabel::Source::self_pinn, i)) break;

    tr = train_adam(model, problem, sets, round_config);
    snapshot(i, tr.history.back().loss);
    if (tr.diverged) {
      result.diverged = true;
      break;
    }
  }
  return result;
}

PigpSelfTrainResult self_train_pigp(const PdeProblem& problem, PointSets& sets,
                                    const PigpConfig& config, const FidelityCriteria& criteria,
                                    int max_rounds, const MetricsFn& metrics) {
  validate_criteria(criteria);
  if (max_rounds < 1) throw ConfigError("self_train_pigp: max_rounds must be at least 1");

  PigpSelfTrainResult result;
  const auto snapshot = [&](int iteration) {
    RoundSnapshot snap;
    snap.iteration = iteration;
    const auto predict = [&result](const Point& x) { return gp_mean(result.solution, x); };
    snap.pigp =
        make_round(sets.pseudo, result.solution.objective, std::nullopt, metrics, predict);
    result.snapshots.push_back(std::move(snap));
  };

  result.solution = pigp_solve(problem, sets, config);
  snapshot(0);

  for (int i = 1; i <= max_rounds; ++i) {
    const ModelEval eval = make_pigp_eval(result.solution, problem);
    if (!selection_phase(eval, problem, sets, criteria, PseudoLabel::Source::self_pigp, i)) break;

    result.solution = pigp_solve(problem, sets, config);
    snapshot(i);
  }
  return result;
}

SelfTrainResult bootstrap_train_pinn(MlpModel& model, const PdeProblem& problem, PointSets& sets,
                                     const TrainConfig& round_config,
                                     const BootstrapConfig& config, const MetricsFn& metrics) {
  if (config.max_rounds < 1)
    throw ConfigError("bootstrap_train_pinn: max_rounds must be at least 1");
  validate_kernel(config.kernel);

  SelfTrainResult result;
  const auto predict = [&model](const Point& x) { return eval_jet(model, x, {}).u; };
  const auto snapshot = [&](int iteration, const LossBreakdown& loss) {
    RoundSnapshot snap;
    snap.iteration = iteration;
    snap.pinn = make_round(sets.pseudo, loss.total, loss, metrics, predict);
    result.snapshots.push_back(std::move(snap));
  };

  TrainResult tr = train_adam(model, problem, sets, round_config);
  snapshot(0, tr.history.back().loss);
  if (tr.diverged) {
    result.diverged = true;
    return result;
  }

  for (int i = 1; i <= config.max_rounds; ++i) {
    const ModelEval eval = make_pinn_eval(model, problem, tr.history.back().loss.total);
    const std::vector<PseudoLabel> labels =
        gp_bootstrap_labels(eval, problem, sets, config.near_dist, config.residual_tol,
                            config.kernel, config.noise, config.predict_on_all_test, i);
    if (merge_pseudo_labels(sets.pseudo, labels) == 0) break;

    tr = train_adam(model, problem, sets, round_config);
    snapshot(i, tr.history.back().loss);
    if (tr.diverged) {
      result.diverged = true;
      break;
    }
  }
  return result;
}

CoTrainResult co_train(MlpModel& pinn, const PdeProblem& problem, const PointSets& base,
                       const TrainConfig& pinn_round, const PigpConfig& pigp_config,
                       const CoTrainConfig& config, const MetricsFn& metrics) {
  validate_criteria(config.pinn_criteria);
  validate_criteria(config.pigp_criteria);
  if (config.max_rounds < 1) throw ConfigError("co_train: max_rounds must be at least 1");
  if (!config.pinn_teaches && !config.pigp_teaches)
    throw ConfigError("co_train: at least one teaching channel must be enabled");

  CoTrainResult result;
  PointSets nn_sets = base;  // labels feeding the PINN (from the PIGP)
  PointSets gp_sets = base;  // labels feeding the PIGP (from the PINN)
  if (config.pigp_collocation > 0) {
    if (static_cast<size_t>(config.pigp_collocation) > gp_sets.collocation.size())
      throw ConfigError("co_train: pigp_collocation exceeds the shared collocation set");
    gp_sets.collocation.resize(config.pigp_collocation);
  }
  if (!config.pigp_boundary.empty()) {
    std::vector<int> seen(config.pigp_boundary.size(), 0);
    std::vector<BoundaryPoint> kept;
    for (const BoundaryPoint& bp : base.boundary) {
      if (static_cast<size_t>(bp.group) >= seen.size())
        throw ConfigError("co_train: pigp_boundary has too few groups");
      if (seen[bp.group] < config.pigp_boundary[bp.group]) {
        kept.push_back(bp);
        ++seen[bp.group];
      }
    }
    for (size_t g = 0; g < seen.size(); ++g)
      if (seen[g] < config.pigp_boundary[g])
        throw ConfigError("co_train: pigp_boundary exceeds the shared boundary set");
    gp_sets.boundary = std::move(kept);
  }

  const auto pinn_predict = [&pinn](const Point& x) { return eval_jet(pinn, x, {}).u; };
  const auto snapshot = [&](int iteration, const LossBreakdown& loss) {
    RoundSnapshot snap;
    snap.iteration = iteration;
    snap.pinn = make_round(nn_sets.pseudo, loss.total, loss, metrics, pinn_predict);
    const auto gp_predict = [&result](const Point& x) { return gp_mean(result.pigp, x); };
    snap.pigp =
        make_round(gp_sets.pseudo, result.pigp.objective, std::nullopt, metrics, gp_predict);
    result.snapshots.push_back(std::move(snap));
  };

  TrainResult tr = train_adam(pinn, problem, nn_sets, pinn_round);
  result.pigp = pigp_solve(problem, gp_sets, pigp_config);
  snapshot(0, tr.history.back().loss);
  if (tr.diverged) {
    result.diverged = true;
    result.pinn_pseudo = std::move(nn_sets.pseudo);
    result.pigp_pseudo = std::move(gp_sets.pseudo);
    return result;
  }

  for (int i = 1; i <= config.max_rounds; ++i) {
    bool exhausted = false;
    if (config.pinn_teaches) {
      const ModelEval eval = make_pinn_eval(pinn, problem, tr.history.back().loss.total);
      if (!selection_phase(eval, problem, gp_sets, config.pinn_criteria,
                           PseudoLabel::Source::from_pinn, i))
        exhausted = true;
    }
    if (config.pigp_teaches) {
      const ModelEval eval = make_pigp_eval(result.pigp, problem);
      if (!selection_phase(eval, problem, nn_sets, config.pigp_criteria,
                           PseudoLabel::Source::from_pigp, i))
        exhausted = true;
    }
    if (exhausted) break;

    if (config.train_pinn) tr = train_adam(pinn, problem, nn_sets, pinn_round);
    if (config.train_pigp) result.pigp = pigp_solve(problem, gp_sets, pigp_config);
    snapshot(i, tr.history.back().loss);
    if (tr.diverged) {
      result.diverged = true;
      break;
    }
  }

  result.pinn_pseudo = std::move(nn_sets.pseudo);
  result.pigp_pseudo = std::move(gp_sets.pseudo);
  return result;
}

}  // namespace colabel
