#include "colabel/pinn.hpp"

#include <cmath>
#include <cstdio>

#include "colabel/errors.hpp"

namespace colabel {

namespace {

void check_weights(const PdeProblem& problem, const LossWeights& weights) {
  if (weights.boundary.size() != problem.boundary_groups.size())
    throw ConfigError("pinn: expected " + std::to_string(problem.boundary_groups.size()) +
                      " boundary weights, got " + std::to_string(weights.boundary.size()));
  if (weights.residual < 0.0 || weights.pseudo < 0.0)
    throw ConfigError("pinn: loss weights must be non-negative");
  for (double w : weights.boundary)
    if (w < 0.0) throw ConfigError("pinn: loss weights must be non-negative");
}

LossBreakdown unpack(const LossValue& value, const LossWeights& weights,
                     std::size_t n_groups) {
  LossBreakdown b;
  b.weights = weights;
  b.residual_term = value.terms[0];
  b.boundary_terms.assign(value.terms.begin() + 1, value.terms.begin() + 1 + n_groups);
  b.pseudo_term = value.terms[1 + n_groups];
  b.total = value.total;
  return b;
}

}  // namespace

double LossBreakdown::recompute_total() const {
  double t = 0.0;
  if (weights.residual != 0.0 && residual_term != 0.0) t += weights.residual * residual_term;
  for (std::size_t i = 0; i < boundary_terms.size(); ++i) {
    const double w = i < weights.boundary.size() ? weights.boundary[i] : 0.0;
    if (w != 0.0 && boundary_terms[i] != 0.0) t += w * boundary_terms[i];
  }
  if (weights.pseudo != 0.0 && pseudo_term != 0.0) t += weights.pseudo * pseudo_term;
  return t;
}

Adam::Adam(Eigen::Index n, const AdamConfig& config) : config_(config) {
  if (!(config.beta1 >= 0.0 && config.beta1 < 1.0) || !(config.beta2 >= 0.0 && config.beta2 < 1.0))
    throw ConfigError("adam: betas must lie in [0,1)");
  if (!(config.eps > 0.0)) throw ConfigError("adam: eps must be positive");
  m_ = Eigen::VectorXd::Zero(n);
  v_ = Eigen::VectorXd::Zero(n);
}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr) {
  ++t_;
  m_ = config_.beta1 * m_ + (1.0 - config_.beta1) * grad;
  v_ = config_.beta2 * v_ + (1.0 - config_.beta2) * grad.cwiseProduct(grad);
  const double mc = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double vc = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  params.array() -= lr * (m_.array() / mc) / ((v_.array() / vc).sqrt() + config_.eps);
}

void Adam::reset() {
  m_.setZero();
  v_.setZero();
  t_ = 0;
}

std::vector<LossTerm> build_loss_terms(const PdeProblem& problem, const PointSets& sets,
                                       const LossWeights& weights) {
  check_weights(problem, weights);

  std::vector<LossTerm> terms;
  terms.reserve(2 + problem.boundary_groups.size());

  LossTerm residual;
  residual.kind = LossTerm::Kind::residual;
  residual.weight = weights.residual;
  residual.points = sets.collocation;
  residual.spec = problem.spec;
  residual.residual = problem.residual;
  terms.push_back(std::move(residual));

  for (std::size_t g = 0; g < problem.boundary_groups.size(); ++g) {
    const BoundaryGroup& group = problem.boundary_groups[g];
    LossTerm t;
    t.weight = weights.boundary[g];
    for (const BoundaryPoint& b : sets.boundary) {
      if (b.group != static_cast<int>(g)) continue;
      t.points.push_back(b.x);
      if (group.kind == BoundaryGroup::Kind::dirichlet)
        t.targets.push_back(group.target(b.x));
      else
        t.partners.push_back(group.partner_map(b.x));
    }
    t.kind = group.kind == BoundaryGroup::Kind::dirichlet ? LossTerm::Kind::value
                                                          : LossTerm::Kind::pair;
    terms.push_back(std::move(t));
  }

  LossTerm pseudo;
  pseudo.kind = LossTerm::Kind::value;
  pseudo.weight = weights.pseudo;
  pseudo.points.reserve(sets.pseudo.size());
  pseudo.targets.reserve(sets.pseudo.size());
  for (const PseudoLabel& l : sets.pseudo) {
    pseudo.points.push_back(l.x);
    pseudo.targets.push_back(l.value);
  }
  terms.push_back(std::move(pseudo));
  return terms;
}

LossBreakdown pinn_loss(const MlpModel& model, const PdeProblem& problem,
                        const PointSets& sets, const LossWeights& weights) {
  if (sets.collocation.empty() && sets.boundary.empty())
    throw ConfigError("pinn: nothing to fit (both S_CL and S_BC are empty)");
  auto terms = build_loss_terms(problem, sets, weights);
  return unpack(loss_value(model, terms), weights, problem.boundary_groups.size());
}

TrainResult train_adam(MlpModel& model, const PdeProblem& problem, const PointSets& sets,
                       const TrainConfig& config) {
  if (config.steps < 0) throw ConfigError("pinn: negative step count");
  if (!(config.learning_rate > 0.0)) throw ConfigError("pinn: learning rate must be positive");
  if (config.history_stride < 1) throw ConfigError("pinn: history stride must be >= 1");
  if (sets.collocation.empty() && sets.boundary.empty())
    throw ConfigError("pinn: nothing to fit (both S_CL and S_BC are empty)");

  const std::size_t n_groups = problem.boundary_groups.size();
  LossEngine engine(model, build_loss_terms(problem, sets, config.weights));
  Adam adam(model.params.size(), config.adam);

  TrainResult result;
  auto record = [&](int step, const LossValue& value) {
    result.history.push_back(HistoryRow{step, unpack(value, config.weights, n_groups)});
  };

  Eigen::VectorXd grad;
  for (int step = 0; step < config.steps; ++step) {
    LossValue value = engine.value_and_grad(model, grad);
    if (!value.finite || !grad.allFinite()) {
      result.diverged = true;
      record(step, value);
      return result;
    }
    const bool recorded = step % config.history_stride == 0;
    if (recorded) record(step, value);
    if (config.stop_total_loss && value.total < *config.stop_total_loss) {
      result.stopped_early = true;
      if (!recorded) record(step, value);
      return result;
    }
    adam.step(model.params, grad, config.learning_rate);
    ++result.steps_run;
  }

  LossValue final_value = engine.value(model);
  if (!final_value.finite) result.diverged = true;
  record(config.steps, final_value);
  return result;
}

std::vector<double> predict(const MlpModel& model, const std::vector<Point>& grid) {
  return eval_values(model, grid);
}

void write_history_csv(const std::vector<HistoryRow>& history, std::size_t n_boundary_groups,
                       const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw IoError("cannot open " + path + " for writing");
  std::fputs("step,total,residual", f);
  for (std::size_t g = 0; g < n_boundary_groups; ++g) std::fprintf(f, ",bc_%zu", g);
  std::fputs(",pseudo\n", f);
  for (const HistoryRow& row : history) {
    std::fprintf(f, "%d,%.17g,%.17g", row.step, row.loss.total, row.loss.residual_term);
    for (std::size_t g = 0; g < n_boundary_groups; ++g)
      std::fprintf(f, ",%.17g", g < row.loss.boundary_terms.size() ? row.loss.boundary_terms[g] : 0.0);
    std::fprintf(f, ",%.17g\n", row.loss.pseudo_term);
  }
  if (std::fclose(f) != 0) throw IoError("failed to write " + path);
}

}  // namespace colabel
