#include "liqport/hjb/policy_iteration.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <variant>

#include "liqport/numerics/random.hpp"

namespace liqport::hjb {

namespace {

market::MarketState column_state(const StateBatch& X, Eigen::Index i) {
  return {X(kInW, i), X(kInV, i), X(kInTheta, i), X(kInL, i), X(kInT, i)};
}

// Equal-sized chunks covering [0, n), none larger than `chunk`, so scratch
// buffers keep one shape.
std::vector<std::array<Eigen::Index, 2>> chunks(Eigen::Index n, std::size_t chunk) {
  const auto c = static_cast<Eigen::Index>(chunk);
  const Eigen::Index count = (n + c - 1) / c;
  std::vector<std::array<Eigen::Index, 2>> out;
  for (Eigen::Index k = 0; k < count; ++k) {
    const Eigen::Index s = n * k / count, e = n * (k + 1) / count;
    out.push_back({s, e - s});
  }
  return out;
}

// Per-thread jet reused across loss calls.
MlpJet& scratch_jet(int slot) {
  thread_local std::array<MlpJet, 2> jets;
  return jets[static_cast<std::size_t>(slot)];
}

struct ChunkJet {
  JetSpec spec;
  std::array<int, kChannels> rows{};
  std::vector<int> active;
};

ChunkJet chunk_jet(const ChannelMask& mask) {
  ChunkJet j;
  j.spec = jet_spec_for(mask);
  j.rows = channel_rows(j.spec, mask);
  for (int c = 0; c < kChannels; ++c)
    if (mask[c]) j.active.push_back(c);
  return j;
}

double channel_value(const JetOutput& o, int row, int nf, Eigen::Index i) {
  return row < nf ? o.first(row, i) : o.second(row - nf, i);
}

double& channel_seed(Eigen::MatrixXd& dfirst, Eigen::MatrixXd& dsecond, int row, int nf, Eigen::Index i) {
  return row < nf ? dfirst(row, i) : dsecond(row - nf, i);
}

// Terminal mean squared mismatch; accumulates 2 (Q - target) / n into grad.
double terminal_term(const Mlp& value, const InputScaling& sc, const SolverProblem& problem, Eigen::VectorXd* grad,
                     std::size_t chunk) {
  const StateBatch& X = problem.points.terminal;
  const Eigen::Index n = X.cols();
  const JetSpec empty;
  MlpJet& jet = scratch_jet(1);
  double sum = 0.0;
  for (const auto& [s, b] : chunks(n, chunk)) {
    jet.forward(value, sc, X.middleCols(s, b), empty);
    const Eigen::RowVectorXd e = jet.output().value - problem.terminal_target.segment(s, b);
    sum += e.squaredNorm();
    if (grad) jet.backward(2.0 * e / static_cast<double>(n), Eigen::MatrixXd(0, b), Eigen::MatrixXd(0, b), *grad);
  }
  return sum / static_cast<double>(n);
}

}  // namespace

SolverProblem make_problem(const CollocationSet& points, const market::ModelParams& p, const utility::UtilitySpec& u) {
  if (std::holds_alternative<utility::SShaped>(u))
    throw std::invalid_argument("S-shaped terminal utility must be replaced by its concave envelope (concavify)");
  utility::validate(u);
  p.validate();
  SolverProblem pr;
  pr.points = points;
  pr.params = p;
  pr.utility = u;
  pr.ops = operator_batch(points.interior, p);
  pr.terminal_target.resize(points.terminal.cols());
  for (Eigen::Index i = 0; i < points.terminal.cols(); ++i)
    pr.terminal_target(i) = utility::evaluate(u, points.terminal(kInW, i));
  if (!pr.terminal_target.allFinite()) throw std::domain_error("terminal utility is not finite on the terminal points");
  return pr;
}

LossBreakdown evaluation_loss(const Mlp& value, const InputScaling& sc, const Eigen::RowVectorXd& omega,
                              const SolverProblem& problem, Eigen::VectorXd* grad, std::size_t chunk) {
  if (chunk == 0) throw std::invalid_argument("chunk must be > 0");
  const StateBatch& X = problem.points.interior;
  const Eigen::Index n = X.cols();
  if (omega.size() != n) throw std::invalid_argument("one allocation per interior point expected");
  const ChunkJet cj = chunk_jet(problem.ops.active);
  const int nf = static_cast<int>(cj.spec.first.size());
  const auto ns = static_cast<Eigen::Index>(cj.spec.second.size());

  Eigen::VectorXd g_pde;
  if (grad) {
    grad->setZero(static_cast<Eigen::Index>(value.size()));
    g_pde.setZero(grad->size());
  }
  LossBreakdown out;
  double sum = 0.0;
  MlpJet& jet = scratch_jet(0);
  for (const auto& [s, b] : chunks(n, chunk)) {
    jet.forward(value, sc, X.middleCols(s, b), cj.spec);
    const JetOutput& o = jet.output();
    Eigen::MatrixXd dfirst = Eigen::MatrixXd::Zero(nf, b), dsecond = Eigen::MatrixXd::Zero(ns, b);
    for (Eigen::Index i = 0; i < b; ++i) {
      const Eigen::Index k = s + i;
      const double w = omega(k);
      double r = 0.0;
      for (int c : cj.active) {
        const double coef = problem.ops.K0(c, k) + w * (problem.ops.K1(c, k) + w * problem.ops.K2(c, k));
        r += coef * channel_value(o, cj.rows[c], nf, i);
      }
      if (!std::isfinite(r)) {
        ++out.excluded;
        continue;
      }
      sum += r * r;
      if (grad)
        for (int c : cj.active) {
          const double coef = problem.ops.K0(c, k) + w * (problem.ops.K1(c, k) + w * problem.ops.K2(c, k));
          channel_seed(dfirst, dsecond, cj.rows[c], nf, i) = 2.0 * r * coef;
        }
    }
    if (grad) jet.backward(Eigen::RowVectorXd::Zero(b), dfirst, dsecond, g_pde);
  }
  const auto kept = static_cast<double>(n - static_cast<Eigen::Index>(out.excluded));
  if (kept <= 0.0) throw std::domain_error("no interior point has a finite residual");
  out.pde = sum / kept;
  if (grad) *grad = g_pde / kept;
  out.terminal = terminal_term(value, sc, problem, grad, chunk);
  out.total = out.pde + out.terminal;
  if (!std::isfinite(out.total)) throw std::domain_error("evaluation loss is not finite");
  return out;
}

LossBreakdown evaluation_loss(const ValueFunction& value, const DerivativeFunction& derivatives,
                              const PolicyFunction& policy, const SolverProblem& problem) {
  const StateBatch& X = problem.points.interior;
  LossBreakdown out;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < X.cols(); ++i) {
    const market::MarketState s = column_state(X, i);
    const double r = pde_residual(derivatives(s), policy(s), s, problem.params);
    if (!std::isfinite(r)) {
      ++out.excluded;
      continue;
    }
    sum += r * r;
  }
  const auto kept = static_cast<double>(X.cols() - static_cast<Eigen::Index>(out.excluded));
  if (kept <= 0.0) throw std::domain_error("no interior point has a finite residual");
  out.pde = sum / kept;
  const StateBatch& T = problem.points.terminal;
  double tsum = 0.0;
  for (Eigen::Index i = 0; i < T.cols(); ++i) {
    const double e = value(column_state(T, i)) - problem.terminal_target(i);
    tsum += e * e;
  }
  out.terminal = tsum / static_cast<double>(T.cols());
  out.total = out.pde + out.terminal;
  if (!std::isfinite(out.total)) throw std::domain_error("evaluation loss is not finite");
  return out;
}

Eigen::MatrixXd interior_jets(const Mlp& value, const InputScaling& sc, const SolverProblem& problem,
                              std::size_t chunk) {
  if (chunk == 0) throw std::invalid_argument("chunk must be > 0");
  const StateBatch& X = problem.points.interior;
  const Eigen::Index n = X.cols();
  const ChunkJet cj = chunk_jet(problem.ops.active);
  const int nf = static_cast<int>(cj.spec.first.size());
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(kChannels, n);
  MlpJet& jet = scratch_jet(0);
  for (const auto& [s, b] : chunks(n, chunk)) {
    jet.forward(value, sc, X.middleCols(s, b), cj.spec);
    const JetOutput& o = jet.output();
    for (int c : cj.active)
      J.row(c).segment(s, b) = cj.rows[c] < nf ? o.first.row(cj.rows[c]) : o.second.row(cj.rows[c] - nf);
  }
  return J;
}

Eigen::RowVectorXd interior_policy(const Mlp& policy, const InputScaling& sc, const SolverProblem& problem) {
  return mlp_batch(policy, sc, problem.points.interior);
}

double improvement_objective(const Mlp& policy, const InputScaling& sc, const Eigen::MatrixXd& jets,
                             const SolverProblem& problem, Eigen::VectorXd* grad, std::size_t chunk) {
  if (chunk == 0) throw std::invalid_argument("chunk must be > 0");
  const StateBatch& X = problem.points.interior;
  const Eigen::Index n = X.cols();
  if (jets.rows() != kChannels || jets.cols() != n) throw std::invalid_argument("jets must be 13 x n_interior");
  if (grad) grad->setZero(static_cast<Eigen::Index>(policy.size()));
  // Per-point quadratic A w^2 + B w + C.
  const Eigen::RowVectorXd A = (problem.ops.K2.array() * jets.array()).colwise().sum();
  const Eigen::RowVectorXd Bq = (problem.ops.K1.array() * jets.array()).colwise().sum();
  const Eigen::RowVectorXd Cq = (problem.ops.K0.array() * jets.array()).colwise().sum();
  const JetSpec empty;
  MlpJet& jet = scratch_jet(1);
  double sum = 0.0;
  for (const auto& [s, b] : chunks(n, chunk)) {
    jet.forward(policy, sc, X.middleCols(s, b), empty);
    const Eigen::RowVectorXd& w = jet.output().value;
    const auto a = A.segment(s, b).array(), bb = Bq.segment(s, b).array(), c = Cq.segment(s, b).array();
    sum += (a * w.array().square() + bb * w.array() + c).sum();
    if (grad) {
      const Eigen::RowVectorXd dw = ((2.0 * a * w.array() + bb) / static_cast<double>(n)).matrix();
      jet.backward(dw, Eigen::MatrixXd(0, b), Eigen::MatrixXd(0, b), *grad);
    }
  }
  return sum / static_cast<double>(n);
}

StepResult policy_evaluation_step(const NetworkParams& n, const SolverProblem& problem,
                                  const numerics::OptimizerConfig& config, std::size_t chunk) {
  const Eigen::RowVectorXd omega = interior_policy(n.policy, n.scaling, problem);
  Mlp work = n.value;
  std::size_t excluded = 0;
  const numerics::Objective f = [&](const Eigen::VectorXd& theta, Eigen::VectorXd& g) {
    work.set_theta(theta);
    try {
      const LossBreakdown l = evaluation_loss(work, n.scaling, omega, problem, &g, chunk);
      excluded = l.excluded;
      return l.total;
    } catch (const std::domain_error&) {
      g.setZero();
      return std::numeric_limits<double>::infinity();
    }
  };
  StepResult r;
  r.optimizer = numerics::minimize(f, n.value.theta(), config);
  r.theta = r.optimizer.x;
  r.objective = r.optimizer.f;
  r.excluded = excluded;
  r.failed = r.optimizer.line_search_failed || !std::isfinite(r.objective);
  return r;
}

StepResult policy_improvement_step(const NetworkParams& n, const SolverProblem& problem,
                                   const numerics::OptimizerConfig& config, std::size_t chunk) {
  return policy_improvement_step(n, problem, interior_jets(n.value, n.scaling, problem, chunk), config, chunk);
}

StepResult policy_improvement_step(const NetworkParams& n, const SolverProblem& problem, const Eigen::MatrixXd& jets,
                                   const numerics::OptimizerConfig& config, std::size_t chunk) {
  Mlp work = n.policy;
  const numerics::Objective f = [&](const Eigen::VectorXd& theta, Eigen::VectorXd& g) {
    work.set_theta(theta);
    const double v = improvement_objective(work, n.scaling, jets, problem, &g, chunk);
    g = -g;
    return -v;
  };
  StepResult r;
  r.optimizer = numerics::minimize(f, n.policy.theta(), config);
  r.theta = r.optimizer.x;
  r.objective = -r.optimizer.f;
  r.failed = r.optimizer.line_search_failed || !std::isfinite(r.objective);
  return r;
}

numerics::OptimizerConfig SolverConfig::default_evaluation_optimizer() {
  numerics::OptimizerConfig c;
  c.method = numerics::Method::lbfgs;
  c.learning_rate = 1.0;
  c.max_iter = 200;
  c.gradient_tolerance = 1e-9;
  return c;
}

numerics::OptimizerConfig SolverConfig::default_improvement_optimizer() {
  numerics::OptimizerConfig c;
  c.method = numerics::Method::lbfgs;
  c.learning_rate = 1.0;
  c.max_iter = 100;
  c.gradient_tolerance = 1e-9;
  return c;
}

void SolverConfig::validate() const {
  if (hidden < 1) throw std::invalid_argument("hidden width must be >= 1");
  if (n_interior == 0 || n_terminal == 0) throw std::invalid_argument("collocation counts must be > 0");
  if (max_outer < 1) throw std::invalid_argument("max_outer must be >= 1");
  if (!(tolerance > 0.0)) throw std::invalid_argument("tolerance must be > 0");
  if (divergence_window < 1) throw std::invalid_argument("divergence_window must be >= 1");
  if (chunk == 0) throw std::invalid_argument("chunk must be > 0");
  if (monitor_nodes < 3) throw std::invalid_argument("monitor_nodes must be >= 3");
  if (!(init_amplitude > 0.0)) throw std::invalid_argument("init_amplitude must be > 0");
  evaluation.validate();
  improvement.validate();
}

SolveReport policy_iteration(const market::ModelParams& p, const utility::UtilitySpec& u, const Domain& domain,
                             const SolverConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  config.validate();
  domain.validate();
  const CollocationSet points = sample_collocation(domain, config.n_interior, config.n_terminal,
                                                   numerics::substream_seed(config.seed, 2));
  const SolverProblem problem = make_problem(points, p, u);
  const MonitoringGrid grid = monitoring_grid(domain, config.monitor_nodes);

  SolveReport rep;
  rep.networks = init_networks(domain, config.hidden, config.seed, config.init_amplitude);
  NetworkParams& net = rep.networks;

  Eigen::RowVectorXd reference;
  if (config.reference) {
    reference.resize(grid.points.cols());
    for (Eigen::Index i = 0; i < grid.points.cols(); ++i) reference(i) = config.reference(column_state(grid.points, i));
  }

  Eigen::RowVectorXd q_prev = mlp_batch(net.value, net.scaling, grid.points);
  int rises = 0;
  double prev_loss = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= config.max_outer; ++k) {
    IterationRecord rec;
    rec.iteration = k;

    const StepResult ev = policy_evaluation_step(net, problem, config.evaluation, config.chunk);
    net.value.set_theta(ev.theta);
    rec.evaluation_iterations = ev.optimizer.iterations;
    rec.evaluation_failed = ev.failed;

    const StepResult im = policy_improvement_step(net, problem, config.improvement, config.chunk);
    net.policy.set_theta(im.theta);
    rec.improvement_iterations = im.optimizer.iterations;
    rec.improvement_failed = im.failed;
    rec.generator_mean = im.objective;

    const LossBreakdown l =
        evaluation_loss(net.value, net.scaling, interior_policy(net.policy, net.scaling, problem), problem, nullptr,
                        config.chunk);
    rec.evaluation_loss = l.total;
    rec.pde_loss = l.pde;
    rec.terminal_loss = l.terminal;
    rec.excluded = l.excluded;

    const Eigen::RowVectorXd q = mlp_batch(net.value, net.scaling, grid.points);
    rec.max_relative_change =
        ((q - q_prev).array().abs() / q_prev.array().abs().max(1.0)).maxCoeff();
    rec.reference_distance = config.reference ? (q - reference).cwiseAbs().maxCoeff()
                                               : std::numeric_limits<double>::quiet_NaN();
    q_prev = q;
    rep.iterations.push_back(rec);
    if (config.on_iteration) config.on_iteration(rec, net);

    rises = rec.evaluation_loss > prev_loss ? rises + 1 : 0;
    prev_loss = rec.evaluation_loss;
    if (!std::isfinite(rec.evaluation_loss)) {
      rep.diverged = true;
      rep.message = "evaluation loss is not finite";
      break;
    }
    if (rises >= config.divergence_window) {
      rep.diverged = true;
      rep.message = "evaluation loss rose on " + std::to_string(rises) + " consecutive outer iterations (last " +
                    std::to_string(rec.evaluation_loss) + ")";
      break;
    }
    if (rec.max_relative_change < config.tolerance) {
      rep.converged = true;
      rep.message = "converged after " + std::to_string(k) + " outer iterations";
      break;
    }
  }
  if (!rep.converged && !rep.diverged)
    rep.message = "outer iteration cap reached without meeting the tolerance";
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

}  // namespace liqport::hjb
