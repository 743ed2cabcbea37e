#include "omcal/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "omcal/errors.hpp"
#include "omcal/rng.hpp"
#include "omcal/units.hpp"

namespace omcal {

namespace {

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd clamp_to_bounds(Eigen::VectorXd x, const Eigen::VectorXd& lo,
                                const Eigen::VectorXd& hi) {
  if (lo.size()) x = x.cwiseMax(lo);
  if (hi.size()) x = x.cwiseMin(hi);
  return x;
}

double weighted_ssr(const Eigen::VectorXd& r, const Eigen::VectorXd& w) {
  if (!w.size()) return r.squaredNorm();
  return (w.array() * r.array().square()).sum();
}

}  // namespace

double FitResult::sigma(int i) const {
  if (covariance.rows() <= i) return std::numeric_limits<double>::quiet_NaN();
  return std::sqrt(std::max(0.0, covariance(i, i)));
}

Eigen::MatrixXd numeric_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& fn,
    const Eigen::VectorXd& params, const JacobianStepPolicy& policy,
    const Eigen::VectorXd* lower, const Eigen::VectorXd* upper) {
  const Eigen::Index n = params.size();
  Eigen::VectorXd base = fn(params);
  if (!base.allFinite())
    throw EvaluationError("numeric_jacobian: residual non-finite at base point", to_std(params));
  Eigen::MatrixXd jac(base.size(), n);

  for (Eigen::Index j = 0; j < n; ++j) {
    const double scale = policy.scales.size() ? policy.scales[j] : 1.0;
    const double h = policy.relative_step * std::max(std::abs(params[j]), scale);
    double hp = h, hm = h;
    if (upper && upper->size() && params[j] + h > (*upper)[j]) hp = 0.0;
    if (lower && lower->size() && params[j] - h < (*lower)[j]) hm = 0.0;
    if (hp == 0.0 && hm == 0.0) hp = h;  // degenerate interval, step anyway

    Eigen::VectorXd xp = params, xm = params;
    xp[j] += hp;
    xm[j] -= hm;
    Eigen::VectorXd rp = hp > 0.0 ? fn(xp) : base;
    Eigen::VectorXd rm = hm > 0.0 ? fn(xm) : base;
    if (!rp.allFinite()) throw EvaluationError("numeric_jacobian: non-finite residual", to_std(xp));
    if (!rm.allFinite()) throw EvaluationError("numeric_jacobian: non-finite residual", to_std(xm));
    jac.col(j) = (rp - rm) / (hp + hm);
  }
  return jac;
}

FitResult solve_least_squares(const FitProblem& problem, const FitOptions& options) {
  if (!problem.residual) throw InvalidArgumentError("solve_least_squares: missing residual");
  const Eigen::Index n = problem.initial.size();
  if (n == 0) throw InvalidArgumentError("solve_least_squares: empty parameter vector");
  if (problem.lower.size() && problem.lower.size() != n)
    throw InvalidArgumentError("solve_least_squares: bounds size mismatch");
  if (problem.upper.size() && problem.upper.size() != n)
    throw InvalidArgumentError("solve_least_squares: bounds size mismatch");

  Eigen::VectorXd x = clamp_to_bounds(problem.initial, problem.lower, problem.upper);
  if (problem.lower.size() || problem.upper.size()) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (problem.lower.size() && problem.upper.size() &&
          problem.lower[j] > problem.upper[j])
        throw InvalidArgumentError("solve_least_squares: lower bound above upper bound");
    }
  }

  // Per-parameter scales keep lambda*I damping meaningful across magnitudes.
  Eigen::VectorXd scales(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double s = problem.scales.size() ? problem.scales[j] : 0.0;
    if (s <= 0.0) s = std::abs(x[j]);
    if (s <= 0.0) s = 1.0;
    scales[j] = s;
  }

  Eigen::VectorXd r = problem.residual(x);
  if (!r.allFinite())
    throw EvaluationError("solve_least_squares: residual non-finite at initial point", to_std(x));
  const Eigen::Index m = r.size();
  if (m < n)
    throw InvalidArgumentError("solve_least_squares: fewer residuals than parameters");
  if (problem.weights.size() && problem.weights.size() != m)
    throw InvalidArgumentError("solve_least_squares: weights size mismatch");

  double ssr = weighted_ssr(r, problem.weights);

  auto eval_jacobian = [&](const Eigen::VectorXd& at) -> Eigen::MatrixXd {
    if (problem.jacobian) {
      Eigen::MatrixXd jac = problem.jacobian(at);
      if (!jac.allFinite())
        throw EvaluationError("solve_least_squares: jacobian non-finite", to_std(at));
      return jac;
    }
    JacobianStepPolicy policy;
    policy.scales = scales;
    return numeric_jacobian(problem.residual, at, policy,
                            problem.lower.size() ? &problem.lower : nullptr,
                            problem.upper.size() ? &problem.upper : nullptr);
  };

  FitResult result;
  result.status = FitStatus::MaxIterations;

  double lambda = -1.0;  // set from the first normal matrix
  int iter = 0;
  int tiny_improvements = 0;
  bool jacobian_fresh = false;
  Eigen::MatrixXd jac;
  Eigen::MatrixXd normal;   // scaled J^T W J
  Eigen::VectorXd gradient; // scaled J^T W r

  for (iter = 0; iter < options.max_iterations; ++iter) {
    if (!jacobian_fresh) {
      jac = eval_jacobian(x);
      // Column scaling: d r / d y_j with y = x / scale.
      for (Eigen::Index j = 0; j < n; ++j) jac.col(j) *= scales[j];
      if (problem.weights.size()) {
        normal = jac.transpose() * problem.weights.asDiagonal() * jac;
        gradient = jac.transpose() * (problem.weights.asDiagonal() * r);
      } else {
        normal = jac.transpose() * jac;
        gradient = jac.transpose() * r;
      }
      jacobian_fresh = true;
    }

    if (lambda < 0.0) {
      const double max_diag = normal.diagonal().maxCoeff();
      lambda = options.initial_lambda_factor * (max_diag > 0.0 ? max_diag : 1.0);
    }

    // A vanishing gradient makes the damped step vanish, so the step
    // criterion below covers gradient convergence; the gradient test runs
    // once more on the final point after the loop.

    Eigen::MatrixXd damped = normal;
    damped.diagonal().array() += lambda;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
    Eigen::VectorXd step_scaled = ldlt.solve(-gradient);
    if (ldlt.info() != Eigen::Success || !step_scaled.allFinite()) {
      if (lambda > 1e18 * std::max(1.0, normal.diagonal().maxCoeff()))
        throw IllConditionedError("solve_least_squares: singular normal equations");
      lambda *= options.lambda_increase;
      continue;
    }

    Eigen::VectorXd candidate = x + (step_scaled.array() * scales.array()).matrix();
    candidate = clamp_to_bounds(candidate, problem.lower, problem.upper);
    Eigen::VectorXd actual_step = candidate - x;

    // A proposed step below the resolution of step_tol means no further
    // progress is possible: take it if it helps, then stop.
    const double ynorm = (x.array() / scales.array()).matrix().norm();
    const double snorm = (actual_step.array() / scales.array()).matrix().norm();
    const bool step_below_tol = snorm <= options.step_tol * (ynorm + options.step_tol);

    Eigen::VectorXd r_new = problem.residual(candidate);
    const bool finite = r_new.allFinite();
    const double ssr_new = finite ? weighted_ssr(r_new, problem.weights)
                                  : std::numeric_limits<double>::infinity();

    if (ssr_new < ssr) {
      const double improvement = ssr - ssr_new;
      x = candidate;
      r = r_new;
      ssr = ssr_new;
      lambda /= options.lambda_decrease;
      jacobian_fresh = false;
      // Two consecutive negligible improvements mean the solver is grinding
      // at the resolution floor.
      if (improvement <= options.function_tol * std::max(ssr, 1e-300)) {
        if (++tiny_improvements >= 2) {
          result.status = FitStatus::Converged;
          ++iter;
          break;
        }
      } else {
        tiny_improvements = 0;
      }
    } else {
      lambda *= options.lambda_increase;
      if (!step_below_tol && lambda > 1e15 * std::max(1.0, normal.diagonal().maxCoeff())) {
        result.status = FitStatus::Stalled;
        break;
      }
    }
    if (step_below_tol) {
      result.status = FitStatus::Converged;
      ++iter;
      break;
    }
  }

  // Covariance at the optimum: residual-variance-scaled inverse of J^T W J.
  if (!jacobian_fresh) {
    jac = eval_jacobian(x);
    for (Eigen::Index j = 0; j < n; ++j) jac.col(j) *= scales[j];
    if (problem.weights.size()) {
      normal = jac.transpose() * problem.weights.asDiagonal() * jac;
      gradient = jac.transpose() * (problem.weights.asDiagonal() * r);
    } else {
      normal = jac.transpose() * jac;
      gradient = jac.transpose() * r;
    }
  }
  if (result.status != FitStatus::Converged && gradient.size() &&
      gradient.lpNorm<Eigen::Infinity>() <= options.gradient_tol * std::max(1.0, ssr))
    result.status = FitStatus::Converged;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(normal);
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double ev_max = ev.maxCoeff();
  const double ev_min = ev.minCoeff();
  result.condition_number = (ev_min > 0.0) ? ev_max / ev_min
                                           : std::numeric_limits<double>::infinity();
  result.covariance_reliable =
      std::isfinite(result.condition_number) && result.condition_number < options.condition_limit &&
      m > n;

  Eigen::MatrixXd cov_scaled = Eigen::MatrixXd::Zero(n, n);
  if (ev_min > 0.0) {
    cov_scaled = eig.eigenvectors() * ev.cwiseInverse().asDiagonal() *
                 eig.eigenvectors().transpose();
    const double dof = static_cast<double>(m - n);
    const double variance = dof > 0.0 ? ssr / dof : 0.0;
    cov_scaled *= variance;
  }
  // Back to natural units: cov_x = S cov_y S.
  result.covariance = scales.asDiagonal() * cov_scaled * scales.asDiagonal();

  result.params = x;
  result.residual_norm = std::sqrt(ssr);
  result.iterations = iter;
  return result;
}

McSummary monte_carlo_propagate(const std::function<double(std::span<const double>)>& pipeline,
                                std::span<const McInput> inputs, int n_samples,
                                std::uint64_t seed) {
  if (n_samples < 100)
    throw InvalidArgumentError("monte_carlo_propagate: need at least 100 samples");
  if (!pipeline) throw InvalidArgumentError("monte_carlo_propagate: missing pipeline");

  std::vector<double> outputs;
  outputs.reserve(static_cast<std::size_t>(n_samples));
  int failed = 0;
  std::vector<double> sample(inputs.size());

  for (int k = 0; k < n_samples; ++k) {
    Rng rng = Rng::stream(seed, "mc-sample-" + std::to_string(k));
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const McInput& in = inputs[i];
      const double z = rng.gaussian();
      switch (in.kind) {
        case PerturbationKind::Absolute:
          sample[i] = in.nominal + in.sigma * z;
          break;
        case PerturbationKind::Relative:
          sample[i] = in.nominal * (1.0 + in.sigma * z);
          break;
        case PerturbationKind::Db:
          sample[i] = in.nominal * db_to_linear(in.sigma * z);
          break;
      }
    }
    try {
      double out = pipeline(sample);
      if (!std::isfinite(out)) throw EvaluationError("non-finite pipeline output", sample);
      outputs.push_back(out);
    } catch (const Error&) {
      ++failed;
    }
  }

  McSummary summary;
  summary.n_samples = n_samples;
  summary.n_failed = failed;
  if (outputs.empty()) return summary;

  double mean = 0.0;
  for (double v : outputs) mean += v;
  mean /= static_cast<double>(outputs.size());
  double var = 0.0;
  for (double v : outputs) var += (v - mean) * (v - mean);
  var = outputs.size() > 1 ? var / static_cast<double>(outputs.size() - 1) : 0.0;
  summary.mean = mean;
  summary.stddev = std::sqrt(var);

  std::sort(outputs.begin(), outputs.end());
  const std::array<double, 5> qs = {0.05, 0.25, 0.50, 0.75, 0.95};
  for (std::size_t i = 0; i < qs.size(); ++i) {
    const double pos = qs[i] * static_cast<double>(outputs.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, outputs.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    summary.percentiles[i] = outputs[lo] * (1.0 - frac) + outputs[hi] * frac;
  }
  return summary;
}

}  // namespace omcal
