#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace omcal {

// Damped nonlinear least squares (Levenberg-Marquardt) with bound
// constraints, used by every model fit in the toolkit.
//
// Parameters are scaled internally by per-parameter magnitudes before the
// lambda*I damping is applied, so fits mixing GHz-scale frequencies with
// O(1) asymmetries stay well conditioned. Bounds are enforced by
// projection; differencing switches to one-sided at an active bound so the
// covariance stays interpretable in natural units.

enum class FitStatus { Converged, MaxIterations, Stalled };

struct FitOptions {
  int max_iterations = 200;
  double gradient_tol = 1e-10;  // relative, on the scaled gradient
  double step_tol = 1e-10;      // relative, on the scaled step
  double function_tol = 1e-14;  // relative decrease of the weighted SSR
  double initial_lambda_factor = 1e-3;   // lambda0 = factor * max diag(J^T W J)
  double lambda_decrease = 3.0;          // on accepted step
  double lambda_increase = 2.0;          // on rejected step
  double condition_limit = 1e10;         // covariance flagged unreliable beyond this
};

struct FitProblem {
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> residual;
  // Optional analytic Jacobian d r_i / d x_j; numeric central differences
  // otherwise.
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jacobian;
  Eigen::VectorXd initial;
  Eigen::VectorXd lower;    // empty = unbounded
  Eigen::VectorXd upper;    // empty = unbounded
  Eigen::VectorXd weights;  // per-residual, empty = uniform
  Eigen::VectorXd scales;   // per-parameter magnitudes, empty = from initial
};

struct FitResult {
  Eigen::VectorXd params;
  Eigen::MatrixXd covariance;
  double residual_norm = 0.0;  // sqrt of weighted SSR at the optimum
  int iterations = 0;
  FitStatus status = FitStatus::Stalled;
  double condition_number = 0.0;
  bool covariance_reliable = false;

  double sigma(int i) const;  // sqrt of covariance diagonal
  bool converged() const { return status == FitStatus::Converged; }
};

FitResult solve_least_squares(const FitProblem& problem, const FitOptions& options = {});

struct JacobianStepPolicy {
  double relative_step = 1e-6;  // h_j = relative_step * max(|p_j|, scale_j)
  Eigen::VectorXd scales;       // empty = 1 per parameter
};

// Central-difference Jacobian; one-sided where a step would cross a bound.
Eigen::MatrixXd numeric_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& fn,
    const Eigen::VectorXd& params, const JacobianStepPolicy& policy = {},
    const Eigen::VectorXd* lower = nullptr, const Eigen::VectorXd* upper = nullptr);

// --- Monte-Carlo uncertainty propagation --------------------------------

enum class PerturbationKind { Absolute, Relative, Db };

struct McInput {
  std::string name;
  double nominal = 0.0;
  double sigma = 0.0;  // absolute sigma, relative sigma, or dB sigma
  PerturbationKind kind = PerturbationKind::Relative;
};

struct McSummary {
  double mean = 0.0;
  double stddev = 0.0;
  // 5th, 25th, 50th, 75th, 95th percentiles of the output distribution.
  std::array<double, 5> percentiles{};
  int n_samples = 0;
  int n_failed = 0;

  double relative_spread() const { return mean != 0.0 ? stddev / std::abs(mean) : 0.0; }
};

// Pushes Gaussian input perturbations through an arbitrary pipeline
// function. Deterministic for a given seed; samples that throw are counted
// as failed and excluded from the summary.
McSummary monte_carlo_propagate(const std::function<double(std::span<const double>)>& pipeline,
                                std::span<const McInput> inputs, int n_samples,
                                std::uint64_t seed);

}  // namespace omcal
