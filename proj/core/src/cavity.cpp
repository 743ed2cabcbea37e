#include "omcal/cavity.hpp"

#include <algorithm>
#include <cmath>

#include "omcal/errors.hpp"

namespace omcal {

void CavityParams::validate() const {
  if (!(f_c.hz > 0.0) || !std::isfinite(f_c.hz))
    throw InvalidArgumentError("CavityParams: f_c must be finite and > 0");
  if (!(kappa_ext.rad_per_s > 0.0) || !std::isfinite(kappa_ext.rad_per_s))
    throw InvalidArgumentError("CavityParams: kappa_ext must be finite and > 0");
  if (kappa_in.rad_per_s < 0.0 || !std::isfinite(kappa_in.rad_per_s))
    throw InvalidArgumentError("CavityParams: kappa_in must be finite and >= 0");
}

namespace {

// |S11|^2 in the reduced variables s0 = (kappa_in - kappa_ext)/kappa_tot and
// x = 2(omega - omega_c)/kappa_tot.
double s11_mag2(double s0, double x) { return (s0 * s0 + x * x) / (1.0 + x * x); }

}  // namespace

S11Sample s11_sample(const CavityParams& params, Frequency f, const S11Options& opts) {
  params.validate();
  if (!(f.hz > 0.0)) throw InvalidArgumentError("s11_sample: frequency must be > 0");
  const double kappa_tot = params.kappa_tot().rad_per_s;
  const double s0 = (params.kappa_in.rad_per_s - params.kappa_ext.rad_per_s) / kappa_tot;
  // Frequency ratios equal angular ratios, so the detuning can stay in Hz.
  const double x = 2.0 * constants::two_pi * (f.hz - params.f_c.hz) / kappa_tot;
  const double mag2 = s11_mag2(s0, x);
  const double floor_lin = db_to_linear(opts.floor_db);
  if (mag2 <= floor_lin) return {opts.floor_db, true};
  return {10.0 * std::log10(mag2), false};
}

double s11_db(const CavityParams& params, Frequency f, const S11Options& opts) {
  return s11_sample(params, f, opts).db;
}

ReflectionTrace ReflectionTrace::from_complex(std::span<const double> freq_hz,
                                              std::span<const double> re,
                                              std::span<const double> im) {
  if (freq_hz.size() != re.size() || freq_hz.size() != im.size())
    throw InvalidArgumentError("ReflectionTrace::from_complex: size mismatch");
  ReflectionTrace trace;
  trace.freq_hz.assign(freq_hz.begin(), freq_hz.end());
  trace.mag_db.resize(freq_hz.size());
  for (std::size_t i = 0; i < freq_hz.size(); ++i)
    trace.mag_db[i] = 10.0 * std::log10(re[i] * re[i] + im[i] * im[i]);
  return trace;
}

void ReflectionTrace::validate() const {
  if (freq_hz.size() != mag_db.size())
    throw InvalidArgumentError("ReflectionTrace: column size mismatch");
  if (freq_hz.size() < 8) throw InvalidArgumentError("ReflectionTrace: need at least 8 points");
  for (std::size_t i = 1; i < freq_hz.size(); ++i)
    if (!(freq_hz[i] > freq_hz[i - 1]))
      throw InvalidArgumentError("ReflectionTrace: frequencies must be strictly increasing");
}

namespace {

struct SelfInit {
  double f_c_hz;
  double kappa_tot_hz;
  double asym;  // |1 - 2 kappa_ext / kappa_tot|
};

// f_c from the minimum, kappa_tot from the full width at half depth in
// linear magnitude, asymmetry from the observed dip depth (the on-resonance
// linear magnitude equals |1 - 2 kappa_ext/kappa_tot| exactly, and a
// critical-coupling start diverges in dB space on shallow dips).
SelfInit self_initialize(const ReflectionTrace& trace) {
  const std::size_t n = trace.freq_hz.size();
  std::size_t i_min = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (trace.mag_db[i] < trace.mag_db[i_min]) i_min = i;

  const double m_min = std::pow(10.0, trace.mag_db[i_min] / 20.0);
  const double level = 0.5 * (1.0 + m_min);  // half depth in linear magnitude
  const double level_db = 20.0 * std::log10(level);

  double f_left = trace.freq_hz.front();
  for (std::size_t i = i_min; i-- > 0;) {
    if (trace.mag_db[i] >= level_db) {
      const double t = (level_db - trace.mag_db[i]) / (trace.mag_db[i + 1] - trace.mag_db[i]);
      f_left = trace.freq_hz[i] + t * (trace.freq_hz[i + 1] - trace.freq_hz[i]);
      break;
    }
  }
  double f_right = trace.freq_hz.back();
  for (std::size_t i = i_min + 1; i < n; ++i) {
    if (trace.mag_db[i] >= level_db) {
      const double t = (level_db - trace.mag_db[i - 1]) / (trace.mag_db[i] - trace.mag_db[i - 1]);
      f_right = trace.freq_hz[i - 1] + t * (trace.freq_hz[i] - trace.freq_hz[i - 1]);
      break;
    }
  }

  const double spacing = (trace.freq_hz.back() - trace.freq_hz.front()) / static_cast<double>(n - 1);
  SelfInit init;
  init.f_c_hz = trace.freq_hz[i_min];
  init.asym = std::clamp(m_min, 0.0, 1.0 - 1e-6);

  // The half-depth crossings sit at x = 2(f - f_c)/kappa with
  // x^2 = (level^2 - a^2)/(1 - level^2); invert that to turn the measured
  // width into kappa_tot (the factor approaches 1/0.577 near critical
  // coupling, 1 for shallow dips).
  const double a = init.asym;
  const double lvl2 = 0.25 * (1.0 + a) * (1.0 + a);
  double x_half = 0.577;
  if (lvl2 > a * a && lvl2 < 1.0) x_half = std::sqrt((lvl2 - a * a) / (1.0 - lvl2));
  const double width = std::max(f_right - f_left, 2.0 * spacing);
  init.kappa_tot_hz = width / std::max(x_half, 0.1);
  return init;
}

}  // namespace

ReflectionFit fit_reflection(const ReflectionTrace& trace, std::optional<CavityParams> init,
                             const ReflectionFitOptions& opts) {
  trace.validate();
  const std::size_t n = trace.freq_hz.size();
  const double span = trace.freq_hz.back() - trace.freq_hz.front();

  SelfInit start{};
  if (init) {
    init->validate();
    start.f_c_hz = init->f_c.hz;
    start.kappa_tot_hz = init->kappa_tot().rad_per_s / constants::two_pi;
    start.asym = std::abs(1.0 - 2.0 * init->kappa_ext.rad_per_s / init->kappa_tot().rad_per_s);
  } else {
    start = self_initialize(trace);
  }

  if (span < 3.0 * start.kappa_tot_hz)
    throw InsufficientSpanError("fit_reflection: trace spans " + std::to_string(span) +
                                " Hz, need at least 3 linewidths (" +
                                std::to_string(3.0 * start.kappa_tot_hz) + " Hz)");

  const double floor_lin = db_to_linear(opts.s11.floor_db);
  bool clamped = false;

  // Parameters: (f_c_hz, kappa_tot_hz, asym); the magnitude of the line
  // shape depends on the coupling only through asym, which makes the
  // over/undercoupled degeneracy explicit instead of a singular direction.
  auto model_db = [&](const Eigen::VectorXd& p, double f) {
    const double x = 2.0 * (f - p[0]) / p[1];
    double mag2 = s11_mag2(p[2], x);
    if (mag2 < floor_lin) {
      mag2 = floor_lin;
      clamped = true;
    }
    return 10.0 * std::log10(mag2);
  };

  FitProblem problem;
  problem.initial = Eigen::Vector3d(start.f_c_hz, start.kappa_tot_hz, start.asym);
  problem.lower = Eigen::Vector3d(trace.freq_hz.front(), span * 1e-6, 0.0);
  problem.upper = Eigen::Vector3d(trace.freq_hz.back(), 2.0 * span, 1.0 - 1e-12);
  problem.scales = Eigen::Vector3d(std::max(std::abs(start.f_c_hz), span), start.kappa_tot_hz, 1.0);
  problem.residual = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(n);
    for (std::size_t i = 0; i < n; ++i)
      r[i] = model_db(p, trace.freq_hz[i]) - trace.mag_db[i];
    return r;
  };
  if (opts.linear_magnitude_weighting) {
    Eigen::VectorXd w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = std::pow(10.0, trace.mag_db[i] / 10.0);
    problem.weights = w;
  }

  FitResult fit = solve_least_squares(problem, opts.engine);
  if (fit.status == FitStatus::Stalled || fit.status == FitStatus::MaxIterations) {
    if (fit.residual_norm > 1e-6 * std::sqrt(static_cast<double>(n))) {
      std::vector<double> best(fit.params.data(), fit.params.data() + fit.params.size());
      throw ConvergenceError("fit_reflection: no convergence after " +
                                 std::to_string(fit.iterations) + " iterations",
                             best, fit.residual_norm);
    }
    // A zero-residual fixed point that merely ran out of step size is fine.
  }

  const double f_c_hz = fit.params[0];
  const double kappa_tot = fit.params[1] * constants::two_pi;
  const double a = fit.params[2];

  ReflectionFit out;
  out.engine = fit;
  out.floor_clamped = clamped;
  out.overcoupled = {Frequency{f_c_hz}, AngularRate{0.5 * kappa_tot * (1.0 + a)},
                     AngularRate{0.5 * kappa_tot * (1.0 - a)}};
  out.undercoupled = {Frequency{f_c_hz}, AngularRate{0.5 * kappa_tot * (1.0 - a)},
                      AngularRate{0.5 * kappa_tot * (1.0 + a)}};
  out.f_c_sigma_hz = fit.sigma(0);
  out.kappa_tot_sigma_hz = fit.sigma(1);
  // kappa_ext = kappa_tot (1 +- a)/2; propagate through the 2x2 block.
  if (fit.covariance.rows() == 3) {
    const double ckk = fit.covariance(1, 1);
    const double caa = fit.covariance(2, 2);
    const double cka = fit.covariance(1, 2);
    const double k_hz = fit.params[1];
    auto sigma_branch = [&](double sign) {
      const double dk = 0.5 * (1.0 + sign * a);
      const double da = sign * 0.5 * k_hz;
      const double var = dk * dk * ckk + da * da * caa + 2.0 * dk * da * cka;
      return std::sqrt(std::max(0.0, var));
    };
    out.kappa_ext_sigma_over_hz = sigma_branch(+1.0);
    out.kappa_ext_sigma_under_hz = sigma_branch(-1.0);
  }
  return out;
}

}  // namespace omcal
