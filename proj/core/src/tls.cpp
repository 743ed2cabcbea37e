#include "omcal/tls.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "omcal/constants.hpp"
#include "omcal/errors.hpp"

namespace omcal {

void TempTable::validate() const {
  if (t_kelvin.empty() || t_kelvin.size() != value.size())
    throw InvalidArgumentError("TempTable: empty or mismatched columns");
  for (std::size_t i = 0; i < t_kelvin.size(); ++i) {
    if (!(t_kelvin[i] > 0.0)) throw InvalidArgumentError("TempTable: temperatures must be > 0");
    if (!(value[i] > 0.0)) throw InvalidArgumentError("TempTable: values must be > 0");
    if (i && !(t_kelvin[i] > t_kelvin[i - 1]))
      throw InvalidArgumentError("TempTable: temperatures must be strictly increasing");
  }
}

bool TempTable::covers(Temperature t) const {
  return !t_kelvin.empty() && t.kelvin >= t_kelvin.front() && t.kelvin <= t_kelvin.back();
}

double TempTable::at(Temperature t, bool allow_extrapolation) const {
  validate();
  if (!covers(t) && !allow_extrapolation)
    throw RangeError("TempTable: T = " + std::to_string(t.kelvin) + " K outside calibrated range [" +
                     std::to_string(t_kelvin.front()) + ", " + std::to_string(t_kelvin.back()) +
                     "] K and extrapolation is not enabled");
  if (t_kelvin.size() == 1) return value.front();

  std::size_t hi = 1;
  while (hi + 1 < t_kelvin.size() && t.kelvin > t_kelvin[hi]) ++hi;
  const std::size_t lo = hi - 1;
  const double w = (t.kelvin - t_kelvin[lo]) / (t_kelvin[hi] - t_kelvin[lo]);
  return std::exp(std::log(value[lo]) * (1.0 - w) + std::log(value[hi]) * w);
}

void TlsLossParams::validate() const {
  if (kappa_tls0.rad_per_s < 0.0 || kappa_dielec0.rad_per_s < 0.0 || alpha.rad_per_s < 0.0)
    throw InvalidArgumentError("TlsLossParams: rates must be >= 0");
  if (!(t_c.kelvin > 0.0)) throw InvalidArgumentError("TlsLossParams: t_c must be > 0");
  p_cav0.validate();
}

double tanh_factor(Frequency f_c, Temperature t) {
  if (!(t.kelvin > 0.0)) throw InvalidArgumentError("tanh_factor: temperature must be > 0");
  // hbar * omega_c == h * f_c
  return std::tanh(constants::planck_h * f_c.hz / (2.0 * constants::boltzmann_k * t.kelvin));
}

AngularRate kappa_tls(const TlsLossParams& params, Frequency f_c, Temperature t) {
  return {params.kappa_tls0.rad_per_s * tanh_factor(f_c, t)};
}

AngularRate kappa_bcs(const TlsLossParams& params, Temperature t, bool* outside_validity) {
  if (!(t.kelvin > 0.0)) throw InvalidArgumentError("kappa_bcs: temperature must be > 0");
  if (outside_validity) *outside_validity = t.kelvin > 0.5 * params.t_c.kelvin;
  const double gap_over_kt = 3.3 * params.t_c.kelvin / t.kelvin;  // Delta(0) = 3.3 kB Tc
  const double mb = params.alpha.rad_per_s * (params.t_c.kelvin / t.kelvin) * std::exp(-gap_over_kt);
  return {params.kappa_dielec0.rad_per_s + mb};
}

AngularRate kappa_in_model(const TlsLossParams& params, Frequency f_c, Temperature t, Power p_in,
                           bool allow_extrapolation) {
  const double p0 = params.p_cav0.at(t, allow_extrapolation);
  // (P0/P)/(1 + P0/P) written as P0/(P + P0): exact at P = 0.
  const double saturation = p0 / (p_in.watts + p0);
  return {kappa_tls(params, f_c, t).rad_per_s * saturation + kappa_bcs(params, t).rad_per_s};
}

void TwpaTlsParams::validate() const {
  if (!(lambda0 >= 0.0 && lambda0 < 1.0))
    throw InvalidArgumentError("TwpaTlsParams: lambda0 must be in [0, 1)");
  if (!(beta > 0.0)) throw InvalidArgumentError("TwpaTlsParams: beta must be > 0");
  p_twpa0.validate();
}

double twpa_lambda(const TwpaTlsParams& params, Frequency f, Temperature t) {
  return params.lambda0 * tanh_factor(f, t);
}

double twpa_transmission(const TwpaTlsParams& params, Frequency f, Temperature t, Power p_in,
                         bool allow_extrapolation) {
  const double p0 = params.p_twpa0.at(t, allow_extrapolation);
  if (!(p0 > 0.0)) throw InvalidArgumentError("twpa_transmission: P0 must be > 0");
  const double lam = twpa_lambda(params, f, t);
  return 1.0 - lam / std::sqrt(1.0 + std::pow(p_in.watts / p0, params.beta));
}

namespace {

std::vector<double> slice_temperatures(auto&& points) {
  std::set<double> temps;
  for (const auto& p : points) temps.insert(p.t.kelvin);
  return {temps.begin(), temps.end()};
}

std::size_t slice_index(const std::vector<double>& temps, double t) {
  return static_cast<std::size_t>(std::lower_bound(temps.begin(), temps.end(), t) - temps.begin());
}

void check_slices(auto&& points, const std::vector<double>& temps, const char* who,
                  const char* p0_name) {
  if (temps.size() < 2)
    throw IdentifiabilityError(std::string(who) +
                               ": a single temperature slice cannot constrain the "
                               "shared temperature-dependent parameters");
  for (double t : temps) {
    std::set<double> powers;
    std::size_t count = 0;
    for (const auto& p : points)
      if (p.t.kelvin == t) {
        powers.insert(p.p_in.watts);
        ++count;
      }
    if (count < 5)
      throw InvalidArgumentError(std::string(who) + ": slice T = " + std::to_string(t) +
                                 " K has " + std::to_string(count) + " points, need >= 5");
    if (powers.size() < 2)
      throw IdentifiabilityError(std::string(who) + ": no power variation at T = " +
                                 std::to_string(t) + " K, " + p0_name + " is unconstrained");
  }
}

}  // namespace

TlsCavityFit fit_tls_cavity(std::span<const TlsCavityPoint> points, AngularRate kappa_ext,
                            Frequency f_c, const TlsCavityFitOptions& opts) {
  if (opts.variant != CavityLossVariant::TunedSaturation)
    throw InvalidArgumentError("fit_tls_cavity: unknown model variant");
  if (points.empty()) throw InvalidArgumentError("fit_tls_cavity: no points");

  const std::vector<double> temps = slice_temperatures(points);
  check_slices(points, temps, "fit_tls_cavity", "p_cav0");
  const std::size_t n_temps = temps.size();
  const Eigen::Index n_params = 4 + static_cast<Eigen::Index>(n_temps);

  // Initial guesses assembled from slice extremes.
  std::vector<double> lo_power_kappa(n_temps, 0.0), hi_power_kappa(n_temps, 0.0);
  std::vector<double> lo_p(n_temps, 0.0), hi_p(n_temps, 0.0), p_geo(n_temps, 1.0);
  for (std::size_t s = 0; s < n_temps; ++s) {
    double pmin = 0, pmax = 0, kmin = 0, kmax = 0;
    bool first = true;
    double log_sum = 0.0;
    std::size_t cnt = 0;
    for (const auto& pt : points) {
      if (pt.t.kelvin != temps[s]) continue;
      log_sum += std::log(pt.p_in.watts > 0 ? pt.p_in.watts : 1e-18);
      ++cnt;
      if (first || pt.p_in.watts < pmin) { pmin = pt.p_in.watts; kmin = pt.kappa_tot_measured.rad_per_s; }
      if (first || pt.p_in.watts > pmax) { pmax = pt.p_in.watts; kmax = pt.kappa_tot_measured.rad_per_s; }
      first = false;
    }
    lo_p[s] = pmin;
    hi_p[s] = pmax;
    lo_power_kappa[s] = kmin;
    hi_power_kappa[s] = kmax;
    p_geo[s] = std::exp(log_sum / static_cast<double>(cnt));
  }

  const double kext = kappa_ext.rad_per_s;
  double kappa_floor = hi_power_kappa[0] - kext;  // saturated slice at the lowest T
  kappa_floor = std::max(kappa_floor, 1.0);
  double tls_guess = std::max(lo_power_kappa[0] - hi_power_kappa[0], 1.0) /
                     std::max(tanh_factor(f_c, Temperature{temps[0]}), 1e-6);
  const double t_c_guess = 1.2;  // aluminum film
  const double t_hi = temps.back();
  const double mb_shape = (t_c_guess / t_hi) * std::exp(-3.3 * t_c_guess / t_hi);
  double alpha_guess =
      std::max(hi_power_kappa[n_temps - 1] - kext - kappa_floor, 0.0) / std::max(mb_shape, 1e-30);
  alpha_guess = std::max(alpha_guess, 1.0);

  Eigen::VectorXd x0(n_params), lower(n_params), upper(n_params), scale(n_params);
  x0[0] = tls_guess;
  x0[1] = kappa_floor;
  x0[2] = alpha_guess;
  x0[3] = t_c_guess;
  lower[0] = 0.0; lower[1] = 0.0; lower[2] = 0.0; lower[3] = 0.05;
  upper[0] = 1e12; upper[1] = 1e12; upper[2] = 1e18; upper[3] = 5.0;
  scale[0] = std::max(tls_guess, 1e3);
  scale[1] = std::max(kappa_floor, 1e3);
  scale[2] = std::max(alpha_guess, 1e3);
  scale[3] = 1.0;
  for (std::size_t s = 0; s < n_temps; ++s) {
    const Eigen::Index j = 4 + static_cast<Eigen::Index>(s);
    x0[j] = p_geo[s];
    lower[j] = lo_p[s] * 1e-4;
    upper[j] = hi_p[s] * 1e4;
    scale[j] = p_geo[s];
  }

  auto model = [&](const Eigen::VectorXd& p, const TlsCavityPoint& pt) {
    const std::size_t s = slice_index(temps, pt.t.kelvin);
    const double p0 = p[4 + static_cast<Eigen::Index>(s)];
    const double tanh_f = tanh_factor(f_c, pt.t);
    const double sat = p0 / (pt.p_in.watts + p0);
    const double mb = p[2] * (p[3] / pt.t.kelvin) * std::exp(-3.3 * p[3] / pt.t.kelvin);
    return kext + p[0] * tanh_f * sat + p[1] + mb;
  };

  FitProblem problem;
  problem.initial = x0;
  problem.lower = lower;
  problem.upper = upper;
  problem.scales = scale;
  problem.residual = [&, pts = std::vector<TlsCavityPoint>(points.begin(), points.end())](
                         const Eigen::VectorXd& p) {
    Eigen::VectorXd r(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i)
      r[i] = (model(p, pts[i]) - pts[i].kappa_tot_measured.rad_per_s) /
             pts[i].kappa_tot_measured.rad_per_s;
    return r;
  };

  FitResult fit = solve_least_squares(problem, opts.engine);

  TlsCavityFit out;
  out.engine = fit;
  out.params.kappa_tls0 = {fit.params[0]};
  out.params.kappa_dielec0 = {fit.params[1]};
  out.params.alpha = {fit.params[2]};
  out.params.t_c = {fit.params[3]};
  out.params.p_cav0.t_kelvin = temps;
  out.params.p_cav0.value.resize(n_temps);
  out.p0_sigma.resize(n_temps);
  for (std::size_t s = 0; s < n_temps; ++s) {
    out.params.p_cav0.value[s] = fit.params[4 + static_cast<Eigen::Index>(s)];
    out.p0_sigma[s] = fit.sigma(4 + static_cast<int>(s));
  }
  out.kappa_tls0_sigma = fit.sigma(0);
  out.kappa_dielec0_sigma = fit.sigma(1);
  out.alpha_sigma = fit.sigma(2);
  out.t_c_sigma = fit.sigma(3);

  Eigen::VectorXd final_res = problem.residual(fit.params);
  std::size_t idx = 0;
  std::vector<double> acc(n_temps, 0.0);
  std::vector<std::size_t> cnt(n_temps, 0);
  for (const auto& pt : points) {
    const std::size_t s = slice_index(temps, pt.t.kelvin);
    acc[s] += final_res[idx] * final_res[idx];
    ++cnt[s];
    ++idx;
  }
  for (std::size_t s = 0; s < n_temps; ++s)
    out.slice_residual_rms[temps[s]] = std::sqrt(acc[s] / static_cast<double>(cnt[s]));
  return out;
}

TwpaFit fit_tls_twpa(std::span<const TwpaScanPoint> points, Frequency f_probe,
                     const FitOptions& engine) {
  if (points.empty()) throw InvalidArgumentError("fit_tls_twpa: no points");
  const std::vector<double> temps = slice_temperatures(points);
  check_slices(points, temps, "fit_tls_twpa", "p_twpa0");
  const std::size_t n_temps = temps.size();
  const Eigen::Index n_params = 2 + static_cast<Eigen::Index>(n_temps);

  // lambda0 guess from the coldest slice's low-power drop.
  double drop_guess = 0.3;
  {
    double pmin = 0, tmin_trans = 1.0;
    bool first = true;
    for (const auto& pt : points) {
      if (pt.t.kelvin != temps.front()) continue;
      if (first || pt.p_in.watts < pmin) { pmin = pt.p_in.watts; tmin_trans = pt.transmission; }
      first = false;
    }
    drop_guess = std::clamp(1.0 - tmin_trans, 0.01, 0.95);
  }

  Eigen::VectorXd x0(n_params), lower(n_params), upper(n_params), scale(n_params);
  x0[0] = drop_guess / std::max(tanh_factor(f_probe, Temperature{temps.front()}), 1e-6);
  x0[0] = std::clamp(x0[0], 0.01, 0.99);
  x0[1] = 1.0;
  lower[0] = 0.0; upper[0] = 1.0 - 1e-9;
  lower[1] = 0.05; upper[1] = 10.0;
  scale[0] = 1.0;
  scale[1] = 1.0;
  for (std::size_t s = 0; s < n_temps; ++s) {
    const Eigen::Index j = 2 + static_cast<Eigen::Index>(s);
    double log_sum = 0.0;
    std::size_t c = 0;
    for (const auto& pt : points)
      if (pt.t.kelvin == temps[s]) { log_sum += std::log(std::max(pt.p_in.watts, 1e-20)); ++c; }
    x0[j] = std::exp(log_sum / static_cast<double>(c));
    lower[j] = 1e-20;
    upper[j] = 1.0;
    scale[j] = x0[j];
  }

  auto model = [&](const Eigen::VectorXd& p, const TwpaScanPoint& pt) {
    const std::size_t s = slice_index(temps, pt.t.kelvin);
    const double p0 = p[2 + static_cast<Eigen::Index>(s)];
    const double lam = p[0] * tanh_factor(f_probe, pt.t);
    return 1.0 - lam / std::sqrt(1.0 + std::pow(pt.p_in.watts / p0, p[1]));
  };

  FitProblem problem;
  problem.initial = x0;
  problem.lower = lower;
  problem.upper = upper;
  problem.scales = scale;
  problem.residual = [&, pts = std::vector<TwpaScanPoint>(points.begin(), points.end())](
                         const Eigen::VectorXd& p) {
    Eigen::VectorXd r(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) r[i] = model(p, pts[i]) - pts[i].transmission;
    return r;
  };

  FitResult fit = solve_least_squares(problem, engine);

  TwpaFit out;
  out.engine = fit;
  out.params.lambda0 = fit.params[0];
  out.params.beta = fit.params[1];
  out.params.p_twpa0.t_kelvin = temps;
  out.params.p_twpa0.value.resize(n_temps);
  out.p0_sigma.resize(n_temps);
  for (std::size_t s = 0; s < n_temps; ++s) {
    out.params.p_twpa0.value[s] = fit.params[2 + static_cast<Eigen::Index>(s)];
    out.p0_sigma[s] = fit.sigma(2 + static_cast<int>(s));
  }
  out.lambda0_sigma = fit.sigma(0);
  out.beta_sigma = fit.sigma(1);

  Eigen::VectorXd final_res = problem.residual(fit.params);
  std::vector<double> acc(n_temps, 0.0);
  std::vector<std::size_t> cnt(n_temps, 0);
  std::size_t idx = 0;
  for (const auto& pt : points) {
    const std::size_t s = slice_index(temps, pt.t.kelvin);
    acc[s] += final_res[idx] * final_res[idx];
    ++cnt[s];
    ++idx;
  }
  for (std::size_t s = 0; s < n_temps; ++s)
    out.slice_residual_rms[temps[s]] = std::sqrt(acc[s] / static_cast<double>(cnt[s]));
  return out;
}

}  // namespace omcal
