#include "omcal/optomech.hpp"

#include <cmath>

#include "omcal/constants.hpp"
#include "omcal/errors.hpp"

namespace omcal {

void OptomechParams::validate() const {
  if (!(omega_m.rad_per_s > 0.0)) throw InvalidArgumentError("OptomechParams: omega_m must be > 0");
  if (!(g0.rad_per_s > 0.0)) throw InvalidArgumentError("OptomechParams: g0 must be > 0");
  gamma_m.validate();
  cavity.validate();
}

AngularRate kappa_tot_at(const OptomechParams& params, const TlsLossParams& tls, Temperature t,
                         Power p_in_chip, bool allow_extrapolation) {
  return {params.cavity.kappa_ext.rad_per_s +
          kappa_in_model(tls, params.cavity.f_c, t, p_in_chip, allow_extrapolation).rad_per_s};
}

AngularRate gamma_opt(const OptomechParams& params, const TlsLossParams& tls, Temperature t,
                      Power p_in_chip, bool allow_extrapolation) {
  if (p_in_chip.watts < 0.0) throw InvalidArgumentError("gamma_opt: negative power");
  const double kappa_tot = kappa_tot_at(params, tls, t, p_in_chip, allow_extrapolation).rad_per_s;
  const double omega_c = to_angular(params.cavity.f_c).rad_per_s;
  const double g0 = params.g0.rad_per_s;
  const double omega_m = params.omega_m.rad_per_s;
  const double denom =
      constants::hbar * omega_c * (omega_m * omega_m + 0.25 * kappa_tot * kappa_tot);
  return {(4.0 * g0 * g0 / kappa_tot) * params.cavity.kappa_ext.rad_per_s * p_in_chip.watts /
          denom};
}

GammaEff gamma_eff(PumpScheme scheme, const OptomechParams& params, const TlsLossParams& tls,
                   Temperature t, Power p_in_chip, bool allow_extrapolation) {
  GammaEff out;
  out.gamma_m = {params.gamma_m.at(t, true)};
  out.gamma_opt = gamma_opt(params, tls, t, p_in_chip, allow_extrapolation);
  if (scheme == PumpScheme::Red) {
    out.value = AngularRate{out.gamma_m.rad_per_s + out.gamma_opt.rad_per_s};
  } else if (out.gamma_opt.rad_per_s >= out.gamma_m.rad_per_s) {
    out.self_oscillating = true;
  } else {
    out.value = AngularRate{out.gamma_m.rad_per_s - out.gamma_opt.rad_per_s};
  }
  return out;
}

double g_opt(PumpScheme scheme, const OptomechParams& params, const TlsLossParams& tls,
             Temperature t, Power p_in_chip, bool allow_extrapolation) {
  const GammaEff ge = gamma_eff(scheme, params, tls, t, p_in_chip, allow_extrapolation);
  if (ge.self_oscillating)
    throw SelfOscillationError("g_opt: undefined gain, blue pump at/above the self-oscillation "
                               "threshold");
  return ge.gamma_m.rad_per_s / ge.value->rad_per_s;
}

double conversion_m(const OptomechParams& params, const TlsLossParams& tls, Temperature t,
                    Power p_in_chip, bool allow_extrapolation) {
  const double kappa_tot = kappa_tot_at(params, tls, t, p_in_chip, allow_extrapolation).rad_per_s;
  const double kappa_ext = params.cavity.kappa_ext.rad_per_s;
  const double g0 = params.g0.rad_per_s;
  const double omega_m = params.omega_m.rad_per_s;
  const double omega_c = to_angular(params.cavity.f_c).rad_per_s;
  return 4.0 * g0 * g0 * kappa_ext * kappa_ext /
         (constants::hbar * omega_m * omega_m * omega_c * kappa_tot * kappa_tot);
}

double bose_einstein(AngularRate omega_m, Temperature t) {
  if (!(t.kelvin > 0.0)) throw InvalidArgumentError("bose_einstein: temperature must be > 0");
  const double x = constants::hbar * omega_m.rad_per_s / (constants::boltzmann_k * t.kelvin);
  return 1.0 / std::expm1(x);
}

std::optional<Power> self_oscillation_threshold(const OptomechParams& params,
                                                const TlsLossParams& tls, Temperature t,
                                                Power p_max, bool allow_extrapolation) {
  const double gamma_m = params.gamma_m.at(t, true);
  auto excess = [&](double p) {
    return gamma_opt(params, tls, t, Power{p}, allow_extrapolation).rad_per_s - gamma_m;
  };
  if (excess(p_max.watts) < 0.0) return std::nullopt;
  double lo = 0.0, hi = p_max.watts;
  for (int i = 0; i < 200 && (hi - lo) > 1e-12 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (excess(mid) >= 0.0 ? hi : lo) = mid;
  }
  return Power{hi};
}

PhononBreakdown phonon_area_detailed(double a_sdb_out_photons_per_s, PumpScheme scheme,
                                     Temperature t, Power p_pump_chip,
                                     const OptomechParams& params, const TlsLossParams& tls,
                                     const std::optional<TwpaTlsParams>& twpa,
                                     const ChainCal& chain, const PhononAreaOptions& opts) {
  if (a_sdb_out_photons_per_s < 0.0)
    throw InvalidArgumentError("phonon_area: negative sideband area");
  if (opts.twpa_correction && !twpa)
    throw MissingCorrectionError(
        "phonon_area: TWPA correction requested but no TWPA calibration supplied; "
        "pass --no-twpa-correction to accept uncorrected output");

  const double gain_lin = db_to_linear(chain.detection_gain_db);
  const double a_after_twpa = a_sdb_out_photons_per_s / gain_lin;  // photons/s at TWPA output plane

  const double omega_c = to_angular(params.cavity.f_c).rad_per_s;

  PhononBreakdown out;

  // The TLS transmission depends (weakly) on the signal power it attenuates;
  // resolve the small circular dependence by fixed point.
  double delta = 1.0;
  double p_signal_w = constants::hbar * omega_c * a_after_twpa;
  if (opts.twpa_correction) {
    for (int i = 0; i < 4; ++i) {
      p_signal_w = constants::hbar * omega_c * a_after_twpa / delta;
      delta = twpa_transmission(*twpa, params.cavity.f_c, t,
                                Power{p_signal_w * opts.twpa_plane_factor}, true);
    }
  }
  if (p_signal_w > opts.saturation_limit.watts)
    throw SaturationError("phonon_area: signal power at the TWPA input (" +
                          std::to_string(p_signal_w) + " W) exceeds the saturation boundary");
  out.delta = delta;
  out.p_signal_twpa_w = p_signal_w;

  const double a_twpa_in = a_after_twpa / delta;
  out.a_chip_photons_per_s = a_twpa_in * db_to_linear(chain.chip_to_twpa_loss_db);

  if (opts.measured_gamma_eff) {
    const double gamma_m = params.gamma_m.at(t, true);
    if (!(opts.measured_gamma_eff->rad_per_s > 0.0))
      throw SelfOscillationError("phonon_area: non-positive measured effective damping");
    out.g_opt = gamma_m / opts.measured_gamma_eff->rad_per_s;
  } else {
    out.g_opt = g_opt(scheme, params, tls, t, p_pump_chip, opts.allow_extrapolation);
  }

  out.m_factor = conversion_m(params, tls, t, p_pump_chip, opts.allow_extrapolation);
  out.a_ph = out.a_chip_photons_per_s / (out.g_opt * out.m_factor * p_pump_chip.watts);
  return out;
}

double phonon_area(double a_sdb_out_photons_per_s, PumpScheme scheme, Temperature t,
                   Power p_pump_chip, const OptomechParams& params, const TlsLossParams& tls,
                   const std::optional<TwpaTlsParams>& twpa, const ChainCal& chain,
                   const PhononAreaOptions& opts) {
  return phonon_area_detailed(a_sdb_out_photons_per_s, scheme, t, p_pump_chip, params, tls, twpa,
                              chain, opts)
      .a_ph;
}

}  // namespace omcal
