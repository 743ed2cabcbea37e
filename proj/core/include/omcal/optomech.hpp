#pragma once

#include <optional>

#include "omcal/cavity.hpp"
#include "omcal/tls.hpp"
#include "omcal/units.hpp"

namespace omcal {

// Pump placed one mechanical frequency above (blue) or below (red) the
// cavity. Blue anti-damps: Gamma_eff = Gamma_m - Gamma_opt; red damps:
// Gamma_eff = Gamma_m + Gamma_opt.
enum class PumpScheme { Blue, Red };

struct OptomechParams {
  AngularRate omega_m;   // mechanical mode frequency
  TempTable gamma_m;     // intrinsic damping vs T (rad/s), measured input
  AngularRate g0;        // single-photon optomechanical coupling
  CavityParams cavity;   // carries the kappa_ext/kappa_in branch assignment

  CouplingBranch branch() const { return cavity.branch(); }
  bool sideband_resolved() const {
    return omega_m.rad_per_s > cavity.kappa_tot().rad_per_s;
  }
  void validate() const;
};

// Total cavity damping at the operating point, kappa_ext + kappa_in(T, P).
AngularRate kappa_tot_at(const OptomechParams& params, const TlsLossParams& tls, Temperature t,
                         Power p_in_chip, bool allow_extrapolation = false);

// Optomechanically induced damping:
//   Gamma_opt = (4 g0^2 / kappa_tot) * kappa_ext P / (hbar omega_c [Omega_m^2 + (kappa_tot/2)^2])
AngularRate gamma_opt(const OptomechParams& params, const TlsLossParams& tls, Temperature t,
                      Power p_in_chip, bool allow_extrapolation = false);

// Effective mechanical damping. Blue pumping past Gamma_opt >= Gamma_m is a
// distinguished self-oscillating state, not an exception, so power ramps can
// walk through the threshold.
struct GammaEff {
  std::optional<AngularRate> value;  // empty when self-oscillating
  AngularRate gamma_m;
  AngularRate gamma_opt;
  bool self_oscillating = false;
};

GammaEff gamma_eff(PumpScheme scheme, const OptomechParams& params, const TlsLossParams& tls,
                   Temperature t, Power p_in_chip, bool allow_extrapolation = false);

// Optomechanical gain G_opt = Gamma_m / Gamma_eff. Throws
// SelfOscillationError in the self-oscillating state where the gain is
// undefined.
double g_opt(PumpScheme scheme, const OptomechParams& params, const TlsLossParams& tls,
             Temperature t, Power p_in_chip, bool allow_extrapolation = false);

// Photon-rate-per-watt-per-phonon conversion factor, units 1/(W s):
//   M = 4 g0^2 kappa_ext^2 / (hbar Omega_m^2 omega_c kappa_tot^2)
// Branch-dependent through kappa_ext; this is what lifts the over/under
// ambiguity at pipeline level.
double conversion_m(const OptomechParams& params, const TlsLossParams& tls, Temperature t,
                    Power p_in_chip, bool allow_extrapolation = false);

// Bose-Einstein occupation of the mechanical mode.
double bose_einstein(AngularRate omega_m, Temperature t);

// Smallest blue-pump power with Gamma_opt >= Gamma_m, found by bisection on
// [0, p_max]; empty when the threshold lies above p_max.
std::optional<Power> self_oscillation_threshold(const OptomechParams& params,
                                                const TlsLossParams& tls, Temperature t,
                                                Power p_max,
                                                bool allow_extrapolation = false);

struct PhononAreaOptions {
  bool twpa_correction = true;  // false only when uncorrected output is explicit
  // Measured effective linewidth from the peak fit; the model value is used
  // when absent.
  std::optional<AngularRate> measured_gamma_eff;
  Power saturation_limit{1e-16};  // at the TWPA input
  bool allow_extrapolation = false;  // permit T outside the calibrated tables
  // Converts TWPA-input signal power to the plane the TWPA calibration was
  // fitted in (1 when the calibration is referenced at the TWPA input).
  double twpa_plane_factor = 1.0;
};

struct PhononBreakdown {
  double a_ph = 0.0;
  double delta = 1.0;      // TWPA transmission applied to the signal
  double g_opt = 1.0;
  double m_factor = 0.0;   // 1/(W s)
  double p_signal_twpa_w = 0.0;
  double a_chip_photons_per_s = 0.0;
};

// The headline normalization: sideband area (photons/s, output-referred) to
// mechanical mode occupation in phonons,
//   A_ph = A_sdb / (G_opt M P_in delta(T, P_signal)),
// after de-embedding the detection chain. Throws SaturationError when the
// signal power at the TWPA input exceeds the saturation boundary and
// MissingCorrectionError when no TWPA calibration is supplied while the
// correction is enabled.
PhononBreakdown phonon_area_detailed(double a_sdb_out_photons_per_s, PumpScheme scheme,
                                     Temperature t, Power p_pump_chip,
                                     const OptomechParams& params, const TlsLossParams& tls,
                                     const std::optional<TwpaTlsParams>& twpa,
                                     const ChainCal& chain, const PhononAreaOptions& opts = {});

double phonon_area(double a_sdb_out_photons_per_s, PumpScheme scheme, Temperature t,
                   Power p_pump_chip, const OptomechParams& params, const TlsLossParams& tls,
                   const std::optional<TwpaTlsParams>& twpa, const ChainCal& chain,
                   const PhononAreaOptions& opts = {});

}  // namespace omcal
