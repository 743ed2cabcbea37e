#pragma once

#include <optional>
#include <span>
#include <vector>

#include "omcal/fit.hpp"
#include "omcal/units.hpp"

namespace omcal {

enum class CouplingBranch { Overcoupled, Undercoupled };

// One-port reflection cavity: resonance frequency plus the damping-rate
// decomposition kappa_tot = kappa_ext + kappa_in.
struct CavityParams {
  Frequency f_c;
  AngularRate kappa_ext;
  AngularRate kappa_in;

  AngularRate kappa_tot() const { return {kappa_ext.rad_per_s + kappa_in.rad_per_s}; }
  double q_ext() const { return to_angular(f_c).rad_per_s / kappa_ext.rad_per_s; }
  double q_in() const { return to_angular(f_c).rad_per_s / kappa_in.rad_per_s; }
  double q_tot() const { return to_angular(f_c).rad_per_s / kappa_tot().rad_per_s; }
  CouplingBranch branch() const {
    return kappa_ext.rad_per_s > kappa_in.rad_per_s ? CouplingBranch::Overcoupled
                                                    : CouplingBranch::Undercoupled;
  }

  void validate() const;  // kappa_ext > 0, kappa_in >= 0, f_c > 0, finite
};

struct S11Options {
  double floor_db = -200.0;  // clamp for the critical-coupling singularity
};

struct S11Sample {
  double db = 0.0;
  bool clamped = false;  // hit the floor (exact critical coupling on resonance)
};

// Magnitude of the reflection coefficient in dB. The complex amplitude is
// (kappa_in - kappa_ext + 2i(omega - omega_c)) / (kappa_tot + 2i(omega - omega_c)),
// so the magnitude is invariant under swapping kappa_ext and kappa_in at
// fixed kappa_tot; that swap is exactly the over/undercoupled ambiguity.
S11Sample s11_sample(const CavityParams& params, Frequency f, const S11Options& opts = {});
double s11_db(const CavityParams& params, Frequency f, const S11Options& opts = {});

struct ReflectionTrace {
  std::vector<double> freq_hz;
  std::vector<double> mag_db;

  static ReflectionTrace from_complex(std::span<const double> freq_hz,
                                      std::span<const double> re, std::span<const double> im);
  void validate() const;  // strictly increasing frequencies, >= 8 points
};

struct ReflectionFitOptions {
  bool linear_magnitude_weighting = false;  // default: uniform weights in dB space
  S11Options s11;
  FitOptions engine;
};

// Both members of the ambiguity pair, sharing f_c and kappa_tot.
struct ReflectionFit {
  CavityParams overcoupled;
  CavityParams undercoupled;
  double f_c_sigma_hz = 0.0;
  double kappa_tot_sigma_hz = 0.0;
  double kappa_ext_sigma_over_hz = 0.0;
  double kappa_ext_sigma_under_hz = 0.0;
  bool floor_clamped = false;
  FitResult engine;  // internal parameterization (f_c_hz, kappa_tot_hz, asymmetry)

  const CavityParams& pick(CouplingBranch b) const {
    return b == CouplingBranch::Overcoupled ? overcoupled : undercoupled;
  }
};

// Fits the line shape in dB space. Branch selection is deliberately not
// performed here; the pipeline lifts the ambiguity with the quantitative
// phonon normalization. Throws ConvergenceError (carrying best-so-far) or
// InsufficientSpanError.
ReflectionFit fit_reflection(const ReflectionTrace& trace,
                             std::optional<CavityParams> init = std::nullopt,
                             const ReflectionFitOptions& opts = {});

}  // namespace omcal
