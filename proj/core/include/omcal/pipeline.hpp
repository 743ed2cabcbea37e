#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "omcal/dataset.hpp"
#include "omcal/optomech.hpp"

namespace omcal {

// --- sideband peak integration -------------------------------------------

enum class BaselinePolicy { FitConstant, AssumeZero };

struct PeakFit {
  double center_hz = 0.0;
  double center_sigma_hz = 0.0;
  double gamma_eff_rad_s = 0.0;  // Lorentzian FWHM
  double gamma_eff_sigma_rad_s = 0.0;
  double area = 0.0;  // pi * height * HWHM, in psd-units * Hz
  double area_sigma = 0.0;
  double baseline = 0.0;
  double snr = 0.0;
  bool low_confidence = false;  // SNR < 3
  FitResult engine;
};

// Lorentzian fit plus baseline. Throws AbsentPeakError when no peak rises
// above the noise and InsufficientSpanError when the spectrum covers fewer
// than 10 linewidths.
PeakFit integrate_peak(const SidebandSpectrum& spectrum,
                       BaselinePolicy policy = BaselinePolicy::FitConstant,
                       const FitOptions& engine = {});

// --- g0 extraction ---------------------------------------------------------

struct GammaPoint {
  Power p_chip;                 // pump power at the cavity reference plane
  double gamma_eff_rad_s = 0.0; // measured effective damping
  double sigma_rad_s = 0.0;     // 0 = unweighted
};

struct G0Estimate {
  AngularRate g0;
  double g0_sigma_rad_s = 0.0;
  AngularRate gamma_m;  // zero-power intercept at this temperature
  double gamma_m_sigma_rad_s = 0.0;
  double slope_blue = 0.0;  // d Gamma_eff / d x per scheme; x carries Eq.-4 factors
  double slope_red = 0.0;
  bool zero_slope = false;          // g0 ~ 0, relative uncertainty unbounded
  bool schemes_discrepant = false;  // |blue| vs |red| slopes differ beyond 2 sigma
};

// Weighted linear fit of Gamma_eff against the pump-strength variable
// x(P) = 4 kappa_ext P / (kappa_tot(T,P) hbar omega_c [Omega_m^2 + (kappa_tot/2)^2]),
// evaluated per point so TLS-driven kappa_tot(P) variation is corrected;
// the slope magnitude is g0^2. Requires >= 4 sub-threshold powers per scheme.
G0Estimate extract_g0(std::span<const GammaPoint> blue, std::span<const GammaPoint> red,
                      AngularRate kappa_ext, const TlsLossParams& tls, Frequency f_c,
                      AngularRate omega_m, Temperature t);

// --- full calibration ------------------------------------------------------

struct CalibrationOptions {
  bool twpa_correction = true;
  bool asymmetry = false;  // interpret blue areas as n+1
  std::uint64_t seed = 20260808;  // fixed default so reports are reproducible
  int mc_samples = 400;
  int threads = 1;
  double branch_high_t_min_k = 0.100;     // runs at T >= this enter the branch metric
  double branch_ambiguity_fraction = 0.10;
  Power twpa_saturation_limit{1e-16};
};

struct SweepFitRow {
  std::string run_id;
  double t_k = 0.0;
  double p_chip_w = 0.0;
  double f_c_hz = 0.0;
  double kappa_tot_hz = 0.0;
  double kappa_tot_sigma_hz = 0.0;
  double kappa_branch_a = 0.0;  // |1 - 2 kappa_ext / kappa_tot|
};

struct RunPhononRow {
  std::string run_id;
  double t_k = 0.0;
  double t_uncertainty_rel = 0.0;
  double p_chip_w = 0.0;
  RunScheme scheme = RunScheme::Blue;
  int repeat = 0;
  double gamma_eff_rad_s = 0.0;
  double gamma_eff_sigma_rad_s = 0.0;
  double area_out = 0.0;
  double area_sigma = 0.0;
  double delta = 1.0;
  double g_opt = 1.0;
  double m_factor = 0.0;
  double a_ph = 0.0;
  double a_ph_sigma = 0.0;
  double occupancy = 0.0;  // a_ph, minus the +1 asymmetry offset when enabled
  double n_ph = 0.0;
  double ratio = 0.0;  // occupancy / n_ph
  double ratio_sigma = 0.0;
  bool excluded = false;
  std::string exclusion_reason;
};

struct RatioPoint {
  double t_k = 0.0;
  double ratio = 0.0;
  double sigma = 0.0;
  int n_runs = 0;
};

struct BranchCandidate {
  CouplingBranch label = CouplingBranch::Overcoupled;
  double kappa_ext_rad_s = 0.0;
  double kappa_ext_sigma_rad_s = 0.0;
  double g0_rad_s = 0.0;
  double g0_sigma_rad_s = 0.0;
  double mean_high_t_ratio = 0.0;
  double metric = 0.0;  // |ln(geometric mean high-T ratio)|
};

struct BranchDecision {
  CouplingBranch chosen = CouplingBranch::Overcoupled;
  BranchCandidate overcoupled;
  BranchCandidate undercoupled;
  bool ambiguous = false;  // candidates within 10%; overcoupled default applies
  double s11_swap_residual_asymmetry = 0.0;  // SSR difference between branch params
};

struct GroundTruthComparison {
  double g0_ratio = 0.0;        // fitted / true
  double kappa_ext_ratio = 0.0;
  double lambda0_ratio = 0.0;
  double kappa_tls0_ratio = 0.0;
  double mean_ratio_all_t = 0.0;  // fitted A_ph / true-model n_ph, pooled
};

struct CalibrationReport {
  std::string tool_version;
  std::string manifest_path;
  std::uint64_t content_hash = 0;
  std::uint64_t seed = 0;
  bool twpa_corrected = true;
  bool asymmetry = false;

  double f_c_hz = 0.0;
  double f_c_sigma_hz = 0.0;
  std::vector<SweepFitRow> sweeps;
  TlsCavityFit tls_cavity;  // for the chosen branch
  std::optional<TwpaFit> tls_twpa;

  double omega_m_hz = 0.0;
  double omega_m_sigma_hz = 0.0;
  bool sideband_resolved = false;  // Omega_m > kappa_tot even at the largest damping
  std::map<double, double> gamma_m_hz_by_t;
  std::map<double, double> gamma_m_sigma_hz_by_t;

  BranchDecision branch;
  std::vector<RunPhononRow> runs;  // chosen-branch rows, all sideband runs
  std::vector<RatioPoint> ratio_vs_t;
  std::vector<std::string> g0_run_ids;     // runs contributing to g0 / Gamma_m fits
  std::vector<std::string> ratio_run_ids;  // runs contributing to ratio aggregates
  McSummary error_budget;  // absolute phonon-scale uncertainty

  std::optional<GroundTruthComparison> truth;
};

// Full stage chain: sweeps -> cavity TLS -> TWPA TLS -> peaks -> branch ->
// phonon normalization with Monte-Carlo uncertainties. Stages run in this
// fixed order; kappa_tot(T,P) from the TLS fit feeds everything downstream.
CalibrationReport run_calibration(const Dataset& dataset, const CalibrationOptions& opts = {});

// report.json plus plot-ready kappa_vs_power.csv, delta_vs_power.csv and
// aph_over_nph_vs_T.csv.
void write_report(const CalibrationReport& report, const Dataset& dataset,
                  const std::filesystem::path& out_dir);

std::string report_summary(const CalibrationReport& report);

// Re-renders the stdout summary from a saved report.json.
std::string summarize_report_file(const std::filesystem::path& report_json);

}  // namespace omcal
