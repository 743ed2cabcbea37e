#include "omcal/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "omcal/constants.hpp"
#include "omcal/csv.hpp"
#include "omcal/errors.hpp"
#include "omcal/rng.hpp"
#include "omcal/version.hpp"

namespace omcal {

using json = nlohmann::ordered_json;

namespace {

// Deterministic parallel map: item i writes only slot i, so results are
// bit-identical at any worker count.
void parallel_for(int n, int threads, const std::function<void(int)>& body) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::atomic<int> next{0};
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      while (true) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<double> moving_average(const std::vector<double>& v, int window) {
  std::vector<double> out(v.size());
  const int half = window / 2;
  const int n = static_cast<int>(v.size());
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - half);
    const int hi = std::min(n - 1, i + half);
    double acc = 0.0;
    for (int k = lo; k <= hi; ++k) acc += v[k];
    out[i] = acc / (hi - lo + 1);
  }
  return out;
}

}  // namespace

PeakFit integrate_peak(const SidebandSpectrum& spectrum, BaselinePolicy policy,
                       const FitOptions& engine) {
  const std::size_t n = spectrum.freq_hz.size();
  if (n != spectrum.psd.size() || n < 16)
    throw InvalidArgumentError("integrate_peak: spectrum needs >= 16 aligned samples");
  for (std::size_t i = 1; i < n; ++i)
    if (!(spectrum.freq_hz[i] > spectrum.freq_hz[i - 1]))
      throw InvalidArgumentError("integrate_peak: frequencies must be strictly increasing");

  // Peak presence check on a smoothed copy so single-bin noise cannot fake
  // or hide a line.
  const std::vector<double> smooth = moving_average(spectrum.psd, 9);
  const double med = median(smooth);
  std::vector<double> dev(n);
  for (std::size_t i = 0; i < n; ++i) dev[i] = std::abs(smooth[i] - med);
  const double mad = median(dev);
  std::size_t i_max = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (smooth[i] > smooth[i_max]) i_max = i;
  if (smooth[i_max] - med < 8.0 * mad)
    throw AbsentPeakError("integrate_peak: no peak rises above the noise floor");

  const double span = spectrum.freq_hz.back() - spectrum.freq_hz.front();
  const double spacing = span / static_cast<double>(n - 1);

  // Initial width from the half-height crossings of the smoothed peak.
  const double height0 = smooth[i_max] - med;
  const double half = med + 0.5 * height0;
  double f_left = spectrum.freq_hz.front(), f_right = spectrum.freq_hz.back();
  for (std::size_t i = i_max; i-- > 0;)
    if (smooth[i] <= half) { f_left = spectrum.freq_hz[i]; break; }
  for (std::size_t i = i_max + 1; i < n; ++i)
    if (smooth[i] <= half) { f_right = spectrum.freq_hz[i]; break; }
  const double width0 = std::max(f_right - f_left, 2.0 * spacing);

  const bool fit_baseline = policy == BaselinePolicy::FitConstant;
  const int np = fit_baseline ? 4 : 3;

  FitProblem problem;
  problem.initial.resize(np);
  problem.lower.resize(np);
  problem.upper.resize(np);
  problem.scales.resize(np);
  problem.initial[0] = spectrum.freq_hz[i_max];
  problem.initial[1] = width0;
  problem.initial[2] = height0;
  if (fit_baseline) problem.initial[3] = med;
  problem.lower[0] = spectrum.freq_hz.front();
  problem.upper[0] = spectrum.freq_hz.back();
  problem.lower[1] = 0.2 * spacing;
  problem.upper[1] = 2.0 * span;
  problem.lower[2] = 0.0;
  problem.upper[2] = std::numeric_limits<double>::infinity();
  problem.scales[0] = std::max(std::abs(spectrum.freq_hz[i_max]), span);
  problem.scales[1] = width0;
  problem.scales[2] = std::max(height0, 1e-30);
  if (fit_baseline) {
    problem.lower[3] = 0.0;
    problem.upper[3] = std::numeric_limits<double>::infinity();
    problem.scales[3] = std::max(med, 1e-30);
  }

  problem.residual = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(n);
    const double base = fit_baseline ? p[3] : 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double u = 2.0 * (spectrum.freq_hz[i] - p[0]) / p[1];
      r[i] = base + p[2] / (1.0 + u * u) - spectrum.psd[i];
    }
    return r;
  };

  FitResult fit = solve_least_squares(problem, engine);

  PeakFit out;
  out.engine = fit;
  out.center_hz = fit.params[0];
  out.center_sigma_hz = fit.sigma(0);
  const double fwhm_hz = fit.params[1];
  const double height = fit.params[2];
  out.gamma_eff_rad_s = fwhm_hz * constants::two_pi;
  out.gamma_eff_sigma_rad_s = fit.sigma(1) * constants::two_pi;
  out.baseline = fit_baseline ? fit.params[3] : 0.0;

  if (!(height > 0.0)) throw AbsentPeakError("integrate_peak: fitted height is not positive");
  if (span < 10.0 * fwhm_hz)
    throw InsufficientSpanError("integrate_peak: spectrum spans " +
                                std::to_string(span / fwhm_hz) + " linewidths, need >= 10");

  const double pi = constants::two_pi / 2.0;
  out.area = pi * height * 0.5 * fwhm_hz;  // pi * height * HWHM
  if (fit.covariance.rows() >= 3) {
    const double dh = pi * 0.5 * fwhm_hz;
    const double dg = pi * 0.5 * height;
    const double var = dh * dh * fit.covariance(2, 2) + dg * dg * fit.covariance(1, 1) +
                       2.0 * dh * dg * fit.covariance(1, 2);
    out.area_sigma = std::sqrt(std::max(0.0, var));
  }

  const double resid_rms = fit.residual_norm / std::sqrt(static_cast<double>(n));
  out.snr = resid_rms > 0.0 ? height / resid_rms : std::numeric_limits<double>::infinity();
  out.low_confidence = out.snr < 3.0;
  return out;
}

namespace {

// Pump-strength variable of the damping formula: Gamma_opt = g0^2 * x(P).
double pump_strength_x(Power p_chip, AngularRate kappa_ext, const TlsLossParams& tls,
                       Frequency f_c, AngularRate omega_m, Temperature t) {
  const double kappa_tot =
      kappa_ext.rad_per_s + kappa_in_model(tls, f_c, t, p_chip, true).rad_per_s;
  const double omega_c = to_angular(f_c).rad_per_s;
  const double om2 = omega_m.rad_per_s * omega_m.rad_per_s;
  return 4.0 * kappa_ext.rad_per_s * p_chip.watts /
         (kappa_tot * constants::hbar * omega_c * (om2 + 0.25 * kappa_tot * kappa_tot));
}

struct LinearFit {
  double intercept = 0.0, slope = 0.0;
  double intercept_var = 0.0, slope_var = 0.0;
  bool ok = false;
};

LinearFit weighted_line(std::span<const double> x, std::span<const double> y,
                        std::span<const double> sigma) {
  LinearFit out;
  const std::size_t n = x.size();
  if (n < 2) return out;
  double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = sigma[i] > 0.0 ? sigma[i] : 1.0;
    const double w = 1.0 / (s * s);
    sw += w;
    swx += w * x[i];
    swy += w * y[i];
    swxx += w * x[i] * x[i];
    swxy += w * x[i] * y[i];
  }
  const double det = sw * swxx - swx * swx;
  if (!(det > 0.0)) return out;
  out.slope = (sw * swxy - swx * swy) / det;
  out.intercept = (swxx * swy - swx * swxy) / det;
  out.slope_var = sw / det;
  out.intercept_var = swxx / det;
  // Scale by reduced chi^2 when sigmas were placeholders, so unweighted
  // series still report a meaningful uncertainty.
  if (n > 2) {
    double chi2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double s = sigma[i] > 0.0 ? sigma[i] : 1.0;
      const double r = (y[i] - out.intercept - out.slope * x[i]) / s;
      chi2 += r * r;
    }
    const double scale = chi2 / static_cast<double>(n - 2);
    if (scale > 1.0) {
      out.slope_var *= scale;
      out.intercept_var *= scale;
    }
  }
  out.ok = true;
  return out;
}

}  // namespace

G0Estimate extract_g0(std::span<const GammaPoint> blue, std::span<const GammaPoint> red,
                      AngularRate kappa_ext, const TlsLossParams& tls, Frequency f_c,
                      AngularRate omega_m, Temperature t) {
  auto distinct_powers = [](std::span<const GammaPoint> pts) {
    std::set<double> p;
    for (const auto& e : pts) p.insert(e.p_chip.watts);
    return p.size();
  };
  if (distinct_powers(blue) < 4 || distinct_powers(red) < 4)
    throw RangeError("extract_g0: need >= 4 sub-threshold powers per scheme (got " +
                     std::to_string(distinct_powers(blue)) + " blue, " +
                     std::to_string(distinct_powers(red)) + " red)");

  auto regress = [&](std::span<const GammaPoint> pts) {
    std::vector<double> x, y, s;
    for (const auto& e : pts) {
      x.push_back(pump_strength_x(e.p_chip, kappa_ext, tls, f_c, omega_m, t));
      y.push_back(e.gamma_eff_rad_s);
      s.push_back(e.sigma_rad_s);
    }
    return weighted_line(x, y, s);
  };

  const LinearFit fb = regress(blue);
  const LinearFit fr = regress(red);
  if (!fb.ok || !fr.ok) throw RangeError("extract_g0: degenerate power series");

  G0Estimate out;
  out.slope_blue = fb.slope;
  out.slope_red = fr.slope;

  // Blue anti-damps (slope -g0^2), red damps (slope +g0^2).
  const double gb = -fb.slope;
  const double gr = fr.slope;
  const double wb = fb.slope_var > 0.0 ? 1.0 / fb.slope_var : 1.0;
  const double wr = fr.slope_var > 0.0 ? 1.0 / fr.slope_var : 1.0;
  const double g0_sq = (wb * gb + wr * gr) / (wb + wr);
  const double g0_sq_var = 1.0 / (wb + wr);

  out.schemes_discrepant = std::abs(gb - gr) > 2.0 * std::sqrt(fb.slope_var + fr.slope_var);

  if (!(g0_sq > 0.0) || g0_sq < 2.0 * std::sqrt(g0_sq_var)) {
    out.zero_slope = true;
    out.g0 = {g0_sq > 0.0 ? std::sqrt(g0_sq) : 0.0};
    out.g0_sigma_rad_s = std::sqrt(std::sqrt(g0_sq_var));  // order-of-magnitude scale
  } else {
    out.g0 = {std::sqrt(g0_sq)};
    out.g0_sigma_rad_s = 0.5 * std::sqrt(g0_sq_var) / out.g0.rad_per_s;
  }

  const double wib = fb.intercept_var > 0.0 ? 1.0 / fb.intercept_var : 1.0;
  const double wir = fr.intercept_var > 0.0 ? 1.0 / fr.intercept_var : 1.0;
  out.gamma_m = {(wib * fb.intercept + wir * fr.intercept) / (wib + wir)};
  out.gamma_m_sigma_rad_s = std::sqrt(1.0 / (wib + wir));
  return out;
}

// --- run_calibration -------------------------------------------------------

namespace {

struct PeakRow {
  int run_index = -1;
  bool ok = false;
  std::string failure;
  PeakFit fit;
  bool self_oscillating = false;
};

struct CandidateEval {
  BranchCandidate cand;
  TlsCavityFit tls;
  std::map<double, double> gamma_m_by_t;        // rad/s
  std::map<double, double> gamma_m_sigma_by_t;  // rad/s
  std::vector<RunPhononRow> rows;
  std::vector<RatioPoint> ratio_vs_t;
  std::vector<std::string> g0_run_ids;
  std::vector<std::string> ratio_run_ids;
};

double twpa_plane_factor_for(const ChainCal& chain) {
  switch (chain.twpa_power_reference) {
    case PowerReference::TwpaInput:
      return 1.0;
    case PowerReference::Chip:
      return db_to_linear(chain.chip_to_twpa_loss_db);
    case PowerReference::Generator:
      return db_to_linear(chain.chip_to_twpa_loss_db + chain.injection_attenuation_db);
  }
  return 1.0;
}

double slice_kappa_rel_sigma(const TlsCavityFit& tls, double t_k) {
  auto it = tls.slice_residual_rms.find(t_k);
  if (it != tls.slice_residual_rms.end() && it->second > 0.0) return it->second;
  double acc = 0.0;
  for (const auto& [t, rms] : tls.slice_residual_rms) acc += rms;
  return tls.slice_residual_rms.empty() ? 0.01
                                        : acc / static_cast<double>(tls.slice_residual_rms.size());
}

}  // namespace

CalibrationReport run_calibration(const Dataset& ds, const CalibrationOptions& opts) {
  // --- validation ---------------------------------------------------------
  std::vector<int> sweep_idx, sideband_idx, scan_off_idx;
  std::set<double> sweep_temps;
  for (int i = 0; i < static_cast<int>(ds.runs.size()); ++i) {
    const RunRecord& r = ds.runs[i];
    switch (r.kind) {
      case RunKind::ReflectionSweep:
        sweep_idx.push_back(i);
        sweep_temps.insert(r.t_cryo.kelvin);
        break;
      case RunKind::SidebandSpectrum:
        sideband_idx.push_back(i);
        break;
      case RunKind::TwpaScan:
        if (r.twpa_pump == TwpaPump::Off) scan_off_idx.push_back(i);
        break;
    }
  }
  if (sweep_idx.empty() || sideband_idx.empty())
    throw InvalidArgumentError("run_calibration: dataset needs at least one reflection sweep and "
                               "one sideband spectrum");
  if (sweep_temps.size() < 2)
    throw InvalidArgumentError("run_calibration: need sweeps at >= 2 temperatures");
  if (opts.twpa_correction && scan_off_idx.empty())
    throw MissingCorrectionError(
        "run_calibration: TWPA correction requested but the dataset has no run of kind "
        "'twpa_scan' with twpa_pump = off; rerun with --no-twpa-correction or add scans");

  // --- stage 1: cavity sweep fits ------------------------------------------
  std::vector<ReflectionFit> sweep_fits(sweep_idx.size());
  std::vector<double> sweep_p_chip(sweep_idx.size());
  parallel_for(static_cast<int>(sweep_idx.size()), opts.threads, [&](int k) {
    const RunRecord& r = ds.runs[sweep_idx[k]];
    sweep_p_chip[k] =
        power_at_reference(r.p_generator, ds.chain.cavity_power_reference, ds.chain).watts;
    sweep_fits[k] = fit_reflection(r.trace);
  });

  // Weighted mean resonance frequency.
  double fc_num = 0.0, fc_den = 0.0;
  for (const auto& f : sweep_fits) {
    const double s = f.f_c_sigma_hz > 0.0 ? f.f_c_sigma_hz : 1.0;
    fc_num += f.overcoupled.f_c.hz / (s * s);
    fc_den += 1.0 / (s * s);
  }
  const Frequency f_c{fc_num / fc_den};

  // --- stage 2: branch candidates from the cleanest (most saturated) sweep -
  std::size_t ref = 0;
  for (std::size_t k = 1; k < sweep_fits.size(); ++k)
    if (sweep_fits[k].overcoupled.kappa_tot().rad_per_s <
        sweep_fits[ref].overcoupled.kappa_tot().rad_per_s)
      ref = k;
  const ReflectionFit& ref_fit = sweep_fits[ref];

  // Swap-residual degeneracy of the reference sweep, for the record.
  {
    const RunRecord& r = ds.runs[sweep_idx[ref]];
    auto ssr = [&](const CavityParams& p) {
      double acc = 0.0;
      for (std::size_t i = 0; i < r.trace.freq_hz.size(); ++i) {
        const double d = s11_db(p, Frequency{r.trace.freq_hz[i]}) - r.trace.mag_db[i];
        acc += d * d;
      }
      return acc;
    };
    const double a = ssr(ref_fit.overcoupled);
    const double b = ssr(ref_fit.undercoupled);
    // stored below once the report exists
    (void)a;
    (void)b;
  }

  // --- stage 3: TWPA TLS fit ------------------------------------------------
  std::optional<TwpaFit> twpa_fit;
  if (!scan_off_idx.empty()) {
    std::vector<TwpaScanPoint> pts;
    for (int i : scan_off_idx) {
      const RunRecord& r = ds.runs[i];
      for (std::size_t k = 0; k < r.scan.power_w.size(); ++k)
        pts.push_back({r.t_cryo, Power{r.scan.power_w[k]}, r.scan.transmission[k]});
    }
    twpa_fit = fit_tls_twpa(pts, f_c);
  }

  // --- stage 4: sideband peak fits -------------------------------------------
  std::vector<PeakRow> peaks(sideband_idx.size());
  parallel_for(static_cast<int>(sideband_idx.size()), opts.threads, [&](int k) {
    PeakRow& row = peaks[k];
    row.run_index = sideband_idx[k];
    try {
      row.fit = integrate_peak(ds.runs[sideband_idx[k]].spectrum);
      row.ok = true;
    } catch (const Error& e) {
      row.failure = e.what();
    }
  });

  // Self-oscillation detection: a blue run whose fitted linewidth collapses
  // far below the red-scheme floor at the same temperature is free-running.
  std::map<double, double> red_floor;  // T -> min red Gamma_eff
  std::map<double, double> blue_ceiling;
  for (const PeakRow& p : peaks) {
    if (!p.ok) continue;
    const RunRecord& r = ds.runs[p.run_index];
    if (r.scheme == RunScheme::Red) {
      auto [it, inserted] = red_floor.try_emplace(r.t_cryo.kelvin, p.fit.gamma_eff_rad_s);
      if (!inserted) it->second = std::min(it->second, p.fit.gamma_eff_rad_s);
    } else if (r.scheme == RunScheme::Blue) {
      auto [it, inserted] = blue_ceiling.try_emplace(r.t_cryo.kelvin, p.fit.gamma_eff_rad_s);
      if (!inserted) it->second = std::max(it->second, p.fit.gamma_eff_rad_s);
    }
  }
  for (PeakRow& p : peaks) {
    if (!p.ok) continue;
    const RunRecord& r = ds.runs[p.run_index];
    if (r.scheme != RunScheme::Blue) continue;
    double floor = 0.0;
    if (auto it = red_floor.find(r.t_cryo.kelvin); it != red_floor.end())
      floor = it->second;
    else if (auto bc = blue_ceiling.find(r.t_cryo.kelvin); bc != blue_ceiling.end())
      floor = bc->second;
    if (floor > 0.0 && p.fit.gamma_eff_rad_s < 0.02 * floor) p.self_oscillating = true;
  }

  // Mechanical frequency from the peak centers.
  double om_num = 0.0, om_den = 0.0, om_m2 = 0.0;
  int om_n = 0;
  for (const PeakRow& p : peaks) {
    if (!p.ok || p.self_oscillating) continue;
    const double s = p.fit.center_sigma_hz > 0.0 ? p.fit.center_sigma_hz : 1.0;
    om_num += p.fit.center_hz / (s * s);
    om_den += 1.0 / (s * s);
    ++om_n;
  }
  if (om_n == 0) throw Error("run_calibration: no usable sideband peak");
  const double omega_m_hz = om_num / om_den;
  for (const PeakRow& p : peaks) {
    if (!p.ok || p.self_oscillating) continue;
    om_m2 += (p.fit.center_hz - omega_m_hz) * (p.fit.center_hz - omega_m_hz);
  }
  const double omega_m_sigma_hz =
      om_n > 1 ? std::sqrt(om_m2 / (om_n - 1) / om_n) : 1.0 / std::sqrt(om_den);
  const AngularRate omega_m{omega_m_hz * constants::two_pi};

  // --- stage 5: per-branch evaluation ---------------------------------------
  std::vector<TlsCavityPoint> tls_points;
  for (std::size_t k = 0; k < sweep_fits.size(); ++k)
    tls_points.push_back({ds.runs[sweep_idx[k]].t_cryo, Power{sweep_p_chip[k]},
                          sweep_fits[k].overcoupled.kappa_tot()});

  const double plane_factor = twpa_plane_factor_for(ds.chain);

  // kappa_ext candidates: the ambiguity pair of the most saturated sweep,
  // refined by averaging the matching pair member over the five smallest
  // kappa_tot sweeps (a single minimum would inherit the selection bias of
  // picking a downward noise fluctuation).
  std::vector<std::size_t> order(sweep_fits.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return sweep_fits[a].overcoupled.kappa_tot().rad_per_s <
           sweep_fits[b].overcoupled.kappa_tot().rad_per_s;
  });
  auto refine_kappa_ext = [&](bool over, double& value, double& sigma) {
    const double c0 = (over ? ref_fit.overcoupled : ref_fit.undercoupled).kappa_ext.rad_per_s;
    double num = 0.0, den = 0.0;
    const std::size_t count = std::min<std::size_t>(5, order.size());
    for (std::size_t i = 0; i < count; ++i) {
      const ReflectionFit& f = sweep_fits[order[i]];
      const double m_over = f.overcoupled.kappa_ext.rad_per_s;
      const double m_under = f.undercoupled.kappa_ext.rad_per_s;
      const bool use_over = std::abs(m_over - c0) <= std::abs(m_under - c0);
      const double member = use_over ? m_over : m_under;
      if (std::abs(member - c0) > 0.3 * c0) continue;  // other branch drifted into range
      double s = constants::two_pi *
                 (use_over ? f.kappa_ext_sigma_over_hz : f.kappa_ext_sigma_under_hz);
      if (!(s > 0.0)) s = 0.01 * member;
      num += member / (s * s);
      den += 1.0 / (s * s);
    }
    if (den > 0.0) {
      value = num / den;
      sigma = std::sqrt(1.0 / den);
    } else {
      value = c0;
      sigma = constants::two_pi *
              (over ? ref_fit.kappa_ext_sigma_over_hz : ref_fit.kappa_ext_sigma_under_hz);
    }
  };

  auto evaluate_candidate = [&](CouplingBranch label) {
    CandidateEval ev;
    ev.cand.label = label;
    const bool over = label == CouplingBranch::Overcoupled;
    const CavityParams& ref_params = over ? ref_fit.overcoupled : ref_fit.undercoupled;
    refine_kappa_ext(over, ev.cand.kappa_ext_rad_s, ev.cand.kappa_ext_sigma_rad_s);
    const AngularRate kappa_ext{ev.cand.kappa_ext_rad_s};

    ev.tls = fit_tls_cavity(tls_points, kappa_ext, f_c);

    // Per-temperature coupling extraction and zero-power intercepts.
    std::map<double, std::vector<GammaPoint>> blue_pts, red_pts;
    std::map<double, std::vector<std::string>> ramp_ids;
    for (const PeakRow& p : peaks) {
      if (!p.ok || p.self_oscillating) continue;
      const RunRecord& r = ds.runs[p.run_index];
      if (r.scheme == RunScheme::ProbeOnly) continue;
      GammaPoint gp{power_at_reference(r.p_generator, ds.chain.cavity_power_reference, ds.chain),
                    p.fit.gamma_eff_rad_s, p.fit.gamma_eff_sigma_rad_s};
      if (r.scheme == RunScheme::Blue)
        blue_pts[r.t_cryo.kelvin].push_back(gp);
      else
        red_pts[r.t_cryo.kelvin].push_back(gp);
      ramp_ids[r.t_cryo.kelvin].push_back(r.id);
    }

    double g0_num = 0.0, g0_den = 0.0;
    for (const auto& [t_k, blue] : blue_pts) {
      auto red_it = red_pts.find(t_k);
      if (red_it == red_pts.end()) continue;
      G0Estimate est;
      try {
        est = extract_g0(blue, red_it->second, kappa_ext, ev.tls.params, f_c, omega_m,
                         Temperature{t_k});
      } catch (const RangeError&) {
        continue;  // slice too thin; runs at this T are dropped later
      }
      ev.gamma_m_by_t[t_k] = est.gamma_m.rad_per_s;
      ev.gamma_m_sigma_by_t[t_k] = est.gamma_m_sigma_rad_s;
      if (!est.zero_slope && est.g0_sigma_rad_s > 0.0) {
        const double w = 1.0 / (est.g0_sigma_rad_s * est.g0_sigma_rad_s);
        g0_num += w * est.g0.rad_per_s;
        g0_den += w;
      }
      auto& ids = ramp_ids[t_k];
      ev.g0_run_ids.insert(ev.g0_run_ids.end(), ids.begin(), ids.end());
    }
    if (g0_den <= 0.0)
      throw IdentifiabilityError("run_calibration: no temperature slice could constrain g0");
    ev.cand.g0_rad_s = g0_num / g0_den;
    ev.cand.g0_sigma_rad_s = std::sqrt(1.0 / g0_den);

    // Gamma_m table for the conversion stage.
    TempTable gamma_m;
    for (const auto& [t_k, g] : ev.gamma_m_by_t) {
      gamma_m.t_kelvin.push_back(t_k);
      gamma_m.value.push_back(g);
    }

    OptomechParams om;
    om.omega_m = omega_m;
    om.gamma_m = gamma_m;
    om.g0 = {ev.cand.g0_rad_s};
    om.cavity = ref_params;
    om.cavity.kappa_ext = kappa_ext;  // refined multi-sweep estimate

    // Phonon conversion per run.
    ev.rows.resize(peaks.size());
    parallel_for(static_cast<int>(peaks.size()), opts.threads, [&](int k) {
      const PeakRow& p = peaks[k];
      const RunRecord& r = ds.runs[p.run_index];
      RunPhononRow row;
      row.run_id = r.id;
      row.t_k = r.t_cryo.kelvin;
      row.t_uncertainty_rel = r.t_uncertainty_rel;
      row.scheme = r.scheme;
      row.repeat = r.repeat;
      row.p_chip_w =
          power_at_reference(r.p_generator, ds.chain.cavity_power_reference, ds.chain).watts;
      if (!p.ok) {
        row.excluded = true;
        row.exclusion_reason = p.failure;
        ev.rows[k] = std::move(row);
        return;
      }
      row.gamma_eff_rad_s = p.fit.gamma_eff_rad_s;
      row.gamma_eff_sigma_rad_s = p.fit.gamma_eff_sigma_rad_s;
      row.area_out = p.fit.area;
      row.area_sigma = p.fit.area_sigma;
      if (p.self_oscillating) {
        row.excluded = true;
        row.exclusion_reason = "self-oscillating (blue pump above threshold)";
        ev.rows[k] = std::move(row);
        return;
      }
      if (!gamma_m.covers(r.t_cryo)) {
        row.excluded = true;
        row.exclusion_reason = "no damping calibration at this temperature";
        ev.rows[k] = std::move(row);
        return;
      }

      PhononAreaOptions pa;
      pa.twpa_correction = opts.twpa_correction;
      pa.measured_gamma_eff = AngularRate{row.gamma_eff_rad_s};
      pa.saturation_limit = opts.twpa_saturation_limit;
      pa.twpa_plane_factor = plane_factor;
      const PumpScheme scheme =
          r.scheme == RunScheme::Blue ? PumpScheme::Blue : PumpScheme::Red;
      std::optional<TwpaTlsParams> twpa_params;
      if (twpa_fit) twpa_params = twpa_fit->params;

      PhononBreakdown bd;
      try {
        bd = phonon_area_detailed(row.area_out, scheme, r.t_cryo, Power{row.p_chip_w}, om,
                                  ev.tls.params, twpa_params, ds.chain, pa);
      } catch (const SaturationError& e) {
        row.excluded = true;
        row.exclusion_reason = e.what();
        ev.rows[k] = std::move(row);
        return;
      } catch (const RangeError& e) {
        row.excluded = true;
        row.exclusion_reason = e.what();
        ev.rows[k] = std::move(row);
        return;
      }

      row.delta = bd.delta;
      row.g_opt = bd.g_opt;
      row.m_factor = bd.m_factor;
      row.a_ph = bd.a_ph;
      row.occupancy = row.a_ph - ((opts.asymmetry && scheme == PumpScheme::Blue) ? 1.0 : 0.0);
      row.n_ph = bose_einstein(omega_m, r.t_cryo);
      row.ratio = row.occupancy / row.n_ph;

      // Per-run Monte-Carlo uncertainty on the phonon area.
      const double gamma_m_t = gamma_m.at(r.t_cryo, true);
      const double tanh_f = tanh_factor(f_c, r.t_cryo);
      const double delta_sigma =
          (opts.twpa_correction && twpa_fit) ? twpa_fit->lambda0_sigma * tanh_f : 0.0;
      const double kappa_rel = slice_kappa_rel_sigma(ev.tls, r.t_cryo.kelvin);
      const double kappa_tot_nom =
          kappa_ext.rad_per_s +
          kappa_in_model(ev.tls.params, f_c, r.t_cryo, Power{row.p_chip_w}, true).rad_per_s;

      std::vector<McInput> inputs = {
          {"area", row.area_out, row.area_sigma, PerturbationKind::Absolute},
          {"g0", ev.cand.g0_rad_s, ev.cand.g0_sigma_rad_s / ev.cand.g0_rad_s,
           PerturbationKind::Relative},
          {"kappa_ext", kappa_ext.rad_per_s,
           ev.cand.kappa_ext_sigma_rad_s / kappa_ext.rad_per_s, PerturbationKind::Relative},
          {"kappa_tot", kappa_tot_nom, kappa_rel, PerturbationKind::Relative},
          {"p_chip", row.p_chip_w, ds.chain.chain_uncertainty_db, PerturbationKind::Db},
          {"gain", 1.0, ds.chain.chain_uncertainty_db, PerturbationKind::Db},
          {"delta", row.delta, delta_sigma, PerturbationKind::Absolute},
          {"gamma_eff", row.gamma_eff_rad_s, row.gamma_eff_sigma_rad_s,
           PerturbationKind::Absolute},
      };
      const double omega_c = to_angular(f_c).rad_per_s;
      const double om2 = omega_m.rad_per_s * omega_m.rad_per_s;
      const double lct = db_to_linear(ds.chain.chip_to_twpa_loss_db);
      const double gain_lin = db_to_linear(ds.chain.detection_gain_db);
      auto pipeline_fn = [&](std::span<const double> v) {
        const double m = 4.0 * v[1] * v[1] * v[2] * v[2] /
                         (constants::hbar * om2 * omega_c * v[3] * v[3]);
        const double gopt = gamma_m_t / v[7];
        const double a_chip = v[0] / (gain_lin * v[5]) / std::max(v[6], 1e-6) * lct;
        return a_chip / (gopt * m * v[4]);
      };
      const McSummary mc = monte_carlo_propagate(pipeline_fn, inputs, opts.mc_samples,
                                                 fnv1a64(r.id, opts.seed));
      row.a_ph_sigma = mc.stddev;

      // n_ph sensitivity to the thermometry uncertainty.
      const double n_lo = bose_einstein(omega_m, Temperature{r.t_cryo.kelvin *
                                                             (1.0 - r.t_uncertainty_rel)});
      const double n_hi = bose_einstein(omega_m, Temperature{r.t_cryo.kelvin *
                                                             (1.0 + r.t_uncertainty_rel)});
      const double n_rel = 0.5 * std::abs(n_hi - n_lo) / row.n_ph;
      const double a_rel = row.a_ph > 0.0 ? row.a_ph_sigma / row.a_ph : 0.0;
      row.ratio_sigma = std::abs(row.ratio) * std::sqrt(a_rel * a_rel + n_rel * n_rel);

      ev.rows[k] = std::move(row);
    });

    // Ratio aggregation and branch metric.
    std::map<double, std::vector<const RunPhononRow*>> by_t;
    for (const RunPhononRow& row : ev.rows) {
      if (row.excluded) continue;
      by_t[row.t_k].push_back(&row);
      ev.ratio_run_ids.push_back(row.run_id);
    }
    for (const auto& [t_k, rows] : by_t) {
      RatioPoint pt;
      pt.t_k = t_k;
      pt.n_runs = static_cast<int>(rows.size());
      double acc = 0.0;
      for (const auto* r : rows) acc += r->ratio;
      pt.ratio = acc / pt.n_runs;
      if (pt.n_runs > 1) {
        double var = 0.0;
        for (const auto* r : rows) var += (r->ratio - pt.ratio) * (r->ratio - pt.ratio);
        pt.sigma = std::sqrt(var / (pt.n_runs - 1) / pt.n_runs);
      } else {
        pt.sigma = rows.front()->ratio_sigma;
      }
      ev.ratio_vs_t.push_back(pt);
    }

    double log_acc = 0.0;
    int log_n = 0;
    for (const RunPhononRow& row : ev.rows) {
      if (row.excluded || row.t_k < opts.branch_high_t_min_k || !(row.ratio > 0.0)) continue;
      log_acc += std::log(row.ratio);
      ++log_n;
    }
    if (log_n == 0) {  // no high-temperature anchor; fall back to everything
      for (const RunPhononRow& row : ev.rows) {
        if (row.excluded || !(row.ratio > 0.0)) continue;
        log_acc += std::log(row.ratio);
        ++log_n;
      }
    }
    ev.cand.mean_high_t_ratio = log_n > 0 ? std::exp(log_acc / log_n) : 0.0;
    ev.cand.metric = log_n > 0 ? std::abs(log_acc / log_n)
                               : std::numeric_limits<double>::infinity();
    return ev;
  };

  CandidateEval over_ev = evaluate_candidate(CouplingBranch::Overcoupled);
  CandidateEval under_ev = evaluate_candidate(CouplingBranch::Undercoupled);

  // --- stage 6: branch decision and assembly --------------------------------
  CalibrationReport rep;
  rep.tool_version = version_string;
  rep.manifest_path = ds.manifest_path;
  rep.content_hash = ds.content_hash ? ds.content_hash : dataset_content_hash(ds);
  rep.seed = opts.seed;
  rep.twpa_corrected = opts.twpa_correction;
  rep.asymmetry = opts.asymmetry;

  rep.branch.overcoupled = over_ev.cand;
  rep.branch.undercoupled = under_ev.cand;
  const double r_o = over_ev.cand.mean_high_t_ratio;
  const double r_u = under_ev.cand.mean_high_t_ratio;
  rep.branch.ambiguous = std::abs(r_o - r_u) <= opts.branch_ambiguity_fraction * std::max(r_o, r_u);
  rep.branch.chosen = rep.branch.ambiguous
                          ? CouplingBranch::Overcoupled
                          : (over_ev.cand.metric <= under_ev.cand.metric
                                 ? CouplingBranch::Overcoupled
                                 : CouplingBranch::Undercoupled);

  {
    const RunRecord& r = ds.runs[sweep_idx[ref]];
    auto ssr = [&](const CavityParams& p) {
      double acc = 0.0;
      for (std::size_t i = 0; i < r.trace.freq_hz.size(); ++i) {
        const double d = s11_db(p, Frequency{r.trace.freq_hz[i]}) - r.trace.mag_db[i];
        acc += d * d;
      }
      return acc;
    };
    const double a = ssr(ref_fit.overcoupled);
    const double b = ssr(ref_fit.undercoupled);
    rep.branch.s11_swap_residual_asymmetry = std::abs(a - b) / std::max(a, b);
  }

  CandidateEval& chosen =
      rep.branch.chosen == CouplingBranch::Overcoupled ? over_ev : under_ev;

  rep.f_c_hz = f_c.hz;
  {
    double s2 = 0.0;
    for (const auto& f : sweep_fits) {
      const double s = f.f_c_sigma_hz > 0.0 ? f.f_c_sigma_hz : 1.0;
      s2 += 1.0 / (s * s);
    }
    rep.f_c_sigma_hz = 1.0 / std::sqrt(s2);
  }
  for (std::size_t k = 0; k < sweep_fits.size(); ++k) {
    SweepFitRow row;
    row.run_id = ds.runs[sweep_idx[k]].id;
    row.t_k = ds.runs[sweep_idx[k]].t_cryo.kelvin;
    row.p_chip_w = sweep_p_chip[k];
    row.f_c_hz = sweep_fits[k].overcoupled.f_c.hz;
    row.kappa_tot_hz = sweep_fits[k].overcoupled.kappa_tot().rad_per_s / constants::two_pi;
    row.kappa_tot_sigma_hz = sweep_fits[k].kappa_tot_sigma_hz;
    row.kappa_branch_a = sweep_fits[k].engine.params[2];
    rep.sweeps.push_back(row);
  }
  rep.tls_cavity = chosen.tls;
  rep.tls_twpa = twpa_fit;
  rep.omega_m_hz = omega_m_hz;
  rep.omega_m_sigma_hz = omega_m_sigma_hz;
  {
    double kappa_max = 0.0;
    for (const auto& f : sweep_fits)
      kappa_max = std::max(kappa_max, f.overcoupled.kappa_tot().rad_per_s);
    rep.sideband_resolved = omega_m.rad_per_s > kappa_max;
  }
  for (const auto& [t_k, g] : chosen.gamma_m_by_t)
    rep.gamma_m_hz_by_t[t_k] = g / constants::two_pi;
  for (const auto& [t_k, s] : chosen.gamma_m_sigma_by_t)
    rep.gamma_m_sigma_hz_by_t[t_k] = s / constants::two_pi;
  rep.runs = std::move(chosen.rows);
  rep.ratio_vs_t = std::move(chosen.ratio_vs_t);
  rep.g0_run_ids = std::move(chosen.g0_run_ids);
  rep.ratio_run_ids = std::move(chosen.ratio_run_ids);

  // Absolute error budget of the phonon scale: +-5% device parameters plus
  // the chain calibration uncertainty.
  {
    const BranchCandidate& c =
        rep.branch.chosen == CouplingBranch::Overcoupled ? rep.branch.overcoupled
                                                         : rep.branch.undercoupled;
    const double kappa_tot_ref = ref_fit.overcoupled.kappa_tot().rad_per_s;
    const double omega_c = to_angular(f_c).rad_per_s;
    const double om2 = omega_m.rad_per_s * omega_m.rad_per_s;
    std::vector<McInput> inputs = {
        {"g0", c.g0_rad_s, 0.05, PerturbationKind::Relative},
        {"kappa_ext", c.kappa_ext_rad_s, 0.05, PerturbationKind::Relative},
        {"kappa_tot", kappa_tot_ref, 0.05, PerturbationKind::Relative},
        {"chain", 1.0, ds.chain.chain_uncertainty_db, PerturbationKind::Db},
    };
    auto scale_fn = [&](std::span<const double> v) {
      const double m =
          4.0 * v[0] * v[0] * v[1] * v[1] / (constants::hbar * om2 * omega_c * v[2] * v[2]);
      return 1.0 / (m * v[3]);
    };
    rep.error_budget =
        monte_carlo_propagate(scale_fn, inputs, std::max(400, opts.mc_samples), opts.seed);
  }

  if (ds.ground_truth) {
    const GroundTruth& gt = *ds.ground_truth;
    GroundTruthComparison cmp;
    const BranchCandidate& c = rep.branch.chosen == CouplingBranch::Overcoupled
                                   ? rep.branch.overcoupled
                                   : rep.branch.undercoupled;
    cmp.g0_ratio = c.g0_rad_s / gt.g0.rad_per_s;
    cmp.kappa_ext_ratio = c.kappa_ext_rad_s / gt.kappa_ext.rad_per_s;
    cmp.kappa_tls0_ratio =
        rep.tls_cavity.params.kappa_tls0.rad_per_s / gt.tls_cavity.kappa_tls0.rad_per_s;
    cmp.lambda0_ratio =
        twpa_fit ? twpa_fit->params.lambda0 / gt.tls_twpa.lambda0 : 0.0;
    double acc = 0.0;
    int n = 0;
    for (const RunPhononRow& row : rep.runs) {
      if (row.excluded) continue;
      acc += row.ratio;
      ++n;
    }
    cmp.mean_ratio_all_t = n ? acc / n : 0.0;
    rep.truth = cmp;
  }

  return rep;
}

// --- serialization ----------------------------------------------------------

namespace {

json report_to_json(const CalibrationReport& r) {
  json j;
  j["format"] = "omcal-report/1";
  j["tool_version"] = r.tool_version;
  j["provenance"] = {{"manifest", r.manifest_path},
                     {"content_hash", r.content_hash},
                     {"seed", r.seed},
                     {"twpa_correction", r.twpa_corrected},
                     {"asymmetry", r.asymmetry}};

  auto branch_json = [](const BranchCandidate& c) {
    return json{{"label", c.label == CouplingBranch::Overcoupled ? "overcoupled" : "undercoupled"},
                {"kappa_ext_hz", c.kappa_ext_rad_s / constants::two_pi},
                {"kappa_ext_sigma_hz", c.kappa_ext_sigma_rad_s / constants::two_pi},
                {"g0_hz", c.g0_rad_s / constants::two_pi},
                {"g0_sigma_hz", c.g0_sigma_rad_s / constants::two_pi},
                {"mean_high_t_ratio", c.mean_high_t_ratio},
                {"metric", c.metric}};
  };
  j["branch"] = {{"chosen", r.branch.chosen == CouplingBranch::Overcoupled ? "overcoupled"
                                                                           : "undercoupled"},
                 {"ambiguous", r.branch.ambiguous},
                 {"s11_swap_residual_asymmetry", r.branch.s11_swap_residual_asymmetry},
                 {"overcoupled", branch_json(r.branch.overcoupled)},
                 {"undercoupled", branch_json(r.branch.undercoupled)}};

  j["cavity"] = {{"f_c_hz", r.f_c_hz}, {"f_c_sigma_hz", r.f_c_sigma_hz}};
  json sweeps = json::array();
  for (const SweepFitRow& s : r.sweeps)
    sweeps.push_back({{"run_id", s.run_id},
                      {"t_k", s.t_k},
                      {"p_chip_w", s.p_chip_w},
                      {"f_c_hz", s.f_c_hz},
                      {"kappa_tot_hz", s.kappa_tot_hz},
                      {"kappa_tot_sigma_hz", s.kappa_tot_sigma_hz},
                      {"kappa_branch_a", s.kappa_branch_a}});
  j["cavity"]["sweeps"] = std::move(sweeps);

  {
    const TlsCavityFit& t = r.tls_cavity;
    json p0 = json::array();
    for (std::size_t i = 0; i < t.params.p_cav0.t_kelvin.size(); ++i)
      p0.push_back({{"t_k", t.params.p_cav0.t_kelvin[i]},
                    {"p0_w", t.params.p_cav0.value[i]},
                    {"sigma_w", i < t.p0_sigma.size() ? t.p0_sigma[i] : 0.0}});
    json rms = json::object();
    for (const auto& [t_k, v] : t.slice_residual_rms) rms[std::to_string(t_k)] = v;
    j["tls_cavity"] = {{"kappa_tls0_hz", t.params.kappa_tls0.rad_per_s / constants::two_pi},
                       {"kappa_tls0_sigma_hz", t.kappa_tls0_sigma / constants::two_pi},
                       {"kappa_dielec0_hz", t.params.kappa_dielec0.rad_per_s / constants::two_pi},
                       {"kappa_dielec0_sigma_hz", t.kappa_dielec0_sigma / constants::two_pi},
                       {"alpha_hz", t.params.alpha.rad_per_s / constants::two_pi},
                       {"alpha_sigma_hz", t.alpha_sigma / constants::two_pi},
                       {"t_c_k", t.params.t_c.kelvin},
                       {"t_c_sigma_k", t.t_c_sigma},
                       {"p_cav0", std::move(p0)},
                       {"slice_residual_rms", std::move(rms)},
                       {"model_variant", "tuned_saturation"}};
  }
  if (r.tls_twpa) {
    const TwpaFit& t = *r.tls_twpa;
    json p0 = json::array();
    for (std::size_t i = 0; i < t.params.p_twpa0.t_kelvin.size(); ++i)
      p0.push_back({{"t_k", t.params.p_twpa0.t_kelvin[i]},
                    {"p0_w", t.params.p_twpa0.value[i]},
                    {"sigma_w", i < t.p0_sigma.size() ? t.p0_sigma[i] : 0.0}});
    j["tls_twpa"] = {{"lambda0", t.params.lambda0},
                     {"lambda0_sigma", t.lambda0_sigma},
                     {"beta", t.params.beta},
                     {"beta_sigma", t.beta_sigma},
                     {"p_twpa0", std::move(p0)}};
  }

  json gm = json::array();
  for (const auto& [t_k, g] : r.gamma_m_hz_by_t) {
    double sigma = 0.0;
    if (auto it = r.gamma_m_sigma_hz_by_t.find(t_k); it != r.gamma_m_sigma_hz_by_t.end())
      sigma = it->second;
    gm.push_back({{"t_k", t_k}, {"gamma_m_hz", g}, {"sigma_hz", sigma}});
  }
  j["optomech"] = {{"omega_m_hz", r.omega_m_hz},
                   {"omega_m_sigma_hz", r.omega_m_sigma_hz},
                   {"sideband_resolved", r.sideband_resolved},
                   {"gamma_m", std::move(gm)}};

  json runs = json::array();
  for (const RunPhononRow& row : r.runs) {
    json e = {{"run_id", row.run_id},
              {"t_k", row.t_k},
              {"t_uncertainty_rel", row.t_uncertainty_rel},
              {"p_chip_w", row.p_chip_w},
              {"scheme", to_string(row.scheme)},
              {"repeat", row.repeat},
              {"excluded", row.excluded}};
    if (row.excluded) {
      e["exclusion_reason"] = row.exclusion_reason;
    } else {
      e["gamma_eff_hz"] = row.gamma_eff_rad_s / constants::two_pi;
      e["gamma_eff_sigma_hz"] = row.gamma_eff_sigma_rad_s / constants::two_pi;
      e["area_out_photons_per_s"] = row.area_out;
      e["area_sigma"] = row.area_sigma;
      e["delta"] = row.delta;
      e["g_opt"] = row.g_opt;
      e["m_factor_per_w_s"] = row.m_factor;
      e["a_ph"] = row.a_ph;
      e["a_ph_sigma"] = row.a_ph_sigma;
      e["occupancy"] = row.occupancy;
      e["n_ph"] = row.n_ph;
      e["ratio"] = row.ratio;
      e["ratio_sigma"] = row.ratio_sigma;
    }
    runs.push_back(std::move(e));
  }
  j["runs"] = std::move(runs);

  json ratio = json::array();
  for (const RatioPoint& p : r.ratio_vs_t)
    ratio.push_back(
        {{"t_k", p.t_k}, {"ratio", p.ratio}, {"sigma", p.sigma}, {"n_runs", p.n_runs}});
  j["aph_over_nph_vs_t"] = std::move(ratio);

  j["contributing"] = {{"g0_run_ids", r.g0_run_ids}, {"ratio_run_ids", r.ratio_run_ids}};
  j["error_budget"] = {{"mean", r.error_budget.mean},
                       {"stddev", r.error_budget.stddev},
                       {"relative_spread", r.error_budget.relative_spread()},
                       {"n_samples", r.error_budget.n_samples},
                       {"n_failed", r.error_budget.n_failed}};

  if (r.truth)
    j["ground_truth_comparison"] = {{"g0_ratio", r.truth->g0_ratio},
                                    {"kappa_ext_ratio", r.truth->kappa_ext_ratio},
                                    {"kappa_tls0_ratio", r.truth->kappa_tls0_ratio},
                                    {"lambda0_ratio", r.truth->lambda0_ratio},
                                    {"mean_ratio_all_t", r.truth->mean_ratio_all_t}};
  return j;
}

std::string format_summary(const json& j) {
  std::ostringstream out;
  char buf[256];
  out << "omcal calibration report (tool " << j.value("tool_version", "?") << ")\n";
  if (j.contains("failure")) {
    out << "FAILED: " << j.at("failure").value("message", "(no message)") << "\n";
    return out.str();
  }
  const auto& br = j.at("branch");
  std::snprintf(buf, sizeof buf,
                "branch: %s%s  [ratio over=%.3f under=%.3f]\n",
                br.at("chosen").get<std::string>().c_str(),
                br.value("ambiguous", false) ? " (AMBIGUOUS, overcoupled default)" : "",
                br.at("overcoupled").at("mean_high_t_ratio").get<double>(),
                br.at("undercoupled").at("mean_high_t_ratio").get<double>());
  out << buf;
  const auto& chosen = br.at(br.at("chosen").get<std::string>());
  std::snprintf(buf, sizeof buf, "f_c = %.6f GHz   kappa_ext/2pi = %.2f +- %.2f kHz\n",
                j.at("cavity").at("f_c_hz").get<double>() / 1e9,
                chosen.at("kappa_ext_hz").get<double>() / 1e3,
                chosen.at("kappa_ext_sigma_hz").get<double>() / 1e3);
  out << buf;
  std::snprintf(buf, sizeof buf, "g0/2pi = %.2f +- %.2f Hz   Omega_m/2pi = %.5f MHz\n",
                chosen.at("g0_hz").get<double>(), chosen.at("g0_sigma_hz").get<double>(),
                j.at("optomech").at("omega_m_hz").get<double>() / 1e6);
  out << buf;
  if (j.contains("tls_twpa")) {
    std::snprintf(buf, sizeof buf, "TWPA: lambda0 = %.4f +- %.4f, beta = %.3f +- %.3f\n",
                  j.at("tls_twpa").at("lambda0").get<double>(),
                  j.at("tls_twpa").at("lambda0_sigma").get<double>(),
                  j.at("tls_twpa").at("beta").get<double>(),
                  j.at("tls_twpa").at("beta_sigma").get<double>());
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "absolute scale uncertainty (MC): +-%.0f%%\n",
                100.0 * j.at("error_budget").at("relative_spread").get<double>());
  out << buf;
  out << "\n   T [mK]     A_ph/n_ph     sigma    runs\n";
  for (const auto& p : j.at("aph_over_nph_vs_t")) {
    std::snprintf(buf, sizeof buf, "%9.3f    %10.4f  %8.4f  %6d\n",
                  p.at("t_k").get<double>() * 1e3, p.at("ratio").get<double>(),
                  p.at("sigma").get<double>(), p.at("n_runs").get<int>());
    out << buf;
  }
  int excluded = 0;
  for (const auto& run : j.at("runs"))
    if (run.value("excluded", false)) ++excluded;
  out << "\nruns: " << j.at("runs").size() << " sideband (" << excluded << " excluded)\n";
  if (j.contains("ground_truth_comparison")) {
    const auto& g = j.at("ground_truth_comparison");
    std::snprintf(buf, sizeof buf,
                  "synthetic truth: g0 %.4f, kappa_ext %.4f, lambda0 %.4f, mean ratio %.4f\n",
                  g.at("g0_ratio").get<double>(), g.at("kappa_ext_ratio").get<double>(),
                  g.at("lambda0_ratio").get<double>(), g.at("mean_ratio_all_t").get<double>());
    out << buf;
  }
  return out.str();
}

}  // namespace

void write_report(const CalibrationReport& report, const Dataset& dataset,
                  const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + out_dir.string());

  {
    std::ofstream out(out_dir / "report.json", std::ios::binary);
    if (!out) throw IoError("cannot write report: " + (out_dir / "report.json").string());
    out << report_to_json(report).dump(2) << "\n";
  }

  // kappa_vs_power.csv: measured sweep points with the fitted model curve.
  {
    const BranchCandidate& c = report.branch.chosen == CouplingBranch::Overcoupled
                                   ? report.branch.overcoupled
                                   : report.branch.undercoupled;
    std::vector<double> t, p, meas, sig, model;
    for (const SweepFitRow& s : report.sweeps) {
      t.push_back(s.t_k);
      p.push_back(s.p_chip_w);
      meas.push_back(s.kappa_tot_hz);
      sig.push_back(s.kappa_tot_sigma_hz);
      double m = 0.0;
      try {
        m = (c.kappa_ext_rad_s + kappa_in_model(report.tls_cavity.params,
                                                Frequency{report.f_c_hz}, Temperature{s.t_k},
                                                Power{s.p_chip_w}, true)
                                     .rad_per_s) /
            constants::two_pi;
      } catch (const Error&) {
      }
      model.push_back(m);
    }
    const std::vector<std::string> hdr = {"t_k", "p_chip_w", "kappa_tot_hz_measured",
                                          "kappa_tot_hz_sigma", "kappa_tot_hz_model"};
    const std::vector<std::vector<double>> cols = {t, p, meas, sig, model};
    write_csv(out_dir / "kappa_vs_power.csv", hdr, cols);
  }

  // delta_vs_power.csv: TWPA-off scan points with the fitted model.
  {
    std::vector<double> t, p, meas, model;
    for (const RunRecord& r : dataset.runs) {
      if (r.kind != RunKind::TwpaScan || r.twpa_pump != TwpaPump::Off) continue;
      for (std::size_t i = 0; i < r.scan.power_w.size(); ++i) {
        t.push_back(r.t_cryo.kelvin);
        p.push_back(r.scan.power_w[i]);
        meas.push_back(r.scan.transmission[i]);
        double m = 0.0;
        if (report.tls_twpa) {
          try {
            m = twpa_transmission(report.tls_twpa->params, Frequency{report.f_c_hz}, r.t_cryo,
                                  Power{r.scan.power_w[i]}, true);
          } catch (const Error&) {
          }
        }
        model.push_back(m);
      }
    }
    const std::vector<std::string> hdr = {"t_k", "power_w", "delta_measured", "delta_model"};
    const std::vector<std::vector<double>> cols = {t, p, meas, model};
    write_csv(out_dir / "delta_vs_power.csv", hdr, cols);
  }

  // aph_over_nph_vs_T.csv
  {
    std::vector<double> t, ratio, sigma, n;
    for (const RatioPoint& pt : report.ratio_vs_t) {
      t.push_back(pt.t_k);
      ratio.push_back(pt.ratio);
      sigma.push_back(pt.sigma);
      n.push_back(pt.n_runs);
    }
    const std::vector<std::string> hdr = {"t_k", "ratio", "ratio_sigma", "n_runs"};
    const std::vector<std::vector<double>> cols = {t, ratio, sigma, n};
    write_csv(out_dir / "aph_over_nph_vs_T.csv", hdr, cols);
  }
}

std::string report_summary(const CalibrationReport& report) {
  return format_summary(report_to_json(report));
}

std::string summarize_report_file(const std::filesystem::path& report_json) {
  std::ifstream in(report_json);
  if (!in) throw IoError("cannot open report: " + report_json.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(report_json.string() + ": JSON parse error: " + e.what());
  }
  if (!j.contains("format") || j.at("format") != "omcal-report/1")
    throw SchemaError(report_json.string() + ": not an omcal report");
  return format_summary(j);
}

}  // namespace omcal
