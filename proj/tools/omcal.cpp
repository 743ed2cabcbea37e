// omcal - microwave optomechanics calibration toolkit, command line frontend.
//
// Exit codes: 0 success, 1 computational failure, 2 I/O or configuration
// failure. Human-readable output goes to stdout; machine artifacts are only
// ever written to files.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "omcal/csv.hpp"
#include "omcal/errors.hpp"
#include "omcal/pipeline.hpp"
#include "omcal/selftest.hpp"
#include "omcal/synth.hpp"
#include "omcal/version.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_computational = 1;
constexpr int exit_config = 2;

int classify(const omcal::Error& e) {
  if (dynamic_cast<const omcal::IoError*>(&e) ||
      dynamic_cast<const omcal::InvalidArgumentError*>(&e) ||
      dynamic_cast<const omcal::MissingCorrectionError*>(&e))
    return exit_config;
  return exit_computational;
}

struct GenerateArgs {
  std::string scenario_file;
  bool replica = false;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> sweep_noise_db, area_noise, drift_noise, bin_noise;
  bool asymmetry = false;
};

int cmd_generate(const GenerateArgs& args) {
  omcal::ScenarioConfig config =
      args.replica ? omcal::paper_replica_scenario() : omcal::load_scenario(args.scenario_file);
  if (args.seed) config.seed = *args.seed;
  if (config.seed == 0)
    throw omcal::InvalidArgumentError("generate: a seed is required (--seed or scenario field)");
  if (args.sweep_noise_db) config.noise.sweep_db_sigma = *args.sweep_noise_db;
  if (args.area_noise) config.noise.area_rel_sigma = *args.area_noise;
  if (args.drift_noise) config.noise.drift_rel_sigma = *args.drift_noise;
  if (args.bin_noise) config.noise.psd_bin_rel_sigma = *args.bin_noise;
  if (args.asymmetry) config.asymmetry = true;

  omcal::Dataset ds = omcal::generate_dataset(config);
  omcal::write_dataset(ds, args.out_dir);

  double t_lo = 1e9, t_hi = 0.0;
  for (const auto& r : ds.runs) {
    t_lo = std::min(t_lo, r.t_cryo.kelvin);
    t_hi = std::max(t_hi, r.t_cryo.kelvin);
  }
  std::printf("wrote %zu runs to %s (T = %g mK .. %g mK, seed %llu)\n", ds.runs.size(),
              args.out_dir.c_str(), t_lo * 1e3, t_hi * 1e3,
              static_cast<unsigned long long>(config.seed));
  return exit_ok;
}

struct CalibrateArgs {
  std::string manifest;
  std::string out_dir;
  std::uint64_t seed = 20260808;
  bool no_twpa_correction = false;
  bool asymmetry = false;
  int threads = 1;
  int mc_samples = 400;
};

int cmd_calibrate(const CalibrateArgs& args) {
  omcal::Dataset ds = omcal::ingest(args.manifest);

  omcal::CalibrationOptions opts;
  opts.twpa_correction = !args.no_twpa_correction;
  opts.asymmetry = args.asymmetry;
  opts.seed = args.seed;
  opts.threads = args.threads;
  opts.mc_samples = args.mc_samples;

  try {
    omcal::CalibrationReport report = omcal::run_calibration(ds, opts);
    omcal::write_report(report, ds, args.out_dir);
    std::cout << omcal::report_summary(report);
    return exit_ok;
  } catch (const omcal::Error& e) {
    // Partial report with the failure, then the usual exit-code contract.
    std::error_code ec;
    std::filesystem::create_directories(args.out_dir, ec);
    if (!ec) {
      nlohmann::ordered_json j;
      j["format"] = "omcal-report/1";
      j["tool_version"] = omcal::version_string;
      j["provenance"] = {{"manifest", args.manifest}, {"seed", args.seed}};
      j["failure"] = {{"message", e.what()}};
      std::ofstream out(std::filesystem::path(args.out_dir) / "report.json", std::ios::binary);
      if (out) out << j.dump(2) << "\n";
    }
    throw;
  }
}

int cmd_fit_reflection(const std::string& file, const std::string& out_json) {
  omcal::CsvTable t = omcal::read_csv_any(file);
  omcal::ReflectionTrace trace;
  if (t.header == std::vector<std::string>{"freq_hz", "mag_db"}) {
    trace.freq_hz = t.columns[0];
    trace.mag_db = t.columns[1];
  } else if (t.header == std::vector<std::string>{"freq_hz", "re", "im"}) {
    trace = omcal::ReflectionTrace::from_complex(t.columns[0], t.columns[1], t.columns[2]);
  } else {
    throw omcal::SchemaError(file + ": header must be freq_hz,mag_db or freq_hz,re,im");
  }

  omcal::ReflectionFit fit = omcal::fit_reflection(trace);
  const double k2pi = omcal::constants::two_pi;
  std::printf("f_c        = %.6f GHz (+- %.3g kHz)\n", fit.overcoupled.f_c.hz / 1e9,
              fit.f_c_sigma_hz / 1e3);
  std::printf("kappa_tot  = 2pi * %.4f kHz (+- %.3g kHz)\n",
              fit.overcoupled.kappa_tot().rad_per_s / k2pi / 1e3, fit.kappa_tot_sigma_hz / 1e3);
  std::printf("overcoupled branch:  kappa_ext = 2pi * %.4f kHz, kappa_in = 2pi * %.4f kHz\n",
              fit.overcoupled.kappa_ext.rad_per_s / k2pi / 1e3,
              fit.overcoupled.kappa_in.rad_per_s / k2pi / 1e3);
  std::printf("undercoupled branch: kappa_ext = 2pi * %.4f kHz, kappa_in = 2pi * %.4f kHz\n",
              fit.undercoupled.kappa_ext.rad_per_s / k2pi / 1e3,
              fit.undercoupled.kappa_in.rad_per_s / k2pi / 1e3);
  std::printf("residual   = %.6g dB rms over %zu points\n",
              fit.engine.residual_norm / std::sqrt(double(trace.freq_hz.size())),
              trace.freq_hz.size());
  std::printf("note: both branches are residual-degenerate; the calibration pipeline\n"
              "      lifts the ambiguity from the phonon normalization.\n");

  if (!out_json.empty()) {
    nlohmann::ordered_json j;
    j["f_c_hz"] = fit.overcoupled.f_c.hz;
    j["f_c_sigma_hz"] = fit.f_c_sigma_hz;
    j["kappa_tot_hz"] = fit.overcoupled.kappa_tot().rad_per_s / k2pi;
    j["kappa_tot_sigma_hz"] = fit.kappa_tot_sigma_hz;
    j["overcoupled"] = {{"kappa_ext_hz", fit.overcoupled.kappa_ext.rad_per_s / k2pi},
                        {"kappa_in_hz", fit.overcoupled.kappa_in.rad_per_s / k2pi}};
    j["undercoupled"] = {{"kappa_ext_hz", fit.undercoupled.kappa_ext.rad_per_s / k2pi},
                         {"kappa_in_hz", fit.undercoupled.kappa_in.rad_per_s / k2pi}};
    std::ofstream out(out_json, std::ios::binary);
    if (!out) throw omcal::IoError("cannot write " + out_json);
    out << j.dump(2) << "\n";
  }
  return exit_ok;
}

int cmd_fit_peak(const std::string& file, const std::string& out_json) {
  const std::vector<std::string> hdr = {"freq_hz", "psd"};
  omcal::CsvTable t = omcal::read_csv(file, hdr);
  omcal::SidebandSpectrum spec{t.columns[0], t.columns[1]};
  omcal::PeakFit fit = omcal::integrate_peak(spec);
  std::printf("center     = %.6f MHz (+- %.3g Hz)\n", fit.center_hz / 1e6, fit.center_sigma_hz);
  std::printf("gamma_eff  = 2pi * %.4f Hz (+- %.3g Hz)\n",
              fit.gamma_eff_rad_s / omcal::constants::two_pi,
              fit.gamma_eff_sigma_rad_s / omcal::constants::two_pi);
  std::printf("area       = %.6g (+- %.3g) photons/s (output-referred)\n", fit.area,
              fit.area_sigma);
  std::printf("baseline   = %.6g quanta, SNR = %.1f%s\n", fit.baseline, fit.snr,
              fit.low_confidence ? "  [LOW CONFIDENCE]" : "");
  if (!out_json.empty()) {
    nlohmann::ordered_json j;
    j["center_hz"] = fit.center_hz;
    j["center_sigma_hz"] = fit.center_sigma_hz;
    j["gamma_eff_hz"] = fit.gamma_eff_rad_s / omcal::constants::two_pi;
    j["gamma_eff_sigma_hz"] = fit.gamma_eff_sigma_rad_s / omcal::constants::two_pi;
    j["area"] = fit.area;
    j["area_sigma"] = fit.area_sigma;
    j["baseline"] = fit.baseline;
    j["snr"] = fit.snr;
    std::ofstream out(out_json, std::ios::binary);
    if (!out) throw omcal::IoError("cannot write " + out_json);
    out << j.dump(2) << "\n";
  }
  return exit_ok;
}

int cmd_selftest(bool corrupt_constants) {
  omcal::SelfTestConstants ref;
  if (corrupt_constants) ref.planck_h *= 1.01;  // negative control for the harness
  const omcal::SelfTestResult result = omcal::run_selftest(ref);
  for (const auto& check : result.checks)
    std::printf("[%s] %s%s%s\n", check.passed ? "PASS" : "FAIL", check.name.c_str(),
                check.detail.empty() ? "" : " -- ", check.detail.c_str());
  std::printf("%zu checks, %s\n", result.checks.size(),
              result.all_passed ? "all passed" : "FAILURES present");
  return result.all_passed ? exit_ok : exit_computational;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"omcal - optomechanics calibration toolkit (TLS-corrected phonon calibration)"};
  app.set_version_flag("--version", omcal::version_string);
  app.require_subcommand(1);

  GenerateArgs gen;
  CLI::App* generate = app.add_subcommand("generate", "generate a synthetic dataset");
  generate->add_option("--scenario", gen.scenario_file, "scenario JSON file");
  generate->add_flag("--replica", gen.replica, "use the built-in device replica scenario");
  generate->add_option("--out", gen.out_dir, "output directory")->required();
  std::uint64_t seed_opt = 0;
  CLI::Option* seed_flag = generate->add_option("--seed", seed_opt, "master RNG seed");
  double sweep_db = 0, area_rel = 0, drift_rel = 0, bin_rel = 0;
  CLI::Option* o_sweep = generate->add_option("--sweep-noise-db", sweep_db, "sweep noise sigma, dB");
  CLI::Option* o_area = generate->add_option("--area-noise", area_rel, "area noise sigma, relative");
  CLI::Option* o_drift = generate->add_option("--drift-noise", drift_rel, "run-to-run drift sigma");
  CLI::Option* o_bin = generate->add_option("--bin-noise", bin_rel, "per-bin PSD noise, relative");
  generate->add_flag("--asymmetry", gen.asymmetry, "enable sideband asymmetry in the forward model");

  CalibrateArgs cal;
  CLI::App* calibrate = app.add_subcommand("calibrate", "run the full calibration on a dataset");
  calibrate->add_option("manifest", cal.manifest, "dataset manifest.json")->required();
  calibrate->add_option("--out", cal.out_dir, "report output directory")->required();
  calibrate->add_option("--seed", cal.seed, "Monte-Carlo seed (fixed default for reproducibility)");
  calibrate->add_flag("--no-twpa-correction", cal.no_twpa_correction,
                      "skip the TWPA TLS transmission correction");
  calibrate->add_flag("--asymmetry", cal.asymmetry, "interpret blue areas as n+1");
  calibrate->add_option("--threads", cal.threads, "worker thread cap")->check(CLI::Range(1, 256));
  calibrate->add_option("--mc-samples", cal.mc_samples, "Monte-Carlo samples per run")
      ->check(CLI::Range(100, 1000000));

  CLI::App* fit = app.add_subcommand("fit", "fit a single trace file");
  fit->require_subcommand(1);
  std::string fit_file, fit_out;
  CLI::App* fit_refl = fit->add_subcommand("reflection", "fit a cavity reflection sweep");
  fit_refl->add_option("file", fit_file, "sweep CSV")->required();
  fit_refl->add_option("--out", fit_out, "write fit results as JSON");
  CLI::App* fit_peak = fit->add_subcommand("peak", "fit and integrate a sideband spectrum");
  fit_peak->add_option("file", fit_file, "spectrum CSV")->required();
  fit_peak->add_option("--out", fit_out, "write fit results as JSON");

  std::string report_file;
  CLI::App* report = app.add_subcommand("report", "print the summary of a saved report");
  report->add_option("report", report_file, "report.json path")->required();

  bool corrupt = false;
  CLI::App* selftest = app.add_subcommand("selftest", "run the embedded invariant suite");
  selftest->add_flag("--corrupt-constants", corrupt)->group("");  // hidden test hook

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? exit_config : exit_ok;
  }

  try {
    if (generate->parsed()) {
      if (seed_flag->count()) gen.seed = seed_opt;
      if (o_sweep->count()) gen.sweep_noise_db = sweep_db;
      if (o_area->count()) gen.area_noise = area_rel;
      if (o_drift->count()) gen.drift_noise = drift_rel;
      if (o_bin->count()) gen.bin_noise = bin_rel;
      if (!gen.replica && gen.scenario_file.empty())
        throw omcal::InvalidArgumentError("generate: need --scenario FILE or --replica");
      return cmd_generate(gen);
    }
    if (calibrate->parsed()) return cmd_calibrate(cal);
    if (fit->parsed()) {
      if (fit_refl->parsed()) return cmd_fit_reflection(fit_file, fit_out);
      return cmd_fit_peak(fit_file, fit_out);
    }
    if (report->parsed()) {
      std::cout << omcal::summarize_report_file(report_file);
      return exit_ok;
    }
    if (selftest->parsed()) return cmd_selftest(corrupt);
  } catch (const omcal::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return classify(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_computational;
  }
  return exit_config;
}
