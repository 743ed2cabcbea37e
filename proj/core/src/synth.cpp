#include "omcal/synth.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "omcal/constants.hpp"
#include "omcal/errors.hpp"
#include "omcal/rng.hpp"

namespace omcal {

using json = nlohmann::ordered_json;

namespace {

std::string grid_key(const char* kind, double t_k, double p_w, const char* extra = "",
                     int repeat = 0) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%s|t=%.9g|p=%.9g|%s|r=%d", kind, t_k, p_w, extra, repeat);
  return buf;
}

std::string run_id(const char* kind, double t_k, double p_w, const char* extra = "",
                   int repeat = 0) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%s-t%.6gmk-p%.6g%s%s-r%d", kind, t_k * 1e3, p_w,
                *extra ? "-" : "", extra, repeat);
  return buf;
}

}  // namespace

void ScenarioConfig::validate() const {
  if (seed == 0) throw InvalidArgumentError("ScenarioConfig: a nonzero seed is mandatory");
  if (temperatures_k.empty()) throw InvalidArgumentError("ScenarioConfig: empty temperature grid");
  if (!(f_c.hz > 0.0) || !(kappa_ext.rad_per_s > 0.0) || !(omega_m.rad_per_s > 0.0) ||
      !(g0.rad_per_s > 0.0))
    throw InvalidArgumentError("ScenarioConfig: device constants must be > 0");
  gamma_m.validate();
  tls_cavity.validate();
  tls_twpa.validate();
  if (noise.sweep_db_sigma < 0.0 || noise.area_rel_sigma < 0.0 || noise.drift_rel_sigma < 0.0 ||
      noise.psd_bin_rel_sigma < 0.0)
    throw InvalidArgumentError("ScenarioConfig: noise sigmas must be >= 0");
}

ScenarioConfig paper_replica_scenario() {
  ScenarioConfig c;
  c.seed = 20260808;
  c.f_c = {5.154e9};
  c.kappa_ext = {constants::two_pi * 180e3};
  c.omega_m = {constants::two_pi * 15.13e6};
  c.g0 = {constants::two_pi * 220.0};

  const std::vector<double> temps = {0.004, 0.010, 0.020, 0.050, 0.100, 0.150, 0.300, 0.400};
  c.temperatures_k = temps;

  c.gamma_m.t_kelvin = temps;
  for (double t : temps)
    c.gamma_m.value.push_back(constants::two_pi * (420.0 + 145.0 * t));  // mild T dependence

  c.tls_cavity.kappa_tls0 = {constants::two_pi * 400e3};
  c.tls_cavity.kappa_dielec0 = {constants::two_pi * 90e3};
  c.tls_cavity.alpha = {constants::two_pi * 1.7e10};
  c.tls_cavity.t_c = {1.2};
  c.tls_cavity.p_cav0.t_kelvin = temps;
  c.tls_cavity.p_cav0.value = {1.5e-13, 1.7e-13, 2.0e-13, 3.0e-13, 4.5e-13, 6.0e-13, 1.2e-12, 2.0e-12};

  c.tls_twpa.lambda0 = 0.40;
  c.tls_twpa.beta = 1.0;
  c.tls_twpa.p_twpa0.t_kelvin = temps;
  c.tls_twpa.p_twpa0.value = {2.8e-13, 2.9e-13, 3.0e-13, 3.5e-13, 4.0e-13, 5.0e-13, 8.0e-13, 1.2e-12};

  c.chain.injection_attenuation_db = 60.0;
  c.chain.detection_gain_db = 70.0;
  c.chain.chip_to_twpa_loss_db = 3.0;
  c.chain.chain_uncertainty_db = 1.0;
  c.chain.cavity_power_reference = PowerReference::Chip;
  c.chain.twpa_power_reference = PowerReference::TwpaInput;

  for (int i = 0; i < 12; ++i)
    c.sweep_powers_w_chip.push_back(1e-14 * std::pow(10.0, 4.0 * i / 11.0));  // 1e-14 .. 1e-10 W

  for (int i = 0; i < 25; ++i)
    c.twpa_scan_powers_w.push_back(1e-17 * std::pow(10.0, 6.0 * i / 24.0));  // 1e-17 .. 1e-11 W

  return c;
}

OptomechParams scenario_optomech(const ScenarioConfig& config, Temperature t, Power p_chip) {
  OptomechParams p;
  p.omega_m = config.omega_m;
  p.gamma_m = config.gamma_m;
  p.g0 = config.g0;
  p.cavity.f_c = config.f_c;
  p.cavity.kappa_ext = config.kappa_ext;
  p.cavity.kappa_in = kappa_in_model(config.tls_cavity, config.f_c, t, p_chip, true);
  return p;
}

ReflectionTrace gen_reflection_sweep(const ScenarioConfig& config, Temperature t, Power p_chip) {
  Rng rng = Rng::stream(config.seed, grid_key("sweep", t.kelvin, p_chip.watts));
  const OptomechParams om = scenario_optomech(config, t, p_chip);

  const double kappa_tot_hz = om.cavity.kappa_tot().rad_per_s / constants::two_pi;
  const double span = config.sweep_span_linewidths * kappa_tot_hz;
  const int n = config.sweep_points;

  ReflectionTrace trace;
  trace.freq_hz.resize(n);
  trace.mag_db.resize(n);
  for (int i = 0; i < n; ++i) {
    const double f = config.f_c.hz - 0.5 * span + span * i / (n - 1);
    trace.freq_hz[i] = f;
    trace.mag_db[i] =
        s11_db(om.cavity, Frequency{f}) + config.noise.sweep_db_sigma * rng.gaussian();
  }
  return trace;
}

SidebandGenResult gen_sideband_peak(const ScenarioConfig& config, Temperature t, Power p_pump_chip,
                                    PumpScheme scheme, int repeat) {
  const char* scheme_tag = scheme == PumpScheme::Blue ? "blue" : "red";
  Rng rng = Rng::stream(config.seed, grid_key("sdb", t.kelvin, p_pump_chip.watts, scheme_tag, repeat));
  const OptomechParams om = scenario_optomech(config, t, p_pump_chip);

  SidebandGenResult out;
  const double n_ph = bose_einstein(config.omega_m, t);
  double a_ph = n_ph;
  if (config.asymmetry && scheme == PumpScheme::Blue) a_ph = n_ph + 1.0;

  const GammaEff ge = gamma_eff(scheme, om, config.tls_cavity, t, p_pump_chip, true);
  double gamma_gen;  // rad/s
  double gain_opt;
  if (ge.self_oscillating) {
    // Free-running mode: a huge, very narrow line replaces the thermal peak.
    out.self_oscillating = true;
    gamma_gen = 1e-3 * ge.gamma_m.rad_per_s;
    gain_opt = 1e4;
  } else {
    gamma_gen = ge.value->rad_per_s;
    gain_opt = ge.gamma_m.rad_per_s / gamma_gen;
  }
  out.true_gamma_eff_rad_s = gamma_gen;
  out.true_a_ph = a_ph;

  const double m_factor = conversion_m(om, config.tls_cavity, t, p_pump_chip, true);
  const double a_chip = a_ph * m_factor * p_pump_chip.watts * gain_opt;  // photons/s on chip

  // Slow 1/f gain drift plus averaging noise, both multiplicative on the area.
  const double factor = rng.lognormal_unit_mean(config.noise.area_rel_sigma) *
                        rng.lognormal_unit_mean(config.noise.drift_rel_sigma);

  const double a_twpa_in = a_chip * db_to_linear(-config.chain.chip_to_twpa_loss_db) * factor;
  const double p_signal = constants::hbar * to_angular(config.f_c).rad_per_s * a_twpa_in;
  const double delta =
      twpa_transmission(config.tls_twpa, config.f_c, t, Power{p_signal}, true);
  const double gain_lin = db_to_linear(config.chain.detection_gain_db);
  const double a_out = a_twpa_in * delta * gain_lin;
  const double floor_out = config.system_noise_quanta * gain_lin;

  const double gamma_hz = gamma_gen / constants::two_pi;  // FWHM in Hz
  const double f0 = config.omega_m.rad_per_s / constants::two_pi;
  const double span = config.psd_span_linewidths * gamma_hz;
  const double height = 2.0 * a_out / (constants::two_pi / 2.0 * gamma_hz);  // 2A/(pi*fwhm)

  const int n = config.psd_points;
  out.spectrum.freq_hz.resize(n);
  out.spectrum.psd.resize(n);
  for (int i = 0; i < n; ++i) {
    const double f = f0 - 0.5 * span + span * i / (n - 1);
    const double u = 2.0 * (f - f0) / gamma_hz;
    const double clean = floor_out + height / (1.0 + u * u);
    out.spectrum.freq_hz[i] = f;
    out.spectrum.psd[i] = clean * (1.0 + config.noise.psd_bin_rel_sigma * rng.gaussian());
  }
  return out;
}

double twpa_saturation_rolloff(const ScenarioConfig& config, double power_w) {
  // Phenomenological soft knee followed by a hard drop; measured saturation
  // curves show the shape without an amplifier model behind it.
  const double soft = std::pow(1.0 + power_w / config.sat_knee_w, 0.2);
  const double hard = 1.0 + std::pow(power_w / config.sat_drop_w, 3.0);
  return 1.0 / (soft * hard);
}

TwpaScan gen_twpa_scan(const ScenarioConfig& config, Temperature t, TwpaPump pump) {
  Rng rng = Rng::stream(config.seed, grid_key("scan", t.kelvin, 0.0, to_string(pump)));
  TwpaScan scan;
  for (double p : config.twpa_scan_powers_w) {
    double trans = twpa_transmission(config.tls_twpa, config.f_c, t, Power{p}, true);
    if (pump == TwpaPump::On) trans *= twpa_saturation_rolloff(config, p);
    trans *= rng.lognormal_unit_mean(config.noise.area_rel_sigma);
    scan.power_w.push_back(p);
    scan.transmission.push_back(trans);
  }
  return scan;
}

namespace {

Power generator_power_for_chip(const ScenarioConfig& config, double p_chip_w) {
  return {p_chip_w * db_to_linear(config.chain.injection_attenuation_db)};
}

Power generator_power_for_twpa_plane(const ScenarioConfig& config, double p_w) {
  // Scan powers are stored at the TWPA model's reference plane.
  switch (config.chain.twpa_power_reference) {
    case PowerReference::Generator:
      return {p_w};
    case PowerReference::Chip:
      return generator_power_for_chip(config, p_w);
    case PowerReference::TwpaInput:
      return {p_w * db_to_linear(config.chain.chip_to_twpa_loss_db +
                                 config.chain.injection_attenuation_db)};
  }
  return {p_w};
}

}  // namespace

Dataset generate_dataset(const ScenarioConfig& config) {
  config.validate();

  Dataset ds;
  ds.chain = config.chain;

  GroundTruth gt;
  gt.f_c = config.f_c;
  gt.kappa_ext = config.kappa_ext;
  gt.omega_m = config.omega_m;
  gt.g0 = config.g0;
  gt.gamma_m = config.gamma_m;
  gt.tls_cavity = config.tls_cavity;
  gt.tls_twpa = config.tls_twpa;

  for (double t_k : config.temperatures_k) {
    const Temperature t{t_k};

    for (double p_chip : config.sweep_powers_w_chip) {
      RunRecord r;
      r.id = run_id("sweep", t_k, p_chip);
      r.kind = RunKind::ReflectionSweep;
      r.t_cryo = t;
      r.t_uncertainty_rel = default_t_uncertainty(t);
      r.p_generator = generator_power_for_chip(config, p_chip);
      r.scheme = RunScheme::ProbeOnly;
      r.twpa_pump = TwpaPump::On;
      r.file = "traces/" + r.id + ".csv";
      r.trace = gen_reflection_sweep(config, t, Power{p_chip});
      ds.runs.push_back(std::move(r));
    }

    {
      RunRecord r;
      r.id = run_id("scan", t_k, 0.0, "off");
      r.kind = RunKind::TwpaScan;
      r.t_cryo = t;
      r.t_uncertainty_rel = default_t_uncertainty(t);
      r.p_generator = generator_power_for_twpa_plane(config, config.twpa_scan_powers_w.back());
      r.scheme = RunScheme::ProbeOnly;
      r.twpa_pump = TwpaPump::Off;
      r.file = "traces/" + r.id + ".csv";
      r.scan = gen_twpa_scan(config, t, TwpaPump::Off);
      ds.runs.push_back(std::move(r));
    }
    if (config.include_twpa_on_scans) {
      RunRecord r;
      r.id = run_id("scan", t_k, 0.0, "on");
      r.kind = RunKind::TwpaScan;
      r.t_cryo = t;
      r.t_uncertainty_rel = default_t_uncertainty(t);
      r.p_generator = generator_power_for_twpa_plane(config, config.twpa_scan_powers_w.back());
      r.scheme = RunScheme::ProbeOnly;
      r.twpa_pump = TwpaPump::On;
      r.file = "traces/" + r.id + ".csv";
      r.scan = gen_twpa_scan(config, t, TwpaPump::On);
      ds.runs.push_back(std::move(r));
    }

    auto push_sideband = [&](double p_chip, PumpScheme scheme, int repeat) {
      const char* tag = scheme == PumpScheme::Blue ? "blue" : "red";
      RunRecord r;
      r.id = run_id("sdb", t_k, p_chip, tag, repeat);
      r.kind = RunKind::SidebandSpectrum;
      r.t_cryo = t;
      r.t_uncertainty_rel = default_t_uncertainty(t);
      r.p_generator = generator_power_for_chip(config, p_chip);
      r.scheme = scheme == PumpScheme::Blue ? RunScheme::Blue : RunScheme::Red;
      r.twpa_pump = TwpaPump::On;
      r.repeat = repeat;
      r.file = "traces/" + r.id + ".csv";
      SidebandGenResult gen = gen_sideband_peak(config, t, Power{p_chip}, scheme, repeat);
      r.spectrum = std::move(gen.spectrum);
      r.truth_self_oscillating = gen.self_oscillating;
      gt.run_a_ph[r.id] = gen.true_a_ph;
      gt.run_gamma_eff_rad_s[r.id] = gen.true_gamma_eff_rad_s;
      ds.runs.push_back(std::move(r));
    };

    for (double p_chip : config.sideband.powers_w_chip) {
      if (config.sideband.blue) push_sideband(p_chip, PumpScheme::Blue, 0);
      if (config.sideband.red) push_sideband(p_chip, PumpScheme::Red, 0);
    }
    for (int rep = 1; rep <= config.sideband.n_repeats; ++rep)
      push_sideband(config.sideband.repeat_power_w_chip,
                    config.sideband.blue ? PumpScheme::Blue : PumpScheme::Red, rep);
  }

  if (config.include_selfosc_runs) {
    // A couple of above-threshold blue runs at the coldest temperature, to
    // exercise the pipeline's exclusion path.
    const Temperature t{config.temperatures_k.front()};
    const OptomechParams om = scenario_optomech(config, t, Power{1e-12});
    auto threshold = self_oscillation_threshold(om, config.tls_cavity, t, Power{1e-9}, true);
    if (threshold) {
      for (double mult : {1.2, 1.5}) {
        const double p_chip = mult * threshold->watts;
        const char* tag = "blue";
        RunRecord r;
        r.id = run_id("sdb", t.kelvin, p_chip, tag, 0);
        r.kind = RunKind::SidebandSpectrum;
        r.t_cryo = t;
        r.t_uncertainty_rel = default_t_uncertainty(t);
        r.p_generator = generator_power_for_chip(config, p_chip);
        r.scheme = RunScheme::Blue;
        r.twpa_pump = TwpaPump::On;
        r.file = "traces/" + r.id + ".csv";
        SidebandGenResult gen = gen_sideband_peak(config, t, Power{p_chip}, PumpScheme::Blue, 0);
        r.spectrum = std::move(gen.spectrum);
        r.truth_self_oscillating = gen.self_oscillating;
        gt.run_a_ph[r.id] = gen.true_a_ph;
        gt.run_gamma_eff_rad_s[r.id] = gen.true_gamma_eff_rad_s;
        ds.runs.push_back(std::move(r));
      }
    }
  }

  ds.ground_truth = std::move(gt);
  ds.content_hash = dataset_content_hash(ds);
  return ds;
}

// --- scenario JSON -------------------------------------------------------

namespace {

TempTable table_from_scenario_json(const json& j, const std::string& ctx) {
  if (!j.contains("t_k") || !j.contains("value"))
    throw SchemaError(ctx + ": expected arrays t_k and value");
  TempTable t;
  t.t_kelvin = j.at("t_k").get<std::vector<double>>();
  t.value = j.at("value").get<std::vector<double>>();
  t.validate();
  return t;
}

json table_to_scenario_json(const TempTable& t) {
  return json{{"t_k", t.t_kelvin}, {"value", t.value}};
}

}  // namespace

ScenarioConfig load_scenario(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open scenario: " + file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(file.string() + ": JSON parse error: " + e.what());
  }
  if (!j.contains("format") || j.at("format") != "omcal-scenario/1")
    throw SchemaError(file.string() + ": format must be 'omcal-scenario/1'");

  ScenarioConfig c = paper_replica_scenario();  // defaults, overridden below
  auto num = [&](const char* key, double fallback) {
    return j.contains(key) ? j.at(key).get<double>() : fallback;
  };
  c.seed = j.contains("seed") ? j.at("seed").get<std::uint64_t>() : 0;

  if (j.contains("device")) {
    const json& d = j.at("device");
    c.f_c = {d.value("f_c_hz", c.f_c.hz)};
    c.kappa_ext = {d.value("kappa_ext_hz", c.kappa_ext.rad_per_s / constants::two_pi) * constants::two_pi};
    c.omega_m = {d.value("omega_m_hz", c.omega_m.rad_per_s / constants::two_pi) * constants::two_pi};
    c.g0 = {d.value("g0_hz", c.g0.rad_per_s / constants::two_pi) * constants::two_pi};
    if (d.contains("gamma_m_hz")) {
      c.gamma_m = table_from_scenario_json(d.at("gamma_m_hz"), "device.gamma_m_hz");
      for (double& v : c.gamma_m.value) v *= constants::two_pi;
    }
  }
  if (j.contains("tls_cavity")) {
    const json& d = j.at("tls_cavity");
    c.tls_cavity.kappa_tls0 = {d.value("kappa_tls0_hz", c.tls_cavity.kappa_tls0.rad_per_s / constants::two_pi) * constants::two_pi};
    c.tls_cavity.kappa_dielec0 = {d.value("kappa_dielec0_hz", c.tls_cavity.kappa_dielec0.rad_per_s / constants::two_pi) * constants::two_pi};
    c.tls_cavity.alpha = {d.value("alpha_hz", c.tls_cavity.alpha.rad_per_s / constants::two_pi) * constants::two_pi};
    c.tls_cavity.t_c = {d.value("t_c_k", c.tls_cavity.t_c.kelvin)};
    if (d.contains("p_cav0_w"))
      c.tls_cavity.p_cav0 = table_from_scenario_json(d.at("p_cav0_w"), "tls_cavity.p_cav0_w");
  }
  if (j.contains("tls_twpa")) {
    const json& d = j.at("tls_twpa");
    c.tls_twpa.lambda0 = d.value("lambda0", c.tls_twpa.lambda0);
    c.tls_twpa.beta = d.value("beta", c.tls_twpa.beta);
    if (d.contains("p_twpa0_w"))
      c.tls_twpa.p_twpa0 = table_from_scenario_json(d.at("p_twpa0_w"), "tls_twpa.p_twpa0_w");
  }
  if (j.contains("chain")) {
    const json& d = j.at("chain");
    c.chain.injection_attenuation_db = d.value("injection_attenuation_db", c.chain.injection_attenuation_db);
    c.chain.detection_gain_db = d.value("detection_gain_db", c.chain.detection_gain_db);
    c.chain.chip_to_twpa_loss_db = d.value("chip_to_twpa_loss_db", c.chain.chip_to_twpa_loss_db);
    c.chain.chain_uncertainty_db = d.value("chain_uncertainty_db", c.chain.chain_uncertainty_db);
  }
  if (j.contains("grid")) {
    const json& d = j.at("grid");
    if (d.contains("temperatures_k")) c.temperatures_k = d.at("temperatures_k").get<std::vector<double>>();
    if (d.contains("sweep_powers_w_chip"))
      c.sweep_powers_w_chip = d.at("sweep_powers_w_chip").get<std::vector<double>>();
    if (d.contains("sideband_powers_w_chip"))
      c.sideband.powers_w_chip = d.at("sideband_powers_w_chip").get<std::vector<double>>();
    if (d.contains("twpa_scan_powers_w"))
      c.twpa_scan_powers_w = d.at("twpa_scan_powers_w").get<std::vector<double>>();
    c.sideband.n_repeats = static_cast<int>(d.value("n_repeats", double(c.sideband.n_repeats)));
    c.sideband.repeat_power_w_chip = d.value("repeat_power_w_chip", c.sideband.repeat_power_w_chip);
  }
  if (j.contains("noise")) {
    const json& d = j.at("noise");
    c.noise.sweep_db_sigma = d.value("sweep_db_sigma", c.noise.sweep_db_sigma);
    c.noise.area_rel_sigma = d.value("area_rel_sigma", c.noise.area_rel_sigma);
    c.noise.drift_rel_sigma = d.value("drift_rel_sigma", c.noise.drift_rel_sigma);
    c.noise.psd_bin_rel_sigma = d.value("psd_bin_rel_sigma", c.noise.psd_bin_rel_sigma);
  }
  c.system_noise_quanta = num("system_noise_quanta", c.system_noise_quanta);
  c.twpa_gain_db = num("twpa_gain_db", c.twpa_gain_db);
  c.sat_knee_w = num("sat_knee_w", c.sat_knee_w);
  c.sat_drop_w = num("sat_drop_w", c.sat_drop_w);
  c.asymmetry = j.value("asymmetry", c.asymmetry);
  c.include_selfosc_runs = j.value("include_selfosc_runs", c.include_selfosc_runs);
  c.include_twpa_on_scans = j.value("include_twpa_on_scans", c.include_twpa_on_scans);
  return c;
}

void save_scenario(const ScenarioConfig& c, const std::filesystem::path& file) {
  json j;
  j["format"] = "omcal-scenario/1";
  j["seed"] = c.seed;
  TempTable gm = c.gamma_m;
  for (double& v : gm.value) v /= constants::two_pi;
  j["device"] = {{"f_c_hz", c.f_c.hz},
                 {"kappa_ext_hz", c.kappa_ext.rad_per_s / constants::two_pi},
                 {"omega_m_hz", c.omega_m.rad_per_s / constants::two_pi},
                 {"g0_hz", c.g0.rad_per_s / constants::two_pi},
                 {"gamma_m_hz", table_to_scenario_json(gm)}};
  j["tls_cavity"] = {{"kappa_tls0_hz", c.tls_cavity.kappa_tls0.rad_per_s / constants::two_pi},
                     {"kappa_dielec0_hz", c.tls_cavity.kappa_dielec0.rad_per_s / constants::two_pi},
                     {"alpha_hz", c.tls_cavity.alpha.rad_per_s / constants::two_pi},
                     {"t_c_k", c.tls_cavity.t_c.kelvin},
                     {"p_cav0_w", table_to_scenario_json(c.tls_cavity.p_cav0)}};
  j["tls_twpa"] = {{"lambda0", c.tls_twpa.lambda0},
                   {"beta", c.tls_twpa.beta},
                   {"p_twpa0_w", table_to_scenario_json(c.tls_twpa.p_twpa0)}};
  j["chain"] = {{"injection_attenuation_db", c.chain.injection_attenuation_db},
                {"detection_gain_db", c.chain.detection_gain_db},
                {"chip_to_twpa_loss_db", c.chain.chip_to_twpa_loss_db},
                {"chain_uncertainty_db", c.chain.chain_uncertainty_db}};
  j["grid"] = {{"temperatures_k", c.temperatures_k},
               {"sweep_powers_w_chip", c.sweep_powers_w_chip},
               {"sideband_powers_w_chip", c.sideband.powers_w_chip},
               {"twpa_scan_powers_w", c.twpa_scan_powers_w},
               {"n_repeats", c.sideband.n_repeats},
               {"repeat_power_w_chip", c.sideband.repeat_power_w_chip}};
  j["noise"] = {{"sweep_db_sigma", c.noise.sweep_db_sigma},
                {"area_rel_sigma", c.noise.area_rel_sigma},
                {"drift_rel_sigma", c.noise.drift_rel_sigma},
                {"psd_bin_rel_sigma", c.noise.psd_bin_rel_sigma}};
  j["system_noise_quanta"] = c.system_noise_quanta;
  j["twpa_gain_db"] = c.twpa_gain_db;
  j["sat_knee_w"] = c.sat_knee_w;
  j["sat_drop_w"] = c.sat_drop_w;
  j["asymmetry"] = c.asymmetry;
  j["include_selfosc_runs"] = c.include_selfosc_runs;
  j["include_twpa_on_scans"] = c.include_twpa_on_scans;

  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write scenario: " + file.string());
  out << j.dump(2) << "\n";
}

}  // namespace omcal
