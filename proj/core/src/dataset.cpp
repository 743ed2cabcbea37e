#include "omcal/dataset.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "omcal/csv.hpp"
#include "omcal/errors.hpp"
#include "omcal/rng.hpp"

namespace omcal {

using json = nlohmann::ordered_json;

namespace {

constexpr const char* manifest_format = "omcal-dataset/1";

const json& require(const json& j, const std::string& ctx, const char* key) {
  if (!j.contains(key)) throw SchemaError(ctx + ": missing field '" + key + "'");
  return j.at(key);
}

double require_number(const json& j, const std::string& ctx, const char* key) {
  const json& v = require(j, ctx, key);
  if (!v.is_number()) throw SchemaError(ctx + "." + key + ": expected a number");
  return v.get<double>();
}

std::string require_string(const json& j, const std::string& ctx, const char* key) {
  const json& v = require(j, ctx, key);
  if (!v.is_string()) throw SchemaError(ctx + "." + key + ": expected a string");
  return v.get<std::string>();
}

std::vector<double> require_array(const json& j, const std::string& ctx, const char* key) {
  const json& v = require(j, ctx, key);
  if (!v.is_array()) throw SchemaError(ctx + "." + key + ": expected an array");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) throw SchemaError(ctx + "." + key + ": expected numeric entries");
    out.push_back(e.get<double>());
  }
  return out;
}

PowerReference parse_reference(const std::string& s, const std::string& ctx) {
  if (s == "generator") return PowerReference::Generator;
  if (s == "chip") return PowerReference::Chip;
  if (s == "twpa_input") return PowerReference::TwpaInput;
  throw SchemaError(ctx + ": unknown power reference '" + s + "'");
}

const char* reference_name(PowerReference r) {
  switch (r) {
    case PowerReference::Generator: return "generator";
    case PowerReference::Chip: return "chip";
    case PowerReference::TwpaInput: return "twpa_input";
  }
  return "?";
}

RunKind parse_kind(const std::string& s, const std::string& ctx) {
  if (s == "reflection_sweep") return RunKind::ReflectionSweep;
  if (s == "sideband_spectrum") return RunKind::SidebandSpectrum;
  if (s == "twpa_scan") return RunKind::TwpaScan;
  throw SchemaError(ctx + ".kind: unknown run kind '" + s + "'");
}

RunScheme parse_scheme(const std::string& s, const std::string& ctx) {
  if (s == "blue") return RunScheme::Blue;
  if (s == "red") return RunScheme::Red;
  if (s == "probe_only") return RunScheme::ProbeOnly;
  throw SchemaError(ctx + ".scheme: unknown scheme '" + s + "'");
}

TwpaPump parse_pump(const std::string& s, const std::string& ctx) {
  if (s == "on") return TwpaPump::On;
  if (s == "off") return TwpaPump::Off;
  throw SchemaError(ctx + ".twpa_pump: expected 'on' or 'off'");
}

TempTable table_from_json(const json& j, const std::string& ctx) {
  TempTable t;
  t.t_kelvin = require_array(j, ctx, "t_k");
  t.value = require_array(j, ctx, "value");
  t.validate();
  return t;
}

json table_to_json(const TempTable& t) {
  return json{{"t_k", t.t_kelvin}, {"value", t.value}};
}

GroundTruth truth_from_json(const json& j) {
  const std::string ctx = "ground_truth";
  GroundTruth gt;
  gt.f_c = {require_number(j, ctx, "f_c_hz")};
  gt.kappa_ext = {require_number(j, ctx, "kappa_ext_hz") * constants::two_pi};
  gt.omega_m = {require_number(j, ctx, "omega_m_hz") * constants::two_pi};
  gt.g0 = {require_number(j, ctx, "g0_hz") * constants::two_pi};
  gt.gamma_m = table_from_json(require(j, ctx, "gamma_m_hz"), ctx + ".gamma_m_hz");
  for (double& v : gt.gamma_m.value) v *= constants::two_pi;

  const json& tc = require(j, ctx, "tls_cavity");
  gt.tls_cavity.kappa_tls0 = {require_number(tc, ctx + ".tls_cavity", "kappa_tls0_hz") * constants::two_pi};
  gt.tls_cavity.kappa_dielec0 = {require_number(tc, ctx + ".tls_cavity", "kappa_dielec0_hz") * constants::two_pi};
  gt.tls_cavity.alpha = {require_number(tc, ctx + ".tls_cavity", "alpha_hz") * constants::two_pi};
  gt.tls_cavity.t_c = {require_number(tc, ctx + ".tls_cavity", "t_c_k")};
  gt.tls_cavity.p_cav0 = table_from_json(require(tc, ctx + ".tls_cavity", "p_cav0_w"), ctx + ".tls_cavity.p_cav0_w");

  const json& tw = require(j, ctx, "tls_twpa");
  gt.tls_twpa.lambda0 = require_number(tw, ctx + ".tls_twpa", "lambda0");
  gt.tls_twpa.beta = require_number(tw, ctx + ".tls_twpa", "beta");
  gt.tls_twpa.p_twpa0 = table_from_json(require(tw, ctx + ".tls_twpa", "p_twpa0_w"), ctx + ".tls_twpa.p_twpa0_w");

  if (j.contains("runs")) {
    for (auto it = j.at("runs").begin(); it != j.at("runs").end(); ++it) {
      const json& r = it.value();
      if (r.contains("a_ph")) gt.run_a_ph[it.key()] = r.at("a_ph").get<double>();
      if (r.contains("gamma_eff_hz"))
        gt.run_gamma_eff_rad_s[it.key()] = r.at("gamma_eff_hz").get<double>() * constants::two_pi;
    }
  }
  return gt;
}

json truth_to_json(const GroundTruth& gt) {
  json j;
  j["f_c_hz"] = gt.f_c.hz;
  j["kappa_ext_hz"] = gt.kappa_ext.rad_per_s / constants::two_pi;
  j["omega_m_hz"] = gt.omega_m.rad_per_s / constants::two_pi;
  j["g0_hz"] = gt.g0.rad_per_s / constants::two_pi;
  TempTable gm = gt.gamma_m;
  for (double& v : gm.value) v /= constants::two_pi;
  j["gamma_m_hz"] = table_to_json(gm);
  j["tls_cavity"] = {{"kappa_tls0_hz", gt.tls_cavity.kappa_tls0.rad_per_s / constants::two_pi},
                     {"kappa_dielec0_hz", gt.tls_cavity.kappa_dielec0.rad_per_s / constants::two_pi},
                     {"alpha_hz", gt.tls_cavity.alpha.rad_per_s / constants::two_pi},
                     {"t_c_k", gt.tls_cavity.t_c.kelvin},
                     {"p_cav0_w", table_to_json(gt.tls_cavity.p_cav0)}};
  j["tls_twpa"] = {{"lambda0", gt.tls_twpa.lambda0},
                   {"beta", gt.tls_twpa.beta},
                   {"p_twpa0_w", table_to_json(gt.tls_twpa.p_twpa0)}};
  json runs = json::object();
  for (const auto& [id, a_ph] : gt.run_a_ph) {
    runs[id]["a_ph"] = a_ph;
    auto it = gt.run_gamma_eff_rad_s.find(id);
    if (it != gt.run_gamma_eff_rad_s.end())
      runs[id]["gamma_eff_hz"] = it->second / constants::two_pi;
  }
  j["runs"] = runs;
  return j;
}

json manifest_json(const Dataset& ds) {
  json j;
  j["format"] = manifest_format;
  j["chain"] = {{"injection_attenuation_db", ds.chain.injection_attenuation_db},
                {"detection_gain_db", ds.chain.detection_gain_db},
                {"chip_to_twpa_loss_db", ds.chain.chip_to_twpa_loss_db},
                {"chain_uncertainty_db", ds.chain.chain_uncertainty_db},
                {"cavity_power_reference", reference_name(ds.chain.cavity_power_reference)},
                {"twpa_power_reference", reference_name(ds.chain.twpa_power_reference)}};
  json runs = json::array();
  for (const RunRecord& r : ds.runs) {
    json e;
    e["id"] = r.id;
    e["kind"] = to_string(r.kind);
    e["t_cryo_k"] = r.t_cryo.kelvin;
    e["t_uncertainty_rel"] = r.t_uncertainty_rel;
    e["p_generator_dbm"] = watts_to_dbm(r.p_generator);
    e["scheme"] = to_string(r.scheme);
    e["twpa_pump"] = to_string(r.twpa_pump);
    e["repeat"] = r.repeat;
    e["file"] = r.file;
    if (r.truth_self_oscillating) e["self_oscillating"] = true;
    runs.push_back(std::move(e));
  }
  j["runs"] = std::move(runs);
  if (ds.ground_truth) j["ground_truth"] = truth_to_json(*ds.ground_truth);
  return j;
}

std::vector<std::string> csv_header_for(RunKind kind, bool complex_sweep = false) {
  switch (kind) {
    case RunKind::ReflectionSweep:
      return complex_sweep ? std::vector<std::string>{"freq_hz", "re", "im"}
                           : std::vector<std::string>{"freq_hz", "mag_db"};
    case RunKind::SidebandSpectrum:
      return {"freq_hz", "psd"};
    case RunKind::TwpaScan:
      return {"power_w", "transmission"};
  }
  return {};
}

std::string run_csv(const RunRecord& r) {
  switch (r.kind) {
    case RunKind::ReflectionSweep: {
      std::vector<std::vector<double>> cols{r.trace.freq_hz, r.trace.mag_db};
      return csv_to_string(csv_header_for(r.kind), cols);
    }
    case RunKind::SidebandSpectrum: {
      std::vector<std::vector<double>> cols{r.spectrum.freq_hz, r.spectrum.psd};
      return csv_to_string(csv_header_for(r.kind), cols);
    }
    case RunKind::TwpaScan: {
      std::vector<std::vector<double>> cols{r.scan.power_w, r.scan.transmission};
      return csv_to_string(csv_header_for(r.kind), cols);
    }
  }
  return {};
}

void load_payload(RunRecord& r, const std::filesystem::path& base) {
  const std::filesystem::path path = base / r.file;
  if (!std::filesystem::exists(path)) throw IoError("referenced file does not exist: " + path.string());
  switch (r.kind) {
    case RunKind::ReflectionSweep: {
      CsvTable t = read_csv_any(path);
      if (t.header == std::vector<std::string>{"freq_hz", "mag_db"}) {
        r.trace.freq_hz = t.columns[0];
        r.trace.mag_db = t.columns[1];
      } else if (t.header == std::vector<std::string>{"freq_hz", "re", "im"}) {
        r.trace = ReflectionTrace::from_complex(t.columns[0], t.columns[1], t.columns[2]);
      } else {
        throw SchemaError(path.string() + ":1: sweep header must be freq_hz,mag_db or freq_hz,re,im");
      }
      r.trace.validate();
      break;
    }
    case RunKind::SidebandSpectrum: {
      const std::vector<std::string> hdr = csv_header_for(r.kind);
      CsvTable t = read_csv(path, hdr);
      r.spectrum.freq_hz = t.columns[0];
      r.spectrum.psd = t.columns[1];
      if (r.spectrum.freq_hz.size() < 16)
        throw SchemaError(path.string() + ": spectrum too short (" +
                          std::to_string(r.spectrum.freq_hz.size()) + " rows)");
      break;
    }
    case RunKind::TwpaScan: {
      const std::vector<std::string> hdr = csv_header_for(r.kind);
      CsvTable t = read_csv(path, hdr);
      r.scan.power_w = t.columns[0];
      r.scan.transmission = t.columns[1];
      if (r.scan.power_w.size() < 5)
        throw SchemaError(path.string() + ": scan too short");
      break;
    }
  }
}

}  // namespace

const char* to_string(RunKind k) {
  switch (k) {
    case RunKind::ReflectionSweep: return "reflection_sweep";
    case RunKind::SidebandSpectrum: return "sideband_spectrum";
    case RunKind::TwpaScan: return "twpa_scan";
  }
  return "?";
}

const char* to_string(RunScheme s) {
  switch (s) {
    case RunScheme::Blue: return "blue";
    case RunScheme::Red: return "red";
    case RunScheme::ProbeOnly: return "probe_only";
  }
  return "?";
}

const char* to_string(TwpaPump p) { return p == TwpaPump::On ? "on" : "off"; }

double default_t_uncertainty(Temperature t) { return t.kelvin > 0.010 ? 0.05 : 0.20; }

std::uint64_t dataset_content_hash(const Dataset& ds) {
  std::uint64_t h = fnv1a64(manifest_json(ds).dump(2));
  for (const RunRecord& r : ds.runs) h = fnv1a64(run_csv(r), h);
  return h;
}

Dataset ingest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot open manifest: " + manifest.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(manifest.string() + ": JSON parse error: " + e.what());
  }

  if (require_string(j, "manifest", "format") != manifest_format)
    throw SchemaError("manifest.format: expected '" + std::string(manifest_format) + "'");

  Dataset ds;
  ds.manifest_path = manifest.string();
  const json& chain = require(j, "manifest", "chain");
  ds.chain.injection_attenuation_db = require_number(chain, "chain", "injection_attenuation_db");
  ds.chain.detection_gain_db = require_number(chain, "chain", "detection_gain_db");
  ds.chain.chip_to_twpa_loss_db = require_number(chain, "chain", "chip_to_twpa_loss_db");
  ds.chain.chain_uncertainty_db =
      chain.contains("chain_uncertainty_db") ? require_number(chain, "chain", "chain_uncertainty_db") : 1.0;
  // The reference planes are required: instruments quote powers at
  // different planes, so every dataset must pin them explicitly.
  ds.chain.cavity_power_reference =
      parse_reference(require_string(chain, "chain", "cavity_power_reference"), "chain.cavity_power_reference");
  ds.chain.twpa_power_reference =
      parse_reference(require_string(chain, "chain", "twpa_power_reference"), "chain.twpa_power_reference");

  const json& runs = require(j, "manifest", "runs");
  if (!runs.is_array()) throw SchemaError("manifest.runs: expected an array");

  const std::filesystem::path base = manifest.parent_path();
  std::set<std::string> ids;
  std::set<std::tuple<int, int, double, double, int, int>> keys;

  std::size_t index = 0;
  for (const json& e : runs) {
    const std::string ctx = "runs[" + std::to_string(index) + "]";
    RunRecord r;
    r.id = require_string(e, ctx, "id");
    if (!ids.insert(r.id).second) throw ConflictError(ctx + ": duplicate run id '" + r.id + "'");
    r.kind = parse_kind(require_string(e, ctx, "kind"), ctx);
    r.t_cryo = {require_number(e, ctx, "t_cryo_k")};
    if (!(r.t_cryo.kelvin > 0.0)) throw SchemaError(ctx + ".t_cryo_k: must be > 0");
    r.t_uncertainty_rel = e.contains("t_uncertainty_rel")
                              ? require_number(e, ctx, "t_uncertainty_rel")
                              : default_t_uncertainty(r.t_cryo);

    const bool has_dbm = e.contains("p_generator_dbm");
    const bool has_w = e.contains("p_generator_w");
    if (has_dbm == has_w)
      throw SchemaError(ctx + ": exactly one of p_generator_dbm / p_generator_w is required");
    r.p_generator = has_dbm ? dbm_to_watts(require_number(e, ctx, "p_generator_dbm"))
                            : Power{require_number(e, ctx, "p_generator_w")};
    if (!(r.p_generator.watts > 0.0))
      throw SchemaError(ctx + ".p_generator_w: must be > 0");

    r.scheme = parse_scheme(require_string(e, ctx, "scheme"), ctx);
    r.twpa_pump = parse_pump(require_string(e, ctx, "twpa_pump"), ctx);
    r.repeat = e.contains("repeat") ? static_cast<int>(require_number(e, ctx, "repeat")) : 0;
    r.file = require_string(e, ctx, "file");
    if (e.contains("self_oscillating")) r.truth_self_oscillating = e.at("self_oscillating").get<bool>();

    auto key = std::make_tuple(static_cast<int>(r.kind), static_cast<int>(r.scheme),
                               r.t_cryo.kelvin, r.p_generator.watts,
                               static_cast<int>(r.twpa_pump), r.repeat);
    if (!keys.insert(key).second)
      throw ConflictError(ctx + ": duplicate (kind, scheme, T, P, pump, repeat) key for run '" +
                          r.id + "'; use distinct repeat indices for repeated runs");

    load_payload(r, base);
    ds.runs.push_back(std::move(r));
    ++index;
  }

  if (j.contains("ground_truth")) ds.ground_truth = truth_from_json(j.at("ground_truth"));
  ds.content_hash = dataset_content_hash(ds);
  return ds;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "traces", ec);
  if (ec) throw IoError("cannot create output directory: " + (out_dir / "traces").string());

  Dataset ds = dataset;  // assign file names where missing
  for (RunRecord& r : ds.runs) {
    if (r.file.empty()) r.file = "traces/" + r.id + ".csv";
    std::ofstream out(out_dir / r.file, std::ios::binary);
    if (!out) throw IoError("cannot write file: " + (out_dir / r.file).string());
    out << run_csv(r);
  }

  std::ofstream mf(out_dir / "manifest.json", std::ios::binary);
  if (!mf) throw IoError("cannot write manifest: " + (out_dir / "manifest.json").string());
  mf << manifest_json(ds).dump(2) << "\n";
}

}  // namespace omcal
