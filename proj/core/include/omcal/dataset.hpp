#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "omcal/cavity.hpp"
#include "omcal/tls.hpp"
#include "omcal/units.hpp"

namespace omcal {

enum class RunKind { ReflectionSweep, SidebandSpectrum, TwpaScan };
enum class RunScheme { Blue, Red, ProbeOnly };
enum class TwpaPump { On, Off };

struct SidebandSpectrum {
  std::vector<double> freq_hz;
  std::vector<double> psd;  // quanta (photons/s/Hz), output-referred
};

struct TwpaScan {
  std::vector<double> power_w;      // at the chain's TWPA power reference plane
  std::vector<double> transmission; // normalized, -> 1 at TLS saturation
};

// One measurement: metadata plus the loaded payload for its kind.
struct RunRecord {
  std::string id;
  RunKind kind = RunKind::ReflectionSweep;
  Temperature t_cryo;
  double t_uncertainty_rel = 0.0;  // defaulted from T when the manifest omits it
  Power p_generator;               // canonical watts; manifest may give dBm or W
  RunScheme scheme = RunScheme::ProbeOnly;
  TwpaPump twpa_pump = TwpaPump::On;
  int repeat = 0;
  std::string file;  // manifest-relative path; empty for in-memory datasets

  ReflectionTrace trace;      // kind == ReflectionSweep
  SidebandSpectrum spectrum;  // kind == SidebandSpectrum
  TwpaScan scan;              // kind == TwpaScan

  // Synthetic-only annotation, never consulted by the calibration itself.
  bool truth_self_oscillating = false;
};

// Generator-side truth embedded in synthetic manifests.
struct GroundTruth {
  Frequency f_c;
  AngularRate kappa_ext;
  AngularRate omega_m;
  AngularRate g0;
  TempTable gamma_m;  // rad/s
  TlsLossParams tls_cavity;
  TwpaTlsParams tls_twpa;
  std::map<std::string, double> run_a_ph;             // per sideband run
  std::map<std::string, double> run_gamma_eff_rad_s;  // generated linewidth
};

struct Dataset {
  ChainCal chain;
  std::vector<RunRecord> runs;
  std::optional<GroundTruth> ground_truth;  // present iff synthetic
  std::string manifest_path;
  std::uint64_t content_hash = 0;  // manifest + referenced files, manifest order

  bool is_synthetic() const { return ground_truth.has_value(); }
};

// Default thermometry uncertainty: +-5% above 10 mK, +-20% at and below the
// demagnetization regime.
double default_t_uncertainty(Temperature t);

// Stable content hash of manifest plus payloads; identical for a dataset
// held in memory and the same dataset written to disk and re-ingested.
std::uint64_t dataset_content_hash(const Dataset& dataset);

// Loads and validates a manifest and every referenced trace file. Throws
// SchemaError with per-field diagnostics, IoError with the offending path,
// or ConflictError on duplicate (kind, scheme, T, P, pump, repeat) keys.
Dataset ingest(const std::filesystem::path& manifest);

// Writes manifest.json plus one CSV per run under out_dir. Used by the
// generator; the written tree ingests back to an identical dataset.
void write_dataset(const Dataset& dataset, const std::filesystem::path& out_dir);

const char* to_string(RunKind k);
const char* to_string(RunScheme s);
const char* to_string(TwpaPump p);

}  // namespace omcal
