#pragma once

#include <cmath>

#include "omcal/constants.hpp"

namespace omcal {

// Unit-carrying scalar types for the five quantities the toolkit handles.
// Canonical storage: Hz, rad/s, watts, kelvin, power dB. Keeping distinct
// types means dBm/W, Hz/(rad/s) and dB arithmetic cannot be mixed silently.

struct Frequency {
  double hz = 0.0;
};

struct AngularRate {
  double rad_per_s = 0.0;
};

struct Power {
  double watts = 0.0;
};

struct Temperature {
  double kelvin = 0.0;
};

// Gain in power dB (10*log10). Amplitude dB never appears as a stored
// quantity; reflection magnitudes in dB are produced by the cavity model.
struct GainDb {
  double db = 0.0;
};

inline AngularRate to_angular(Frequency f) { return {f.hz * constants::two_pi}; }
inline Frequency to_frequency(AngularRate w) { return {w.rad_per_s / constants::two_pi}; }

inline double db_to_linear(double db);   // 10^(db/10)
inline double linear_to_db(double factor);

// dBm <-> watts. Throws InvalidArgumentError on non-finite input.
Power dbm_to_watts(double dbm);
double watts_to_dbm(Power p);

// Reference plane for the power axis of a saturable-loss model. Lab
// conventions mix generator and on-chip powers between instruments, so
// every model fit must name the plane it works in.
enum class PowerReference { Generator, Chip, TwpaInput };

// Calibrated injection/detection chain of the cryostat wiring.
struct ChainCal {
  double injection_attenuation_db = 0.0;  // generator -> chip, positive = loss
  double detection_gain_db = 0.0;         // TWPA input -> recorded output
  double chip_to_twpa_loss_db = 0.0;      // chip -> TWPA input, positive = loss
  double chain_uncertainty_db = 1.0;      // calibration uncertainty per leg
  PowerReference cavity_power_reference = PowerReference::Chip;
  PowerReference twpa_power_reference = PowerReference::TwpaInput;
};

// Generator power -> on-chip power through the injection attenuators.
Power apply_chain(Power p_generator, const ChainCal& chain);

// Recorded output power -> power at the TWPA input (inverse detection leg).
Power deembed_detection(Power p_recorded, const ChainCal& chain);

// On-chip power -> power at the TWPA input.
Power chip_to_twpa(Power p_chip, const ChainCal& chain);

// Convert a generator power to the plane a model expects.
Power power_at_reference(Power p_generator, PowerReference ref, const ChainCal& chain);

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

inline double linear_to_db(double factor) { return 10.0 * std::log10(factor); }

}  // namespace omcal
