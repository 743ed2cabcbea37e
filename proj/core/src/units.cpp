#include "omcal/units.hpp"

#include <cmath>

#include "omcal/errors.hpp"

namespace omcal {

Power dbm_to_watts(double dbm) {
  if (!std::isfinite(dbm)) throw InvalidArgumentError("dbm_to_watts: non-finite input");
  return {1e-3 * db_to_linear(dbm)};
}

double watts_to_dbm(Power p) {
  if (!std::isfinite(p.watts) || p.watts <= 0.0)
    throw InvalidArgumentError("watts_to_dbm: input must be finite and > 0");
  return linear_to_db(p.watts / 1e-3);
}

Power apply_chain(Power p_generator, const ChainCal& chain) {
  if (!std::isfinite(p_generator.watts) || !std::isfinite(chain.injection_attenuation_db))
    throw InvalidArgumentError("apply_chain: non-finite input");
  return {p_generator.watts * db_to_linear(-chain.injection_attenuation_db)};
}

Power deembed_detection(Power p_recorded, const ChainCal& chain) {
  if (!std::isfinite(p_recorded.watts) || !std::isfinite(chain.detection_gain_db))
    throw InvalidArgumentError("deembed_detection: non-finite input");
  return {p_recorded.watts * db_to_linear(-chain.detection_gain_db)};
}

Power chip_to_twpa(Power p_chip, const ChainCal& chain) {
  return {p_chip.watts * db_to_linear(-chain.chip_to_twpa_loss_db)};
}

Power power_at_reference(Power p_generator, PowerReference ref, const ChainCal& chain) {
  switch (ref) {
    case PowerReference::Generator:
      return p_generator;
    case PowerReference::Chip:
      return apply_chain(p_generator, chain);
    case PowerReference::TwpaInput:
      return chip_to_twpa(apply_chain(p_generator, chain), chain);
  }
  throw InvalidArgumentError("power_at_reference: unknown reference plane");
}

}  // namespace omcal
