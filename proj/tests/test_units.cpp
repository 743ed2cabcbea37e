#include <doctest.h>

#include "omcal/errors.hpp"
#include "omcal/rng.hpp"
#include "omcal/units.hpp"

using namespace omcal;

TEST_CASE("dBm to watts anchors") {
  CHECK(dbm_to_watts(0.0).watts == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(dbm_to_watts(-90.0).watts == doctest::Approx(1e-12).epsilon(1e-12));
  // TWPA saturation scale: -110 dBm.
  CHECK(dbm_to_watts(-110.0).watts == doctest::Approx(1e-14).epsilon(1e-12));
  CHECK_THROWS_AS(dbm_to_watts(std::nan("")), InvalidArgumentError);
}

TEST_CASE("dBm round trip") {
  for (double dbm = -140.0; dbm <= 20.0; dbm += 3.7)
    CHECK(watts_to_dbm(dbm_to_watts(dbm)) == doctest::Approx(dbm).epsilon(1e-12));
}

TEST_CASE("gain dB round trip") {
  for (double db : {-60.0, -3.0, 0.0, 18.0, 70.0}) {
    CHECK(linear_to_db(db_to_linear(db)) == doctest::Approx(db).epsilon(1e-12));
  }
  for (double g : {1e-6, 0.5, 1.0, 63.1, 1e7})
    CHECK(db_to_linear(linear_to_db(g)) == doctest::Approx(g).epsilon(1e-12));
}

TEST_CASE("angular rate round trip is bit-stable on the device constants") {
  for (double f : {5.154e9, 15.13e6, 450e3, 180e3, 270e3, 220.0, 420.0}) {
    CHECK(to_frequency(to_angular(Frequency{f})).hz == f);
  }
}

TEST_CASE("apply_chain decades and identity") {
  ChainCal chain;
  chain.injection_attenuation_db = 60.0;
  CHECK(apply_chain(Power{1e-3}, chain).watts == doctest::Approx(1e-9).epsilon(1e-12));
  chain.injection_attenuation_db = 0.0;
  CHECK(apply_chain(Power{0.123}, chain).watts == doctest::Approx(0.123).epsilon(1e-15));
}

TEST_CASE("inject-then-deembed with matched chains is the identity") {
  Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    const double att = 80.0 * rng.uniform();
    const double p = std::pow(10.0, -12.0 + 9.0 * rng.uniform());
    ChainCal inject;
    inject.injection_attenuation_db = att;
    ChainCal deembed;
    deembed.detection_gain_db = -att;  // matched: gain undoes the attenuation
    const double back = deembed_detection(apply_chain(Power{p}, inject), deembed).watts;
    CHECK(back == doctest::Approx(p).epsilon(1e-12));
  }
}

TEST_CASE("power reference planes") {
  ChainCal chain;
  chain.injection_attenuation_db = 60.0;
  chain.chip_to_twpa_loss_db = 3.0;
  const Power gen{1e-3};
  CHECK(power_at_reference(gen, PowerReference::Generator, chain).watts == 1e-3);
  CHECK(power_at_reference(gen, PowerReference::Chip, chain).watts ==
        doctest::Approx(1e-9).epsilon(1e-12));
  CHECK(power_at_reference(gen, PowerReference::TwpaInput, chain).watts ==
        doctest::Approx(1e-9 * db_to_linear(-3.0)).epsilon(1e-12));
}
