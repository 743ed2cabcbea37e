#include <doctest.h>

#include <cmath>

#include "omcal/constants.hpp"
#include "omcal/errors.hpp"
#include "omcal/optomech.hpp"
#include "omcal/synth.hpp"

using namespace omcal;

namespace {

// TLS parameters that pin kappa_in to a constant, so kappa_tot is exactly
// controllable in the algebraic checks below.
TlsLossParams constant_kappa_in(double kappa_in_rad) {
  TlsLossParams tls;
  tls.kappa_tls0 = {0.0};
  tls.kappa_dielec0 = {kappa_in_rad};
  tls.alpha = {0.0};
  tls.t_c = {1.2};
  tls.p_cav0.t_kelvin = {1e-4, 1.0};
  tls.p_cav0.value = {1e-13, 1e-13};
  return tls;
}

OptomechParams paper_optomech(double kappa_ext_rad, double kappa_in_rad) {
  OptomechParams p;
  p.omega_m = {constants::two_pi * 15.13e6};
  p.gamma_m.t_kelvin = {1e-4, 1.0};
  p.gamma_m.value = {constants::two_pi * 420.0, constants::two_pi * 420.0};
  p.g0 = {constants::two_pi * 220.0};
  p.cavity = {{5.154e9}, {kappa_ext_rad}, {kappa_in_rad}};
  return p;
}

constexpr double kext_paper = constants::two_pi * 180e3;
constexpr double kin_paper = constants::two_pi * 270e3;

}  // namespace

TEST_CASE("gamma_opt basics") {
  const OptomechParams om = paper_optomech(kext_paper, kin_paper);
  const TlsLossParams tls = constant_kappa_in(kin_paper);
  const Temperature t{0.020};

  CHECK(gamma_opt(om, tls, t, Power{0.0}).rad_per_s == 0.0);

  // Linear in power at fixed kappa_tot.
  const double g1 = gamma_opt(om, tls, t, Power{1e-12}).rad_per_s;
  const double g4 = gamma_opt(om, tls, t, Power{4e-12}).rad_per_s;
  CHECK(g4 == doctest::Approx(4.0 * g1).epsilon(1e-12));
  CHECK(g1 > 0.0);
}

TEST_CASE("gamma_opt: full form vs resolved-sideband simplification") {
  const OptomechParams om = paper_optomech(kext_paper, kin_paper);
  const TlsLossParams tls = constant_kappa_in(kin_paper);
  const Temperature t{0.020};
  const Power p{2.5e-12};  // the demonstration pump power, on chip

  const double full = gamma_opt(om, tls, t, p).rad_per_s;

  // Independent simplified form 4 g0^2 kappa_ext P / (kappa_tot hbar w_c W_m^2):
  // valid to (kappa_tot / 2 Omega_m)^2 ~ 2.2e-4.
  const double kappa_tot = kext_paper + kin_paper;
  const double simplified = 4.0 * om.g0.rad_per_s * om.g0.rad_per_s * kext_paper * p.watts /
                            (kappa_tot * constants::hbar * to_angular(om.cavity.f_c).rad_per_s *
                             om.omega_m.rad_per_s * om.omega_m.rad_per_s);
  const double rel = std::abs(full - simplified) / simplified;
  CHECK(rel < 3e-4);
  CHECK(rel > 1e-4);  // the correction term is real, not rounding noise
  const double expected_rel = std::pow(kappa_tot / (2.0 * om.omega_m.rad_per_s), 2.0);
  CHECK(rel == doctest::Approx(expected_rel).epsilon(0.01));
}

TEST_CASE("gamma_eff sign convention and self-oscillation state") {
  const OptomechParams om = paper_optomech(kext_paper, kin_paper);
  const TlsLossParams tls = constant_kappa_in(kin_paper);
  const Temperature t{0.020};
  const double gamma_m = om.gamma_m.at(t);

  const GammaEff zero = gamma_eff(PumpScheme::Blue, om, tls, t, Power{0.0});
  CHECK(zero.value->rad_per_s == doctest::Approx(gamma_m));

  const Power p{5e-12};
  const GammaEff blue = gamma_eff(PumpScheme::Blue, om, tls, t, p);
  const GammaEff red = gamma_eff(PumpScheme::Red, om, tls, t, p);
  CHECK(red.value->rad_per_s > gamma_m);
  CHECK(blue.value->rad_per_s < gamma_m);
  // Blue/red symmetry is exact: same gamma_opt on both sides.
  CHECK(std::abs(red.value->rad_per_s - gamma_m) == std::abs(blue.value->rad_per_s - gamma_m));

  // Past the threshold: a typed state, not an exception.
  const auto threshold = self_oscillation_threshold(om, tls, t, Power{1e-9});
  REQUIRE(threshold.has_value());
  const GammaEff osc = gamma_eff(PumpScheme::Blue, om, tls, t, Power{1.05 * threshold->watts});
  CHECK(osc.self_oscillating);
  CHECK_FALSE(osc.value.has_value());
  const GammaEff red_fine =
      gamma_eff(PumpScheme::Red, om, tls, t, Power{1.05 * threshold->watts});
  CHECK_FALSE(red_fine.self_oscillating);

  // At the threshold gamma_opt equals gamma_m.
  CHECK(gamma_opt(om, tls, t, *threshold).rad_per_s == doctest::Approx(gamma_m).epsilon(1e-9));
}

TEST_CASE("optomechanical gain") {
  const OptomechParams om = paper_optomech(kext_paper, kin_paper);
  const TlsLossParams tls = constant_kappa_in(kin_paper);
  const Temperature t{0.020};
  const double gamma_m = om.gamma_m.at(t);

  CHECK(g_opt(PumpScheme::Blue, om, tls, t, Power{0.0}) == doctest::Approx(1.0));
  CHECK(g_opt(PumpScheme::Red, om, tls, t, Power{0.0}) == doctest::Approx(1.0));

  // Solve for the power with gamma_opt = gamma_m / 2 (linear in P here).
  const double g_at_1pw = gamma_opt(om, tls, t, Power{1e-12}).rad_per_s;
  const Power half{0.5 * gamma_m / g_at_1pw * 1e-12};
  CHECK(g_opt(PumpScheme::Blue, om, tls, t, half) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(g_opt(PumpScheme::Red, om, tls, t, half) == doctest::Approx(2.0 / 3.0).epsilon(1e-9));

  const auto threshold = self_oscillation_threshold(om, tls, t, Power{1e-9});
  CHECK_THROWS_AS(g_opt(PumpScheme::Blue, om, tls, t, Power{1.1 * threshold->watts}),
                  SelfOscillationError);
}

TEST_CASE("conversion factor M") {
  const Temperature t{0.020};

  // Doubling kappa_tot at fixed kappa_ext quarters M.
  const OptomechParams om1 = paper_optomech(kext_paper, kin_paper);
  const double ktot1 = kext_paper + kin_paper;
  const OptomechParams om2 = paper_optomech(kext_paper, 2.0 * ktot1 - kext_paper);
  const double m1 = conversion_m(om1, constant_kappa_in(kin_paper), t, Power{1e-12});
  const double m2 =
      conversion_m(om2, constant_kappa_in(2.0 * ktot1 - kext_paper), t, Power{1e-12});
  CHECK(m2 == doctest::Approx(0.25 * m1).epsilon(1e-12));

  // Branch swap at fixed kappa_tot: M ratio (180/270)^2 = 4/9.
  const OptomechParams over = paper_optomech(kin_paper, kext_paper);  // kappa_ext = 270 kHz
  const double m_under = conversion_m(om1, constant_kappa_in(kin_paper), t, Power{1e-12});
  const double m_over = conversion_m(over, constant_kappa_in(kext_paper), t, Power{1e-12});
  CHECK(m_under / m_over == doctest::Approx(4.0 / 9.0).epsilon(1e-12));
}

TEST_CASE("paper-device M against an independent evaluation") {
  const OptomechParams om = paper_optomech(kext_paper, kin_paper);
  const double m = conversion_m(om, constant_kappa_in(kin_paper), Temperature{0.02}, Power{1e-12});

  // Independent grouping with explicit CODATA hbar.
  const double hbar = 1.054571817e-34;
  const double g0 = constants::two_pi * 220.0;
  const double kext = constants::two_pi * 180e3;
  const double ktot = constants::two_pi * 450e3;
  const double om_m = constants::two_pi * 15.13e6;
  const double om_c = constants::two_pi * 5.154e9;
  const double oracle = (4.0 * g0 * g0 / (ktot * ktot)) * (kext / om_m) * (kext / om_m) *
                        (om_m * om_m / (om_m * om_m)) / (hbar * om_c) ;
  // oracle simplifies to 4 g0^2 kext^2 / (hbar W_m^2 w_c ktot^2); the
  // different grouping gives an independent rounding path.
  const double oracle2 = 4.0 * (g0 / ktot) * (g0 / ktot) * (kext / om_m) * (kext / om_m) /
                         (hbar * om_c);
  CHECK(oracle == doctest::Approx(oracle2).epsilon(1e-12));
  CHECK(m == doctest::Approx(oracle).epsilon(1e-9));
  CHECK(m > 3.9e13);
  CHECK(m < 4.0e13);
}

TEST_CASE("Bose-Einstein occupation") {
  const AngularRate om_m{constants::two_pi * 15.13e6};
  const double h = 6.62607015e-34, kb = 1.380649e-23;

  // h f / (kB T) = ln 2 gives exactly one phonon.
  const double t_one = h * 15.13e6 / (kb * std::log(2.0));
  CHECK(bose_einstein(om_m, Temperature{t_one}) == doctest::Approx(1.0).epsilon(1e-12));

  // The 4 mK anchor: about 5 phonons.
  CHECK(bose_einstein(om_m, Temperature{0.004}) == doctest::Approx(5.0).epsilon(0.02));

  // High-temperature limit at 400 mK within 0.1%.
  const double n400 = bose_einstein(om_m, Temperature{0.400});
  const double classical = kb * 0.400 / (h * 15.13e6);
  CHECK(std::abs(n400 / classical - 1.0) < 1e-3);

  // Anywhere the occupation exceeds 50, the classical limit holds to 1%.
  for (double t : {0.06, 0.1, 0.2, 0.3}) {
    const double n = bose_einstein(om_m, Temperature{t});
    if (n > 50.0) CHECK(std::abs(n / (kb * t / (h * 15.13e6)) - 1.0) < 0.01);
  }

  CHECK_THROWS_AS(bose_einstein(om_m, Temperature{0.0}), InvalidArgumentError);
}

namespace {

struct ForwardSignal {
  double area_out;
  double a_ph;
  double gamma_eff;
};

// Composes the synthesis chain by hand: area on chip, chip->TWPA loss, TLS
// transmission, detection gain.
ForwardSignal forward(const OptomechParams& om, const TlsLossParams& tls,
                      const TwpaTlsParams& twpa, const ChainCal& chain, PumpScheme scheme,
                      Temperature t, Power p, double a_ph) {
  ForwardSignal out;
  out.a_ph = a_ph;
  const GammaEff ge = gamma_eff(scheme, om, tls, t, p);
  out.gamma_eff = ge.value->rad_per_s;
  const double gain_opt = ge.gamma_m.rad_per_s / out.gamma_eff;
  const double m = conversion_m(om, tls, t, p);
  const double a_chip = a_ph * m * p.watts * gain_opt;
  const double a_twpa = a_chip * db_to_linear(-chain.chip_to_twpa_loss_db);
  const double p_sig = constants::hbar * to_angular(om.cavity.f_c).rad_per_s * a_twpa;
  const double delta = twpa_transmission(twpa, om.cavity.f_c, t, Power{p_sig}, true);
  out.area_out = a_twpa * delta * db_to_linear(chain.detection_gain_db);
  return out;
}

}  // namespace

TEST_CASE("sideband-area identity: the normalization inverts the synthesis exactly") {
  const OptomechParams om = paper_optomech(kext_paper, kin_paper);
  const TlsLossParams tls = constant_kappa_in(kin_paper);
  const TwpaTlsParams twpa = paper_replica_scenario().tls_twpa;
  ChainCal chain;
  chain.injection_attenuation_db = 60.0;
  chain.detection_gain_db = 70.0;
  chain.chip_to_twpa_loss_db = 3.0;
  const Temperature t{0.100};
  const Power p{3e-12};
  const double n_ph = bose_einstein(om.omega_m, t);

  for (PumpScheme scheme : {PumpScheme::Blue, PumpScheme::Red}) {
    const ForwardSignal fwd = forward(om, tls, twpa, chain, scheme, t, p, n_ph);
    PhononAreaOptions opts;
    opts.measured_gamma_eff = AngularRate{fwd.gamma_eff};
    const double back = phonon_area(fwd.area_out, scheme, t, p, om, tls, twpa, chain, opts);
    CHECK(back == doctest::Approx(n_ph).epsilon(1e-9));
  }
}

TEST_CASE("phonon area is invariant under matched chain-gain rescaling") {
  const OptomechParams om = paper_optomech(kext_paper, kin_paper);
  const TlsLossParams tls = constant_kappa_in(kin_paper);
  const TwpaTlsParams twpa = paper_replica_scenario().tls_twpa;
  ChainCal chain;
  chain.detection_gain_db = 70.0;
  chain.chip_to_twpa_loss_db = 3.0;
  const Temperature t{0.100};
  const Power p{3e-12};
  const ForwardSignal fwd = forward(om, tls, twpa, chain, PumpScheme::Red, t, p, 100.0);

  PhononAreaOptions opts;
  opts.measured_gamma_eff = AngularRate{fwd.gamma_eff};
  const double base = phonon_area(fwd.area_out, PumpScheme::Red, t, p, om, tls, twpa, chain, opts);

  // Raise the chain gain and the recorded area by the same 7 dB.
  ChainCal louder = chain;
  louder.detection_gain_db += 7.0;
  const double scaled = phonon_area(fwd.area_out * db_to_linear(7.0), PumpScheme::Red, t, p, om,
                                    tls, twpa, louder, opts);
  CHECK(scaled == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("branch swap changes the phonon area by (kappa_ext/kappa_in)^2") {
  const TwpaTlsParams twpa = paper_replica_scenario().tls_twpa;
  ChainCal chain;
  chain.detection_gain_db = 70.0;
  const Temperature t{0.100};
  const Power p{3e-12};

  const OptomechParams under = paper_optomech(kext_paper, kin_paper);
  const OptomechParams over = paper_optomech(kin_paper, kext_paper);
  const TlsLossParams tls_under = constant_kappa_in(kin_paper);
  const TlsLossParams tls_over = constant_kappa_in(kext_paper);

  const ForwardSignal fwd = forward(under, tls_under, twpa, chain, PumpScheme::Red, t, p, 50.0);
  PhononAreaOptions opts;
  opts.measured_gamma_eff = AngularRate{fwd.gamma_eff};
  const double a_under =
      phonon_area(fwd.area_out, PumpScheme::Red, t, p, under, tls_under, twpa, chain, opts);
  const double a_over =
      phonon_area(fwd.area_out, PumpScheme::Red, t, p, over, tls_over, twpa, chain, opts);
  // Same kappa_tot on both sides, so the area scales as 1/kappa_ext^2.
  CHECK(a_under / a_over == doctest::Approx((kin_paper / kext_paper) * (kin_paper / kext_paper))
                               .epsilon(1e-12));
}

TEST_CASE("phonon area error paths") {
  const OptomechParams om = paper_optomech(kext_paper, kin_paper);
  const TlsLossParams tls = constant_kappa_in(kin_paper);
  const TwpaTlsParams twpa = paper_replica_scenario().tls_twpa;
  ChainCal chain;
  chain.detection_gain_db = 70.0;
  const Temperature t{0.100};
  const Power p{3e-12};

  // Missing calibration with the correction enabled.
  PhononAreaOptions opts;
  opts.measured_gamma_eff = AngularRate{constants::two_pi * 500.0};
  CHECK_THROWS_AS(phonon_area(1e6, PumpScheme::Red, t, p, om, tls, std::nullopt, chain, opts),
                  MissingCorrectionError);
  PhononAreaOptions uncorrected = opts;
  uncorrected.twpa_correction = false;
  CHECK_NOTHROW(phonon_area(1e6, PumpScheme::Red, t, p, om, tls, std::nullopt, chain,
                            uncorrected));

  // Saturation boundary: a signal too large at the TWPA input is refused.
  const double huge_area =
      1.1 * opts.saturation_limit.watts /
      (constants::hbar * to_angular(om.cavity.f_c).rad_per_s) * db_to_linear(70.0);
  CHECK_THROWS_AS(phonon_area(huge_area, PumpScheme::Red, t, p, om, tls, twpa, chain, opts),
                  SaturationError);
}
