#include <doctest.h>

#include <cmath>
#include <complex>

#include "omcal/cavity.hpp"
#include "omcal/errors.hpp"
#include "omcal/rng.hpp"
#include "omcal/synth.hpp"

using namespace omcal;

namespace {

const CavityParams paper_device{{5.154e9},
                                {constants::two_pi * 180e3},
                                {constants::two_pi * 270e3}};

// Independent oracle: the quality-factor form of the reflection ratio,
// evaluated in extended-precision complex arithmetic. The implementation
// uses the damping-rate form, so agreement checks the algebra end to end.
long double oracle_s11_db(const CavityParams& p, double f_hz) {
  using C = std::complex<long double>;
  const long double omega_c = 2.0L * 3.14159265358979323846264338327950288L * (long double)p.f_c.hz;
  const long double q_ext = omega_c / (long double)p.kappa_ext.rad_per_s;
  const long double q_in = omega_c / (long double)p.kappa_in.rad_per_s;
  const long double q_tot = 1.0L / (1.0L / q_ext + 1.0L / q_in);
  const long double rel = (2.0L * 3.14159265358979323846264338327950288L * (long double)f_hz -
                           omega_c) / omega_c;
  const C num((q_ext - 2.0L * q_tot) / q_ext, 2.0L * q_tot * rel);
  const C den(1.0L, 2.0L * q_tot * rel);
  return 20.0L * std::log10(std::abs(num / den));
}

ReflectionTrace make_trace(const CavityParams& p, double span_linewidths, int n, double noise_db,
                           std::uint64_t seed) {
  ReflectionTrace trace;
  Rng rng(seed);
  const double span = span_linewidths * p.kappa_tot().rad_per_s / constants::two_pi;
  for (int i = 0; i < n; ++i) {
    const double f = p.f_c.hz - span / 2 + span * i / (n - 1);
    trace.freq_hz.push_back(f);
    trace.mag_db.push_back(s11_db(p, Frequency{f}) + noise_db * rng.gaussian());
  }
  return trace;
}

}  // namespace

TEST_CASE("lossless cavity reflects everything") {
  const CavityParams lossless{{5e9}, {constants::two_pi * 200e3}, {0.0}};
  for (double off : {-1e7, -1e3, 0.0, 1e3, 1e7})
    CHECK(std::abs(s11_db(lossless, Frequency{5e9 + off})) < 1e-9);
}

TEST_CASE("critical coupling on resonance clamps at the floor") {
  const CavityParams critical{{5e9}, {constants::two_pi * 200e3}, {constants::two_pi * 200e3}};
  const S11Sample s = s11_sample(critical, Frequency{5e9});
  CHECK(s.clamped);
  CHECK(s.db == doctest::Approx(-200.0));
  S11Options opts;
  opts.floor_db = -120.0;
  CHECK(s11_sample(critical, Frequency{5e9}, opts).db == doctest::Approx(-120.0));
}

TEST_CASE("paper-device dip against the extended-precision oracle") {
  // On resonance the dip is 20 log10(|kappa_in - kappa_ext| / kappa_tot)
  // = 20 log10(90/450) = -13.9794 dB.
  const double dip = s11_db(paper_device, paper_device.f_c);
  CHECK(dip == doctest::Approx(20.0 * std::log10(90.0 / 450.0)).epsilon(1e-12));
  for (double off : {0.0, 1e4, -3e5, 2.2e5, 1e6, -5e6}) {
    const double f = paper_device.f_c.hz + off;
    const double got = s11_db(paper_device, Frequency{f});
    CHECK(std::abs(got - (double)oracle_s11_db(paper_device, f)) < 1e-10);
  }
}

TEST_CASE("swap symmetry: the magnitude cannot tell the branches apart") {
  const CavityParams swapped{paper_device.f_c, paper_device.kappa_in, paper_device.kappa_ext};
  for (int i = -100; i <= 100; ++i) {
    const Frequency f{paper_device.f_c.hz + i * 23e3};
    const double a = std::pow(10.0, s11_db(paper_device, f) / 20.0);
    const double b = std::pow(10.0, s11_db(swapped, f) / 20.0);
    CHECK(std::abs(a - b) <= 1e-12 * std::max(a, b));
  }
}

TEST_CASE("reflection approaches 0 dB far from resonance") {
  const double detuning = 1000.0 * paper_device.kappa_tot().rad_per_s / constants::two_pi;
  CHECK(std::abs(s11_db(paper_device, Frequency{paper_device.f_c.hz + detuning})) < 0.01);
  CHECK(std::abs(s11_db(paper_device, Frequency{paper_device.f_c.hz - detuning})) < 0.01);
}

TEST_CASE("noiseless fit recovers the parameters exactly") {
  const ReflectionTrace trace = make_trace(paper_device, 20.0, 401, 0.0, 1);
  const ReflectionFit fit = fit_reflection(trace);
  CHECK(fit.overcoupled.f_c.hz == doctest::Approx(paper_device.f_c.hz).epsilon(1e-9));
  CHECK(fit.overcoupled.kappa_tot().rad_per_s ==
        doctest::Approx(paper_device.kappa_tot().rad_per_s).epsilon(1e-6));
  // paper device is undercoupled (180 < 270): the undercoupled member holds kappa_ext.
  CHECK(fit.undercoupled.kappa_ext.rad_per_s ==
        doctest::Approx(paper_device.kappa_ext.rad_per_s).epsilon(1e-6));
}

TEST_CASE("both branches reproduce the trace with identical residuals") {
  const ReflectionTrace trace = make_trace(paper_device, 20.0, 401, 0.1, 2);
  const ReflectionFit fit = fit_reflection(trace);
  auto ssr = [&](const CavityParams& p) {
    double acc = 0.0;
    for (std::size_t i = 0; i < trace.freq_hz.size(); ++i) {
      const double d = s11_db(p, Frequency{trace.freq_hz[i]}) - trace.mag_db[i];
      acc += d * d;
    }
    return acc;
  };
  const double a = ssr(fit.overcoupled);
  const double b = ssr(fit.undercoupled);
  CHECK(std::abs(a - b) / std::max(a, b) < 1e-9);
  CHECK(fit.overcoupled.f_c.hz == fit.undercoupled.f_c.hz);
  CHECK(fit.overcoupled.kappa_tot().rad_per_s ==
        doctest::Approx(fit.undercoupled.kappa_tot().rad_per_s).epsilon(1e-15));
}

TEST_CASE("noisy fits cover the truth at the reported uncertainties") {
  int all_within = 0;
  const int n_rep = 100;
  for (int rep = 0; rep < n_rep; ++rep) {
    const ReflectionTrace trace = make_trace(paper_device, 20.0, 401, 0.1, 1000 + rep);
    const ReflectionFit fit = fit_reflection(trace);
    const double kt_true = paper_device.kappa_tot().rad_per_s / constants::two_pi;
    const double a_true = std::abs(1.0 - 2.0 * paper_device.kappa_ext.rad_per_s /
                                             paper_device.kappa_tot().rad_per_s);
    const bool ok =
        std::abs(fit.engine.params[0] - paper_device.f_c.hz) <= 3.0 * fit.engine.sigma(0) &&
        std::abs(fit.engine.params[1] - kt_true) <= 3.0 * fit.engine.sigma(1) &&
        std::abs(fit.engine.params[2] - a_true) <= 3.0 * fit.engine.sigma(2);
    if (ok) ++all_within;
  }
  CHECK(all_within >= 95);
}

TEST_CASE("fit is translation covariant") {
  const double shift = 1.0e6;
  const ReflectionTrace trace = make_trace(paper_device, 20.0, 401, 0.05, 3);
  ReflectionTrace shifted = trace;
  for (double& f : shifted.freq_hz) f += shift;
  const ReflectionFit a = fit_reflection(trace);
  const ReflectionFit b = fit_reflection(shifted);
  CHECK(b.overcoupled.f_c.hz - a.overcoupled.f_c.hz == doctest::Approx(shift).epsilon(1e-9));
  CHECK(b.overcoupled.kappa_tot().rad_per_s ==
        doctest::Approx(a.overcoupled.kappa_tot().rad_per_s).epsilon(1e-9));
  CHECK(b.overcoupled.kappa_ext.rad_per_s ==
        doctest::Approx(a.overcoupled.kappa_ext.rad_per_s).epsilon(1e-9));
}

TEST_CASE("complex traces reduce to the same fit as magnitude traces") {
  ReflectionTrace mag = make_trace(paper_device, 20.0, 201, 0.0, 4);
  std::vector<double> re(mag.freq_hz.size()), im(mag.freq_hz.size());
  for (std::size_t i = 0; i < mag.freq_hz.size(); ++i) {
    const double delta =
        constants::two_pi * (mag.freq_hz[i] - paper_device.f_c.hz);
    const std::complex<double> num(paper_device.kappa_in.rad_per_s -
                                       paper_device.kappa_ext.rad_per_s,
                                   2.0 * delta);
    const std::complex<double> den(paper_device.kappa_tot().rad_per_s, 2.0 * delta);
    const std::complex<double> s11 = num / den;
    re[i] = s11.real();
    im[i] = s11.imag();
  }
  const ReflectionTrace from_c = ReflectionTrace::from_complex(mag.freq_hz, re, im);
  const ReflectionFit fit = fit_reflection(from_c);
  CHECK(fit.overcoupled.kappa_tot().rad_per_s ==
        doctest::Approx(paper_device.kappa_tot().rad_per_s).epsilon(1e-6));
}

TEST_CASE("trace validation and span errors") {
  ReflectionTrace tiny;
  for (int i = 0; i < 5; ++i) {
    tiny.freq_hz.push_back(5e9 + i);
    tiny.mag_db.push_back(0.0);
  }
  CHECK_THROWS_AS(fit_reflection(tiny), InvalidArgumentError);

  // Narrow window: spans well under 3 linewidths.
  ReflectionTrace narrow;
  const double kappa_hz = paper_device.kappa_tot().rad_per_s / constants::two_pi;
  for (int i = 0; i < 50; ++i) {
    const double f = paper_device.f_c.hz - kappa_hz / 2 + kappa_hz * i / 49.0;
    narrow.freq_hz.push_back(f);
    narrow.mag_db.push_back(s11_db(paper_device, Frequency{f}));
  }
  CHECK_THROWS_AS(fit_reflection(narrow), InsufficientSpanError);

  ReflectionTrace unsorted = make_trace(paper_device, 20.0, 64, 0.0, 5);
  std::swap(unsorted.freq_hz[10], unsorted.freq_hz[11]);
  CHECK_THROWS_AS(fit_reflection(unsorted), InvalidArgumentError);
}

TEST_CASE("caller-supplied initial parameters are honored") {
  const ReflectionTrace trace = make_trace(paper_device, 20.0, 201, 0.05, 8);
  CavityParams init = paper_device;
  init.kappa_in.rad_per_s *= 1.3;  // off but in the basin
  const ReflectionFit fit = fit_reflection(trace, init);
  CHECK(fit.overcoupled.kappa_tot().rad_per_s ==
        doctest::Approx(paper_device.kappa_tot().rad_per_s).epsilon(0.01));

  CavityParams bad = init;
  bad.kappa_ext.rad_per_s = -1.0;
  CHECK_THROWS_AS(fit_reflection(trace, bad), InvalidArgumentError);
}

TEST_CASE("linear-magnitude weighting reaches the same optimum on clean data") {
  const ReflectionTrace trace = make_trace(paper_device, 20.0, 301, 0.0, 7);
  ReflectionFitOptions opts;
  opts.linear_magnitude_weighting = true;
  const ReflectionFit weighted = fit_reflection(trace, std::nullopt, opts);
  const ReflectionFit plain = fit_reflection(trace);
  CHECK(weighted.overcoupled.kappa_tot().rad_per_s ==
        doctest::Approx(plain.overcoupled.kappa_tot().rad_per_s).epsilon(1e-6));
  CHECK(weighted.overcoupled.f_c.hz == doctest::Approx(plain.overcoupled.f_c.hz).epsilon(1e-9));
}

TEST_CASE("shallow high-temperature dips still fit") {
  // kappa_in >> kappa_ext: a ~ 0.88, dip only ~1 dB deep.
  const CavityParams hot{{5.154e9}, {constants::two_pi * 180e3}, {constants::two_pi * 2.77e6}};
  const ReflectionTrace trace = make_trace(hot, 20.0, 401, 0.1, 6);
  const ReflectionFit fit = fit_reflection(trace);
  CHECK(fit.overcoupled.kappa_tot().rad_per_s ==
        doctest::Approx(hot.kappa_tot().rad_per_s).epsilon(0.05));
}
