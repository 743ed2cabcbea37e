#include "omcal/selftest.hpp"

#include <cmath>
#include <cstdio>

#include "omcal/cavity.hpp"
#include "omcal/constants.hpp"
#include "omcal/optomech.hpp"
#include "omcal/synth.hpp"
#include "omcal/tls.hpp"
#include "omcal/units.hpp"

namespace omcal {

namespace {

void add(SelfTestResult& r, const std::string& name, bool ok, const std::string& detail = "") {
  r.checks.push_back({name, ok, detail});
  r.all_passed = r.all_passed && ok;
}

bool close(double a, double b, double rel) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b));
}

}  // namespace

SelfTestResult run_selftest(const SelfTestConstants& ref) {
  SelfTestResult result;
  char buf[160];

  // Unit conversions.
  {
    bool ok = true;
    for (double dbm : {-110.0, -90.0, -30.0, 0.0, 10.0})
      ok = ok && close(watts_to_dbm(dbm_to_watts(dbm)), dbm, 1e-12);
    ok = ok && close(dbm_to_watts(0.0).watts, 1e-3, 1e-12);
    ok = ok && close(dbm_to_watts(-110.0).watts, 1e-14, 1e-12);
    add(result, "dBm round trip and anchors", ok);
  }
  {
    bool ok = true;
    for (double f : {5.154e9, 15.13e6, 450e3, 180e3, 220.0, 420.0})
      ok = ok && to_frequency(to_angular(Frequency{f})).hz == f;
    add(result, "angular-rate round trip bit-stable on device constants", ok);
  }

  // Reflection line shape.
  {
    CavityParams dev{{5.154e9},
                     {constants::two_pi * 180e3},
                     {constants::two_pi * 270e3}};
    CavityParams swapped{dev.f_c, dev.kappa_in, dev.kappa_ext};
    bool ok = true;
    for (int i = -50; i <= 50; ++i) {
      const Frequency f{dev.f_c.hz + i * 40e3};
      ok = ok && close(std::pow(10.0, s11_db(dev, f) / 20.0),
                       std::pow(10.0, s11_db(swapped, f) / 20.0), 1e-12);
    }
    add(result, "S11 swap symmetry (over/under ambiguity)", ok);

    const double far = s11_db(dev, Frequency{dev.f_c.hz + 1000.0 * 450e3});
    add(result, "S11 -> 0 dB far from resonance", std::abs(far) < 0.01);

    CavityParams lossless{dev.f_c, dev.kappa_ext, {0.0}};
    add(result, "lossless cavity reflects at 0 dB",
        std::abs(s11_db(lossless, Frequency{dev.f_c.hz + 1e5})) < 1e-9);
  }

  // Thermal factors against the reference constants.
  {
    const Frequency f_c{5.154e9};
    const double t_unit = ref.planck_h * f_c.hz / (2.0 * ref.boltzmann_k);
    const double got = tanh_factor(f_c, Temperature{t_unit});
    const bool ok = close(got, std::tanh(1.0), 1e-9);
    std::snprintf(buf, sizeof buf, "tanh(1) point: got %.12f", got);
    add(result, "TLS tanh factor analytic point", ok, buf);
    add(result, "TLS tanh factor low-T saturation",
        close(tanh_factor(f_c, Temperature{1e-5}), 1.0, 1e-12));
  }
  {
    const AngularRate omega_m{constants::two_pi * 15.13e6};
    const double t_one = ref.planck_h * 15.13e6 / (ref.boltzmann_k * std::log(2.0));
    const double got = bose_einstein(omega_m, Temperature{t_one});
    const bool ok = close(got, 1.0, 1e-9);
    std::snprintf(buf, sizeof buf, "ln2 point: got %.12f", got);
    add(result, "Bose-Einstein ln2 point equals one phonon", ok, buf);
  }

  // Solver exactness on a linear problem.
  {
    Eigen::MatrixXd a(6, 2);
    Eigen::VectorXd b(6);
    for (int i = 0; i < 6; ++i) {
      a(i, 0) = 1.0;
      a(i, 1) = i;
      b[i] = 0.5 + 0.25 * i + ((i % 2) ? 1e-3 : -1e-3);
    }
    FitProblem p;
    p.initial = Eigen::Vector2d(0.0, 0.0);
    p.scales = Eigen::Vector2d(1.0, 1.0);
    p.residual = [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(a * x - b); };
    const FitResult fit = solve_least_squares(p);
    const Eigen::Vector2d exact =
        (a.transpose() * a).ldlt().solve(a.transpose() * b);
    add(result, "LM solves linear least squares to normal-equation accuracy",
        (fit.params - exact).norm() < 1e-10);
  }

  // Generator round trip, noiseless.
  {
    ScenarioConfig cfg = paper_replica_scenario();
    cfg.noise = {0.0, 0.0, 0.0, 0.0};
    const Temperature t{0.020};
    const Power p{1e-12};
    const ReflectionTrace trace = gen_reflection_sweep(cfg, t, p);
    const ReflectionFit fit = fit_reflection(trace);
    const double kappa_true =
        cfg.kappa_ext.rad_per_s + kappa_in_model(cfg.tls_cavity, cfg.f_c, t, p).rad_per_s;
    const bool ok = close(fit.overcoupled.kappa_tot().rad_per_s, kappa_true, 1e-6) &&
                    close(fit.overcoupled.f_c.hz, cfg.f_c.hz, 1e-9);
    add(result, "noiseless sweep refit recovers the generator inputs", ok);
  }

  // Determinism of the seeded generator.
  {
    ScenarioConfig cfg = paper_replica_scenario();
    const ReflectionTrace a = gen_reflection_sweep(cfg, Temperature{0.1}, Power{1e-12});
    const ReflectionTrace b = gen_reflection_sweep(cfg, Temperature{0.1}, Power{1e-12});
    bool ok = a.mag_db.size() == b.mag_db.size();
    for (std::size_t i = 0; ok && i < a.mag_db.size(); ++i) ok = a.mag_db[i] == b.mag_db[i];
    add(result, "seeded generation is bit-identical", ok);
  }

  return result;
}

}  // namespace omcal
