#pragma once

#include <string>
#include <vector>

namespace omcal {

// Reference constants the self test checks the library against. The default
// values must match the SI definitions; tests can inject corrupted values to
// prove the checks are live.
struct SelfTestConstants {
  double planck_h = 6.62607015e-34;
  double boltzmann_k = 1.380649e-23;
};

struct SelfTestCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SelfTestResult {
  std::vector<SelfTestCheck> checks;
  bool all_passed = true;
};

// Fast embedded invariant suite: unit round trips, reflection swap symmetry
// and asymptotics, tanh and Bose limits, solver exactness on a linear
// problem, generator round trip and determinism. Runs in well under a
// minute.
SelfTestResult run_selftest(const SelfTestConstants& ref = {});

}  // namespace omcal
