#pragma once

// Physical constants (SI 2019 exact values) used across the model layer.

namespace omcal::constants {

inline constexpr double planck_h = 6.62607015e-34;   // J s
inline constexpr double boltzmann_k = 1.380649e-23;  // J / K
inline constexpr double two_pi = 6.283185307179586476925286766559;
inline constexpr double hbar = planck_h / two_pi;    // J s

}  // namespace omcal::constants
