#pragma once

// SI constants (2018 CODATA exact values where defined).
namespace twz::consts {

inline constexpr double h = 6.62607015e-34;        // J s
inline constexpr double hbar = 1.054571817e-34;    // J s
inline constexpr double k_B = 1.380649e-23;        // J/K
inline constexpr double c_light = 299792458.0;     // m/s
inline constexpr double amu = 1.66053906660e-27;   // kg
inline constexpr double g_earth = 9.81;            // m/s^2
inline constexpr double pi = 3.14159265358979323846;

}  // namespace twz::consts
