#pragma once

#include <string>
#include <vector>

namespace twz {

// Optical transition constants. The linewidth is accepted in Hz (the value
// quoted on data sheets) and stored as an angular frequency; every formula
// below states which convention it consumes.
struct TransitionSpec {
  double wavelength_m = 556e-9;
  double linewidth_gamma_rad = 0.0;  // 2*pi*Gamma_Hz, rad/s
  double atom_mass_kg = 0.0;
  std::string label;

  static TransitionSpec from_hz(double wavelength_m, double gamma_hz,
                                double mass_kg, std::string label = {});
  // Default instance: 556 nm intercombination line, Gamma = 2*pi*182 kHz,
  // mass-174 atoms.
  static TransitionSpec yb174_green();
};

// Tweezer geometry and calibration. depth_per_power_hz_w is the measured
// slope of trap depth vs optical power (default 1e9 Hz/W: 6 mW -> 6 MHz).
struct TrapSpec {
  double trap_wavelength_m = 532e-9;
  double waist_m = 700e-9;
  double power_per_tweezer_w = 6e-3;
  double depth_per_power_hz_w = 1.0e9;
  double shift_fraction_mj0 = 0.016;
  // mJ=+-1 polarizability is not pinned by any in-house measurement; this
  // default is a config-overridable placeholder with the opposite sign.
  double shift_fraction_mj1 = -0.022;
};

struct ImagingSpec {
  double saturation = 3.0;       // s = I/I_sat
  double detuning = -1.5;        // Delta/Gamma, signed; negative = red
  double exposure_s = 30e-3;
  double frame_period_s = 30e-3;  // >= exposure_s
  double detection_efficiency = 0.05;  // eta_total in (0,1]
};

struct TrapDepth {
  double depth_freq_hz = 0.0;
  double depth_temp_k = 0.0;
  double depth_joule = 0.0;
};

struct TrapFrequencies {
  double radial_hz = 0.0;
  double axial_hz = 0.0;
};

struct Recoil {
  double velocity_ms = 0.0;
  double temperature_k = 0.0;
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

struct ShiftPoint {
  double power_w = 0.0;
  double shift_hz = 0.0;
};

void validate(const TransitionSpec& t);
void validate(const ImagingSpec& im);

// Steady-state two-level scattering rate, returned as photon events per
// second: R = (Gamma_rad/2) * s / (1 + s + 4*(Delta/Gamma)^2).
double scattering_rate(const TransitionSpec& t, double s, double delta);

// Same quantity as a dimensionless ratio to the saturated rate Gamma/2.
double scattering_rate_ratio(double s, double delta);

// Doppler theory: T = (hbar*Gamma_rad / 8 k_B) * (1 + s + 4 d^2) / |d|,
// d = Delta/Gamma < 0.
double doppler_limit_temperature(const TransitionSpec& t, double s, double delta);

// I_sat = pi h c Gamma_rad / (3 lambda^3), W/m^2.
double saturation_intensity(const TransitionSpec& t);

TrapDepth trap_depth(const TrapSpec& tr, double power_w);

// Tensor light shift of the excited-state sublevel, Hz, positive = blue.
double light_shift(const TrapSpec& tr, double depth_freq_hz, int m_j);

// Harmonic expansion of the Gaussian-beam potential.
TrapFrequencies trap_frequencies(const TransitionSpec& t, const TrapSpec& tr,
                                 double power_w);

Recoil recoil(const TransitionSpec& t);

double rayleigh_range(const TrapSpec& tr);

// Full Gaussian-beam potential (J, negative inside the trap) for a depth
// U0 (J) at the focus; used by release-and-recapture.
double gaussian_potential(const TrapSpec& tr, double depth_j, double x, double y,
                          double z);

LineFit fit_light_shift_slope(const std::vector<ShiftPoint>& points);

}  // namespace twz
