#include "tweezer/physics.hpp"

#include <cmath>
#include <stdexcept>

#include "tweezer/units.hpp"

namespace twz {

using namespace consts;

TransitionSpec TransitionSpec::from_hz(double wavelength_m, double gamma_hz,
                                       double mass_kg, std::string label) {
  TransitionSpec t;
  t.wavelength_m = wavelength_m;
  t.linewidth_gamma_rad = 2.0 * pi * gamma_hz;
  t.atom_mass_kg = mass_kg;
  t.label = std::move(label);
  validate(t);
  return t;
}

TransitionSpec TransitionSpec::yb174_green() {
  return from_hz(556e-9, 182e3, 174.0 * amu, "1S0-3P1");
}

void validate(const TransitionSpec& t) {
  if (!(t.wavelength_m > 0.0))
    throw std::domain_error("TransitionSpec: wavelength must be > 0");
  if (!(t.linewidth_gamma_rad > 0.0))
    throw std::domain_error("TransitionSpec: linewidth must be > 0");
  if (!(t.atom_mass_kg > 0.0))
    throw std::domain_error("TransitionSpec: atom mass must be > 0");
}

void validate(const ImagingSpec& im) {
  if (!(im.saturation >= 0.0))
    throw std::domain_error("ImagingSpec: saturation must be >= 0");
  if (!(im.exposure_s > 0.0))
    throw std::domain_error("ImagingSpec: exposure must be > 0");
  if (!(im.frame_period_s >= im.exposure_s))
    throw std::domain_error("ImagingSpec: frame period must be >= exposure");
  if (!(im.detection_efficiency > 0.0 && im.detection_efficiency <= 1.0))
    throw std::domain_error("ImagingSpec: detection efficiency must be in (0,1]");
}

double scattering_rate_ratio(double s, double delta) {
  if (s < 0.0) throw std::domain_error("scattering_rate: s must be >= 0");
  return s / (1.0 + s + 4.0 * delta * delta);
}

double scattering_rate(const TransitionSpec& t, double s, double delta) {
  validate(t);
  return 0.5 * t.linewidth_gamma_rad * scattering_rate_ratio(s, delta);
}

double doppler_limit_temperature(const TransitionSpec& t, double s, double delta) {
  validate(t);
  if (s < 0.0) throw std::domain_error("doppler_limit_temperature: s must be >= 0");
  if (!(delta < 0.0))
    throw std::domain_error(
        "doppler_limit_temperature: detuning must be on the cooling side (Delta < 0)");
  const double d = -delta;
  return hbar * t.linewidth_gamma_rad / (8.0 * k_B) * (1.0 + s + 4.0 * d * d) / d;
}

double saturation_intensity(const TransitionSpec& t) {
  validate(t);
  const double l3 = t.wavelength_m * t.wavelength_m * t.wavelength_m;
  return pi * h * c_light * t.linewidth_gamma_rad / (3.0 * l3);
}

TrapDepth trap_depth(const TrapSpec& tr, double power_w) {
  if (power_w < 0.0) throw std::domain_error("trap_depth: power must be >= 0");
  if (!(tr.depth_per_power_hz_w > 0.0))
    throw std::domain_error("trap_depth: depth_per_power must be > 0");
  TrapDepth d;
  d.depth_freq_hz = tr.depth_per_power_hz_w * power_w;
  d.depth_joule = h * d.depth_freq_hz;
  d.depth_temp_k = d.depth_joule / k_B;
  return d;
}

double light_shift(const TrapSpec& tr, double depth_freq_hz, int m_j) {
  if (depth_freq_hz < 0.0) throw std::domain_error("light_shift: depth must be >= 0");
  switch (m_j) {
    case 0:
      return tr.shift_fraction_mj0 * depth_freq_hz;
    case 1:
    case -1:
      return tr.shift_fraction_mj1 * depth_freq_hz;
    default:
      throw std::domain_error("light_shift: m_j must be 0 or +-1");
  }
}

double rayleigh_range(const TrapSpec& tr) {
  if (!(tr.waist_m > 0.0)) throw std::domain_error("rayleigh_range: zero waist");
  return pi * tr.waist_m * tr.waist_m / tr.trap_wavelength_m;
}

TrapFrequencies trap_frequencies(const TransitionSpec& t, const TrapSpec& tr,
                                 double power_w) {
  if (!(power_w > 0.0)) throw std::domain_error("trap_frequencies: power must be > 0");
  if (!(tr.waist_m > 0.0)) throw std::domain_error("trap_frequencies: zero waist");
  const double u = trap_depth(tr, power_w).depth_joule;
  const double m = t.atom_mass_kg;
  const double zr = rayleigh_range(tr);
  TrapFrequencies f;
  f.radial_hz = std::sqrt(4.0 * u / (m * tr.waist_m * tr.waist_m)) / (2.0 * pi);
  f.axial_hz = std::sqrt(2.0 * u / (m * zr * zr)) / (2.0 * pi);
  return f;
}

Recoil recoil(const TransitionSpec& t) {
  validate(t);
  const double k = 2.0 * pi / t.wavelength_m;
  Recoil r;
  r.velocity_ms = hbar * k / t.atom_mass_kg;
  r.temperature_k = hbar * hbar * k * k / (t.atom_mass_kg * k_B);
  return r;
}

double gaussian_potential(const TrapSpec& tr, double depth_j, double x, double y,
                          double z) {
  const double zr = rayleigh_range(tr);
  const double expand = 1.0 + (z / zr) * (z / zr);
  const double w2 = tr.waist_m * tr.waist_m * expand;
  const double r2 = x * x + y * y;
  return -depth_j / expand * std::exp(-2.0 * r2 / w2);
}

LineFit fit_light_shift_slope(const std::vector<ShiftPoint>& points) {
  if (points.size() < 2)
    throw std::invalid_argument("fit_light_shift_slope: need >= 2 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(points.size());
  for (const auto& p : points) {
    sx += p.power_w;
    sy += p.shift_hz;
    sxx += p.power_w * p.power_w;
    sxy += p.power_w * p.shift_hz;
  }
  const double det = n * sxx - sx * sx;
  // all powers equal -> singular normal equations
  if (std::abs(det) <= 1e-12 * (n * sxx + sx * sx + 1e-300))
    throw std::invalid_argument("fit_light_shift_slope: powers are degenerate");
  LineFit f;
  f.slope = (n * sxy - sx * sy) / det;
  f.intercept = (sy * sxx - sx * sxy) / det;
  return f;
}

}  // namespace twz
