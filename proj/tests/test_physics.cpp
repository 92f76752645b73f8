#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "tweezer/physics.hpp"
#include "tweezer/units.hpp"

using namespace twz;
using namespace twz::consts;

namespace {
const TransitionSpec yb = TransitionSpec::yb174_green();
}

TEST_CASE("scattering rate closed form") {
  CHECK(scattering_rate(yb, 0.0, 0.0) == 0.0);
  CHECK(scattering_rate(yb, 0.0, -3.0) == 0.0);
  // s=1 on resonance: a quarter of Gamma
  CHECK(scattering_rate(yb, 1.0, 0.0) ==
        doctest::Approx(yb.linewidth_gamma_rad / 4.0).epsilon(1e-12));
  // s=3 at -1.5 Gamma: ratio 3/13
  CHECK(scattering_rate_ratio(3.0, -1.5) == doctest::Approx(3.0 / 13.0));
  CHECK_THROWS_AS(scattering_rate(yb, -0.1, 0.0), std::domain_error);
}

TEST_CASE("scattering rate monotone in s, even in detuning, below Gamma/2") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> us(0.0, 50.0), ud(-5.0, 5.0);
  for (int i = 0; i < 2000; ++i) {
    const double s = us(rng), d = ud(rng);
    CHECK(scattering_rate_ratio(s, d) == doctest::Approx(scattering_rate_ratio(s, -d)));
    CHECK(scattering_rate(yb, s, d) < yb.linewidth_gamma_rad / 2.0);
    CHECK(scattering_rate_ratio(s + 0.5, d) >= scattering_rate_ratio(s, d));
  }
}

TEST_CASE("Doppler temperature") {
  // minimum over detuning at s->0 equals hbar*Gamma/(2 k_B) = 4.37 uK
  const double t_min = doppler_limit_temperature(yb, 0.0, -0.5);
  CHECK(t_min == doctest::Approx(hbar * yb.linewidth_gamma_rad / (2.0 * k_B)));
  CHECK(t_min == doctest::Approx(4.37e-6).epsilon(0.01));
  // s=3 at -1.5 Gamma: (hbar Gamma / 8 kB) * 13 / 1.5
  CHECK(doppler_limit_temperature(yb, 3.0, -1.5) ==
        doctest::Approx(hbar * yb.linewidth_gamma_rad / (8.0 * k_B) * 13.0 / 1.5));
  CHECK(doppler_limit_temperature(yb, 3.0, -1.5) == doctest::Approx(9.5e-6).epsilon(0.02));
  CHECK_THROWS_AS(doppler_limit_temperature(yb, 1.0, 0.5), std::domain_error);
  CHECK_THROWS_AS(doppler_limit_temperature(yb, 1.0, 0.0), std::domain_error);
}

TEST_CASE("Doppler minimum at |delta| = 0.5 sqrt(1+s), by grid search") {
  for (double s : {0.0, 1.0, 3.0, 8.0}) {
    double best_d = 0, best_t = 1e300;
    for (double d = -5.0; d < -0.01; d += 0.001) {
      const double t = doppler_limit_temperature(yb, s, d);
      if (t < best_t) {
        best_t = t;
        best_d = d;
      }
    }
    CHECK(best_d == doctest::Approx(-0.5 * std::sqrt(1.0 + s)).epsilon(0.01));
  }
}

TEST_CASE("saturation intensity") {
  const double isat = saturation_intensity(yb);
  CHECK(isat == doctest::Approx(1.385).epsilon(0.005));  // W/m^2
  auto doubled = yb;
  doubled.linewidth_gamma_rad *= 2.0;
  CHECK(saturation_intensity(doubled) == doctest::Approx(2.0 * isat));
  auto redder = yb;
  redder.wavelength_m *= 2.0;
  CHECK(saturation_intensity(redder) == doctest::Approx(isat / 8.0));
}

TEST_CASE("trap depth calibration chain") {
  TrapSpec tr;
  const auto d = trap_depth(tr, 6e-3);
  CHECK(d.depth_freq_hz == doctest::Approx(6e6));
  CHECK(d.depth_temp_k == doctest::Approx(0.288e-3).epsilon(0.002));
  CHECK(trap_depth(tr, 0.0).depth_freq_hz == 0.0);
  CHECK_THROWS_AS(trap_depth(tr, -1e-3), std::domain_error);
  // linear in power to machine precision
  CHECK(trap_depth(tr, 2e-3).depth_freq_hz * 3.0 ==
        doctest::Approx(trap_depth(tr, 6e-3).depth_freq_hz).epsilon(1e-14));
}

TEST_CASE("light shift") {
  TrapSpec tr;
  CHECK(light_shift(tr, 6e6, 0) == doctest::Approx(96e3));
  // within 10% of Gamma/2 = 91 kHz
  CHECK(std::abs(light_shift(tr, 6e6, 0) - 91e3) / 91e3 < 0.10);
  CHECK(light_shift(tr, 0.0, 0) == 0.0);
  CHECK(light_shift(tr, 0.0, 1) == 0.0);
  CHECK(light_shift(tr, 6e6, 1) == light_shift(tr, 6e6, -1));
  CHECK_THROWS_AS(light_shift(tr, 6e6, 2), std::domain_error);
}

TEST_CASE("trap frequencies") {
  TrapSpec tr;
  const auto f = trap_frequencies(yb, tr, 6e-3);
  CHECK(f.radial_hz == doctest::Approx(53.3e3).epsilon(0.01));
  CHECK(f.axial_hz == doctest::Approx(9.12e3).epsilon(0.01));
  // radial frequency scales as sqrt(power)
  const auto f4 = trap_frequencies(yb, tr, 24e-3);
  CHECK(f4.radial_hz == doctest::Approx(2.0 * f.radial_hz).epsilon(1e-12));
  // ratio independent of power: sqrt(2) z_R / w0
  const double expect = std::sqrt(2.0) * rayleigh_range(tr) / tr.waist_m;
  CHECK(f.radial_hz / f.axial_hz == doctest::Approx(expect).epsilon(1e-12));
  CHECK(f4.radial_hz / f4.axial_hz == doctest::Approx(expect).epsilon(1e-12));
  CHECK_THROWS_AS(trap_frequencies(yb, tr, 0.0), std::domain_error);
}

TEST_CASE("recoil") {
  const auto r = recoil(yb);
  CHECK(r.velocity_ms == doctest::Approx(4.12e-3).epsilon(0.01));
  CHECK(r.temperature_k == doctest::Approx(0.356e-6).epsilon(0.01));
  auto half = yb;
  half.atom_mass_kg /= 2.0;
  CHECK(recoil(half).velocity_ms == doctest::Approx(2.0 * r.velocity_ms));
}

TEST_CASE("light shift slope fit") {
  TrapSpec tr;
  // exact line: 16 kHz/mW through the origin
  std::vector<ShiftPoint> pts;
  for (double mw : {1.0, 3.0, 5.0}) {
    const double p = mw * 1e-3;
    pts.push_back({p, light_shift(tr, trap_depth(tr, p).depth_freq_hz, 0)});
  }
  const auto fit = fit_light_shift_slope(pts);
  CHECK(fit.slope * 1e-3 == doctest::Approx(16e3).epsilon(1e-10));
  CHECK(std::abs(fit.intercept) < 1e-6);
  // slope / depth_per_power recovers the shift fraction to 1e-10 relative
  CHECK(fit.slope / tr.depth_per_power_hz_w ==
        doctest::Approx(tr.shift_fraction_mj0).epsilon(1e-10));

  CHECK_THROWS(fit_light_shift_slope({{1e-3, 16e3}}));
  CHECK_THROWS(fit_light_shift_slope({{1e-3, 16e3}, {1e-3, 17e3}, {1e-3, 15e3}}));
}

TEST_CASE("light shift slope fit with noise recovers truth within 3 sigma") {
  TrapSpec tr;
  std::mt19937_64 rng(42);
  std::normal_distribution<double> noise(0.0, 5e3);
  std::vector<ShiftPoint> pts;
  double sxx = 0, sx = 0;
  for (int i = 0; i < 10; ++i) {
    const double p = (1.0 + i) * 1e-3;
    pts.push_back({p, light_shift(tr, trap_depth(tr, p).depth_freq_hz, 0) + noise(rng)});
    sx += p;
    sxx += p * p;
  }
  const auto fit = fit_light_shift_slope(pts);
  const double n = 10.0;
  const double sigma_slope = 5e3 / std::sqrt(sxx - sx * sx / n);
  CHECK(std::abs(fit.slope - 1.6e7) < 3.0 * sigma_slope);
}

TEST_CASE("transition spec invariants") {
  CHECK_THROWS_AS(TransitionSpec::from_hz(-1.0, 182e3, 1e-25), std::domain_error);
  CHECK_THROWS_AS(TransitionSpec::from_hz(556e-9, 0.0, 1e-25), std::domain_error);
  CHECK_THROWS_AS(TransitionSpec::from_hz(556e-9, 182e3, 0.0), std::domain_error);
}
