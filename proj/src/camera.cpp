#include "tweezer/camera.hpp"

#include <cmath>
#include <stdexcept>

#include "tweezer/units.hpp"

namespace twz {

void CameraSpec::validate() const {
  if (!(quantum_efficiency > 0.0 && quantum_efficiency <= 1.0) ||
      !(optics_transmission > 0.0 && optics_transmission <= 1.0))
    throw std::domain_error("CameraSpec: efficiencies must be in (0,1]");
  if (read_noise_e < 0.0) throw std::domain_error("CameraSpec: read noise >= 0");
  if (roi_px < 1 || roi_px % 2 == 0)
    throw std::domain_error("CameraSpec: roi_px must be odd and positive");
  if (!(pixel_pitch_m > 0.0)) throw std::domain_error("CameraSpec: pixel pitch > 0");
  if (background_rate_per_tweezer < 0.0)
    throw std::domain_error("CameraSpec: background rate >= 0");
}

double PSFModel::effective_sigma_m() const {
  if (!(sigma_m > 0.0)) throw std::domain_error("PSFModel: sigma must be > 0");
  return std::sqrt(sigma_m * sigma_m + blur_sigma_m * blur_sigma_m);
}

std::int64_t Frame::total() const {
  std::int64_t s = 0;
  for (auto c : counts) s += c;
  return s;
}

std::array<int, 2> GridLayout::roi_origin(int site) const {
  const int r = site / cols;
  const int c = site % cols;
  return {c * roi_px, r * roi_px};
}

std::array<double, 2> GridLayout::site_center(int site) const {
  const auto o = roi_origin(site);
  const double half = 0.5 * static_cast<double>(roi_px);
  return {static_cast<double>(o[0]) + half, static_cast<double>(o[1]) + half};
}

double collection_efficiency(double na) {
  if (!(na > 0.0 && na < 1.0))
    throw std::domain_error("collection_efficiency: NA must be in (0,1)");
  return 0.5 * (1.0 - std::sqrt(1.0 - na * na));
}

double expected_signal(const ImagingSpec& imaging, const TransitionSpec& transition,
                       const CameraSpec& camera, double na) {
  camera.validate();
  const double r_sc =
      scattering_rate(transition, imaging.saturation, imaging.detuning);
  return r_sc * collection_efficiency(na) * camera.optics_transmission *
         camera.quantum_efficiency * imaging.exposure_s;
}

Frame render_frame(const std::vector<std::int64_t>& photons_per_site,
                   const GridLayout& layout, const PSFModel& psf,
                   const CameraSpec& camera, int n_tweezers_total,
                   double exposure_s, double eta_total, std::uint64_t seed) {
  camera.validate();
  if (static_cast<int>(photons_per_site.size()) != layout.n_sites())
    throw std::domain_error("render_frame: photon budget / site list mismatch");
  if (!(eta_total > 0.0 && eta_total <= 1.0))
    throw std::domain_error("render_frame: eta_total must be in (0,1]");
  for (auto n : photons_per_site)
    if (n < 0) throw std::domain_error("render_frame: negative photon budget");

  Frame f;
  f.width = layout.width();
  f.height = layout.height();
  f.counts.assign(static_cast<std::size_t>(f.width) * f.height, 0);
  f.site_centers.reserve(layout.n_sites());
  for (int s = 0; s < layout.n_sites(); ++s)
    f.site_centers.push_back(layout.site_center(s));

  Rng rng(seed);
  const double sigma_px = psf.effective_sigma_m() / camera.pixel_pitch_m;
  std::normal_distribution<double> gauss(0.0, sigma_px);

  for (int s = 0; s < layout.n_sites(); ++s) {
    std::int64_t detected = 0;
    if (photons_per_site[s] > 0) {
      std::binomial_distribution<std::int64_t> bin(photons_per_site[s], eta_total);
      detected = bin(rng);
    }
    const auto ctr = layout.site_center(s);
    for (std::int64_t k = 0; k < detected; ++k) {
      const int px = static_cast<int>(std::floor(ctr[0] + gauss(rng)));
      const int py = static_cast<int>(std::floor(ctr[1] + gauss(rng)));
      if (px >= 0 && px < f.width && py >= 0 && py < f.height) ++f.at(px, py);
    }
  }

  const double bg_mean =
      camera.background_rate_per_tweezer * n_tweezers_total * exposure_s;
  if (bg_mean > 0.0) {
    std::poisson_distribution<std::int32_t> bg(bg_mean);
    for (auto& c : f.counts) c += bg(rng);
  }
  const double rn = camera.read_noise_e * camera.gain;
  if (rn > 0.0) {
    std::normal_distribution<double> read(0.0, rn);
    for (auto& c : f.counts) c += static_cast<std::int32_t>(std::lround(read(rng)));
  }
  if (camera.clamp_negative)
    for (auto& c : f.counts) c = std::max(c, 0);
  return f;
}

}  // namespace twz
