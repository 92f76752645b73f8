#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "tweezer/physics.hpp"
#include "tweezer/rng.hpp"

namespace twz {

struct CameraSpec {
  double pixel_pitch_m = 300e-9;  // object-plane meters per pixel
  int roi_px = 7;                 // per-site ROI, odd, square
  double quantum_efficiency = 0.72;
  double optics_transmission = 0.70;
  double read_noise_e = 1.5;  // electrons rms per pixel
  double gain = 1.0;          // counts per electron
  // Trap auto-fluorescence, counts/pixel/s per tweezer. Scales with the total
  // tweezer count; the coefficient is a calibration default, not a measured
  // value.
  double background_rate_per_tweezer = 2.0;
  bool clamp_negative = true;

  void validate() const;
};

struct PSFModel {
  double sigma_m = 0.21 * 556e-9 / 0.6;  // Gaussian PSF width, 0.21*lambda/NA
  double blur_sigma_m = 74e-9;  // thermal position spread, added in quadrature

  double effective_sigma_m() const;
};

struct Frame {
  int width = 0;
  int height = 0;
  std::vector<std::int32_t> counts;            // row-major
  std::vector<std::array<double, 2>> site_centers;  // sub-pixel (x, y)

  std::int32_t& at(int x, int y) { return counts[static_cast<std::size_t>(y) * width + x]; }
  std::int32_t at(int x, int y) const { return counts[static_cast<std::size_t>(y) * width + x]; }
  std::int64_t total() const;
};

// Square grid of per-site ROIs tiling the sensor.
struct GridLayout {
  int rows = 1;
  int cols = 1;
  int roi_px = 7;

  int n_sites() const { return rows * cols; }
  int width() const { return cols * roi_px; }
  int height() const { return rows * roi_px; }
  // Top-left pixel of site's ROI.
  std::array<int, 2> roi_origin(int site) const;
  std::array<double, 2> site_center(int site) const;
};

struct FrameStack {
  GridLayout layout;
  double exposure_s = 0.0;
  double frame_period_s = 0.0;
  // Frames are concatenated records (independent movies); pair statistics
  // must not cross record boundaries. 0 means a single record.
  std::int64_t frames_per_record = 0;
  std::uint64_t seed = 0;
  std::vector<Frame> frames;
};

// Solid-angle collection fraction of an objective: (1 - sqrt(1 - NA^2))/2.
double collection_efficiency(double na);

// Expected detected counts per atom per frame through the full chain.
double expected_signal(const ImagingSpec& imaging, const TransitionSpec& transition,
                       const CameraSpec& camera, double na = 0.6);

// Render one frame from per-site emitted-photon budgets. Each emitted photon
// is detected with probability eta_total and lands at a PSF-distributed
// sub-pixel position; background and read noise are per-pixel.
Frame render_frame(const std::vector<std::int64_t>& photons_per_site,
                   const GridLayout& layout, const PSFModel& psf,
                   const CameraSpec& camera, int n_tweezers_total,
                   double exposure_s, double eta_total, std::uint64_t seed);

}  // namespace twz
