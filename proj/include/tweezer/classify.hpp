#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "tweezer/camera.hpp"

namespace twz {

// Per-site classifier parameters learned from data. a_p is the per-pixel
// expected signal of an occupied site on top of the background template b_p.
struct SiteCalibration {
  int site = 0;
  int roi_px = 7;
  std::vector<double> bright_template;      // a_p, counts
  std::vector<double> background_template;  // b_p, counts
  double read_noise_counts = 0.0;
  double prior_bright = 0.5;
  // 1D two-component mixture on total ROI counts.
  double mu_dark = 0.0, sigma_dark = 1.0;
  double mu_bright = 0.0, sigma_bright = 1.0;
  double threshold = 0.0;
};

struct SiteFrameLabel {
  bool bright = false;
  double score = 0.0;  // log-likelihood ratio; > 0 <=> bright
};

struct ClassifiedStack {
  double exposure_s = 0.0;
  double frame_period_s = 0.0;
  std::int64_t frames_per_record = 0;  // 0: single record
  // labels[site][frame]
  std::vector<std::vector<SiteFrameLabel>> labels;

  int n_sites() const { return static_cast<int>(labels.size()); }
};

struct CalibrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Total ROI counts of one site in one frame.
double roi_total(const Frame& f, const GridLayout& layout, int site);

// EM fit of a two-component mixture on total ROI counts, then per-pixel
// template estimation from the implied labels. Throws CalibrationError when
// the components are closer than 3 sigma (unimodal data).
std::vector<SiteCalibration> calibrate(const FrameStack& stack,
                                       double read_noise_counts,
                                       std::size_t min_frames = 200);

// Baseline: total ROI counts against the error-minimizing threshold between
// the two fitted components. Tie-break: counts >= threshold => bright.
ClassifiedStack classify_threshold(const FrameStack& stack,
                                   const std::vector<SiteCalibration>& calib);

// Transfer a calibration to a different exposure: templates and component
// means scale linearly with exposure, the shot-noise part of the variances
// scales too, the read noise does not. The threshold is re-derived from the
// rescaled mixture. Lets short, poorly separated exposures reuse a
// calibration taken at high SNR.
SiteCalibration rescale_calibration(const SiteCalibration& calib,
                                    double exposure_ratio);

// Pixel-wise likelihood ratio of Poisson(b_p) vs Poisson(b_p + a_p), each
// convolved with the Gaussian read noise, plus the prior odds.
ClassifiedStack classify_bayes(const FrameStack& stack,
                               const std::vector<SiteCalibration>& calib);

// Log-likelihood of an observed pixel count under Poisson(lambda) convolved
// with Gaussian read noise (+-6 sigma integer window). Exposed for tests.
double log_poisson_gauss(double count, double lambda, double read_noise);

}  // namespace twz
