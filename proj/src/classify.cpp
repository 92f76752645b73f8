#include "tweezer/classify.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "tweezer/units.hpp"

namespace twz {

namespace {

constexpr double kLogFloor = -745.0;

double log_gauss(double x, double sigma) {
  return -0.5 * x * x / (sigma * sigma) -
         std::log(sigma * std::sqrt(2.0 * consts::pi));
}

double gauss_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * consts::pi));
}

double gauss_cdf(double x, double mu, double sigma) {
  return 0.5 * std::erfc(-(x - mu) / (sigma * std::sqrt(2.0)));
}

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double idx = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(idx);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (idx - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct Mixture {
  double w0, mu0, s0;
  double w1, mu1, s1;  // mu1 >= mu0
};

Mixture fit_mixture_em(const std::vector<double>& x) {
  Mixture m;
  m.mu0 = percentile(x, 0.10);
  m.mu1 = percentile(x, 0.90);
  double mean = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size());
  m.s0 = m.s1 = std::max(std::sqrt(var) / 2.0, 1e-3);
  m.w0 = m.w1 = 0.5;

  std::vector<double> r1(x.size());
  for (int iter = 0; iter < 300; ++iter) {
    double n1 = 0, sum1 = 0, n0 = 0, sum0 = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double p0 = m.w0 * gauss_pdf(x[i], m.mu0, m.s0);
      const double p1 = m.w1 * gauss_pdf(x[i], m.mu1, m.s1);
      const double r = p1 / std::max(p0 + p1, 1e-300);
      r1[i] = r;
      n1 += r;
      sum1 += r * x[i];
      n0 += 1.0 - r;
      sum0 += (1.0 - r) * x[i];
    }
    if (n0 < 1e-9 || n1 < 1e-9) break;
    const double mu0_new = sum0 / n0, mu1_new = sum1 / n1;
    double v0 = 0, v1 = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      v0 += (1.0 - r1[i]) * (x[i] - mu0_new) * (x[i] - mu0_new);
      v1 += r1[i] * (x[i] - mu1_new) * (x[i] - mu1_new);
    }
    const double delta = std::abs(mu0_new - m.mu0) + std::abs(mu1_new - m.mu1);
    m.mu0 = mu0_new;
    m.mu1 = mu1_new;
    m.s0 = std::max(std::sqrt(v0 / n0), 1e-3);
    m.s1 = std::max(std::sqrt(v1 / n1), 1e-3);
    m.w0 = n0 / static_cast<double>(x.size());
    m.w1 = n1 / static_cast<double>(x.size());
    if (delta < 1e-9) break;
  }
  if (m.mu0 > m.mu1) {
    std::swap(m.mu0, m.mu1);
    std::swap(m.s0, m.s1);
    std::swap(m.w0, m.w1);
  }
  return m;
}

double min_error_threshold(const Mixture& m) {
  // Scan the interval between the component means for the decision point
  // minimizing the mixture-weighted overlap.
  const double lo = m.mu0, hi = m.mu1;
  double best_x = 0.5 * (lo + hi), best_e = 1e300;
  const int n = 4000;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / n;
    const double e = m.w0 * (1.0 - gauss_cdf(x, m.mu0, m.s0)) +
                     m.w1 * gauss_cdf(x, m.mu1, m.s1);
    if (e < best_e) {
      best_e = e;
      best_x = x;
    }
  }
  return best_x;
}

}  // namespace

double roi_total(const Frame& f, const GridLayout& layout, int site) {
  const auto o = layout.roi_origin(site);
  double sum = 0.0;
  for (int dy = 0; dy < layout.roi_px; ++dy)
    for (int dx = 0; dx < layout.roi_px; ++dx)
      sum += f.at(o[0] + dx, o[1] + dy);
  return sum;
}

std::vector<SiteCalibration> calibrate(const FrameStack& stack,
                                       double read_noise_counts,
                                       std::size_t min_frames) {
  if (stack.frames.size() < min_frames)
    throw CalibrationError("calibrate: not enough frames");
  const auto& layout = stack.layout;
  std::vector<SiteCalibration> out;
  out.reserve(layout.n_sites());

  for (int site = 0; site < layout.n_sites(); ++site) {
    std::vector<double> totals(stack.frames.size());
    for (std::size_t k = 0; k < stack.frames.size(); ++k)
      totals[k] = roi_total(stack.frames[k], layout, site);

    const Mixture m = fit_mixture_em(totals);
    if (m.mu1 - m.mu0 < 3.0 * std::max(m.s0, m.s1))
      throw CalibrationError("calibrate: components closer than 3 sigma at site " +
                             std::to_string(site));

    SiteCalibration c;
    c.site = site;
    c.roi_px = layout.roi_px;
    c.read_noise_counts = read_noise_counts;
    c.mu_dark = m.mu0;
    c.sigma_dark = m.s0;
    c.mu_bright = m.mu1;
    c.sigma_bright = m.s1;
    c.threshold = min_error_threshold(m);

    const int npx = layout.roi_px * layout.roi_px;
    std::vector<double> dark_sum(npx, 0.0), bright_sum(npx, 0.0);
    std::size_t n_dark = 0, n_bright = 0;
    const auto o = layout.roi_origin(site);
    for (std::size_t k = 0; k < stack.frames.size(); ++k) {
      const bool bright = totals[k] >= c.threshold;
      auto& acc = bright ? bright_sum : dark_sum;
      (bright ? n_bright : n_dark)++;
      int i = 0;
      for (int dy = 0; dy < layout.roi_px; ++dy)
        for (int dx = 0; dx < layout.roi_px; ++dx, ++i)
          acc[i] += stack.frames[k].at(o[0] + dx, o[1] + dy);
    }
    if (n_dark == 0 || n_bright == 0)
      throw CalibrationError("calibrate: a class is empty at site " +
                             std::to_string(site));
    c.background_template.resize(npx);
    c.bright_template.resize(npx);
    for (int i = 0; i < npx; ++i) {
      const double b = dark_sum[i] / static_cast<double>(n_dark);
      const double ab = bright_sum[i] / static_cast<double>(n_bright);
      c.background_template[i] = std::max(b, 0.0);
      c.bright_template[i] = std::max(ab - b, 0.0);
    }
    double asum = 0.0;
    for (double a : c.bright_template) asum += a;
    if (!(asum > 0.0))
      throw CalibrationError("calibrate: empty bright template at site " +
                             std::to_string(site));
    c.prior_bright = std::clamp(
        static_cast<double>(n_bright) / static_cast<double>(totals.size()), 1e-4,
        1.0 - 1e-4);
    out.push_back(std::move(c));
  }
  return out;
}

SiteCalibration rescale_calibration(const SiteCalibration& calib,
                                    double exposure_ratio) {
  if (!(exposure_ratio > 0.0))
    throw std::domain_error("rescale_calibration: exposure ratio must be > 0");
  SiteCalibration s = calib;
  for (auto& v : s.background_template) v *= exposure_ratio;
  for (auto& v : s.bright_template) v *= exposure_ratio;
  const double npx = static_cast<double>(calib.roi_px) * calib.roi_px;
  const double read_var = npx * calib.read_noise_counts * calib.read_noise_counts;
  const auto scale_sigma = [&](double sigma) {
    const double shot = std::max(sigma * sigma - read_var, 0.0);
    return std::max(std::sqrt(shot * exposure_ratio + read_var), 1e-3);
  };
  s.mu_dark = calib.mu_dark * exposure_ratio;
  s.mu_bright = calib.mu_bright * exposure_ratio;
  s.sigma_dark = scale_sigma(calib.sigma_dark);
  s.sigma_bright = scale_sigma(calib.sigma_bright);
  const Mixture m{1.0 - calib.prior_bright, s.mu_dark,   s.sigma_dark,
                  calib.prior_bright,       s.mu_bright, s.sigma_bright};
  s.threshold = min_error_threshold(m);
  return s;
}

ClassifiedStack classify_threshold(const FrameStack& stack,
                                   const std::vector<SiteCalibration>& calib) {
  if (static_cast<int>(calib.size()) != stack.layout.n_sites())
    throw std::invalid_argument("classify_threshold: calibration/site mismatch");
  ClassifiedStack cs;
  cs.exposure_s = stack.exposure_s;
  cs.frame_period_s = stack.frame_period_s;
  cs.frames_per_record = stack.frames_per_record;
  cs.labels.resize(calib.size());
  for (std::size_t site = 0; site < calib.size(); ++site) {
    auto& row = cs.labels[site];
    row.resize(stack.frames.size());
    for (std::size_t k = 0; k < stack.frames.size(); ++k) {
      const double total =
          roi_total(stack.frames[k], stack.layout, static_cast<int>(site));
      row[k].score = total - calib[site].threshold;
      row[k].bright = total >= calib[site].threshold;
    }
  }
  return cs;
}

double log_poisson_gauss(double count, double lambda, double read_noise) {
  if (read_noise < 1e-12) {
    const long long k = std::llround(count);
    if (k < 0) return kLogFloor;
    if (lambda <= 0.0) return k == 0 ? 0.0 : kLogFloor;
    return k * std::log(lambda) - lambda - std::lgamma(k + 1.0);
  }
  const long long c = std::llround(count);
  const long long w = static_cast<long long>(std::ceil(6.0 * read_noise)) + 1;
  const long long n_lo = std::max<long long>(0, c - w);
  const long long n_hi = c + w;
  if (n_hi < n_lo) return kLogFloor;
  // Gaussian read noise integrated over the count bin [c-0.5, c+0.5], so the
  // distribution is exactly normalized over the integer counts.
  const double inv = 1.0 / (std::numbers::sqrt2 * read_noise);
  double best = kLogFloor;
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(n_hi - n_lo + 1));
  for (long long n = n_lo; n <= n_hi; ++n) {
    double lp;
    if (lambda <= 0.0)
      lp = n == 0 ? 0.0 : kLogFloor;
    else
      lp = n * std::log(lambda) - lambda - std::lgamma(n + 1.0);
    const double x = static_cast<double>(c - n);
    const double bin =
        0.5 * (std::erf((x + 0.5) * inv) - std::erf((x - 0.5) * inv));
    const double t = lp + (bin > 0.0 ? std::log(bin) : kLogFloor);
    terms.push_back(t);
    best = std::max(best, t);
  }
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - best);
  return std::max(best + std::log(sum), kLogFloor);
}

ClassifiedStack classify_bayes(const FrameStack& stack,
                               const std::vector<SiteCalibration>& calib) {
  if (static_cast<int>(calib.size()) != stack.layout.n_sites())
    throw std::invalid_argument("classify_bayes: calibration/site mismatch");
  ClassifiedStack cs;
  cs.exposure_s = stack.exposure_s;
  cs.frame_period_s = stack.frame_period_s;
  cs.frames_per_record = stack.frames_per_record;
  cs.labels.resize(calib.size());

  for (std::size_t site = 0; site < calib.size(); ++site) {
    const auto& c = calib[site];
    const int npx = c.roi_px * c.roi_px;
    const double log_prior_odds =
        std::log(c.prior_bright / (1.0 - c.prior_bright));

    // Per-pixel log-LR cached by count; counts beyond the cache fall back to
    // direct evaluation.
    const int cache_max = 512;
    std::vector<std::vector<double>> llr(npx);
    for (int p = 0; p < npx; ++p) {
      llr[p].resize(cache_max + 1);
      const double b = c.background_template[p];
      const double a = c.bright_template[p];
      for (int cnt = 0; cnt <= cache_max; ++cnt)
        llr[p][cnt] = log_poisson_gauss(cnt, b + a, c.read_noise_counts) -
                      log_poisson_gauss(cnt, b, c.read_noise_counts);
    }

    const auto o = stack.layout.roi_origin(static_cast<int>(site));
    auto& row = cs.labels[site];
    row.resize(stack.frames.size());
    for (std::size_t k = 0; k < stack.frames.size(); ++k) {
      double score = log_prior_odds;
      int p = 0;
      for (int dy = 0; dy < c.roi_px; ++dy) {
        for (int dx = 0; dx < c.roi_px; ++dx, ++p) {
          const std::int32_t cnt = stack.frames[k].at(o[0] + dx, o[1] + dy);
          if (cnt >= 0 && cnt <= cache_max) {
            score += llr[p][cnt];
          } else {
            score +=
                log_poisson_gauss(cnt, c.background_template[p] + c.bright_template[p],
                                  c.read_noise_counts) -
                log_poisson_gauss(cnt, c.background_template[p], c.read_noise_counts);
          }
        }
      }
      row[k].score = score;
      row[k].bright = score > 0.0;
    }
  }
  return cs;
}

}  // namespace twz
