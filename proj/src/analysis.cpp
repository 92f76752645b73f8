#include "tweezer/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

#include "tweezer/parallel.hpp"

namespace twz {

namespace {

// Regularized incomplete beta via Lentz continued fraction.
double betacf(double a, double b, double x) {
  const int max_it = 300;
  const double eps = 3e-14, fpmin = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::abs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_it; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) break;
  }
  return h;
}

double betainc(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                    a * std::log(x) + b * std::log(1.0 - x);
  const double bt = std::exp(ln);
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
  return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

double beta_quantile(double a, double b, double q) {
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (betainc(a, b, mid) < q ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

RatioCI wilson_interval(std::int64_t k, std::int64_t n, double z) {
  RatioCI ci;
  ci.numerator = k;
  ci.denominator = n;
  if (n <= 0) return ci;
  ci.has_data = true;
  const double p = static_cast<double>(k) / static_cast<double>(n);
  ci.p = p;
  const double z2 = z * z, nn = static_cast<double>(n);
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half =
      z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  ci.lo = std::max(0.0, center - half);
  ci.hi = std::min(1.0, center + half);
  return ci;
}

RatioCI clopper_pearson(std::int64_t k, std::int64_t n, double conf) {
  RatioCI ci;
  ci.numerator = k;
  ci.denominator = n;
  if (n <= 0) return ci;
  ci.has_data = true;
  ci.p = static_cast<double>(k) / static_cast<double>(n);
  const double alpha = 1.0 - conf;
  ci.lo = k == 0 ? 0.0 : beta_quantile(k, n - k + 1.0, alpha / 2.0);
  ci.hi = k == n ? 1.0 : beta_quantile(k + 1.0, n - k, 1.0 - alpha / 2.0);
  return ci;
}

namespace {

// Record length for pair bookkeeping; 0 means the whole site row is one record.
std::int64_t record_len(const ClassifiedStack& stack, std::size_t n_frames) {
  return stack.frames_per_record > 0 ? stack.frames_per_record
                                     : static_cast<std::int64_t>(n_frames);
}

}  // namespace

TransitionStats transition_stats(const ClassifiedStack& stack) {
  TransitionStats st;
  st.exposure_s = stack.exposure_s;
  bool any = false;
  for (const auto& site : stack.labels) {
    const std::int64_t fpr = record_len(stack, site.size());
    if (site.size() >= 2) any = true;
    for (std::size_t i = 0; i + 1 < site.size(); ++i) {
      // records are independent movies; never pair across the boundary
      if (static_cast<std::int64_t>(i + 1) % fpr == 0) continue;
      const bool b0 = site[i].bright, b1 = site[i + 1].bright;
      if (b0 && b1) ++st.n_bb;
      else if (b0 && !b1) ++st.n_bd;
      else if (!b0 && b1) ++st.n_db;
      else ++st.n_dd;
    }
  }
  if (!any) throw std::domain_error("transition_stats: need >= 2 frames");
  st.p_bd = wilson_interval(st.n_bd, st.n_bb + st.n_bd);
  st.p_db = wilson_interval(st.n_db, st.n_db + st.n_dd);
  return st;
}

std::vector<JumpEvent> detect_jumps(const ClassifiedStack& stack, int min_dark,
                                    int min_bright) {
  std::vector<JumpEvent> events;
  for (int site = 0; site < stack.n_sites(); ++site) {
    const auto& lab = stack.labels[static_cast<std::size_t>(site)];
    const std::int64_t n = static_cast<std::int64_t>(lab.size());
    const std::int64_t fpr = record_len(stack, lab.size());
    for (std::int64_t r0 = 0; r0 < n; r0 += fpr) {
      const std::int64_t r1 = std::min(n, r0 + fpr);
      std::int64_t i = r0;
      while (i < r1) {
        if (lab[static_cast<std::size_t>(i)].bright) {
          ++i;
          continue;
        }
        std::int64_t j = i;
        while (j < r1 && !lab[static_cast<std::size_t>(j)].bright) ++j;
        const std::int64_t run = j - i;
        const bool preceded = i > r0 && lab[static_cast<std::size_t>(i - 1)].bright;
        if (preceded && run >= min_dark) {
          if (j == r1) {
            JumpEvent ev;
            ev.site = site;
            ev.start_frame = i;
            ev.end_frame = r1 - 1;
            ev.duration_s = static_cast<double>(run) * stack.frame_period_s;
            ev.right_censored = true;
            events.push_back(ev);
          } else {
            std::int64_t bright_after = 0;
            while (j + bright_after < r1 &&
                   lab[static_cast<std::size_t>(j + bright_after)].bright)
              ++bright_after;
            if (bright_after >= min_bright) {
              JumpEvent ev;
              ev.site = site;
              ev.start_frame = i;
              ev.end_frame = j - 1;
              ev.duration_s = static_cast<double>(run) * stack.frame_period_s;
              ev.right_censored = false;
              events.push_back(ev);
            }
          }
        }
        i = j;
      }
    }
  }
  return events;
}

ExpFit fit_exponential(const std::vector<double>& durations_s,
                       const std::vector<bool>& censored) {
  if (durations_s.size() != censored.size())
    throw std::invalid_argument("fit_exponential: size mismatch");
  double total = 0.0;
  std::size_t n_unc = 0;
  for (std::size_t i = 0; i < durations_s.size(); ++i) {
    if (durations_s[i] < 0.0)
      throw std::invalid_argument("fit_exponential: negative duration");
    total += durations_s[i];
    if (!censored[i]) ++n_unc;
  }
  if (n_unc < 5)
    throw std::invalid_argument("fit_exponential: need >= 5 uncensored events");
  ExpFit f;
  f.n_uncensored = n_unc;
  f.tau_s = total / static_cast<double>(n_unc);
  f.stderr_s = f.tau_s / std::sqrt(static_cast<double>(n_unc));
  return f;
}

JumpFloorFit fit_jump_floor(const std::vector<JumpFloorPoint>& points,
                            std::optional<double> fixed_tau_s) {
  if (points.size() < 3)
    throw std::invalid_argument("fit_jump_floor: need >= 3 exposures");
  if (fixed_tau_s) {
    if (!(*fixed_tau_s > 0.0))
      throw std::invalid_argument("fit_jump_floor: fixed tau must be > 0");
    const double tau = *fixed_tau_s;
    double sgg = 0.0, sgy = 0.0;
    bool weighted = true;
    for (const auto& p : points) {
      if (p.sigma <= 0.0) weighted = false;
      const double w = p.sigma > 0.0 ? 1.0 / (p.sigma * p.sigma) : 1.0;
      const double g = 1.0 - std::exp(-p.exposure_s / tau);
      sgg += w * g * g;
      sgy += w * g * p.p_db;
    }
    if (!(sgg > 0.0))
      throw std::runtime_error("fit_jump_floor: degenerate design");
    JumpFloorFit out;
    out.p_m = sgy / sgg;
    out.tau_m_s = tau;
    double chi2 = 0.0;
    for (const auto& p : points) {
      const double w = p.sigma > 0.0 ? 1.0 / (p.sigma * p.sigma) : 1.0;
      const double r = out.p_m * (1.0 - std::exp(-p.exposure_s / tau)) - p.p_db;
      chi2 += w * r * r;
    }
    out.chi2 = chi2;
    double scale = 1.0;
    if (!weighted && points.size() > 1)
      scale = chi2 / static_cast<double>(points.size() - 1);
    out.p_m_stderr = std::sqrt(scale / sgg);
    out.tau_m_stderr = 0.0;
    return out;
  }
  double tmin = 1e300, tmax = 0.0, pmax = 0.0;
  for (const auto& p : points) {
    tmin = std::min(tmin, p.exposure_s);
    tmax = std::max(tmax, p.exposure_s);
    pmax = std::max(pmax, p.p_db);
  }
  if (!(tmin > 0.0) || tmax / tmin < 3.0)
    throw std::invalid_argument(
        "fit_jump_floor: exposures must span a factor >= 3");
  if (!(pmax > 0.0))
    throw std::invalid_argument("fit_jump_floor: all points are zero");

  auto model = [](double t, double A, double tau) {
    return A * (1.0 - std::exp(-t / tau));
  };
  double A = pmax * 1.05;
  double tau = tmax;  // generic start; refined by damped Gauss-Newton

  double lambda = 1e-3;
  double prev_chi2 = 1e300;
  double jtj[2][2] = {{0, 0}, {0, 0}};
  for (int iter = 0; iter < 400; ++iter) {
    double g0 = 0, g1 = 0, chi2 = 0;
    jtj[0][0] = jtj[0][1] = jtj[1][0] = jtj[1][1] = 0;
    for (const auto& p : points) {
      const double w = p.sigma > 0.0 ? 1.0 / (p.sigma * p.sigma) : 1.0;
      const double e = std::exp(-p.exposure_s / tau);
      const double f = A * (1.0 - e);
      const double r = f - p.p_db;
      const double dA = 1.0 - e;
      const double dTau = -A * p.exposure_s / (tau * tau) * e;
      chi2 += w * r * r;
      g0 += w * r * dA;
      g1 += w * r * dTau;
      jtj[0][0] += w * dA * dA;
      jtj[0][1] += w * dA * dTau;
      jtj[1][1] += w * dTau * dTau;
    }
    jtj[1][0] = jtj[0][1];
    const double a00 = jtj[0][0] * (1.0 + lambda);
    const double a11 = jtj[1][1] * (1.0 + lambda);
    const double det = a00 * a11 - jtj[0][1] * jtj[0][1];
    if (std::abs(det) < 1e-300)
      throw std::runtime_error("fit_jump_floor: singular normal equations");
    const double dA_step = (-g0 * a11 + g1 * jtj[0][1]) / det;
    const double dTau_step = (-g1 * a00 + g0 * jtj[0][1]) / det;
    const double A_new = A + dA_step;
    const double tau_new = tau + dTau_step;
    if (A_new > 0.0 && tau_new > 0.0) {
      // evaluate chi2 at the candidate
      double chi2_new = 0;
      for (const auto& p : points) {
        const double w = p.sigma > 0.0 ? 1.0 / (p.sigma * p.sigma) : 1.0;
        const double r = model(p.exposure_s, A_new, tau_new) - p.p_db;
        chi2_new += w * r * r;
      }
      if (chi2_new <= chi2) {
        A = A_new;
        tau = tau_new;
        lambda = std::max(lambda * 0.5, 1e-12);
        // converge on the parameter step, not the chi2 decrement: the
        // latter flattens out early along the shallow A-tau valley
        if (std::abs(dA_step) < 1e-10 * std::abs(A) &&
            std::abs(dTau_step) < 1e-10 * std::abs(tau))
          break;
        prev_chi2 = chi2_new;
        continue;
      }
    }
    lambda *= 4.0;
    if (lambda > 1e12)
      throw std::runtime_error(
          "fit_jump_floor: no convergence (lambda overflow; chi2=" +
          std::to_string(prev_chi2) + ")");
  }

  JumpFloorFit out;
  out.p_m = A;
  out.tau_m_s = tau;
  // covariance from the undamped normal matrix
  const double det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[0][1];
  double chi2 = 0;
  bool weighted = true;
  for (const auto& p : points) {
    if (p.sigma <= 0.0) weighted = false;
    const double w = p.sigma > 0.0 ? 1.0 / (p.sigma * p.sigma) : 1.0;
    const double r = model(p.exposure_s, A, tau) - p.p_db;
    chi2 += w * r * r;
  }
  out.chi2 = chi2;
  if (det > 0.0) {
    double scale = 1.0;
    if (!weighted && points.size() > 2)
      scale = chi2 / static_cast<double>(points.size() - 2);
    out.p_m_stderr = std::sqrt(std::max(jtj[1][1] / det * scale, 0.0));
    out.tau_m_stderr = std::sqrt(std::max(jtj[0][0] / det * scale, 0.0));
  } else {
    // singular normal matrix: amplitude and time constant are degenerate
    // (all exposures in the linear regime); the parameters are unidentified
    out.p_m_stderr = std::numeric_limits<double>::infinity();
    out.tau_m_stderr = std::numeric_limits<double>::infinity();
  }
  return out;
}

TransitionStats excluded_error_rate(const ClassifiedStack& stack,
                                    const std::vector<JumpEvent>& jumps) {
  TransitionStats st = transition_stats(stack);
  // Remove pairs whose leading frame lies inside a detected jump event from
  // the d->b tally (the jump's return transition and its interior).
  std::int64_t removed_db = 0, removed_dd = 0;
  for (const auto& ev : jumps) {
    const auto& lab = stack.labels[static_cast<std::size_t>(ev.site)];
    const std::int64_t n = static_cast<std::int64_t>(lab.size());
    const std::int64_t fpr = record_len(stack, lab.size());
    for (std::int64_t i = ev.start_frame; i <= ev.end_frame && i + 1 < n; ++i) {
      if ((i + 1) % fpr == 0) continue;  // pair was never counted
      const bool b1 = lab[static_cast<std::size_t>(i + 1)].bright;
      if (b1) ++removed_db;
      else ++removed_dd;
    }
  }
  st.n_db -= removed_db;
  st.n_dd -= removed_dd;
  st.p_db = clopper_pearson(st.n_db, st.n_db + st.n_dd);
  return st;
}

TemperatureFit fit_temperature_rr(const std::vector<RRDataPoint>& measured,
                                  const TransitionSpec& transition,
                                  const TrapSpec& trap, double power_w,
                                  std::int64_t oracle_traj,
                                  const std::vector<double>& temperature_grid_k,
                                  std::uint64_t seed, int jobs) {
  if (measured.empty())
    throw std::invalid_argument("fit_temperature_rr: no data");
  if (oracle_traj < 10000)
    throw std::invalid_argument("fit_temperature_rr: need oracle_traj >= 1e4");
  if (temperature_grid_k.size() < 3)
    throw std::invalid_argument("fit_temperature_rr: grid needs >= 3 points");
  for (std::size_t i = 1; i < temperature_grid_k.size(); ++i)
    if (temperature_grid_k[i] <= temperature_grid_k[i - 1])
      throw std::invalid_argument("fit_temperature_rr: grid must be increasing");

  std::vector<double> times;
  times.reserve(measured.size());
  for (const auto& m : measured) times.push_back(m.t_s);

  // Common random numbers: the same master seed (hence the same trajectory
  // streams) for every grid temperature.
  std::vector<double> sse(temperature_grid_k.size(), 0.0);
  for (std::size_t g = 0; g < temperature_grid_k.size(); ++g) {
    const auto curve = release_recapture_curve(
        transition, trap, power_w, temperature_grid_k[g], times, oracle_traj,
        seed, jobs);
    double s = 0.0;
    for (std::size_t i = 0; i < measured.size(); ++i) {
      const double r = curve[i].p_recapture - measured[i].p;
      s += r * r;
    }
    sse[g] = s;
  }

  std::size_t best = 0;
  for (std::size_t g = 1; g < sse.size(); ++g)
    if (sse[g] < sse[best]) best = g;
  if (best == 0 || best + 1 == sse.size())
    throw std::runtime_error(
        "fit_temperature_rr: minimum on grid boundary; extend the temperature "
        "grid");

  // Quadratic through the bracketing triple (handles non-uniform grids).
  const double t0 = temperature_grid_k[best - 1], t1 = temperature_grid_k[best],
               t2 = temperature_grid_k[best + 1];
  const double f0 = sse[best - 1], f1 = sse[best], f2 = sse[best + 1];
  const double d01 = (f1 - f0) / (t1 - t0);
  const double d12 = (f2 - f1) / (t2 - t1);
  const double curv2 = (d12 - d01) / (t2 - t0);  // half of d2SSE/dT2
  if (!(curv2 > 0.0))
    throw std::runtime_error("fit_temperature_rr: objective not convex at minimum");
  const double t_star = 0.5 * (t0 + t1) - d01 / (2.0 * curv2) +
                        0.0;  // vertex of the interpolating parabola
  TemperatureFit fit;
  fit.temperature_k = t_star;
  const double dof = std::max<double>(1.0, static_cast<double>(measured.size()) - 1.0);
  const double s2 = sse[best] / dof;
  fit.stderr_k = std::sqrt(s2 / curv2);
  fit.objective = sse[best];
  return fit;
}

std::int64_t max_defect_free_size(double p_bd) {
  if (p_bd == 0.0) return -1;  // unbounded sentinel
  if (!(p_bd > 0.0 && p_bd < 1.0))
    throw std::domain_error("max_defect_free_size: p_bd must be in (0,1)");
  return static_cast<std::int64_t>(std::floor(1.0 / p_bd));
}

}  // namespace twz
