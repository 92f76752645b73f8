#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "tweezer/classify.hpp"
#include "tweezer/dynamics.hpp"

namespace twz {

struct RatioCI {
  // no-data is distinct from 0: has_data is false when the denominator is 0.
  bool has_data = false;
  double p = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::int64_t numerator = 0;
  std::int64_t denominator = 0;
};

// Wilson score interval; z = 1 gives the 68% interval matching X(Y) notation.
RatioCI wilson_interval(std::int64_t k, std::int64_t n, double z = 1.0);

// Clopper-Pearson, for near-zero counts.
RatioCI clopper_pearson(std::int64_t k, std::int64_t n, double conf = 0.68);

struct TransitionStats {
  double exposure_s = 0.0;
  std::int64_t n_bb = 0, n_bd = 0, n_db = 0, n_dd = 0;
  RatioCI p_bd;
  RatioCI p_db;

  std::int64_t total_pairs() const { return n_bb + n_bd + n_db + n_dd; }
};

struct JumpEvent {
  int site = 0;
  std::int64_t start_frame = 0;
  std::int64_t end_frame = 0;  // inclusive
  double duration_s = 0.0;
  bool right_censored = false;
};

struct ExpFit {
  double tau_s = 0.0;
  double stderr_s = 0.0;
  std::size_t n_uncensored = 0;
};

struct JumpFloorFit {
  double p_m = 0.0;
  double tau_m_s = 0.0;
  double p_m_stderr = 0.0;
  double tau_m_stderr = 0.0;
  double chi2 = 0.0;
};

struct JumpFloorPoint {
  double exposure_s = 0.0;
  double p_db = 0.0;
  double sigma = 0.0;  // <= 0: unweighted
};

struct TemperatureFit {
  double temperature_k = 0.0;
  double stderr_k = 0.0;
  double objective = 0.0;
};

struct RRDataPoint {
  double t_s = 0.0;
  double p = 0.0;
};

TransitionStats transition_stats(const ClassifiedStack& stack);

// Paper rule: a jump is a maximal run of >= min_dark dark frames immediately
// preceded by >= 1 bright frame and followed by >= min_bright bright frames.
// Dark runs reaching the end of the record come back right_censored instead.
std::vector<JumpEvent> detect_jumps(const ClassifiedStack& stack, int min_dark = 2,
                                    int min_bright = 2);

// Right-censored exponential MLE: tau = sum(durations) / n_uncensored.
ExpFit fit_exponential(const std::vector<double>& durations_s,
                       const std::vector<bool>& censored);

// Weighted least squares of p_db(t) = P_m (1 - exp(-t/tau_m)). When every
// exposure is short against tau_m the two parameters are degenerate; passing
// fixed_tau_s (e.g. from the jump-duration fit) pins the time constant and
// fits the amplitude alone.
JumpFloorFit fit_jump_floor(const std::vector<JumpFloorPoint>& points,
                            std::optional<double> fixed_tau_s = std::nullopt);

// Recomputes p_db with frames inside detected jump events removed from the
// d->b tally.
TransitionStats excluded_error_rate(const ClassifiedStack& stack,
                                    const std::vector<JumpEvent>& jumps);

// Least-squares match of measured p(t) against the Monte Carlo
// release-recapture oracle over a temperature grid, with common random
// numbers across grid points; parabolic interpolation around the minimum.
TemperatureFit fit_temperature_rr(const std::vector<RRDataPoint>& measured,
                                  const TransitionSpec& transition,
                                  const TrapSpec& trap, double power_w,
                                  std::int64_t oracle_traj,
                                  const std::vector<double>& temperature_grid_k,
                                  std::uint64_t seed, int jobs = 1);

// floor(1/p_bd); p_bd = 0 reports the unbounded sentinel (-1).
std::int64_t max_defect_free_size(double p_bd);

}  // namespace twz
