#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "tweezer/analysis.hpp"
#include "tweezer/rng.hpp"

using namespace twz;

namespace {

ClassifiedStack make_stack(const std::vector<std::string>& sites,
                           double frame_period_s = 30e-3,
                           std::int64_t frames_per_record = 0) {
  ClassifiedStack cs;
  cs.exposure_s = frame_period_s;
  cs.frame_period_s = frame_period_s;
  cs.frames_per_record = frames_per_record;
  for (const auto& seq : sites) {
    std::vector<SiteFrameLabel> row;
    for (char ch : seq) {
      SiteFrameLabel l;
      l.bright = ch == 'B';
      l.score = l.bright ? 1.0 : -1.0;
      row.push_back(l);
    }
    cs.labels.push_back(std::move(row));
  }
  return cs;
}

}  // namespace

TEST_CASE("interval estimators") {
  const auto w = wilson_interval(1, 3);
  CHECK(w.has_data);
  CHECK(w.p == doctest::Approx(1.0 / 3.0));
  CHECK(w.lo < w.p);
  CHECK(w.hi > w.p);
  CHECK(w.lo >= 0.0);
  CHECK(w.hi <= 1.0);
  // z=1 Wilson closed form at k=1, n=3
  CHECK(w.lo == doctest::Approx((1.0 / 3.0 + 1.0 / 6.0 -
                                 std::sqrt(2.0 / 27.0 + 1.0 / 36.0)) /
                                (4.0 / 3.0)));

  CHECK_FALSE(wilson_interval(0, 0).has_data);
  CHECK(wilson_interval(0, 100).lo == 0.0);
  CHECK(wilson_interval(100, 100).hi == doctest::Approx(1.0));

  // 2 residual errors in 5.4e4 occupied images: ~3e-5 with CI under 1e-4
  const auto cp = clopper_pearson(2, 54000);
  CHECK(cp.p == doctest::Approx(3.7e-5).epsilon(0.01));
  CHECK(cp.lo > 0.0);
  CHECK(cp.lo < cp.p);
  CHECK(cp.hi > cp.p);
  CHECK(cp.hi < 1e-4);
  const auto cp0 = clopper_pearson(0, 54000);
  CHECK(cp0.lo == 0.0);
  CHECK(cp0.hi > 0.0);
  CHECK(cp0.hi < 5e-5);
}

TEST_CASE("transition statistics: direct counting") {
  const auto st = transition_stats(make_stack({"BBBD"}));
  CHECK(st.n_bb == 2);
  CHECK(st.n_bd == 1);
  CHECK(st.n_db == 0);
  CHECK(st.n_dd == 0);
  CHECK(st.p_bd.p == doctest::Approx(1.0 / 3.0));
  CHECK(st.total_pairs() == 3);

  // all-dark: p_bd is no-data, distinct from zero
  const auto dark = transition_stats(make_stack({"DDDD"}));
  CHECK_FALSE(dark.p_bd.has_data);
  CHECK(dark.p_db.has_data);
  CHECK(dark.p_db.p == 0.0);

  // counts are exhaustive over sites x (frames - 1)
  const auto multi = transition_stats(make_stack({"BDBD", "BBDD", "DDDB"}));
  CHECK(multi.total_pairs() == 3 * 3);

  CHECK_THROWS_AS(transition_stats(make_stack({"B"})), std::domain_error);
  CHECK_THROWS_AS(transition_stats(make_stack({})), std::domain_error);
}

TEST_CASE("transition statistics: record boundaries break pairs") {
  // two concatenated records B,D | B,D: the interior D->B pair is an
  // artifact of the concatenation and must not be counted
  const auto st = transition_stats(make_stack({"BDBD"}, 30e-3, 2));
  CHECK(st.n_bd == 2);
  CHECK(st.n_db == 0);
  CHECK(st.total_pairs() == 2);
}

TEST_CASE("jump detection: the published rule, mechanically") {
  // minimal pattern: >1 dark between bright context
  auto ev = detect_jumps(make_stack({"BDDBB"}));
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].start_frame == 1);
  CHECK(ev[0].end_frame == 2);
  CHECK(ev[0].duration_s == doctest::Approx(2 * 30e-3));
  CHECK_FALSE(ev[0].right_censored);

  // a single dark frame is not an event
  CHECK(detect_jumps(make_stack({"BDBB"})).empty());
  // a single bright frame after the dark run is not enough either
  ev = detect_jumps(make_stack({"BDDBDDBB"}));
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].start_frame == 4);
  CHECK(ev[0].end_frame == 5);
  // leading dark run has no preceding bright frame: ignored
  CHECK(detect_jumps(make_stack({"DDBB"})).empty());
}

TEST_CASE("jump detection: censoring and shift covariance") {
  // dark run reaching the end of the record comes back censored
  auto ev = detect_jumps(make_stack({"BBDDD"}));
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].right_censored);
  CHECK(ev[0].duration_s == doctest::Approx(3 * 30e-3));

  // appending trailing bright frames does not disturb earlier events
  const auto base = detect_jumps(make_stack({"BDDBBDB"}));
  const auto padded = detect_jumps(make_stack({"BDDBBDBBBBB"}));
  REQUIRE(base.size() == 1);
  REQUIRE(padded.size() >= 1);
  CHECK(padded[0].start_frame == base[0].start_frame);
  CHECK(padded[0].end_frame == base[0].end_frame);

  // shifting the whole trace shifts the indices and nothing else
  const auto shifted = detect_jumps(make_stack({"BBBBDDBB"}));
  REQUIRE(shifted.size() == 1);
  CHECK(shifted[0].start_frame == 4);
  CHECK(shifted[0].duration_s == doctest::Approx(2 * 30e-3));

  // record boundary: the run at a record's end is censored even though the
  // next record happens to start bright
  ev = detect_jumps(make_stack({"BDDBBB"}, 30e-3, 3));
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].right_censored);
  CHECK(ev[0].end_frame == 2);
}

TEST_CASE("censored exponential fit: closed form") {
  const std::vector<double> d = {0.5, 0.5, 0.5, 0.5, 0.5};
  const std::vector<bool> unc(5, false);
  const auto f = fit_exponential(d, unc);
  CHECK(f.tau_s == doctest::Approx(0.5));
  CHECK(f.stderr_s == doctest::Approx(0.5 / std::sqrt(5.0)));
  CHECK(f.n_uncensored == 5);

  // adding a censored duration c increases tau by c / n_uncensored
  auto d2 = d;
  auto c2 = unc;
  d2.push_back(0.35);
  c2.push_back(true);
  const auto f2 = fit_exponential(d2, c2);
  CHECK(f2.tau_s == doctest::Approx(f.tau_s + 0.35 / 5.0));
  CHECK(f2.n_uncensored == 5);

  CHECK_THROWS(fit_exponential({0.1, 0.2, 0.3, 0.4}, {false, false, false, false}));
  CHECK_THROWS(fit_exponential({0.1, -0.2, 0.3, 0.4, 0.5},
                               std::vector<bool>(5, false)));
  CHECK_THROWS(fit_exponential({0.1, 0.2}, {false}));
}

TEST_CASE("censored exponential fit: unbiased on simulated data") {
  Rng rng(13);
  std::exponential_distribution<double> expo(1.0 / 0.54);
  std::vector<double> d;
  std::vector<bool> cen;
  const double horizon = 2.0;
  for (int i = 0; i < 4000; ++i) {
    const double x = expo(rng);
    d.push_back(std::min(x, horizon));
    cen.push_back(x >= horizon);
  }
  const auto f = fit_exponential(d, cen);
  CHECK(std::abs(f.tau_s - 0.54) < 3.0 * f.stderr_s);
}

TEST_CASE("jump floor fit: noiseless inversion to 1e-6 relative") {
  const double p_m = 4e-3, tau = 0.54;
  std::vector<JumpFloorPoint> pts;
  for (double t_ms : {10.0, 20.0, 30.0, 50.0, 100.0}) {
    JumpFloorPoint p;
    p.exposure_s = t_ms * 1e-3;
    p.p_db = p_m * (1.0 - std::exp(-p.exposure_s / tau));
    pts.push_back(p);
  }
  const auto fit = fit_jump_floor(pts);
  CHECK(std::abs(fit.p_m - p_m) / p_m < 1e-6);
  CHECK(std::abs(fit.tau_m_s - tau) / tau < 1e-6);
  CHECK(fit.chi2 < 1e-18);
}

TEST_CASE("jump floor fit: long-time asymptote equals the amplitude") {
  const double p_m = 4e-3, tau = 0.54;
  std::vector<JumpFloorPoint> pts;
  for (double t : {0.2, 0.5, 1.0, 3.0, 10.0}) {
    JumpFloorPoint p;
    p.exposure_s = t;
    p.p_db = p_m * (1.0 - std::exp(-t / tau));
    pts.push_back(p);
  }
  const auto fit = fit_jump_floor(pts);
  CHECK(fit.p_m == doctest::Approx(p_m).epsilon(1e-6));
  // t >> tau saturates at p_m
  CHECK(fit.p_m * (1.0 - std::exp(-1e6)) == doctest::Approx(fit.p_m));
}

TEST_CASE("jump floor fit: pinned time constant") {
  const double p_m = 4e-3, tau = 0.54;
  std::vector<JumpFloorPoint> pts;
  for (double t_ms : {25.0, 30.0, 50.0, 100.0}) {
    JumpFloorPoint p;
    p.exposure_s = t_ms * 1e-3;
    p.p_db = p_m * (1.0 - std::exp(-p.exposure_s / tau));
    p.sigma = 2e-5;
    pts.push_back(p);
  }
  const auto fit = fit_jump_floor(pts, tau);
  CHECK(fit.p_m == doctest::Approx(p_m).epsilon(1e-12));
  CHECK(fit.tau_m_s == tau);
  CHECK(fit.tau_m_stderr == 0.0);
  CHECK(fit.p_m_stderr > 0.0);

  CHECK_THROWS(fit_jump_floor(pts, -1.0));
  CHECK_THROWS(fit_jump_floor({pts[0], pts[1]}, tau));
  // free fit requires a factor >= 3 span in exposure
  CHECK_THROWS(fit_jump_floor({pts[0], pts[1], pts[2]}));
}

TEST_CASE("excluded error rate removes jump returns, keeps residuals") {
  // site 0 holds one jump event (frames 1-2); site 1 is never-loaded dark
  // frames that stay in the denominator
  const auto cs = make_stack({"BDDBB", "DDDDD"});
  const auto jumps = detect_jumps(cs);
  const auto raw = transition_stats(cs);
  CHECK(raw.n_db == 1);
  CHECK(raw.n_dd == 5);
  const auto excl = excluded_error_rate(cs, jumps);
  CHECK(excl.n_db == 0);
  CHECK(excl.n_dd == 4);
  CHECK(excl.p_db.p == 0.0);
  CHECK(excl.p_db.hi > 0.0);

  // a residual d->b error outside any event survives exclusion
  const auto cs2 = make_stack({"BDDBBBDBBB"});
  const auto excl2 = excluded_error_rate(cs2, detect_jumps(cs2));
  CHECK(excl2.n_db == 1);
}

TEST_CASE("temperature fit: self-inversion and boundary error") {
  const TransitionSpec yb = TransitionSpec::yb174_green();
  const TrapSpec trap;
  const std::vector<double> times = {5e-6,  10e-6, 15e-6, 20e-6,
                                     25e-6, 30e-6, 40e-6, 50e-6};
  // zero-noise data from the same oracle (same seed and trajectory count)
  const auto truth = release_recapture_curve(yb, trap, 6e-3, 6.4e-6, times,
                                             10000, 7, 4);
  std::vector<RRDataPoint> data;
  for (const auto& pt : truth) data.push_back({pt.t_s, pt.p_recapture});

  std::vector<double> grid;
  for (double T = 3e-6; T <= 12.01e-6; T += 0.75e-6) grid.push_back(T);
  const auto fit = fit_temperature_rr(data, yb, trap, 6e-3, 10000, grid, 7, 4);
  CHECK(std::abs(fit.temperature_k - 6.4e-6) / 6.4e-6 < 0.02);
  CHECK(fit.stderr_k > 0.0);

  // flat p = 1 is colder than any grid point: boundary error
  std::vector<RRDataPoint> flat;
  for (double t : times) flat.push_back({t, 1.0});
  CHECK_THROWS_WITH_AS(
      (void)fit_temperature_rr(flat, yb, trap, 6e-3, 10000, grid, 7, 4),
      doctest::Contains("boundary"), std::runtime_error);

  CHECK_THROWS_AS((void)fit_temperature_rr(data, yb, trap, 6e-3, 500, grid, 7, 4),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)fit_temperature_rr({}, yb, trap, 6e-3, 10000, grid, 7, 4),
                  std::invalid_argument);
}

TEST_CASE("defect-free array bound") {
  CHECK(max_defect_free_size(4.5e-3) == 222);
  CHECK(max_defect_free_size(0.5) == 2);
  CHECK(max_defect_free_size(1e-2) == 100);
  CHECK(max_defect_free_size(0.0) == -1);  // unbounded sentinel
  CHECK_THROWS_AS(max_defect_free_size(-0.1), std::domain_error);
  CHECK_THROWS_AS(max_defect_free_size(1.5), std::domain_error);
}
