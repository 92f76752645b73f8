#include "tweezer/dynamics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "tweezer/parallel.hpp"
#include "tweezer/units.hpp"

namespace twz {

using namespace consts;

void StateChainParams::validate() const {
  if (!(tau_loss_s > 0.0) || !(tau_m_s > 0.0))
    throw std::domain_error("StateChainParams: lifetimes must be > 0");
  if (!(p_m >= 0.0 && p_m < 1.0))
    throw std::domain_error("StateChainParams: p_m must be in [0,1)");
  if (rate_m_to_loss < 0.0)
    throw std::domain_error("StateChainParams: rates must be >= 0");
}

LoadingModel LoadingModel::uniform(int n_sites, double p) {
  LoadingModel m;
  m.p_site.assign(static_cast<std::size_t>(n_sites), p);
  return m;
}

double imaging_lifetime(double s, const LifetimeModel& model) {
  if (s < 0.0) throw std::domain_error("imaging_lifetime: s must be >= 0");
  const double tau = model.tau_ref_s * std::exp(-model.slope * (s - model.s_ref));
  return std::min(model.tau_background_s, tau);
}

MotionalState sample_thermal(const TransitionSpec& t, const TrapSpec& trap,
                             double power_w, double temperature_k, Rng& rng) {
  if (!(temperature_k > 0.0))
    throw std::domain_error("sample_thermal: temperature must be > 0");
  const auto freqs = trap_frequencies(t, trap, power_w);
  const double m = t.atom_mass_kg;
  const double sigma_v = std::sqrt(k_B * temperature_k / m);
  const double wr = 2.0 * pi * freqs.radial_hz;
  const double wz = 2.0 * pi * freqs.axial_hz;
  std::normal_distribution<double> gauss(0.0, 1.0);
  MotionalState st;
  st.position[0] = sigma_v / wr * gauss(rng);
  st.position[1] = sigma_v / wr * gauss(rng);
  st.position[2] = sigma_v / wz * gauss(rng);
  st.velocity[0] = sigma_v * gauss(rng);
  st.velocity[1] = sigma_v * gauss(rng);
  st.velocity[2] = sigma_v * gauss(rng);
  return st;
}

namespace {

double total_energy(const TrapSpec& trap, double depth_j, double mass,
                    const MotionalState& st) {
  const double v2 = st.velocity[0] * st.velocity[0] +
                    st.velocity[1] * st.velocity[1] +
                    st.velocity[2] * st.velocity[2];
  return 0.5 * mass * v2 + gaussian_potential(trap, depth_j, st.position[0],
                                              st.position[1], st.position[2]);
}

MotionalState sample_bound_thermal(const TransitionSpec& t, const TrapSpec& trap,
                                   double power_w, double temperature_k,
                                   double depth_j, Rng& rng) {
  for (int tries = 0; tries < 1000; ++tries) {
    MotionalState st = sample_thermal(t, trap, power_w, temperature_k, rng);
    if (total_energy(trap, depth_j, t.atom_mass_kg, st) < 0.0) return st;
  }
  throw std::runtime_error(
      "release_recapture_curve: could not draw a bound thermal state (trap "
      "depth far below k_B T?)");
}

}  // namespace

std::vector<RecapturePoint> release_recapture_curve(
    const TransitionSpec& t, const TrapSpec& trap, double power_w,
    double temperature_k, const std::vector<double>& release_times_s,
    std::int64_t n_traj, std::uint64_t seed, int jobs, int gravity_axis) {
  if (release_times_s.empty())
    throw std::domain_error("release_recapture_curve: no release times");
  if (n_traj < 100)
    throw std::domain_error("release_recapture_curve: need n_traj >= 100");
  if (gravity_axis < 0 || gravity_axis > 2)
    throw std::domain_error("release_recapture_curve: gravity axis must be 0..2");
  for (double ts : release_times_s)
    if (ts < 0.0)
      throw std::domain_error("release_recapture_curve: negative release time");

  const double depth_j = trap_depth(trap, power_w).depth_joule;
  const double mass = t.atom_mass_kg;
  const std::size_t nt = release_times_s.size();
  std::vector<std::int64_t> recaptured(nt, 0);
  std::vector<std::vector<std::uint8_t>> hits(
      static_cast<std::size_t>(n_traj), std::vector<std::uint8_t>(nt, 0));

  parallel_for(static_cast<std::size_t>(n_traj), jobs, [&](std::size_t i) {
    Rng rng(derive_seed(seed, i));
    const MotionalState st0 =
        sample_bound_thermal(t, trap, power_w, temperature_k, depth_j, rng);
    for (std::size_t k = 0; k < nt; ++k) {
      const double dt = release_times_s[k];
      MotionalState st = st0;
      for (int a = 0; a < 3; ++a) st.position[a] += st.velocity[a] * dt;
      st.position[gravity_axis] -= 0.5 * g_earth * dt * dt;
      st.velocity[gravity_axis] -= g_earth * dt;
      hits[i][k] = total_energy(trap, depth_j, mass, st) < 0.0 ? 1 : 0;
    }
  });
  for (const auto& row : hits)
    for (std::size_t k = 0; k < nt; ++k) recaptured[k] += row[k];

  std::vector<RecapturePoint> out(nt);
  const double n = static_cast<double>(n_traj);
  for (std::size_t k = 0; k < nt; ++k) {
    const double p = static_cast<double>(recaptured[k]) / n;
    out[k].t_s = release_times_s[k];
    out[k].p_recapture = p;
    out[k].stderr_p = std::sqrt(std::max(p * (1.0 - p), 1.0 / n) / n);
  }
  return out;
}

AtomTimeline simulate_timeline(const StateChainParams& chain,
                               const ImagingSpec& imaging,
                               const TransitionSpec& transition,
                               std::int64_t n_frames, bool initially_loaded,
                               std::uint64_t seed) {
  chain.validate();
  validate(imaging);
  if (n_frames < 1) throw std::domain_error("simulate_timeline: n_frames >= 1");

  AtomTimeline tl;
  tl.frames.assign(static_cast<std::size_t>(n_frames), FrameRecord{});
  if (!initially_loaded) return tl;  // empty site: lost from the start, 0 photons

  const double r_sc =
      scattering_rate(transition, imaging.saturation, imaging.detuning);
  const double period = imaging.frame_period_s;
  const double exposure = imaging.exposure_s;
  const double t_end = period * static_cast<double>(n_frames);

  Rng rng(seed);
  std::exponential_distribution<double> unit_exp(1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  struct Segment {
    double t0, t1;
    InternalState state;
  };
  std::vector<Segment> segments;
  double t_now = 0.0;
  InternalState state = InternalState::Bright;
  while (t_now < t_end && state != InternalState::Lost) {
    double rate_out, p_to_loss;
    if (state == InternalState::Bright) {
      rate_out = 1.0 / chain.tau_loss_s + chain.rate_g_to_m();
      p_to_loss = (1.0 / chain.tau_loss_s) / rate_out;
    } else {
      rate_out = 1.0 / chain.tau_m_s + chain.rate_m_to_loss;
      p_to_loss = chain.rate_m_to_loss / rate_out;
    }
    double hold = rate_out > 0.0 ? unit_exp(rng) / rate_out
                                 : std::numeric_limits<double>::infinity();
    const double t_next = std::min(t_now + hold, t_end);
    segments.push_back({t_now, t_next, state});
    if (t_next >= t_end) {
      t_now = t_end;
      break;
    }
    if (unif(rng) < p_to_loss)
      state = InternalState::Lost;
    else
      state = state == InternalState::Bright ? InternalState::DarkMetastable
                                             : InternalState::Bright;
    t_now = t_next;
  }
  if (state == InternalState::Lost && t_now < t_end)
    segments.push_back({t_now, t_end, InternalState::Lost});

  // Per-frame bookkeeping: photon budgets from the bright overlap with the
  // exposure window, the frame label from the state at end of exposure.
  std::size_t seg = 0;
  for (std::int64_t k = 0; k < n_frames; ++k) {
    const double w0 = period * static_cast<double>(k);
    const double w1 = w0 + exposure;
    double bright = 0.0;
    InternalState label = InternalState::Lost;
    while (seg + 1 < segments.size() && segments[seg].t1 <= w0) ++seg;
    for (std::size_t s2 = seg; s2 < segments.size() && segments[s2].t0 < w1; ++s2) {
      const double lo = std::max(segments[s2].t0, w0);
      const double hi = std::min(segments[s2].t1, w1);
      if (segments[s2].state == InternalState::Bright && hi > lo)
        bright += hi - lo;
      if (segments[s2].t0 <= w1 && (segments[s2].t1 >= w1 || s2 + 1 == segments.size()))
        label = segments[s2].state;
    }
    auto& fr = tl.frames[static_cast<std::size_t>(k)];
    fr.internal = label;
    fr.bright_time_s = bright;
    if (bright > 0.0) {
      std::poisson_distribution<std::int64_t> pois(r_sc * bright);
      fr.photons_emitted = pois(rng);
    }
  }
  return tl;
}

std::vector<std::vector<std::uint8_t>> simulate_loading(const LoadingModel& model,
                                                        std::int64_t n_shots,
                                                        std::uint64_t seed) {
  if (n_shots < 1) throw std::domain_error("simulate_loading: n_shots >= 1");
  for (double p : model.p_site)
    if (!(p >= 0.0 && p <= 1.0))
      throw std::domain_error("simulate_loading: p_site out of [0,1]");
  std::vector<std::vector<std::uint8_t>> occ(
      static_cast<std::size_t>(n_shots),
      std::vector<std::uint8_t>(model.p_site.size(), 0));
  for (std::size_t shot = 0; shot < occ.size(); ++shot) {
    Rng rng(derive_seed(seed, shot));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t i = 0; i < model.p_site.size(); ++i)
      occ[shot][i] = unif(rng) < model.p_site[i] ? 1 : 0;
  }
  return occ;
}

}  // namespace twz
