#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "tweezer/physics.hpp"
#include "tweezer/rng.hpp"

namespace twz {

struct MotionalState {
  std::array<double, 3> position{0, 0, 0};  // m; z along the tweezer axis
  std::array<double, 3> velocity{0, 0, 0};  // m/s
};

enum class InternalState : std::uint8_t { Bright = 0, DarkMetastable = 1, Lost = 2 };

// Markov-chain rates for the internal-state dynamics under imaging light.
struct StateChainParams {
  double tau_loss_s = 7.2;       // bright-state trap lifetime under imaging
  double tau_m_s = 0.54;         // metastable lifetime
  double p_m = 4e-3;             // steady-state metastable fraction
  double rate_m_to_loss = 0.0;   // 1/s

  // Shelving rate fixed by the steady state: rate_g_to_m * tau_m = p_m.
  double rate_g_to_m() const { return p_m / tau_m_s; }
  void validate() const;
};

struct FrameRecord {
  InternalState internal = InternalState::Lost;
  std::int64_t photons_emitted = 0;
  double bright_time_s = 0.0;  // time in bright within the exposure window
};

struct AtomTimeline {
  int site = 0;
  std::vector<FrameRecord> frames;
};

struct LoadingModel {
  std::vector<double> p_site;  // per-site single-atom probability
  bool parity_projection = true;

  static LoadingModel uniform(int n_sites, double p = 0.49);
};

struct RecapturePoint {
  double t_s = 0.0;
  double p_recapture = 0.0;
  double stderr_p = 0.0;
};

// Exponential lifetime-vs-intensity model anchored at tau(s_ref) = tau_ref,
// capped at the background-gas-limited lifetime.
struct LifetimeModel {
  double tau_ref_s = 7.2;
  double s_ref = 3.0;
  double slope = 0.8;  // per saturation unit; Fig-level slope is untabulated
  double tau_background_s = 60.0;
};

double imaging_lifetime(double s, const LifetimeModel& model = {});

// Thermal sample in the harmonic approximation of the Gaussian trap.
MotionalState sample_thermal(const TransitionSpec& t, const TrapSpec& trap,
                             double power_w, double temperature_k, Rng& rng);

// Ballistic release (with gravity along gravity_axis) followed by a bound /
// unbound test against the full Gaussian potential. Initial states are
// rejection-sampled to be bound, so p(0) = 1 exactly.
std::vector<RecapturePoint> release_recapture_curve(
    const TransitionSpec& t, const TrapSpec& trap, double power_w,
    double temperature_k, const std::vector<double>& release_times_s,
    std::int64_t n_traj, std::uint64_t seed, int jobs = 1, int gravity_axis = 0);

// CTMC over {bright, metastable, lost} discretized into frames. Photon counts
// per frame are Poisson in the scattering rate times the time spent bright
// within that frame's exposure window.
AtomTimeline simulate_timeline(const StateChainParams& chain,
                               const ImagingSpec& imaging,
                               const TransitionSpec& transition,
                               std::int64_t n_frames, bool initially_loaded,
                               std::uint64_t seed);

// shots x sites occupancy matrix, values {0,1}.
std::vector<std::vector<std::uint8_t>> simulate_loading(const LoadingModel& model,
                                                        std::int64_t n_shots,
                                                        std::uint64_t seed);

}  // namespace twz
