#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tweezer/camera.hpp"
#include "tweezer/dynamics.hpp"
#include "tweezer/physics.hpp"

namespace twz {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunSpec {
  std::uint64_t seed = 20190401;
  double record_s = 5.0;
  std::vector<double> exposures_s = {10e-3, 15e-3, 20e-3, 25e-3, 30e-3, 50e-3, 100e-3};
  // ~2e5 camera frames across the default exposure list (9 sites each).
  std::int64_t site_frames_per_exposure = 250000;
  std::int64_t n_shots = 10000;
  std::int64_t n_traj = 10000;
  int jobs = 1;
};

// One self-contained parameter set for a pipeline run. Config keys carry
// explicit units in their names (exposure_ms, waist_nm, ...).
struct Scenario {
  std::string name = "fig3bcd-fidelity-jumps";
  TransitionSpec transition = TransitionSpec::yb174_green();
  TrapSpec trap;
  ImagingSpec imaging;
  StateChainParams chain;
  CameraSpec camera;
  PSFModel psf;
  LifetimeModel lifetime;
  LoadingModel loading = LoadingModel::uniform(9, 0.49);
  GridLayout layout{3, 3, 7};
  RunSpec run;

  static Scenario defaults();
  static Scenario from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

nlohmann::json load_config_file(const std::filesystem::path& path);

// Dotted-path override, e.g. set_by_path(j, "imaging.exposure_ms", "30").
// The value string is parsed as JSON when possible, else taken as a string.
void set_by_path(nlohmann::json& j, const std::string& dotted_key,
                 const std::string& value);

// FNV-1a over the canonical (sorted-key) dump: stable under field reordering.
std::uint64_t config_hash(const nlohmann::json& j);

}  // namespace twz
