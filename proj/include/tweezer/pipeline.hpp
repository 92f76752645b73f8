#pragma once

#include <filesystem>

#include <json.hpp>

#include "tweezer/analysis.hpp"
#include "tweezer/archive.hpp"
#include "tweezer/config.hpp"

namespace twz {

struct SimOptions {
  bool enable_loss = true;
  bool enable_jumps = true;
};

// Simulate one imaging run of the array at a fixed exposure: stochastic
// loading per record, per-site CTMC timelines, rendered frames.
FrameStack simulate_stack(const Scenario& sc, double exposure_s,
                          std::int64_t n_records, const SimOptions& opt,
                          std::uint64_t seed);

struct StackBundle {
  FrameStack stack;
  std::vector<SiteCalibration> calib;
  ClassifiedStack bayes;
  ClassifiedStack thresh;
  double bright_fraction = 0.0;  // of the Bayes labels
};

StackBundle simulate_and_classify(const Scenario& sc, double exposure_s,
                                  std::int64_t site_frames, const SimOptions& opt,
                                  std::uint64_t seed);

struct AcceptanceEntry {
  std::string name;
  double target = 0.0;
  double measured = 0.0;
  double tolerance = 0.0;  // interpretation recorded in `kind`
  std::string kind;        // "abs", "rel", "less_than", "sigma"
  bool pass = false;
};

// Executes the built-in pipeline named by sc.name and writes archives, CSV
// tables and a machine-checkable manifest into out_dir. Returns the manifest.
nlohmann::json run_scenario(const Scenario& sc, const std::filesystem::path& out_dir);

nlohmann::json run_scenario_config(const std::filesystem::path& config_path,
                                   const std::filesystem::path& out_dir);

// Known pipeline names.
bool known_pipeline(const std::string& name);

}  // namespace twz
