#include "tweezer/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "tweezer/archive.hpp"
#include "tweezer/units.hpp"

namespace twz {

using nlohmann::json;

namespace {

double get_num(const json& j, const std::string& section, const std::string& key,
               double fallback) {
  if (!j.contains(section)) return fallback;
  const auto& s = j.at(section);
  if (!s.contains(key)) return fallback;
  if (!s.at(key).is_number())
    throw ConfigError("config: field " + section + "." + key + " must be a number");
  return s.at(key).get<double>();
}

bool get_bool(const json& j, const std::string& section, const std::string& key,
              bool fallback) {
  if (!j.contains(section) || !j.at(section).contains(key)) return fallback;
  if (!j.at(section).at(key).is_boolean())
    throw ConfigError("config: field " + section + "." + key + " must be a boolean");
  return j.at(section).at(key).get<bool>();
}

}  // namespace

Scenario Scenario::defaults() {
  Scenario s;
  s.trap.power_per_tweezer_w = 6e-3;
  // Imaging defaults calibrated to the in-trap conditions: laser at -1.5
  // Gamma free-space, line blue-shifted by 96 kHz (0.53 Gamma) in the trap,
  // so the effective detuning seen by a trapped atom is -2.03 Gamma. The
  // detection efficiency is a calibration default (the absolute count chain
  // is not measured); it is chosen so the per-frame photon budgets reproduce
  // the measured per-exposure fidelity curve.
  s.imaging.saturation = 3.0;
  s.imaging.detuning = -2.03;
  s.imaging.exposure_s = 30e-3;
  s.imaging.frame_period_s = 30e-3;
  s.imaging.detection_efficiency = 0.0238;
  s.loading = LoadingModel::uniform(9, 0.49);
  s.layout = GridLayout{3, 3, 7};
  return s;
}

Scenario Scenario::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  if (!j.contains("imaging") || !j.at("imaging").contains("exposure_ms"))
    throw ConfigError("config: missing required field: imaging.exposure_ms");

  Scenario d = defaults();
  Scenario s = d;
  if (j.contains("name")) {
    if (!j.at("name").is_string())
      throw ConfigError("config: field name must be a string");
    s.name = j.at("name").get<std::string>();
  }

  s.transition = TransitionSpec::from_hz(
      get_num(j, "transition", "wavelength_nm", 556.0) * 1e-9,
      get_num(j, "transition", "linewidth_khz", 182.0) * 1e3,
      get_num(j, "transition", "mass_amu", 174.0) * consts::amu,
      j.contains("transition") ? j.at("transition").value("label", "1S0-3P1")
                               : "1S0-3P1");

  s.trap.trap_wavelength_m = get_num(j, "trap", "trap_wavelength_nm", 532.0) * 1e-9;
  s.trap.waist_m = get_num(j, "trap", "waist_nm", 700.0) * 1e-9;
  s.trap.power_per_tweezer_w = get_num(j, "trap", "power_mw", 6.0) * 1e-3;
  s.trap.depth_per_power_hz_w =
      get_num(j, "trap", "depth_per_power_mhz_per_mw", 1.0) * 1e9;
  s.trap.shift_fraction_mj0 = get_num(j, "trap", "shift_fraction_mj0", 0.016);
  s.trap.shift_fraction_mj1 = get_num(j, "trap", "shift_fraction_mj1", -0.022);

  s.imaging.saturation = get_num(j, "imaging", "saturation", d.imaging.saturation);
  s.imaging.detuning = get_num(j, "imaging", "detuning_gamma", d.imaging.detuning);
  s.imaging.exposure_s = get_num(j, "imaging", "exposure_ms", 30.0) * 1e-3;
  s.imaging.frame_period_s =
      get_num(j, "imaging", "frame_period_ms", s.imaging.exposure_s * 1e3) * 1e-3;
  s.imaging.detection_efficiency =
      get_num(j, "imaging", "detection_efficiency", d.imaging.detection_efficiency);

  s.chain.tau_loss_s = get_num(j, "chain", "tau_loss_s", 7.2);
  s.chain.tau_m_s = get_num(j, "chain", "tau_m_s", 0.54);
  s.chain.p_m = get_num(j, "chain", "p_m", 4e-3);
  s.chain.rate_m_to_loss = get_num(j, "chain", "rate_m_to_loss_hz", 0.0);

  s.camera.pixel_pitch_m = get_num(j, "camera", "pixel_pitch_nm", 300.0) * 1e-9;
  s.camera.roi_px = static_cast<int>(get_num(j, "camera", "roi_px", 7.0));
  s.camera.quantum_efficiency = get_num(j, "camera", "quantum_efficiency", 0.72);
  s.camera.optics_transmission = get_num(j, "camera", "optics_transmission", 0.70);
  s.camera.read_noise_e = get_num(j, "camera", "read_noise_e", 1.5);
  s.camera.gain = get_num(j, "camera", "gain", 1.0);
  s.camera.background_rate_per_tweezer =
      get_num(j, "camera", "background_rate_per_tweezer", 2.0);

  s.psf.sigma_m = get_num(j, "psf", "sigma_nm", 0.21 * 556.0 / 0.6) * 1e-9;
  s.psf.blur_sigma_m = get_num(j, "psf", "blur_sigma_nm", 74.0) * 1e-9;

  s.lifetime.tau_ref_s = get_num(j, "lifetime", "tau_ref_s", 7.2);
  s.lifetime.s_ref = get_num(j, "lifetime", "s_ref", 3.0);
  s.lifetime.slope = get_num(j, "lifetime", "slope", 0.8);
  s.lifetime.tau_background_s = get_num(j, "lifetime", "tau_background_s", 60.0);

  const int rows = static_cast<int>(get_num(j, "array", "rows", 3.0));
  const int cols = static_cast<int>(get_num(j, "array", "cols", 3.0));
  s.layout = GridLayout{rows, cols, s.camera.roi_px};

  if (j.contains("loading") && j.at("loading").contains("p_site")) {
    const auto& arr = j.at("loading").at("p_site");
    if (!arr.is_array())
      throw ConfigError("config: field loading.p_site must be an array");
    s.loading.p_site.clear();
    for (const auto& v : arr) s.loading.p_site.push_back(v.get<double>());
  } else {
    s.loading = LoadingModel::uniform(rows * cols, get_num(j, "loading", "p", 0.49));
  }
  s.loading.parity_projection = get_bool(j, "loading", "parity_projection", true);
  if (static_cast<int>(s.loading.p_site.size()) != rows * cols)
    throw ConfigError("config: loading.p_site length must match array size");

  s.run.seed = static_cast<std::uint64_t>(get_num(j, "run", "seed", 20190401.0));
  s.run.record_s = get_num(j, "run", "record_s", 5.0);
  s.run.site_frames_per_exposure = static_cast<std::int64_t>(
      get_num(j, "run", "site_frames_per_exposure", 250000.0));
  s.run.n_shots = static_cast<std::int64_t>(get_num(j, "run", "n_shots", 10000.0));
  s.run.n_traj = static_cast<std::int64_t>(get_num(j, "run", "n_traj", 10000.0));
  s.run.jobs = static_cast<int>(get_num(j, "run", "jobs", 1.0));
  if (j.contains("run") && j.at("run").contains("exposures_ms")) {
    const auto& arr = j.at("run").at("exposures_ms");
    if (!arr.is_array())
      throw ConfigError("config: field run.exposures_ms must be an array");
    s.run.exposures_s.clear();
    for (const auto& v : arr) s.run.exposures_s.push_back(v.get<double>() * 1e-3);
  }
  return s;
}

namespace {

// Quantize unit-converted values to 12 significant digits so that a
// serialize/parse/serialize cycle is a fixed point (m <-> nm conversions
// otherwise pick up one-ulp noise that changes the config hash).
double display(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return std::strtod(buf, nullptr);
}

}  // namespace

json Scenario::to_json() const {
  json j;
  j["name"] = name;
  j["transition"] = {{"wavelength_nm", display(transition.wavelength_m * 1e9)},
                     {"linewidth_khz", display(transition.linewidth_gamma_rad /
                                               (2.0 * consts::pi) / 1e3)},
                     {"mass_amu", display(transition.atom_mass_kg / consts::amu)},
                     {"label", transition.label}};
  j["trap"] = {{"trap_wavelength_nm", display(trap.trap_wavelength_m * 1e9)},
               {"waist_nm", display(trap.waist_m * 1e9)},
               {"power_mw", display(trap.power_per_tweezer_w * 1e3)},
               {"depth_per_power_mhz_per_mw",
                display(trap.depth_per_power_hz_w / 1e9)},
               {"shift_fraction_mj0", trap.shift_fraction_mj0},
               {"shift_fraction_mj1", trap.shift_fraction_mj1}};
  j["imaging"] = {{"saturation", imaging.saturation},
                  {"detuning_gamma", imaging.detuning},
                  {"exposure_ms", display(imaging.exposure_s * 1e3)},
                  {"frame_period_ms", display(imaging.frame_period_s * 1e3)},
                  {"detection_efficiency", imaging.detection_efficiency}};
  j["chain"] = {{"tau_loss_s", chain.tau_loss_s},
                {"tau_m_s", chain.tau_m_s},
                {"p_m", chain.p_m},
                {"rate_m_to_loss_hz", chain.rate_m_to_loss}};
  j["camera"] = {{"pixel_pitch_nm", display(camera.pixel_pitch_m * 1e9)},
                 {"roi_px", camera.roi_px},
                 {"quantum_efficiency", camera.quantum_efficiency},
                 {"optics_transmission", camera.optics_transmission},
                 {"read_noise_e", camera.read_noise_e},
                 {"gain", camera.gain},
                 {"background_rate_per_tweezer", camera.background_rate_per_tweezer}};
  j["psf"] = {{"sigma_nm", display(psf.sigma_m * 1e9)},
              {"blur_sigma_nm", display(psf.blur_sigma_m * 1e9)}};
  j["lifetime"] = {{"tau_ref_s", lifetime.tau_ref_s},
                   {"s_ref", lifetime.s_ref},
                   {"slope", lifetime.slope},
                   {"tau_background_s", lifetime.tau_background_s}};
  j["array"] = {{"rows", layout.rows}, {"cols", layout.cols}};
  j["loading"] = {{"p_site", loading.p_site},
                  {"parity_projection", loading.parity_projection}};
  json exp = json::array();
  for (double e : run.exposures_s) exp.push_back(display(e * 1e3));
  j["run"] = {{"seed", run.seed},
              {"record_s", run.record_s},
              {"exposures_ms", std::move(exp)},
              {"site_frames_per_exposure", run.site_frames_per_exposure},
              {"n_shots", run.n_shots},
              {"n_traj", run.n_traj},
              {"jobs", run.jobs}};
  return j;
}

json load_config_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path.string());
  try {
    json j;
    is >> j;
    return j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config: parse error in " + path.string() + ": " + e.what());
  }
}

void set_by_path(json& j, const std::string& dotted_key, const std::string& value) {
  json* node = &j;
  std::size_t pos = 0;
  while (true) {
    const std::size_t dot = dotted_key.find('.', pos);
    const std::string key = dotted_key.substr(pos, dot - pos);
    if (key.empty()) throw ConfigError("config: empty key segment in " + dotted_key);
    if (dot == std::string::npos) {
      json parsed = json::parse(value, nullptr, false);
      (*node)[key] = parsed.is_discarded() ? json(value) : parsed;
      return;
    }
    node = &(*node)[key];
    pos = dot + 1;
  }
}

std::uint64_t config_hash(const json& j) {
  const std::string canonical = j.dump();
  return fnv1a64(canonical.data(), canonical.size());
}

}  // namespace twz
