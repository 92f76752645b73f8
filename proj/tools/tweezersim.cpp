#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tweezer/pipeline.hpp"
#include "tweezer/units.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir = "out";
  std::vector<std::string> sets;
  long long seed = -1;
  int jobs = 0;
};

void add_common(CLI::App* app, CommonOpts& o) {
  app->add_option("--config", o.config_path, "Scenario config file (JSON)")
      ->envname("TWZ_CONFIG");
  app->add_option("--out", o.out_dir, "Output directory")->envname("TWZ_OUT");
  app->add_option("--seed", o.seed, "Master seed override")->envname("TWZ_SEED");
  app->add_option("--jobs", o.jobs, "Worker threads")->envname("TWZ_JOBS");
  app->add_option("--set", o.sets,
                  "Override a config key by dotted path, e.g. "
                  "--set imaging.exposure_ms=20");
}

twz::Scenario build_scenario(const CommonOpts& o, const std::string& force_name) {
  nlohmann::json raw;
  if (!o.config_path.empty()) {
    raw = twz::load_config_file(o.config_path);
  } else {
    raw = twz::Scenario::defaults().to_json();
    if (!force_name.empty()) raw["name"] = force_name;
  }
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw twz::ConfigError("--set expects key=value, got: " + kv);
    twz::set_by_path(raw, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!force_name.empty()) raw["name"] = force_name;
  twz::Scenario sc = twz::Scenario::from_json(raw);
  if (o.seed >= 0) sc.run.seed = static_cast<std::uint64_t>(o.seed);
  if (o.jobs > 0) sc.run.jobs = o.jobs;
  return sc;
}

int report(const nlohmann::json& manifest) {
  for (const auto& c : manifest["checks"])
    std::cout << (c["pass"].get<bool>() ? "[PASS] " : "[FAIL] ")
              << c["name"].get<std::string>()
              << "  measured=" << c["measured"].get<double>()
              << "  target=" << c["target"].get<double>() << "\n";
  std::cout << (manifest["all_pass"].get<bool>() ? "OK" : "FAILED") << "\n";
  return manifest["all_pass"].get<bool>() ? 0 : 1;
}

int run_selftest() {
  using namespace twz;
  int failures = 0;
  auto check = [&](const std::string& name, bool ok) {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << "\n";
    if (!ok) ++failures;
  };
  const auto yb = TransitionSpec::yb174_green();
  check("doppler-4.37uK",
        std::abs(doppler_limit_temperature(yb, 1e-9, -0.5) - 4.37e-6) < 0.1e-6);
  TrapSpec trap;
  check("depth-6mW-6MHz",
        std::abs(trap_depth(trap, 6e-3).depth_freq_hz - 6e6) < 1.0);
  check("collection-na06", std::abs(collection_efficiency(0.6) - 0.1) < 1e-12);
  check("nmax-222", max_defect_free_size(4.5e-3) == 222);
  Scenario sc = Scenario::defaults();
  // Short records so the smoke test spans many loading shots; with few
  // records a site can be empty throughout and calibration rightly refuses.
  sc.run.record_s = 0.5;
  const auto bundle = simulate_and_classify(sc, 30e-3, 3000, {}, 7);
  const auto stats = transition_stats(bundle.bayes);
  check("pipeline-smoke", stats.total_pairs() > 1000);
  std::cout << (failures == 0 ? "OK" : "FAILED") << "\n";
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo simulator for narrow-line single-atom imaging in "
               "tweezer arrays"};
  app.require_subcommand(1);

  CommonOpts sim_o, cls_o, ana_o, rep_o;
  std::string figure, frames_path, classified_path;

  auto* sim = app.add_subcommand("simulate", "Run the pipeline named in the config");
  add_common(sim, sim_o);

  auto* cls = app.add_subcommand("classify", "Classify a frame archive");
  add_common(cls, cls_o);
  cls->add_option("--frames", frames_path, "Frame archive (.twz)")->required();

  auto* ana = app.add_subcommand("analyze", "Transition statistics and jumps of a "
                                            "classified stack");
  add_common(ana, ana_o);
  ana->add_option("--classified", classified_path, "Classified stack (JSON)")
      ->required();

  auto* rep = app.add_subcommand("reproduce", "Run a built-in figure pipeline");
  add_common(rep, rep_o);
  rep->add_option("figure", figure,
                  "One of: fig2a-lightshift fig2b-lifetime fig3a-histogram "
                  "fig3bcd-fidelity-jumps fig4-loading rr-thermometry")
      ->required();

  app.add_subcommand("selftest", "Quick internal consistency checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      const auto sc = build_scenario(sim_o, "");
      return report(twz::run_scenario(sc, sim_o.out_dir));
    }
    if (rep->parsed()) {
      if (!twz::known_pipeline(figure)) {
        std::cerr << "unknown figure pipeline: " << figure << "\n";
        return 2;
      }
      const auto sc = build_scenario(rep_o, figure);
      return report(twz::run_scenario(sc, rep_o.out_dir));
    }
    if (cls->parsed()) {
      const auto sc = build_scenario(cls_o, "fig3a-histogram");
      auto stack = twz::read_frame_stack(frames_path);
      const double rn = sc.camera.read_noise_e * sc.camera.gain;
      const auto calib = twz::calibrate(
          stack, rn, std::min<std::size_t>(200, stack.frames.size()));
      const auto cs = twz::classify_bayes(stack, calib);
      std::filesystem::create_directories(cls_o.out_dir);
      const auto out = std::filesystem::path(cls_o.out_dir) / "classified.json";
      twz::write_classified_stack(out, cs, stack.seed);
      std::cout << "wrote " << out.string() << "\n";
      return 0;
    }
    if (ana->parsed()) {
      const auto cs = twz::read_classified_stack(classified_path);
      const auto stats = twz::transition_stats(cs);
      const auto jumps = twz::detect_jumps(cs);
      const auto excl = twz::excluded_error_rate(cs, jumps);
      std::cout << "pairs=" << stats.total_pairs() << " p_bd=" << stats.p_bd.p
                << " p_db=" << stats.p_db.p << " p_db_excl=" << excl.p_db.p
                << " jumps=" << jumps.size() << "\n";
      return 0;
    }
    return run_selftest();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
