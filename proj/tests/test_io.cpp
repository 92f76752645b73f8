#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "tweezer/archive.hpp"
#include "tweezer/config.hpp"
#include "tweezer/pipeline.hpp"
#include "tweezer/rng.hpp"

using namespace twz;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("twz-test-" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

FrameStack random_stack(int n_frames, std::uint64_t seed) {
  FrameStack st;
  st.layout = GridLayout{2, 3, 5};
  st.exposure_s = 20e-3;
  st.frame_period_s = 25e-3;
  st.frames_per_record = 7;
  st.seed = seed;
  Rng rng(seed);
  std::uniform_int_distribution<std::int32_t> counts(0, 400);
  st.frames.resize(n_frames);
  for (auto& f : st.frames) {
    f.width = st.layout.width();
    f.height = st.layout.height();
    f.counts.resize(static_cast<std::size_t>(f.width) * f.height);
    for (auto& c : f.counts) c = counts(rng);
    for (int s = 0; s < st.layout.n_sites(); ++s)
      f.site_centers.push_back(st.layout.site_center(s));
  }
  return st;
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::vector<char>(std::istreambuf_iterator<char>(is),
                           std::istreambuf_iterator<char>());
}

void spit(const fs::path& p, const std::vector<char>& bytes) {
  std::ofstream os(p, std::ios::binary);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("frame stack archive: bit-exact roundtrip") {
  TempDir td;
  const auto st = random_stack(50, 42);
  const auto p = td.path / "stack.twz";
  write_frame_stack(p, st);
  const auto back = read_frame_stack(p);
  CHECK(back.layout.rows == st.layout.rows);
  CHECK(back.layout.cols == st.layout.cols);
  CHECK(back.layout.roi_px == st.layout.roi_px);
  CHECK(back.exposure_s == st.exposure_s);
  CHECK(back.frame_period_s == st.frame_period_s);
  CHECK(back.frames_per_record == st.frames_per_record);
  CHECK(back.seed == st.seed);
  REQUIRE(back.frames.size() == st.frames.size());
  for (std::size_t k = 0; k < st.frames.size(); ++k)
    CHECK(back.frames[k].counts == st.frames[k].counts);

  // empty stack roundtrips too
  FrameStack empty;
  empty.layout = GridLayout{1, 1, 7};
  empty.seed = 9;
  write_frame_stack(td.path / "empty.twz", empty);
  const auto eback = read_frame_stack(td.path / "empty.twz");
  CHECK(eback.frames.empty());
  CHECK(eback.seed == 9);
}

TEST_CASE("frame stack archive: bulk roundtrip with checksum") {
  TempDir td;
  const auto st = random_stack(10000, 1234);
  const auto p = td.path / "bulk.twz";
  write_frame_stack(p, st);
  const auto back = read_frame_stack(p);
  REQUIRE(back.frames.size() == 10000);
  CHECK(back.frames[9999].counts == st.frames[9999].counts);
}

TEST_CASE("frame stack archive: corruption and version mismatch are detected") {
  TempDir td;
  const auto st = random_stack(20, 7);
  const auto p = td.path / "stack.twz";
  write_frame_stack(p, st);
  auto bytes = slurp(p);

  // flip one payload byte: checksum must catch it
  auto corrupted = bytes;
  corrupted[corrupted.size() / 2] ^= 0x40;
  spit(td.path / "corrupt.twz", corrupted);
  CHECK_THROWS_WITH_AS(read_frame_stack(td.path / "corrupt.twz"),
                       doctest::Contains("checksum"), ArchiveError);

  // bump the version field (bytes 8..11, little endian)
  auto versioned = bytes;
  versioned[8] = 99;
  spit(td.path / "versioned.twz", versioned);
  CHECK_THROWS_WITH_AS(read_frame_stack(td.path / "versioned.twz"),
                       doctest::Contains("version"), ArchiveError);

  // wrong magic
  auto magicked = bytes;
  magicked[0] = 'X';
  spit(td.path / "magic.twz", magicked);
  CHECK_THROWS_AS(read_frame_stack(td.path / "magic.twz"), ArchiveError);

  // truncation
  bytes.resize(bytes.size() / 2);
  spit(td.path / "trunc.twz", bytes);
  CHECK_THROWS_AS(read_frame_stack(td.path / "trunc.twz"), ArchiveError);

  CHECK_THROWS_AS(read_frame_stack(td.path / "missing.twz"), ArchiveError);
}

TEST_CASE("timeline archive roundtrip") {
  TempDir td;
  StateChainParams chain;
  ImagingSpec im;
  std::vector<AtomTimeline> tls;
  for (int s = 0; s < 4; ++s) {
    auto tl = simulate_timeline(chain, im, TransitionSpec::yb174_green(), 100,
                                s % 2 == 0, derive_seed(3, s));
    tl.site = s;
    tls.push_back(std::move(tl));
  }
  const auto p = td.path / "timelines.json";
  write_timelines(p, tls, 33);
  const auto back = read_timelines(p);
  REQUIRE(back.size() == tls.size());
  for (std::size_t s = 0; s < tls.size(); ++s) {
    CHECK(back[s].site == tls[s].site);
    REQUIRE(back[s].frames.size() == tls[s].frames.size());
    for (std::size_t k = 0; k < tls[s].frames.size(); ++k) {
      CHECK(back[s].frames[k].internal == tls[s].frames[k].internal);
      CHECK(back[s].frames[k].photons_emitted == tls[s].frames[k].photons_emitted);
      CHECK(back[s].frames[k].bright_time_s ==
            doctest::Approx(tls[s].frames[k].bright_time_s));
    }
  }
  // wrong format is rejected
  std::ofstream(td.path / "junk.json") << "{\"format\":\"other\"}";
  CHECK_THROWS_AS(read_timelines(td.path / "junk.json"), ArchiveError);
}

TEST_CASE("classified stack archive roundtrip") {
  TempDir td;
  ClassifiedStack cs;
  cs.exposure_s = 15e-3;
  cs.frame_period_s = 15e-3;
  cs.frames_per_record = 333;
  Rng rng(5);
  std::normal_distribution<double> score(0.0, 30.0);
  cs.labels.resize(3);
  for (auto& row : cs.labels)
    for (int k = 0; k < 200; ++k) {
      SiteFrameLabel l;
      l.score = score(rng);
      l.bright = l.score > 0.0;
      row.push_back(l);
    }
  const auto p = td.path / "classified.json";
  write_classified_stack(p, cs, 77);
  const auto back = read_classified_stack(p);
  CHECK(back.exposure_s == cs.exposure_s);
  CHECK(back.frames_per_record == 333);
  REQUIRE(back.n_sites() == 3);
  for (int s = 0; s < 3; ++s)
    for (int k = 0; k < 200; ++k) {
      CHECK(back.labels[s][k].bright == cs.labels[s][k].bright);
      CHECK(back.labels[s][k].score == doctest::Approx(cs.labels[s][k].score));
    }
}

TEST_CASE("config: defaults, parsing, and field errors") {
  const Scenario d = Scenario::defaults();
  CHECK(d.imaging.exposure_s == doctest::Approx(30e-3));
  CHECK(d.layout.n_sites() == 9);
  CHECK(d.loading.p_site.size() == 9);

  json j = {{"name", "fig3a-histogram"},
            {"imaging", {{"exposure_ms", 15.0}, {"saturation", 2.0}}},
            {"array", {{"rows", 4}, {"cols", 4}}},
            {"loading", {{"p", 0.6}}}};
  const Scenario sc = Scenario::from_json(j);
  CHECK(sc.name == "fig3a-histogram");
  CHECK(sc.imaging.exposure_s == doctest::Approx(15e-3));
  CHECK(sc.imaging.saturation == doctest::Approx(2.0));
  CHECK(sc.layout.n_sites() == 16);
  CHECK(sc.loading.p_site.size() == 16);
  CHECK(sc.loading.p_site[0] == doctest::Approx(0.6));
  // untouched sections keep defaults
  CHECK(sc.chain.tau_m_s == doctest::Approx(0.54));

  // the required field is named in the error
  json missing = {{"name", "x"}};
  CHECK_THROWS_WITH_AS(Scenario::from_json(missing),
                       doctest::Contains("imaging.exposure_ms"), ConfigError);
  json bad_type = j;
  bad_type["imaging"]["saturation"] = "high";
  CHECK_THROWS_AS(Scenario::from_json(bad_type), ConfigError);
  json bad_loading = j;
  bad_loading["loading"] = {{"p_site", {0.5, 0.5}}};
  CHECK_THROWS_AS(Scenario::from_json(bad_loading), ConfigError);
}

TEST_CASE("config: roundtrip through JSON preserves the scenario") {
  const Scenario d = Scenario::defaults();
  const Scenario back = Scenario::from_json(d.to_json());
  CHECK(back.imaging.detuning == doctest::Approx(d.imaging.detuning));
  CHECK(back.imaging.detection_efficiency ==
        doctest::Approx(d.imaging.detection_efficiency));
  CHECK(back.trap.waist_m == doctest::Approx(d.trap.waist_m));
  CHECK(back.chain.p_m == doctest::Approx(d.chain.p_m));
  CHECK(back.run.seed == d.run.seed);
  CHECK(back.run.exposures_s.size() == d.run.exposures_s.size());
  CHECK(config_hash(back.to_json()) == config_hash(d.to_json()));
}

TEST_CASE("config: dotted-path overrides and stable hashing") {
  json j = {{"imaging", {{"exposure_ms", 30.0}}}};
  set_by_path(j, "imaging.exposure_ms", "15");
  CHECK(j["imaging"]["exposure_ms"].get<double>() == 15.0);
  set_by_path(j, "run.seed", "99");
  CHECK(j["run"]["seed"].get<int>() == 99);
  set_by_path(j, "name", "fig4-loading");
  CHECK(j["name"].get<std::string>() == "fig4-loading");
  CHECK_THROWS_AS(set_by_path(j, ".bad", "1"), ConfigError);

  // hash is invariant under key ordering in the source text
  const json a = json::parse(R"({"alpha": 1, "beta": {"x": 2, "y": 3}})");
  const json b = json::parse(R"({"beta": {"y": 3, "x": 2}, "alpha": 1})");
  CHECK(config_hash(a) == config_hash(b));
  const json c = json::parse(R"({"alpha": 1, "beta": {"x": 2, "y": 4}})");
  CHECK(config_hash(a) != config_hash(c));
}

TEST_CASE("pipelines: unknown name and config file errors") {
  TempDir td;
  CHECK(known_pipeline("fig3bcd-fidelity-jumps"));
  CHECK(known_pipeline("rr-thermometry"));
  CHECK_FALSE(known_pipeline("fig9-imaginary"));

  Scenario sc = Scenario::defaults();
  sc.name = "fig9-imaginary";
  CHECK_THROWS_WITH_AS(run_scenario(sc, td.path), doctest::Contains("fig9"),
                       ConfigError);

  CHECK_THROWS_AS(load_config_file(td.path / "nope.json"), ConfigError);
  std::ofstream(td.path / "broken.json") << "{not json";
  CHECK_THROWS_WITH_AS(load_config_file(td.path / "broken.json"),
                       doctest::Contains("parse error"), ConfigError);
}

TEST_CASE("pipelines: identical config and seed give byte-identical outputs") {
  TempDir td;
  Scenario sc = Scenario::defaults();
  sc.name = "fig4-loading";
  sc.run.n_shots = 2000;
  const auto out1 = td.path / "run1";
  const auto out2 = td.path / "run2";
  const json m1 = run_scenario(sc, out1);
  const json m2 = run_scenario(sc, out2);
  CHECK(m1["all_pass"] == m2["all_pass"]);
  CHECK(m1["config_hash"] == m2["config_hash"]);
  CHECK(slurp(out1 / "loading.csv") == slurp(out2 / "loading.csv"));
  CHECK(slurp(out1 / "manifest.json") == slurp(out2 / "manifest.json"));
  // the manifest records the seed and a parameter snapshot
  CHECK(m1["seed"].get<std::uint64_t>() == sc.run.seed);
  CHECK(m1["parameters"]["run"]["n_shots"].get<std::int64_t>() == 2000);
}

TEST_CASE("simulate_stack is invariant under the worker count") {
  Scenario sc = Scenario::defaults();
  sc.run.jobs = 1;
  const auto a = simulate_stack(sc, 20e-3, 6, {}, 2718);
  sc.run.jobs = 8;
  const auto b = simulate_stack(sc, 20e-3, 6, {}, 2718);
  REQUIRE(a.frames.size() == b.frames.size());
  for (std::size_t k = 0; k < a.frames.size(); ++k)
    CHECK(a.frames[k].counts == b.frames[k].counts);
}
