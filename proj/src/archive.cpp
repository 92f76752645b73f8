#include "tweezer/archive.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include <json.hpp>

namespace twz {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'A', 'T', 'W', 'Z', 'F', 'R', 'M', '1'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& os, std::uint64_t v) {
  write_u32(os, static_cast<std::uint32_t>(v));
  write_u32(os, static_cast<std::uint32_t>(v >> 32));
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw ArchiveError("archive: truncated file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t read_u64(std::istream& is) {
  const std::uint64_t lo = read_u32(is);
  const std::uint64_t hi = read_u32(is);
  return lo | (hi << 32);
}

json dump_json_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ArchiveError("archive: cannot open " + path.string());
  json j;
  is >> j;
  return j;
}

}  // namespace

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

void write_frame_stack(const std::filesystem::path& path, const FrameStack& stack) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ArchiveError("archive: cannot write " + path.string());
  json header = {
      {"rows", stack.layout.rows},
      {"cols", stack.layout.cols},
      {"roi_px", stack.layout.roi_px},
      {"exposure_s", stack.exposure_s},
      {"frame_period_s", stack.frame_period_s},
      {"frames_per_record", stack.frames_per_record},
      {"seed", stack.seed},
      {"n_frames", stack.frames.size()},
  };
  const std::string hs = header.dump();
  os.write(kMagic, 8);
  write_u32(os, kVersion);
  write_u32(os, static_cast<std::uint32_t>(hs.size()));
  os.write(hs.data(), static_cast<std::streamsize>(hs.size()));

  std::uint64_t checksum = 0xCBF29CE484222325ULL;
  for (const auto& f : stack.frames) {
    if (f.width != stack.layout.width() || f.height != stack.layout.height())
      throw ArchiveError("archive: frame geometry does not match layout");
    for (std::int32_t c : f.counts) write_u32(os, static_cast<std::uint32_t>(c));
    checksum = fnv1a64(f.counts.data(), f.counts.size() * sizeof(std::int32_t),
                       checksum);
  }
  write_u64(os, checksum);
  if (!os) throw ArchiveError("archive: write failed for " + path.string());
}

FrameStack read_frame_stack(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ArchiveError("archive: cannot open " + path.string());
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw ArchiveError("archive: bad magic in " + path.string());
  const std::uint32_t version = read_u32(is);
  if (version != kVersion)
    throw ArchiveError("archive: version mismatch (file v" +
                       std::to_string(version) + ", reader v" +
                       std::to_string(kVersion) + ")");
  const std::uint32_t hlen = read_u32(is);
  std::string hs(hlen, '\0');
  is.read(hs.data(), hlen);
  if (!is) throw ArchiveError("archive: truncated header");
  const json header = json::parse(hs);

  FrameStack stack;
  stack.layout.rows = header.at("rows").get<int>();
  stack.layout.cols = header.at("cols").get<int>();
  stack.layout.roi_px = header.at("roi_px").get<int>();
  stack.exposure_s = header.at("exposure_s").get<double>();
  stack.frame_period_s = header.at("frame_period_s").get<double>();
  stack.frames_per_record = header.value("frames_per_record", std::int64_t{0});
  stack.seed = header.at("seed").get<std::uint64_t>();
  const std::size_t n_frames = header.at("n_frames").get<std::size_t>();

  const int w = stack.layout.width(), h = stack.layout.height();
  stack.frames.resize(n_frames);
  std::uint64_t checksum = 0xCBF29CE484222325ULL;
  for (auto& f : stack.frames) {
    f.width = w;
    f.height = h;
    f.counts.resize(static_cast<std::size_t>(w) * h);
    for (auto& c : f.counts) c = static_cast<std::int32_t>(read_u32(is));
    for (int s = 0; s < stack.layout.n_sites(); ++s)
      f.site_centers.push_back(stack.layout.site_center(s));
    checksum = fnv1a64(f.counts.data(), f.counts.size() * sizeof(std::int32_t),
                       checksum);
  }
  if (read_u64(is) != checksum)
    throw ArchiveError("archive: checksum mismatch in " + path.string());
  return stack;
}

void write_timelines(const std::filesystem::path& path,
                     const std::vector<AtomTimeline>& timelines,
                     std::uint64_t seed) {
  json j;
  j["format"] = "twz-timelines";
  j["version"] = 1;
  j["seed"] = seed;
  json arr = json::array();
  for (const auto& tl : timelines) {
    json states = json::array(), photons = json::array(), bright = json::array();
    for (const auto& fr : tl.frames) {
      states.push_back(static_cast<int>(fr.internal));
      photons.push_back(fr.photons_emitted);
      bright.push_back(fr.bright_time_s);
    }
    arr.push_back({{"site", tl.site},
                   {"internal", std::move(states)},
                   {"photons", std::move(photons)},
                   {"bright_time_s", std::move(bright)}});
  }
  j["timelines"] = std::move(arr);
  std::ofstream os(path);
  if (!os) throw ArchiveError("archive: cannot write " + path.string());
  os << j.dump();
}

std::vector<AtomTimeline> read_timelines(const std::filesystem::path& path) {
  const json j = dump_json_file(path);
  if (j.value("format", "") != "twz-timelines")
    throw ArchiveError("archive: not a timeline file: " + path.string());
  if (j.value("version", 0) != 1)
    throw ArchiveError("archive: timeline version mismatch");
  std::vector<AtomTimeline> out;
  for (const auto& e : j.at("timelines")) {
    AtomTimeline tl;
    tl.site = e.at("site").get<int>();
    const auto& st = e.at("internal");
    const auto& ph = e.at("photons");
    const auto& bt = e.at("bright_time_s");
    for (std::size_t i = 0; i < st.size(); ++i) {
      FrameRecord fr;
      fr.internal = static_cast<InternalState>(st[i].get<int>());
      fr.photons_emitted = ph[i].get<std::int64_t>();
      fr.bright_time_s = bt[i].get<double>();
      tl.frames.push_back(fr);
    }
    out.push_back(std::move(tl));
  }
  return out;
}

void write_classified_stack(const std::filesystem::path& path,
                            const ClassifiedStack& stack, std::uint64_t seed) {
  json j;
  j["format"] = "twz-classified";
  j["version"] = 1;
  j["seed"] = seed;
  j["exposure_s"] = stack.exposure_s;
  j["frame_period_s"] = stack.frame_period_s;
  j["frames_per_record"] = stack.frames_per_record;
  json sites = json::array();
  for (const auto& row : stack.labels) {
    json labels = json::array(), scores = json::array();
    for (const auto& l : row) {
      labels.push_back(l.bright ? 1 : 0);
      scores.push_back(l.score);
    }
    sites.push_back({{"bright", std::move(labels)}, {"score", std::move(scores)}});
  }
  j["sites"] = std::move(sites);
  std::ofstream os(path);
  if (!os) throw ArchiveError("archive: cannot write " + path.string());
  os << j.dump();
}

ClassifiedStack read_classified_stack(const std::filesystem::path& path) {
  const json j = dump_json_file(path);
  if (j.value("format", "") != "twz-classified")
    throw ArchiveError("archive: not a classified stack: " + path.string());
  if (j.value("version", 0) != 1)
    throw ArchiveError("archive: classified stack version mismatch");
  ClassifiedStack cs;
  cs.exposure_s = j.at("exposure_s").get<double>();
  cs.frame_period_s = j.at("frame_period_s").get<double>();
  cs.frames_per_record = j.value("frames_per_record", std::int64_t{0});
  for (const auto& site : j.at("sites")) {
    std::vector<SiteFrameLabel> row;
    const auto& lab = site.at("bright");
    const auto& sc = site.at("score");
    for (std::size_t i = 0; i < lab.size(); ++i) {
      SiteFrameLabel l;
      l.bright = lab[i].get<int>() != 0;
      l.score = sc[i].get<double>();
      row.push_back(l);
    }
    cs.labels.push_back(std::move(row));
  }
  return cs;
}

}  // namespace twz
