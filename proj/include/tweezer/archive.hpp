#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "tweezer/analysis.hpp"
#include "tweezer/camera.hpp"
#include "tweezer/classify.hpp"
#include "tweezer/dynamics.hpp"

namespace twz {

struct ArchiveError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Self-describing binary container for frame stacks: magic, version, JSON
// header, row-major int32 payload, FNV-1a checksum. Bit-exact roundtrip.
void write_frame_stack(const std::filesystem::path& path, const FrameStack& stack);
FrameStack read_frame_stack(const std::filesystem::path& path);

// Timelines and classified stacks are small; they serialize as JSON.
void write_timelines(const std::filesystem::path& path,
                     const std::vector<AtomTimeline>& timelines,
                     std::uint64_t seed);
std::vector<AtomTimeline> read_timelines(const std::filesystem::path& path);

void write_classified_stack(const std::filesystem::path& path,
                            const ClassifiedStack& stack, std::uint64_t seed);
ClassifiedStack read_classified_stack(const std::filesystem::path& path);

std::uint64_t fnv1a64(const void* data, std::size_t len,
                      std::uint64_t seed = 0xCBF29CE484222325ULL);

}  // namespace twz
