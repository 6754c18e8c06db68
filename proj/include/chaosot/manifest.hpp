#pragma once

// Provenance record written next to every CLI output.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace chaosot {

inline constexpr const char* kArtifactVersion = "0.1.0";

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);
std::string hex64(std::uint64_t v);

struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  std::map<std::string, std::string> config;
  std::map<std::string, std::string> input_digests;  // path -> hex FNV-1a
  std::map<std::string, std::string> output_digests;
  std::uint64_t seed = 0;
  std::string version = kArtifactVersion;
  double wall_seconds = 0.0;

  void add_input(const std::string& path);
  void add_output(const std::string& path);
  std::string to_json() const;
  static RunManifest from_json(const std::string& text);
};

/// `out` + ".manifest.json".
std::string manifest_path(const std::string& out);
void write_manifest(const RunManifest& m, const std::string& out);

}  // namespace chaosot
