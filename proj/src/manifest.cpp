#include "chaosot/manifest.hpp"

#include <cstdio>

#include <json.hpp>

#include "chaosot/binary_io.hpp"
#include "chaosot/error.hpp"

namespace chaosot {

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void RunManifest::add_input(const std::string& path) { input_digests[path] = hex64(fnv1a64(io::read_file(path))); }

void RunManifest::add_output(const std::string& path) {
  output_digests[path] = hex64(fnv1a64(io::read_file(path)));
}

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["argv"] = argv;
  j["config"] = config;
  j["inputs"] = input_digests;
  j["outputs"] = output_digests;
  j["seed"] = seed;
  j["version"] = version;
  j["wall_seconds"] = wall_seconds;
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.argv = j.at("argv").get<std::vector<std::string>>();
    m.config = j.at("config").get<std::map<std::string, std::string>>();
    m.input_digests = j.at("inputs").get<std::map<std::string, std::string>>();
    m.output_digests = j.at("outputs").get<std::map<std::string, std::string>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.version = j.at("version").get<std::string>();
    m.wall_seconds = j.at("wall_seconds").get<double>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
}

std::string manifest_path(const std::string& out) { return out + ".manifest.json"; }

void write_manifest(const RunManifest& m, const std::string& out) {
  io::write_text_atomic(manifest_path(out), m.to_json());
}

}  // namespace chaosot
