#pragma once

// Flat `key = value` configuration files and per-system presets.

#include <string>
#include <vector>

#include "chaosot/training.hpp"

namespace chaosot {

struct ConfigKey {
  std::string name;
  std::string help;
};

/// Every accepted key with a one-line description.
const std::vector<ConfigKey>& config_keys();

/// Artifact defaults per system, carrying the published constants
/// (lambda, epsilon, p, window, stride, clips, warm-up).
TrainConfig preset(SystemKind system, Method method);

/// Applies one `key = value` assignment; throws FormatError on unknown keys
/// or malformed values.
void apply_config_value(TrainConfig& cfg, const std::string& key, const std::string& value);

/// Parses a whole file body on top of `cfg`. Errors name the offending line.
void apply_config_text(TrainConfig& cfg, const std::string& text, const std::string& source = "config");

/// Canonical text form, one `key = value` per line, suitable for re-parsing.
std::string config_to_text(const TrainConfig& cfg);

}  // namespace chaosot
