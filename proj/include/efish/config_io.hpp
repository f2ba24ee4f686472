#ifndef EFISH_CONFIG_IO_HPP_
#define EFISH_CONFIG_IO_HPP_

#include <string>

#include "efish/config.hpp"

namespace efish {

// Strict parse: unknown keys are errors, every constraint is checked, all
// defaults are materialized and config_hash is filled in. An empty file
// yields the full-default config.
ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);

// Canonical serialized form (sorted keys, every field explicit).
std::string serialize_config(const ExperimentConfig& cfg);

// FNV-1a 64 over the canonical serialization.
std::uint64_t compute_config_hash(const ExperimentConfig& cfg);

// Validates constraints and fills config_hash; parse_config calls this.
void finalize_config(ExperimentConfig& cfg);

}  // namespace efish

#endif  // EFISH_CONFIG_IO_HPP_
