#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ldp/optimize.hpp"

namespace ldp {

// Configuration files are a sectioned key-value text format:
//
//   # comment (also ';'); full-line only
//   preset = "image-synthesis"     # optional, before any section
//   [run]
//   iterations = 1000
//   prompt = "a photograph"
//
// Keys resolve to "section.key". Unknown keys are rejected; every value is
// type-checked against the schema. A preset provides the base values; file
// entries, then CLI overrides, are applied on top.

struct ParsedConfig {
    std::string preset;  // empty when the file names none
    std::vector<std::pair<std::string, std::string>> entries;
};

ParsedConfig parse_config_text(const std::string& text);
ParsedConfig load_config_file(const std::string& path);

// schema-checked; throws ConfigError for unknown keys or bad values
void apply_entry(RunConfig& cfg, const std::string& key, const std::string& value);

// preset (may be empty) -> file entries -> overrides
RunConfig build_config(const std::string& preset_name,
                       const std::vector<std::pair<std::string, std::string>>& file_entries,
                       const std::vector<std::pair<std::string, std::string>>& overrides);

// every schema key with its current value, canonically formatted
std::map<std::string, std::string> config_kv(const RunConfig& cfg);

// canonical sectioned document; parse(serialize(cfg)) reproduces cfg exactly
std::string serialize_config(const RunConfig& cfg);

// all schema keys in declaration order (drives CLI flag generation)
std::vector<std::string> config_keys();

// shortest decimal text that parses back to exactly v
std::string format_double(double v);

}  // namespace ldp
