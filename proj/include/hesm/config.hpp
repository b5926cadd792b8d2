#pragma once

#include "hesm/sim.hpp"

#include <json.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hesm::config {

using json = nlohmann::json;

enum class ErrorKind { missing_file, malformed, schema, invariant };

const char* to_string(ErrorKind k);

class ConfigError : public std::runtime_error {
public:
    ConfigError(ErrorKind kind, std::string path, const std::string& what);
    ErrorKind kind() const { return kind_; }
    const std::string& path() const { return path_; } // dotted key path, may be empty

private:
    ErrorKind kind_;
    std::string path_;
};

struct OutputConfig {
    std::string trace_path = "trace.csv"; // relative paths resolve against the run directory
    bool plots = true;
};

struct Config {
    sim::SimConfig sim;
    OutputConfig output;
};

// Every omitted field takes its default; unknown keys are rejected.
Config from_json(const json& j);
Config parse_text(const std::string& text);
Config parse_file(const std::string& path);

// Full form with every field present. Keys come out sorted, so dumping it
// gives the canonical text.
json to_json(const Config& c);
std::string canonical_text(const Config& c);

// FNV-1a over the canonical text.
std::uint64_t digest(const Config& c);
std::string digest_hex(const Config& c);

// Replace the value at a dotted key path (e.g. "plant.C2") and re-parse.
Config with_value(const Config& c, const std::string& key_path, const json& value);

} // namespace hesm::config
