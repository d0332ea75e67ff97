#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ttifair/core.hpp"

namespace ttifair {

// Checks every EvalConfig invariant. Never throws; an empty result means valid.
std::vector<Violation> validate_config(const EvalConfig& cfg);

// Thrown by load_config/config_from_json when the document parses but is invalid.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<Violation> violations);
    const std::vector<Violation>& violations() const noexcept { return violations_; }

private:
    std::vector<Violation> violations_;
};

// Decodes the canonical config document. Missing optional keys take their
// defaults; type errors and invariant violations are collected into ConfigError.
EvalConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const EvalConfig& cfg);

// Reads and validates a config file. Throws ParseError on malformed text and
// ConfigError on violations.
EvalConfig load_config(const std::filesystem::path& path);
void save_config(const EvalConfig& cfg, const std::filesystem::path& path);

// Hex SHA-256 over the canonical JSON serialization.
std::string config_fingerprint(const EvalConfig& cfg);

}  // namespace ttifair
