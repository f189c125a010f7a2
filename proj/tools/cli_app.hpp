#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

namespace geolens::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kConfigError = 2;
inline constexpr int kModelRejected = 3;
inline constexpr int kNumericFailure = 4;

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error("ConfigError: " + what) {}
};

class ModelRejected : public std::runtime_error {
public:
    explicit ModelRejected(const std::string& what) : std::runtime_error("ModelRejected: " + what) {}
};

// FNV-1a, 64 bit.
std::uint64_t fnv1a(const std::string& s);

// Hash of the resolved parameters ("section.key" -> value) that affect the
// numbers; run.threads and output.* are left out.
std::string config_hash(const std::string& command, const std::map<std::string, std::string>& resolved);

// Entry point of the geolens_cli binary.
int run_cli(int argc, const char* const* argv);

}  // namespace geolens::cli
