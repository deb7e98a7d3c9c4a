// SPDX-License-Identifier: Apache-2.0
//
// Flat "key = value" configuration covering every trainer and environment
// field. Lines starting with '#' and blank lines are ignored.

#ifndef CAPGRPO_CONFIG_HPP_
#define CAPGRPO_CONFIG_HPP_

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "capgrpo/trainer.hpp"

namespace capgrpo {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(key.empty() ? message : key + ": " + message), key_(std::move(key)) {}

  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

using Settings = std::vector<std::pair<std::string, std::string>>;

// Throws ConfigError on a line without '='.
Settings parse_settings(std::istream& in, std::string_view source_name);
// "key=value" strings, as given on a command line.
Settings parse_overrides(std::span<const std::string> items);

// Throws ConfigError naming the key for unknown keys or bad values.
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value);
void apply_settings(RunConfig& cfg, const Settings& settings);

// Defaults overlaid with the file. Throws ConfigError when unreadable.
RunConfig load_run_config(const std::filesystem::path& path);

// Runs both validators, reporting failures as ConfigError with the key.
void validate_run_config(const RunConfig& cfg);

// Every key with its resolved value, one per line, in a fixed order.
std::string render_config(const RunConfig& cfg);
std::vector<std::string> config_keys();

// Shortest decimal text that parses back to the same double.
std::string format_double(double x);

}  // namespace capgrpo

#endif  // CAPGRPO_CONFIG_HPP_
