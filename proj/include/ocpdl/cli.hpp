#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ocpdl/tensor.hpp"

namespace ocpdl {

// Flat key=value run description: lines from a config file plus command-line
// overrides, last writer wins. Typed getters parse strictly and throw
// ConfigError on malformed values.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  // Parses "key = value" lines; blank lines and lines starting with '#' are
  // skipped. Throws IoError on unreadable files, ConfigError on bad lines.
  static KeyValueConfig from_file(const std::filesystem::path& path);

  void set(std::string key, std::string value);
  bool has(const std::string& key) const;

  std::string get_string(const std::string& key) const;  // throws when absent
  std::string get_string(const std::string& key, std::string fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::uint64_t get_seed(const std::string& key, std::uint64_t fallback) const;

  // Rejects keys outside the allowed set (catches config-file typos).
  void require_known(const std::vector<std::string>& allowed) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// "30,30,500" -> {30, 30, 500}; every extent must be a positive integer.
Shape parse_shape(const std::string& text);

// Subcommand bodies. Each returns a process exit code: 0 on success, 2 on any
// configuration / input problem (message on stderr, no partial outputs), and
// cmd_diagnose returns 1 when a checked invariant fails.
int cmd_factorize(const KeyValueConfig& cfg);
int cmd_bench(const KeyValueConfig& cfg);
int cmd_diagnose(const KeyValueConfig& cfg);
int cmd_patches(const KeyValueConfig& cfg);

// Full command line (without the program name): subcommand, optional
// --config FILE, and --key VALUE overrides for that subcommand's keys.
int run_cli(const std::vector<std::string>& args);

}  // namespace ocpdl
