#pragma once

// Flat "key = value" configuration with layered overrides:
//   defaults < config file < environment (RSC_<KEY>) < command line.
//
// The environment name of a key is RSC_ followed by the key upper-cased with
// '.' replaced by '_': train.lambda → RSC_TRAIN_LAMBDA, critic.n_critic →
// RSC_CRITIC_N_CRITIC.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rsc {

inline constexpr const char* kEnvPrefix = "RSC_";

class KvConfig {
 public:
  KvConfig() = default;

  // Parses "key = value" lines; '#' starts a comment. Unknown keys raise
  // ConfigError, as does a missing file.
  static KvConfig load_file(const std::filesystem::path& path);
  static KvConfig parse(const std::string& text, const std::string& origin = "<string>");

  // Every key understood by the toolchain, with its default value.
  static const std::map<std::string, std::string>& known_keys();
  static std::string env_name(const std::string& key);

  void apply_env();
  void set(const std::string& key, const std::string& value);
  // "key=value" form used by --set.
  void set_assignment(const std::string& assignment);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  // Explicit value or the registered default.
  std::string get(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::size_t> get_sizes(const std::string& key) const;

  const std::map<std::string, std::string>& values() const noexcept { return values_; }
  // Every known key with its effective value.
  std::map<std::string, std::string> effective() const;

 private:
  std::map<std::string, std::string> values_;
};

std::vector<std::string> split(const std::string& text, char sep);
std::string trim(const std::string& s);

}  // namespace rsc
