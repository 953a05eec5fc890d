#pragma once

#include <atomic>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace coprompt::app {

/// Flat key/value pipeline settings. Nested JSON objects in a config file
/// flatten to dotted keys ("beam.width"). Precedence: --set > file > default.
class Config {
 public:
  void load_file(const std::filesystem::path& path);
  /// `key=value`; the value is read as JSON when it parses, else as a string.
  void set(const std::string& assignment);
  void set(const std::string& key, nlohmann::json value) { values_[key] = std::move(value); }

  bool has(const std::string& key) const { return values_.contains(key); }
  std::string str(const std::string& key, const std::string& fallback) const;
  std::string str(const std::string& key) const;  // required
  double num(const std::string& key, double fallback) const;
  std::size_t count(const std::string& key, std::size_t fallback) const;
  std::vector<std::size_t> counts(const std::string& key, std::vector<std::size_t> fallback) const;
  std::filesystem::path existing_path(const std::string& key) const;  // required, must exist

  const std::map<std::string, nlohmann::json>& values() const { return values_; }

 private:
  std::map<std::string, nlohmann::json> values_;
};

/// Subcommands: index, retrieve, rerank, optimize, eval, score-dist.
const std::vector<std::string>& command_names();

/// Runs one subcommand. Returns the process exit status; errors are printed
/// to `err` prefixed with the failing stage.
int run_command(const std::string& command, const Config& config, std::ostream& out,
                std::ostream& err, const std::atomic<bool>* cancel = nullptr);

}  // namespace coprompt::app
