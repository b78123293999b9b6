#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vlab/model.hpp"
#include "vlab/pipeline.hpp"
#include "vlab/train.hpp"

namespace vlab {

inline constexpr const char* kToolVersion = "0.1.0";

/// Flat key=value run configuration. Every tunable default lives here under a
/// named key; unknown keys are rejected; the effective configuration is echoed
/// into every artifact header. Precedence: built-in defaults < config file <
/// command-line flags.
class RunConfig {
 public:
  RunConfig();

  void load_file(const std::filesystem::path& path);
  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  const std::string& get(const std::string& key) const;
  int64_t get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  uint64_t seed() const { return uint64_t(get_int("seed")); }

  ModelConfig model_config() const;
  TrainConfig train_config() const;
  PipelineConfig pipeline_config() const;

  /// "key=value" lines of the full effective configuration, sorted by key.
  std::vector<std::string> header_lines() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace vlab
