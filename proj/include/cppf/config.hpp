#pragma once

#include "cppf/mlp.hpp"
#include "cppf/pipeline.hpp"
#include "cppf/predictor.hpp"
#include "cppf/scene.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace cppf {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Training data drawn from a generated dataset.
struct TrainDataConfig {
  /// Tuples drawn fresh from every stored view each epoch.
  int tuples_per_view = 256;
};

struct RunConfig {
  std::vector<std::string> meshes{"builtin:lshape"};
  int views = 10;
  std::string output = "out";
  PipelineConfig pipeline;
  NoiseConfig noise;
  PredictorConfig predictor;
  OraclePredictorConfig oracle;
  TrainDataConfig train;

  /// Throws ConfigError; `check_files` also requires mesh paths to exist.
  void validate(bool check_files = false) const;
};

/// Parses `key = value` lines grouped under `[section]` headers. `#` starts a
/// comment. Unknown keys are errors. Unspecified keys keep their defaults.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::string& path, RunConfig base = {});

/// Applies one `section.key=value` override.
void apply_override(RunConfig& cfg, const std::string& assignment);

/// Every key in parseable form; parse_config(dump_config(c)) == c.
std::string dump_config(const RunConfig& cfg);

}  // namespace cppf
