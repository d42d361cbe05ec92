#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "salnet/pipeline.hpp"

namespace salnet::cli {

enum ExitCode : int { kSuccess = 0, kFileFailures = 1, kConfigError = 2 };

/// Everything a `run` invocation needs. Defaults are the PG + manifold-ranking
/// configuration.
struct RunConfig {
  std::filesystem::path weights;
  PipelineOptions pipeline;
  bool bps = false;
  std::vector<std::filesystem::path> inputs;
  std::filesystem::path out;
  std::filesystem::path dump_stages;
  unsigned threads = 0;  // 0: one worker per hardware thread
  bool time = false;

  /// Throws std::invalid_argument describing the first inconsistency.
  void validate() const;

  /// Output PNG path for the i-th input.
  std::filesystem::path output_for(std::size_t index) const;
};

/// "w3,w4,w5,wfc" -> four non-negative weights.
std::array<float, 4> parse_layer_weights(const std::string& text);

/// JSON text describing every numeric setting that shaped an output.
std::string describe_effective_config(const RunConfig& config, const std::filesystem::path& input);

/// Path of the sidecar written next to an output image.
std::filesystem::path sidecar_path(const std::filesystem::path& output);

}  // namespace salnet::cli
