#pragma once

#include <filesystem>
#include <ostream>

#include "cli/run_config.hpp"

namespace salnet::cli {

/// Entry point shared by the executable and the tests. Returns the process
/// exit code (see ExitCode).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

int run_images(const RunConfig& config, std::ostream& out, std::ostream& err);

int eval_maps(const std::filesystem::path& maps, const std::filesystem::path& gt,
              const std::filesystem::path& csv, std::ostream& out, std::ostream& err);

/// Runs bp, fg and pg on one image from a single forward pass and writes
/// <stem>_bp.png, <stem>_fg.png, <stem>_pg.png into out_dir.
int compare_modes(const RunConfig& config, std::ostream& out, std::ostream& err);

int inspect_weights(const std::filesystem::path& path, std::ostream& out, std::ostream& err);

}  // namespace salnet::cli
