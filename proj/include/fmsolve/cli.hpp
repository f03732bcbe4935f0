#pragma once

#include "fmsolve/cfm.hpp"
#include "fmsolve/model_io.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fmsolve::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2, kNumeric = 3 };

inline constexpr int kConfigFormatVersion = 1;

/// Experiment configuration document. Every key is optional; unknown keys are
/// rejected.
///
///   {"format_version": 1, "seed": 0,
///    "dataset": {"kind": "moons", "n": 2000, "noise": 0.05, "dim": 2},
///    "train": {"epochs": 300, "batch_size": 256, "lr": 0.001,
///              "hidden": 256, "n_blocks": 4, "time_embed_dim": 64},
///    "solver_grid": [{"method": "rk4", "steps": 20},
///                    {"method": "dopri5", "atol": 1e-5, "rtol": 1e-5}],
///    "output_dir": "out"}
struct RunConfig {
  std::uint64_t seed = 0;
  cfm::TrainConfig train;  ///< train.dataset and train.seed mirror the top-level fields
  std::vector<cfm::SolverSpec> solver_grid;  ///< empty means the default grid
  std::filesystem::path output_dir = "out";
};

RunConfig parse_run_config(const io::Json& doc);
RunConfig load_run_config(const std::filesystem::path& path);

/// Runs one subcommand; argv[0] is the program name. Returns an ExitCode.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fmsolve::cli
