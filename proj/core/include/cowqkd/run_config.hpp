#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cowqkd/errors.hpp"
#include "cowqkd/keyrate_pipeline.hpp"
#include "cowqkd/protocol_model.hpp"

namespace cowqkd {

enum class OutputFormat { csv, json };

struct RunConfig {
  PhaseMode mode = PhaseMode::pure;
  int m = 3;
  int n_cut = 2;
  double epsilon = 1e-7;
  double e_d = 0.01;
  double e_m = 0.005;
  double loss_start_db = 0.0;
  double loss_end_db = 25.0;
  double loss_step_db = 1.0;
  std::optional<double> mu;  // fixed intensity; otherwise optimized
  double mu_lo = 1e-5;
  double mu_hi = 1.0;
  double tolerance = 1e-8;
  std::string out;  // empty: standard output
  OutputFormat format = OutputFormat::csv;
  int threads = 1;

  /// Throws ArgumentError when any field is out of range.
  void validate() const;
  [[nodiscard]] std::vector<double> loss_grid() const;
  [[nodiscard]] BlockConfig block() const;
  [[nodiscard]] SweepSpec sweep() const;
  [[nodiscard]] PhaseErrorOptions solver_options() const;
};

/// Bad command line or config file. Maps to exit code 2.
class UsageError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

/// --help was given; what() holds the help text.
class HelpRequested : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int usage = 2;
inline constexpr int numeric = 3;
inline constexpr int partial = 4;
}  // namespace exit_code

/// Parses flags (without the program name). `--config FILE` reads flat
/// key=value lines whose keys are the long flag names; flags on the command
/// line win over the file.
RunConfig parse_config(const std::vector<std::string>& args);

/// Sweep output as CSV (one row per loss point, then a `#` summary line) or JSON.
void write_sweep(std::ostream& os, const SweepResult& result, OutputFormat format);

/// Runs the sweep, writes the artifact to config.out (or `fallback`) and
/// returns the exit code: ok, partial when some points failed, numeric when all did.
int run_sweep(const RunConfig& config, std::ostream& fallback);

}  // namespace cowqkd
