#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "cowqkd/channel_model.hpp"
#include "cowqkd/protocol_model.hpp"
#include "cowqkd/sdp_engine.hpp"

namespace cowqkd {

double binary_entropy(double x);

/// max(0, G[1 - h2(ē_c) - h2(min(δ̄/G, 1/2))]) / (2m); 0 when G = 0 or ē_c >= 1/2.
double rate_from_statistics(double gain, double e_bar, double delta_max, int m);

struct PhaseErrorOptions {
  SolverOptions solver;
  /// Restrict the variable to a direct sum over shield levels (randomized mode).
  bool shield_blocks = true;
  /// Flip Alice's sifted-bit labels in every filter.
  bool flip_labels = false;
};

struct PhaseErrorResult {
  double delta_max = 0.0;  // certified upper bound on δ̄
  double primal_delta = 0.0;  // δ̄ of the returned primal point
  double gain = 0.0;
  double solver_gap = 0.0;    // certified bound minus primal value, in δ̄ units
  int iterations = 0;
  int constraints = 0;        // after dependency removal
  bool converged = false;
};

/// Reduced SDP for min tr(X_δ̄ ρ) over the observed-statistics feasible set.
///
/// The variable is split into Bob's single-photon sector and the inconclusive
/// state |a>, restricted to the support of Alice's reduced state (Walsh
/// basis) and whitened so that the Alice marginal condition reads
/// tr_B J + W = 1. Every operator involved commutes with the sector
/// projectors, so the split loses nothing.
struct PhaseErrorProblem {
  SdpProblem sdp;     // maximize tr(-X̃ J) in the whitened coordinates
  double scale = 1.0; // ρ_photon = scale · (C ⊗ 1) J (C ⊗ 1)^T
  double gain = 0.0;
  double bit_error = 0.0;
  /// Per group, the map C from reduced coordinates into Alice's space
  /// (rows follow alice_layout()). Blocks 2g and 2g+1 of the SDP are J and W.
  std::vector<Eigen::MatrixXd> alice_maps;
};
PhaseErrorProblem build_phase_error_problem(const BlockConfig& config, const ChannelParams& params,
                                            const PhaseErrorOptions& options = {});

/// Lifts SDP blocks of a PhaseErrorProblem back to a state on the joint space.
HermitianOperator reconstruct_state(const BlockConfig& config, const PhaseErrorProblem& problem,
                                    const std::vector<CMatrix>& blocks);

/// δ̄^max = G/2 - min tr(X_δ̄ ρ), with the minimum replaced by its certified lower bound.
PhaseErrorResult max_phase_error(const BlockConfig& config, const ChannelParams& params,
                                 const PhaseErrorOptions& options = {});

/// The same quantity from the unreduced problem on the full joint space:
/// maximize tr(F_δ̄ ρ) subject to every observed constraint. Only practical
/// for small m; used to cross-check the reduction.
PhaseErrorResult max_phase_error_full(const BlockConfig& config, const ChannelParams& params,
                                      const SolverOptions& solver = {});

struct RatePoint {
  double loss_db = 0.0;
  double mu = 0.0;
  int m = 0;
  double G = 0.0;
  double e_bar = 0.0;
  double delta_max = 0.0;
  double rate_per_pulse = 0.0;
  double solver_gap = 0.0;
  bool solved = true;   // false when the SDP failed at this point
  bool flagged = false; // intensity search found no positive rate
};

RatePoint compute_rate_point(const BlockConfig& config, const ChannelParams& params,
                             const PhaseErrorOptions& options = {});

struct IntensitySearch {
  double mu_lo = 1e-5;
  double mu_hi = 1.0;
  int prescan_points = 12;
  double relative_tolerance = 1e-3;
  int threads = 1;
};

/// Log-grid prescan followed by golden-section refinement in log μ.
std::pair<double, RatePoint> optimize_intensity(const BlockConfig& config, const ChannelParams& params,
                                                const IntensitySearch& search, const PhaseErrorOptions& options = {});

struct SweepSpec {
  std::vector<double> loss_db;
  double epsilon = 1e-7;
  double e_d = 0.01;
  double e_m = 0.005;
  std::optional<double> fixed_mu;  // otherwise optimize
  IntensitySearch search;
  double cutoff_resolution_db = 0.1;
  bool refine_cutoff = true;
  int threads = 1;
};

struct SweepResult {
  std::vector<RatePoint> points;
  std::optional<double> cutoff_loss_db;
  int failed_points = 0;
};

SweepResult sweep_and_cutoff(const BlockConfig& config, const SweepSpec& spec, const PhaseErrorOptions& options = {});

}  // namespace cowqkd
