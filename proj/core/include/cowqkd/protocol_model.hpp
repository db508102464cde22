#pragma once

#include <string_view>
#include <vector>

#include "cowqkd/operator_space.hpp"

namespace cowqkd {

enum class PhaseMode { pure, randomized };

PhaseMode parse_phase_mode(std::string_view s);
std::string_view to_string(PhaseMode m);

/// Protocol parameters of one block of m bits (2m optical slots).
///
/// Slots are 0-based: bit l occupies slots 2l and 2l+1, value 0 puts the
/// pulse in slot 2l, value 1 in slot 2l+1. Bob's squashed space has the 2m
/// single-photon slot states followed by the inconclusive state |a> at 2m.
struct BlockConfig {
  int m = 3;
  double mu = 0.1;
  PhaseMode phase_mode = PhaseMode::pure;
  int n_cut = 2;
  int dimension_ceiling = kDefaultDimensionCeiling;

  /// Throws ArgumentError on m < 2, mu <= 0, n_cut < 1.
  void validate() const;

  [[nodiscard]] double lambda() const { return m * mu; }
  [[nodiscard]] int bits_dim() const { return 1 << m; }
  [[nodiscard]] int shield_dim() const { return phase_mode == PhaseMode::randomized ? n_cut + 1 : 1; }
  [[nodiscard]] int alice_dim() const { return bits_dim() * shield_dim(); }
  [[nodiscard]] int bob_dim() const { return 2 * m + 1; }
  [[nodiscard]] int inconclusive() const { return 2 * m; }

  /// m qubits, then the shield (randomized only).
  [[nodiscard]] SubsystemLayout alice_layout() const;
  /// Alice factors followed by Bob.
  [[nodiscard]] SubsystemLayout joint_layout() const;
};

/// Value of bit l in the m-bit pattern index i (bit 0 is the most significant).
inline int bit_of(int i, int l, int m) { return (i >> (m - 1 - l)) & 1; }
/// Whether pattern i puts a pulse into slot s.
inline bool occupied(int i, int s, int m) { return bit_of(i, s / 2, m) == s % 2; }

struct Announcement {
  int parity = 0;   // s % 2
  int slot = 0;     // s
  int partner = 0;  // s + 2 mod 2m, the later slot of the pair
  double weight = 0.5;
};

/// Filters for one announcement. filter_alice maps the two announced bit
/// qubits (basis index 2*i_l + i_l') onto the sifted bit; filter_bob maps the
/// squashed space onto Bob's sifted bit.
struct SiftingMaps {
  Announcement announcement;
  Eigen::Matrix<Complex, 2, 4> filter_alice;
  CMatrix filter_bob;  // 2 x (2m+1)
};

/// <psi_n^i|psi_n^j> = ((m - Hamming(i, j)) / m)^n.
double gram_overlap(int m, int n, const std::vector<int>& i, const std::vector<int>& j);

/// Poisson weight p_lambda(n).
double poisson(double lambda, int n);

/// Alice's reduced state: pure blocks give (rho^{m=1})^{⊗m}; randomized
/// blocks give the shield-tagged mixture with levels 1..n_cut and a collector.
HermitianOperator reduced_alice_state(const BlockConfig& config);

/// Gram-relation state of the n-photon block, 2^-m ((m - Δ)/m)^n.
HermitianOperator photon_block_state(int m, int n);

/// Spectrum of one shield block of Alice's state in the Walsh basis
/// h_k(i) = 2^{-m/2} (-1)^{k·i}. Values that vanish analytically are exact zeros.
struct AliceSpectrum {
  std::vector<double> weight;               // shield weight of each block (sums to 1)
  std::vector<std::vector<double>> values;  // per block, eigenvalue for each k, normalized block trace 1
};
AliceSpectrum alice_spectrum(const BlockConfig& config);

/// Orthogonal Walsh–Hadamard matrix on 2^m patterns, columns are h_k.
Eigen::MatrixXd walsh_matrix(int m);

/// Bob's squashed POVM, one family per measurement setting. Setting 0 is the
/// data line; setting l+1 (l = 0..m-2) monitors bit pair (l, l+1) with
/// |χ_c^±> = (|c> ± |c+2>)/sqrt2 for c = 2l, 2l+1. Each family lists its
/// conclusive elements followed by the inconclusive complement.
struct PovmSetting {
  std::vector<HermitianOperator> conclusive;
  HermitianOperator inconclusive;
};
std::vector<PovmSetting> bob_povm(const BlockConfig& config);

/// Monitoring vector |χ_c^±> on the squashed space.
CVector chi(int m, int c, int sign);

std::vector<Announcement> announcements(int m);
/// `flip_labels` swaps Alice's sifted-bit labels in every filter.
std::vector<SiftingMaps> announcement_filters(const BlockConfig& config, bool flip_labels = false);

/// F_A^dag F_A and F_A^dag σ_x F_A lifted to all m bits (identity elsewhere).
CMatrix alice_filter_projector(const SiftingMaps& v, int m);
CMatrix alice_filter_x(const SiftingMaps& v, int m);

/// P = Σ_v F_A^dag F_A ⊗ [1_shield] ⊗ F_B^dag F_B.
HermitianOperator gain_operator(const BlockConfig& config);
/// X_δ̄ = Σ_v F_A^dag σ_x F_A ⊗ [1_shield] ⊗ (1/2) F_B^dag σ_x F_B.
HermitianOperator phase_error_x(const BlockConfig& config, bool flip_labels = false);
/// F_δ̄ = P/2 - X_δ̄.
HermitianOperator phase_error_objective(const BlockConfig& config, bool flip_labels = false);

}  // namespace cowqkd
