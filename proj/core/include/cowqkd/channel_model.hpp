#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "cowqkd/operator_space.hpp"
#include "cowqkd/protocol_model.hpp"

namespace cowqkd {

struct ChannelParams {
  double eta_channel = 1.0;
  double eta_det = 1.0;
  double epsilon = 1e-7;
  double e_d = 0.01;
  double e_m = 0.005;

  void validate() const;
  [[nodiscard]] double eta_sys() const { return eta_channel * eta_det; }
  [[nodiscard]] double loss_db() const;
  /// Channel with the whole system loss in eta_channel.
  static ChannelParams from_loss_db(double loss_db, double epsilon = 1e-7, double e_d = 0.01, double e_m = 0.005);
};

struct DataClickProbs {
  double p_correct = 0.0;
  double p_error = 0.0;
  double p_inc = 0.0;
};

/// Relation between the two bits of a monitored pair: both 0, both 1, or different.
enum class PairPattern { same_01, same_10, different };

/// Single-click probabilities in the two monitoring slots of an interior
/// pair. "odd" is the first slot of a bit (0-based slot 2l, 1-based 2l-1),
/// "even" the second. same_01 puts both pulses into the odd slots (both bits
/// 0), so the odd slots interfere brightly; same_10 is the mirror case.
struct MonitoringClickProbs {
  double odd_plus = 0.0;
  double odd_minus = 0.0;
  double even_plus = 0.0;
  double even_minus = 0.0;
};

DataClickProbs data_click_probs(const BlockConfig& config, const ChannelParams& params);
MonitoringClickProbs monitoring_click_probs(const BlockConfig& config, const ChannelParams& params, PairPattern pattern);

struct SiftedStatistics {
  double gain = 0.0;       // G
  double bit_error = 0.0;  // ē_c
};
SiftedStatistics sifted_statistics(const BlockConfig& config, const ChannelParams& params);

/// (p+ - p-)/(p+ + p-) of the bright same-state monitoring slot.
double visibility(const BlockConfig& config, const ChannelParams& params);

/// Structured description of an observed constraint. Bob-outcome constraints
/// carry the Alice pattern and the Bob operator separately; tomography
/// constraints carry the Alice basis element index.
struct Constraint {
  enum class Kind { data, monitoring, tomography, normalization };
  Kind kind = Kind::data;
  int pattern = -1;  // Alice bit pattern (data, monitoring)
  int setting = 0;   // 0 data, l+1 monitoring pair l
  int outcome = -1;  // index within the setting's conclusive list
  int basis = -1;    // hermitian_basis index (tomography)
  HermitianOperator op;
  double value = 0.0;
};

struct ConstraintSet {
  std::vector<Constraint> constraints;
  double gain = 0.0;
  double bit_error = 0.0;
  double visibility = 0.0;
};

/// Data, monitoring, tomography and normalization constraints for the
/// honest channel. With `with_operators` false the operators are left empty
/// (the pipeline builds its own reduced representation from the indices).
ConstraintSet observed_constraints(const BlockConfig& config, const ChannelParams& params, bool with_operators = true);

struct OracleFrequency {
  double frequency = 0.0;
  double std_error = 0.0;
};

struct OracleTable {
  std::vector<OracleFrequency> conclusive;  // same order as bob_povm(config)[setting].conclusive
  OracleFrequency inconclusive;
  std::int64_t samples = 0;
};

/// Sample-wise simulation of the optical chain for one Alice pattern and
/// measurement setting (0 data, l+1 monitoring pair l). Deterministic for a
/// given seed and independent of the number of worker threads.
OracleTable monte_carlo_oracle(const BlockConfig& config, const ChannelParams& params, int pattern, int setting,
                               std::int64_t samples, std::uint64_t seed, int threads = 1);

}  // namespace cowqkd
