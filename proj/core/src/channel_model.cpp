#include "cowqkd/channel_model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include "cowqkd/errors.hpp"

namespace cowqkd {

void ChannelParams::validate() const {
  if (!(eta_channel > 0.0 && eta_channel <= 1.0)) throw ArgumentError("eta_channel must lie in (0, 1]");
  if (!(eta_det > 0.0 && eta_det <= 1.0)) throw ArgumentError("eta_det must lie in (0, 1]");
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw ArgumentError("dark count probability must lie in [0, 1)");
  if (!(e_d >= 0.0 && e_d < 0.5)) throw ArgumentError("e_d must lie in [0, 1/2)");
  if (!(e_m >= 0.0 && e_m < 0.5)) throw ArgumentError("e_m must lie in [0, 1/2)");
}

double ChannelParams::loss_db() const { return 0.0 - 10.0 * std::log10(eta_sys()); }

ChannelParams ChannelParams::from_loss_db(double loss_db, double epsilon, double e_d, double e_m) {
  if (!(loss_db >= 0.0) || !std::isfinite(loss_db)) throw ArgumentError("loss must be a finite non-negative dB value");
  ChannelParams p;
  p.eta_channel = std::pow(10.0, -loss_db / 10.0);
  p.eta_det = 1.0;
  p.epsilon = epsilon;
  p.e_d = e_d;
  p.e_m = e_m;
  return p;
}

namespace {

struct ClosedForm {
  double dark;    // ε(1-ε)^{2m-1} e^{-ηλ}
  double signal;  // (1-ε)^{2m} η μ e^{-ηλ}
};

ClosedForm closed_form(const BlockConfig& c, const ChannelParams& p) {
  c.validate();
  p.validate();
  const double eta = p.eta_sys();
  const double vac = std::exp(-eta * c.lambda());
  const double clear = std::pow(1.0 - p.epsilon, 2 * c.m - 1);
  return {p.epsilon * clear * vac, clear * (1.0 - p.epsilon) * eta * c.mu * vac};
}

}  // namespace

DataClickProbs data_click_probs(const BlockConfig& config, const ChannelParams& params) {
  const auto f = closed_form(config, params);
  DataClickProbs out;
  out.p_correct = f.dark + (1.0 - params.e_d) * f.signal;
  out.p_error = f.dark + params.e_d * f.signal;
  out.p_inc = 1.0 - config.m * (out.p_correct + out.p_error);
  return out;
}

MonitoringClickProbs monitoring_click_probs(const BlockConfig& config, const ChannelParams& params,
                                            PairPattern pattern) {
  const auto f = closed_form(config, params);
  const double ed = params.e_d;
  const double em = params.e_m;
  auto p = [&](double bracket) { return f.dark + f.signal * bracket; };
  MonitoringClickProbs out;
  if (pattern == PairPattern::different) {
    const double base = (1.0 + 2.0 * ed * ed - 2.0 * ed) / 2.0;
    out.odd_plus = out.even_plus = p(2.0 * ed * (1.0 - ed) * (1.0 - em) + base);
    out.odd_minus = out.even_minus = p(2.0 * ed * (1.0 - ed) * em + base);
    return out;
  }
  const double bright_plus = p(2.0 * (1.0 - ed) * (1.0 - ed) * (1.0 - em) + ed * (1.0 - ed));
  const double bright_minus = p(2.0 * (1.0 - ed) * (1.0 - ed) * em + ed * (1.0 - ed));
  const double dim_plus = p(2.0 * ed * ed * (1.0 - em) + ed * (1.0 - ed));
  const double dim_minus = p(2.0 * ed * ed * em + ed * (1.0 - ed));
  if (pattern == PairPattern::same_01) {
    out = {bright_plus, bright_minus, dim_plus, dim_minus};
  } else {
    out = {dim_plus, dim_minus, bright_plus, bright_minus};
  }
  return out;
}

SiftedStatistics sifted_statistics(const BlockConfig& config, const ChannelParams& params) {
  const auto data = data_click_probs(config, params);
  const int m = config.m;
  const int patterns = config.bits_dim();
  const double pw = 1.0 / patterns;
  auto click = [&](int i, int s) { return occupied(i, s, m) ? data.p_correct : data.p_error; };
  double gain = 0.0;
  double error = 0.0;
  for (const auto& v : announcements(m)) {
    for (int i = 0; i < patterns; ++i) {
      const bool first = occupied(i, v.slot, m);
      const bool second = occupied(i, v.partner, m);
      if (first == second) continue;
      const int alice_bit = first ? 0 : 1;
      for (int bob_bit = 0; bob_bit < 2; ++bob_bit) {
        const double p = pw * v.weight * click(i, bob_bit == 0 ? v.slot : v.partner);
        gain += p;
        if (bob_bit != alice_bit) error += p;
      }
    }
  }
  return {gain, gain > 0.0 ? error / gain : 0.0};
}

double visibility(const BlockConfig& config, const ChannelParams& params) {
  const auto p = monitoring_click_probs(config, params, PairPattern::same_01);
  const double sum = p.odd_plus + p.odd_minus;
  return sum > 0.0 ? (p.odd_plus - p.odd_minus) / sum : 0.0;
}

namespace {

PairPattern pair_pattern(int i, int l, int m) {
  const int a = bit_of(i, l, m);
  const int b = bit_of(i, l + 1, m);
  if (a != b) return PairPattern::different;
  return a == 0 ? PairPattern::same_01 : PairPattern::same_10;
}

}  // namespace

ConstraintSet observed_constraints(const BlockConfig& config, const ChannelParams& params, bool with_operators) {
  config.validate();
  params.validate();
  const int m = config.m;
  const int patterns = config.bits_dim();
  const double pw = 1.0 / patterns;
  const auto data = data_click_probs(config, params);
  const auto povm = bob_povm(config);
  const SubsystemLayout joint = config.joint_layout();
  const SubsystemLayout bits(std::vector<int>(m, 2));

  ConstraintSet set;
  auto bob_constraint = [&](Constraint::Kind kind, int i, int setting, int outcome, double value) {
    Constraint c;
    c.kind = kind;
    c.pattern = i;
    c.setting = setting;
    c.outcome = outcome;
    c.value = value;
    if (with_operators) {
      CVector e = CVector::Zero(patterns);
      e(i) = 1.0;
      HermitianOperator a = HermitianOperator::projector(e).relabeled(bits);
      if (config.phase_mode == PhaseMode::randomized) {
        a = kron(a, HermitianOperator::identity(SubsystemLayout({config.shield_dim()})));
      }
      c.op = kron(a, povm[setting].conclusive[outcome]).relabeled(joint);
    }
    set.constraints.push_back(std::move(c));
  };

  for (int i = 0; i < patterns; ++i) {
    for (int d = 0; d < 2 * m; ++d) {
      bob_constraint(Constraint::Kind::data, i, 0, d, pw * (occupied(i, d, m) ? data.p_correct : data.p_error));
    }
  }
  for (int i = 0; i < patterns; ++i) {
    for (int l = 0; l + 1 < m; ++l) {
      const auto p = monitoring_click_probs(config, params, pair_pattern(i, l, m));
      const double values[4] = {p.odd_plus, p.odd_minus, p.even_plus, p.even_minus};
      for (int k = 0; k < 4; ++k) bob_constraint(Constraint::Kind::monitoring, i, l + 1, k, pw * values[k]);
    }
  }

  const HermitianOperator rho_a = reduced_alice_state(config);
  const auto basis = hermitian_basis(config.alice_dim());
  const HermitianOperator bob_identity = HermitianOperator::identity(SubsystemLayout({config.bob_dim()}));
  for (int k = 0; k < static_cast<int>(basis.size()); ++k) {
    Constraint c;
    c.kind = Constraint::Kind::tomography;
    c.basis = k;
    c.value = rho_a.inner(basis[k]);
    if (with_operators) c.op = kron(basis[k].relabeled(config.alice_layout()), bob_identity).relabeled(joint);
    set.constraints.push_back(std::move(c));
  }
  {
    Constraint c;
    c.kind = Constraint::Kind::normalization;
    c.value = 1.0;
    if (with_operators) c.op = HermitianOperator::identity(joint);
    set.constraints.push_back(std::move(c));
  }

  const auto stats = sifted_statistics(config, params);
  set.gain = stats.gain;
  set.bit_error = stats.bit_error;
  set.visibility = visibility(config, params);
  return set;
}

// ---------------------------------------------------------------------------
// Monte-Carlo oracle

namespace {

// SplitMix64 stream; one independent stream per (seed, sample index).
class SplitMix {
 public:
  using result_type = std::uint64_t;
  explicit SplitMix(std::uint64_t state) : state_(state) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

std::uint64_t sample_key(std::uint64_t seed, std::int64_t index) {
  SplitMix mix(seed ^ (0xd1b54a32d192ed03ULL * static_cast<std::uint64_t>(index + 1)));
  return mix();
}

double uniform(SplitMix& g) { return std::uniform_real_distribution<double>(0.0, 1.0)(g); }

int poisson_draw(SplitMix& g, double mean) {
  return mean > 0.0 ? std::poisson_distribution<int>(mean)(g) : 0;
}

struct Tally {
  std::vector<std::int64_t> conclusive;
  std::int64_t inconclusive = 0;
};

// Simulates one sample; returns the conclusive outcome index or -1.
int simulate(SplitMix& g, const BlockConfig& config, const ChannelParams& params, int pattern, int setting) {
  const int m = config.m;
  const int slots = 2 * m;
  const double amp = std::sqrt(params.eta_sys() * config.mu);
  // Loss first (amplitude sqrt(η μ)), then the within-bit flip.
  std::vector<double> a(slots, 0.0);
  for (int s = 0; s < slots; ++s) a[s] = occupied(pattern, s, m) ? amp : 0.0;
  for (int l = 0; l < m; ++l) {
    if (uniform(g) < params.e_d) std::swap(a[2 * l], a[2 * l + 1]);
  }

  // Output modes: mean photon numbers and the conclusive label of each.
  std::vector<double> mean;
  std::vector<int> label;
  if (setting == 0) {
    for (int s = 0; s < slots; ++s) {
      mean.push_back(a[s] * a[s]);
      label.push_back(s);
    }
  } else {
    const int l = setting - 1;
    std::vector<bool> paired(slots, false);
    int outcome = 0;
    for (int c : {2 * l, 2 * l + 1}) {
      const double x = a[c];
      const double y = a[c + 2];
      double plus = (x + y) / std::sqrt(2.0);
      double minus = (x - y) / std::sqrt(2.0);
      if (x > 0.0 && y > 0.0 && uniform(g) < params.e_m) std::swap(plus, minus);
      mean.push_back(plus * plus);
      label.push_back(outcome++);
      mean.push_back(minus * minus);
      label.push_back(outcome++);
      paired[c] = paired[c + 2] = true;
    }
    for (int s = 0; s < slots; ++s) {
      if (paired[s]) continue;
      mean.push_back(a[s] * a[s]);
      label.push_back(-1);
    }
  }

  int counts = 0;
  int where = -1;
  for (std::size_t k = 0; k < mean.size(); ++k) {
    int n = poisson_draw(g, mean[k]);
    if (uniform(g) < params.epsilon) ++n;
    if (n > 0) {
      counts += n;
      where = static_cast<int>(k);
    }
  }
  if (counts != 1) return -1;
  return label[where];
}

}  // namespace

OracleTable monte_carlo_oracle(const BlockConfig& config, const ChannelParams& params, int pattern, int setting,
                               std::int64_t samples, std::uint64_t seed, int threads) {
  config.validate();
  params.validate();
  if (samples < 1) throw ArgumentError("monte_carlo_oracle: samples must be positive");
  if (pattern < 0 || pattern >= config.bits_dim()) throw ArgumentError("monte_carlo_oracle: pattern out of range");
  if (setting < 0 || setting >= config.m) throw ArgumentError("monte_carlo_oracle: setting out of range");
  const int outcomes = setting == 0 ? 2 * config.m : 4;
  threads = std::max(1, threads);

  std::vector<Tally> tallies(threads, Tally{std::vector<std::int64_t>(outcomes, 0), 0});
  auto work = [&](int t) {
    const std::int64_t begin = samples * t / threads;
    const std::int64_t end = samples * (t + 1) / threads;
    Tally& tally = tallies[t];
    for (std::int64_t s = begin; s < end; ++s) {
      SplitMix g(sample_key(seed, s));
      const int r = simulate(g, config, params, pattern, setting);
      if (r < 0) {
        ++tally.inconclusive;
      } else {
        ++tally.conclusive[r];
      }
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work, t);
  }

  Tally total{std::vector<std::int64_t>(outcomes, 0), 0};
  for (const auto& t : tallies) {
    for (int k = 0; k < outcomes; ++k) total.conclusive[k] += t.conclusive[k];
    total.inconclusive += t.inconclusive;
  }
  auto freq = [&](std::int64_t n) {
    const double f = static_cast<double>(n) / static_cast<double>(samples);
    return OracleFrequency{f, std::sqrt(f * (1.0 - f) / static_cast<double>(samples))};
  };
  OracleTable table;
  table.samples = samples;
  for (auto n : total.conclusive) table.conclusive.push_back(freq(n));
  table.inconclusive = freq(total.inconclusive);
  return table;
}

}  // namespace cowqkd
