#include "cowqkd/protocol_model.hpp"

#include <bit>
#include <cmath>
#include <string>

#include "cowqkd/errors.hpp"

namespace cowqkd {

PhaseMode parse_phase_mode(std::string_view s) {
  if (s == "pure") return PhaseMode::pure;
  if (s == "randomized") return PhaseMode::randomized;
  throw ArgumentError("unknown phase mode '" + std::string(s) + "' (expected pure or randomized)");
}

std::string_view to_string(PhaseMode m) { return m == PhaseMode::pure ? "pure" : "randomized"; }

void BlockConfig::validate() const {
  if (m < 2) throw ArgumentError("block size m must be at least 2");
  if (m > 12) throw ArgumentError("block size m is unreasonably large");
  if (!(mu > 0.0) || !std::isfinite(mu)) throw ArgumentError("mean photon number mu must be positive and finite");
  if (phase_mode == PhaseMode::randomized && n_cut < 1) throw ArgumentError("n_cut must be at least 1");
}

SubsystemLayout BlockConfig::alice_layout() const {
  std::vector<int> dims(m, 2);
  if (phase_mode == PhaseMode::randomized) dims.push_back(n_cut + 1);
  return SubsystemLayout(dims, dimension_ceiling);
}

SubsystemLayout BlockConfig::joint_layout() const {
  auto dims = alice_layout().dims();
  dims.push_back(bob_dim());
  return SubsystemLayout(dims, dimension_ceiling);
}

double gram_overlap(int m, int n, const std::vector<int>& i, const std::vector<int>& j) {
  if (static_cast<int>(i.size()) != m || static_cast<int>(j.size()) != m) {
    throw ArgumentError("gram_overlap: bit strings must have length m");
  }
  if (n < 0) throw ArgumentError("gram_overlap: negative photon number");
  int hamming = 0;
  for (int l = 0; l < m; ++l) hamming += (i[l] != j[l]) ? 1 : 0;
  return std::pow(static_cast<double>(m - hamming) / m, n);
}

double poisson(double lambda, int n) {
  return std::exp(-lambda + n * std::log(lambda) - std::lgamma(n + 1.0));
}

namespace {

// Sum of p_lambda(n) * f(n) over n > n_cut, summed upward so that small tails
// keep full relative accuracy.
template <typename F>
void poisson_tail(double lambda, int n_cut, F&& f) {
  for (int n = n_cut + 1;; ++n) {
    const double p = poisson(lambda, n);
    f(n, p);
    if (n > lambda + 10 && p < 1e-300) break;
    if (n > lambda && p < 1e-22) break;
  }
}

CMatrix pure_single_bit(double mu) {
  CMatrix r(2, 2);
  const double o = 0.5 * std::exp(-mu);
  r << 0.5, o, o, 0.5;
  return r;
}

}  // namespace

HermitianOperator photon_block_state(int m, int n) {
  const int d = 1 << m;
  CMatrix r(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const int hamming = std::popcount(static_cast<unsigned>(i ^ j));
      r(i, j) = std::pow(static_cast<double>(m - hamming) / m, n) / d;
    }
  }
  return HermitianOperator(SubsystemLayout(std::vector<int>(m, 2)), r);
}

HermitianOperator reduced_alice_state(const BlockConfig& config) {
  config.validate();
  const int m = config.m;
  if (config.phase_mode == PhaseMode::pure) {
    HermitianOperator one(SubsystemLayout({2}), pure_single_bit(config.mu));
    HermitianOperator out = one;
    for (int l = 1; l < m; ++l) out = kron(out, one);
    return out.relabeled(config.alice_layout());
  }
  const double lambda = config.lambda();
  const int levels = config.n_cut + 1;
  const int d = config.bits_dim();
  CMatrix full = CMatrix::Zero(d * levels, d * levels);
  auto place = [&](int level, const CMatrix& block) {
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) full(i * levels + level, j * levels + level) += block(i, j);
  };
  for (int n = 1; n <= config.n_cut; ++n) place(n - 1, poisson(lambda, n) * photon_block_state(m, n).matrix());
  CMatrix collector = poisson(lambda, 0) * photon_block_state(m, 0).matrix();
  poisson_tail(lambda, config.n_cut, [&](int n, double p) { collector += p * photon_block_state(m, n).matrix(); });
  place(config.n_cut, collector);
  return HermitianOperator(config.alice_layout(), full);
}

Eigen::MatrixXd walsh_matrix(int m) {
  const int d = 1 << m;
  Eigen::MatrixXd h(d, d);
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < d; ++k) h(i, k) = (std::popcount(static_cast<unsigned>(i & k)) % 2 ? -s : s);
  return h;
}

namespace {

// Eigenvalue of photon_block_state(m, n) on h_k, zero whenever |k| > n.
std::vector<double> photon_block_spectrum(int m, int n) {
  const int d = 1 << m;
  std::vector<double> out(d, 0.0);
  for (int k = 0; k < d; ++k) {
    if (std::popcount(static_cast<unsigned>(k)) > n) continue;
    double acc = 0.0;
    for (int x = 0; x < d; ++x) {
      const double g = std::pow(static_cast<double>(m - std::popcount(static_cast<unsigned>(x))) / m, n);
      acc += (std::popcount(static_cast<unsigned>(k & x)) % 2) ? -g : g;
    }
    out[k] = std::max(0.0, acc / d);
  }
  return out;
}

}  // namespace

AliceSpectrum alice_spectrum(const BlockConfig& config) {
  config.validate();
  const int m = config.m;
  const int d = config.bits_dim();
  AliceSpectrum s;
  if (config.phase_mode == PhaseMode::pure) {
    const double minus = -0.5 * std::expm1(-config.mu);
    const double plus = 1.0 - minus;
    std::vector<double> v(d);
    for (int k = 0; k < d; ++k) {
      const int w = std::popcount(static_cast<unsigned>(k));
      v[k] = std::pow(plus, m - w) * std::pow(minus, w);
    }
    s.weight.push_back(1.0);
    s.values.push_back(std::move(v));
    return s;
  }
  const double lambda = config.lambda();
  for (int n = 1; n <= config.n_cut; ++n) {
    s.weight.push_back(poisson(lambda, n));
    s.values.push_back(photon_block_spectrum(m, n));
  }
  std::vector<double> collector(d, 0.0);
  double w = poisson(lambda, 0);
  collector[0] = w;
  poisson_tail(lambda, config.n_cut, [&](int n, double p) {
    w += p;
    const auto v = photon_block_spectrum(m, n);
    for (int k = 0; k < d; ++k) collector[k] += p * v[k];
  });
  for (auto& x : collector) x /= w;
  s.weight.push_back(w);
  s.values.push_back(std::move(collector));
  return s;
}

CVector chi(int m, int c, int sign) {
  if (c < 0 || c + 2 >= 2 * m) throw ArgumentError("chi: slot pair outside the block");
  CVector v = CVector::Zero(2 * m + 1);
  v(c) = 1.0 / std::sqrt(2.0);
  v(c + 2) = (sign > 0 ? 1.0 : -1.0) / std::sqrt(2.0);
  return v;
}

std::vector<PovmSetting> bob_povm(const BlockConfig& config) {
  config.validate();
  const int m = config.m;
  const int nb = config.bob_dim();
  const SubsystemLayout layout({nb});
  std::vector<PovmSetting> out;
  auto finish = [&](std::vector<HermitianOperator> conclusive) {
    HermitianOperator inc = HermitianOperator::identity(layout);
    for (const auto& e : conclusive) inc -= e;
    out.push_back(PovmSetting{std::move(conclusive), std::move(inc)});
  };
  std::vector<HermitianOperator> data;
  for (int d = 0; d < 2 * m; ++d) {
    CVector e = CVector::Zero(nb);
    e(d) = 1.0;
    data.push_back(HermitianOperator::projector(e));
  }
  finish(std::move(data));
  for (int l = 0; l + 1 < m; ++l) {
    std::vector<HermitianOperator> mon;
    for (int c : {2 * l, 2 * l + 1})
      for (int sign : {+1, -1}) mon.push_back(HermitianOperator::projector(chi(m, c, sign)));
    finish(std::move(mon));
  }
  return out;
}

std::vector<Announcement> announcements(int m) {
  if (m < 2) throw ArgumentError("announcements need m >= 2");
  std::vector<Announcement> out;
  if (m == 2) {
    // Both neighbours of a click name the same pair; merged with weight 1.
    for (int s = 0; s < 2; ++s) out.push_back(Announcement{s % 2, s, s + 2, 1.0});
    return out;
  }
  for (int s = 0; s < 2 * m; ++s) out.push_back(Announcement{s % 2, s, (s + 2) % (2 * m), 0.5});
  return out;
}

std::vector<SiftingMaps> announcement_filters(const BlockConfig& config, bool flip_labels) {
  config.validate();
  const int nb = config.bob_dim();
  std::vector<SiftingMaps> out;
  for (const auto& a : announcements(config.m)) {
    SiftingMaps v;
    v.announcement = a;
    // Sifted bit 0: pulse in `slot`, partner empty; bit 1: the reverse.
    const int p = a.parity;
    const int zero = 2 * p + (1 - p);
    const int one = 2 * (1 - p) + p;
    v.filter_alice.setZero();
    v.filter_alice(flip_labels ? 1 : 0, zero) = 1.0;
    v.filter_alice(flip_labels ? 0 : 1, one) = 1.0;
    v.filter_bob = CMatrix::Zero(2, nb);
    v.filter_bob(0, a.slot) = std::sqrt(a.weight);
    v.filter_bob(1, a.partner) = std::sqrt(a.weight);
    out.push_back(std::move(v));
  }
  return out;
}

namespace {

// Lift a 4x4 operator on the two announced bits to all m bits.
CMatrix lift_pair(const Eigen::Matrix4cd& op, int l1, int l2, int m) {
  const int d = 1 << m;
  const int mask = (1 << (m - 1 - l1)) | (1 << (m - 1 - l2));
  CMatrix out = CMatrix::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if ((i & ~mask) != (j & ~mask)) continue;
      const int pi = 2 * bit_of(i, l1, m) + bit_of(i, l2, m);
      const int pj = 2 * bit_of(j, l1, m) + bit_of(j, l2, m);
      out(i, j) = op(pi, pj);
    }
  }
  return out;
}

Eigen::Matrix2cd sigma_x() {
  Eigen::Matrix2cd x;
  x << 0, 1, 1, 0;
  return x;
}

HermitianOperator assemble(const BlockConfig& config, const std::vector<SiftingMaps>& filters, bool x_part) {
  const int m = config.m;
  const SubsystemLayout bits(std::vector<int>(m, 2));
  const SubsystemLayout bob({config.bob_dim()});
  HermitianOperator total = HermitianOperator::zero(config.joint_layout());
  for (const auto& v : filters) {
    const CMatrix a = x_part ? alice_filter_x(v, m) : alice_filter_projector(v, m);
    const CMatrix b = x_part ? CMatrix(0.5 * v.filter_bob.adjoint() * sigma_x() * v.filter_bob)
                             : CMatrix(v.filter_bob.adjoint() * v.filter_bob);
    HermitianOperator term = HermitianOperator(bits, a);
    if (config.phase_mode == PhaseMode::randomized) {
      term = kron(term, HermitianOperator::identity(SubsystemLayout({config.shield_dim()})));
    }
    total += kron(term, HermitianOperator(bob, b)).relabeled(config.joint_layout());
  }
  return total;
}

}  // namespace

CMatrix alice_filter_projector(const SiftingMaps& v, int m) {
  const Eigen::Matrix4cd pair = v.filter_alice.adjoint() * v.filter_alice;
  return lift_pair(pair, v.announcement.slot / 2, v.announcement.partner / 2, m);
}

CMatrix alice_filter_x(const SiftingMaps& v, int m) {
  const Eigen::Matrix4cd pair = v.filter_alice.adjoint() * sigma_x() * v.filter_alice;
  return lift_pair(pair, v.announcement.slot / 2, v.announcement.partner / 2, m);
}

HermitianOperator gain_operator(const BlockConfig& config) {
  config.validate();
  return assemble(config, announcement_filters(config), false);
}

HermitianOperator phase_error_x(const BlockConfig& config, bool flip_labels) {
  config.validate();
  return assemble(config, announcement_filters(config, flip_labels), true);
}

HermitianOperator phase_error_objective(const BlockConfig& config, bool flip_labels) {
  return 0.5 * gain_operator(config) - phase_error_x(config, flip_labels);
}

}  // namespace cowqkd
