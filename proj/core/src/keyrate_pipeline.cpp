#include "cowqkd/keyrate_pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <thread>

#include "cowqkd/errors.hpp"

namespace cowqkd {

double binary_entropy(double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw ArgumentError("binary_entropy: argument outside [0, 1]");
  if (x == 0.0 || x == 1.0) return 0.0;
  return -x * std::log2(x) - (1.0 - x) * std::log2(1.0 - x);
}

double rate_from_statistics(double gain, double e_bar, double delta_max, int m) {
  if (m < 1) throw ArgumentError("rate_from_statistics: m must be positive");
  if (!(gain > 0.0)) return 0.0;
  if (e_bar >= 0.5) return 0.0;
  const double phase = std::clamp(delta_max / gain, 0.0, 0.5);
  const double bracket = 1.0 - binary_entropy(std::clamp(e_bar, 0.0, 0.5)) - binary_entropy(phase);
  return std::max(0.0, gain * bracket) / (2.0 * m);
}

namespace {

// One basis vector of the reduced Alice space: Walsh vector k of shield level
// `level`, scaled by sqrt(eigenvalue / scale).
struct Column {
  int level;
  Eigen::VectorXd vec;
};

std::vector<std::vector<Column>> reduced_columns(const BlockConfig& config, double scale, bool shield_blocks) {
  const auto spec = alice_spectrum(config);
  const Eigen::MatrixXd h = walsh_matrix(config.m);
  std::vector<std::vector<Column>> groups;
  const int levels = static_cast<int>(spec.weight.size());
  for (int t = 0; t < levels; ++t) {
    if (groups.empty() || shield_blocks) groups.emplace_back();
    for (int k = 0; k < config.bits_dim(); ++k) {
      const double lambda = spec.weight[t] * spec.values[t][k];
      if (!(lambda > 0.0)) continue;
      groups.back().push_back(Column{t, h.col(k) * std::sqrt(lambda / scale)});
    }
  }
  std::erase_if(groups, [](const auto& g) { return g.empty(); });
  return groups;
}

// C^T A C over one group, zero across shield levels.
Eigen::MatrixXd reduce_alice(const std::vector<Column>& cols, const Eigen::MatrixXd& a) {
  const int r = static_cast<int>(cols.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(r, r);
  for (int x = 0; x < r; ++x)
    for (int y = 0; y < r; ++y)
      if (cols[x].level == cols[y].level) out(x, y) = cols[x].vec.dot(a * cols[y].vec);
  return out;
}

Eigen::MatrixXd reduce_pattern(const std::vector<Column>& cols, int i) {
  const int r = static_cast<int>(cols.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(r, r);
  for (int x = 0; x < r; ++x)
    for (int y = 0; y < r; ++y)
      if (cols[x].level == cols[y].level) out(x, y) = cols[x].vec(i) * cols[y].vec(i);
  return out;
}

Eigen::MatrixXd kron_real(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

void add_real_dense(BlockMatrix& m, int block, const Eigen::MatrixXd& d) {
  for (int r = 0; r < d.rows(); ++r)
    for (int c = r; c < d.cols(); ++c)
      if (d(r, c) != 0.0) m.add(block, r, c, d(r, c));
}

}  // namespace

PhaseErrorProblem build_phase_error_problem(const BlockConfig& config, const ChannelParams& params,
                                            const PhaseErrorOptions& options) {
  config.validate();
  params.validate();
  const int m = config.m;
  const int slots = 2 * m;
  const auto set = observed_constraints(config, params, false);
  PhaseErrorProblem out;
  out.gain = set.gain;
  out.bit_error = set.bit_error;
  out.scale = set.gain > 0.0 ? set.gain : 1.0;

  const bool blocks = options.shield_blocks || config.phase_mode == PhaseMode::pure;
  const auto groups = reduced_columns(config, out.scale, blocks);
  const int ng = static_cast<int>(groups.size());
  const int shield = config.shield_dim();
  for (const auto& g : groups) {
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(config.alice_dim(), static_cast<Eigen::Index>(g.size()));
    for (std::size_t x = 0; x < g.size(); ++x)
      for (int i = 0; i < config.bits_dim(); ++i) c(i * shield + g[x].level, static_cast<Eigen::Index>(x)) = g[x].vec(i);
    out.alice_maps.push_back(std::move(c));
  }

  SdpProblem& p = out.sdp;
  double trace_bound = 0.0;
  for (const auto& g : groups) {
    const int r = static_cast<int>(g.size());
    p.block_dims.push_back(r * slots);  // J: reduced Alice ⊗ photon slots
    p.block_dims.push_back(r);          // W: reduced Alice ⊗ |a>
    trace_bound += r;
  }
  p.trace_bound = trace_bound;

  // Objective: -X̃.
  const auto filters = announcement_filters(config, options.flip_labels);
  for (int g = 0; g < ng; ++g) {
    const int r = static_cast<int>(groups[g].size());
    Eigen::MatrixXd obj = Eigen::MatrixXd::Zero(r * slots, r * slots);
    for (const auto& v : filters) {
      const Eigen::MatrixXd xa = alice_filter_x(v, m).real();
      Eigen::MatrixXd xb = Eigen::MatrixXd::Zero(slots, slots);
      const double w = v.announcement.weight;
      xb(v.announcement.slot, v.announcement.partner) = 0.5 * w;
      xb(v.announcement.partner, v.announcement.slot) = 0.5 * w;
      obj -= kron_real(reduce_alice(groups[g], xa), xb);
    }
    add_real_dense(p.objective, 2 * g, obj);
  }

  // Bob-outcome constraints.
  const auto povm = bob_povm(config);
  std::vector<std::vector<Eigen::MatrixXd>> reduced_pattern(ng);
  for (int g = 0; g < ng; ++g)
    for (int i = 0; i < config.bits_dim(); ++i) reduced_pattern[g].push_back(reduce_pattern(groups[g], i));
  for (const auto& c : set.constraints) {
    if (c.kind != Constraint::Kind::data && c.kind != Constraint::Kind::monitoring) continue;
    const Eigen::MatrixXd b = povm[c.setting].conclusive[c.outcome].matrix().real().topLeftCorner(slots, slots);
    BlockMatrix a;
    for (int g = 0; g < ng; ++g) add_real_dense(a, 2 * g, kron_real(reduced_pattern[g][c.pattern], b));
    p.add_constraint(std::move(a), c.value / out.scale);
  }

  // Alice marginal: tr_B J + W = 1 on each group.
  for (int g = 0; g < ng; ++g) {
    const int r = static_cast<int>(groups[g].size());
    for (int x = 0; x < r; ++x) {
      for (int y = x; y < r; ++y) {
        BlockMatrix a;
        for (int beta = 0; beta < slots; ++beta) a.add(2 * g, x * slots + beta, y * slots + beta, 1.0);
        a.add(2 * g + 1, x, y, 1.0);
        p.add_constraint(std::move(a), x == y ? 1.0 : 0.0);
      }
    }
  }
  out.sdp = independent_constraints(p);
  return out;
}

HermitianOperator reconstruct_state(const BlockConfig& config, const PhaseErrorProblem& problem,
                                    const std::vector<CMatrix>& blocks) {
  const int slots = 2 * config.m;
  const int nb = config.bob_dim();
  const int n = config.alice_dim() * nb;
  CMatrix rho = CMatrix::Zero(n, n);
  for (std::size_t g = 0; g < problem.alice_maps.size(); ++g) {
    const Eigen::MatrixXd& c = problem.alice_maps[g];
    const int r = static_cast<int>(c.cols());
    // Columns of (C ⊗ photon embedding) and (C ⊗ |a>).
    Eigen::MatrixXd lj = Eigen::MatrixXd::Zero(n, r * slots);
    Eigen::MatrixXd lw = Eigen::MatrixXd::Zero(n, r);
    for (int x = 0; x < r; ++x) {
      for (int a = 0; a < c.rows(); ++a) {
        for (int beta = 0; beta < slots; ++beta) lj(a * nb + beta, x * slots + beta) = c(a, x);
        lw(a * nb + config.inconclusive(), x) = c(a, x);
      }
    }
    rho += problem.scale * (lj.cast<Complex>() * blocks.at(2 * g) * lj.transpose().cast<Complex>());
    rho += problem.scale * (lw.cast<Complex>() * blocks.at(2 * g + 1) * lw.transpose().cast<Complex>());
  }
  return HermitianOperator(config.joint_layout(), 0.5 * (rho + rho.adjoint()));
}

namespace {

PhaseErrorResult finish(const SdpCertificate& cert, double gain, double scale, double offset, int constraints) {
  PhaseErrorResult r;
  r.gain = gain;
  const double bound = certified_bound(cert);
  r.delta_max = offset + scale * bound;
  r.primal_delta = offset + scale * cert.primal_value;
  r.solver_gap = scale * (bound - cert.primal_value);
  r.iterations = cert.iterations;
  r.converged = cert.converged;
  r.constraints = constraints;
  return r;
}

}  // namespace

PhaseErrorResult max_phase_error(const BlockConfig& config, const ChannelParams& params,
                                 const PhaseErrorOptions& options) {
  const auto prob = build_phase_error_problem(config, params, options);
  SdpCertificate cert;
  try {
    cert = solve(prob.sdp, options.solver);
  } catch (const ConvergenceError& e) {
    // Any dual point still yields a valid bound.
    cert = e.best();
    if (cert.dual.size() == 0) throw;
  }
  return finish(cert, prob.gain, prob.scale, prob.gain / 2.0, prob.sdp.num_constraints());
}

PhaseErrorResult max_phase_error_full(const BlockConfig& config, const ChannelParams& params,
                                      const SolverOptions& solver) {
  const auto set = observed_constraints(config, params, true);
  std::vector<std::pair<HermitianOperator, double>> cons;
  cons.reserve(set.constraints.size());
  for (const auto& c : set.constraints) cons.emplace_back(c.op, c.value);
  const auto objective = phase_error_objective(config);
  const auto sdp = independent_constraints(SdpProblem::from_operators(objective, cons, {}, 1.0));
  SdpCertificate cert;
  try {
    cert = solve(sdp, solver);
  } catch (const ConvergenceError& e) {
    cert = e.best();
    if (cert.dual.size() == 0) throw;
  }
  return finish(cert, set.gain, 1.0, 0.0, sdp.num_constraints());
}

RatePoint compute_rate_point(const BlockConfig& config, const ChannelParams& params, const PhaseErrorOptions& options) {
  RatePoint pt;
  pt.loss_db = params.loss_db();
  pt.mu = config.mu;
  pt.m = config.m;
  const auto stats = sifted_statistics(config, params);
  pt.G = stats.gain;
  pt.e_bar = stats.bit_error;
  try {
    const auto r = max_phase_error(config, params, options);
    pt.delta_max = r.delta_max;
    pt.solver_gap = r.solver_gap;
    pt.rate_per_pulse = rate_from_statistics(pt.G, pt.e_bar, std::min(pt.delta_max, pt.G), config.m);
  } catch (const NumericError&) {
    pt.solved = false;
    pt.delta_max = std::numeric_limits<double>::quiet_NaN();
    pt.solver_gap = std::numeric_limits<double>::quiet_NaN();
    pt.rate_per_pulse = 0.0;
  }
  return pt;
}

namespace {

// Runs f(0..n-1) on up to `threads` workers; results stay in index order.
template <typename T>
std::vector<T> parallel_map(int n, int threads, const std::function<T(int)>& f) {
  std::vector<T> out(n);
  threads = std::clamp(threads, 1, std::max(1, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) out[i] = f(i);
    return out;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(n);
  {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (int i = next++; i < n; i = next++) {
          try {
            out[i] = f(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

// Search score at μ: the rate when positive, otherwise the (non-positive)
// entropy bracket 1 - h2(e) - h2(δ/G). The two pieces meet at zero, so the
// score stays unimodal and still points uphill where the rate vanishes.
double search_score(BlockConfig config, const ChannelParams& params, double mu, const PhaseErrorOptions& options) {
  config.mu = mu;
  const auto stats = sifted_statistics(config, params);
  if (!(stats.gain > 0.0)) return -1.0;
  const double he = binary_entropy(std::min(stats.bit_error, 0.5));
  if (he >= 1.0) return -1.0;
  const auto pt = compute_rate_point(config, params, options);
  if (pt.rate_per_pulse > 0.0) return pt.rate_per_pulse;
  if (!pt.solved) return -he;
  return 1.0 - he - binary_entropy(std::clamp(pt.delta_max / pt.G, 0.0, 0.5));
}

}  // namespace

std::pair<double, RatePoint> optimize_intensity(const BlockConfig& config, const ChannelParams& params,
                                                const IntensitySearch& search, const PhaseErrorOptions& options) {
  if (!(search.mu_lo > 0.0 && search.mu_hi <= 1.0 && search.mu_lo < search.mu_hi)) {
    throw ArgumentError("intensity range must satisfy 0 < lo < hi <= 1");
  }
  const int n = std::max(3, search.prescan_points);
  const double a = std::log(search.mu_lo);
  const double b = std::log(search.mu_hi);
  std::vector<double> grid(n);
  for (int k = 0; k < n; ++k) grid[k] = a + (b - a) * k / (n - 1);
  const auto scores = parallel_map<double>(
      n, search.threads, [&](int k) { return search_score(config, params, std::exp(grid[k]), options); });
  const int best = static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin());

  // Golden section on log μ inside the neighbouring grid cells.
  double lo = grid[std::max(0, best - 1)];
  double hi = grid[std::min(n - 1, best + 1)];
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  auto score = [&](double x) { return search_score(config, params, std::exp(x), options); };
  double x1 = hi - phi * (hi - lo);
  double x2 = lo + phi * (hi - lo);
  double f1 = score(x1);
  double f2 = score(x2);
  const double tol = std::log1p(search.relative_tolerance);
  while (hi - lo > tol) {
    if (f1 >= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = score(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = score(x2);
    }
  }
  double best_x = f1 >= f2 ? x1 : x2;
  if (std::max(f1, f2) < scores[best]) best_x = grid[best];

  BlockConfig c = config;
  c.mu = std::exp(best_x);
  RatePoint pt = compute_rate_point(c, params, options);
  if (!(pt.rate_per_pulse > 0.0)) {
    c.mu = 0.5 * (search.mu_lo + search.mu_hi);
    pt = compute_rate_point(c, params, options);
    pt.flagged = true;
  }
  return {c.mu, pt};
}

SweepResult sweep_and_cutoff(const BlockConfig& config, const SweepSpec& spec, const PhaseErrorOptions& options) {
  if (spec.loss_db.empty()) throw ArgumentError("loss grid is empty");
  for (std::size_t k = 1; k < spec.loss_db.size(); ++k) {
    if (!(spec.loss_db[k] > spec.loss_db[k - 1])) throw ArgumentError("loss grid must be strictly increasing");
  }
  auto evaluate = [&](double loss) {
    const auto params = ChannelParams::from_loss_db(loss, spec.epsilon, spec.e_d, spec.e_m);
    if (spec.fixed_mu) {
      BlockConfig c = config;
      c.mu = *spec.fixed_mu;
      return compute_rate_point(c, params, options);
    }
    return optimize_intensity(config, params, spec.search, options).second;
  };

  SweepResult out;
  const int n = static_cast<int>(spec.loss_db.size());
  out.points = parallel_map<RatePoint>(n, spec.threads, [&](int k) { return evaluate(spec.loss_db[k]); });
  for (const auto& p : out.points)
    if (!p.solved) ++out.failed_points;

  int last = -1;
  for (int k = 0; k < n; ++k)
    if (out.points[k].rate_per_pulse > 0.0) last = k;
  if (last < 0) return out;
  if (last == n - 1 || !spec.refine_cutoff) {
    out.cutoff_loss_db = spec.loss_db[last];
    return out;
  }
  double lo = spec.loss_db[last];
  double hi = spec.loss_db[last + 1];
  while (hi - lo > spec.cutoff_resolution_db) {
    const double mid = 0.5 * (lo + hi);
    if (evaluate(mid).rate_per_pulse > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  out.cutoff_loss_db = lo;
  return out;
}

}  // namespace cowqkd
