#include "cowqkd/sdp_engine.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace cowqkd {

// ---------------------------------------------------------------------------
// BlockMatrix

namespace {

bool entry_less(const BlockMatrix::Entry& a, const BlockMatrix::Entry& b) {
  if (a.block != b.block) return a.block < b.block;
  if (a.row != b.row) return a.row < b.row;
  return a.col < b.col;
}

}  // namespace

void BlockMatrix::add(int block, int row, int col, Complex v) {
  if (block < 0 || row < 0 || col < 0) throw ArgumentError("BlockMatrix: negative index");
  if (row > col) {
    std::swap(row, col);
    v = std::conj(v);
  }
  if (row == col) v = Complex(v.real(), 0.0);
  Entry e{block, row, col, v};
  auto it = std::lower_bound(entries_.begin(), entries_.end(), e, entry_less);
  if (it != entries_.end() && it->block == block && it->row == row && it->col == col) {
    it->value += v;
  } else {
    entries_.insert(it, e);
  }
}

void BlockMatrix::add_dense(int block, const CMatrix& m, double drop) {
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = r; c < m.cols(); ++c) {
      if (std::abs(m(r, c)) > drop) add(block, r, c, m(r, c));
    }
  }
}

CMatrix BlockMatrix::dense_block(int block, int dim) const {
  CMatrix out = CMatrix::Zero(dim, dim);
  for (const auto& e : entries_) {
    if (e.block != block) continue;
    if (e.row >= dim || e.col >= dim) throw ArgumentError("BlockMatrix: entry outside block");
    out(e.row, e.col) += e.value;
    if (e.row != e.col) out(e.col, e.row) += std::conj(e.value);
  }
  return out;
}

double BlockMatrix::inner(const std::vector<CMatrix>& blocks) const {
  double acc = 0.0;
  for (const auto& e : entries_) {
    const CMatrix& x = blocks.at(e.block);
    if (e.row == e.col) {
      acc += (e.value * x(e.row, e.row)).real();
    } else {
      acc += (e.value * x(e.col, e.row) + std::conj(e.value) * x(e.row, e.col)).real();
    }
  }
  return acc;
}

double BlockMatrix::inner(const BlockMatrix& other) const {
  double acc = 0.0;
  auto a = entries_.begin();
  auto b = other.entries_.begin();
  while (a != entries_.end() && b != other.entries_.end()) {
    if (entry_less(*a, *b)) {
      ++a;
    } else if (entry_less(*b, *a)) {
      ++b;
    } else {
      const double prod = (a->value * std::conj(b->value)).real();
      acc += (a->row == a->col) ? prod : 2.0 * prod;
      ++a;
      ++b;
    }
  }
  return acc;
}

double BlockMatrix::norm() const { return std::sqrt(std::max(0.0, inner(*this))); }

BlockMatrix& BlockMatrix::operator*=(double s) {
  for (auto& e : entries_) e.value *= s;
  return *this;
}

// ---------------------------------------------------------------------------
// SdpProblem

int SdpProblem::total_dim() const { return std::accumulate(block_dims.begin(), block_dims.end(), 0); }

void SdpProblem::add_constraint(BlockMatrix a, double b) {
  constraints.push_back(std::move(a));
  rhs.push_back(b);
}

void SdpProblem::validate() const {
  if (block_dims.empty()) throw ArgumentError("SdpProblem: no blocks");
  for (int d : block_dims)
    if (d < 1) throw ArgumentError("SdpProblem: block dimension must be positive");
  if (constraints.size() != rhs.size()) throw ArgumentError("SdpProblem: constraint/rhs size mismatch");
  auto check = [&](const BlockMatrix& m) {
    for (const auto& e : m.entries()) {
      if (e.block >= static_cast<int>(block_dims.size()) || e.col >= block_dims[e.block]) {
        throw ArgumentError("SdpProblem: entry outside declared blocks");
      }
    }
  };
  check(objective);
  for (const auto& c : constraints) check(c);
  if (!(trace_bound > 0.0)) throw ArgumentError("SdpProblem: trace bound must be positive");
}

SdpProblem SdpProblem::from_operators(const HermitianOperator& objective,
                                      const std::vector<std::pair<HermitianOperator, double>>& constraints,
                                      std::vector<int> blocks, double trace_bound) {
  const int n = objective.dim();
  if (blocks.empty()) blocks.push_back(n);
  if (std::accumulate(blocks.begin(), blocks.end(), 0) != n) {
    throw ArgumentError("SdpProblem: block partition does not cover the operator dimension");
  }
  std::vector<int> offset(blocks.size(), 0);
  for (std::size_t b = 1; b < blocks.size(); ++b) offset[b] = offset[b - 1] + blocks[b - 1];

  auto block_of = [&](int i) {
    return static_cast<int>(std::upper_bound(offset.begin(), offset.end(), i) - offset.begin()) - 1;
  };
  auto slice = [&](const HermitianOperator& op) {
    if (op.dim() != n) throw ArgumentError("SdpProblem: operator dimension mismatch");
    const CMatrix& m = op.matrix();
    BlockMatrix out;
    for (int r = 0; r < n; ++r) {
      for (int c = r; c < n; ++c) {
        if (m(r, c) == Complex(0.0)) continue;
        const int b = block_of(r);
        if (block_of(c) != b) throw ArgumentError("SdpProblem: operator is not block diagonal");
        out.add(b, r - offset[b], c - offset[b], m(r, c));
      }
    }
    return out;
  };

  SdpProblem p;
  p.block_dims = blocks;
  p.objective = slice(objective);
  for (const auto& [op, b] : constraints) p.add_constraint(slice(op), b);
  p.trace_bound = trace_bound;
  return p;
}

// ---------------------------------------------------------------------------
// Independent constraints

SdpProblem independent_constraints(const SdpProblem& p, double drop_tolerance, double consistency_tolerance) {
  p.validate();
  // Coordinates of a Hermitian block matrix in an orthonormal real basis:
  // diagonal entries as-is, off-diagonal real and imaginary parts times sqrt2.
  std::vector<int> offset(p.block_dims.size(), 0);
  int coords = 0;
  for (std::size_t b = 0; b < p.block_dims.size(); ++b) {
    offset[b] = coords;
    coords += p.block_dims[b] * p.block_dims[b];
  }
  auto vectorize = [&](const BlockMatrix& m) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(coords);
    for (const auto& e : m.entries()) {
      const int d = p.block_dims[e.block];
      const int base = offset[e.block];
      if (e.row == e.col) {
        v(base + e.row * d + e.row) += e.value.real();
      } else {
        v(base + e.row * d + e.col) += std::sqrt(2.0) * e.value.real();
        v(base + e.col * d + e.row) += std::sqrt(2.0) * e.value.imag();
      }
    }
    return v;
  };

  SdpProblem out;
  out.block_dims = p.block_dims;
  out.objective = p.objective;
  out.trace_bound = p.trace_bound;

  std::vector<Eigen::VectorXd> basis;  // orthonormal
  std::vector<double> basis_rhs;       // value implied on each basis vector
  for (int i = 0; i < p.num_constraints(); ++i) {
    Eigen::VectorXd v = vectorize(p.constraints[i]);
    const double nrm = v.norm();
    if (nrm == 0.0) {
      if (std::abs(p.rhs[i]) > consistency_tolerance) throw InfeasibleError("zero constraint operator with nonzero value");
      continue;
    }
    v /= nrm;
    double b = p.rhs[i] / nrm;
    double implied = 0.0;
    Eigen::VectorXd w = v;
    // Two passes of modified Gram–Schmidt.
    std::vector<double> coef(basis.size(), 0.0);
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < basis.size(); ++k) {
        const double c = basis[k].dot(w);
        w -= c * basis[k];
        coef[k] += c;
      }
    }
    for (std::size_t k = 0; k < basis.size(); ++k) implied += coef[k] * basis_rhs[k];
    const double resid = w.norm();
    if (resid <= drop_tolerance) {
      if (std::abs(b - implied) > consistency_tolerance) {
        throw InfeasibleError("inconsistent dependent constraint " + std::to_string(i) + " (value " +
                              std::to_string(b) + " vs implied " + std::to_string(implied) + ")");
      }
      continue;
    }
    basis.push_back(w / resid);
    basis_rhs.push_back((b - implied) / resid);
    out.add_constraint(p.constraints[i], p.rhs[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Interior-point solver on the real symmetric embedding
//
// A Hermitian block H = R + iI of size n becomes the real symmetric block
// [[R, -I], [I, R]] of size 2n; tr(emb(A) emb(X)) = 2 tr(A X), so every
// embedded operator carries a factor 1/2.

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Triplet {
  int row;
  int col;
  double value;
};

struct RealPart {
  int block;
  std::vector<Triplet> entries;  // full pattern, both triangles
};

struct RealOp {
  std::vector<RealPart> parts;
};

// With `real` set the imaginary parts are ignored and blocks keep their size:
// for real data Re(X) is optimal whenever X is, so nothing is lost.
RealOp embed(const BlockMatrix& m, const std::vector<int>& dims, double scale, bool real) {
  RealOp op;
  auto part_for = [&](int block) -> RealPart& {
    for (auto& p : op.parts)
      if (p.block == block) return p;
    op.parts.push_back(RealPart{block, {}});
    return op.parts.back();
  };
  for (const auto& e : m.entries()) {
    if (real) {
      const double x = scale * e.value.real();
      if (x == 0.0) continue;
      auto& t = part_for(e.block).entries;
      t.push_back({e.row, e.col, x});
      if (e.row != e.col) t.push_back({e.col, e.row, x});
      continue;
    }
    const int n = dims[e.block];
    const double x = 0.5 * scale * e.value.real();
    const double y = 0.5 * scale * e.value.imag();
    auto& part = part_for(e.block);
    auto& t = part.entries;
    const int r = e.row;
    const int c = e.col;
    if (r == c) {
      if (x != 0.0) {
        t.push_back({r, r, x});
        t.push_back({r + n, r + n, x});
      }
      continue;
    }
    if (x != 0.0) {
      t.push_back({r, c, x});
      t.push_back({c, r, x});
      t.push_back({r + n, c + n, x});
      t.push_back({c + n, r + n, x});
    }
    if (y != 0.0) {
      t.push_back({r + n, c, y});
      t.push_back({c, r + n, y});
      t.push_back({r, c + n, -y});
      t.push_back({c + n, r, -y});
    }
  }
  std::sort(op.parts.begin(), op.parts.end(), [](const RealPart& a, const RealPart& b) { return a.block < b.block; });
  return op;
}

double frob2(const RealOp& op) {
  double s = 0.0;
  for (const auto& p : op.parts)
    for (const auto& t : p.entries) s += t.value * t.value;
  return s;
}

// tr(A G) = sum A[r,c] G[c,r]
double trace_with(const RealOp& op, const std::vector<MatrixXd>& g) {
  double s = 0.0;
  for (const auto& p : op.parts) {
    const MatrixXd& m = g[p.block];
    for (const auto& t : p.entries) s += t.value * m(t.col, t.row);
  }
  return s;
}

void accumulate(const RealOp& op, double w, std::vector<MatrixXd>& out) {
  for (const auto& p : op.parts) {
    MatrixXd& m = out[p.block];
    for (const auto& t : p.entries) m(t.row, t.col) += w * t.value;
  }
}

MatrixXd dense_part(const RealPart& p, int n) {
  MatrixXd m = MatrixXd::Zero(n, n);
  for (const auto& t : p.entries) m(t.row, t.col) += t.value;
  return m;
}

double block_inner(const std::vector<MatrixXd>& a, const std::vector<MatrixXd>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k].array() * b[k].array()).sum();
  return s;
}

double block_norm(const std::vector<MatrixXd>& a) { return std::sqrt(block_inner(a, a)); }

// Largest alpha with X + alpha dX >= 0 given the Cholesky factor of X.
double max_step(const std::vector<Eigen::LLT<MatrixXd>>& chol, const std::vector<MatrixXd>& d) {
  double alpha = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < d.size(); ++k) {
    const auto& L = chol[k].matrixL();
    MatrixXd t = L.solve(d[k]);
    MatrixXd w = L.solve(t.transpose());
    w = 0.5 * (w + w.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(w, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericError("step-length eigenvalue computation failed");
    const double lmin = es.eigenvalues()(0);
    if (lmin < 0.0) alpha = std::min(alpha, -1.0 / lmin);
  }
  return alpha;
}

class InteriorPoint {
 public:
  InteriorPoint(const SdpProblem& p, const SolverOptions& opt) : problem_(p), opt_(opt) {
    auto is_real = [](const BlockMatrix& a) {
      return std::all_of(a.entries().begin(), a.entries().end(), [](const auto& e) { return e.value.imag() == 0.0; });
    };
    // Purely imaginary constraints with zero value vanish on real matrices, so
    // they do not force the complex embedding.
    auto is_pure_imag = [](const BlockMatrix& a) {
      return std::all_of(a.entries().begin(), a.entries().end(), [](const auto& e) { return e.value.real() == 0.0; });
    };
    real_ = is_real(p.objective);
    for (int i = 0; i < p.num_constraints() && real_; ++i) {
      real_ = is_real(p.constraints[i]) || (is_pure_imag(p.constraints[i]) && p.rhs[i] == 0.0);
    }
    dims_.reserve(p.block_dims.size());
    for (int d : p.block_dims) dims_.push_back(real_ ? d : 2 * d);
    for (int i = 0; i < p.num_constraints(); ++i) {
      RealOp op = embed(p.constraints[i], p.block_dims, 1.0, real_);
      const double nrm = std::sqrt(frob2(op));
      if (nrm == 0.0) {
        if (real_ && p.rhs[i] == 0.0 && !p.constraints[i].empty()) continue;
        throw ArgumentError("solve: zero constraint operator (reduce constraints first)");
      }
      active_.push_back(i);
      row_scale_.push_back(nrm);
      ops_.push_back(embed(p.constraints[i], p.block_dims, 1.0 / nrm, real_));
    }
    m_ = static_cast<int>(active_.size());
    b_.resize(m_);
    for (int i = 0; i < m_; ++i) b_(i) = p.rhs[active_[i]] / row_scale_[i];
    c_ = embed(p.objective, p.block_dims, 1.0, real_);
    obj_scale_ = std::max(1.0, std::sqrt(frob2(c_)));
    c_ = embed(p.objective, p.block_dims, 1.0 / obj_scale_, real_);

    // Dense copies of constraints whose pairwise Schur cost would dominate.
    std::vector<long long> nnz_in_block(dims_.size(), 0);
    for (const auto& op : ops_)
      for (const auto& part : op.parts) nnz_in_block[part.block] += static_cast<long long>(part.entries.size());
    dense_.assign(m_, {});
    for (int i = 0; i < m_; ++i) {
      for (const auto& part : ops_[i].parts) {
        const double n = dims_[part.block];
        if (static_cast<double>(part.entries.size()) * static_cast<double>(nnz_in_block[part.block]) > 2.0 * n * n * n) {
          dense_[i].push_back(part.block);
        }
      }
    }
    // Constraint lists per block for the Schur complement.
    touching_.assign(dims_.size(), {});
    for (int i = 0; i < m_; ++i)
      for (std::size_t k = 0; k < ops_[i].parts.size(); ++k) touching_[ops_[i].parts[k].block].push_back({i, static_cast<int>(k)});
  }

  SdpCertificate run();

 private:
  bool is_dense(int i, int block) const {
    return std::find(dense_[i].begin(), dense_[i].end(), block) != dense_[i].end();
  }

  std::vector<MatrixXd> zeros() const {
    std::vector<MatrixXd> z;
    for (int n : dims_) z.push_back(MatrixXd::Zero(n, n));
    return z;
  }

  VectorXd apply_a(const std::vector<MatrixXd>& x) const {
    VectorXd v(m_);
    for (int i = 0; i < m_; ++i) v(i) = trace_with(ops_[i], x);
    return v;
  }

  std::vector<MatrixXd> apply_at(const VectorXd& y) const {
    auto out = zeros();
    for (int i = 0; i < m_; ++i)
      if (y(i) != 0.0) accumulate(ops_[i], y(i), out);
    return out;
  }

  MatrixXd schur(const std::vector<MatrixXd>& x, const std::vector<MatrixXd>& zinv) const;
  SdpCertificate certificate(const std::vector<MatrixXd>& x, const VectorXd& y, const std::vector<MatrixXd>& z,
                             int iterations, bool converged) const;

  const SdpProblem& problem_;
  SolverOptions opt_;
  std::vector<int> dims_;
  int m_ = 0;
  bool real_ = false;
  std::vector<int> active_;  // problem constraint index of each row
  std::vector<RealOp> ops_;
  std::vector<double> row_scale_;
  VectorXd b_;
  RealOp c_;
  double obj_scale_ = 1.0;
  std::vector<std::vector<int>> dense_;
  std::vector<std::vector<std::pair<int, int>>> touching_;  // (constraint, part index)
};

MatrixXd InteriorPoint::schur(const std::vector<MatrixXd>& x, const std::vector<MatrixXd>& zinv) const {
  // M_ij = tr(A_i X A_j Z^-1), accumulated block by block. Each unordered
  // pair is visited once: through the dense column when either side is
  // dense, otherwise through the sparse double sum.
  MatrixXd M = MatrixXd::Zero(m_, m_);
  for (std::size_t blk = 0; blk < dims_.size(); ++blk) {
    const auto& list = touching_[blk];
    const MatrixXd& X = x[blk];
    const MatrixXd& Zi = zinv[blk];
    const int n = dims_[blk];
    std::vector<char> dense_flag(list.size());
    for (std::size_t a = 0; a < list.size(); ++a) dense_flag[a] = is_dense(list[a].first, static_cast<int>(blk));

    for (std::size_t a = 0; a < list.size(); ++a) {
      if (!dense_flag[a]) continue;
      const auto& pj = ops_[list[a].first].parts[list[a].second];
      MatrixXd P = X * dense_part(pj, n) * Zi;
      const int j = list[a].first;
      for (std::size_t b = 0; b < list.size(); ++b) {
        if (dense_flag[b] && b < a) continue;
        const auto& pi = ops_[list[b].first].parts[list[b].second];
        double v = 0.0;
        for (const auto& t : pi.entries) v += t.value * P(t.col, t.row);
        const int i = list[b].first;
        M(i, j) += v;
        if (i != j) M(j, i) += v;
      }
    }
    for (std::size_t a = 0; a < list.size(); ++a) {
      if (dense_flag[a]) continue;
      const auto& pi = ops_[list[a].first].parts[list[a].second];
      const int i = list[a].first;
      for (std::size_t b = a; b < list.size(); ++b) {
        if (dense_flag[b]) continue;
        const auto& pj = ops_[list[b].first].parts[list[b].second];
        const int j = list[b].first;
        double v = 0.0;
        for (const auto& s : pi.entries) {
          for (const auto& t : pj.entries) {
            v += s.value * t.value * X(s.col, t.row) * Zi(t.col, s.row);
          }
        }
        M(i, j) += v;
        if (i != j) M(j, i) += v;
      }
    }
  }
  return M;
}

SdpCertificate InteriorPoint::certificate(const std::vector<MatrixXd>& x, const VectorXd& y,
                                          const std::vector<MatrixXd>& z, int iterations, bool converged) const {
  SdpCertificate cert;
  cert.iterations = iterations;
  cert.converged = converged;
  cert.trace_bound = problem_.trace_bound;

  // Primal blocks back to complex form.
  for (std::size_t k = 0; k < dims_.size(); ++k) {
    const int n = problem_.block_dims[k];
    const MatrixXd& Y = x[k];
    CMatrix rho(n, n);
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        rho(r, c) = real_ ? Complex(Y(r, c), 0.0)
                          : Complex(0.5 * (Y(r, c) + Y(r + n, c + n)), 0.5 * (Y(r + n, c) - Y(r, c + n)));
      }
    }
    cert.primal_blocks.push_back(0.5 * (rho + rho.adjoint()));
  }

  const int total = problem_.num_constraints();
  cert.dual = VectorXd::Zero(total);
  for (int i = 0; i < m_; ++i) cert.dual(active_[i]) = y(i) * obj_scale_ / row_scale_[i];

  cert.primal_value = problem_.objective.inner(cert.primal_blocks);
  cert.dual_value = 0.0;
  for (int i = 0; i < total; ++i) cert.dual_value += cert.dual(i) * problem_.rhs[i];

  double pres = 0.0;
  for (int i = 0; i < total; ++i) {
    pres = std::max(pres, std::abs(problem_.constraints[i].inner(cert.primal_blocks) - problem_.rhs[i]));
  }
  cert.primal_residual = pres;

  // Exact dual slack sum_i y_i A_i - C in the original complex coordinates.
  double slack_min = std::numeric_limits<double>::infinity();
  std::vector<CMatrix> zc;
  for (std::size_t k = 0; k < dims_.size(); ++k) zc.push_back(-problem_.objective.dense_block(static_cast<int>(k), problem_.block_dims[k]));
  for (int i = 0; i < total; ++i) {
    if (cert.dual(i) == 0.0) continue;
    for (const auto& e : problem_.constraints[i].entries()) {
      zc[e.block](e.row, e.col) += cert.dual(i) * e.value;
      if (e.row != e.col) zc[e.block](e.col, e.row) += cert.dual(i) * std::conj(e.value);
    }
  }
  for (auto& m : zc) {
    m = 0.5 * (m + m.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<CMatrix> es(m, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericError("dual slack eigenvalue computation failed");
    slack_min = std::min(slack_min, es.eigenvalues()(0));
  }
  cert.dual_slack_mineig = slack_min;

  // Residual of the iterate's own slack, for diagnostics.
  auto aty = apply_at(y);
  double dres = 0.0;
  for (std::size_t k = 0; k < dims_.size(); ++k) {
    MatrixXd c = zeros()[k];
    for (const auto& part : c_.parts)
      if (part.block == static_cast<int>(k)) c += dense_part(part, dims_[k]);
    dres = std::max(dres, (aty[k] - c - z[k]).cwiseAbs().maxCoeff() * obj_scale_);
  }
  cert.dual_residual = dres;
  return cert;
}

SdpCertificate InteriorPoint::run() {
  const int nb = static_cast<int>(dims_.size());
  const double N = std::accumulate(dims_.begin(), dims_.end(), 0.0);

  std::vector<MatrixXd> C = zeros();
  accumulate(c_, 1.0, C);
  const double cnorm = block_norm(C);
  const double bnorm = b_.norm();

  // Infeasible start from scaled identities.
  double xi = std::max(10.0, std::sqrt(N));
  for (int i = 0; i < m_; ++i) xi = std::max(xi, N * (1.0 + std::abs(b_(i))) / 2.0);
  const double zeta = std::max({10.0, std::sqrt(N), cnorm});
  std::vector<MatrixXd> X, Z;
  for (int n : dims_) {
    X.push_back(xi * MatrixXd::Identity(n, n));
    Z.push_back(zeta * MatrixXd::Identity(n, n));
  }
  VectorXd y = VectorXd::Zero(m_);

  struct Best {
    double merit = std::numeric_limits<double>::infinity();
    std::vector<MatrixXd> x, z;
    VectorXd y;
    int it = 0;
  } best;

  std::vector<Eigen::LLT<MatrixXd>> cx(nb), cz(nb);
  std::vector<MatrixXd> Zinv(nb);

  for (int it = 0; it <= opt_.max_iterations; ++it) {
    for (int k = 0; k < nb; ++k) {
      cx[k].compute(X[k]);
      cz[k].compute(Z[k]);
      if (cx[k].info() != Eigen::Success || cz[k].info() != Eigen::Success) {
        throw ConvergenceError("iterate lost positive definiteness", certificate(best.x.empty() ? X : best.x,
                                                                                  best.x.empty() ? y : best.y,
                                                                                  best.x.empty() ? Z : best.z, it, false));
      }
      Zinv[k] = cz[k].solve(MatrixXd::Identity(dims_[k], dims_[k]));
      Zinv[k] = 0.5 * (Zinv[k] + Zinv[k].transpose()).eval();
    }

    const VectorXd rp = b_ - apply_a(X);
    auto aty = apply_at(y);
    std::vector<MatrixXd> Rd(nb);
    for (int k = 0; k < nb; ++k) Rd[k] = C[k] + Z[k] - aty[k];

    const double xz = block_inner(X, Z);
    const double mu = xz / N;
    const double pobj = block_inner(C, X);
    const double dobj = b_.dot(y);
    const double pinf = rp.norm() / (1.0 + bnorm);
    const double dinf = block_norm(Rd) / (1.0 + cnorm);
    // Measured in the caller's objective units so that a large objective scale
    // cannot hide an absolute gap behind the 1 in the denominator.
    const double denom = 1.0 + obj_scale_ * (std::abs(pobj) + std::abs(dobj));
    const double gap = obj_scale_ * std::max(xz, std::abs(pobj - dobj)) / denom;

    if (opt_.verbose) {
      std::cerr << std::setw(3) << it << std::scientific << std::setprecision(3) << "  pobj " << pobj * obj_scale_
                << "  dobj " << dobj * obj_scale_ << "  gap " << gap << "  pinf " << pinf << "  dinf " << dinf
                << "  mu " << mu << '\n';
    }

    const double merit = std::max({gap / opt_.gap_tolerance, pinf / opt_.feasibility_tolerance,
                                   dinf / opt_.feasibility_tolerance});
    if (merit < best.merit) {
      best = Best{merit, X, Z, y, it};
    }
    if (gap <= opt_.gap_tolerance && pinf <= opt_.feasibility_tolerance && dinf <= opt_.feasibility_tolerance) {
      return certificate(X, y, Z, it, true);
    }
    if (it == opt_.max_iterations || it - best.it > 12) break;

    // Primal infeasibility ray: b^T y -> -inf while A^T y stays PSD.
    const double ynorm = y.norm();
    if (ynorm > 1e10 * (1.0 + cnorm) && dobj < 0.0) {
      const VectorXd ray = y / ynorm;
      const double bray = b_.dot(ray);
      auto atr = apply_at(ray);
      double lmin = std::numeric_limits<double>::infinity();
      for (auto& m : atr) {
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(m, Eigen::EigenvaluesOnly);
        lmin = std::min(lmin, es.eigenvalues()(0));
      }
      if (bray < 0.0 && lmin > -1e-8 * std::abs(bray)) throw InfeasibleError("primal infeasibility ray detected");
    }

    MatrixXd M = schur(X, Zinv);
    Eigen::LLT<MatrixXd> chol(M);
    if (chol.info() != Eigen::Success) {
      const double shift = 1e-14 * std::max(1.0, M.diagonal().cwiseAbs().maxCoeff());
      M.diagonal().array() += shift;
      chol.compute(M);
      if (chol.info() != Eigen::Success) {
        throw ConvergenceError("Schur complement is singular; constraints may be dependent",
                               certificate(best.x, best.y, best.z, it, false));
      }
    }

    // Direction for a given complementarity target:
    //   M dy = A(G) - b,  G = sigma mu Z^-1 + X Rd Z^-1 - corr
    //   dZ = A^T dy - Rd, dX = sym(sigma mu Z^-1 - X - X dZ Z^-1 - corr)
    std::vector<MatrixXd> XRdZi(nb);
    for (int k = 0; k < nb; ++k) XRdZi[k] = X[k] * Rd[k] * Zinv[k];

    auto direction = [&](double target, const std::vector<MatrixXd>* corr, std::vector<MatrixXd>& dX, VectorXd& dy,
                         std::vector<MatrixXd>& dZ) {
      std::vector<MatrixXd> G(nb);
      for (int k = 0; k < nb; ++k) {
        G[k] = target * Zinv[k] + XRdZi[k];
        if (corr) G[k] -= (*corr)[k];
      }
      VectorXd rhs = apply_a(G) - b_;
      dy = chol.solve(rhs);
      auto atdy = apply_at(dy);
      dZ.resize(nb);
      dX.resize(nb);
      for (int k = 0; k < nb; ++k) {
        dZ[k] = atdy[k] - Rd[k];
        dZ[k] = 0.5 * (dZ[k] + dZ[k].transpose()).eval();
        MatrixXd d = target * Zinv[k] - X[k] - X[k] * dZ[k] * Zinv[k];
        if (corr) d -= (*corr)[k];
        dX[k] = 0.5 * (d + d.transpose());
      }
    };

    std::vector<MatrixXd> dXa, dZa;
    VectorXd dya;
    direction(0.0, nullptr, dXa, dya, dZa);
    const double ap_a = std::min(1.0, max_step(cx, dXa));
    const double ad_a = std::min(1.0, max_step(cz, dZa));
    double xz_aff = 0.0;
    for (int k = 0; k < nb; ++k) {
      xz_aff += ((X[k] + ap_a * dXa[k]).array() * (Z[k] + ad_a * dZa[k]).array()).sum();
    }
    const double mu_aff = std::max(0.0, xz_aff / N);
    double sigma = std::pow(mu_aff / mu, 3.0);
    sigma = std::clamp(sigma, 0.0, 1.0);

    std::vector<MatrixXd> corr(nb);
    for (int k = 0; k < nb; ++k) corr[k] = dXa[k] * dZa[k] * Zinv[k];
    std::vector<MatrixXd> dX, dZ;
    VectorXd dy;
    direction(sigma * mu, &corr, dX, dy, dZ);

    const double ap = std::min(1.0, opt_.step_fraction * max_step(cx, dX));
    const double ad = std::min(1.0, opt_.step_fraction * max_step(cz, dZ));
    for (int k = 0; k < nb; ++k) {
      X[k] += ap * dX[k];
      Z[k] += ad * dZ[k];
    }
    y += ad * dy;
  }
  throw ConvergenceError("interior-point iteration limit reached", certificate(best.x, best.y, best.z, best.it, false));
}

}  // namespace

double SdpCertificate::relative_gap() const {
  return std::abs(dual_value - primal_value) / std::max(1.0, std::abs(primal_value));
}

double SdpCertificate::primal_min_eigenvalue() const {
  double lmin = std::numeric_limits<double>::infinity();
  for (const auto& b : primal_blocks) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(b, Eigen::EigenvaluesOnly);
    lmin = std::min(lmin, es.eigenvalues()(0));
  }
  return lmin;
}

SdpCertificate solve(const SdpProblem& p, const SolverOptions& options) {
  p.validate();
  InteriorPoint ip(p, options);
  return ip.run();
}

double certified_bound(const SdpCertificate& c) {
  return c.dual_value + std::max(0.0, -c.dual_slack_mineig) * c.trace_bound;
}

void write_triplets(std::ostream& os, const SdpProblem& p) {
  p.validate();
  std::vector<int> offset(p.block_dims.size(), 0);
  for (std::size_t b = 1; b < p.block_dims.size(); ++b) offset[b] = offset[b - 1] + p.block_dims[b - 1];
  os << "# cowqkd sdp triplets: maximize tr(C X) s.t. tr(A_i X) = b_i, X psd\n";
  os << "# blocks";
  for (int d : p.block_dims) os << ' ' << d;
  os << "\n# constraints " << p.num_constraints() << "\n";
  os << "# index row col real imag rhs\n";
  os << std::setprecision(17);
  auto dump = [&](int index, const BlockMatrix& m, double rhs) {
    for (const auto& e : m.entries()) {
      os << index << ' ' << offset[e.block] + e.row << ' ' << offset[e.block] + e.col << ' ' << e.value.real() << ' '
         << e.value.imag() << ' ' << rhs << '\n';
    }
  };
  dump(0, p.objective, 0.0);
  for (int i = 0; i < p.num_constraints(); ++i) dump(i + 1, p.constraints[i], p.rhs[i]);
}

}  // namespace cowqkd
