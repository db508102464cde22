#include "cowqkd/operator_space.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Eigenvalues>

#include "cowqkd/errors.hpp"

namespace cowqkd {

SubsystemLayout::SubsystemLayout(std::vector<int> dims, int ceiling)
    : dims_(std::move(dims)), ceiling_(ceiling) {
  if (dims_.empty()) throw ArgumentError("layout needs at least one subsystem");
  long long total = 1;
  for (int d : dims_) {
    if (d < 1) throw ArgumentError("subsystem dimension must be >= 1");
    total *= d;
    if (total > ceiling_) {
      throw CapacityError("total dimension exceeds ceiling " + std::to_string(ceiling_));
    }
  }
  total_ = static_cast<int>(total);
}

SubsystemLayout SubsystemLayout::concat(const SubsystemLayout& other) const {
  std::vector<int> d = dims_;
  d.insert(d.end(), other.dims_.begin(), other.dims_.end());
  return SubsystemLayout(std::move(d), std::max(ceiling_, other.ceiling_));
}

HermitianOperator::HermitianOperator(SubsystemLayout layout, CMatrix entries, Trusted)
    : layout_(std::move(layout)), m_(std::move(entries)) {}

HermitianOperator::HermitianOperator(SubsystemLayout layout, const CMatrix& entries)
    : layout_(std::move(layout)) {
  const int n = layout_.total();
  if (entries.rows() != n || entries.cols() != n) {
    throw ArgumentError("matrix shape does not match layout dimension");
  }
  const double scale = std::max(1.0, entries.cwiseAbs().maxCoeff());
  const double drift = (entries - entries.adjoint()).cwiseAbs().maxCoeff();
  if (drift > kHermiticityTolerance * scale) {
    throw ArgumentError("matrix is not Hermitian (drift " + std::to_string(drift) + ")");
  }
  m_ = (entries + entries.adjoint()) * 0.5;
}

HermitianOperator::HermitianOperator(const CMatrix& entries)
    : HermitianOperator(SubsystemLayout({static_cast<int>(entries.rows())}), entries) {}

HermitianOperator HermitianOperator::identity(const SubsystemLayout& layout) {
  return {layout, CMatrix::Identity(layout.total(), layout.total()), Trusted{}};
}

HermitianOperator HermitianOperator::zero(const SubsystemLayout& layout) {
  return {layout, CMatrix::Zero(layout.total(), layout.total()), Trusted{}};
}

HermitianOperator HermitianOperator::diagonal(std::span<const double> values) {
  const int n = static_cast<int>(values.size());
  CMatrix m = CMatrix::Zero(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = values[i];
  return {SubsystemLayout({n}), std::move(m), Trusted{}};
}

HermitianOperator HermitianOperator::projector(const CVector& psi) {
  const int n = static_cast<int>(psi.size());
  return {SubsystemLayout({n}), psi * psi.adjoint()};
}

double HermitianOperator::inner(const HermitianOperator& other) const {
  if (dim() != other.dim()) throw ArgumentError("inner product of mismatched dimensions");
  // tr(A B) = sum_ij A_ij B_ji = sum_ij A_ij conj(B_ij) for Hermitian B.
  return (m_.array() * other.m_.array().conjugate()).sum().real();
}

HermitianOperator HermitianOperator::relabeled(const SubsystemLayout& layout) const {
  if (layout.total() != dim()) throw ArgumentError("relabel must preserve total dimension");
  return {layout, m_, Trusted{}};
}

HermitianOperator& HermitianOperator::operator+=(const HermitianOperator& o) {
  if (dim() != o.dim()) throw ArgumentError("sum of mismatched dimensions");
  m_ += o.m_;
  return *this;
}

HermitianOperator& HermitianOperator::operator-=(const HermitianOperator& o) {
  if (dim() != o.dim()) throw ArgumentError("difference of mismatched dimensions");
  m_ -= o.m_;
  return *this;
}

HermitianOperator& HermitianOperator::operator*=(double s) {
  m_ *= s;
  return *this;
}

HermitianOperator kron(const HermitianOperator& a, const HermitianOperator& b) {
  SubsystemLayout layout = a.layout().concat(b.layout());
  const int na = a.dim();
  const int nb = b.dim();
  CMatrix out(na * nb, na * nb);
  for (int i = 0; i < na; ++i) {
    for (int j = 0; j < na; ++j) {
      out.block(i * nb, j * nb, nb, nb) = a.m_(i, j) * b.m_;
    }
  }
  return {std::move(layout), std::move(out), HermitianOperator::Trusted{}};
}

HermitianOperator partial_trace(const HermitianOperator& m, std::span<const int> keep) {
  const auto& dims = m.layout().dims();
  const int nsub = m.layout().count();
  std::vector<bool> kept(nsub, false);
  for (int k : keep) {
    if (k < 0 || k >= nsub) throw ArgumentError("partial_trace: subsystem index out of range");
    if (kept[k]) throw ArgumentError("partial_trace: duplicate subsystem index");
    kept[k] = true;
  }

  std::vector<int> kept_dims;
  for (int s = 0; s < nsub; ++s)
    if (kept[s]) kept_dims.push_back(dims[s]);
  if (kept_dims.empty()) kept_dims.push_back(1);
  SubsystemLayout out_layout(kept_dims, m.layout().ceiling());

  // Strides of every subsystem in the full index and in the kept index.
  std::vector<int> stride(nsub, 1);
  for (int s = nsub - 2; s >= 0; --s) stride[s] = stride[s + 1] * dims[s + 1];
  std::vector<int> kept_stride(nsub, 0);
  {
    int acc = 1;
    for (int s = nsub - 1; s >= 0; --s) {
      if (kept[s]) {
        kept_stride[s] = acc;
        acc *= dims[s];
      }
    }
  }

  const int n = m.dim();
  std::vector<int> kept_index(n), traced_index(n);
  for (int idx = 0; idx < n; ++idx) {
    int k = 0, t = 0, tstride = 1;
    for (int s = nsub - 1; s >= 0; --s) {
      const int digit = (idx / stride[s]) % dims[s];
      if (kept[s]) {
        k += digit * kept_stride[s];
      } else {
        t += digit * tstride;
        tstride *= dims[s];
      }
    }
    kept_index[idx] = k;
    traced_index[idx] = t;
  }

  const int nk = out_layout.total();
  CMatrix out = CMatrix::Zero(nk, nk);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      if (traced_index[r] == traced_index[c]) out(kept_index[r], kept_index[c]) += m.m_(r, c);
    }
  }
  return {std::move(out_layout), std::move(out), HermitianOperator::Trusted{}};
}

HermitianOperator congruence(const CMatrix& f, const HermitianOperator& m, const SubsystemLayout& out) {
  if (f.rows() != m.dim() || f.cols() != out.total()) {
    throw ArgumentError("congruence: map shape does not match operator and output layout");
  }
  CMatrix r = f.adjoint() * m.m_ * f;
  r = (r + r.adjoint()) * 0.5;
  return {out, std::move(r), HermitianOperator::Trusted{}};
}

std::vector<HermitianOperator> hermitian_basis(int d) {
  if (d < 1) throw ArgumentError("hermitian_basis: dimension must be >= 1");
  const SubsystemLayout layout({d});
  const double r = 1.0 / std::sqrt(2.0);
  std::vector<HermitianOperator> basis;
  basis.reserve(static_cast<std::size_t>(d) * d);
  for (int a = 0; a < d; ++a) {
    CMatrix m = CMatrix::Zero(d, d);
    m(a, a) = 1.0;
    basis.emplace_back(layout, m);
  }
  for (int a = 0; a < d; ++a) {
    for (int b = a + 1; b < d; ++b) {
      CMatrix x = CMatrix::Zero(d, d);
      x(a, b) = r;
      x(b, a) = r;
      basis.emplace_back(layout, x);
      CMatrix y = CMatrix::Zero(d, d);
      y(a, b) = Complex(0.0, -r);
      y(b, a) = Complex(0.0, r);
      basis.emplace_back(layout, y);
    }
  }
  return basis;
}

Eigen::VectorXd eigenvalues(const HermitianOperator& m) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(m.matrix(), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericError("eigen-solver did not converge");
  return es.eigenvalues();
}

double min_eigenvalue(const HermitianOperator& m) { return eigenvalues(m).minCoeff(); }

double max_eigenvalue(const HermitianOperator& m) { return eigenvalues(m).maxCoeff(); }

}  // namespace cowqkd
