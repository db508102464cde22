#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace cowqkd {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr int kDefaultDimensionCeiling = 1024;

/// Ordered tensor factorization of a finite Hilbert space. Subsystem 0 is the
/// most significant factor of the row index (Kronecker convention).
class SubsystemLayout {
 public:
  SubsystemLayout() : SubsystemLayout(std::vector<int>{1}) {}
  explicit SubsystemLayout(std::vector<int> dims, int ceiling = kDefaultDimensionCeiling);

  [[nodiscard]] const std::vector<int>& dims() const { return dims_; }
  [[nodiscard]] int total() const { return total_; }
  [[nodiscard]] int count() const { return static_cast<int>(dims_.size()); }
  [[nodiscard]] int ceiling() const { return ceiling_; }

  /// Layout of the tensor product self ⊗ other.
  [[nodiscard]] SubsystemLayout concat(const SubsystemLayout& other) const;

  bool operator==(const SubsystemLayout& other) const { return dims_ == other.dims_; }

 private:
  std::vector<int> dims_;
  int total_ = 1;
  int ceiling_ = kDefaultDimensionCeiling;
};

/// Dense complex self-adjoint matrix over a SubsystemLayout.
///
/// Construction symmetrizes the input, M <- (M + M^dag)/2, after checking that
/// the anti-Hermitian part is below 1e-12 (relative to max(1, max|M_ij|)).
class HermitianOperator {
 public:
  static constexpr double kHermiticityTolerance = 1e-12;

  HermitianOperator() = default;
  HermitianOperator(SubsystemLayout layout, const CMatrix& entries);
  /// Single-factor layout sized from the matrix.
  explicit HermitianOperator(const CMatrix& entries);

  static HermitianOperator identity(const SubsystemLayout& layout);
  static HermitianOperator zero(const SubsystemLayout& layout);
  static HermitianOperator diagonal(std::span<const double> values);
  /// |psi><psi| on a single-factor layout.
  static HermitianOperator projector(const CVector& psi);

  [[nodiscard]] const SubsystemLayout& layout() const { return layout_; }
  [[nodiscard]] const CMatrix& matrix() const { return m_; }
  [[nodiscard]] int dim() const { return layout_.total(); }
  [[nodiscard]] Complex operator()(int r, int c) const { return m_(r, c); }

  [[nodiscard]] double trace() const { return m_.trace().real(); }
  /// Hilbert–Schmidt inner product tr(A B), real for Hermitian A, B.
  [[nodiscard]] double inner(const HermitianOperator& other) const;

  /// Same entries, different factorization of the same total dimension.
  [[nodiscard]] HermitianOperator relabeled(const SubsystemLayout& layout) const;

  HermitianOperator& operator+=(const HermitianOperator& o);
  HermitianOperator& operator-=(const HermitianOperator& o);
  HermitianOperator& operator*=(double s);

  friend HermitianOperator operator+(HermitianOperator a, const HermitianOperator& b) { return a += b; }
  friend HermitianOperator operator-(HermitianOperator a, const HermitianOperator& b) { return a -= b; }
  friend HermitianOperator operator*(HermitianOperator a, double s) { return a *= s; }
  friend HermitianOperator operator*(double s, HermitianOperator a) { return a *= s; }

 private:
  struct Trusted {};
  HermitianOperator(SubsystemLayout layout, CMatrix entries, Trusted);

  SubsystemLayout layout_;
  CMatrix m_;

  friend HermitianOperator kron(const HermitianOperator&, const HermitianOperator&);
  friend HermitianOperator partial_trace(const HermitianOperator&, std::span<const int>);
  friend HermitianOperator congruence(const CMatrix&, const HermitianOperator&, const SubsystemLayout&);
};

/// Kronecker product; the layout is the concatenation of both layouts.
HermitianOperator kron(const HermitianOperator& a, const HermitianOperator& b);

/// Trace out every subsystem not listed in `keep` (0-based, any order; the
/// result keeps the original subsystem order).
HermitianOperator partial_trace(const HermitianOperator& m, std::span<const int> keep);
inline HermitianOperator partial_trace(const HermitianOperator& m, std::initializer_list<int> keep) {
  return partial_trace(m, std::span<const int>(keep.begin(), keep.size()));
}

/// F^dag M F for an arbitrary (possibly rectangular) map F into M's space.
HermitianOperator congruence(const CMatrix& f, const HermitianOperator& m, const SubsystemLayout& out);

/// d^2 Hermitian matrices orthonormal under tr(A B): the diagonal units
/// |a><a|, then for each a < b the sigma_x-like (|a><b| + |b><a|)/sqrt2 and the
/// sigma_y-like (-i|a><b| + i|b><a|)/sqrt2. Every element has at most two
/// nonzero entries, so elements never straddle a block of a direct sum.
std::vector<HermitianOperator> hermitian_basis(int d);

/// Ascending eigenvalues.
Eigen::VectorXd eigenvalues(const HermitianOperator& m);
double min_eigenvalue(const HermitianOperator& m);
double max_eigenvalue(const HermitianOperator& m);

}  // namespace cowqkd
