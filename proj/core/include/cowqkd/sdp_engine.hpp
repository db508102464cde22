#pragma once

#include <iosfwd>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cowqkd/errors.hpp"
#include "cowqkd/operator_space.hpp"

namespace cowqkd {

/// Sparse Hermitian matrix living on a direct sum of blocks. Only the upper
/// triangle (row <= col) of each block is stored; the lower one is implied.
class BlockMatrix {
 public:
  struct Entry {
    int block;
    int row;
    int col;
    Complex value;
  };

  /// Adds v at (row, col) of `block`; (col, row) receives conj(v) implicitly.
  void add(int block, int row, int col, Complex v);
  /// Copies the nonzero entries of a dense Hermitian matrix into `block`.
  void add_dense(int block, const CMatrix& m, double drop = 0.0);

  [[nodiscard]] const std::vector<Entry>& entries() const { return entries_; }
  [[nodiscard]] bool empty() const { return entries_.empty(); }
  [[nodiscard]] CMatrix dense_block(int block, int dim) const;
  /// Frobenius norm over all blocks.
  [[nodiscard]] double norm() const;
  /// tr(A X) against dense blocks.
  [[nodiscard]] double inner(const std::vector<CMatrix>& blocks) const;
  /// Hilbert–Schmidt inner product tr(A B) of two sparse block matrices.
  [[nodiscard]] double inner(const BlockMatrix& other) const;

  BlockMatrix& operator*=(double s);

 private:
  std::vector<Entry> entries_;  // sorted by (block, row, col)
};

/// max tr(C X) s.t. tr(A_i X) = b_i, X >= 0, X block diagonal.
struct SdpProblem {
  std::vector<int> block_dims;
  BlockMatrix objective;
  std::vector<BlockMatrix> constraints;
  std::vector<double> rhs;
  /// Upper bound on tr(X) over the feasible set. Enters the certified bound.
  double trace_bound = 1.0;

  [[nodiscard]] int num_constraints() const { return static_cast<int>(constraints.size()); }
  [[nodiscard]] int total_dim() const;
  void add_constraint(BlockMatrix a, double b);
  /// Throws ArgumentError on out-of-range entries or mismatched sizes.
  void validate() const;

  /// Builds a problem from dense operators. An empty `blocks` list means a
  /// single block; otherwise `blocks` partitions the diagonal into
  /// consecutive ranges and every operator must be block diagonal.
  static SdpProblem from_operators(const HermitianOperator& objective,
                                   const std::vector<std::pair<HermitianOperator, double>>& constraints,
                                   std::vector<int> blocks = {}, double trace_bound = 1.0);
};

struct SolverOptions {
  double gap_tolerance = 1e-8;
  double feasibility_tolerance = 1e-9;
  int max_iterations = 120;
  double step_fraction = 0.98;
  bool verbose = false;
};

struct SdpCertificate {
  std::vector<CMatrix> primal_blocks;
  Eigen::VectorXd dual;  // y, one multiplier per constraint
  double primal_value = 0.0;
  double dual_value = 0.0;
  double primal_residual = 0.0;    // max_i |tr(A_i X) - b_i|
  double dual_residual = 0.0;      // max |(sum_i y_i A_i - C - Z)_kl| of the final iterate
  double dual_slack_mineig = 0.0;  // lambda_min(sum_i y_i A_i - C), recomputed exactly
  double trace_bound = 1.0;
  int iterations = 0;
  bool converged = false;

  [[nodiscard]] double relative_gap() const;
  [[nodiscard]] double primal_min_eigenvalue() const;
};

class ConvergenceError : public NumericError {
 public:
  ConvergenceError(const std::string& what, SdpCertificate best)
      : NumericError(what), best_(std::move(best)) {}
  [[nodiscard]] const SdpCertificate& best() const { return best_; }

 private:
  SdpCertificate best_;
};

/// Drops constraints whose operators are linearly dependent on earlier ones
/// (modified Gram–Schmidt in the Hilbert–Schmidt geometry, relative drop
/// tolerance `drop_tolerance`). A dropped constraint whose right-hand side
/// disagrees with the implied value by more than `consistency_tolerance`
/// (after normalizing the operator) raises InfeasibleError.
SdpProblem independent_constraints(const SdpProblem& p, double drop_tolerance = 1e-10,
                                   double consistency_tolerance = 1e-8);

/// Primal–dual interior-point solve. Throws ConvergenceError (carrying the
/// best iterate) on iteration exhaustion and InfeasibleError when a primal
/// infeasibility ray is detected.
SdpCertificate solve(const SdpProblem& p, const SolverOptions& options = {});

/// Weak-duality upper bound on the optimum:
/// dual_value + max(0, -dual_slack_mineig) * trace_bound.
double certified_bound(const SdpCertificate& c);

/// Plain-text triplet dump. Header lines start with '#'. Each data line is
/// `index row col real imag rhs` with global (block-offset) indices, upper
/// triangle only; index 0 is the objective (rhs 0), constraints are 1-based.
void write_triplets(std::ostream& os, const SdpProblem& p);

}  // namespace cowqkd
