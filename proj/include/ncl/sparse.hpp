#pragma once
// Sparse symmetric indefinite LDL^T with static pivoting, AMD fill-reducing
// ordering, inertia extraction, and Richardson iterative refinement.
// The factorization is deterministic: the pivot order is fixed by analyze()
// and never revised numerically; tiny pivots are perturbed in place.

#include <string>
#include <vector>

namespace ncl {

// Lower triangle, compressed sparse column. Row indices strictly increasing
// within a column, no duplicates, row >= col for every entry. A missing
// diagonal entry is treated as an exact zero.
struct SparseSymMatrix {
  int n = 0;
  std::vector<int> col_ptr;  // size n + 1
  std::vector<int> row_ind;  // size nnz
  std::vector<double> val;   // size nnz

  int nnz() const { return col_ptr.empty() ? 0 : col_ptr[n]; }
};

// Builds the lower triangle from triplets. Entries above the diagonal are
// mirrored, duplicates are summed.
SparseSymMatrix sym_from_triplets(int n, const std::vector<int>& rows,
                                  const std::vector<int>& cols,
                                  const std::vector<double>& vals);

// y += A x with A the full symmetric matrix represented by its lower triangle.
void sym_matvec(const SparseSymMatrix& A, const double* x, double* y);

// Approximate minimum degree ordering on the pattern of A + A^T.
std::vector<int> amd_order(const SparseSymMatrix& A);

struct SymbolicLdl {
  int n = 0;
  std::vector<int> perm;   // perm[k] = original index eliminated k-th
  std::vector<int> iperm;  // iperm[original] = position in the pivot order
  std::vector<int> parent; // elimination tree of the permuted pattern
  std::vector<int> lcol_ptr;  // column pointers of L (strictly lower), size n+1

  // Permuted pattern, upper triangle incl. diagonal, by column; a_map sends
  // each entry of the original lower-CSC matrix to its slot here so numeric
  // refactorization is a flat scatter.
  std::vector<int> a_col_ptr, a_row_ind, a_map;

  int l_nnz() const { return lcol_ptr.empty() ? 0 : lcol_ptr[n]; }
};

// Symbolic analysis under a caller-supplied elimination order.
SymbolicLdl analyze_with_permutation(const SparseSymMatrix& A,
                                     const std::vector<int>& perm);

// Symbolic analysis with the AMD order. Reusable across any number of
// factorizations with the same pattern.
SymbolicLdl analyze(const SparseSymMatrix& A);

struct LdlFactors {
  int n = 0;
  bool ok = false;        // false: zero pivot with pivot_eps == 0, or overflow
  std::vector<int> lcol_ptr, lrow_ind;  // L strictly lower, CSC
  std::vector<double> lval;
  std::vector<double> d;  // diagonal of D
  int n_pos = 0, n_neg = 0, n_zero = 0;  // inertia, counted after perturbation
  int perturbed = 0;      // pivots replaced by sign(d) * pivot_eps
  double pivot_eps = 0.0;
};

// Numeric factorization P A P^T = L D L^T. Pivots with |d| < pivot_eps are
// replaced by sign(d) * pivot_eps (an exact zero becomes +pivot_eps) and
// counted. With pivot_eps == 0 an exact zero pivot aborts (ok = false).
LdlFactors factorize(const SymbolicLdl& S, const SparseSymMatrix& A,
                     double pivot_eps = 1e-10);

// x = (P^T L^-T D^-1 L^-1 P) b, no refinement.
void ldl_solve(const SymbolicLdl& S, const LdlFactors& F, const double* b,
               double* x);

struct RefineResult {
  std::vector<double> x;
  double rel_residual = 0.0;  // inf-norm, relative to ||b||_inf (absolute if b = 0)
  int steps = 0;              // refinement corrections applied
  bool converged = false;     // rel_residual <= tol reached
};

// Richardson refinement in double precision. Stops at rel_residual <= tol,
// stagnation (residual reduction factor > 0.5 twice in a row), or max_ref.
// A correction that increases the residual is rejected and iteration stops
// with the best iterate, so the result is never worse than the plain solve.
RefineResult solve_refined(const SymbolicLdl& S, const LdlFactors& F,
                           const SparseSymMatrix& A,
                           const std::vector<double>& b, int max_ref = 10,
                           double tol = 1e-12);

// Matrix Market coordinate format (real symmetric), 17 significant digits.
void dump_matrix_market(const SparseSymMatrix& A, const std::string& path);
// Matrix Market array format (real general, n x 1), 17 significant digits.
void dump_vector_market(const std::vector<double>& b, const std::string& path);

}  // namespace ncl
