#include <ncl/sparse.hpp>

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <tuple>

namespace ncl {

namespace {

void validate_lower_csc(const SparseSymMatrix& A) {
  if (A.n < 0 || static_cast<int>(A.col_ptr.size()) != A.n + 1)
    throw std::invalid_argument("sparse: malformed col_ptr");
  for (int j = 0; j < A.n; ++j) {
    if (A.col_ptr[j] > A.col_ptr[j + 1])
      throw std::invalid_argument("sparse: col_ptr not nondecreasing");
    for (int p = A.col_ptr[j]; p < A.col_ptr[j + 1]; ++p) {
      if (A.row_ind[p] < j || A.row_ind[p] >= A.n)
        throw std::invalid_argument("sparse: row index outside lower triangle");
      if (p > A.col_ptr[j] && A.row_ind[p] <= A.row_ind[p - 1])
        throw std::invalid_argument("sparse: rows not strictly increasing");
    }
  }
}

}  // namespace

SparseSymMatrix sym_from_triplets(int n, const std::vector<int>& rows,
                                  const std::vector<int>& cols,
                                  const std::vector<double>& vals) {
  if (rows.size() != cols.size() || rows.size() != vals.size())
    throw std::invalid_argument("sym_from_triplets: length mismatch");
  std::vector<std::tuple<int, int, double>> ent;
  ent.reserve(rows.size());
  for (size_t k = 0; k < rows.size(); ++k) {
    int i = rows[k], j = cols[k];
    if (i < 0 || i >= n || j < 0 || j >= n)
      throw std::invalid_argument("sym_from_triplets: index out of range");
    if (i < j) std::swap(i, j);  // mirror upper entries into the lower triangle
    ent.emplace_back(j, i, vals[k]);
  }
  std::sort(ent.begin(), ent.end(),
            [](const auto& a, const auto& b) {
              return std::get<0>(a) != std::get<0>(b)
                         ? std::get<0>(a) < std::get<0>(b)
                         : std::get<1>(a) < std::get<1>(b);
            });
  SparseSymMatrix A;
  A.n = n;
  A.col_ptr.assign(n + 1, 0);
  for (size_t k = 0; k < ent.size(); ++k) {
    if (k > 0 && std::get<0>(ent[k]) == std::get<0>(ent[k - 1]) &&
        std::get<1>(ent[k]) == std::get<1>(ent[k - 1])) {
      A.val.back() += std::get<2>(ent[k]);
    } else {
      A.col_ptr[std::get<0>(ent[k]) + 1]++;
      A.row_ind.push_back(std::get<1>(ent[k]));
      A.val.push_back(std::get<2>(ent[k]));
    }
  }
  for (int j = 0; j < n; ++j) A.col_ptr[j + 1] += A.col_ptr[j];
  return A;
}

void sym_matvec(const SparseSymMatrix& A, const double* x, double* y) {
  for (int j = 0; j < A.n; ++j) {
    for (int p = A.col_ptr[j]; p < A.col_ptr[j + 1]; ++p) {
      const int i = A.row_ind[p];
      const double v = A.val[p];
      y[i] += v * x[j];
      if (i != j) y[j] += v * x[i];
    }
  }
}

std::vector<int> amd_order(const SparseSymMatrix& A) {
  using SpMat = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(2 * A.val.size());
  for (int j = 0; j < A.n; ++j)
    for (int p = A.col_ptr[j]; p < A.col_ptr[j + 1]; ++p) {
      trip.emplace_back(A.row_ind[p], j, 1.0);
      if (A.row_ind[p] != j) trip.emplace_back(j, A.row_ind[p], 1.0);
    }
  SpMat M(A.n, A.n);
  M.setFromTriplets(trip.begin(), trip.end());
  M.makeCompressed();
  Eigen::AMDOrdering<int> amd;
  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> P;
  amd(M, P);
  // The ordering's indices map pivot position k to the original index.
  std::vector<int> perm(A.n);
  for (int i = 0; i < A.n; ++i) perm[i] = P.indices()[i];
  return perm;
}

SymbolicLdl analyze_with_permutation(const SparseSymMatrix& A,
                                     const std::vector<int>& perm) {
  validate_lower_csc(A);
  const int n = A.n;
  if (static_cast<int>(perm.size()) != n)
    throw std::invalid_argument("analyze: permutation length mismatch");

  SymbolicLdl S;
  S.n = n;
  S.perm = perm;
  S.iperm.assign(n, -1);
  for (int k = 0; k < n; ++k) {
    if (perm[k] < 0 || perm[k] >= n || S.iperm[perm[k]] != -1)
      throw std::invalid_argument("analyze: not a permutation");
    S.iperm[perm[k]] = k;
  }

  // Permuted pattern, upper triangle incl. diagonal, by column.
  const int nnz = A.nnz();
  S.a_col_ptr.assign(n + 1, 0);
  std::vector<int> colcount(n, 0);
  for (int j = 0; j < n; ++j)
    for (int p = A.col_ptr[j]; p < A.col_ptr[j + 1]; ++p) {
      const int pi = S.iperm[A.row_ind[p]];
      const int pj = S.iperm[j];
      colcount[std::max(pi, pj)]++;
    }
  for (int c = 0; c < n; ++c) S.a_col_ptr[c + 1] = S.a_col_ptr[c] + colcount[c];
  S.a_row_ind.assign(nnz, 0);
  std::vector<int> orig_of_slot(nnz, 0);
  std::vector<int> next(S.a_col_ptr.begin(), S.a_col_ptr.end() - 1);
  for (int j = 0; j < n; ++j)
    for (int p = A.col_ptr[j]; p < A.col_ptr[j + 1]; ++p) {
      const int pi = S.iperm[A.row_ind[p]];
      const int pj = S.iperm[j];
      const int c = std::max(pi, pj);
      const int slot = next[c]++;
      S.a_row_ind[slot] = std::min(pi, pj);
      orig_of_slot[slot] = p;
    }
  // sort rows within each column, carrying the origin slots along
  S.a_map.assign(nnz, 0);
  std::vector<std::pair<int, int>> buf;
  for (int c = 0; c < n; ++c) {
    buf.clear();
    for (int s = S.a_col_ptr[c]; s < S.a_col_ptr[c + 1]; ++s)
      buf.emplace_back(S.a_row_ind[s], orig_of_slot[s]);
    std::sort(buf.begin(), buf.end());
    for (int k = 0; k < static_cast<int>(buf.size()); ++k) {
      const int s = S.a_col_ptr[c] + k;
      S.a_row_ind[s] = buf[k].first;
      S.a_map[buf[k].second] = s;
    }
  }

  // Elimination tree and per-column counts of L (up-looking reach).
  S.parent.assign(n, -1);
  std::vector<int> lnz(n, 0), flag(n, -1);
  for (int k = 0; k < n; ++k) {
    flag[k] = k;
    for (int p = S.a_col_ptr[k]; p < S.a_col_ptr[k + 1]; ++p) {
      int i = S.a_row_ind[p];
      if (i >= k) continue;
      while (flag[i] != k) {
        if (S.parent[i] == -1) S.parent[i] = k;
        lnz[i]++;
        flag[i] = k;
        i = S.parent[i];
      }
    }
  }
  S.lcol_ptr.assign(n + 1, 0);
  for (int c = 0; c < n; ++c) S.lcol_ptr[c + 1] = S.lcol_ptr[c] + lnz[c];
  return S;
}

SymbolicLdl analyze(const SparseSymMatrix& A) {
  return analyze_with_permutation(A, amd_order(A));
}

LdlFactors factorize(const SymbolicLdl& S, const SparseSymMatrix& A,
                     double pivot_eps) {
  const int n = S.n;
  if (A.n != n || A.nnz() != static_cast<int>(S.a_map.size()))
    throw std::invalid_argument("factorize: pattern mismatch with analyze");

  LdlFactors F;
  F.n = n;
  F.pivot_eps = pivot_eps;
  F.lcol_ptr = S.lcol_ptr;
  F.lrow_ind.assign(S.l_nnz(), 0);
  F.lval.assign(S.l_nnz(), 0.0);
  F.d.assign(n, 0.0);

  // scatter original values into the permuted upper pattern
  std::vector<double> ax(S.a_row_ind.size(), 0.0);
  for (int p = 0; p < A.nnz(); ++p) ax[S.a_map[p]] = A.val[p];

  std::vector<double> y(n, 0.0);
  std::vector<int> pattern(n, 0), stack(n, 0), flag(n, -1), lfill(n, 0);

  for (int k = 0; k < n; ++k) {
    int top = n;
    flag[k] = k;
    double dk = 0.0;
    for (int p = S.a_col_ptr[k]; p < S.a_col_ptr[k + 1]; ++p) {
      int i = S.a_row_ind[p];
      if (i == k) {
        dk += ax[p];
        continue;
      }
      y[i] = ax[p];
      int len = 0;
      while (flag[i] != k) {
        stack[len++] = i;
        flag[i] = k;
        i = S.parent[i];
      }
      while (len > 0) pattern[--top] = stack[--len];
    }
    for (int p = top; p < n; ++p) {
      const int i = pattern[p];
      const double yi = y[i];
      y[i] = 0.0;
      const int q0 = F.lcol_ptr[i];
      const int q1 = q0 + lfill[i];
      for (int q = q0; q < q1; ++q) y[F.lrow_ind[q]] -= F.lval[q] * yi;
      const double lki = yi / F.d[i];
      dk -= lki * yi;
      F.lrow_ind[q1] = k;
      F.lval[q1] = lki;
      lfill[i]++;
    }
    if (std::abs(dk) < pivot_eps) {
      dk = (dk >= 0.0) ? pivot_eps : -pivot_eps;
      F.perturbed++;
    }
    if (!std::isfinite(dk) || dk == 0.0) {
      F.ok = false;
      return F;
    }
    F.d[k] = dk;
    if (dk > 0.0)
      F.n_pos++;
    else
      F.n_neg++;
  }
  for (const double v : F.lval)
    if (!std::isfinite(v)) {
      F.ok = false;
      return F;
    }
  F.ok = true;
  return F;
}

void ldl_solve(const SymbolicLdl& S, const LdlFactors& F, const double* b,
               double* x) {
  const int n = S.n;
  std::vector<double> w(n);
  for (int k = 0; k < n; ++k) w[k] = b[S.perm[k]];
  for (int j = 0; j < n; ++j) {
    const double wj = w[j];
    for (int p = F.lcol_ptr[j]; p < F.lcol_ptr[j + 1]; ++p)
      w[F.lrow_ind[p]] -= F.lval[p] * wj;
  }
  for (int j = 0; j < n; ++j) w[j] /= F.d[j];
  for (int j = n - 1; j >= 0; --j) {
    double wj = w[j];
    for (int p = F.lcol_ptr[j]; p < F.lcol_ptr[j + 1]; ++p)
      wj -= F.lval[p] * w[F.lrow_ind[p]];
    w[j] = wj;
  }
  for (int k = 0; k < n; ++k) x[S.perm[k]] = w[k];
}

RefineResult solve_refined(const SymbolicLdl& S, const LdlFactors& F,
                           const SparseSymMatrix& A,
                           const std::vector<double>& b, int max_ref,
                           double tol) {
  const int n = A.n;
  RefineResult out;
  out.x.assign(n, 0.0);
  ldl_solve(S, F, b.data(), out.x.data());

  double bnorm = 0.0;
  for (const double bi : b) bnorm = std::max(bnorm, std::abs(bi));
  const double denom = (bnorm > 0.0) ? bnorm : 1.0;

  auto residual = [&](const std::vector<double>& x, std::vector<double>& r) {
    for (int i = 0; i < n; ++i) r[i] = -b[i];
    sym_matvec(A, x.data(), r.data());
    double nrm = 0.0;
    for (int i = 0; i < n; ++i) {
      r[i] = -r[i];  // r = b - A x
      nrm = std::max(nrm, std::abs(r[i]));
    }
    return nrm;
  };

  std::vector<double> r(n), dx(n), xn(n), rn(n);
  double res = residual(out.x, r);
  double prev = res;
  int stagnant = 0;
  while (out.steps < max_ref && res > tol * denom) {
    ldl_solve(S, F, r.data(), dx.data());
    for (int i = 0; i < n; ++i) xn[i] = out.x[i] + dx[i];
    const double res_new = residual(xn, rn);
    if (!std::isfinite(res_new) || res_new >= res) break;  // keep best iterate
    out.x.swap(xn);
    r.swap(rn);
    out.steps++;
    stagnant = (res_new > 0.5 * prev) ? stagnant + 1 : 0;
    prev = res_new;
    res = res_new;
    if (stagnant >= 2) break;
  }
  out.rel_residual = res / denom;
  out.converged = res <= tol * denom;
  return out;
}

void dump_matrix_market(const SparseSymMatrix& A, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot open " + path);
  std::fprintf(f, "%%%%MatrixMarket matrix coordinate real symmetric\n");
  std::fprintf(f, "%d %d %d\n", A.n, A.n, A.nnz());
  for (int j = 0; j < A.n; ++j)
    for (int p = A.col_ptr[j]; p < A.col_ptr[j + 1]; ++p)
      std::fprintf(f, "%d %d %.16e\n", A.row_ind[p] + 1, j + 1, A.val[p]);
  std::fclose(f);
}

void dump_vector_market(const std::vector<double>& b, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot open " + path);
  std::fprintf(f, "%%%%MatrixMarket matrix array real general\n");
  std::fprintf(f, "%zu 1\n", b.size());
  for (const double v : b) std::fprintf(f, "%.16e\n", v);
  std::fclose(f);
}

}  // namespace ncl
