#include <ncl/kkt.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ncl {

KktForm parse_kkt_form(const std::string& name) {
  if (name == "k2") return KktForm::K2;
  if (name == "k2r") return KktForm::K2r;
  if (name == "k1s") return KktForm::K1s;
  throw std::invalid_argument("unknown kkt form: " + name);
}

const char* kkt_form_name(KktForm f) {
  switch (f) {
    case KktForm::K2: return "k2";
    case KktForm::K2r: return "k2r";
    case KktForm::K1s: return "k1s";
  }
  return "?";
}

namespace {

double inf_norm_or_zero(const dvec& v) {
  return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0;
}

int slot_of(const SparseSymMatrix& A, int i, int j) {
  const auto b = A.row_ind.begin() + A.col_ptr[j];
  const auto e = A.row_ind.begin() + A.col_ptr[j + 1];
  const auto it = std::lower_bound(b, e, i);
  if (it == e || *it != i) throw std::logic_error("kkt: missing slot");
  return static_cast<int>(it - A.row_ind.begin());
}

}  // namespace

KktContext::KktContext(const HessianPattern& hp, const JacobianPattern& jp,
                       int nt, int ns, int m_eq, KktForm form, KktOptions opt)
    : form_(form),
      opt_(opt),
      nt_(nt),
      ns_(ns),
      n_(nt + ns),
      m_eq_(m_eq),
      m_ineq_(jp.rows - m_eq),
      m_(jp.rows),
      jp_(jp) {
  if (hp.n != nt || jp.cols != nt || m_ineq_ != ns)
    throw std::invalid_argument("kkt: inconsistent problem shape");

  std::vector<int> ri, ci;
  std::vector<double> vv;
  auto add = [&](int i, int j) {
    ri.push_back(i);
    ci.push_back(j);
    vv.push_back(0.0);
  };

  int size = 0;
  switch (form_) {
    case KktForm::K2: size = n_ + 2 * m_; break;
    case KktForm::K2r: size = n_ + m_; break;
    case KktForm::K1s: size = nt_; break;
  }

  for (int j = 0; j < nt_; ++j)
    for (int p = hp.ptr[j]; p < hp.ptr[j + 1]; ++p) add(hp.idx[p], j);

  if (form_ == KktForm::K1s) {
    for (int i = 0; i < nt_; ++i) add(i, i);
    for (int i = 0; i < m_; ++i)
      for (int pa = jp_.ptr[i]; pa < jp_.ptr[i + 1]; ++pa)
        for (int pb = jp_.ptr[i]; pb <= pa; ++pb)
          add(jp_.idx[pa], jp_.idx[pb]);
  } else {
    for (int i = 0; i < n_; ++i) add(i, i);
    const int yb = (form_ == KktForm::K2) ? n_ + m_ : n_;
    for (int i = 0; i < m_; ++i)
      for (int p = jp_.ptr[i]; p < jp_.ptr[i + 1]; ++p) add(yb + i, jp_.idx[p]);
    for (int k = 0; k < m_ineq_; ++k) add(yb + m_eq_ + k, nt_ + k);
    if (form_ == KktForm::K2) {
      for (int i = 0; i < m_; ++i) add(n_ + i, n_ + i);
      for (int i = 0; i < m_; ++i) add(n_ + m_ + i, n_ + i);
    } else {
      for (int i = 0; i < m_; ++i) add(n_ + i, n_ + i);
    }
  }

  mat_ = sym_from_triplets(size, ri, ci, vv);
  sym_ = analyze(mat_);

  h_slot_.reserve(hp.nnz());
  for (int j = 0; j < nt_; ++j)
    for (int p = hp.ptr[j]; p < hp.ptr[j + 1]; ++p)
      h_slot_.push_back(slot_of(mat_, hp.idx[p], j));

  const int nd = (form_ == KktForm::K1s) ? nt_ : n_;
  diag_slot_.resize(nd);
  for (int i = 0; i < nd; ++i) diag_slot_[i] = slot_of(mat_, i, i);

  if (form_ == KktForm::K1s) {
    pair_ptr_.assign(m_ + 1, 0);
    for (int i = 0; i < m_; ++i) {
      const int v = jp_.ptr[i + 1] - jp_.ptr[i];
      pair_ptr_[i + 1] = pair_ptr_[i] + v * (v + 1) / 2;
    }
    pair_slot_.resize(pair_ptr_[m_]);
    int q = 0;
    for (int i = 0; i < m_; ++i)
      for (int pa = jp_.ptr[i]; pa < jp_.ptr[i + 1]; ++pa)
        for (int pb = jp_.ptr[i]; pb <= pa; ++pb)
          pair_slot_[q++] = slot_of(mat_, jp_.idx[pa], jp_.idx[pb]);
  } else {
    const int yb = (form_ == KktForm::K2) ? n_ + m_ : n_;
    j_slot_.reserve(jp_.nnz());
    for (int i = 0; i < m_; ++i)
      for (int p = jp_.ptr[i]; p < jp_.ptr[i + 1]; ++p)
        j_slot_.push_back(slot_of(mat_, yb + i, jp_.idx[p]));
    slack_slot_.resize(m_ineq_);
    for (int k = 0; k < m_ineq_; ++k)
      slack_slot_[k] = slot_of(mat_, yb + m_eq_ + k, nt_ + k);
    if (form_ == KktForm::K2) {
      rdiag_slot_.resize(m_);
      ry_slot_.resize(m_);
      for (int i = 0; i < m_; ++i) {
        rdiag_slot_[i] = slot_of(mat_, n_ + i, n_ + i);
        ry_slot_[i] = slot_of(mat_, n_ + m_ + i, n_ + i);
      }
    } else {
      ydiag_slot_.resize(m_);
      for (int i = 0; i < m_; ++i) ydiag_slot_[i] = slot_of(mat_, n_ + i, n_ + i);
    }
  }
}

std::array<int, 3> KktContext::inertia_target() const {
  switch (form_) {
    case KktForm::K2: return {n_ + m_, m_, 0};
    case KktForm::K2r: return {n_, m_, 0};
    case KktForm::K1s: return {nt_, 0, 0};
  }
  return {0, 0, 0};
}

void KktContext::refill(const KktInput& in, double delta) {
  std::fill(mat_.val.begin(), mat_.val.end(), 0.0);
  const auto& hv = *in.hval;
  const auto& jv = *in.jval;
  const double rho_hat = in.rho + delta;
  for (size_t k = 0; k < hv.size(); ++k) mat_.val[h_slot_[k]] += hv[k];

  if (form_ == KktForm::K1s) {
    for (int i = 0; i < nt_; ++i)
      mat_.val[diag_slot_[i]] += in.sigma[i] + delta;
    int q = 0;
    for (int i = 0; i < m_; ++i) {
      double omega = 1.0;
      if (i >= m_eq_) {
        const double ss = in.sigma[nt_ + (i - m_eq_)] + delta;
        omega = ss / (ss + rho_hat);
      }
      const double w = rho_hat * omega;
      for (int pa = jp_.ptr[i]; pa < jp_.ptr[i + 1]; ++pa)
        for (int pb = jp_.ptr[i]; pb <= pa; ++pb)
          mat_.val[pair_slot_[q++]] += w * jv[pa] * jv[pb];
    }
  } else {
    for (int i = 0; i < n_; ++i)
      mat_.val[diag_slot_[i]] += in.sigma[i] + delta;
    for (size_t p = 0; p < jv.size(); ++p) mat_.val[j_slot_[p]] += jv[p];
    for (int k = 0; k < m_ineq_; ++k) mat_.val[slack_slot_[k]] += -1.0;
    if (form_ == KktForm::K2) {
      for (int i = 0; i < m_; ++i) {
        mat_.val[rdiag_slot_[i]] += rho_hat;
        mat_.val[ry_slot_[i]] += 1.0;
      }
    } else {
      for (int i = 0; i < m_; ++i)
        mat_.val[ydiag_slot_[i]] += -1.0 / rho_hat;
    }
  }
}

void KktContext::build_rhs(const KktInput& in, double delta, dvec& rhs) const {
  const double rho_hat = in.rho + delta;
  switch (form_) {
    case KktForm::K2: {
      rhs.resize(n_ + 2 * m_);
      rhs.head(n_) = -in.rbar1;
      rhs.segment(n_, m_) = -in.rbar2;
      rhs.tail(m_) = -in.rbar3;
      break;
    }
    case KktForm::K2r: {
      rhs.resize(n_ + m_);
      rhs.head(n_) = -in.rbar1;
      rhs.tail(m_) = -in.rbar3 + in.rbar2 / rho_hat;
      break;
    }
    case KktForm::K1s: {
      const auto& jv = *in.jval;
      const dvec v = in.rbar2 - rho_hat * in.rbar3;
      rhs = -in.rbar1.head(nt_);
      for (int i = 0; i < m_; ++i)
        for (int p = jp_.ptr[i]; p < jp_.ptr[i + 1]; ++p)
          rhs[jp_.idx[p]] += jv[p] * v[i];
      for (int k = 0; k < m_ineq_; ++k) {
        const int row = m_eq_ + k;
        const double rs = -in.rbar1[nt_ + k] - v[row];
        const double pk = in.sigma[nt_ + k] + delta + rho_hat;
        const double w = rho_hat * rs / pk;
        for (int p = jp_.ptr[row]; p < jp_.ptr[row + 1]; ++p)
          rhs[jp_.idx[p]] += jv[p] * w;
      }
      break;
    }
  }
}

void KktContext::recover(const KktInput& in, double delta, const dvec& sol,
                         KktStep& st) const {
  const double rho_hat = in.rho + delta;
  switch (form_) {
    case KktForm::K2:
      st.dx = sol.head(n_);
      st.dr = sol.segment(n_, m_);
      st.dy = -sol.tail(m_);
      break;
    case KktForm::K2r:
      st.dx = sol.head(n_);
      st.dy = -sol.tail(m_);
      st.dr = (st.dy - in.rbar2) / rho_hat;
      break;
    case KktForm::K1s: {
      const auto& jv = *in.jval;
      const dvec& dt = sol;
      dvec jdt = dvec::Zero(m_);
      for (int i = 0; i < m_; ++i)
        for (int p = jp_.ptr[i]; p < jp_.ptr[i + 1]; ++p)
          jdt[i] += jv[p] * dt[jp_.idx[p]];
      const dvec v = in.rbar2 - rho_hat * in.rbar3;
      st.dx.resize(n_);
      st.dx.head(nt_) = dt;
      st.dy.resize(m_);
      for (int k = 0; k < m_ineq_; ++k) {
        const int row = m_eq_ + k;
        const double rs = -in.rbar1[nt_ + k] - v[row];
        const double pk = in.sigma[nt_ + k] + delta + rho_hat;
        st.dx[nt_ + k] = (rho_hat * jdt[row] + rs) / pk;
      }
      for (int i = 0; i < m_; ++i) {
        double jxdx = jdt[i];
        if (i >= m_eq_) jxdx -= st.dx[nt_ + (i - m_eq_)];
        st.dy[i] = v[i] - rho_hat * jxdx;
      }
      st.dr = (st.dy - in.rbar2) / rho_hat;
      break;
    }
  }
}

KktStep KktContext::solve(const KktInput& in, double warm_delta) {
  KktStep st;
  const auto tgt = inertia_target();
  double hmax = 0.0;
  for (const double v : *in.hval) hmax = std::max(hmax, std::abs(v));
  for (int i = 0; i < n_; ++i) hmax = std::max(hmax, std::abs(in.sigma[i]));

  double delta = 0.0;
  bool first = true;
  while (true) {
    ++st.factor_attempts;
    refill(in, delta);
    const LdlFactors F = factorize(sym_, mat_, opt_.pivot_eps);
    if (F.ok && F.n_pos == tgt[0] && F.n_neg == tgt[1] && F.n_zero == 0) {
      dvec rhs;
      build_rhs(in, delta, rhs);
      const std::vector<double> b(rhs.data(), rhs.data() + rhs.size());
      const RefineResult rr =
          solve_refined(sym_, F, mat_, b, opt_.max_refine, opt_.refine_tol);
      const double bn = inf_norm_or_zero(rhs);
      const double abs_res = rr.rel_residual * (bn > 0.0 ? bn : 1.0);
      const bool accept =
          F.perturbed == 0 ||
          abs_res <= opt_.accept_tol * std::max(1.0, bn);
      if (accept) {
        st.delta = delta;
        st.refine_steps = rr.steps;
        st.perturbed_pivots = F.perturbed;
        st.rel_residual = rr.rel_residual;
        const dvec sol =
            Eigen::Map<const dvec>(rr.x.data(), static_cast<int>(rr.x.size()));
        recover(in, delta, sol, st);
        st.ok = st.dx.allFinite() && st.dy.allFinite() && st.dr.allFinite();
        return st;
      }
    }
    if (first) {
      delta = warm_delta > 0.0 ? std::max(1e-20, warm_delta / 3.0)
                               : 1e-8 * std::max(1.0, hmax);
      first = false;
    } else {
      delta *= 8.0;
    }
    if (delta > opt_.delta_max) {
      st.ok = false;
      return st;
    }
  }
}

void recover_bound_duals(const dvec& x, const dvec& lb, const dvec& ub,
                         const dvec& zl, const dvec& zu, double mu,
                         const dvec& dx, dvec& dzl, dvec& dzu) {
  const int n = static_cast<int>(x.size());
  dzl = dvec::Zero(n);
  dzu = dvec::Zero(n);
  for (int i = 0; i < n; ++i) {
    if (std::isfinite(lb[i]))
      dzl[i] = -(zl[i] * dx[i] - mu) / (x[i] - lb[i]) - zl[i];
    if (std::isfinite(ub[i]))
      dzu[i] = (zu[i] * dx[i] + mu) / (ub[i] - x[i]) - zu[i];
  }
}

double ResidualParts::stat_norm() const { return inf_norm_or_zero(stat); }
double ResidualParts::mult_norm() const { return inf_norm_or_zero(mult); }
double ResidualParts::primal_norm() const { return inf_norm_or_zero(primal); }
double ResidualParts::compl_l_norm() const { return inf_norm_or_zero(compl_l); }
double ResidualParts::compl_u_norm() const { return inf_norm_or_zero(compl_u); }

double ResidualParts::inf_norm() const {
  return std::max({stat_norm(), mult_norm(), primal_norm(), compl_l_norm(),
                   compl_u_norm()});
}

ResidualParts barrier_kkt_residual(const dvec& grad_phi,
                                   const std::vector<double>& jval,
                                   const JacobianPattern& jp, int ns,
                                   const dvec& c, const dvec& r, const dvec& y,
                                   const dvec& yk, double rho, const dvec& x,
                                   const dvec& lb, const dvec& ub,
                                   const dvec& zl, const dvec& zu, double mu) {
  const int nt = jp.cols, m = jp.rows;
  const int m_eq = m - ns;
  ResidualParts res;
  res.stat = grad_phi - zl + zu;
  for (int i = 0; i < m; ++i)
    for (int p = jp.ptr[i]; p < jp.ptr[i + 1]; ++p)
      res.stat[jp.idx[p]] -= jval[p] * y[i];
  for (int k = 0; k < ns; ++k) res.stat[nt + k] += y[m_eq + k];
  res.mult = yk + rho * r - y;
  res.primal = c + r;
  const int n = static_cast<int>(x.size());
  res.compl_l = dvec::Zero(n);
  res.compl_u = dvec::Zero(n);
  for (int i = 0; i < n; ++i) {
    if (std::isfinite(lb[i])) res.compl_l[i] = zl[i] * (x[i] - lb[i]) - mu;
    if (std::isfinite(ub[i])) res.compl_u[i] = zu[i] * (ub[i] - x[i]) - mu;
  }
  return res;
}

}  // namespace ncl
