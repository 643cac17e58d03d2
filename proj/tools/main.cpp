// Command line front end: solve one instance, benchmark the registry, or
// list what is available. Exit codes: 0 optimal / all as expected,
// 1 infeasible, 2 iteration limit or benchmark failures, 3 numeric error,
// 4 usage error, 5 input/output error.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <ncl/instance_io.hpp>
#include <ncl/problems.hpp>
#include <ncl/solver.hpp>
#include <ncl/sparse.hpp>

namespace {

using namespace ncl;

struct CommonOpts {
  std::string kkt = "k1s";
  double tol = 1e-6;
  int max_outer = 40;
  int max_inner = 1000;
  double pivot_eps = 1e-10;
  bool no_scaling = false;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--kkt", o.kkt, "KKT formulation")
      ->check(CLI::IsMember({"k2", "k2r", "k1s"}))
      ->capture_default_str();
  cmd->add_option("--tol", o.tol, "termination tolerance")
      ->capture_default_str();
  cmd->add_option("--max-outer", o.max_outer, "outer iteration limit")
      ->capture_default_str();
  cmd->add_option("--max-inner", o.max_inner, "total inner step limit")
      ->capture_default_str();
  cmd->add_option("--pivot-eps", o.pivot_eps, "static pivot threshold")
      ->capture_default_str();
  cmd->add_flag("--no-scaling", o.no_scaling, "disable problem scaling");
}

SolverOptions to_solver_options(const CommonOpts& o) {
  SolverOptions s;
  s.kkt_form = parse_kkt_form(o.kkt);
  s.tol = o.tol;
  s.max_outer = o.max_outer;
  s.max_inner = o.max_inner;
  s.pivot_eps = o.pivot_eps;
  s.scaling = !o.no_scaling;
  return s;
}

int status_code(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return 0;
    case SolveStatus::Infeasible: return 1;
    case SolveStatus::IterationLimit: return 2;
    case SolveStatus::NumericError: return 3;
  }
  return 3;
}

NcoProblem resolve_instance(const std::string& spec) {
  const bool pathlike = spec.find('/') != std::string::npos ||
                        (spec.size() > 4 &&
                         spec.compare(spec.size() - 4, 4, ".nco") == 0) ||
                        std::filesystem::exists(spec);
  if (pathlike) return load_instance_file(spec);
  return build_instance(spec);
}

void perturb_start(NcoProblem& p, unsigned seed) {
  Model probe(p);  // resolves the default start rule
  dvec st = probe.start();
  std::mt19937_64 gen(seed);
  auto uni = [&gen] { return (gen() >> 11) * 0x1.0p-53; };
  for (int i = 0; i < st.size(); ++i)
    st[i] += 0.1 * (2.0 * uni() - 1.0) * std::max(1.0, std::abs(st[i]));
  for (int i = 0; i < st.size(); ++i)
    st[i] = std::clamp(st[i], p.lb[i], p.ub[i]);
  p.start = st;
}

void write_log_csv(const std::string& path, const std::vector<LogRow>& log) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot write log file: " + path);
  std::fputs(
      "k_outer,k_inner,f_stat,f_mult,f_primal,f_compl_l,f_compl_u,mu,rho,"
      "delta,alpha,refine_steps,perturbed_pivots\n",
      f);
  for (const LogRow& r : log)
    std::fprintf(f, "%d,%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%d,%d\n",
                 r.k_outer, r.k_inner, r.f_stat, r.f_mult, r.f_primal,
                 r.f_compl_l, r.f_compl_u, r.mu, r.rho, r.delta, r.alpha,
                 r.refine_steps, r.perturbed_pivots);
  std::fclose(f);
}

void dump_first_kkt(const Model& mdl, const CommonOpts& o,
                    const std::string& prefix) {
  ScaledProblem sp(mdl, !o.no_scaling);
  KktOptions kopt;
  kopt.pivot_eps = o.pivot_eps;
  InnerSolver inner(sp, parse_kkt_form(o.kkt), kopt);
  IterState st = initial_state(sp, 0.1);
  const KktStep step = inner.newton_step(st, 0.1, 100.0, st.y);
  dump_matrix_market(inner.context().matrix(), prefix + ".mtx");
  auto vec = [](const dvec& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  dump_vector_market(vec(step.dx), prefix + ".dx.vec");
  if (step.dr.size() > 0) dump_vector_market(vec(step.dr), prefix + ".dr.vec");
  if (step.dy.size() > 0) dump_vector_market(vec(step.dy), prefix + ".dy.vec");
}

int cmd_list() {
  std::printf("%-16s %-8s %6s %6s %7s  %s\n", "name", "family", "n", "m_eq",
              "m_ineq", "note");
  for (const std::string& name : instance_names()) {
    const InstanceInfo info = instance_info(name);
    std::string note;
    if (info.expect_infeasible) {
      note = "expected infeasible";
    } else if (info.known_objective) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "objective %.12g", *info.known_objective);
      note = buf;
    }
    std::printf("%-16s %-8s %6d %6d %7d  %s\n", info.name.c_str(),
                info.family.c_str(), info.n, info.m_eq, info.m_ineq,
                note.c_str());
  }
  return 0;
}

int cmd_solve(const std::string& spec, const CommonOpts& o,
              const std::string& log_path, const std::string& dump_prefix,
              unsigned seed) {
  NcoProblem p = resolve_instance(spec);
  if (seed != 0) perturb_start(p, seed);
  Model mdl(std::move(p));
  if (!dump_prefix.empty()) dump_first_kkt(mdl, o, dump_prefix);
  const SolveReport rep = solve(mdl, to_solver_options(o));
  std::printf("instance       : %s\n", rep.instance.c_str());
  std::printf("kkt form       : %s\n", rep.kkt_form.c_str());
  std::printf("status         : %s\n", solve_status_name(rep.status));
  std::printf("objective      : %.12g\n", rep.objective);
  std::printf("kkt residual   : %.3g\n", rep.kkt_residual);
  std::printf("primal feas    : %.3g\n", rep.primal_feas);
  std::printf("outer / inner  : %d / %d\n", rep.outer_iters, rep.inner_iters);
  std::printf("extrapolations : %d\n", rep.extrapolation_accepts);
  std::printf("mu / rho       : %.3g / %.3g\n", rep.mu_final, rep.rho_final);
  std::printf("time           : %.3fs\n", rep.solve_seconds);
  if (!log_path.empty()) write_log_csv(log_path, rep.log);
  return status_code(rep.status);
}

int cmd_bench(const CommonOpts& o, const std::string& instances, int threads) {
  std::vector<std::string> names;
  if (instances.empty()) {
    names = instance_names();
  } else {
    std::string cur;
    for (char c : instances + ",") {
      if (c == ',') {
        if (!cur.empty()) names.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
  }
  for (const std::string& n : names)
    if (!has_instance(n)) throw std::runtime_error("unknown instance: " + n);

  const SolverOptions sopt = to_solver_options(o);
  std::vector<SolveReport> reps(names.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= names.size()) break;
      Model mdl(build_instance(names[i]));
      reps[i] = solve(mdl, sopt);
    }
  };
  int nthreads = threads > 0 ? threads
                             : static_cast<int>(
                                   std::thread::hardware_concurrency());
  nthreads = std::clamp<int>(nthreads, 1, static_cast<int>(names.size()));
  std::vector<std::thread> pool;
  for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();

  std::printf("%-16s %-5s %-16s %16s %6s %6s %9s\n", "name", "kkt", "status",
              "objective", "outer", "inner", "time");
  bool all_ok = true;
  for (size_t i = 0; i < names.size(); ++i) {
    const SolveReport& r = reps[i];
    const InstanceInfo info = instance_info(names[i]);
    const bool ok = info.expect_infeasible
                        ? r.status == SolveStatus::Infeasible
                        : r.status == SolveStatus::Optimal;
    all_ok = all_ok && ok;
    std::printf("%-16s %-5s %-16s %16.8g %6d %6d %8.3fs%s\n", names[i].c_str(),
                r.kkt_form.c_str(), solve_status_name(r.status), r.objective,
                r.outer_iters, r.inner_iters, r.solve_seconds,
                ok ? "" : "  <-- unexpected");
  }
  return all_ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NCL augmented Lagrangian / interior point solver"};
  app.require_subcommand(1);

  CLI::App* c_list = app.add_subcommand("list", "list built-in instances");

  CommonOpts solve_opts;
  std::string spec, log_path, dump_prefix;
  unsigned seed = 0;
  CLI::App* c_solve =
      app.add_subcommand("solve", "solve a built-in instance or a .nco file");
  c_solve->add_option("instance", spec, "instance name or path to a .nco file")
      ->required();
  add_common(c_solve, solve_opts);
  c_solve->add_option("--log", log_path, "write the iteration log as CSV");
  c_solve->add_option("--dump-kkt", dump_prefix,
                      "write the first KKT system in Matrix Market form");
  c_solve->add_option("--seed", seed,
                      "perturb the start point (0 = use the instance start)");

  CommonOpts bench_opts;
  std::string bench_instances;
  int bench_threads = 0;
  CLI::App* c_bench =
      app.add_subcommand("bench", "solve a set of instances in parallel");
  add_common(c_bench, bench_opts);
  c_bench->add_option("--instances", bench_instances,
                      "comma separated names (default: all)");
  c_bench->add_option("--threads", bench_threads,
                      "worker threads (0 = hardware)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 4;
  }

  try {
    if (app.got_subcommand(c_list)) return cmd_list();
    if (app.got_subcommand(c_solve))
      return cmd_solve(spec, solve_opts, log_path, dump_prefix, seed);
    if (app.got_subcommand(c_bench))
      return cmd_bench(bench_opts, bench_instances, bench_threads);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 5;
  }
  return 4;
}
