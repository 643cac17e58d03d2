#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>
#include <string>
#include <vector>

#include <ncl/instance_io.hpp>
#include <ncl/problems.hpp>
#include <ncl/solver.hpp>
#include <ncl/version.hpp>

namespace py = pybind11;
using namespace ncl;

namespace {

NcoProblem resolve_instance(const std::string& spec) {
  const bool pathlike = spec.find('/') != std::string::npos ||
                        (spec.size() > 4 &&
                         spec.compare(spec.size() - 4, 4, ".nco") == 0) ||
                        std::filesystem::exists(spec);
  if (pathlike) return load_instance_file(spec);
  return build_instance(spec);
}

std::vector<double> to_vec(const dvec& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

py::dict solve_py(const std::string& spec, const std::string& kkt, double tol,
                  int max_outer, int max_inner, double pivot_eps,
                  bool scaling) {
  SolverOptions opt;
  opt.kkt_form = parse_kkt_form(kkt);
  opt.tol = tol;
  opt.max_outer = max_outer;
  opt.max_inner = max_inner;
  opt.pivot_eps = pivot_eps;
  opt.scaling = scaling;

  Model mdl(resolve_instance(spec));
  SolveReport rep;
  {
    py::gil_scoped_release release;
    rep = solve(mdl, opt);
  }

  py::dict d;
  d["instance"] = rep.instance;
  d["kkt_form"] = rep.kkt_form;
  d["status"] = std::string(solve_status_name(rep.status));
  d["objective"] = rep.objective;
  d["kkt_residual"] = rep.kkt_residual;
  d["primal_feas"] = rep.primal_feas;
  d["outer_iters"] = rep.outer_iters;
  d["inner_iters"] = rep.inner_iters;
  d["extrapolation_accepts"] = rep.extrapolation_accepts;
  d["mu_final"] = rep.mu_final;
  d["rho_final"] = rep.rho_final;
  d["solve_seconds"] = rep.solve_seconds;
  d["x"] = to_vec(rep.x);
  d["r"] = to_vec(rep.r);
  d["y"] = to_vec(rep.y);
  return d;
}

py::list instances_py() {
  py::list out;
  for (const std::string& name : instance_names()) {
    const InstanceInfo info = instance_info(name);
    py::dict d;
    d["name"] = info.name;
    d["family"] = info.family;
    d["n"] = info.n;
    d["m_eq"] = info.m_eq;
    d["m_ineq"] = info.m_ineq;
    d["expect_infeasible"] = info.expect_infeasible;
    if (info.known_objective)
      d["known_objective"] = *info.known_objective;
    else
      d["known_objective"] = py::none();
    out.append(d);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Augmented-Lagrangian interior-point solver core";
  m.attr("__version__") = NCL_VERSION_STRING;

  m.def("instances", &instances_py,
        "Describe the built-in test instances as a list of dicts.");
  m.def("solve", &solve_py, py::arg("instance"), py::kw_only(),
        py::arg("kkt") = "k1s", py::arg("tol") = 1e-6,
        py::arg("max_outer") = 40, py::arg("max_inner") = 1000,
        py::arg("pivot_eps") = 1e-10, py::arg("scaling") = true,
        "Solve a built-in instance by name or a problem file by path; "
        "returns a dict with the status, objective, and solution vectors.");
}
