#pragma once
// Built-in test instances. Every builder is deterministic; randomized data
// comes from fixed-seed generators so metadata (including known optimal
// values computed from that data) is reproducible across runs and platforms.

#include <optional>
#include <string>
#include <vector>

#include <ncl/model.hpp>

namespace ncl {

struct InstanceInfo {
  std::string name;
  std::string family;  // classic | bound | qp | degenerate | mpcc |
                       // infeasible | opf
  int n = 0;
  int m_eq = 0, m_ineq = 0;
  bool expect_infeasible = false;
  std::optional<double> known_objective;  // optimal value when known exactly
};

std::vector<std::string> instance_names();
bool has_instance(const std::string& name);
InstanceInfo instance_info(const std::string& name);   // throws on unknown
NcoProblem build_instance(const std::string& name);    // throws on unknown

}  // namespace ncl
