#pragma once
// Line-oriented instance files. Grammar, one directive per line, '#' starts
// a comment:
//   name <identifier>
//   var <name> <lower> <upper> [<start>]
//   objective <expr>
//   eq <rhs> <expr>            constraint <expr> = <rhs>
//   range <lo> <hi> <expr>     constraint <lo> <= <expr> <= <hi>
// <expr> is prefix notation over tokens: variable names, numeric literals
// (inf/-inf allowed for bounds), binary add sub mul div, pow <expr> <number>,
// unary neg inv sin cos exp log sqrt.

#include <string>

#include <ncl/model.hpp>

namespace ncl {

NcoProblem parse_instance_text(const std::string& text,
                               const std::string& fallback_name);
NcoProblem load_instance_file(const std::string& path);  // throws on error
std::string format_instance(const NcoProblem& p);
void write_instance_file(const NcoProblem& p, const std::string& path);

}  // namespace ncl
