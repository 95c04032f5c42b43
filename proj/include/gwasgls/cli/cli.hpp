#pragma once

#include <exception>
#include <iosfwd>
#include <string>
#include <vector>

namespace gwasgls::cli
{

inline constexpr int exit_ok = 0;
/// verify ran but the files disagree beyond the tolerance.
inline constexpr int exit_mismatch = 1;
inline constexpr int exit_usage = 2;
inline constexpr int exit_data = 3;
inline constexpr int exit_numerical = 4;

inline constexpr const char* mem_budget_env = "GWAS_GLS_MEM_BUDGET_BYTES";

/// Exit code for an in-flight exception (call inside a catch block).
int exit_code_for(const std::exception_ptr& e);

/// "error code=<n> kind=<Name> message=<text>" on one line.
std::string error_line(const std::exception_ptr& e);

/// Entry point behind the gwas_gls binary; args excludes the program name.
/// Normal output goes to `out`, the single error line to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gwasgls::cli
