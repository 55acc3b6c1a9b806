#pragma once

#include <stdexcept>
#include <string>

namespace sindex {

enum class ErrorCode {
    invalid_argument = 1,
    domain,
    io,
    parse,
    version_mismatch,
    invariant_violation,
    dimension_mismatch,
    convergence,
    infeasible,
    state,
    internal,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what)
{
    if (!cond) throw Error(code, what);
}

} // namespace sindex
