#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace datekit {

enum class ErrorKind {
    InvalidArgument,
    PerfectSeparation,
    SingleArm,
    DegenerateWeights,
    NumericalBreakdown,
    RankDeficient,
    NonConvergence,
    WrongScenario,
    InfeasibleFit,
    LengthMismatch,
    MissingBounds,
    MissingReference,
    ParseError,
    ValidationError,
    InsufficientPreHistory,
    IncompatibleMethod,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a kind so callers (and the
/// replication runner) can branch on it without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, const std::string& what) {
    if (!cond) fail(ErrorKind::InvalidArgument, what);
}

}  // namespace datekit
