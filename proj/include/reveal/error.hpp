#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace reveal {

enum class ErrorCode {
    NoImages,
    InvalidSpec,
    InvalidInput,
    InvalidK,
    RejectionStuck,
    InvalidSchedule,
    InvalidState,
    UndefinedCorrelation,
    DegenerateCriterion,
    InsufficientVariation,
    NotReady,
    AwaitAdvance,
    Gone,
    Conflict,
    NotFound,
    TooEarly,
    Io,
    Format,
};

/// Stable machine-readable name, used on the CLI's stderr and in HTTP error bodies.
std::string_view error_name(ErrorCode code) noexcept;

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
    if (!cond) {
        fail(code, what);
    }
}

} // namespace reveal
