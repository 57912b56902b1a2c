#ifndef LAYEREDIT_ERROR_HPP
#define LAYEREDIT_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace layeredit {

enum class ErrorCode {
    InvalidArgument,
    DegenerateMask,
    DimensionMismatch,
    OutOfRange,
    UndefinedRatio,
    NumericFailure,
    EmptyMask,
    InvalidConfig,
    GenerationFailure,
    Io,
    Format,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "invalid argument";
        case ErrorCode::DegenerateMask: return "degenerate mask";
        case ErrorCode::DimensionMismatch: return "dimension mismatch";
        case ErrorCode::OutOfRange: return "out of range";
        case ErrorCode::UndefinedRatio: return "undefined ratio";
        case ErrorCode::NumericFailure: return "numeric failure";
        case ErrorCode::EmptyMask: return "empty mask";
        case ErrorCode::InvalidConfig: return "invalid config";
        case ErrorCode::GenerationFailure: return "generation failure";
        case ErrorCode::Io: return "i/o error";
        case ErrorCode::Format: return "format error";
    }
    return "unknown error";
}

/// Single exception type for the library; `code()` carries the category.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
    if (!cond) fail(code, what);
}

}  // namespace layeredit

#endif
