#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sfwc {

enum class Errc {
    BudgetExceedsDimension,
    NonFiniteInput,
    PowerIterationStalled,
    InvalidPartition,
    ShapeMismatch,
    DegenerateDirection,
    InfeasiblePoint,
    InvalidBeta,
    HorizonExceeded,
    NonFiniteLoss,
    UnknownMagic,
    TruncatedPayload,
    RankOutOfRange,
    ConfigError,
    IoError,
};

std::string_view errc_name(Errc code) noexcept;

/// Base exception for every failure raised by the library. The code lets
/// callers branch without string matching.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string &what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

} // namespace sfwc
