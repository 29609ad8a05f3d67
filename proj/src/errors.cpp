#include "sfwc/errors.hpp"

namespace sfwc {

std::string_view errc_name(Errc code) noexcept {
    switch (code) {
    case Errc::BudgetExceedsDimension: return "BudgetExceedsDimension";
    case Errc::NonFiniteInput: return "NonFiniteInput";
    case Errc::PowerIterationStalled: return "PowerIterationStalled";
    case Errc::InvalidPartition: return "InvalidPartition";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::DegenerateDirection: return "DegenerateDirection";
    case Errc::InfeasiblePoint: return "InfeasiblePoint";
    case Errc::InvalidBeta: return "InvalidBeta";
    case Errc::HorizonExceeded: return "HorizonExceeded";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::UnknownMagic: return "UnknownMagic";
    case Errc::TruncatedPayload: return "TruncatedPayload";
    case Errc::RankOutOfRange: return "RankOutOfRange";
    case Errc::ConfigError: return "ConfigError";
    case Errc::IoError: return "IoError";
    }
    return "Unknown";
}

} // namespace sfwc
