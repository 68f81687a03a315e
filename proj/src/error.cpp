#include "reveal/error.hpp"

namespace reveal {

std::string_view error_name(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::NoImages: return "NoImages";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::InvalidK: return "InvalidK";
    case ErrorCode::RejectionStuck: return "RejectionStuck";
    case ErrorCode::InvalidSchedule: return "InvalidSchedule";
    case ErrorCode::InvalidState: return "InvalidState";
    case ErrorCode::UndefinedCorrelation: return "UndefinedCorrelation";
    case ErrorCode::DegenerateCriterion: return "DegenerateCriterion";
    case ErrorCode::InsufficientVariation: return "InsufficientVariation";
    case ErrorCode::NotReady: return "NotReady";
    case ErrorCode::AwaitAdvance: return "AwaitAdvance";
    case ErrorCode::Gone: return "Gone";
    case ErrorCode::Conflict: return "Conflict";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::TooEarly: return "TooEarly";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Format: return "Format";
    }
    return "Unknown";
}

} // namespace reveal
