#include "firmtriage/error.hpp"

namespace firmtriage {

std::string_view to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::OffsetOutOfBounds: return "OffsetOutOfBounds";
    case ErrorCode::CorruptArchive: return "CorruptArchive";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::DuplicateComponent: return "DuplicateComponent";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::SnapshotParseError: return "SnapshotParseError";
    case ErrorCode::InvalidRecord: return "InvalidRecord";
    case ErrorCode::UnparseableVersion: return "UnparseableVersion";
    case ErrorCode::FeedParseError: return "FeedParseError";
    case ErrorCode::RangeError: return "RangeError";
    case ErrorCode::NetworkError: return "NetworkError";
    case ErrorCode::ProtocolError: return "ProtocolError";
    case ErrorCode::ManifestError: return "ManifestError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

} // namespace firmtriage
