#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace firmtriage {

enum class ErrorCode {
    OffsetOutOfBounds,
    CorruptArchive,
    UnsupportedFormat,
    DuplicateComponent,
    SchemaViolation,
    SnapshotParseError,
    InvalidRecord,
    UnparseableVersion,
    FeedParseError,
    RangeError,
    NetworkError,
    ProtocolError,
    ManifestError,
    IoError,
    ConfigError,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every failure surfaced by the library carries a machine-checkable code and,
// where one exists, the location that triggered it (JSON path, line number,
// file path, record index).
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, std::string where = {})
        : std::runtime_error(std::string(to_string(code)) + ": " + message +
                             (where.empty() ? std::string{} : " (at " + where + ")")),
          code_(code),
          where_(std::move(where))
    {
    }

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }
    [[nodiscard]] const std::string& where() const noexcept { return where_; }

private:
    ErrorCode code_;
    std::string where_;
};

} // namespace firmtriage
