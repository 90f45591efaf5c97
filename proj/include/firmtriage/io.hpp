#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace firmtriage {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

// Throws Error{IoError} naming the path on failure.
Bytes read_file(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, ByteView data);
void write_text(const std::filesystem::path& path, std::string_view text);

std::string sha256_hex(ByteView data);
std::string sha256_hex(std::string_view data);

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);

inline ByteView as_bytes(std::string_view s)
{
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

// Lexically normalized, slash-separated, root-relative path ("bin/sh").
// Returns nullopt when the path escapes the root through "..". Leading '/'
// is stripped, so absolute paths are treated as root-relative; the root
// itself normalizes to "".
std::optional<std::string> contain_path(std::string_view path);

// Current UTC time as "YYYY-MM-DDTHH:MM:SSZ".
std::string utc_timestamp();

} // namespace firmtriage
