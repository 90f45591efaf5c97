#pragma once

#include "firmtriage/io.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace firmtriage::extraction {

enum class Format { Gzip, Tar, Cpio, SquashFS, CramFS, JFFS2, UBIFS, Unknown };

std::string_view to_string(Format f) noexcept;
std::optional<Format> parse_format(std::string_view name);

// Formats with an in-process unpacker. Everything else needs an adapter.
constexpr bool has_builtin_unpacker(Format f) noexcept
{
    return f == Format::Gzip || f == Format::Tar || f == Format::Cpio;
}

struct SignatureHit {
    Format format = Format::Unknown;
    std::size_t offset = 0;    // start of the container, not of the magic
    std::size_t magic_len = 0; // bytes from offset through the end of the magic

    friend bool operator==(const SignatureHit&, const SignatureHit&) = default;
};

// Hits are sorted by offset with at most one hit per offset. Two-byte magics
// (gzip, JFFS2) are only reported when the following header bytes validate,
// and tar hits require a valid header checksum.
std::vector<SignatureHit> scan_signatures(ByteView image);

// Slice from hit.offset to the next hit's offset in `all_hits` (or end of
// image). Throws Error{OffsetOutOfBounds} if the hit does not fit the image.
ByteView carve_region(ByteView image, const SignatureHit& hit, std::span<const SignatureHit> all_hits);
ByteView carve_region(ByteView image, const SignatureHit& hit);

// ustar/v7 header checksum over one 512-byte block (unsigned or signed sum).
bool valid_tar_checksum(ByteView header);

// Shannon entropy in bits per byte.
double shannon_entropy(ByteView data);

inline constexpr std::size_t kEntropyWindow = 4096;
inline constexpr double kEncryptedEntropyThreshold = 7.9;
inline constexpr std::size_t kEncryptedMinWindows = 4;

// No signature hits, at least kEncryptedMinWindows full windows, and every
// full window above the threshold.
bool looks_encrypted(ByteView image);

} // namespace firmtriage::extraction
