#include "firmtriage/signature.hpp"

#include "firmtriage/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace firmtriage::extraction {

namespace {

constexpr std::size_t kTarMagicOffset = 257;
constexpr std::size_t kTarBlock = 512;

struct Magic {
    Format format;
    std::string_view bytes;
};

// Fixed-position magics. Order decides which format wins when two hits land on
// the same offset.
constexpr std::array kMagics{
    Magic{Format::Gzip, std::string_view("\x1f\x8b", 2)},
    Magic{Format::Cpio, "070701"},
    Magic{Format::Cpio, "070707"},
    Magic{Format::SquashFS, "hsqs"},
    Magic{Format::SquashFS, "sqsh"},
    Magic{Format::CramFS, std::string_view("\x45\x3d\xcd\x28", 4)},
    Magic{Format::CramFS, std::string_view("\x28\xcd\x3d\x45", 4)},
    Magic{Format::JFFS2, std::string_view("\x85\x19", 2)},
    Magic{Format::JFFS2, std::string_view("\x19\x85", 2)},
    Magic{Format::UBIFS, std::string_view("\x31\x18\x10\x06", 4)},
};

bool starts_with(ByteView data, std::size_t at, std::string_view magic)
{
    if (at + magic.size() > data.size()) {
        return false;
    }
    return std::equal(magic.begin(), magic.end(), data.begin() + static_cast<std::ptrdiff_t>(at),
                      [](char a, std::uint8_t b) { return static_cast<std::uint8_t>(a) == b; });
}

bool valid_gzip_header(ByteView data, std::size_t at)
{
    // ID1 ID2 CM FLG: deflate is the only defined method, FLG bits 5-7 reserved.
    return at + 10 <= data.size() && data[at + 2] == 8 && (data[at + 3] & 0xE0) == 0;
}

bool valid_jffs2_node(ByteView data, std::size_t at, bool little_endian)
{
    if (at + 4 > data.size()) {
        return false;
    }
    const unsigned type = little_endian ? (data[at + 2] | (data[at + 3] << 8)) : ((data[at + 2] << 8) | data[at + 3]);
    switch (type) {
    case 0xE001: // dirent
    case 0xE002: // inode
    case 0x2003: // cleanmarker
    case 0x2004: // padding
    case 0xE006: // summary
    case 0xE008: // xattr
    case 0xE009: // xref
        return true;
    default:
        return false;
    }
}

} // namespace

bool valid_tar_checksum(ByteView header)
{
    if (header.size() < kTarBlock) {
        return false;
    }
    unsigned long stored = 0;
    bool any_digit = false;
    for (std::size_t i = 148; i < 156; ++i) {
        const auto c = header[i];
        if (c >= '0' && c <= '7') {
            stored = stored * 8 + (c - '0');
            any_digit = true;
        } else if (c == ' ' || c == 0) {
            if (any_digit) {
                break;
            }
        } else {
            return false;
        }
    }
    if (!any_digit) {
        return false;
    }
    unsigned long unsigned_sum = 0;
    long signed_sum = 0;
    for (std::size_t i = 0; i < kTarBlock; ++i) {
        const std::uint8_t c = (i >= 148 && i < 156) ? ' ' : header[i];
        unsigned_sum += c;
        signed_sum += static_cast<std::int8_t>(c);
    }
    return stored == unsigned_sum || static_cast<long>(stored) == signed_sum;
}

std::string_view to_string(Format f) noexcept
{
    switch (f) {
    case Format::Gzip: return "gzip";
    case Format::Tar: return "tar";
    case Format::Cpio: return "cpio";
    case Format::SquashFS: return "squashfs";
    case Format::CramFS: return "cramfs";
    case Format::JFFS2: return "jffs2";
    case Format::UBIFS: return "ubifs";
    case Format::Unknown: return "unknown";
    }
    return "unknown";
}

std::optional<Format> parse_format(std::string_view name)
{
    const std::string lower = to_lower(name);
    for (const Format f : {Format::Gzip, Format::Tar, Format::Cpio, Format::SquashFS, Format::CramFS,
                           Format::JFFS2, Format::UBIFS, Format::Unknown}) {
        if (lower == to_string(f)) {
            return f;
        }
    }
    return std::nullopt;
}

std::vector<SignatureHit> scan_signatures(ByteView image)
{
    std::vector<SignatureHit> hits;
    for (std::size_t pos = 0; pos < image.size(); ++pos) {
        for (const Magic& magic : kMagics) {
            if (!starts_with(image, pos, magic.bytes)) {
                continue;
            }
            if (magic.format == Format::Gzip && !valid_gzip_header(image, pos)) {
                continue;
            }
            if (magic.format == Format::JFFS2 && !valid_jffs2_node(image, pos, magic.bytes[0] == '\x85')) {
                continue;
            }
            hits.push_back({magic.format, pos, magic.bytes.size()});
        }
        if (pos >= kTarMagicOffset && starts_with(image, pos, "ustar")) {
            const std::size_t header = pos - kTarMagicOffset;
            const std::uint8_t after = pos + 5 < image.size() ? image[pos + 5] : 0xFF;
            if ((after == 0 || after == ' ') && header + kTarBlock <= image.size() &&
                valid_tar_checksum(image.subspan(header, kTarBlock))) {
                hits.push_back({Format::Tar, header, kTarMagicOffset + 5});
            }
        }
    }
    // Tar hits are discovered 257 bytes late; restore offset order and keep
    // the first format registered at any given offset.
    std::stable_sort(hits.begin(), hits.end(),
                     [](const SignatureHit& a, const SignatureHit& b) { return a.offset < b.offset; });
    hits.erase(std::unique(hits.begin(), hits.end(),
                           [](const SignatureHit& a, const SignatureHit& b) { return a.offset == b.offset; }),
               hits.end());
    return hits;
}

ByteView carve_region(ByteView image, const SignatureHit& hit, std::span<const SignatureHit> all_hits)
{
    if (hit.offset >= image.size() || hit.magic_len > image.size() - hit.offset) {
        throw Error(ErrorCode::OffsetOutOfBounds,
                    "hit at offset " + std::to_string(hit.offset) + " outside image of " +
                        std::to_string(image.size()) + " bytes");
    }
    std::size_t end = image.size();
    for (const auto& other : all_hits) {
        if (other.offset > hit.offset && other.offset < end) {
            end = other.offset;
        }
    }
    return image.subspan(hit.offset, end - hit.offset);
}

ByteView carve_region(ByteView image, const SignatureHit& hit)
{
    if (hit.offset >= image.size()) {
        return carve_region(image, hit, {});
    }
    const auto hits = scan_signatures(image);
    return carve_region(image, hit, hits);
}

double shannon_entropy(ByteView data)
{
    if (data.empty()) {
        return 0.0;
    }
    std::array<std::size_t, 256> counts{};
    for (const auto b : data) {
        ++counts[b];
    }
    double h = 0.0;
    const double n = static_cast<double>(data.size());
    for (const auto c : counts) {
        if (c != 0) {
            const double p = static_cast<double>(c) / n;
            h -= p * std::log2(p);
        }
    }
    return h;
}

bool looks_encrypted(ByteView image)
{
    const std::size_t windows = image.size() / kEntropyWindow;
    if (windows < kEncryptedMinWindows || !scan_signatures(image).empty()) {
        return false;
    }
    for (std::size_t w = 0; w < windows; ++w) {
        if (shannon_entropy(image.subspan(w * kEntropyWindow, kEntropyWindow)) <= kEncryptedEntropyThreshold) {
            return false;
        }
    }
    return true;
}

} // namespace firmtriage::extraction
