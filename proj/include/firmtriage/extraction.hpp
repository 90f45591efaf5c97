#pragma once

#include "firmtriage/archive.hpp"
#include "firmtriage/filesystem.hpp"
#include "firmtriage/io.hpp"
#include "firmtriage/log.hpp"
#include "firmtriage/signature.hpp"

#include <filesystem>
#include <string>

namespace firmtriage {

// One row of the corpus manifest.
struct SampleMetadata {
    std::string sample_id;
    std::string device_type;
    std::string vendor;
    int release_year = 0;
    std::string sha256;

    friend bool operator==(const SampleMetadata&, const SampleMetadata&) = default;
};

struct FirmwareImage {
    SampleMetadata meta;
    Bytes image_bytes;

    // Computes meta.sha256 from the bytes.
    static FirmwareImage from_bytes(SampleMetadata meta, Bytes bytes);
    static FirmwareImage from_file(SampleMetadata meta, const std::filesystem::path& path);
};

} // namespace firmtriage

namespace firmtriage::extraction {

inline constexpr int kDefaultDepthLimit = 8;

struct ExtractionOptions {
    int depth_limit = kDefaultDepthLimit;
    AdapterTable adapters;
};

// Unpacks container layers until a directory satisfying detect_rootfs turns
// up, then copies it to <workspace>/02-rootfs and normalizes it. Carved blobs
// and intermediate trees stay under <workspace>/01-carve. Failure is reported
// through failure_reason; the partial tree is left in place.
NormalizedFileSystem extract_recursive(const FirmwareImage& image, const std::filesystem::path& workspace,
                                       const ExtractionOptions& options, EventLog& log);

} // namespace firmtriage::extraction
