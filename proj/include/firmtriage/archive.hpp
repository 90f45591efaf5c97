#pragma once

#include "firmtriage/io.hpp"
#include "firmtriage/log.hpp"
#include "firmtriage/signature.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace firmtriage::extraction {

// Shell command templates per format; "{input}" and "{output}" are replaced
// with the quoted blob file and the (empty) output directory.
using AdapterTable = std::map<Format, std::string>;

struct UnpackResult {
    std::size_t consumed = 0;           // bytes of the blob that belong to the container
    std::size_t entries_written = 0;
    std::vector<std::string> skipped;   // member names rejected by the traversal guard
};

inline constexpr std::size_t kMaxInflatedBytes = std::size_t{1} << 30;

// Materializes the container at the start of `blob` under `workspace`.
// Members whose normalized path leaves the workspace, or that would be written
// through an existing symlink, are skipped and logged. Throws
// Error{CorruptArchive} for bad headers, checksums or truncation, and
// Error{UnsupportedFormat} when there is neither a built-in handler nor an
// adapter for `format`.
UnpackResult unpack(ByteView blob, Format format, const std::filesystem::path& workspace,
                    const AdapterTable& adapters = {}, EventLog* log = nullptr);

} // namespace firmtriage::extraction
