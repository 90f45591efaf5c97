#pragma once

#include "firmtriage/io.hpp"
#include "firmtriage/signature.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace firmtriage::extraction {

enum class FileKind { Regular, Directory, Symlink };

enum class FailureReason { NoFilesystem, DepthLimit, Encrypted, UnsupportedFormat };

std::string_view to_string(FileKind k) noexcept;
std::string_view to_string(FailureReason r) noexcept;

struct FileEntry {
    std::string path; // root-relative, no leading slash
    FileKind kind = FileKind::Regular;
    std::uint64_t size = 0;
    bool mode_readable = true;
    std::optional<std::string> link_target;     // raw link text (symlinks only)
    std::optional<std::string> resolved_target; // root-relative end of the chain, if it terminates

    friend bool operator==(const FileEntry&, const FileEntry&) = default;
};

using EntryMap = std::map<std::string, FileEntry>;
using LoopFlags = std::set<std::pair<std::string, std::string>>;

inline constexpr int kMaxSymlinkHops = 40;

// Resolves a root-relative path through the symlinks recorded in `entries`,
// following links in every component. Absolute link targets are taken
// relative to the root and ".." never climbs above it. Returns nullopt when
// more than kMaxSymlinkHops links are traversed.
std::optional<std::string> resolve_path(const EntryMap& entries, std::string_view path,
                                        int max_hops = kMaxSymlinkHops);

// Link text for a symlink at root-relative `link_path` that cannot leave the
// root on disk. Absolute targets become "../" chains back to the root; relative
// targets that climb above it are clamped there. Other targets are unchanged.
std::string contained_link_target(std::string_view link_path, std::string_view target);

// Fills resolved_target on every symlink that terminates within the hop bound
// and returns a (link, target) pair for every one that does not.
LoopFlags resolve_symlinks(EntryMap& entries, int max_hops = kMaxSymlinkHops);

class NormalizedFileSystem {
public:
    std::filesystem::path root_dir;
    EntryMap entries;
    LoopFlags loop_flags;
    std::optional<FailureReason> failure_reason;
    std::optional<Format> filesystem_format; // container layer that yielded the root

    [[nodiscard]] bool ok() const noexcept { return !failure_reason.has_value(); }
    [[nodiscard]] const FileEntry* find(std::string_view path) const;
    [[nodiscard]] bool exists(std::string_view path) const { return find(path) != nullptr; }

    // Follows symlinks; returns the entry at the end of the chain.
    [[nodiscard]] const FileEntry* find_resolved(std::string_view path) const;

    // Reads a regular file, following symlinks within the root.
    [[nodiscard]] std::optional<Bytes> read(std::string_view path) const;

    // Regular entries whose path starts with `dir` + "/", in path order.
    [[nodiscard]] std::vector<const FileEntry*> regular_files_under(std::string_view dir) const;
};

// Walks `root` without following symlinks, grants the owner read access on
// every regular file and read/search on every directory, and resolves links.
NormalizedFileSystem normalize(const std::filesystem::path& root);

// At least two of bin, lib, etc exist as directories at the top of `root`
// (a symlink to a directory inside the tree counts).
bool detect_rootfs(const std::filesystem::path& root);

inline constexpr int kRootfsThreshold = 2;

} // namespace firmtriage::extraction
