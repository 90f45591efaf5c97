#include "firmtriage/extraction.hpp"

#include "firmtriage/error.hpp"

#include <algorithm>
#include <deque>

namespace fs = std::filesystem;

namespace firmtriage {

FirmwareImage FirmwareImage::from_bytes(SampleMetadata meta, Bytes bytes)
{
    meta.sha256 = sha256_hex(bytes);
    return {std::move(meta), std::move(bytes)};
}

FirmwareImage FirmwareImage::from_file(SampleMetadata meta, const fs::path& path)
{
    return from_bytes(std::move(meta), read_file(path));
}

} // namespace firmtriage

namespace firmtriage::extraction {

namespace {

constexpr int kRootfsSearchDepth = 3;
constexpr std::uintmax_t kMaxScannedFile = std::uintmax_t{1} << 30;

std::vector<fs::path> sorted_children(const fs::path& dir)
{
    std::vector<fs::path> out;
    std::error_code ec;
    for (const auto& de : fs::directory_iterator(dir, ec)) {
        out.push_back(de.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

// Regular files below `dir` in sorted depth-first order, not following links.
void list_regular_files(const fs::path& dir, std::vector<fs::path>& out)
{
    for (const auto& p : sorted_children(dir)) {
        std::error_code ec;
        const auto st = fs::symlink_status(p, ec);
        if (fs::is_directory(st)) {
            list_regular_files(p, out);
        } else if (fs::is_regular_file(st)) {
            out.push_back(p);
        }
    }
}

std::optional<fs::path> find_rootfs(const fs::path& top)
{
    std::deque<std::pair<fs::path, int>> queue{{top, 0}};
    while (!queue.empty()) {
        auto [dir, depth] = queue.front();
        queue.pop_front();
        if (detect_rootfs(dir)) {
            return dir;
        }
        if (depth >= kRootfsSearchDepth) {
            continue;
        }
        for (const auto& p : sorted_children(dir)) {
            std::error_code ec;
            if (fs::is_directory(fs::symlink_status(p, ec))) {
                queue.emplace_back(p, depth + 1);
            }
        }
    }
    return std::nullopt;
}

class Extractor {
public:
    Extractor(const ExtractionOptions& options, EventLog& log) : options_(options), log_(log) {}

    // Returns true once a root filesystem has been found.
    bool process(ByteView bytes, const fs::path& carve_dir, int depth)
    {
        const auto hits = scan_signatures(bytes);
        if (hits.empty()) {
            return false;
        }
        if (depth > options_.depth_limit) {
            depth_exceeded_ = true;
            log_.record("depth-limit", carve_dir.string(),
                        std::to_string(hits.size()) + " hit(s) beyond depth " + std::to_string(options_.depth_limit));
            return false;
        }
        fs::create_directories(carve_dir);

        std::size_t covered_until = 0;
        std::vector<Format> unsupported_seen;
        for (const auto& hit : hits) {
            if (hit.offset < covered_until) {
                continue;
            }
            if (std::find(unsupported_seen.begin(), unsupported_seen.end(), hit.format) != unsupported_seen.end()) {
                continue;
            }
            const std::string stem = std::to_string(hit.offset) + "." + std::string(to_string(hit.format));
            const fs::path blob_path = carve_dir / (stem + ".bin");
            const fs::path out_dir = carve_dir / (stem + ".out");
            try {
                const auto result =
                    unpack(bytes.subspan(hit.offset), hit.format, out_dir, options_.adapters, &log_);
                write_file(blob_path, bytes.subspan(hit.offset, result.consumed));
                covered_until = hit.offset + result.consumed;
                log_.record("unpack", blob_path.string(),
                            "ok: " + std::to_string(result.entries_written) + " entries, " +
                                std::to_string(result.skipped.size()) + " skipped");
                if (auto root = find_rootfs(out_dir)) {
                    rootfs_ = std::move(root);
                    format_ = hit.format;
                    log_.record("rootfs", rootfs_->string(), "found");
                    return true;
                }
                std::vector<fs::path> files;
                list_regular_files(out_dir, files);
                for (const auto& file : files) {
                    std::error_code ec;
                    if (fs::file_size(file, ec) > kMaxScannedFile || ec) {
                        continue;
                    }
                    fs::permissions(file, fs::perms::owner_read, fs::perm_options::add, ec);
                    const Bytes child = read_file(file);
                    if (process(child, file.parent_path() / (file.filename().string() + ".carve"), depth + 1)) {
                        return true;
                    }
                }
            } catch (const Error& e) {
                write_file(blob_path, carve_region(bytes, hit, hits));
                if (e.code() == ErrorCode::UnsupportedFormat) {
                    unsupported_ = true;
                    unsupported_seen.push_back(hit.format);
                }
                log_.record("unpack", blob_path.string(), std::string("failed: ") + e.what());
            }
        }
        return false;
    }

    [[nodiscard]] const std::optional<fs::path>& rootfs() const noexcept { return rootfs_; }
    [[nodiscard]] std::optional<Format> format() const noexcept { return format_; }
    [[nodiscard]] bool depth_exceeded() const noexcept { return depth_exceeded_; }
    [[nodiscard]] bool unsupported() const noexcept { return unsupported_; }

private:
    const ExtractionOptions& options_;
    EventLog& log_;
    std::optional<fs::path> rootfs_;
    std::optional<Format> format_;
    bool depth_exceeded_ = false;
    bool unsupported_ = false;
};

// Copies regular files, directories and symlinks (as links, with targets made
// to stay inside `root`); other node types are dropped.
void copy_tree(const fs::path& from, const fs::path& to, const std::string& rel = {})
{
    for (const auto& p : sorted_children(from)) {
        std::error_code ec;
        const auto st = fs::symlink_status(p, ec);
        const fs::path dest = to / p.filename();
        const std::string child = rel.empty() ? p.filename().string() : rel + "/" + p.filename().string();
        if (fs::is_symlink(st)) {
            fs::create_symlink(contained_link_target(child, fs::read_symlink(p).string()), dest, ec);
        } else if (fs::is_directory(st)) {
            fs::create_directory(dest);
            copy_tree(p, dest, child);
        } else if (fs::is_regular_file(st)) {
            fs::copy_file(p, dest);
        }
    }
}

void reset_dir(const fs::path& dir)
{
    std::error_code ec;
    if (fs::exists(fs::symlink_status(dir, ec))) {
        // Unpacked trees may contain directories without write permission.
        for (auto it = fs::recursive_directory_iterator(dir, ec); !ec && it != fs::recursive_directory_iterator();
             it.increment(ec)) {
            if (it->is_directory(ec) && !it->is_symlink(ec)) {
                fs::permissions(it->path(), fs::perms::owner_all, fs::perm_options::add, ec);
            }
        }
        fs::remove_all(dir, ec);
        if (ec) {
            throw Error(ErrorCode::IoError, "cannot clear directory: " + ec.message(), dir.string());
        }
    }
    fs::create_directories(dir);
}

} // namespace

NormalizedFileSystem extract_recursive(const FirmwareImage& image, const fs::path& workspace,
                                       const ExtractionOptions& options, EventLog& log)
{
    if (options.depth_limit < 1) {
        throw Error(ErrorCode::ConfigError, "depth_limit must be at least 1");
    }
    const fs::path carve_dir = workspace / "01-carve";
    const fs::path rootfs_dir = workspace / "02-rootfs";
    reset_dir(carve_dir);
    reset_dir(rootfs_dir);
    log.record("extract", image.meta.sample_id,
               "start: " + std::to_string(image.image_bytes.size()) + " bytes, sha256 " + image.meta.sha256);

    Extractor extractor(options, log);
    const bool found = extractor.process(image.image_bytes, carve_dir, 1);

    if (found) {
        // Permission fixes on the source tree let the copy read every file.
        normalize(*extractor.rootfs());
        copy_tree(*extractor.rootfs(), rootfs_dir);
        NormalizedFileSystem out = normalize(rootfs_dir);
        out.filesystem_format = extractor.format();
        for (const auto& [link, target] : out.loop_flags) {
            log.record("symlink-loop", link, "flagged -> " + target);
        }
        log.record("extract", image.meta.sample_id,
                   "success: " + std::to_string(out.entries.size()) + " entries");
        return out;
    }

    NormalizedFileSystem out = normalize(rootfs_dir);
    if (extractor.depth_exceeded()) {
        out.failure_reason = FailureReason::DepthLimit;
    } else if (extractor.unsupported()) {
        out.failure_reason = FailureReason::UnsupportedFormat;
    } else if (looks_encrypted(image.image_bytes)) {
        out.failure_reason = FailureReason::Encrypted;
    } else {
        out.failure_reason = FailureReason::NoFilesystem;
    }
    log.record("extract", image.meta.sample_id, "failed: " + std::string(to_string(*out.failure_reason)));
    return out;
}

} // namespace firmtriage::extraction
