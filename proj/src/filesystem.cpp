#include "firmtriage/filesystem.hpp"

#include "firmtriage/error.hpp"

#include <deque>

namespace fs = std::filesystem;

namespace firmtriage::extraction {

namespace {

std::vector<std::string> split_path(std::string_view path)
{
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (pos <= path.size()) {
        const auto next = path.find('/', pos);
        const auto part = path.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos);
        if (!part.empty() && part != ".") {
            parts.emplace_back(part);
        }
        if (next == std::string_view::npos) {
            break;
        }
        pos = next + 1;
    }
    return parts;
}

std::string join(const std::vector<std::string>& parts)
{
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) {
            out.push_back('/');
        }
        out += p;
    }
    return out;
}

} // namespace

std::string_view to_string(FileKind k) noexcept
{
    switch (k) {
    case FileKind::Regular: return "Regular";
    case FileKind::Directory: return "Directory";
    case FileKind::Symlink: return "Symlink";
    }
    return "Regular";
}

std::string_view to_string(FailureReason r) noexcept
{
    switch (r) {
    case FailureReason::NoFilesystem: return "NoFilesystem";
    case FailureReason::DepthLimit: return "DepthLimit";
    case FailureReason::Encrypted: return "Encrypted";
    case FailureReason::UnsupportedFormat: return "UnsupportedFormat";
    }
    return "NoFilesystem";
}

std::string contained_link_target(std::string_view link_path, std::string_view target)
{
    std::vector<std::string> parent = split_path(link_path);
    if (!parent.empty()) {
        parent.pop_back();
    }
    const bool absolute = !target.empty() && target.front() == '/';
    std::vector<std::string> parts = absolute ? std::vector<std::string>{} : parent;
    bool escapes = absolute;
    for (const auto& part : split_path(target)) {
        if (part == "..") {
            if (parts.empty()) {
                escapes = true;
            } else {
                parts.pop_back();
            }
        } else {
            parts.push_back(part);
        }
    }
    if (!escapes) {
        return std::string(target);
    }
    std::string out;
    for (std::size_t i = 0; i < parent.size(); ++i) {
        out += "../";
    }
    for (const auto& part : parts) {
        out.append(part);
        out.push_back('/');
    }
    if (out.empty()) {
        return ".";
    }
    out.pop_back();
    return out;
}

std::optional<std::string> resolve_path(const EntryMap& entries, std::string_view path, int max_hops)
{
    std::deque<std::string> pending;
    for (auto& p : split_path(path)) {
        pending.push_back(std::move(p));
    }
    std::vector<std::string> done;
    int hops = 0;
    while (!pending.empty()) {
        std::string part = std::move(pending.front());
        pending.pop_front();
        if (part == "..") {
            if (!done.empty()) {
                done.pop_back();
            }
            continue;
        }
        done.push_back(std::move(part));
        const auto it = entries.find(join(done));
        if (it == entries.end() || it->second.kind != FileKind::Symlink) {
            continue;
        }
        if (++hops > max_hops) {
            return std::nullopt;
        }
        done.pop_back();
        const std::string& target = it->second.link_target.value_or("");
        if (!target.empty() && target.front() == '/') {
            done.clear();
        }
        auto target_parts = split_path(target);
        pending.insert(pending.begin(), target_parts.begin(), target_parts.end());
    }
    return join(done);
}

LoopFlags resolve_symlinks(EntryMap& entries, int max_hops)
{
    LoopFlags loops;
    for (auto& [path, entry] : entries) {
        if (entry.kind != FileKind::Symlink) {
            continue;
        }
        entry.resolved_target = resolve_path(entries, path, max_hops);
        if (!entry.resolved_target) {
            std::string target = entry.link_target.value_or("");
            if (target.empty() || target.front() != '/') {
                const auto slash = path.rfind('/');
                target = (slash == std::string::npos ? std::string() : path.substr(0, slash + 1)) + target;
            }
            loops.emplace(path, contain_path(target).value_or(""));
        }
    }
    return loops;
}

const FileEntry* NormalizedFileSystem::find(std::string_view path) const
{
    const auto key = contain_path(path);
    if (!key) {
        return nullptr;
    }
    const auto it = entries.find(*key);
    return it == entries.end() ? nullptr : &it->second;
}

const FileEntry* NormalizedFileSystem::find_resolved(std::string_view path) const
{
    const auto resolved = resolve_path(entries, path);
    return resolved ? find(*resolved) : nullptr;
}

std::optional<Bytes> NormalizedFileSystem::read(std::string_view path) const
{
    const FileEntry* entry = find_resolved(path);
    if (entry == nullptr || entry->kind != FileKind::Regular) {
        return std::nullopt;
    }
    try {
        return read_file(root_dir / entry->path);
    } catch (const Error&) {
        return std::nullopt;
    }
}

std::vector<const FileEntry*> NormalizedFileSystem::regular_files_under(std::string_view dir) const
{
    std::vector<const FileEntry*> out;
    const std::string prefix = contain_path(dir).value_or("");
    const std::string start = prefix.empty() ? std::string() : prefix + "/";
    for (auto it = entries.lower_bound(start); it != entries.end(); ++it) {
        if (!it->first.starts_with(start)) {
            break;
        }
        if (it->second.kind == FileKind::Regular) {
            out.push_back(&it->second);
        }
    }
    return out;
}

NormalizedFileSystem normalize(const fs::path& root)
{
    NormalizedFileSystem out;
    out.root_dir = root;
    std::error_code ec;
    if (!fs::is_directory(root, ec)) {
        return out;
    }
    fs::permissions(root, fs::perms::owner_read | fs::perms::owner_exec | fs::perms::owner_write,
                    fs::perm_options::add, ec);

    // Directories are made traversable before descending into them.
    std::vector<fs::path> stack{root};
    while (!stack.empty()) {
        const fs::path dir = stack.back();
        stack.pop_back();
        for (const auto& de : fs::directory_iterator(dir, ec)) {
            const auto st = de.symlink_status();
            const std::string rel = de.path().lexically_relative(root).generic_string();
            FileEntry entry;
            entry.path = rel;
            if (fs::is_symlink(st)) {
                entry.kind = FileKind::Symlink;
                entry.link_target = fs::read_symlink(de.path(), ec).string();
            } else if (fs::is_directory(st)) {
                entry.kind = FileKind::Directory;
                fs::permissions(de.path(), fs::perms::owner_read | fs::perms::owner_exec | fs::perms::owner_write,
                                fs::perm_options::add, ec);
                stack.push_back(de.path());
            } else if (fs::is_regular_file(st)) {
                entry.kind = FileKind::Regular;
                fs::permissions(de.path(), fs::perms::owner_read, fs::perm_options::add | fs::perm_options::nofollow,
                                ec);
                entry.size = fs::file_size(de.path(), ec);
                entry.mode_readable =
                    (fs::symlink_status(de.path(), ec).permissions() & fs::perms::owner_read) != fs::perms::none;
            } else {
                continue; // devices, fifos, sockets
            }
            out.entries.emplace(rel, std::move(entry));
        }
    }
    out.loop_flags = resolve_symlinks(out.entries);
    return out;
}

bool detect_rootfs(const fs::path& root)
{
    int found = 0;
    for (const char* name : {"bin", "lib", "etc"}) {
        std::error_code ec;
        const fs::path p = root / name;
        const auto st = fs::symlink_status(p, ec);
        if (fs::is_directory(st)) {
            ++found;
        } else if (fs::is_symlink(st)) {
            const std::string raw = fs::read_symlink(p, ec).string();
            const std::string target = (!raw.empty() && raw.front() == '/') ? raw : std::string(name) + "/../" + raw;
            const auto rel = contain_path(target);
            if (rel && !rel->empty() && fs::is_directory(fs::symlink_status(root / *rel, ec))) {
                ++found;
            }
        }
    }
    return found >= kRootfsThreshold;
}

} // namespace firmtriage::extraction
