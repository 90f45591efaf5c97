#include "firmtriage/archive.hpp"

#include "firmtriage/error.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstdlib>
#include <optional>
#include <string_view>

namespace fs = std::filesystem;

namespace firmtriage::extraction {

namespace {

constexpr std::size_t kBlock = 512;

[[noreturn]] void corrupt(const std::string& what, std::size_t offset)
{
    throw Error(ErrorCode::CorruptArchive, what, "offset " + std::to_string(offset));
}

std::size_t round_up(std::size_t n, std::size_t to)
{
    return (n + to - 1) / to * to;
}

// Writes archive members below a root directory, refusing anything that would
// land outside it.
class SafeTree {
public:
    SafeTree(fs::path root, EventLog* log, UnpackResult& result)
        : root_(std::move(root)), log_(log), result_(result)
    {
    }

    void file(std::string_view name, ByteView data, std::optional<unsigned> mode)
    {
        const auto target = prepare(name, false);
        if (!target) {
            return;
        }
        write_file(*target, data);
        if (mode) {
            fs::permissions(*target, static_cast<fs::perms>(*mode & 0777), fs::perm_options::replace);
        }
        ++result_.entries_written;
    }

    void directory(std::string_view name)
    {
        const auto target = prepare(name, true);
        if (!target) {
            return;
        }
        std::error_code ec;
        fs::create_directory(*target, ec);
        ++result_.entries_written;
    }

    void symlink(std::string_view name, std::string_view link_target)
    {
        const auto target = prepare(name, false);
        if (!target) {
            return;
        }
        std::error_code ec;
        fs::create_symlink(std::string(link_target), *target, ec);
        if (ec) {
            note("skip", name, "symlink creation failed: " + ec.message());
            return;
        }
        ++result_.entries_written;
    }

    void hard_link(std::string_view name, std::string_view existing)
    {
        const auto source = contain_path(existing);
        if (!source || source->empty()) {
            reject(name, "hard link source escapes workspace");
            return;
        }
        const fs::path from = root_ / *source;
        std::error_code ec;
        if (!fs::is_regular_file(fs::symlink_status(from, ec)) || !within_real_dirs(*source)) {
            note("skip", name, "hard link source missing: " + std::string(existing));
            return;
        }
        file(name, read_file(from), std::nullopt);
    }

    void reject(std::string_view name, std::string_view why)
    {
        result_.skipped.emplace_back(name);
        if (log_) {
            log_->warn(std::string(name), why);
        }
    }

    void note(std::string_view action, std::string_view name, std::string_view what)
    {
        if (log_) {
            log_->record(action, std::string(name), what);
        }
    }

private:
    // True when every parent directory of `rel` is a real directory (not a symlink).
    bool within_real_dirs(const std::string& rel) const
    {
        fs::path cur = root_;
        const fs::path relp(rel);
        for (auto it = relp.begin(); it != relp.end() && std::next(it) != relp.end(); ++it) {
            cur /= *it;
            std::error_code ec;
            if (!fs::is_directory(fs::symlink_status(cur, ec))) {
                return false;
            }
        }
        return true;
    }

    std::optional<fs::path> prepare(std::string_view name, bool is_dir)
    {
        const auto rel = contain_path(name);
        if (!rel) {
            reject(name, "path escapes workspace");
            return std::nullopt;
        }
        if (rel->empty()) {
            if (!is_dir) {
                reject(name, "member names the workspace root");
            }
            return std::nullopt;
        }
        const fs::path relp(*rel);
        fs::path cur = root_;
        for (auto it = relp.begin(); std::next(it) != relp.end(); ++it) {
            cur /= *it;
            std::error_code ec;
            const auto st = fs::symlink_status(cur, ec);
            if (fs::is_symlink(st)) {
                reject(name, "parent directory is a symlink");
                return std::nullopt;
            }
            if (fs::exists(st) && !fs::is_directory(st)) {
                reject(name, "parent path is not a directory");
                return std::nullopt;
            }
            if (!fs::exists(st)) {
                fs::create_directory(cur);
            }
        }
        const fs::path target = cur / relp.filename();
        std::error_code ec;
        const auto st = fs::symlink_status(target, ec);
        if (fs::is_directory(st)) {
            if (!is_dir) {
                reject(name, "would overwrite a directory");
            }
            return is_dir ? std::optional<fs::path>(target) : std::nullopt;
        }
        if (fs::exists(st) || fs::is_symlink(st)) {
            fs::remove(target, ec);
        }
        return target;
    }

    fs::path root_;
    EventLog* log_;
    UnpackResult& result_;
};

std::string c_string(ByteView field)
{
    const auto end = std::find(field.begin(), field.end(), 0);
    return {field.begin(), end};
}

std::optional<std::uint64_t> parse_octal_field(ByteView field)
{
    if (!field.empty() && (field[0] & 0x80)) {
        // GNU base-256 encoding for large sizes.
        std::uint64_t v = field[0] & 0x7F;
        for (std::size_t i = 1; i < field.size(); ++i) {
            v = (v << 8) | field[i];
        }
        return v;
    }
    std::uint64_t v = 0;
    bool digits = false;
    for (const auto c : field) {
        if (c >= '0' && c <= '7') {
            v = v * 8 + (c - '0');
            digits = true;
        } else if (c == ' ' || c == 0) {
            if (digits) {
                break;
            }
        } else {
            return std::nullopt;
        }
    }
    return v;
}

void parse_pax(ByteView data, std::optional<std::string>& path, std::optional<std::string>& link)
{
    const std::string_view text(reinterpret_cast<const char*>(data.data()), data.size());
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto space = text.find(' ', pos);
        if (space == std::string_view::npos) {
            return;
        }
        std::size_t len = 0;
        for (std::size_t i = pos; i < space; ++i) {
            if (text[i] < '0' || text[i] > '9') {
                return;
            }
            len = len * 10 + static_cast<std::size_t>(text[i] - '0');
        }
        if (len == 0 || pos + len > text.size()) {
            return;
        }
        auto record = text.substr(space + 1, pos + len - space - 1);
        if (!record.empty() && record.back() == '\n') {
            record.remove_suffix(1);
        }
        const auto eq = record.find('=');
        if (eq != std::string_view::npos) {
            const auto key = record.substr(0, eq);
            const auto value = std::string(record.substr(eq + 1));
            if (key == "path") {
                path = value;
            } else if (key == "linkpath") {
                link = value;
            }
        }
        pos += len;
    }
}

std::size_t unpack_tar(ByteView blob, SafeTree& tree)
{
    if (blob.size() < kBlock) {
        corrupt("tar header truncated", 0);
    }
    std::optional<std::string> long_name;
    std::optional<std::string> long_link;
    std::size_t pos = 0;
    while (true) {
        if (pos + kBlock > blob.size()) {
            tree.note("warning", "tar", "archive ends without end-of-archive marker");
            return blob.size();
        }
        const ByteView header = blob.subspan(pos, kBlock);
        if (std::all_of(header.begin(), header.end(), [](std::uint8_t b) { return b == 0; })) {
            pos += kBlock;
            if (pos + kBlock <= blob.size()) {
                const ByteView second = blob.subspan(pos, kBlock);
                if (std::all_of(second.begin(), second.end(), [](std::uint8_t b) { return b == 0; })) {
                    pos += kBlock;
                }
            }
            return pos;
        }
        if (!valid_tar_checksum(header)) {
            corrupt("tar header checksum mismatch", pos);
        }
        const auto size = parse_octal_field(header.subspan(124, 12));
        if (!size) {
            corrupt("tar size field malformed", pos);
        }
        const std::size_t data_start = pos + kBlock;
        if (*size > blob.size() - data_start) {
            corrupt("tar member truncated", pos);
        }
        const ByteView data = blob.subspan(data_start, static_cast<std::size_t>(*size));
        const char type = static_cast<char>(header[156]);

        std::string name = c_string(header.subspan(0, 100));
        const bool ustar = c_string(header.subspan(257, 6)).starts_with("ustar");
        if (ustar) {
            const std::string prefix = c_string(header.subspan(345, 155));
            if (!prefix.empty()) {
                name = prefix + "/" + name;
            }
        }
        std::string link = c_string(header.subspan(157, 100));

        bool meta = false;
        switch (type) {
        case 'L':
            long_name = c_string(data);
            meta = true;
            break;
        case 'K':
            long_link = c_string(data);
            meta = true;
            break;
        case 'x':
            parse_pax(data, long_name, long_link);
            meta = true;
            break;
        case 'g':
            meta = true;
            break;
        default:
            break;
        }
        if (!meta) {
            if (long_name) {
                name = *long_name;
            }
            if (long_link) {
                link = *long_link;
            }
            long_name.reset();
            long_link.reset();
            switch (type) {
            case '0':
            case '\0':
            case '7':
                tree.file(name, data, static_cast<unsigned>(parse_octal_field(header.subspan(100, 8)).value_or(0644)));
                break;
            case '5':
                tree.directory(name);
                break;
            case '2':
                tree.symlink(name, link);
                break;
            case '1':
                tree.hard_link(name, link);
                break;
            default:
                tree.note("skip", name, std::string("unsupported tar entry type '") + type + "'");
                break;
            }
        }
        pos = std::min(blob.size(), data_start + round_up(static_cast<std::size_t>(*size), kBlock));
    }
}

std::optional<std::uint64_t> parse_number(ByteView field, int base)
{
    std::uint64_t v = 0;
    for (const auto c : field) {
        int d = -1;
        if (c >= '0' && c <= '9') {
            d = c - '0';
        } else if (base == 16 && c >= 'a' && c <= 'f') {
            d = c - 'a' + 10;
        } else if (base == 16 && c >= 'A' && c <= 'F') {
            d = c - 'A' + 10;
        }
        if (d < 0 || d >= base) {
            return std::nullopt;
        }
        v = v * static_cast<std::uint64_t>(base) + static_cast<std::uint64_t>(d);
    }
    return v;
}

std::size_t unpack_cpio(ByteView blob, SafeTree& tree)
{
    constexpr std::size_t kNewcHeader = 110;
    constexpr std::size_t kOdcHeader = 76;
    const auto magic_at = [&](std::size_t at) {
        return at + 6 <= blob.size() ? std::string(blob.begin() + static_cast<std::ptrdiff_t>(at),
                                                   blob.begin() + static_cast<std::ptrdiff_t>(at + 6))
                                     : std::string();
    };
    const std::string first = magic_at(0);
    const bool newc = first == "070701" || first == "070702";
    if (!newc && first != "070707") {
        corrupt("cpio magic not found", 0);
    }
    const std::size_t header_len = newc ? kNewcHeader : kOdcHeader;
    const std::size_t align = newc ? 4 : 1;

    std::size_t pos = 0;
    while (true) {
        if (pos + header_len > blob.size()) {
            corrupt("cpio header truncated", pos);
        }
        const std::string magic = magic_at(pos);
        if (newc ? (magic != "070701" && magic != "070702") : magic != "070707") {
            corrupt("cpio magic mismatch", pos);
        }
        std::optional<std::uint64_t> mode, namesize, filesize;
        if (newc) {
            const auto field = [&](int index) { return parse_number(blob.subspan(pos + 6 + 8 * index, 8), 16); };
            mode = field(1);
            filesize = field(6);
            namesize = field(11);
        } else {
            mode = parse_number(blob.subspan(pos + 18, 6), 8);
            namesize = parse_number(blob.subspan(pos + 59, 6), 8);
            filesize = parse_number(blob.subspan(pos + 65, 11), 8);
        }
        if (!mode || !namesize || !filesize || *namesize == 0) {
            corrupt("cpio header field malformed", pos);
        }
        const std::size_t name_start = pos + header_len;
        if (*namesize > blob.size() - name_start) {
            corrupt("cpio name truncated", pos);
        }
        const std::string name = c_string(blob.subspan(name_start, static_cast<std::size_t>(*namesize)));
        const std::size_t data_start = round_up(name_start + static_cast<std::size_t>(*namesize), align);
        if (data_start > blob.size() || *filesize > blob.size() - data_start) {
            corrupt("cpio member truncated", pos);
        }
        const ByteView data = blob.subspan(data_start, static_cast<std::size_t>(*filesize));
        const std::size_t next = round_up(data_start + static_cast<std::size_t>(*filesize), align);
        if (name == "TRAILER!!!") {
            return std::min(next, blob.size());
        }
        switch (*mode & 0170000) {
        case 0100000:
            tree.file(name, data, static_cast<unsigned>(*mode & 0777));
            break;
        case 0040000:
            tree.directory(name);
            break;
        case 0120000:
            tree.symlink(name, std::string(data.begin(), data.end()));
            break;
        default:
            tree.note("skip", name, "unsupported cpio entry type");
            break;
        }
        pos = next;
    }
}

std::size_t unpack_gzip(ByteView blob, SafeTree& tree)
{
    z_stream zs{};
    if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) {
        throw std::runtime_error("zlib initialization failed");
    }
    char name_buf[256] = {};
    gz_header header{};
    header.name = reinterpret_cast<Bytef*>(name_buf);
    header.name_max = sizeof name_buf - 1;
    inflateGetHeader(&zs, &header);

    Bytes out;
    std::uint8_t chunk[1 << 16];
    zs.next_in = const_cast<Bytef*>(blob.data());
    zs.avail_in = static_cast<uInt>(std::min<std::size_t>(blob.size(), UINT32_MAX));
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        zs.next_out = chunk;
        zs.avail_out = sizeof chunk;
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            corrupt(rc == Z_BUF_ERROR ? "gzip stream truncated" : "gzip stream corrupt", zs.total_in);
        }
        out.insert(out.end(), chunk, chunk + (sizeof chunk - zs.avail_out));
        if (out.size() > kMaxInflatedBytes) {
            inflateEnd(&zs);
            corrupt("gzip output exceeds size limit", 0);
        }
    }
    const std::size_t consumed = zs.total_in;
    inflateEnd(&zs);

    std::string member = "payload";
    if (header.done == 1 && name_buf[0] != 0) {
        const auto rel = contain_path(name_buf);
        if (rel && !rel->empty()) {
            member = fs::path(*rel).filename().string();
        }
    }
    tree.file(member, out, std::nullopt);
    return consumed;
}

std::string shell_quote(const std::string& s)
{
    std::string out = "'";
    for (const char c : s) {
        if (c == '\'') {
            out += "'\\''";
        } else {
            out.push_back(c);
        }
    }
    out.push_back('\'');
    return out;
}

std::string substitute(std::string text, std::string_view key, const std::string& value)
{
    for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size())) {
        text.replace(pos, key.size(), value);
    }
    return text;
}

std::size_t run_adapter(ByteView blob, const std::string& command_template, const fs::path& workspace, EventLog* log)
{
    const fs::path input = workspace.parent_path() / (workspace.filename().string() + ".adapter-input");
    write_file(input, blob);
    std::string command = substitute(command_template, "{input}", shell_quote(input.string()));
    command = substitute(command, "{output}", shell_quote(workspace.string()));
    if (log) {
        log->record("adapter", workspace.string(), command);
    }
    const int status = std::system(command.c_str());
    std::error_code ec;
    fs::remove(input, ec);
    if (status != 0) {
        throw Error(ErrorCode::CorruptArchive, "adapter exited with status " + std::to_string(status), command);
    }
    return blob.size();
}

} // namespace

UnpackResult unpack(ByteView blob, Format format, const fs::path& workspace, const AdapterTable& adapters,
                    EventLog* log)
{
    const auto adapter = adapters.find(format);
    if (!has_builtin_unpacker(format) && adapter == adapters.end()) {
        throw Error(ErrorCode::UnsupportedFormat, "no unpacker or adapter for " + std::string(to_string(format)));
    }
    std::error_code ec;
    fs::create_directories(workspace, ec);
    if (ec || !fs::is_directory(workspace)) {
        throw Error(ErrorCode::IoError, "cannot create workspace", workspace.string());
    }
    if (!fs::is_empty(workspace)) {
        throw Error(ErrorCode::IoError, "workspace is not empty", workspace.string());
    }

    UnpackResult result;
    SafeTree tree(workspace, log, result);
    switch (format) {
    case Format::Gzip:
        result.consumed = unpack_gzip(blob, tree);
        break;
    case Format::Tar:
        result.consumed = unpack_tar(blob, tree);
        break;
    case Format::Cpio:
        result.consumed = unpack_cpio(blob, tree);
        break;
    default:
        result.consumed = run_adapter(blob, adapter->second, workspace, log);
        break;
    }
    return result;
}

} // namespace firmtriage::extraction
