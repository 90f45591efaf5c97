#include "firmtriage/sbom.hpp"

#include "firmtriage/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <map>
#include <random>
#include <regex>
#include <set>

namespace firmtriage::sbom {

using extraction::FileEntry;
using extraction::NormalizedFileSystem;
using json = nlohmann::ordered_json;

std::string_view to_string(ComponentKind k) noexcept
{
    switch (k) {
    case ComponentKind::Executable: return "Executable";
    case ComponentKind::Library: return "Library";
    case ComponentKind::ConfigDeclared: return "ConfigDeclared";
    case ComponentKind::ManifestDeclared: return "ManifestDeclared";
    }
    return "Executable";
}

std::string_view to_string(EvidenceKind k) noexcept
{
    switch (k) {
    case EvidenceKind::Manifest: return "Manifest";
    case EvidenceKind::VersionString: return "VersionString";
    case EvidenceKind::FilenameOnly: return "FilenameOnly";
    }
    return "FilenameOnly";
}

std::optional<ComponentKind> parse_component_kind(std::string_view s)
{
    for (auto k : {ComponentKind::Executable, ComponentKind::Library, ComponentKind::ConfigDeclared,
                   ComponentKind::ManifestDeclared}) {
        if (to_string(k) == s) {
            return k;
        }
    }
    return std::nullopt;
}

std::optional<EvidenceKind> parse_evidence_kind(std::string_view s)
{
    for (auto k : {EvidenceKind::Manifest, EvidenceKind::VersionString, EvidenceKind::FilenameOnly}) {
        if (to_string(k) == s) {
            return k;
        }
    }
    return std::nullopt;
}

// --- version strings -------------------------------------------------------

namespace {

bool printable(std::uint8_t b)
{
    return (b >= 0x20 && b <= 0x7E) || b == '\t';
}

// A digit, a dot, a digit: cheap filter before running the regexes.
bool has_dotted_number(std::string_view run)
{
    for (std::size_t i = 0; i + 2 < run.size(); ++i) {
        if (std::isdigit(static_cast<unsigned char>(run[i])) && run[i + 1] == '.' &&
            std::isdigit(static_cast<unsigned char>(run[i + 2]))) {
            return true;
        }
    }
    return false;
}

const std::regex& spaced_pattern()
{
    // "<Name> v?X.Y[.Z][suffix]"
    static const std::regex re(R"((?:^|[^A-Za-z0-9+_])([A-Za-z][A-Za-z0-9+]*) v?(\d+(?:\.\d+){1,3}[a-z]?)(?=$|[^A-Za-z0-9.]|\.(?!\d)))");
    return re;
}

const std::regex& joined_pattern()
{
    // "<name>-X.Y.Z" or "<name>_X.Y"
    static const std::regex re(R"((?:^|[^A-Za-z0-9+])([A-Za-z][A-Za-z0-9+]*)[-_](\d+(?:\.\d+){1,3}[a-z]?)(?=$|[^A-Za-z0-9.]|\.(?!\d)))");
    return re;
}

struct Hit {
    std::size_t offset;
    VersionCandidate candidate;
};

void collect(const std::regex& re, std::string_view run, std::size_t base, std::vector<Hit>& out)
{
    using It = std::regex_iterator<std::string_view::const_iterator>;
    for (It it(run.begin(), run.end(), re), end; it != end; ++it) {
        const auto& m = *it;
        out.push_back({base + static_cast<std::size_t>(m.position(1)), {m.str(1), m.str(2)}});
    }
}

} // namespace

std::vector<VersionCandidate> extract_version_strings(ByteView bytes, std::string_view hint_name)
{
    std::vector<Hit> hits;
    std::size_t i = 0;
    while (i < bytes.size()) {
        if (!printable(bytes[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < bytes.size() && printable(bytes[j])) {
            ++j;
        }
        const std::string_view run(reinterpret_cast<const char*>(bytes.data() + i), j - i);
        if (run.size() >= kMinPrintableRun && has_dotted_number(run)) {
            collect(spaced_pattern(), run, i, hits);
            collect(joined_pattern(), run, i, hits);
        }
        i = j;
    }
    std::stable_sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.offset < b.offset; });

    std::vector<VersionCandidate> out;
    std::set<std::pair<std::string, std::string>> seen;
    for (auto& h : hits) {
        if (seen.emplace(to_lower(h.candidate.product), h.candidate.version).second) {
            out.push_back(std::move(h.candidate));
        }
    }
    const std::string hint = to_lower(hint_name);
    std::stable_partition(out.begin(), out.end(),
                          [&](const VersionCandidate& c) { return !hint.empty() && to_lower(c.product) == hint; });
    return out;
}

// --- component identification ---------------------------------------------

std::optional<LibraryName> parse_library_name(std::string_view filename)
{
    static const std::regex so_chain(R"(^lib(.+?)\.so((?:\.\d+)*)$)");
    static const std::regex dashed(R"(^lib(.+?)-(\d+(?:\.\d+)*)\.so(?:\.\d+)*$)");
    static const std::regex plain(R"(^(.+?)\.so((?:\.\d+)*)$)");
    const std::string name(filename);
    std::smatch m;
    LibraryName out;
    if (std::regex_match(name, m, dashed)) {
        out.name = m.str(1);
        out.version = m.str(2);
    } else if (std::regex_match(name, m, so_chain) || std::regex_match(name, m, plain)) {
        out.name = m.str(1);
        if (m.length(2) > 0) {
            out.version = m.str(2).substr(1);
        }
    } else {
        return std::nullopt;
    }
    return out;
}

std::string make_purl(std::string_view name, std::string_view version)
{
    return "pkg:generic/" + std::string(name) + "@" + std::string(version);
}

namespace {

std::string cpe_token(std::string_view s)
{
    std::string out;
    for (const char c : to_lower(trim(s))) {
        out.push_back(c == ' ' ? '_' : c);
    }
    return out;
}

std::string make_cpe(std::string_view vendor, std::string_view product, std::string_view version)
{
    return "cpe:2.3:a:" + cpe_token(vendor) + ":" + cpe_token(product) + ":" + cpe_token(version) +
           ":*:*:*:*:*:*:*";
}

std::string basename(std::string_view path)
{
    const auto slash = path.rfind('/');
    return std::string(slash == std::string_view::npos ? path : path.substr(slash + 1));
}

std::string dirname(std::string_view path)
{
    const auto slash = path.rfind('/');
    return slash == std::string_view::npos ? std::string() : std::string(path.substr(0, slash));
}

struct Stanza {
    std::map<std::string, std::string> fields;
};

std::vector<Stanza> parse_stanzas(std::string_view text)
{
    std::vector<Stanza> out;
    Stanza cur;
    std::string last_key;
    auto flush = [&] {
        if (!cur.fields.empty()) {
            out.push_back(std::move(cur));
        }
        cur = {};
        last_key.clear();
    };
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (trim(line).empty()) {
            flush();
        } else if (line.front() == ' ' || line.front() == '\t') {
            // Continuation of a multi-line field; irrelevant for identification.
        } else if (const auto colon = line.find(':'); colon != std::string_view::npos) {
            last_key = std::string(trim(line.substr(0, colon)));
            cur.fields[last_key] = std::string(trim(line.substr(colon + 1)));
        }
        if (nl == std::string_view::npos) {
            break;
        }
        pos = nl + 1;
    }
    flush();
    return out;
}

std::optional<std::string> read_text_entry(const NormalizedFileSystem& fs, const std::string& path, EventLog* log)
{
    const FileEntry* entry = fs.find_resolved(path);
    if (entry == nullptr || entry->kind != extraction::FileKind::Regular) {
        return std::nullopt;
    }
    auto bytes = fs.read(path);
    if (!bytes) {
        if (log != nullptr) {
            log->warn(path, "unreadable");
        }
        return std::nullopt;
    }
    return std::string(bytes->begin(), bytes->end());
}

bool under_any(std::string_view path, const std::vector<std::string>& roots)
{
    for (const auto& r : roots) {
        const auto root = contain_path(r).value_or("");
        if (path.size() > root.size() && path.starts_with(root) && path[root.size()] == '/') {
            return true;
        }
    }
    return false;
}

bool component_less(const Component& a, const Component& b)
{
    const std::string& pa = a.evidence_paths.empty() ? std::string() : a.evidence_paths.front();
    const std::string& pb = b.evidence_paths.empty() ? std::string() : b.evidence_paths.front();
    return std::tie(a.name, a.version, pa) < std::tie(b.name, b.version, pb);
}

} // namespace

std::vector<Component> identify_components(const NormalizedFileSystem& fs, const ScanOptions& options, EventLog* log)
{
    std::vector<Component> out;
    std::set<std::string> claimed;

    // Scanned binaries by lowercase basename, for manifest claims by name.
    std::map<std::string, std::vector<std::string>> scanned_by_name;
    std::vector<std::pair<const FileEntry*, bool>> scanned; // entry, is_library_root
    auto add_roots = [&](const std::vector<std::string>& roots, bool library) {
        for (const auto& root : roots) {
            for (const FileEntry* e : fs.regular_files_under(root)) {
                scanned.emplace_back(e, library);
                scanned_by_name[to_lower(basename(e->path))].push_back(e->path);
            }
        }
    };
    add_roots(options.binary_roots, false);
    add_roots(options.library_roots, true);

    for (const auto& status_path : options.manifest_paths) {
        const auto text = read_text_entry(fs, status_path, log);
        if (!text) {
            continue;
        }
        const std::string info_dir = dirname(*contain_path(status_path)) + "/info/";
        for (const auto& stanza : parse_stanzas(*text)) {
            const auto pkg = stanza.fields.find("Package");
            const auto ver = stanza.fields.find("Version");
            if (pkg == stanza.fields.end() || ver == stanza.fields.end() || pkg->second.empty() ||
                ver->second.empty()) {
                continue;
            }
            if (const auto st = stanza.fields.find("Status");
                st != stanza.fields.end() && st->second.find("not-installed") != std::string::npos) {
                continue;
            }
            std::set<std::string> files;
            if (const auto list = read_text_entry(fs, info_dir + pkg->second + ".list", nullptr)) {
                std::size_t pos = 0;
                while (pos < list->size()) {
                    auto nl = list->find('\n', pos);
                    if (nl == std::string::npos) {
                        nl = list->size();
                    }
                    const auto line = trim(std::string_view(*list).substr(pos, nl - pos));
                    if (const auto p = contain_path(line); p && !p->empty() && fs.exists(*p)) {
                        files.insert(*p);
                    }
                    pos = nl + 1;
                }
            }
            if (const auto it = scanned_by_name.find(to_lower(pkg->second)); it != scanned_by_name.end()) {
                files.insert(it->second.begin(), it->second.end());
            }
            Component c;
            c.name = pkg->second;
            c.version = ver->second;
            c.kind = ComponentKind::ManifestDeclared;
            c.evidence_kind = EvidenceKind::Manifest;
            c.purl = make_purl(c.name, c.version);
            if (const auto vendor = stanza.fields.find("Vendor");
                vendor != stanza.fields.end() && !vendor->second.empty()) {
                c.cpe = make_cpe(vendor->second, c.name, c.version);
            }
            // Claimed binaries first so the leading evidence path names the executable.
            c.evidence_paths.assign(files.begin(), files.end());
            std::stable_partition(c.evidence_paths.begin(), c.evidence_paths.end(), [&](const std::string& p) {
                return under_any(p, options.binary_roots) || under_any(p, options.library_roots);
            });
            c.evidence_paths.push_back(*contain_path(status_path));
            claimed.insert(files.begin(), files.end());
            out.push_back(std::move(c));
        }
    }

    for (const auto& vf : options.version_files) {
        const auto path = contain_path(vf);
        if (!path) {
            continue;
        }
        const auto text = read_text_entry(fs, *path, log);
        if (!text) {
            continue;
        }
        std::size_t pos = 0;
        while (pos < text->size()) {
            auto nl = text->find('\n', pos);
            if (nl == std::string::npos) {
                nl = text->size();
            }
            const auto line = trim(std::string_view(*text).substr(pos, nl - pos));
            pos = nl + 1;
            if (line.empty() || line.front() == '#') {
                continue;
            }
            const auto sp = line.find_first_of(" \t");
            if (sp == std::string_view::npos) {
                continue;
            }
            Component c;
            c.name = std::string(line.substr(0, sp));
            c.version = std::string(trim(line.substr(sp)));
            c.kind = ComponentKind::ConfigDeclared;
            c.evidence_kind = EvidenceKind::Manifest;
            c.purl = make_purl(c.name, c.version);
            c.evidence_paths = {*path};
            out.push_back(std::move(c));
        }
    }

    for (const auto& [entry, library_root] : scanned) {
        if (claimed.contains(entry->path)) {
            continue;
        }
        const std::string file = basename(entry->path);
        std::optional<LibraryName> lib;
        if (library_root) {
            lib = parse_library_name(file);
            if (!lib) {
                continue; // only shared objects count under library roots
            }
        }
        auto bytes = fs.read(entry->path);
        if (!bytes) {
            if (log != nullptr) {
                log->warn(entry->path, "unreadable");
            }
            continue;
        }
        Component c;
        c.name = lib ? lib->name : file;
        c.kind = lib ? ComponentKind::Library : ComponentKind::Executable;
        const auto candidates = extract_version_strings(*bytes, c.name);
        const bool hinted = !candidates.empty() && to_lower(candidates.front().product) == to_lower(c.name);
        if (hinted) {
            c.version = candidates.front().version;
            c.evidence_kind = EvidenceKind::VersionString;
        } else if (lib && lib->version) {
            c.version = *lib->version;
            c.evidence_kind = EvidenceKind::VersionString;
        } else if (!candidates.empty()) {
            // Identity rests on the file name; the version is the best unattributed string.
            c.version = candidates.front().version;
            c.evidence_kind = EvidenceKind::FilenameOnly;
        } else {
            c.version = std::string(kUnknownVersion);
            c.evidence_kind = EvidenceKind::FilenameOnly;
        }
        if (!c.unknown_version()) {
            c.purl = make_purl(c.name, c.version);
        }
        c.evidence_paths = {entry->path};
        out.push_back(std::move(c));
    }

    std::sort(out.begin(), out.end(), component_less);
    return out;
}

// --- CycloneDX -------------------------------------------------------------

std::string random_serial_number()
{
    static thread_local std::mt19937_64 rng{std::random_device{}()};
    std::uint8_t b[16];
    for (int i = 0; i < 16; i += 8) {
        const auto v = rng();
        for (int k = 0; k < 8; ++k) {
            b[i + k] = static_cast<std::uint8_t>(v >> (8 * k));
        }
    }
    b[6] = static_cast<std::uint8_t>((b[6] & 0x0F) | 0x40);
    b[8] = static_cast<std::uint8_t>((b[8] & 0x3F) | 0x80);
    char buf[64];
    std::snprintf(buf, sizeof buf,
                  "urn:uuid:%02x%02x%02x%02x-%02x%02x-%02x%02x-%02x%02x-%02x%02x%02x%02x%02x%02x", b[0], b[1],
                  b[2], b[3], b[4], b[5], b[6], b[7], b[8], b[9], b[10], b[11], b[12], b[13], b[14], b[15]);
    return buf;
}

SbomDocument make_document(std::vector<Component> components, const SampleMetadata& sample,
                           const BuildOptions& options)
{
    for (std::size_t i = 0; i < components.size(); ++i) {
        const auto& c = components[i];
        const std::string where = "components[" + std::to_string(i) + "]";
        if (c.name.empty()) {
            throw Error(ErrorCode::SchemaViolation, "component name is empty", where + ".name");
        }
        if (c.evidence_paths.empty()) {
            throw Error(ErrorCode::SchemaViolation, "component has no evidence paths", where + ".evidence");
        }
        if (c.unknown_version() && c.evidence_kind != EvidenceKind::FilenameOnly) {
            throw Error(ErrorCode::SchemaViolation, "unknown version requires FilenameOnly evidence",
                        where + ".version");
        }
    }
    std::sort(components.begin(), components.end(), component_less);
    for (std::size_t i = 1; i < components.size(); ++i) {
        if (!component_less(components[i - 1], components[i])) {
            const auto& c = components[i];
            throw Error(ErrorCode::DuplicateComponent,
                        c.name + "@" + c.version + " at " + c.evidence_paths.front() + " appears twice");
        }
    }
    SbomDocument doc;
    doc.serial_number = options.serial.value_or(random_serial_number());
    doc.metadata.sample = sample;
    doc.metadata.timestamp = options.timestamp.value_or(utc_timestamp());
    doc.components = std::move(components);
    return doc;
}

namespace {

std::string_view cyclonedx_type(ComponentKind k)
{
    return k == ComponentKind::Library ? "library" : "application";
}

json property(std::string_view name, std::string_view value)
{
    json p;
    p["name"] = name;
    p["value"] = value;
    return p;
}

} // namespace

std::string serialize(const SbomDocument& doc)
{
    json root;
    root["bomFormat"] = doc.bom_format;
    root["specVersion"] = doc.spec_version;
    root["serialNumber"] = doc.serial_number;
    root["version"] = 1;

    json meta;
    meta["timestamp"] = doc.metadata.timestamp;
    json tool;
    tool["name"] = doc.metadata.tool.name;
    tool["version"] = doc.metadata.tool.version;
    meta["tools"] = json::array({tool});
    json subject;
    subject["type"] = "firmware";
    subject["name"] = doc.metadata.sample.sample_id;
    if (!doc.metadata.sample.sha256.empty()) {
        json hash;
        hash["alg"] = "SHA-256";
        hash["content"] = doc.metadata.sample.sha256;
        subject["hashes"] = json::array({hash});
    }
    subject["properties"] = json::array({
        property("firmtriage:device_type", doc.metadata.sample.device_type),
        property("firmtriage:vendor", doc.metadata.sample.vendor),
        property("firmtriage:release_year", std::to_string(doc.metadata.sample.release_year)),
    });
    meta["component"] = std::move(subject);
    root["metadata"] = std::move(meta);

    json comps = json::array();
    for (const auto& c : doc.components) {
        json j;
        j["type"] = cyclonedx_type(c.kind);
        j["name"] = c.name;
        j["version"] = c.version;
        if (c.cpe) {
            j["cpe"] = *c.cpe;
        }
        if (c.purl) {
            j["purl"] = *c.purl;
        }
        j["properties"] = json::array({
            property("firmtriage:kind", to_string(c.kind)),
            property("firmtriage:evidence_kind", to_string(c.evidence_kind)),
        });
        json occ = json::array();
        for (const auto& p : c.evidence_paths) {
            json o;
            o["location"] = p;
            occ.push_back(std::move(o));
        }
        j["evidence"]["occurrences"] = std::move(occ);
        comps.push_back(std::move(j));
    }
    root["components"] = std::move(comps);
    return root.dump(2) + "\n";
}

namespace {

[[noreturn]] void violation(const std::string& where, const std::string& what)
{
    throw Error(ErrorCode::SchemaViolation, what, where);
}

const json& require(const json& obj, const std::string& key, const std::string& where, json::value_t type)
{
    const std::string path = where.empty() ? key : where + "." + key;
    if (!obj.is_object() || !obj.contains(key)) {
        violation(path, "missing required field");
    }
    const json& v = obj.at(key);
    const bool ok = type == json::value_t::number_integer ? v.is_number_integer() : v.type() == type;
    if (!ok) {
        violation(path, "wrong type");
    }
    return v;
}

std::string require_string(const json& obj, const std::string& key, const std::string& where)
{
    return require(obj, key, where, json::value_t::string).get<std::string>();
}

std::optional<std::string> optional_string(const json& obj, const std::string& key, const std::string& where)
{
    if (!obj.contains(key)) {
        return std::nullopt;
    }
    return require_string(obj, key, where);
}

// name -> value for a CycloneDX properties array.
std::map<std::string, std::string> read_properties(const json& obj, const std::string& where)
{
    std::map<std::string, std::string> out;
    if (!obj.contains("properties")) {
        return out;
    }
    const json& arr = require(obj, "properties", where, json::value_t::array);
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string p = where + (where.empty() ? "" : ".") + "properties[" + std::to_string(i) + "]";
        out[require_string(arr[i], "name", p)] = require_string(arr[i], "value", p);
    }
    return out;
}

} // namespace

SbomDocument parse_sbom(std::string_view json_text)
{
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        violation("$", std::string("invalid JSON: ") + e.what());
    }
    if (!root.is_object()) {
        violation("$", "document is not an object");
    }
    SbomDocument doc;
    doc.bom_format = require_string(root, "bomFormat", "");
    if (doc.bom_format != "CycloneDX") {
        violation("bomFormat", "expected \"CycloneDX\", got \"" + doc.bom_format + "\"");
    }
    doc.spec_version = require_string(root, "specVersion", "");
    doc.serial_number = require_string(root, "serialNumber", "");
    static const std::regex uuid_urn(
        R"(^urn:uuid:[0-9a-fA-F]{8}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{12}$)");
    if (!std::regex_match(doc.serial_number, uuid_urn)) {
        violation("serialNumber", "not a UUID URN");
    }

    const json& meta = require(root, "metadata", "", json::value_t::object);
    doc.metadata.timestamp = require_string(meta, "timestamp", "metadata");
    const json& tools = require(meta, "tools", "metadata", json::value_t::array);
    if (tools.empty()) {
        violation("metadata.tools", "empty tools list");
    }
    doc.metadata.tool.name = require_string(tools[0], "name", "metadata.tools[0]");
    doc.metadata.tool.version = require_string(tools[0], "version", "metadata.tools[0]");
    const json& subject = require(meta, "component", "metadata", json::value_t::object);
    doc.metadata.sample.sample_id = require_string(subject, "name", "metadata.component");
    if (subject.contains("hashes")) {
        const json& hashes = require(subject, "hashes", "metadata.component", json::value_t::array);
        for (std::size_t i = 0; i < hashes.size(); ++i) {
            const std::string p = "metadata.component.hashes[" + std::to_string(i) + "]";
            if (require_string(hashes[i], "alg", p) == "SHA-256") {
                doc.metadata.sample.sha256 = require_string(hashes[i], "content", p);
            }
        }
    }
    const auto props = read_properties(subject, "metadata.component");
    auto prop = [&](const std::string& k) { return props.contains(k) ? props.at(k) : std::string(); };
    doc.metadata.sample.device_type = prop("firmtriage:device_type");
    doc.metadata.sample.vendor = prop("firmtriage:vendor");
    if (const auto year = prop("firmtriage:release_year"); !year.empty()) {
        try {
            doc.metadata.sample.release_year = std::stoi(year);
        } catch (const std::exception&) {
            violation("metadata.component.properties", "release_year is not an integer");
        }
    }

    const json& comps = require(root, "components", "", json::value_t::array);
    for (std::size_t i = 0; i < comps.size(); ++i) {
        const std::string where = "components[" + std::to_string(i) + "]";
        const json& j = comps[i];
        if (!j.is_object()) {
            violation(where, "component is not an object");
        }
        Component c;
        const std::string type = require_string(j, "type", where);
        if (type != "application" && type != "library") {
            violation(where + ".type", "unsupported component type \"" + type + "\"");
        }
        c.name = require_string(j, "name", where);
        c.version = require_string(j, "version", where);
        c.cpe = optional_string(j, "cpe", where);
        c.purl = optional_string(j, "purl", where);
        const auto cprops = read_properties(j, where);
        const auto kind_it = cprops.find("firmtriage:kind");
        c.kind = kind_it != cprops.end() ? parse_component_kind(kind_it->second).value_or(ComponentKind::Executable)
                                         : (type == "library" ? ComponentKind::Library : ComponentKind::Executable);
        const auto ev_it = cprops.find("firmtriage:evidence_kind");
        if (ev_it != cprops.end()) {
            const auto ev = parse_evidence_kind(ev_it->second);
            if (!ev) {
                violation(where + ".properties", "unknown evidence kind \"" + ev_it->second + "\"");
            }
            c.evidence_kind = *ev;
        } else {
            c.evidence_kind = c.unknown_version() ? EvidenceKind::FilenameOnly : EvidenceKind::VersionString;
        }
        const json& evidence = require(j, "evidence", where, json::value_t::object);
        const json& occ = require(evidence, "occurrences", where + ".evidence", json::value_t::array);
        if (occ.empty()) {
            violation(where + ".evidence.occurrences", "no evidence paths");
        }
        for (std::size_t k = 0; k < occ.size(); ++k) {
            c.evidence_paths.push_back(
                require_string(occ[k], "location", where + ".evidence.occurrences[" + std::to_string(k) + "]"));
        }
        doc.components.push_back(std::move(c));
    }
    return doc;
}

} // namespace firmtriage::sbom
