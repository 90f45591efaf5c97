#include "firmtriage/matcher.hpp"

#include "firmtriage/error.hpp"
#include "firmtriage/version.hpp"

#include <json.hpp>

#include <algorithm>
#include <regex>
#include <set>

namespace firmtriage::matching {

using json = nlohmann::json;

std::string_view to_string(MatchTier t) noexcept
{
    switch (t) {
    case MatchTier::ManifestExact: return "ManifestExact";
    case MatchTier::NameHash: return "NameHash";
    case MatchTier::FuzzyName: return "FuzzyName";
    }
    return "FuzzyName";
}

std::string_view to_string(Confidence c) noexcept
{
    switch (c) {
    case Confidence::High: return "High";
    case Confidence::Medium: return "Medium";
    case Confidence::Low: return "Low";
    }
    return "Low";
}

std::optional<MatchTier> parse_match_tier(std::string_view s)
{
    for (auto t : {MatchTier::ManifestExact, MatchTier::NameHash, MatchTier::FuzzyName}) {
        if (to_string(t) == s) {
            return t;
        }
    }
    return std::nullopt;
}

std::optional<Confidence> parse_confidence(std::string_view s)
{
    for (auto c : {Confidence::High, Confidence::Medium, Confidence::Low}) {
        if (to_string(c) == s) {
            return c;
        }
    }
    return std::nullopt;
}

bool valid_vuln_id(std::string_view id)
{
    static const std::regex cve(R"(^CVE-\d{4}-\d{4,}$)");
    static const std::regex local(R"(^[A-Z][A-Z0-9]*-[A-Za-z0-9][A-Za-z0-9.-]*$)");
    const std::string s(id);
    return std::regex_match(s, cve) || (!s.starts_with("CVE-") && std::regex_match(s, local));
}

void validate_record(const VulnRecord& r)
{
    if (!valid_vuln_id(r.vuln_id)) {
        throw Error(ErrorCode::InvalidRecord, "vuln_id \"" + r.vuln_id + "\" is not a CVE or snapshot identifier",
                    r.vuln_id);
    }
    if (r.cvss_base && !(*r.cvss_base >= 0.0 && *r.cvss_base <= 10.0)) {
        throw Error(ErrorCode::InvalidRecord, "cvss_base outside [0,10]", r.vuln_id);
    }
    for (const auto& a : r.affected) {
        if (a.package_name.empty()) {
            throw Error(ErrorCode::InvalidRecord, "affected entry without package name", r.vuln_id);
        }
        try {
            version_segments(a.introduced);
            if (a.fixed && compare_versions(a.introduced, *a.fixed) > 0) {
                throw Error(ErrorCode::InvalidRecord,
                            "introduced " + a.introduced + " > fixed " + *a.fixed + " for " + a.package_name,
                            r.vuln_id);
            }
        } catch (const Error& e) {
            if (e.code() == ErrorCode::InvalidRecord) {
                throw;
            }
            throw Error(ErrorCode::InvalidRecord, std::string("unparseable range version: ") + e.what(), r.vuln_id);
        }
    }
}

VulnDatabase::VulnDatabase(std::vector<VulnRecord> records, AliasTable aliases, std::string digest)
    : records_(std::move(records)), aliases_(std::move(aliases)), digest_(std::move(digest))
{
    std::set<std::string> ids;
    for (std::size_t i = 0; i < records_.size(); ++i) {
        validate_record(records_[i]);
        if (!ids.insert(records_[i].vuln_id).second) {
            throw Error(ErrorCode::InvalidRecord, "duplicate vuln_id", records_[i].vuln_id);
        }
        std::set<std::string> packages;
        for (const auto& a : records_[i].affected) {
            packages.insert(to_lower(a.package_name));
        }
        for (const auto& p : packages) {
            index_[p].push_back(i);
        }
    }
    for (const auto& [package, names] : aliases_) {
        for (const auto& alias : names) {
            auto& v = alias_index_[to_lower(alias)];
            if (std::find(v.begin(), v.end(), to_lower(package)) == v.end()) {
                v.push_back(to_lower(package));
            }
        }
    }
}

std::vector<std::size_t> VulnDatabase::by_package(std::string_view package) const
{
    const auto it = index_.find(to_lower(package));
    return it == index_.end() ? std::vector<std::size_t>{} : it->second;
}

std::vector<std::string> VulnDatabase::packages_for_alias(std::string_view alias) const
{
    const auto it = alias_index_.find(to_lower(alias));
    return it == alias_index_.end() ? std::vector<std::string>{} : it->second;
}

const VulnRecord* VulnDatabase::find(std::string_view vuln_id) const
{
    for (const auto& r : records_) {
        if (r.vuln_id == vuln_id) {
            return &r;
        }
    }
    return nullptr;
}

namespace {

[[noreturn]] void parse_fail(const std::string& msg, const std::string& where)
{
    throw Error(ErrorCode::SnapshotParseError, msg, where);
}

std::string line_of(std::string_view text, std::size_t byte)
{
    byte = std::min(byte, text.size());
    return "line " + std::to_string(1 + std::count(text.begin(), text.begin() + static_cast<long>(byte), '\n'));
}

const json& field(const json& obj, const char* key, const std::string& where)
{
    if (!obj.is_object() || !obj.contains(key)) {
        parse_fail(std::string("missing field \"") + key + "\"", where);
    }
    return obj.at(key);
}

std::string string_field(const json& obj, const char* key, const std::string& where)
{
    const json& v = field(obj, key, where);
    if (!v.is_string()) {
        parse_fail(std::string("field \"") + key + "\" is not a string", where);
    }
    return v.get<std::string>();
}

VulnRecord parse_record(const json& j, const std::string& where)
{
    if (!j.is_object()) {
        parse_fail("record is not an object", where);
    }
    VulnRecord r;
    r.vuln_id = string_field(j, "id", where);
    const std::string ctx = where + " (" + r.vuln_id + ")";
    if (j.contains("summary")) {
        r.summary = string_field(j, "summary", ctx);
    }
    const json& affected = field(j, "affected", ctx);
    if (!affected.is_array()) {
        parse_fail("\"affected\" is not an array", ctx);
    }
    for (std::size_t a = 0; a < affected.size(); ++a) {
        const std::string actx = ctx + ".affected[" + std::to_string(a) + "]";
        const std::string package = string_field(field(affected[a], "package", actx), "name", actx + ".package");
        const json& ranges = field(affected[a], "ranges", actx);
        if (!ranges.is_array()) {
            parse_fail("\"ranges\" is not an array", actx);
        }
        for (std::size_t g = 0; g < ranges.size(); ++g) {
            const std::string rctx = actx + ".ranges[" + std::to_string(g) + "]";
            const json& events = field(ranges[g], "events", rctx);
            if (!events.is_array()) {
                parse_fail("\"events\" is not an array", rctx);
            }
            std::optional<AffectedRange> open;
            for (std::size_t e = 0; e < events.size(); ++e) {
                const std::string ectx = rctx + ".events[" + std::to_string(e) + "]";
                const json& ev = events[e];
                if (ev.is_object() && ev.contains("introduced")) {
                    if (open) {
                        r.affected.push_back(*open);
                    }
                    open = AffectedRange{package, string_field(ev, "introduced", ectx), std::nullopt};
                } else if (ev.is_object() && ev.contains("fixed")) {
                    if (!open) {
                        parse_fail("\"fixed\" without a preceding \"introduced\"", ectx);
                    }
                    open->fixed = string_field(ev, "fixed", ectx);
                    r.affected.push_back(*open);
                    open.reset();
                } else {
                    parse_fail("event must carry \"introduced\" or \"fixed\"", ectx);
                }
            }
            if (open) {
                r.affected.push_back(*open);
            }
        }
    }
    if (j.contains("severity")) {
        const json& sev = j.at("severity");
        if (!sev.is_array()) {
            parse_fail("\"severity\" is not an array", ctx);
        }
        for (std::size_t s = 0; s < sev.size(); ++s) {
            const json& score = field(sev[s], "score", ctx + ".severity[" + std::to_string(s) + "]");
            if (!score.is_number()) {
                parse_fail("severity score is not a number", ctx + ".severity[" + std::to_string(s) + "]");
            }
            // Highest listed base score wins when several CVSS versions are given.
            r.cvss_base = std::max(r.cvss_base.value_or(score.get<double>()), score.get<double>());
        }
    }
    return r;
}

} // namespace

VulnDatabase parse_vuln_db(std::string_view text, EventLog* log, std::string_view source)
{
    if (trim(text).empty()) {
        if (log != nullptr) {
            log->warn(source, "empty vulnerability snapshot");
        }
        return VulnDatabase({}, {}, sha256_hex(text));
    }
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        parse_fail(e.what(), std::string(source) + " " + line_of(text, e.byte == 0 ? 0 : e.byte - 1));
    }
    const json* list = &root;
    VulnDatabase::AliasTable aliases;
    if (root.is_object()) {
        list = &field(root, "vulnerabilities", std::string(source));
        if (root.contains("aliases")) {
            const json& table = root.at("aliases");
            if (!table.is_object()) {
                parse_fail("\"aliases\" is not an object", std::string(source));
            }
            for (const auto& [package, names] : table.items()) {
                if (!names.is_array()) {
                    parse_fail("alias list is not an array", std::string(source) + " aliases." + package);
                }
                for (const auto& n : names) {
                    if (!n.is_string()) {
                        parse_fail("alias is not a string", std::string(source) + " aliases." + package);
                    }
                    aliases[package].push_back(n.get<std::string>());
                }
            }
        }
    }
    if (!list->is_array()) {
        parse_fail("expected an array of records", std::string(source));
    }
    std::vector<VulnRecord> records;
    for (std::size_t i = 0; i < list->size(); ++i) {
        records.push_back(parse_record((*list)[i], std::string(source) + " record " + std::to_string(i)));
    }
    return VulnDatabase(std::move(records), std::move(aliases), sha256_hex(text));
}

VulnDatabase load_vuln_db(const std::filesystem::path& snapshot_file, EventLog* log)
{
    return parse_vuln_db(read_text(snapshot_file), log, snapshot_file.string());
}

Confidence assign_confidence(sbom::EvidenceKind evidence, MatchTier tier) noexcept
{
    if (evidence == sbom::EvidenceKind::Manifest && tier == MatchTier::ManifestExact) {
        return Confidence::High;
    }
    if (tier == MatchTier::FuzzyName || evidence == sbom::EvidenceKind::FilenameOnly) {
        return Confidence::Low;
    }
    return Confidence::Medium;
}

namespace {

bool any_range_contains(const VulnRecord& r, const std::string& package, const std::string& version)
{
    for (const auto& a : r.affected) {
        if (to_lower(a.package_name) == package && version_in_range(version, a.introduced, a.fixed)) {
            return true;
        }
    }
    return false;
}

} // namespace

std::vector<RawMatch> match_component(const sbom::Component& component, const VulnDatabase& db, EventLog* log)
{
    std::vector<RawMatch> out;
    if (component.unknown_version()) {
        return out;
    }
    try {
        version_segments(component.version);
    } catch (const Error&) {
        if (log != nullptr) {
            log->warn(component.name + "@" + component.version, "unparseable version, not matched");
        }
        return out;
    }

    const std::string name = to_lower(component.name);
    const auto aliases_of = db.packages_for_alias(name);
    std::set<std::size_t> candidates;
    for (const auto i : db.by_package(name)) {
        candidates.insert(i);
    }
    for (const auto& pkg : aliases_of) {
        for (const auto i : db.by_package(pkg)) {
            candidates.insert(i);
        }
    }

    const MatchTier exact_tier =
        component.evidence_kind == sbom::EvidenceKind::Manifest ? MatchTier::ManifestExact : MatchTier::NameHash;
    for (const auto i : candidates) {
        const VulnRecord& r = db.records()[i];
        std::optional<MatchTier> tier;
        if (any_range_contains(r, name, component.version)) {
            tier = exact_tier;
        } else {
            for (const auto& pkg : aliases_of) {
                if (pkg != name && any_range_contains(r, pkg, component.version)) {
                    tier = MatchTier::FuzzyName;
                    break;
                }
            }
        }
        if (tier) {
            out.push_back({&component, &r, *tier, assign_confidence(component.evidence_kind, *tier)});
        }
    }
    std::sort(out.begin(), out.end(),
              [](const RawMatch& a, const RawMatch& b) { return a.vuln->vuln_id < b.vuln->vuln_id; });
    return out;
}

} // namespace firmtriage::matching
