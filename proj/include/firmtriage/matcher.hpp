#pragma once

#include "firmtriage/log.hpp"
#include "firmtriage/sbom.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace firmtriage::matching {

enum class MatchTier { ManifestExact, NameHash, FuzzyName };
enum class Confidence { High, Medium, Low };

std::string_view to_string(MatchTier t) noexcept;
std::string_view to_string(Confidence c) noexcept;
std::optional<MatchTier> parse_match_tier(std::string_view s);
std::optional<Confidence> parse_confidence(std::string_view s);

struct AffectedRange {
    std::string package_name;
    std::string introduced;
    std::optional<std::string> fixed;

    friend bool operator==(const AffectedRange&, const AffectedRange&) = default;
};

struct VulnRecord {
    std::string vuln_id;
    std::vector<AffectedRange> affected;
    std::optional<double> cvss_base;
    std::string summary;

    friend bool operator==(const VulnRecord&, const VulnRecord&) = default;
};

// Throws Error{InvalidRecord} naming the violated invariant.
void validate_record(const VulnRecord& record);

// "CVE-YYYY-NNNN..." or a snapshot-local identifier such as "FT-2024-0001".
bool valid_vuln_id(std::string_view id);

// Immutable after construction; lookups key on lowercase package names.
class VulnDatabase {
public:
    using AliasTable = std::map<std::string, std::vector<std::string>>; // package -> aliases

    VulnDatabase() = default;
    // Validates every record; throws Error{InvalidRecord} on the first violation
    // or a duplicate vuln_id.
    VulnDatabase(std::vector<VulnRecord> records, AliasTable aliases = {}, std::string digest = {});

    [[nodiscard]] const std::vector<VulnRecord>& records() const noexcept { return records_; }
    [[nodiscard]] std::size_t size() const noexcept { return records_.size(); }
    [[nodiscard]] bool empty() const noexcept { return records_.empty(); }
    [[nodiscard]] const AliasTable& aliases() const noexcept { return aliases_; }
    // SHA-256 of the snapshot file, for provenance.
    [[nodiscard]] const std::string& digest() const noexcept { return digest_; }

    // Indices of records with an affected entry for `package` (case-insensitive).
    [[nodiscard]] std::vector<std::size_t> by_package(std::string_view package) const;
    // Lowercase package names for which `alias` is declared.
    [[nodiscard]] std::vector<std::string> packages_for_alias(std::string_view alias) const;
    [[nodiscard]] const VulnRecord* find(std::string_view vuln_id) const;

private:
    std::vector<VulnRecord> records_;
    AliasTable aliases_;
    std::string digest_;
    std::map<std::string, std::vector<std::size_t>> index_;
    std::map<std::string, std::vector<std::string>> alias_index_;
};

// Snapshot: either a JSON array of records or an object
// {"aliases": {package: [alias, ...]}, "vulnerabilities": [records]}.
// Record: {"id", "summary", "affected": [{"package": {"name"}, "ranges":
// [{"events": [{"introduced"}, {"fixed"}]}]}], "severity": [{"type", "score"}]}.
// Throws Error{SnapshotParseError} with line/record context and
// Error{InvalidRecord} for invariant violations. Empty input yields an empty
// database and a logged warning.
VulnDatabase parse_vuln_db(std::string_view text, EventLog* log = nullptr, std::string_view source = "snapshot");
VulnDatabase load_vuln_db(const std::filesystem::path& snapshot_file, EventLog* log = nullptr);

struct RawMatch {
    const sbom::Component* component = nullptr;
    const VulnRecord* vuln = nullptr;
    MatchTier matched_on = MatchTier::FuzzyName;
    Confidence confidence = Confidence::Low;
};

// Strict waterfall, first rule wins:
//   Manifest evidence matched exactly           -> High
//   FuzzyName tier or FilenameOnly evidence     -> Low
//   otherwise (recovered version, name match)   -> Medium
Confidence assign_confidence(sbom::EvidenceKind evidence, MatchTier tier) noexcept;

// One match per vulnerability whose affected ranges contain the component's
// version under its name (exact) or a snapshot alias (FuzzyName). Unknown
// versions never match. Results sorted by vuln_id. The returned matches
// reference `component` and records inside `db`.
std::vector<RawMatch> match_component(const sbom::Component& component, const VulnDatabase& db,
                                      EventLog* log = nullptr);

// Hook for a binary-hash signature list; no hash database ships, so it never
// upgrades a match.
inline bool hash_signature_match(const sbom::Component&, const VulnRecord&) noexcept
{
    return false;
}

} // namespace firmtriage::matching
