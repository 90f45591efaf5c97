#pragma once

#include "firmtriage/extraction.hpp"
#include "firmtriage/filesystem.hpp"
#include "firmtriage/io.hpp"
#include "firmtriage/log.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace firmtriage::sbom {

// Version assigned to components whose version could not be recovered. Such
// components are never matched and go to the manual-review list instead.
inline constexpr std::string_view kUnknownVersion = "0.0.0-unknown";

inline constexpr std::string_view kToolName = "firmtriage";
inline constexpr std::string_view kToolVersion = "0.1.0";
inline constexpr std::string_view kSpecVersion = "1.5";

enum class ComponentKind { Executable, Library, ConfigDeclared, ManifestDeclared };
enum class EvidenceKind { Manifest, VersionString, FilenameOnly };

std::string_view to_string(ComponentKind k) noexcept;
std::string_view to_string(EvidenceKind k) noexcept;
std::optional<ComponentKind> parse_component_kind(std::string_view s);
std::optional<EvidenceKind> parse_evidence_kind(std::string_view s);

struct Component {
    std::string name;
    std::string version;
    ComponentKind kind = ComponentKind::Executable;
    EvidenceKind evidence_kind = EvidenceKind::FilenameOnly;
    std::optional<std::string> purl;
    std::optional<std::string> cpe;
    std::vector<std::string> evidence_paths; // root-relative

    [[nodiscard]] bool unknown_version() const noexcept { return version == kUnknownVersion; }

    friend bool operator==(const Component&, const Component&) = default;
};

struct ToolInfo {
    std::string name{kToolName};
    std::string version{kToolVersion};

    friend bool operator==(const ToolInfo&, const ToolInfo&) = default;
};

struct SbomMetadata {
    SampleMetadata sample;
    std::string timestamp;
    ToolInfo tool;

    friend bool operator==(const SbomMetadata&, const SbomMetadata&) = default;
};

struct SbomDocument {
    std::string bom_format{"CycloneDX"};
    std::string spec_version{kSpecVersion};
    std::string serial_number; // urn:uuid:...
    SbomMetadata metadata;
    std::vector<Component> components;

    friend bool operator==(const SbomDocument&, const SbomDocument&) = default;
};

// --- version strings -------------------------------------------------------

struct VersionCandidate {
    std::string product;
    std::string version;

    friend bool operator==(const VersionCandidate&, const VersionCandidate&) = default;
};

inline constexpr std::size_t kMinPrintableRun = 6;

// Scans printable ASCII runs for "<Name> vX.Y[.Z][suffix]" and
// "<name>-X.Y.Z" / "<name>_X.Y" patterns. Candidates whose product equals
// `hint_name` (case-insensitive) come first; otherwise order of appearance.
std::vector<VersionCandidate> extract_version_strings(ByteView bytes, std::string_view hint_name);

// --- component identification ---------------------------------------------

struct ScanOptions {
    std::vector<std::string> binary_roots{"bin", "usr/bin", "sbin", "usr/sbin"};
    std::vector<std::string> library_roots{"lib", "usr/lib"};
    std::vector<std::string> manifest_paths{"usr/lib/opkg/status", "var/lib/opkg/status", "etc/opkg/status"};
    // Exact paths of "name version" text files.
    std::vector<std::string> version_files;
};

struct LibraryName {
    std::string name;
    std::optional<std::string> version;
};

// "libssl.so.1.1" -> {"ssl", "1.1"}; "libfoo-1.2.so" -> {"foo", "1.2"}.
std::optional<LibraryName> parse_library_name(std::string_view filename);

std::string make_purl(std::string_view name, std::string_view version);

// Requires fs.ok(). Output sorted by (name, version, first evidence path).
std::vector<Component> identify_components(const extraction::NormalizedFileSystem& fs,
                                           const ScanOptions& options = {}, EventLog* log = nullptr);

// --- CycloneDX -------------------------------------------------------------

struct BuildOptions {
    std::optional<std::string> timestamp; // default: now
    std::optional<std::string> serial;    // default: random v4 UUID URN
};

std::string random_serial_number();

// Validates the per-component invariants and uniqueness of
// (name, version, first evidence path); throws Error{DuplicateComponent}.
SbomDocument make_document(std::vector<Component> components, const SampleMetadata& sample,
                           const BuildOptions& options = {});

// UTF-8, 2-space indentation, keys in schema order.
std::string serialize(const SbomDocument& doc);

inline std::string build_sbom(std::vector<Component> components, const SampleMetadata& sample,
                              const BuildOptions& options = {})
{
    return serialize(make_document(std::move(components), sample, options));
}

// Throws Error{SchemaViolation} with the offending JSON path.
SbomDocument parse_sbom(std::string_view json_text);

} // namespace firmtriage::sbom
