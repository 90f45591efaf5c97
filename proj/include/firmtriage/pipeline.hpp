#pragma once

#include "firmtriage/enrichment.hpp"
#include "firmtriage/extraction.hpp"
#include "firmtriage/matcher.hpp"
#include "firmtriage/sbom.hpp"
#include "firmtriage/scoring.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace firmtriage::pipeline {

inline constexpr double kCvssCriticalDefault = 9.0;
inline constexpr double kSpotCheckFraction = 0.05;

inline constexpr const char* kCarveDir = "01-carve";
inline constexpr const char* kRootfsDir = "02-rootfs";
inline constexpr const char* kSbomFile = "03-sbom.cdx.json";
inline constexpr const char* kFindingsFile = "04-findings.json";
inline constexpr const char* kReportFile = "05-report.md";
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kLogFile = "extraction.log";
inline constexpr const char* kEpssCacheFile = "epss-cache.csv";

struct SnapshotPaths {
    std::optional<std::filesystem::path> vuln_db;
    std::optional<std::filesystem::path> epss;
    std::optional<std::filesystem::path> kev;
};

struct PipelineConfig {
    int depth_limit = extraction::kDefaultDepthLimit;
    scoring::ScoringConfig scoring;
    sbom::ScanOptions scan;
    SnapshotPaths snapshots;
    bool offline = false;
    std::string epss_endpoint{enrichment::kDefaultEpssEndpoint};
    extraction::AdapterTable adapters;
    std::filesystem::path output_dir{"firmtriage-out"};
    std::uint64_t seed = 0;
    double cvss_critical = kCvssCriticalDefault;
    // Fixed SBOM timestamp and serial number for reproducible artifacts.
    std::optional<std::string> sbom_timestamp;
    std::optional<std::string> sbom_serial;

    // Throws Error{ConfigError}: depth_limit < 1, scoring config invalid,
    // referenced snapshot missing, cvss_critical outside [0,10].
    void validate() const;
};

// JSON config. Relative paths resolve against `base_dir`. Unknown keys are
// rejected. Throws Error{ConfigError} naming the offending key.
PipelineConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir,
                            std::string_view source = "config");
PipelineConfig load_config(const std::filesystem::path& config_file);

struct Provenance {
    std::string epss_date;
    std::string kev_date;
    std::string vuln_db_digest;

    friend bool operator==(const Provenance&, const Provenance&) = default;
};

inline constexpr const char* kOutcomeOk = "ok";
inline constexpr const char* kOutcomeError = "error";
inline constexpr const char* kOutcomeMissing = "missing";

struct TriageReport {
    SampleMetadata sample;
    std::string outcome = kOutcomeOk; // "ok", an extraction FailureReason, "error" or "missing"
    std::string outcome_detail;
    // Owned components; findings point into this vector.
    std::shared_ptr<const std::vector<sbom::Component>> components = std::make_shared<std::vector<sbom::Component>>();
    std::size_t component_count = 0;
    std::vector<sbom::Component> manual_review;
    std::vector<scoring::Finding> findings; // ranked
    Provenance provenance;
    std::string tool_version{sbom::kToolVersion};

    [[nodiscard]] bool ok() const noexcept { return outcome == kOutcomeOk; }
};

// Loaded snapshots shared by every sample of a run.
struct Snapshots {
    matching::VulnDatabase db;
    enrichment::EnrichmentSnapshot feeds;
};

// Missing paths give an empty database or feed.
Snapshots load_snapshots(const SnapshotPaths& paths, EventLog* log = nullptr);

// Matching, enrichment and scoring over an SBOM's components. `fs` supplies
// context signals; pass an empty tree when the root filesystem is gone.
// Online enrichment uses `transport` unless config.offline is set.
TriageReport score_components(const SampleMetadata& sample, std::vector<sbom::Component> components,
                              const extraction::NormalizedFileSystem& fs, const Snapshots& snapshots,
                              const PipelineConfig& config, const enrichment::Transport& transport, EventLog& log,
                              const std::optional<std::filesystem::path>& epss_cache = std::nullopt);

// Extraction -> SBOM -> matching -> enrichment -> scoring, writing every
// stage artifact into `workspace` before the next stage begins.
TriageReport run_pipeline(const FirmwareImage& image, const PipelineConfig& config,
                          const std::filesystem::path& workspace, const enrichment::Transport& transport);
TriageReport run_pipeline(const FirmwareImage& image, const PipelineConfig& config,
                          const std::filesystem::path& workspace, const enrichment::Transport& transport,
                          const Snapshots& snapshots);

// Extraction and SBOM only; returns the SBOM path, or nullopt when extraction failed.
std::optional<std::filesystem::path> run_sbom_stage(const FirmwareImage& image, const PipelineConfig& config,
                                                    const std::filesystem::path& workspace);

// Re-runs matching onwards from a preserved SBOM. The root filesystem
// defaults to the sibling 02-rootfs directory when present.
TriageReport score_sbom(const std::filesystem::path& sbom_file, const PipelineConfig& config,
                        const std::filesystem::path& workspace, const enrichment::Transport& transport,
                        std::optional<std::filesystem::path> rootfs = std::nullopt);

// 04-findings.json: canonical key order, 2-space indent, trailing newline.
std::string report_json(const TriageReport& report);
TriageReport parse_report_json(std::string_view json_text);
// 05-report.md summary table.
std::string report_markdown(const TriageReport& report);

// Writes 04-findings.json and 05-report.md; throws Error{IoError} naming the path.
void emit_report(const TriageReport& report, const std::filesystem::path& workspace);

// Distinct (product, version) pairs the version-string extractor recovers from
// the raw image bytes.
std::size_t strings_baseline(const FirmwareImage& image);

struct CorpusEntry {
    SampleMetadata meta;
    std::filesystem::path image_path;
};

// CSV with header sample_id,device_type,vendor,release_year,image_path.
// Relative image paths resolve against the manifest's directory. Throws
// Error{ManifestError} for a bad header, malformed row or empty corpus.
std::vector<CorpusEntry> parse_corpus_manifest(std::string_view csv_text, const std::filesystem::path& base_dir,
                                               std::string_view source = "manifest");
std::vector<CorpusEntry> load_corpus_manifest(const std::filesystem::path& manifest_file);

struct SampleMetrics {
    std::string sample_id;
    std::string outcome;
    std::size_t pipeline_count = 0;
    std::size_t strings_baseline_count = 0;
    std::size_t critical_band_count_rps = 0;
    std::size_t critical_count_cvss_only = 0;
    std::size_t finding_count = 0;
};

struct EvaluationMetrics {
    std::size_t total = 0;
    std::size_t extracted = 0;
    double extraction_success_rate = 0.0;
    std::vector<SampleMetrics> samples;
    std::vector<std::string> spot_check_sample; // "<sample_id>/<vuln_id>/<component>@<version>"
};

// ceil(fraction x ids.size()) ids drawn without replacement from a seeded
// generator, returned in input order.
std::vector<std::string> spot_check(const std::vector<std::string>& finding_ids, std::uint64_t seed,
                                    double fraction = kSpotCheckFraction);

// Runs the pipeline per sample under <out_root>/<sample_id> and writes
// <out_root>/evaluation.json. A missing image marks that sample failed.
EvaluationMetrics evaluate(const std::filesystem::path& corpus_manifest, const PipelineConfig& config,
                           const std::filesystem::path& out_root, const enrichment::Transport& transport);

std::string metrics_json(const EvaluationMetrics& metrics);

// Transport that refuses every request; used for offline runs.
enrichment::Transport offline_transport();

} // namespace firmtriage::pipeline
