#include "firmtriage/error.hpp"
#include "firmtriage/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace fs = std::filesystem;
using namespace firmtriage;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitAnalysis = 1;
constexpr int kExitConfig = 2;

struct CommonFlags {
    std::string config;
    std::string out;
    std::string vuln_db;
    std::string epss;
    std::string kev;
    std::string endpoint;
    bool offline = false;
    std::optional<std::uint64_t> seed;
};

struct SampleFlags {
    std::string sample_id;
    std::string device_type;
    std::string vendor;
    int release_year = 0;
};

void add_common(CLI::App* cmd, CommonFlags& f)
{
    cmd->add_option("--config", f.config, "JSON pipeline config")->check(CLI::ExistingFile);
    cmd->add_option("--out", f.out, "Output directory");
    cmd->add_option("--vuln-db", f.vuln_db, "Vulnerability snapshot (JSON)");
    cmd->add_option("--epss-snapshot", f.epss, "EPSS snapshot (CSV)");
    cmd->add_option("--kev-snapshot", f.kev, "KEV catalog snapshot (JSON)");
    cmd->add_option("--epss-endpoint", f.endpoint, "EPSS API URL template containing {ids}");
    cmd->add_flag("--offline", f.offline, "Never touch the network; use snapshots only");
    cmd->add_option("--seed", f.seed, "Seed for the evaluation spot check");
}

void add_sample(CLI::App* cmd, SampleFlags& s)
{
    cmd->add_option("--sample-id", s.sample_id, "Sample identifier (default: image file stem)");
    cmd->add_option("--device-type", s.device_type, "Device type");
    cmd->add_option("--vendor", s.vendor, "Vendor");
    cmd->add_option("--release-year", s.release_year, "Release year");
}

pipeline::PipelineConfig make_config(const CommonFlags& f)
{
    pipeline::PipelineConfig cfg = f.config.empty() ? pipeline::PipelineConfig{} : pipeline::load_config(f.config);
    if (!f.out.empty()) cfg.output_dir = f.out;
    if (!f.vuln_db.empty()) cfg.snapshots.vuln_db = fs::path(f.vuln_db);
    if (!f.epss.empty()) cfg.snapshots.epss = fs::path(f.epss);
    if (!f.kev.empty()) cfg.snapshots.kev = fs::path(f.kev);
    if (!f.endpoint.empty()) cfg.epss_endpoint = f.endpoint;
    if (f.offline) cfg.offline = true;
    if (f.seed) cfg.seed = *f.seed;
    cfg.validate();
    return cfg;
}

enrichment::Transport transport_for(const pipeline::PipelineConfig& cfg)
{
    return cfg.offline ? pipeline::offline_transport() : enrichment::http_transport();
}

FirmwareImage load_image(const std::string& path, const SampleFlags& s)
{
    SampleMetadata meta{s.sample_id.empty() ? fs::path(path).stem().string() : s.sample_id, s.device_type, s.vendor,
                        s.release_year, ""};
    return FirmwareImage::from_file(meta, path);
}

bool is_config_error(ErrorCode code)
{
    switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::SnapshotParseError:
    case ErrorCode::InvalidRecord:
    case ErrorCode::FeedParseError:
    case ErrorCode::RangeError:
    case ErrorCode::ManifestError:
        return true;
    default:
        return false;
    }
}

void print_summary(const pipeline::TriageReport& r, const fs::path& workspace)
{
    std::size_t critical = 0;
    for (const auto& f : r.findings) {
        critical += f.band == scoring::Band::Critical ? 1 : 0;
    }
    std::cout << r.sample.sample_id << ": " << r.outcome;
    if (!r.outcome_detail.empty()) {
        std::cout << " (" << r.outcome_detail << ")";
    }
    std::cout << ", " << r.component_count << " components, " << r.findings.size() << " findings, " << critical
              << " critical -> " << workspace.string() << "\n";
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Firmware vulnerability triage: extraction, SBOM, matching, enrichment, scoring"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(sbom::kToolVersion));

    CommonFlags flags;
    SampleFlags sample;
    std::string input;
    std::string rootfs;

    auto* analyze = app.add_subcommand("analyze", "Run the full pipeline on one image");
    analyze->add_option("image", input, "Firmware image")->required()->check(CLI::ExistingFile);
    add_common(analyze, flags);
    add_sample(analyze, sample);

    auto* sbom_cmd = app.add_subcommand("sbom", "Extract and write the CycloneDX SBOM only");
    sbom_cmd->add_option("image", input, "Firmware image")->required()->check(CLI::ExistingFile);
    add_common(sbom_cmd, flags);
    add_sample(sbom_cmd, sample);

    auto* score = app.add_subcommand("score", "Match, enrich and score a preserved SBOM");
    score->add_option("sbom", input, "03-sbom.cdx.json")->required()->check(CLI::ExistingFile);
    score->add_option("--rootfs", rootfs, "Root filesystem for context signals (default: sibling 02-rootfs)")
        ->check(CLI::ExistingDirectory);
    add_common(score, flags);

    auto* evaluate = app.add_subcommand("evaluate", "Run the evaluation harness over a corpus manifest");
    evaluate->add_option("manifest", input, "Corpus manifest CSV")->required();
    add_common(evaluate, flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        const auto cfg = make_config(flags);
        const auto transport = transport_for(cfg);
        if (analyze->parsed()) {
            const auto report = pipeline::run_pipeline(load_image(input, sample), cfg, cfg.output_dir, transport);
            print_summary(report, cfg.output_dir);
            return report.ok() ? kExitOk : kExitAnalysis;
        }
        if (sbom_cmd->parsed()) {
            const auto out = pipeline::run_sbom_stage(load_image(input, sample), cfg, cfg.output_dir);
            if (!out) {
                std::cerr << "extraction failed; see " << (cfg.output_dir / pipeline::kLogFile).string() << "\n";
                return kExitAnalysis;
            }
            std::cout << out->string() << "\n";
            return kExitOk;
        }
        if (score->parsed()) {
            // Without --out the findings land next to the SBOM.
            const fs::path ws = flags.out.empty() ? fs::path(input).parent_path() : cfg.output_dir;
            std::optional<fs::path> root;
            if (!rootfs.empty()) {
                root = rootfs;
            }
            const auto report = pipeline::score_sbom(input, cfg, ws.empty() ? fs::path(".") : ws, transport, root);
            print_summary(report, ws);
            return kExitOk;
        }
        const auto metrics = pipeline::evaluate(input, cfg, cfg.output_dir, transport);
        std::cout << pipeline::metrics_json(metrics);
        return kExitOk;
    } catch (const Error& e) {
        std::cerr << "firmtriage: " << e.what() << "\n";
        return is_config_error(e.code()) ? kExitConfig : kExitAnalysis;
    } catch (const std::exception& e) {
        std::cerr << "firmtriage: " << e.what() << "\n";
        return kExitAnalysis;
    }
}
