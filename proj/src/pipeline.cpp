#include "firmtriage/pipeline.hpp"

#include "firmtriage/error.hpp"
#include "firmtriage/io.hpp"
#include "firmtriage/log.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <set>

namespace firmtriage::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;
using scoring::Finding;
using sbom::Component;

// --- configuration ---------------------------------------------------------

namespace {

[[noreturn]] void config_error(const std::string& message, const std::string& where)
{
    throw Error(ErrorCode::ConfigError, message, where);
}

const json& expect(const json& j, json::value_t type, const std::string& where)
{
    const bool ok = type == json::value_t::number_float ? j.is_number()
                    : type == json::value_t::number_unsigned
                        ? j.is_number_unsigned() || (j.is_number_integer() && j.get<std::int64_t>() >= 0)
                        : j.type() == type || (type == json::value_t::number_integer && j.is_number_integer());
    if (!ok) {
        const char* name = type == json::value_t::object    ? "an object"
                           : type == json::value_t::array   ? "an array"
                           : type == json::value_t::string  ? "a string"
                           : type == json::value_t::boolean ? "a boolean"
                           : type == json::value_t::number_float ? "a number"
                                                                 : "an integer";
        config_error(std::string("expected ") + name, where);
    }
    return j;
}

void only_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where)
{
    for (const auto& [key, value] : obj.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
            config_error("unknown key", where.empty() ? key : where + "." + key);
        }
    }
}

std::vector<std::string> string_list(const json& j, const std::string& where)
{
    expect(j, json::value_t::array, where);
    std::vector<std::string> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        out.push_back(expect(j[i], json::value_t::string, where + "[" + std::to_string(i) + "]").get<std::string>());
    }
    return out;
}

double number(const json& j, const std::string& where)
{
    return expect(j, json::value_t::number_float, where).get<double>();
}

fs::path resolve(const fs::path& base, const std::string& p)
{
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

void parse_scoring(const json& j, scoring::ScoringConfig& out)
{
    expect(j, json::value_t::object, "scoring");
    only_keys(j, {"weights", "bands", "confidence_multipliers", "port_keys"}, "scoring");
    if (j.contains("weights")) {
        const json& w = expect(j.at("weights"), json::value_t::object, "scoring.weights");
        only_keys(w, {"b", "e", "c"}, "scoring.weights");
        if (w.contains("b")) out.weights.w_b = number(w.at("b"), "scoring.weights.b");
        if (w.contains("e")) out.weights.w_e = number(w.at("e"), "scoring.weights.e");
        if (w.contains("c")) out.weights.w_c = number(w.at("c"), "scoring.weights.c");
    }
    if (j.contains("bands")) {
        const json& b = expect(j.at("bands"), json::value_t::object, "scoring.bands");
        only_keys(b, {"critical", "high", "medium"}, "scoring.bands");
        if (b.contains("critical")) out.bands.critical = number(b.at("critical"), "scoring.bands.critical");
        if (b.contains("high")) out.bands.high = number(b.at("high"), "scoring.bands.high");
        if (b.contains("medium")) out.bands.medium = number(b.at("medium"), "scoring.bands.medium");
    }
    if (j.contains("confidence_multipliers")) {
        const json& m = expect(j.at("confidence_multipliers"), json::value_t::object, "scoring.confidence_multipliers");
        only_keys(m, {"High", "Medium", "Low"}, "scoring.confidence_multipliers");
        if (m.contains("High")) out.multipliers.high = number(m.at("High"), "scoring.confidence_multipliers.High");
        if (m.contains("Medium")) out.multipliers.medium = number(m.at("Medium"), "scoring.confidence_multipliers.Medium");
        if (m.contains("Low")) out.multipliers.low = number(m.at("Low"), "scoring.confidence_multipliers.Low");
    }
    if (j.contains("port_keys")) {
        out.port_keys = string_list(j.at("port_keys"), "scoring.port_keys");
    }
}

void parse_scan(const json& j, sbom::ScanOptions& out)
{
    expect(j, json::value_t::object, "scan");
    only_keys(j, {"binary_roots", "library_roots", "manifest_paths", "version_files"}, "scan");
    if (j.contains("binary_roots")) out.binary_roots = string_list(j.at("binary_roots"), "scan.binary_roots");
    if (j.contains("library_roots")) out.library_roots = string_list(j.at("library_roots"), "scan.library_roots");
    if (j.contains("manifest_paths")) out.manifest_paths = string_list(j.at("manifest_paths"), "scan.manifest_paths");
    if (j.contains("version_files")) out.version_files = string_list(j.at("version_files"), "scan.version_files");
}

} // namespace

PipelineConfig parse_config(std::string_view json_text, const fs::path& base_dir, std::string_view source)
{
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        config_error(e.what(), std::string(source));
    }
    expect(root, json::value_t::object, "$");
    only_keys(root,
              {"depth_limit", "scoring", "scan", "snapshots", "offline", "epss_endpoint", "adapters", "output_dir",
               "seed", "cvss_critical", "sbom_timestamp", "sbom_serial"},
              "");
    PipelineConfig cfg;
    if (root.contains("depth_limit")) {
        cfg.depth_limit = expect(root.at("depth_limit"), json::value_t::number_integer, "depth_limit").get<int>();
    }
    if (root.contains("scoring")) {
        parse_scoring(root.at("scoring"), cfg.scoring);
    }
    if (root.contains("scan")) {
        parse_scan(root.at("scan"), cfg.scan);
    }
    if (root.contains("snapshots")) {
        const json& s = expect(root.at("snapshots"), json::value_t::object, "snapshots");
        only_keys(s, {"vuln_db", "epss", "kev"}, "snapshots");
        const auto path_of = [&](const char* key) -> std::optional<fs::path> {
            if (!s.contains(key)) {
                return std::nullopt;
            }
            return resolve(base_dir,
                           expect(s.at(key), json::value_t::string, std::string("snapshots.") + key).get<std::string>());
        };
        cfg.snapshots = {path_of("vuln_db"), path_of("epss"), path_of("kev")};
    }
    if (root.contains("offline")) {
        cfg.offline = expect(root.at("offline"), json::value_t::boolean, "offline").get<bool>();
    }
    if (root.contains("epss_endpoint")) {
        cfg.epss_endpoint = expect(root.at("epss_endpoint"), json::value_t::string, "epss_endpoint").get<std::string>();
    }
    if (root.contains("adapters")) {
        const json& a = expect(root.at("adapters"), json::value_t::object, "adapters");
        for (const auto& [name, cmd] : a.items()) {
            const auto format = extraction::parse_format(name);
            if (!format || extraction::has_builtin_unpacker(*format)) {
                config_error("no adapter slot for this format", "adapters." + name);
            }
            cfg.adapters[*format] = expect(cmd, json::value_t::string, "adapters." + name).get<std::string>();
        }
    }
    if (root.contains("output_dir")) {
        cfg.output_dir =
            resolve(base_dir, expect(root.at("output_dir"), json::value_t::string, "output_dir").get<std::string>());
    }
    if (root.contains("seed")) {
        cfg.seed = expect(root.at("seed"), json::value_t::number_unsigned, "seed").get<std::uint64_t>();
    }
    if (root.contains("cvss_critical")) {
        cfg.cvss_critical = number(root.at("cvss_critical"), "cvss_critical");
    }
    if (root.contains("sbom_timestamp")) {
        cfg.sbom_timestamp =
            expect(root.at("sbom_timestamp"), json::value_t::string, "sbom_timestamp").get<std::string>();
    }
    if (root.contains("sbom_serial")) {
        cfg.sbom_serial = expect(root.at("sbom_serial"), json::value_t::string, "sbom_serial").get<std::string>();
    }
    cfg.validate();
    return cfg;
}

PipelineConfig load_config(const fs::path& config_file)
{
    std::string text;
    try {
        text = read_text(config_file);
    } catch (const Error& e) {
        config_error("cannot read config file", config_file.string());
    }
    return parse_config(text, config_file.parent_path(), config_file.string());
}

void PipelineConfig::validate() const
{
    if (depth_limit < 1) {
        config_error("depth_limit must be at least 1", "depth_limit");
    }
    scoring.validate();
    if (!(cvss_critical >= 0.0 && cvss_critical <= 10.0)) {
        config_error("cvss_critical must lie in [0,10]", "cvss_critical");
    }
    const std::pair<const char*, const std::optional<fs::path>*> paths[] = {
        {"snapshots.vuln_db", &snapshots.vuln_db}, {"snapshots.epss", &snapshots.epss}, {"snapshots.kev", &snapshots.kev}};
    for (const auto& [key, path] : paths) {
        if (*path && !fs::is_regular_file(**path)) {
            config_error("file not found: " + (*path)->string(), key);
        }
    }
    if (!offline && epss_endpoint.find("{ids}") == std::string::npos) {
        config_error("EPSS endpoint lacks the {ids} placeholder", "epss_endpoint");
    }
}

// --- stages ----------------------------------------------------------------

Snapshots load_snapshots(const SnapshotPaths& paths, EventLog* log)
{
    Snapshots s;
    if (paths.vuln_db) {
        s.db = matching::load_vuln_db(*paths.vuln_db, log);
    } else if (log != nullptr) {
        log->warn("vuln_db", "no vulnerability snapshot configured; matching yields nothing");
    }
    enrichment::EpssFeed epss;
    enrichment::KevFeed kev;
    if (paths.epss) {
        epss = enrichment::load_epss_snapshot(*paths.epss);
    }
    if (paths.kev) {
        kev = enrichment::load_kev_snapshot(*paths.kev);
    }
    s.feeds = enrichment::EnrichmentSnapshot(std::move(epss), std::move(kev));
    return s;
}

enrichment::Transport offline_transport()
{
    return [](const std::string& url, std::chrono::milliseconds) -> enrichment::HttpResponse {
        throw Error(ErrorCode::NetworkError, "offline mode forbids network access", url);
    };
}

TriageReport score_components(const SampleMetadata& sample, std::vector<Component> components,
                              const extraction::NormalizedFileSystem& tree, const Snapshots& snapshots,
                              const PipelineConfig& config, const enrichment::Transport& transport, EventLog& log,
                              const std::optional<fs::path>& epss_cache)
{
    TriageReport report;
    report.sample = sample;
    auto owned = std::make_shared<const std::vector<Component>>(std::move(components));
    report.components = owned;
    report.component_count = owned->size();
    for (const auto& c : *owned) {
        if (c.unknown_version()) {
            report.manual_review.push_back(c);
        }
    }

    std::vector<matching::RawMatch> matches;
    for (const auto& c : *owned) {
        auto ms = matching::match_component(c, snapshots.db, &log);
        matches.insert(matches.end(), ms.begin(), ms.end());
    }
    log.record("match", sample.sample_id, std::to_string(matches.size()) + " raw matches");

    std::vector<std::string> ids;
    for (const auto& m : matches) {
        ids.push_back(m.vuln->vuln_id);
    }
    enrichment::EnrichmentSnapshot feeds = snapshots.feeds;
    if (config.offline) {
        log.record("enrich", sample.sample_id, "offline: snapshots only");
    } else if (!ids.empty()) {
        enrichment::FetchOptions opts;
        opts.endpoint = config.epss_endpoint;
        feeds = enrichment::enrich_online(feeds, ids, transport, opts, &log, epss_cache);
    }

    std::map<const Component*, scoring::ContextFactor> contexts;
    std::vector<Finding> findings;
    for (const auto& m : matches) {
        auto it = contexts.find(m.component);
        if (it == contexts.end()) {
            it = contexts.emplace(m.component, scoring::context_factor(*m.component, tree, config.scoring.port_keys))
                     .first;
        }
        findings.push_back(scoring::score_match(m, feeds, it->second, config.scoring));
    }
    report.findings = scoring::rank(std::move(findings));
    report.provenance = {feeds.epss_date(), feeds.kev_date(), snapshots.db.digest()};
    log.record("score", sample.sample_id, std::to_string(report.findings.size()) + " findings");
    return report;
}

namespace {

void clear_outputs(const fs::path& workspace)
{
    std::error_code ec;
    for (const char* name : {kSbomFile, kFindingsFile, kReportFile, kManifestFile, kEpssCacheFile}) {
        fs::remove(workspace / name, ec);
    }
}

void prepare_workspace(const fs::path& workspace)
{
    std::error_code ec;
    fs::create_directories(workspace, ec);
    if (ec || !fs::is_directory(workspace)) {
        throw Error(ErrorCode::IoError, "cannot create workspace", workspace.string());
    }
}

ojson sample_json(const SampleMetadata& s)
{
    ojson j;
    j["sample_id"] = s.sample_id;
    j["device_type"] = s.device_type;
    j["vendor"] = s.vendor;
    j["release_year"] = s.release_year;
    j["sha256"] = s.sha256;
    return j;
}

void write_manifest(const TriageReport& report, const PipelineConfig& config, const fs::path& workspace,
                    const std::string& started, std::string_view command)
{
    ojson j;
    j["tool"] = {{"name", sbom::kToolName}, {"version", report.tool_version}};
    j["command"] = command;
    j["sample"] = sample_json(report.sample);
    j["started"] = started;
    j["finished"] = utc_timestamp();
    j["outcome"] = report.outcome;
    j["outcome_detail"] = report.outcome_detail;
    j["offline"] = config.offline;
    j["provenance"] = {{"epss_date", report.provenance.epss_date},
                       {"kev_date", report.provenance.kev_date},
                       {"vuln_db_digest", report.provenance.vuln_db_digest}};
    j["config"] = {{"depth_limit", config.depth_limit}, {"seed", config.seed}, {"epss_endpoint", config.epss_endpoint}};
    ojson artifacts = ojson::array();
    for (const char* name : {kSbomFile, kFindingsFile, kReportFile, kEpssCacheFile}) {
        const fs::path p = workspace / name;
        if (fs::is_regular_file(p)) {
            artifacts.push_back({{"path", name}, {"sha256", sha256_hex(read_file(p))}});
        }
    }
    j["artifacts"] = std::move(artifacts);
    write_text(workspace / kManifestFile, j.dump(2) + "\n");
}

std::string failure_detail(std::string_view stage, const std::exception& e)
{
    return std::string(stage) + ": " + e.what();
}

} // namespace

TriageReport run_pipeline(const FirmwareImage& image, const PipelineConfig& config, const fs::path& workspace,
                          const enrichment::Transport& transport)
{
    config.validate();
    const Snapshots snapshots = load_snapshots(config.snapshots);
    return run_pipeline(image, config, workspace, transport, snapshots);
}

TriageReport run_pipeline(const FirmwareImage& image, const PipelineConfig& config, const fs::path& workspace,
                          const enrichment::Transport& transport, const Snapshots& snapshots)
{
    config.validate();
    prepare_workspace(workspace);
    clear_outputs(workspace);
    EventLog log(workspace / kLogFile);
    const std::string started = utc_timestamp();

    TriageReport report;
    report.sample = image.meta;
    report.provenance = {snapshots.feeds.epss_date(), snapshots.feeds.kev_date(), snapshots.db.digest()};

    extraction::NormalizedFileSystem tree;
    try {
        tree = extraction::extract_recursive(image, workspace, {config.depth_limit, config.adapters}, log);
        if (!tree.ok()) {
            report.outcome = std::string(extraction::to_string(*tree.failure_reason));
            report.outcome_detail = "extraction: no readable root filesystem";
        }
    } catch (const std::exception& e) {
        report.outcome = kOutcomeError;
        report.outcome_detail = failure_detail("extraction", e);
    }

    if (report.ok()) {
        const char* stage = "sbom";
        try {
            auto components = sbom::identify_components(tree, config.scan, &log);
            const std::string text =
                sbom::build_sbom(std::move(components), image.meta, {config.sbom_timestamp, config.sbom_serial});
            write_text(workspace / kSbomFile, text);
            log.record("sbom", kSbomFile, "written");
            stage = "scoring";
            auto doc = sbom::parse_sbom(text);
            report = score_components(doc.metadata.sample, std::move(doc.components), tree, snapshots, config,
                                      transport, log, workspace / kEpssCacheFile);
        } catch (const std::exception& e) {
            report.outcome = kOutcomeError;
            report.outcome_detail = failure_detail(stage, e);
        }
    }
    if (!report.ok()) {
        log.record("pipeline", image.meta.sample_id, "excluded: " + report.outcome + " " + report.outcome_detail);
    }
    emit_report(report, workspace);
    write_manifest(report, config, workspace, started, "analyze");
    return report;
}

std::optional<fs::path> run_sbom_stage(const FirmwareImage& image, const PipelineConfig& config,
                                       const fs::path& workspace)
{
    config.validate();
    prepare_workspace(workspace);
    clear_outputs(workspace);
    EventLog log(workspace / kLogFile);
    const auto tree = extraction::extract_recursive(image, workspace, {config.depth_limit, config.adapters}, log);
    if (!tree.ok()) {
        log.record("pipeline", image.meta.sample_id,
                   "excluded: " + std::string(extraction::to_string(*tree.failure_reason)));
        return std::nullopt;
    }
    auto components = sbom::identify_components(tree, config.scan, &log);
    const fs::path out = workspace / kSbomFile;
    write_text(out, sbom::build_sbom(std::move(components), image.meta, {config.sbom_timestamp, config.sbom_serial}));
    log.record("sbom", kSbomFile, "written");
    return out;
}

TriageReport score_sbom(const fs::path& sbom_file, const PipelineConfig& config, const fs::path& workspace,
                        const enrichment::Transport& transport, std::optional<fs::path> rootfs)
{
    config.validate();
    const Snapshots snapshots = load_snapshots(config.snapshots);
    auto doc = sbom::parse_sbom(read_text(sbom_file));
    prepare_workspace(workspace);
    for (const char* name : {kFindingsFile, kReportFile, kManifestFile, kEpssCacheFile}) {
        std::error_code ec;
        fs::remove(workspace / name, ec);
    }
    EventLog log(workspace / kLogFile);
    const std::string started = utc_timestamp();
    if (!rootfs && fs::is_directory(sbom_file.parent_path() / kRootfsDir)) {
        rootfs = sbom_file.parent_path() / kRootfsDir;
    }
    extraction::NormalizedFileSystem tree;
    if (rootfs) {
        tree = extraction::normalize(*rootfs);
    } else {
        log.warn(sbom_file.string(), "no root filesystem; context signals unavailable");
    }
    TriageReport report = score_components(doc.metadata.sample, std::move(doc.components), tree, snapshots, config,
                                           transport, log, workspace / kEpssCacheFile);
    emit_report(report, workspace);
    write_manifest(report, config, workspace, started, "score");
    return report;
}

// --- reports ---------------------------------------------------------------

namespace {

ojson optional_number(const std::optional<double>& v)
{
    return v ? ojson(*v) : ojson(nullptr);
}

ojson component_json(const Component& c)
{
    ojson j;
    j["name"] = c.name;
    j["version"] = c.version;
    j["evidence_paths"] = c.evidence_paths;
    return j;
}

} // namespace

std::string report_json(const TriageReport& report)
{
    ojson j;
    j["sample"] = sample_json(report.sample);
    j["outcome"] = report.outcome;
    j["outcome_detail"] = report.outcome_detail;
    j["component_count"] = report.component_count;
    ojson review = ojson::array();
    for (const auto& c : report.manual_review) {
        review.push_back(component_json(c));
    }
    j["manual_review"] = std::move(review);
    ojson findings = ojson::array();
    for (std::size_t i = 0; i < report.findings.size(); ++i) {
        const Finding& f = report.findings[i];
        ojson fj;
        fj["rank"] = i + 1;
        fj["vuln_id"] = f.vuln_id;
        fj["component"] = component_json(*f.component);
        fj["matched_on"] = matching::to_string(f.matched_on);
        fj["confidence"] = matching::to_string(f.confidence);
        fj["cvss_base"] = optional_number(f.cvss_base);
        fj["epss"] = optional_number(f.epss);
        fj["kev"] = f.kev;
        fj["factors"] = {{"b", f.factors.b},
                         {"e", f.factors.e},
                         {"c", f.factors.c},
                         {"b_defaulted", f.factors.b_defaulted},
                         {"e_missing", f.factors.e_missing}};
        fj["rps"] = f.rps;
        fj["adjusted_rps"] = f.adjusted_rps;
        fj["band"] = scoring::to_string(f.band);
        ojson ctx = ojson::array();
        for (const auto& s : f.context_evidence) {
            ctx.push_back({{"kind", scoring::to_string(s.kind)}, {"path", s.evidence_path}, {"detail", s.detail}});
        }
        fj["context_evidence"] = std::move(ctx);
        fj["summary"] = f.summary;
        findings.push_back(std::move(fj));
    }
    j["findings"] = std::move(findings);
    j["provenance"] = {{"epss_date", report.provenance.epss_date},
                       {"kev_date", report.provenance.kev_date},
                       {"vuln_db_digest", report.provenance.vuln_db_digest}};
    j["tool"] = {{"name", sbom::kToolName}, {"version", report.tool_version}};
    return j.dump(2) + "\n";
}

namespace {

[[noreturn]] void report_error(const std::string& message, const std::string& where)
{
    throw Error(ErrorCode::SchemaViolation, message, where);
}

const json& field(const json& obj, const char* key, const std::string& where)
{
    if (!obj.is_object() || !obj.contains(key)) {
        report_error("missing field", where + "." + key);
    }
    return obj.at(key);
}

template <typename T>
T get(const json& obj, const char* key, const std::string& where)
{
    try {
        return field(obj, key, where).get<T>();
    } catch (const json::type_error&) {
        report_error("wrong type", where + "." + key);
    }
}

std::optional<double> get_optional(const json& obj, const char* key, const std::string& where)
{
    const json& v = field(obj, key, where);
    if (v.is_null()) {
        return std::nullopt;
    }
    if (!v.is_number()) {
        report_error("wrong type", where + "." + key);
    }
    return v.get<double>();
}

Component parse_component(const json& j, const std::string& where)
{
    Component c;
    c.name = get<std::string>(j, "name", where);
    c.version = get<std::string>(j, "version", where);
    c.evidence_paths = get<std::vector<std::string>>(j, "evidence_paths", where);
    c.evidence_kind = c.unknown_version() ? sbom::EvidenceKind::FilenameOnly : sbom::EvidenceKind::VersionString;
    return c;
}

} // namespace

TriageReport parse_report_json(std::string_view json_text)
{
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        report_error(e.what(), "$");
    }
    TriageReport r;
    const json& s = field(root, "sample", "$");
    r.sample = {get<std::string>(s, "sample_id", "sample"), get<std::string>(s, "device_type", "sample"),
                get<std::string>(s, "vendor", "sample"), get<int>(s, "release_year", "sample"),
                get<std::string>(s, "sha256", "sample")};
    r.outcome = get<std::string>(root, "outcome", "$");
    r.outcome_detail = get<std::string>(root, "outcome_detail", "$");
    r.component_count = get<std::size_t>(root, "component_count", "$");
    const json& review = field(root, "manual_review", "$");
    for (std::size_t i = 0; i < review.size(); ++i) {
        r.manual_review.push_back(parse_component(review[i], "manual_review[" + std::to_string(i) + "]"));
    }

    const json& findings = field(root, "findings", "$");
    auto owned = std::make_shared<std::vector<Component>>();
    owned->reserve(findings.size());
    std::vector<std::size_t> component_index;
    for (std::size_t i = 0; i < findings.size(); ++i) {
        const std::string where = "findings[" + std::to_string(i) + "]";
        const json& fj = findings[i];
        Component c = parse_component(field(fj, "component", where), where + ".component");
        auto it = std::find(owned->begin(), owned->end(), c);
        component_index.push_back(static_cast<std::size_t>(it - owned->begin()));
        if (it == owned->end()) {
            owned->push_back(std::move(c));
        }
        Finding f;
        f.vuln_id = get<std::string>(fj, "vuln_id", where);
        const auto tier = matching::parse_match_tier(get<std::string>(fj, "matched_on", where));
        const auto conf = matching::parse_confidence(get<std::string>(fj, "confidence", where));
        const auto band = scoring::parse_band(get<std::string>(fj, "band", where));
        if (!tier || !conf || !band) {
            report_error("unknown enumeration value", where);
        }
        f.matched_on = *tier;
        f.confidence = *conf;
        f.band = *band;
        f.cvss_base = get_optional(fj, "cvss_base", where);
        f.epss = get_optional(fj, "epss", where);
        f.kev = get<bool>(fj, "kev", where);
        const json& fac = field(fj, "factors", where);
        f.factors = {get<double>(fac, "b", where + ".factors"), get<double>(fac, "e", where + ".factors"),
                     get<double>(fac, "c", where + ".factors"), get<bool>(fac, "b_defaulted", where + ".factors"),
                     get<bool>(fac, "e_missing", where + ".factors")};
        f.rps = get<double>(fj, "rps", where);
        f.adjusted_rps = get<double>(fj, "adjusted_rps", where);
        const json& ctx = field(fj, "context_evidence", where);
        for (std::size_t k = 0; k < ctx.size(); ++k) {
            const std::string cw = where + ".context_evidence[" + std::to_string(k) + "]";
            const auto kind = scoring::parse_signal_kind(get<std::string>(ctx[k], "kind", cw));
            if (!kind) {
                report_error("unknown signal kind", cw + ".kind");
            }
            f.context_evidence.push_back(
                {*kind, get<std::string>(ctx[k], "path", cw), get<std::string>(ctx[k], "detail", cw)});
        }
        f.summary = get<std::string>(fj, "summary", where);
        r.findings.push_back(std::move(f));
    }
    for (std::size_t i = 0; i < r.findings.size(); ++i) {
        r.findings[i].component = &(*owned)[component_index[i]];
    }
    r.components = owned;

    const json& prov = field(root, "provenance", "$");
    r.provenance = {get<std::string>(prov, "epss_date", "provenance"), get<std::string>(prov, "kev_date", "provenance"),
                    get<std::string>(prov, "vuln_db_digest", "provenance")};
    r.tool_version = get<std::string>(field(root, "tool", "$"), "version", "tool");
    return r;
}

namespace {

std::string cell(std::string_view s)
{
    std::string out;
    for (const char ch : s) {
        if (ch == '|') {
            out += "\\|";
        } else if (ch == '\n' || ch == '\r') {
            out += ' ';
        } else {
            out += ch;
        }
    }
    return out;
}

std::string or_na(const std::string& s)
{
    return s.empty() ? "n/a" : s;
}

std::string evidence_cell(const Finding& f)
{
    std::vector<std::string> parts;
    for (const auto& s : f.context_evidence) {
        std::string p = std::string(scoring::to_string(s.kind));
        if (s.kind == scoring::SignalKind::OpenPort) {
            p += " " + s.detail + " (" + s.evidence_path + ")";
        } else {
            p += " " + s.evidence_path;
        }
        parts.push_back(std::move(p));
    }
    if (f.kev) {
        parts.emplace_back("KEV");
    }
    if (f.factors.b_defaulted) {
        parts.emplace_back("CVSS defaulted");
    }
    if (f.factors.e_missing) {
        parts.emplace_back("no EPSS/KEV data");
    }
    if (parts.empty()) {
        return "-";
    }
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        out += (i ? "; " : "") + parts[i];
    }
    return cell(out);
}

std::string fixed2(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

} // namespace

std::string report_markdown(const TriageReport& r)
{
    std::string md = "# Firmware triage report: " + cell(r.sample.sample_id) + "\n\n";
    md += "- Device type: " + or_na(r.sample.device_type) + "\n";
    md += "- Vendor: " + or_na(r.sample.vendor) + "\n";
    md += "- Release year: " + (r.sample.release_year ? std::to_string(r.sample.release_year) : "n/a") + "\n";
    md += "- SHA-256: " + or_na(r.sample.sha256) + "\n";
    md += "- Outcome: " + r.outcome + (r.outcome_detail.empty() ? "" : " (" + r.outcome_detail + ")") + "\n";
    md += "- Components: " + std::to_string(r.component_count) + "\n";
    md += "- EPSS snapshot: " + or_na(r.provenance.epss_date) + "\n";
    md += "- KEV snapshot: " + or_na(r.provenance.kev_date) + "\n";
    md += "- Vulnerability DB digest: " + or_na(r.provenance.vuln_db_digest) + "\n";
    md += "- Tool: " + std::string(sbom::kToolName) + " " + r.tool_version + "\n\n";

    md += "## Findings\n\n";
    if (r.findings.empty()) {
        md += "No findings.\n";
    } else {
        md += "| Rank | CVE | Component | Confidence | RPS | Band | Evidence |\n";
        md += "|---:|---|---|---|---:|---|---|\n";
        for (std::size_t i = 0; i < r.findings.size(); ++i) {
            const Finding& f = r.findings[i];
            md += "| " + std::to_string(i + 1) + " | " + cell(f.vuln_id) + " | " +
                  cell(f.component->name + " " + f.component->version) + " | " +
                  std::string(matching::to_string(f.confidence)) + " | " + fixed2(f.adjusted_rps) + " | " +
                  std::string(scoring::to_string(f.band)) + " | " + evidence_cell(f) + " |\n";
        }
    }

    md += "\n## Manual review\n\n";
    if (r.manual_review.empty()) {
        md += "No components with unknown versions.\n";
    } else {
        for (const auto& c : r.manual_review) {
            md += "- " + cell(c.name) + " (" + cell(c.evidence_paths.empty() ? "" : c.evidence_paths.front()) +
                  "): version unknown\n";
        }
    }
    return md;
}

void emit_report(const TriageReport& report, const fs::path& workspace)
{
    write_text(workspace / kFindingsFile, report_json(report));
    write_text(workspace / kReportFile, report_markdown(report));
}

// --- evaluation ------------------------------------------------------------

std::size_t strings_baseline(const FirmwareImage& image)
{
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& c : sbom::extract_version_strings(image.image_bytes, "")) {
        seen.emplace(to_lower(c.product), c.version);
    }
    return seen.size();
}

std::vector<CorpusEntry> parse_corpus_manifest(std::string_view csv_text, const fs::path& base_dir,
                                               std::string_view source)
{
    static constexpr std::string_view kHeader = "sample_id,device_type,vendor,release_year,image_path";
    std::vector<CorpusEntry> out;
    std::set<std::string> ids;
    bool header = false;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= csv_text.size()) {
        auto nl = csv_text.find('\n', pos);
        if (nl == std::string_view::npos) {
            nl = csv_text.size();
        }
        std::string_view line = csv_text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        const std::string where = std::string(source) + " line " + std::to_string(line_no);
        if (trim(line).empty()) {
            continue;
        }
        if (!header) {
            if (trim(line) != kHeader) {
                throw Error(ErrorCode::ManifestError, "expected header " + std::string(kHeader), where);
            }
            header = true;
            continue;
        }
        std::vector<std::string> cols;
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            cols.emplace_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
            if (comma == std::string_view::npos) {
                break;
            }
            start = comma + 1;
        }
        if (cols.size() != 5) {
            throw Error(ErrorCode::ManifestError, "expected 5 columns", where);
        }
        const std::string& id = cols[0];
        if (id.empty() || id == "." || id == ".." ||
            !std::all_of(id.begin(), id.end(), [](char ch) {
                return std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.';
            })) {
            throw Error(ErrorCode::ManifestError, "sample_id must be [A-Za-z0-9._-]+", where);
        }
        if (!ids.insert(id).second) {
            throw Error(ErrorCode::ManifestError, "duplicate sample_id " + id, where);
        }
        int year = 0;
        const auto& y = cols[3];
        if (!y.empty()) {
            const auto [p, ec] = std::from_chars(y.data(), y.data() + y.size(), year);
            if (ec != std::errc{} || p != y.data() + y.size()) {
                throw Error(ErrorCode::ManifestError, "release_year is not an integer", where);
            }
        }
        if (cols[4].empty()) {
            throw Error(ErrorCode::ManifestError, "empty image_path", where);
        }
        out.push_back({{id, cols[1], cols[2], year, ""}, resolve(base_dir, cols[4])});
    }
    if (out.empty()) {
        throw Error(ErrorCode::ManifestError, "corpus is empty", std::string(source));
    }
    return out;
}

std::vector<CorpusEntry> load_corpus_manifest(const fs::path& manifest_file)
{
    std::string text;
    try {
        text = read_text(manifest_file);
    } catch (const Error&) {
        throw Error(ErrorCode::ManifestError, "cannot read corpus manifest", manifest_file.string());
    }
    return parse_corpus_manifest(text, manifest_file.parent_path(), manifest_file.string());
}

std::vector<std::string> spot_check(const std::vector<std::string>& finding_ids, std::uint64_t seed, double fraction)
{
    const std::size_t total = finding_ids.size();
    // The epsilon keeps 0.05 x 60 from rounding up to 4.
    const auto n = std::min(total, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(total) - 1e-9)));
    std::vector<std::size_t> idx(total);
    std::iota(idx.begin(), idx.end(), 0);
    // Partial Fisher-Yates on the raw engine output keeps draws identical across standard libraries.
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        std::swap(idx[i], idx[i + rng() % (total - i)]);
    }
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
    std::vector<std::string> out;
    for (const auto i : idx) {
        out.push_back(finding_ids[i]);
    }
    return out;
}

EvaluationMetrics evaluate(const fs::path& corpus_manifest, const PipelineConfig& config, const fs::path& out_root,
                           const enrichment::Transport& transport)
{
    config.validate();
    const auto entries = load_corpus_manifest(corpus_manifest);
    const Snapshots snapshots = load_snapshots(config.snapshots);
    prepare_workspace(out_root);

    EvaluationMetrics m;
    m.total = entries.size();
    std::vector<std::string> finding_ids;
    for (const auto& e : entries) {
        SampleMetrics s;
        s.sample_id = e.meta.sample_id;
        const fs::path ws = out_root / e.meta.sample_id;
        if (!fs::is_regular_file(e.image_path)) {
            TriageReport missing;
            missing.sample = e.meta;
            missing.outcome = kOutcomeMissing;
            missing.outcome_detail = "image not found: " + e.image_path.string();
            prepare_workspace(ws);
            emit_report(missing, ws);
            s.outcome = missing.outcome;
            m.samples.push_back(s);
            continue;
        }
        const auto image = FirmwareImage::from_file(e.meta, e.image_path);
        s.strings_baseline_count = strings_baseline(image);
        const TriageReport report = run_pipeline(image, config, ws, transport, snapshots);
        s.outcome = report.outcome;
        if (report.ok()) {
            ++m.extracted;
            s.pipeline_count = report.component_count;
            s.finding_count = report.findings.size();
            for (const auto& f : report.findings) {
                s.critical_band_count_rps += f.adjusted_rps >= config.scoring.bands.critical ? 1 : 0;
                s.critical_count_cvss_only += f.cvss_base && *f.cvss_base >= config.cvss_critical ? 1 : 0;
                finding_ids.push_back(e.meta.sample_id + "/" + f.vuln_id + "/" + f.component->name + "@" +
                                      f.component->version);
            }
        }
        m.samples.push_back(s);
    }
    m.extraction_success_rate = static_cast<double>(m.extracted) / static_cast<double>(m.total);
    m.spot_check_sample = spot_check(finding_ids, config.seed);
    write_text(out_root / "evaluation.json", metrics_json(m));
    return m;
}

std::string metrics_json(const EvaluationMetrics& m)
{
    ojson j;
    j["total"] = m.total;
    j["extracted"] = m.extracted;
    j["extraction_success_rate"] = m.extraction_success_rate;
    ojson samples = ojson::array();
    for (const auto& s : m.samples) {
        ojson sj;
        sj["sample_id"] = s.sample_id;
        sj["outcome"] = s.outcome;
        sj["component_visibility"] = {{"pipeline_count", s.pipeline_count},
                                      {"strings_baseline_count", s.strings_baseline_count}};
        sj["triage_efficiency"] = {{"critical_band_count_rps", s.critical_band_count_rps},
                                   {"critical_count_cvss_only", s.critical_count_cvss_only}};
        sj["finding_count"] = s.finding_count;
        samples.push_back(std::move(sj));
    }
    j["samples"] = std::move(samples);
    j["spot_check_sample"] = m.spot_check_sample;
    return j.dump(2) + "\n";
}

} // namespace firmtriage::pipeline
