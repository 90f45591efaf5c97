#include "firmtriage/error.hpp"
#include "firmtriage/pipeline.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <set>

using namespace firmtriage;
using namespace firmtriage::pipeline;
using test::fixture;
using test::golden;
using test::put;
using test::TempDir;
namespace fs = std::filesystem;

namespace {

SampleMetadata golden_meta()
{
    return {"FW-GOLDEN", "Router", "Acme", 2017, ""};
}

PipelineConfig golden_config()
{
    return load_config(fixture("golden_config.json"));
}

enrichment::Transport counting_transport(std::atomic<int>& calls)
{
    return [&calls](const std::string& url, std::chrono::milliseconds) -> enrichment::HttpResponse {
        ++calls;
        throw Error(ErrorCode::NetworkError, "refused", url);
    };
}

ErrorCode code_of(const std::function<void()>& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no Error thrown";
    return ErrorCode::IoError;
}

} // namespace

TEST(PipelineConfig, DefaultsAreValid)
{
    EXPECT_NO_THROW(PipelineConfig{}.validate());
}

TEST(PipelineConfig, ParsesAndResolvesRelativePaths)
{
    const auto cfg = golden_config();
    EXPECT_TRUE(cfg.offline);
    EXPECT_EQ(cfg.seed, 20240101U);
    ASSERT_TRUE(cfg.snapshots.vuln_db);
    EXPECT_EQ(*cfg.snapshots.vuln_db, fixture("snapshots/vulndb_golden.json"));
    EXPECT_EQ(cfg.sbom_timestamp, "2024-01-01T00:00:00Z");
}

TEST(PipelineConfig, ScoringSection)
{
    const auto cfg = parse_config(R"({"scoring": {"weights": {"b": 2, "e": 5, "c": 3},
        "bands": {"critical": 80, "high": 60, "medium": 30},
        "confidence_multipliers": {"Medium": 0.8}, "port_keys": ["port"]},
        "adapters": {"SquashFS": "unsquashfs -d {output} {input}"}, "depth_limit": 4})",
                                  "/");
    EXPECT_DOUBLE_EQ(cfg.scoring.weights.w_e, 5.0);
    EXPECT_DOUBLE_EQ(cfg.scoring.bands.critical, 80.0);
    EXPECT_DOUBLE_EQ(cfg.scoring.multipliers.medium, 0.8);
    EXPECT_DOUBLE_EQ(cfg.scoring.multipliers.low, 0.5);
    EXPECT_EQ(cfg.scoring.port_keys, std::vector<std::string>{"port"});
    EXPECT_EQ(cfg.adapters.at(extraction::Format::SquashFS), "unsquashfs -d {output} {input}");
    EXPECT_EQ(cfg.depth_limit, 4);
}

TEST(PipelineConfig, Rejections)
{
    for (const char* text : {
             R"({"bogus": 1})",
             R"({"scoring": {"bands": {"critical": 60, "high": 70, "medium": 40}}})",
             R"({"scoring": {"weights": {"b": -1}}})",
             R"({"snapshots": {"vuln_db": "does-not-exist.json"}})",
             R"({"depth_limit": 0})",
             R"({"depth_limit": "8"})",
             R"({"adapters": {"Gzip": "gunzip"}})",
             R"({"epss_endpoint": "https://example.invalid/epss"})",
             R"({"cvss_critical": 11})",
             R"([1, 2])",
             "{not json",
         }) {
        EXPECT_EQ(code_of([&] { parse_config(text, fixture("")); }), ErrorCode::ConfigError) << text;
    }
}

TEST(PipelineConfig, ErrorNamesKey)
{
    try {
        parse_config(R"({"scoring": {"weights": {"x": 1}}})", "/");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.where(), "scoring.weights.x");
    }
}

TEST(RunPipeline, GoldenArtifactsByteIdentical)
{
    TempDir ws;
    std::atomic<int> calls{0};
    const auto image = FirmwareImage::from_file(golden_meta(), fixture("golden.img"));
    const auto report = run_pipeline(image, golden_config(), ws.path(), counting_transport(calls));
    ASSERT_TRUE(report.ok()) << report.outcome_detail;
    for (const char* name : {kSbomFile, kFindingsFile, kReportFile}) {
        EXPECT_EQ(read_text(ws / name), read_text(golden(std::string("e2e/") + name))) << name;
    }
    EXPECT_EQ(calls.load(), 0);
    for (const char* name : {kManifestFile, kLogFile}) {
        EXPECT_TRUE(fs::is_regular_file(ws / name)) << name;
    }
    EXPECT_TRUE(fs::is_directory(ws / kCarveDir));
    EXPECT_TRUE(fs::is_directory(ws / kRootfsDir));
}

TEST(RunPipeline, WorkedExampleFinding)
{
    TempDir ws;
    const auto image = FirmwareImage::from_file(golden_meta(), fixture("golden.img"));
    const auto report = run_pipeline(image, golden_config(), ws.path(), offline_transport());
    ASSERT_EQ(report.findings.size(), 1U);
    const auto& f = report.findings[0];
    EXPECT_EQ(f.vuln_id, "CVE-0000-0001");
    EXPECT_EQ(f.component->name, "dropbear");
    EXPECT_DOUBLE_EQ(f.rps, 92.5);
    EXPECT_EQ(f.band, scoring::Band::Critical);
}

TEST(RunPipeline, ReportInvariants)
{
    TempDir ws;
    const auto image = FirmwareImage::from_file(golden_meta(), fixture("golden.img"));
    auto cfg = golden_config();
    cfg.snapshots.vuln_db = fixture("snapshots/vulndb_corpus.json");
    const auto report = run_pipeline(image, cfg, ws.path(), offline_transport());
    const auto doc = sbom::parse_sbom(read_text(ws / kSbomFile));
    ASSERT_EQ(report.findings.size(), 3U);
    for (const auto& f : report.findings) {
        EXPECT_NE(std::find(doc.components.begin(), doc.components.end(), *f.component), doc.components.end())
            << f.vuln_id;
    }
    ASSERT_EQ(report.manual_review.size(), 1U);
    for (const auto& c : report.manual_review) {
        EXPECT_EQ(c.version, sbom::kUnknownVersion);
    }
}

TEST(RunPipeline, RandomBytesReportsNoFilesystem)
{
    TempDir tmp;
    const auto image = FirmwareImage::from_bytes({"FW-NOISE", "", "", 0, ""}, test::random_bytes(4096, 99));
    const auto report = run_pipeline(image, golden_config(), tmp / "ws", offline_transport());
    EXPECT_EQ(report.outcome, "NoFilesystem");
    EXPECT_TRUE(report.findings.empty());
    EXPECT_FALSE(fs::exists(tmp / "ws" / kSbomFile));
    EXPECT_NE(read_text(tmp / "ws" / kReportFile).find("No findings."), std::string::npos);
    EXPECT_NE(read_text(tmp / "ws" / kFindingsFile).find("\"NoFilesystem\""), std::string::npos);
}

TEST(RunPipeline, EncryptedImageIsExcluded)
{
    TempDir ws;
    const auto image = FirmwareImage::from_file({"FW-ENC", "", "", 0, ""}, fixture("encrypted.img"));
    const auto report = run_pipeline(image, golden_config(), ws.path(), offline_transport());
    EXPECT_EQ(report.outcome, "Encrypted");
    EXPECT_EQ(report.component_count, 0U);
}

TEST(RunPipeline, EmptyVulnSnapshotGivesSbomWithoutFindings)
{
    TempDir tmp;
    put(tmp.path(), "empty.json", "");
    auto cfg = golden_config();
    cfg.snapshots.vuln_db = tmp / "empty.json";
    const auto image = FirmwareImage::from_file(golden_meta(), fixture("golden.img"));
    const auto report = run_pipeline(image, cfg, tmp / "ws", offline_transport());
    EXPECT_TRUE(report.ok());
    EXPECT_EQ(report.component_count, 4U);
    EXPECT_TRUE(report.findings.empty());
    EXPECT_EQ(sbom::parse_sbom(read_text(tmp / "ws" / kSbomFile)).components.size(), 4U);
}

TEST(RunPipeline, ConfigErrorAbortsBeforeExtraction)
{
    TempDir tmp;
    auto cfg = golden_config();
    cfg.scoring.bands.high = 95;
    const auto image = FirmwareImage::from_file(golden_meta(), fixture("golden.img"));
    EXPECT_EQ(code_of([&] { run_pipeline(image, cfg, tmp / "ws", offline_transport()); }), ErrorCode::ConfigError);
    EXPECT_FALSE(fs::exists(tmp / "ws"));
}

TEST(RunPipeline, OnlineEnrichmentMergesAndCaches)
{
    TempDir ws;
    auto cfg = golden_config();
    cfg.offline = false;
    cfg.epss_endpoint = "http://epss.test/data?cve={ids}";
    std::vector<std::string> urls;
    const enrichment::Transport fake = [&](const std::string& url, std::chrono::milliseconds) {
        urls.push_back(url);
        return enrichment::HttpResponse{
            200, R"({"data": [{"cve": "CVE-0000-0001", "epss": "0.5", "percentile": "0.99", "date": "2024-02-02"}]})"};
    };
    const auto image = FirmwareImage::from_file(golden_meta(), fixture("golden.img"));
    const auto report = run_pipeline(image, cfg, ws.path(), fake);
    ASSERT_EQ(urls, std::vector<std::string>{"http://epss.test/data?cve=CVE-0000-0001"});
    ASSERT_EQ(report.findings.size(), 1U);
    EXPECT_EQ(report.findings[0].epss, 0.5);
    EXPECT_EQ(report.provenance.epss_date, "2024-02-02");
    EXPECT_TRUE(fs::is_regular_file(ws / kEpssCacheFile));
}

TEST(RunPipeline, OnlineProtocolErrorIsRecorded)
{
    TempDir ws;
    auto cfg = golden_config();
    cfg.offline = false;
    cfg.epss_endpoint = "http://epss.test/data?cve={ids}";
    const enrichment::Transport server_error = [](const std::string&, std::chrono::milliseconds) {
        return enrichment::HttpResponse{404, ""};
    };
    const auto image = FirmwareImage::from_file(golden_meta(), fixture("golden.img"));
    // A non-retryable status is a protocol failure: recorded, not swallowed.
    const auto report = run_pipeline(image, cfg, ws.path(), server_error);
    EXPECT_EQ(report.outcome, kOutcomeError);
    EXPECT_NE(report.outcome_detail.find("ProtocolError"), std::string::npos);
    EXPECT_TRUE(fs::is_regular_file(ws / kFindingsFile));
}

TEST(RunPipeline, NetworkFailureFallsBackToSnapshot)
{
    TempDir ws;
    auto cfg = golden_config();
    cfg.offline = false;
    cfg.epss_endpoint = "http://epss.test/data?cve={ids}";
    std::atomic<int> calls{0};
    const auto image = FirmwareImage::from_file(golden_meta(), fixture("golden.img"));
    const auto report = run_pipeline(image, cfg, ws.path(), counting_transport(calls));
    EXPECT_EQ(calls.load(), 4);
    ASSERT_TRUE(report.ok());
    EXPECT_EQ(report.findings.at(0).epss, 0.05);
    EXPECT_EQ(read_text(ws / kFindingsFile), read_text(golden("e2e/04-findings.json")));
    EXPECT_FALSE(fs::exists(ws / kEpssCacheFile));
}

TEST(StageIsolation, ScoreFromPreservedSbomIsByteIdentical)
{
    TempDir ws;
    auto cfg = golden_config();
    cfg.snapshots.vuln_db = fixture("snapshots/vulndb_corpus.json");
    const auto image = FirmwareImage::from_file(golden_meta(), fixture("golden.img"));
    run_pipeline(image, cfg, ws.path(), offline_transport());
    const std::string findings = read_text(ws / kFindingsFile);
    const std::string report = read_text(ws / kReportFile);
    fs::remove(ws / kFindingsFile);
    fs::remove(ws / kReportFile);
    score_sbom(ws / kSbomFile, cfg, ws.path(), offline_transport());
    EXPECT_EQ(read_text(ws / kFindingsFile), findings);
    EXPECT_EQ(read_text(ws / kReportFile), report);
}

TEST(StageIsolation, SbomStageThenScoreMatchesFullRun)
{
    TempDir a;
    TempDir b;
    const auto cfg = golden_config();
    const auto image = FirmwareImage::from_file(golden_meta(), fixture("golden.img"));
    run_pipeline(image, cfg, a.path(), offline_transport());
    const auto sbom_path = run_sbom_stage(image, cfg, b.path());
    ASSERT_TRUE(sbom_path);
    score_sbom(*sbom_path, cfg, b.path(), offline_transport());
    for (const char* name : {kSbomFile, kFindingsFile, kReportFile}) {
        EXPECT_EQ(read_text(a / name), read_text(b / name)) << name;
    }
}

TEST(EmitReport, JsonRoundTrips)
{
    TempDir ws;
    auto cfg = golden_config();
    cfg.snapshots.vuln_db = fixture("snapshots/vulndb_corpus.json");
    const auto image = FirmwareImage::from_file(golden_meta(), fixture("golden.img"));
    const auto report = run_pipeline(image, cfg, ws.path(), offline_transport());
    const std::string text = read_text(ws / kFindingsFile);
    const auto parsed = parse_report_json(text);
    EXPECT_EQ(report_json(parsed), text);
    EXPECT_EQ(report_markdown(parsed), read_text(ws / kReportFile));
    EXPECT_EQ(parsed.findings.size(), 3U);
}

TEST(EmitReport, NoFindingsMarker)
{
    TempDir ws;
    TriageReport r;
    r.sample = {"FW-EMPTY", "Router", "Acme", 2020, ""};
    emit_report(r, ws.path());
    EXPECT_NE(read_text(ws / kReportFile).find("No findings."), std::string::npos);
    EXPECT_EQ(parse_report_json(read_text(ws / kFindingsFile)).findings.size(), 0U);
}

TEST(EmitReport, UnwritableDirectoryNamesPath)
{
    TempDir tmp;
    put(tmp.path(), "blocker", "x");
    const fs::path bad = tmp / "blocker" / "ws";
    try {
        emit_report(TriageReport{}, bad);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::IoError);
        EXPECT_NE(e.where().find(bad.string()), std::string::npos) << e.where();
    }
}

TEST(EmitReport, MarkdownEscapesPipes)
{
    TriageReport r;
    auto comps = std::make_shared<std::vector<sbom::Component>>();
    sbom::Component c;
    c.name = "a|b";
    c.version = "1.0";
    c.evidence_paths = {"usr/bin/a"};
    comps->push_back(c);
    scoring::Finding f;
    f.component = &comps->front();
    f.vuln_id = "CVE-2020-0001";
    r.findings.push_back(f);
    r.components = comps;
    EXPECT_NE(report_markdown(r).find("a\\|b 1.0"), std::string::npos);
}

TEST(StringsBaseline, CompressedImageHidesStrings)
{
    TempDir ws;
    const auto image = FirmwareImage::from_file(golden_meta(), fixture("golden.img"));
    EXPECT_EQ(strings_baseline(image), 0U);
    const auto report = run_pipeline(image, golden_config(), ws.path(), offline_transport());
    EXPECT_GT(report.component_count, 0U);
}

TEST(StringsBaseline, UncompressedImageWithTwoVersionStrings)
{
    const auto image = FirmwareImage::from_file({"FW-ROUTER", "", "", 0, ""}, fixture("router.img"));
    EXPECT_EQ(strings_baseline(image), 2U);
}

TEST(StringsBaseline, EmptyImage)
{
    EXPECT_EQ(strings_baseline(FirmwareImage::from_bytes({"E", "", "", 0, ""}, {})), 0U);
}

TEST(CorpusManifest, Parses)
{
    const auto entries = load_corpus_manifest(fixture("corpus.csv"));
    ASSERT_EQ(entries.size(), 4U);
    EXPECT_EQ(entries[0].meta.sample_id, "FW-GOLDEN");
    EXPECT_EQ(entries[0].meta.release_year, 2017);
    EXPECT_EQ(entries[2].meta.device_type, "IP Camera");
    EXPECT_EQ(entries[3].image_path, fixture("encrypted.img"));
}

TEST(CorpusManifest, Rejections)
{
    constexpr std::string_view header = "sample_id,device_type,vendor,release_year,image_path\n";
    for (const std::string text : {
             std::string(header),
             std::string(""),
             std::string("id,type\nA,B\n"),
             std::string(header) + "A,Router,Acme,2017\n",
             std::string(header) + "A,Router,Acme,year,a.img\n",
             std::string(header) + "../x,Router,Acme,2017,a.img\n",
             std::string(header) + "A,Router,Acme,2017,a.img\nA,Router,Acme,2017,b.img\n",
         }) {
        EXPECT_EQ(code_of([&] { parse_corpus_manifest(text, "/"); }), ErrorCode::ManifestError) << text;
    }
}

TEST(SpotCheck, SizeIsCeilFivePercent)
{
    std::vector<std::string> ids;
    for (int i = 0; i < 40; ++i) {
        ids.push_back("F" + std::to_string(i));
    }
    EXPECT_EQ(spot_check(ids, 1).size(), 2U);
    ids.resize(41);
    EXPECT_EQ(spot_check(ids, 1).size(), 3U);
    ids.resize(60);
    EXPECT_EQ(spot_check(ids, 1).size(), 3U);
    ids.resize(1);
    EXPECT_EQ(spot_check(ids, 1).size(), 1U);
    EXPECT_TRUE(spot_check({}, 1).empty());
}

TEST(SpotCheck, SeededDeterminism)
{
    std::vector<std::string> ids;
    for (int i = 0; i < 500; ++i) {
        ids.push_back("F" + std::to_string(i));
    }
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto a = spot_check(ids, seed);
        EXPECT_EQ(a, spot_check(ids, seed));
        EXPECT_EQ(a.size(), 25U);
        EXPECT_TRUE(std::is_sorted(a.begin(), a.end(), [&](const std::string& x, const std::string& y) {
            return std::stoi(x.substr(1)) < std::stoi(y.substr(1));
        }));
        EXPECT_EQ(std::set<std::string>(a.begin(), a.end()).size(), a.size());
    }
    EXPECT_NE(spot_check(ids, 1), spot_check(ids, 2));
}

TEST(Evaluate, CorpusMetrics)
{
    TempDir out;
    std::atomic<int> calls{0};
    const auto cfg = load_config(fixture("corpus_config.json"));
    const auto m = evaluate(fixture("corpus.csv"), cfg, out.path(), counting_transport(calls));
    EXPECT_EQ(m.total, 4U);
    EXPECT_EQ(m.extracted, 3U);
    EXPECT_DOUBLE_EQ(m.extraction_success_rate, 0.75);
    ASSERT_EQ(m.samples.size(), 4U);
    const auto& golden_sample = m.samples[0];
    EXPECT_LT(golden_sample.strings_baseline_count, golden_sample.pipeline_count);
    EXPECT_EQ(golden_sample.critical_band_count_rps, 1U);
    EXPECT_EQ(golden_sample.critical_count_cvss_only, 2U);
    const auto& encrypted = m.samples[3];
    EXPECT_EQ(encrypted.outcome, "Encrypted");
    EXPECT_EQ(encrypted.pipeline_count, 0U);
    EXPECT_EQ(encrypted.finding_count, 0U);
    // 6 findings across the corpus -> ceil(0.3) = 1.
    EXPECT_EQ(m.spot_check_sample.size(), 1U);
    EXPECT_EQ(calls.load(), 0);
    EXPECT_EQ(read_text(out / "evaluation.json"), metrics_json(m));
    EXPECT_EQ(evaluate(fixture("corpus.csv"), cfg, out.path(), counting_transport(calls)).spot_check_sample,
              m.spot_check_sample);
}

TEST(Evaluate, MissingImageMarksSampleFailed)
{
    TempDir tmp;
    put(tmp.path(), "corpus.csv",
        "sample_id,device_type,vendor,release_year,image_path\n"
        "GONE,Router,Acme,2017,missing.img\n"
        "ROUTER,Router,Netco,2016," +
            fixture("router.img").string() + "\n");
    const auto cfg = load_config(fixture("corpus_config.json"));
    const auto m = evaluate(tmp / "corpus.csv", cfg, tmp / "out", offline_transport());
    EXPECT_EQ(m.total, 2U);
    EXPECT_EQ(m.extracted, 1U);
    EXPECT_EQ(m.samples[0].outcome, kOutcomeMissing);
    EXPECT_DOUBLE_EQ(m.extraction_success_rate, 0.5);
}

TEST(Evaluate, EmptyCorpusIsManifestError)
{
    TempDir tmp;
    put(tmp.path(), "corpus.csv", "sample_id,device_type,vendor,release_year,image_path\n");
    EXPECT_EQ(code_of([&] { evaluate(tmp / "corpus.csv", PipelineConfig{}, tmp / "out", offline_transport()); }),
              ErrorCode::ManifestError);
}
