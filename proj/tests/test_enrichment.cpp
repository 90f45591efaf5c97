#include "firmtriage/enrichment.hpp"
#include "firmtriage/error.hpp"
#include "test_support.hpp"

#include <httplib.h>

#include <gtest/gtest.h>

#include <json.hpp>

#include <thread>

using namespace firmtriage;
using namespace firmtriage::enrichment;
using namespace std::chrono_literals;

namespace {

Error error_of(const std::function<void()>& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e;
    }
    return Error(ErrorCode::ConfigError, "nothing thrown", "<none>");
}

std::vector<std::string> ids_in(const std::string& url)
{
    const auto eq = url.find("cve=");
    std::vector<std::string> out;
    std::stringstream ss(url.substr(eq + 4));
    for (std::string id; std::getline(ss, id, ',');) {
        out.push_back(id);
    }
    return out;
}

// Answers every id with epss = 0.001 * (numeric suffix % 1000).
struct FakeApi {
    std::vector<std::string> urls;
    HttpResponse operator()(const std::string& url, std::chrono::milliseconds)
    {
        urls.push_back(url);
        nlohmann::json data = nlohmann::json::array();
        for (const auto& id : ids_in(url)) {
            const int n = std::stoi(id.substr(id.rfind('-') + 1)) % 1000;
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.9f", n / 1000.0);
            data.push_back({{"cve", id}, {"epss", buf}, {"percentile", "0.5"}, {"date", "2024-05-01"}});
        }
        return {200, nlohmann::json{{"status", "OK"}, {"data", data}}.dump()};
    }
};

FetchOptions no_sleep(std::vector<std::chrono::milliseconds>* sleeps = nullptr)
{
    FetchOptions o;
    o.endpoint = "https://epss.example/v1?cve={ids}";
    o.sleep = [sleeps](std::chrono::milliseconds d) {
        if (sleeps != nullptr) {
            sleeps->push_back(d);
        }
    };
    return o;
}

std::vector<std::string> cve_ids(int n)
{
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) {
        out.push_back("CVE-2024-" + std::to_string(10000 + i));
    }
    return out;
}

} // namespace

TEST(EpssSnapshot, ParsesRows)
{
    const auto feed = parse_epss_csv("CVE-0000-0001,0.05000,0.50000\n");
    ASSERT_EQ(feed.rows.size(), 1u);
    EXPECT_DOUBLE_EQ(feed.rows.at("CVE-0000-0001").epss, 0.05);
    EXPECT_DOUBLE_EQ(feed.rows.at("CVE-0000-0001").percentile, 0.5);
}

TEST(EpssSnapshot, OutOfRangeNamesLine)
{
    const auto e = error_of([] { parse_epss_csv("cve,epss,percentile\nCVE-0000-0002,1.50000,0.9\n"); });
    EXPECT_EQ(e.code(), ErrorCode::RangeError);
    EXPECT_NE(e.where().find("line 2"), std::string::npos);
    EXPECT_EQ(error_of([] { parse_epss_csv("CVE-0000-0002,-0.1,0.9\n"); }).code(), ErrorCode::RangeError);
}

TEST(EpssSnapshot, HeaderAndCommentsOnly)
{
    const auto feed =
        parse_epss_csv("#model_version:v2023.03.01,score_date:2023-03-20T00:00:00+0000\ncve,epss,percentile\n");
    EXPECT_TRUE(feed.rows.empty());
    EXPECT_EQ(feed.date, "2023-03-20");
}

TEST(EpssSnapshot, MalformedRows)
{
    for (const char* bad : {"CVE-1,0.1\n", "CVE-1,abc,0.1\n", "CVE-1,0.1,0.2,0.3\n", ",0.1,0.2\n"}) {
        const auto e = error_of([&] { parse_epss_csv(std::string("#c\n") + bad); });
        EXPECT_EQ(e.code(), ErrorCode::FeedParseError) << bad;
        EXPECT_NE(e.where().find("line 2"), std::string::npos) << bad;
    }
}

TEST(EpssSnapshot, CacheFormatRoundTrips)
{
    const EpssMap rows{{"CVE-2024-1", {0.123456789, 0.9}}, {"CVE-2024-2", {0.0, 0.0}}, {"CVE-2024-3", {1.0, 1.0}}};
    const auto feed = parse_epss_csv(format_epss_csv(rows, "2024-05-01"));
    EXPECT_EQ(feed.rows, rows);
    EXPECT_EQ(feed.date, "2024-05-01");
}

TEST(EpssSnapshot, LoadFromFile)
{
    test::TempDir t;
    write_text(t / "epss.csv", "#score_date:2024-01-02\r\ncve,epss,percentile\r\nCVE-2020-0001,0.2,0.3\r\n");
    const auto feed = load_epss_snapshot(t / "epss.csv");
    EXPECT_EQ(feed.rows.size(), 1u);
    EXPECT_EQ(feed.date, "2024-01-02");
}

TEST(KevSnapshot, ThreeEntries)
{
    const auto feed = parse_kev_json(R"({"catalogVersion": "2024.05.01", "dateReleased": "2024-05-01T15:00:00.000Z",
        "vulnerabilities": [{"cveID": "CVE-2021-1"}, {"cveID": "CVE-2021-2"}, {"cveID": "CVE-2021-3"}]})");
    EXPECT_EQ(feed.ids, (std::set<std::string>{"CVE-2021-1", "CVE-2021-2", "CVE-2021-3"}));
    EXPECT_EQ(feed.catalog_version, "2024.05.01");
    EXPECT_EQ(feed.date, "2024-05-01");
}

TEST(KevSnapshot, MissingCveIdNamesIndex)
{
    const auto e = error_of(
        [] { parse_kev_json(R"({"vulnerabilities": [{"cveID": "CVE-2021-1"}, {"vendorProject": "x"}]})"); });
    EXPECT_EQ(e.code(), ErrorCode::FeedParseError);
    EXPECT_NE(e.where().find("vulnerabilities[1]"), std::string::npos);
}

TEST(KevSnapshot, EmptyAndMalformed)
{
    EXPECT_TRUE(parse_kev_json(R"({"vulnerabilities": []})").ids.empty());
    EXPECT_EQ(error_of([] { parse_kev_json("{"); }).code(), ErrorCode::FeedParseError);
    EXPECT_EQ(error_of([] { parse_kev_json("{}"); }).code(), ErrorCode::FeedParseError);
    EXPECT_EQ(error_of([] { parse_kev_json(R"({"dateReleased": 5, "vulnerabilities": []})"); }).code(),
              ErrorCode::FeedParseError);
}

TEST(EnrichmentSnapshot, RangeCheckedAndImmutable)
{
    EXPECT_EQ(error_of([] { EnrichmentSnapshot({{"CVE-1", {1.5, 0.1}}}, {}, "", ""); }).code(),
              ErrorCode::RangeError);
    const EnrichmentSnapshot base({{"CVE-1", {0.1, 0.1}}, {"CVE-2", {0.2, 0.2}}}, {"CVE-2"}, "2024-01-01", "k");
    const auto merged = base.with_epss({{"CVE-2", {0.9, 0.9}}, {"CVE-3", {0.3, 0.3}}}, "2024-06-01");
    EXPECT_EQ(base.epss("CVE-2"), 0.2);
    EXPECT_FALSE(base.epss("CVE-3"));
    EXPECT_EQ(base.epss_date(), "2024-01-01");
    EXPECT_EQ(merged.epss("CVE-1"), 0.1);
    EXPECT_EQ(merged.epss("CVE-2"), 0.9);
    EXPECT_EQ(merged.epss("CVE-3"), 0.3);
    EXPECT_EQ(merged.epss_date(), "2024-06-01");
    EXPECT_TRUE(merged.in_kev("CVE-2"));
    EXPECT_FALSE(merged.in_kev("CVE-1"));
}

TEST(FetchEpss, NoIdsNoRequest)
{
    int calls = 0;
    const Transport t = [&](const std::string&, std::chrono::milliseconds) -> HttpResponse {
        ++calls;
        return {200, R"({"data": []})"};
    };
    const auto r = fetch_epss({}, t, no_sleep());
    EXPECT_TRUE(r.rows.empty());
    EXPECT_EQ(r.requests, 0u);
    EXPECT_EQ(calls, 0);
}

TEST(FetchEpss, BatchesOfAtMostOneHundred)
{
    FakeApi api;
    auto ids = cve_ids(250);
    ids.push_back(ids.front()); // duplicates are queried once
    const auto r = fetch_epss(ids, std::ref(api), no_sleep());
    EXPECT_EQ(r.requests, 3u);
    ASSERT_EQ(api.urls.size(), 3u);
    std::vector<std::size_t> sizes;
    for (const auto& u : api.urls) {
        sizes.push_back(ids_in(u).size());
        EXPECT_TRUE(u.starts_with("https://epss.example/v1?cve=CVE-2024-"));
    }
    EXPECT_EQ(sizes, (std::vector<std::size_t>{100, 100, 50}));
    EXPECT_EQ(r.rows.size(), 250u);
    EXPECT_DOUBLE_EQ(r.rows.at("CVE-2024-10123").epss, 0.123);
    EXPECT_EQ(r.date, "2024-05-01");
}

TEST(FetchEpss, RetriesWithExponentialBackoff)
{
    std::vector<std::chrono::milliseconds> sleeps;
    int calls = 0;
    const Transport t = [&](const std::string&, std::chrono::milliseconds) -> HttpResponse {
        ++calls;
        throw Error(ErrorCode::NetworkError, "connection refused");
    };
    EventLog log;
    const auto e = error_of([&] { fetch_epss(cve_ids(3), t, no_sleep(&sleeps), &log); });
    EXPECT_EQ(e.code(), ErrorCode::NetworkError);
    EXPECT_EQ(calls, 4); // first attempt plus three retries
    EXPECT_EQ(sleeps, (std::vector<std::chrono::milliseconds>{250ms, 500ms, 1000ms}));
    EXPECT_EQ(log.count("epss-fetch"), 4u);
}

TEST(FetchEpss, TransientServerErrorRecovers)
{
    int calls = 0;
    FakeApi api;
    const Transport t = [&](const std::string& url, std::chrono::milliseconds d) -> HttpResponse {
        if (++calls <= 2) {
            return {calls == 1 ? 503 : 429, ""};
        }
        return api(url, d);
    };
    const auto r = fetch_epss(cve_ids(2), t, no_sleep());
    EXPECT_EQ(r.rows.size(), 2u);
    EXPECT_EQ(r.requests, 3u);
}

TEST(FetchEpss, ProtocolErrors)
{
    auto respond = [](int status, std::string body) {
        return Transport([=](const std::string&, std::chrono::milliseconds) { return HttpResponse{status, body}; });
    };
    EXPECT_EQ(error_of([&] { fetch_epss(cve_ids(1), respond(200, "<html>"), no_sleep()); }).code(),
              ErrorCode::ProtocolError);
    EXPECT_EQ(error_of([&] { fetch_epss(cve_ids(1), respond(200, R"({"status": "OK"})"), no_sleep()); }).code(),
              ErrorCode::ProtocolError);
    EXPECT_EQ(error_of([&] {
                  fetch_epss(cve_ids(1), respond(200, R"({"data": [{"cve": "CVE-1", "epss": "2.0"}]})"), no_sleep());
              }).code(),
              ErrorCode::ProtocolError);
    EXPECT_EQ(error_of([&] { fetch_epss(cve_ids(1), respond(404, ""), no_sleep()); }).code(),
              ErrorCode::ProtocolError);
    auto opts = no_sleep();
    opts.endpoint = "https://epss.example/v1";
    EXPECT_EQ(error_of([&] { fetch_epss(cve_ids(1), respond(200, ""), opts); }).code(), ErrorCode::ConfigError);
}

TEST(EnrichOnline, UnreachableFallsBackToSnapshot)
{
    const EnrichmentSnapshot snap({{"CVE-2024-10000", {0.05, 0.5}}}, {"CVE-2024-10000"}, "2024-01-01", "2024-01-02");
    const Transport down = [](const std::string&, std::chrono::milliseconds) -> HttpResponse {
        throw Error(ErrorCode::NetworkError, "unreachable");
    };
    EventLog log;
    test::TempDir t;
    const auto out = enrich_online(snap, cve_ids(2), down, no_sleep(), &log, t / "epss-cache.csv");
    EXPECT_EQ(out.epss("CVE-2024-10000"), 0.05);
    EXPECT_EQ(out.epss_date(), "2024-01-01");
    EXPECT_EQ(log.count("warning"), 1u);
    EXPECT_FALSE(std::filesystem::exists(t / "epss-cache.csv"));
}

TEST(EnrichOnline, FetchedValuesTakePrecedenceAndAreCached)
{
    const EnrichmentSnapshot snap({{"CVE-2024-10001", {0.9, 0.9}}, {"CVE-2024-99999", {0.4, 0.4}}}, {}, "2024-01-01",
                                  "");
    FakeApi api;
    test::TempDir t;
    const auto out = enrich_online(snap, cve_ids(2), std::ref(api), no_sleep(), nullptr, t / "epss-cache.csv");
    EXPECT_DOUBLE_EQ(*out.epss("CVE-2024-10001"), 0.001);
    EXPECT_DOUBLE_EQ(*out.epss("CVE-2024-10000"), 0.0);
    EXPECT_EQ(out.epss("CVE-2024-99999"), 0.4);
    EXPECT_EQ(out.epss_date(), "2024-05-01");
    const auto cached = load_epss_snapshot(t / "epss-cache.csv");
    EXPECT_EQ(cached.rows.size(), 2u);
    EXPECT_EQ(cached.date, "2024-05-01");
}

TEST(HttpTransport, LocalServerAndRefusedConnection)
{
    httplib::Server server;
    server.Get("/data/v1/epss", [](const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.get_param_value("cve");
        res.set_content(R"({"status":"OK","data":[{"cve":")" + id + R"(","epss":"0.25","percentile":"0.9"}]})",
                        "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port, 0);
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    FetchOptions opts = no_sleep();
    opts.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/data/v1/epss?cve={ids}";
    const auto r = fetch_epss({"CVE-2024-0001"}, http_transport(), opts);
    server.stop();
    th.join();
    ASSERT_EQ(r.rows.size(), 1u);
    EXPECT_DOUBLE_EQ(r.rows.at("CVE-2024-0001").epss, 0.25);

    // Nothing listens on the port any more.
    opts.retries = 1;
    opts.timeout = 500ms;
    EXPECT_EQ(error_of([&] { fetch_epss({"CVE-2024-0001"}, http_transport(), opts); }).code(),
              ErrorCode::NetworkError);
}
