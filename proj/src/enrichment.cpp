#include "firmtriage/enrichment.hpp"

#include "firmtriage/error.hpp"
#include "firmtriage/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <thread>

namespace firmtriage::enrichment {

using json = nlohmann::json;

namespace {

std::vector<std::string_view> split(std::string_view s, char sep)
{
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const auto next = s.find(sep, pos);
        out.push_back(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
        if (next == std::string_view::npos) {
            return out;
        }
        pos = next + 1;
    }
}

std::optional<double> parse_double(std::string_view s)
{
    s = trim(s);
    if (s.empty()) {
        return std::nullopt;
    }
    // strtod accepts exponents and leading signs; reject trailing garbage.
    const std::string buf(s);
    char* end = nullptr;
    const double v = std::strtod(buf.c_str(), &end);
    if (end != buf.c_str() + buf.size()) {
        return std::nullopt;
    }
    return v;
}

bool in_unit(double v)
{
    return v >= 0.0 && v <= 1.0;
}

std::string date_prefix(std::string_view s)
{
    s = trim(s);
    return std::string(s.substr(0, std::min<std::size_t>(10, s.size())));
}

} // namespace

EpssFeed parse_epss_csv(std::string_view text, std::string_view source)
{
    EpssFeed feed;
    std::size_t line_no = 0;
    bool header_seen = false;
    for (auto line : split(text, '\n')) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        const std::string where = std::string(source) + " line " + std::to_string(line_no);
        if (trim(line).empty()) {
            continue;
        }
        if (line.front() == '#') {
            // "#model_version:v2023.03.01,score_date:2023-03-20T00:00:00+0000"
            for (auto kv : split(line.substr(1), ',')) {
                const auto colon = kv.find(':');
                if (colon != std::string_view::npos && trim(kv.substr(0, colon)) == "score_date") {
                    feed.date = date_prefix(kv.substr(colon + 1));
                }
            }
            continue;
        }
        const auto cols = split(line, ',');
        if (!header_seen && feed.rows.empty() && cols.size() >= 2 && to_lower(trim(cols[0])) == "cve") {
            header_seen = true;
            continue;
        }
        if (cols.size() != 3 || trim(cols[0]).empty()) {
            throw Error(ErrorCode::FeedParseError, "expected cve,epss,percentile", where);
        }
        const auto epss = parse_double(cols[1]);
        const auto pct = parse_double(cols[2]);
        if (!epss || !pct) {
            throw Error(ErrorCode::FeedParseError, "non-numeric probability", where);
        }
        if (!in_unit(*epss) || !in_unit(*pct)) {
            throw Error(ErrorCode::RangeError, "probability outside [0,1]", where);
        }
        feed.rows[std::string(trim(cols[0]))] = {*epss, *pct};
    }
    return feed;
}

EpssFeed load_epss_snapshot(const std::filesystem::path& csv_file)
{
    return parse_epss_csv(read_text(csv_file), csv_file.string());
}

KevFeed parse_kev_json(std::string_view text, std::string_view source)
{
    const std::string src(source);
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::FeedParseError, e.what(), src);
    }
    if (!root.is_object()) {
        throw Error(ErrorCode::FeedParseError, "catalog is not an object", src);
    }
    KevFeed feed;
    for (const auto* key : {"catalogVersion", "dateReleased"}) {
        if (root.contains(key) && !root.at(key).is_string()) {
            throw Error(ErrorCode::FeedParseError, std::string(key) + " is not a string", src + " " + key);
        }
    }
    feed.catalog_version = root.value("catalogVersion", "");
    feed.date = date_prefix(root.value("dateReleased", ""));
    if (!root.contains("vulnerabilities") || !root.at("vulnerabilities").is_array()) {
        throw Error(ErrorCode::FeedParseError, "missing vulnerabilities array", src + " vulnerabilities");
    }
    const json& vulns = root.at("vulnerabilities");
    for (std::size_t i = 0; i < vulns.size(); ++i) {
        const json& v = vulns[i];
        if (!v.is_object() || !v.contains("cveID") || !v.at("cveID").is_string()) {
            throw Error(ErrorCode::FeedParseError, "entry without cveID",
                        src + " vulnerabilities[" + std::to_string(i) + "].cveID");
        }
        feed.ids.insert(v.at("cveID").get<std::string>());
    }
    return feed;
}

KevFeed load_kev_snapshot(const std::filesystem::path& json_file)
{
    return parse_kev_json(read_text(json_file), json_file.string());
}

std::string format_epss_csv(const EpssMap& rows, std::string_view date)
{
    std::string out = "#model_version:firmtriage-cache,score_date:" + std::string(date) + "\n";
    out += "cve,epss,percentile\n";
    char buf[64];
    for (const auto& [id, row] : rows) {
        std::snprintf(buf, sizeof buf, ",%.9f,%.9f\n", row.epss, row.percentile);
        out += id;
        out += buf;
    }
    return out;
}

EnrichmentSnapshot::EnrichmentSnapshot(EpssMap epss, std::set<std::string> kev, std::string epss_date,
                                       std::string kev_date)
    : epss_(std::move(epss)), kev_(std::move(kev)), epss_date_(std::move(epss_date)), kev_date_(std::move(kev_date))
{
    for (const auto& [id, row] : epss_) {
        if (!in_unit(row.epss) || !in_unit(row.percentile)) {
            throw Error(ErrorCode::RangeError, "probability outside [0,1]", id);
        }
    }
}

EnrichmentSnapshot::EnrichmentSnapshot(EpssFeed epss, KevFeed kev)
    : EnrichmentSnapshot(std::move(epss.rows), std::move(kev.ids), std::move(epss.date), std::move(kev.date))
{
}

std::optional<double> EnrichmentSnapshot::epss(std::string_view vuln_id) const
{
    const auto it = epss_.find(std::string(vuln_id));
    return it == epss_.end() ? std::nullopt : std::optional<double>(it->second.epss);
}

bool EnrichmentSnapshot::in_kev(std::string_view vuln_id) const
{
    return kev_.contains(std::string(vuln_id));
}

EnrichmentSnapshot EnrichmentSnapshot::with_epss(const EpssMap& fetched, std::string date) const
{
    EpssMap merged = epss_;
    for (const auto& [id, row] : fetched) {
        merged[id] = row;
    }
    return EnrichmentSnapshot(std::move(merged), kev_, date.empty() ? epss_date_ : std::move(date), kev_date_);
}

namespace {

double parse_probability(const json& v, const std::string& where)
{
    std::optional<double> d;
    if (v.is_number()) {
        d = v.get<double>();
    } else if (v.is_string()) {
        d = parse_double(v.get<std::string>());
    }
    if (!d || !in_unit(*d)) {
        throw Error(ErrorCode::ProtocolError, "invalid probability", where);
    }
    return *d;
}

void parse_epss_response(const std::string& body, FetchResult& out)
{
    json root;
    try {
        root = json::parse(body);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ProtocolError, std::string("response is not JSON: ") + e.what());
    }
    if (!root.is_object() || !root.contains("data") || !root.at("data").is_array()) {
        throw Error(ErrorCode::ProtocolError, "response lacks a data array", "data");
    }
    const json& data = root.at("data");
    for (std::size_t i = 0; i < data.size(); ++i) {
        const std::string where = "data[" + std::to_string(i) + "]";
        const json& row = data[i];
        if (!row.is_object() || !row.contains("cve") || !row.at("cve").is_string() || !row.contains("epss")) {
            throw Error(ErrorCode::ProtocolError, "row lacks cve/epss", where);
        }
        EpssRow r;
        r.epss = parse_probability(row.at("epss"), where + ".epss");
        if (row.contains("percentile")) {
            r.percentile = parse_probability(row.at("percentile"), where + ".percentile");
        }
        out.rows[row.at("cve").get<std::string>()] = r;
        if (row.contains("date") && row.at("date").is_string()) {
            out.date = std::max(out.date, date_prefix(row.at("date").get<std::string>()));
        }
    }
}

std::string batch_url(const std::string& endpoint, const std::vector<std::string>& ids, std::size_t begin,
                      std::size_t end)
{
    std::string joined;
    for (std::size_t i = begin; i < end; ++i) {
        if (i != begin) {
            joined.push_back(',');
        }
        joined += ids[i];
    }
    std::string url = endpoint;
    url.replace(url.find("{ids}"), 5, joined);
    return url;
}

} // namespace

FetchResult fetch_epss(const std::vector<std::string>& vuln_ids, const Transport& transport,
                       const FetchOptions& options, EventLog* log)
{
    FetchResult out;
    std::vector<std::string> ids(vuln_ids);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    if (ids.empty()) {
        return out;
    }
    if (options.endpoint.find("{ids}") == std::string::npos) {
        throw Error(ErrorCode::ConfigError, "EPSS endpoint lacks the {ids} placeholder", options.endpoint);
    }
    if (options.batch_size == 0) {
        throw Error(ErrorCode::ConfigError, "EPSS batch size must be positive");
    }
    const auto sleep = options.sleep ? options.sleep
                                     : std::function<void(std::chrono::milliseconds)>(
                                           [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); });
    for (std::size_t begin = 0; begin < ids.size(); begin += options.batch_size) {
        const std::size_t end = std::min(ids.size(), begin + options.batch_size);
        const std::string url = batch_url(options.endpoint, ids, begin, end);
        auto delay = options.backoff;
        for (int attempt = 0;; ++attempt) {
            std::string failure;
            try {
                ++out.requests;
                const HttpResponse resp = transport(url, options.timeout);
                if (resp.status == 200) {
                    parse_epss_response(resp.body, out);
                    break;
                }
                if (resp.status != 429 && resp.status < 500) {
                    throw Error(ErrorCode::ProtocolError, "unexpected HTTP status " + std::to_string(resp.status),
                                url);
                }
                failure = "HTTP " + std::to_string(resp.status);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::NetworkError) {
                    throw;
                }
                failure = e.what();
            }
            if (log != nullptr) {
                log->record("epss-fetch", url, "attempt " + std::to_string(attempt + 1) + " failed: " + failure);
            }
            if (attempt >= options.retries) {
                throw Error(ErrorCode::NetworkError,
                            "EPSS request failed after " + std::to_string(attempt + 1) + " attempts: " + failure, url);
            }
            sleep(delay);
            delay *= 2;
        }
    }
    return out;
}

EnrichmentSnapshot enrich_online(const EnrichmentSnapshot& snapshot, const std::vector<std::string>& vuln_ids,
                                 const Transport& transport, const FetchOptions& options, EventLog* log,
                                 const std::optional<std::filesystem::path>& cache_file)
{
    FetchResult fetched;
    try {
        fetched = fetch_epss(vuln_ids, transport, options, log);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::NetworkError) {
            throw;
        }
        if (log != nullptr) {
            log->warn(options.endpoint, std::string("EPSS fetch failed, using snapshot: ") + e.what());
        }
        return snapshot;
    }
    if (cache_file) {
        write_text(*cache_file, format_epss_csv(fetched.rows, fetched.date));
    }
    return snapshot.with_epss(fetched.rows, fetched.date);
}

} // namespace firmtriage::enrichment
