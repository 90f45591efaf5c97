#pragma once

#include "firmtriage/log.hpp"

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace firmtriage::enrichment {

inline constexpr std::string_view kDefaultEpssEndpoint = "https://api.first.org/data/v1/epss?cve={ids}";
inline constexpr std::size_t kEpssBatchSize = 100;

struct EpssRow {
    double epss = 0.0;
    double percentile = 0.0;

    friend bool operator==(const EpssRow&, const EpssRow&) = default;
};

using EpssMap = std::map<std::string, EpssRow>;

struct EpssFeed {
    EpssMap rows;
    std::string date; // YYYY-MM-DD from the "score_date" comment, or empty
};

struct KevFeed {
    std::set<std::string> ids;
    std::string catalog_version;
    std::string date; // YYYY-MM-DD from "dateReleased", or empty
};

// Optional "#" metadata lines, optional "cve,epss,percentile" header, then rows.
// Throws Error{FeedParseError} (malformed row) or Error{RangeError}
// (probability outside [0,1]); both name the line.
EpssFeed parse_epss_csv(std::string_view text, std::string_view source = "epss");
EpssFeed load_epss_snapshot(const std::filesystem::path& csv_file);

// CISA catalog: catalogVersion, dateReleased, vulnerabilities[].cveID.
// Throws Error{FeedParseError} naming the offending field.
KevFeed parse_kev_json(std::string_view text, std::string_view source = "kev");
KevFeed load_kev_snapshot(const std::filesystem::path& json_file);

// Inverse of parse_epss_csv; used for the workspace cache.
std::string format_epss_csv(const EpssMap& rows, std::string_view date);

class EnrichmentSnapshot {
public:
    EnrichmentSnapshot() = default;
    // Throws Error{RangeError} if any probability is outside [0,1].
    EnrichmentSnapshot(EpssMap epss, std::set<std::string> kev, std::string epss_date, std::string kev_date);
    EnrichmentSnapshot(EpssFeed epss, KevFeed kev);

    [[nodiscard]] std::optional<double> epss(std::string_view vuln_id) const;
    [[nodiscard]] bool in_kev(std::string_view vuln_id) const;
    [[nodiscard]] const EpssMap& epss_rows() const noexcept { return epss_; }
    [[nodiscard]] const std::set<std::string>& kev() const noexcept { return kev_; }
    [[nodiscard]] const std::string& epss_date() const noexcept { return epss_date_; }
    [[nodiscard]] const std::string& kev_date() const noexcept { return kev_date_; }

    // New snapshot with `fetched` rows taking precedence over existing ones.
    [[nodiscard]] EnrichmentSnapshot with_epss(const EpssMap& fetched, std::string date) const;

private:
    EpssMap epss_;
    std::set<std::string> kev_;
    std::string epss_date_;
    std::string kev_date_;
};

// --- online EPSS -----------------------------------------------------------

struct HttpResponse {
    int status = 0;
    std::string body;
};

// Performs one GET. Throws Error{NetworkError} when no response is obtained.
using Transport = std::function<HttpResponse(const std::string& url, std::chrono::milliseconds timeout)>;

// HTTPS/HTTP GET via cpp-httplib.
Transport http_transport();

struct FetchOptions {
    std::string endpoint{kDefaultEpssEndpoint}; // "{ids}" is replaced by comma-joined ids
    std::chrono::milliseconds timeout{10000};
    int retries = 3;
    std::chrono::milliseconds backoff{250}; // doubled after every failed attempt
    std::size_t batch_size = kEpssBatchSize;
    std::function<void(std::chrono::milliseconds)> sleep; // default: std::this_thread::sleep_for
};

struct FetchResult {
    EpssMap rows;
    std::string date;
    std::size_t requests = 0;
};

// Queries ids (deduplicated, sorted) in batches. Each batch is attempted once
// plus `retries` times on NetworkError, HTTP 429 or 5xx. Throws
// Error{NetworkError} when a batch exhausts its retries and
// Error{ProtocolError} for an unexpected payload or status.
FetchResult fetch_epss(const std::vector<std::string>& vuln_ids, const Transport& transport,
                       const FetchOptions& options = {}, EventLog* log = nullptr);

// fetch_epss merged over `snapshot`; on NetworkError the snapshot is returned
// unchanged and a warning is logged. When `cache_file` is set, the fetched
// rows are written there.
EnrichmentSnapshot enrich_online(const EnrichmentSnapshot& snapshot, const std::vector<std::string>& vuln_ids,
                                 const Transport& transport, const FetchOptions& options = {},
                                 EventLog* log = nullptr,
                                 const std::optional<std::filesystem::path>& cache_file = std::nullopt);

} // namespace firmtriage::enrichment
