#pragma once

#include "firmtriage/enrichment.hpp"
#include "firmtriage/filesystem.hpp"
#include "firmtriage/matcher.hpp"
#include "firmtriage/sbom.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace firmtriage::scoring {

using matching::Confidence;

struct ScoreWeights {
    double w_b = 3.0;
    double w_e = 4.0;
    double w_c = 3.0;
};

struct ConfidenceMultipliers {
    double high = 1.0;
    double medium = 0.9;
    double low = 0.5;

    [[nodiscard]] double of(Confidence c) const noexcept;
};

enum class Band { Critical, High, Medium, Low };

std::string_view to_string(Band b) noexcept;
std::optional<Band> parse_band(std::string_view s);

// Lower bounds: Critical [critical,100], High [high,critical),
// Medium [medium,high), Low [0,medium).
struct BandThresholds {
    double critical = 90.0;
    double high = 70.0;
    double medium = 40.0;
};

inline const std::vector<std::string>& default_port_keys()
{
    static const std::vector<std::string> keys{"port", "Listen", "server.port", "ListenAddress"};
    return keys;
}

struct ScoringConfig {
    ScoreWeights weights;
    ConfidenceMultipliers multipliers;
    BandThresholds bands;
    std::vector<std::string> port_keys = default_port_keys();

    // Throws Error{ConfigError}: negative weights, multipliers outside [0,1],
    // or thresholds that do not partition [0,100] (0 < medium < high < critical <= 100).
    void validate() const;
};

struct ScoreFactors {
    double b = 0.0;
    double e = 0.0;
    double c = 5.0;
    bool b_defaulted = false;
    bool e_missing = false;

    friend bool operator==(const ScoreFactors&, const ScoreFactors&) = default;
};

inline constexpr double kDefaultCvss = 5.0;
inline constexpr double kContextDefault = 5.0;
inline constexpr double kContextHigh = 10.0;

enum class SignalKind { ConfigFile, InitScript, CriticalPath, OpenPort };

std::string_view to_string(SignalKind k) noexcept;
std::optional<SignalKind> parse_signal_kind(std::string_view s);

struct ContextSignal {
    SignalKind kind = SignalKind::ConfigFile;
    std::string evidence_path; // root-relative
    std::string detail;

    friend bool operator==(const ContextSignal&, const ContextSignal&) = default;
};

struct ExploitFactor {
    double e = 0.0;
    bool missing = false;
};

// KEV -> 10; else epss x 10; else 0 flagged missing.
ExploitFactor exploit_factor(std::optional<double> epss, bool in_kev) noexcept;

struct ContextFactor {
    double c = kContextDefault;
    std::vector<ContextSignal> signals;
};

// c = 10 iff any signal fires. Signals, in this order:
//   ConfigFile   file under etc/ whose name up to the first '.' equals the component name
//   InitScript   etc/init.d entry named after the component or referencing its binary,
//                or a systemd unit doing either
//   CriticalPath an evidence path under usr/sbin or sbin
//   OpenPort     a port-declaring key inside a matched config file (detail = port)
ContextFactor context_factor(const sbom::Component& component, const extraction::NormalizedFileSystem& fs,
                             const std::vector<std::string>& port_keys = default_port_keys());

// Port declared by one config line, if its key is in `port_keys`.
std::optional<int> port_from_line(std::string_view line, const std::vector<std::string>& port_keys);

double compute_rps(const ScoreFactors& factors, const ScoreWeights& weights = {}) noexcept;
double apply_confidence_penalty(double rps, Confidence confidence, const ConfidenceMultipliers& m = {}) noexcept;
Band assign_band(double adjusted_rps, const BandThresholds& thresholds = {}) noexcept;

struct Finding {
    const sbom::Component* component = nullptr;
    std::string vuln_id;
    std::string summary;
    Confidence confidence = Confidence::Low;
    matching::MatchTier matched_on = matching::MatchTier::FuzzyName;
    ScoreFactors factors;
    double rps = 0.0;
    double adjusted_rps = 0.0;
    Band band = Band::Low;
    std::vector<ContextSignal> context_evidence;
    bool kev = false;
    std::optional<double> epss;
    std::optional<double> cvss_base;
};

// Builds factors from the record, the enrichment snapshot and the context.
Finding score_match(const matching::RawMatch& match, const enrichment::EnrichmentSnapshot& feeds,
                    const ContextFactor& context, const ScoringConfig& config = {});

// adjusted_rps descending, then KEV first, then vuln_id ascending; remaining
// ties by component name, version and first evidence path.
std::vector<Finding> rank(std::vector<Finding> findings);

} // namespace firmtriage::scoring
