#include "firmtriage/scoring.hpp"

#include "firmtriage/error.hpp"

#include <algorithm>
#include <set>

namespace firmtriage::scoring {

using extraction::FileKind;
using extraction::NormalizedFileSystem;

double ConfidenceMultipliers::of(Confidence c) const noexcept
{
    switch (c) {
    case Confidence::High: return high;
    case Confidence::Medium: return medium;
    case Confidence::Low: return low;
    }
    return low;
}

std::string_view to_string(Band b) noexcept
{
    switch (b) {
    case Band::Critical: return "Critical";
    case Band::High: return "High";
    case Band::Medium: return "Medium";
    case Band::Low: return "Low";
    }
    return "Low";
}

std::optional<Band> parse_band(std::string_view s)
{
    for (auto b : {Band::Critical, Band::High, Band::Medium, Band::Low}) {
        if (to_string(b) == s) {
            return b;
        }
    }
    return std::nullopt;
}

std::string_view to_string(SignalKind k) noexcept
{
    switch (k) {
    case SignalKind::ConfigFile: return "ConfigFile";
    case SignalKind::InitScript: return "InitScript";
    case SignalKind::CriticalPath: return "CriticalPath";
    case SignalKind::OpenPort: return "OpenPort";
    }
    return "ConfigFile";
}

std::optional<SignalKind> parse_signal_kind(std::string_view s)
{
    for (auto k : {SignalKind::ConfigFile, SignalKind::InitScript, SignalKind::CriticalPath, SignalKind::OpenPort}) {
        if (to_string(k) == s) {
            return k;
        }
    }
    return std::nullopt;
}

void ScoringConfig::validate() const
{
    for (const double w : {weights.w_b, weights.w_e, weights.w_c}) {
        if (!(w >= 0.0)) {
            throw Error(ErrorCode::ConfigError, "weights must be non-negative", "scoring.weights");
        }
    }
    for (const double m : {multipliers.high, multipliers.medium, multipliers.low}) {
        if (!(m >= 0.0 && m <= 1.0)) {
            throw Error(ErrorCode::ConfigError, "confidence multipliers must lie in [0,1]", "scoring.multipliers");
        }
    }
    if (!(0.0 < bands.medium && bands.medium < bands.high && bands.high < bands.critical && bands.critical <= 100.0)) {
        throw Error(ErrorCode::ConfigError, "band thresholds must satisfy 0 < medium < high < critical <= 100",
                    "scoring.bands");
    }
    if (port_keys.empty()) {
        throw Error(ErrorCode::ConfigError, "port key table is empty", "scoring.port_keys");
    }
}

ExploitFactor exploit_factor(std::optional<double> epss, bool in_kev) noexcept
{
    if (in_kev) {
        return {10.0, false};
    }
    if (epss) {
        return {*epss * 10.0, false};
    }
    return {0.0, true};
}

namespace {

std::string basename(std::string_view path)
{
    const auto slash = path.rfind('/');
    return std::string(slash == std::string_view::npos ? path : path.substr(slash + 1));
}

std::string stem(std::string_view name)
{
    return std::string(name.substr(0, name.find('.')));
}

// Init-script names carry an optional SNN/KNN ordering prefix.
std::string init_name(std::string_view name)
{
    if (name.size() > 3 && (name[0] == 'S' || name[0] == 'K') && std::isdigit(static_cast<unsigned char>(name[1])) &&
        std::isdigit(static_cast<unsigned char>(name[2]))) {
        name.remove_prefix(3);
    }
    return stem(name);
}

bool references_binary(const NormalizedFileSystem& fs, const std::string& path, const sbom::Component& c)
{
    const auto bytes = fs.read(path);
    if (!bytes) {
        return false;
    }
    const std::string_view text(reinterpret_cast<const char*>(bytes->data()), bytes->size());
    for (const auto& p : c.evidence_paths) {
        if (p.starts_with("etc/")) {
            continue;
        }
        const std::string abs = "/" + p;
        for (auto pos = text.find(abs); pos != std::string_view::npos; pos = text.find(abs, pos + 1)) {
            const std::size_t end = pos + abs.size();
            if (end == text.size() || !(std::isalnum(static_cast<unsigned char>(text[end])) || text[end] == '_' ||
                                        text[end] == '-' || text[end] == '.')) {
                return true;
            }
        }
    }
    return false;
}

std::vector<std::string> entries_under(const NormalizedFileSystem& fs, std::string_view dir)
{
    std::vector<std::string> out;
    const std::string prefix = std::string(dir) + "/";
    for (auto it = fs.entries.lower_bound(prefix); it != fs.entries.end() && it->first.starts_with(prefix); ++it) {
        if (it->second.kind != FileKind::Directory) {
            out.push_back(it->first);
        }
    }
    return out;
}

} // namespace

std::optional<int> port_from_line(std::string_view line, const std::vector<std::string>& port_keys)
{
    line = trim(line);
    if (line.empty() || line.front() == '#' || line.front() == ';') {
        return std::nullopt;
    }
    const auto key_end = line.find_first_of(" \t=:");
    if (key_end == std::string_view::npos) {
        return std::nullopt;
    }
    const std::string key = to_lower(line.substr(0, key_end));
    if (std::none_of(port_keys.begin(), port_keys.end(), [&](const std::string& k) { return to_lower(k) == key; })) {
        return std::nullopt;
    }
    std::string_view value = line.substr(key_end);
    while (!value.empty() && (value.front() == ' ' || value.front() == '\t' || value.front() == '=' ||
                              value.front() == ':')) {
        value.remove_prefix(1);
    }
    value = value.substr(0, value.find_first_of(" \t#;"));
    while (!value.empty() && (value.front() == '"' || value.front() == '\'')) {
        value.remove_prefix(1);
    }
    while (!value.empty() && (value.back() == '"' || value.back() == '\'')) {
        value.remove_suffix(1);
    }
    // "0.0.0.0:22", "[::]:80" and bare "8080" all end in the port.
    if (const auto colon = value.rfind(':'); colon != std::string_view::npos) {
        value = value.substr(colon + 1);
    }
    if (value.empty() || value.size() > 5 ||
        !std::all_of(value.begin(), value.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
        return std::nullopt;
    }
    const int port = std::stoi(std::string(value));
    if (port < 1 || port > 65535) {
        return std::nullopt;
    }
    return port;
}

ContextFactor context_factor(const sbom::Component& component, const NormalizedFileSystem& fs,
                             const std::vector<std::string>& port_keys)
{
    ContextFactor out;
    const std::string name = to_lower(component.name);

    std::vector<std::string> configs;
    for (const auto& path : entries_under(fs, "etc")) {
        if (path.starts_with("etc/init.d/")) {
            continue;
        }
        const auto* entry = fs.find_resolved(path);
        if (entry != nullptr && entry->kind == FileKind::Regular && to_lower(stem(basename(path))) == name) {
            configs.push_back(path);
            out.signals.push_back({SignalKind::ConfigFile, path, ""});
        }
    }

    for (const auto& path : entries_under(fs, "etc/init.d")) {
        if (to_lower(init_name(basename(path))) == name || references_binary(fs, path, component)) {
            out.signals.push_back({SignalKind::InitScript, path, ""});
        }
    }
    for (const char* dir : {"etc/systemd/system", "lib/systemd/system", "usr/lib/systemd/system"}) {
        for (const auto& path : entries_under(fs, dir)) {
            const std::string file = basename(path);
            if (!file.ends_with(".service")) {
                continue;
            }
            if (to_lower(stem(file)) == name || references_binary(fs, path, component)) {
                out.signals.push_back({SignalKind::InitScript, path, ""});
            }
        }
    }

    for (const auto& p : component.evidence_paths) {
        if (p.starts_with("usr/sbin/") || p.starts_with("sbin/")) {
            out.signals.push_back({SignalKind::CriticalPath, p, ""});
            break;
        }
    }

    for (const auto& path : configs) {
        const auto bytes = fs.read(path);
        if (!bytes) {
            continue;
        }
        const std::string_view text(reinterpret_cast<const char*>(bytes->data()), bytes->size());
        std::set<int> ports;
        std::size_t pos = 0;
        while (pos < text.size()) {
            auto nl = text.find('\n', pos);
            if (nl == std::string_view::npos) {
                nl = text.size();
            }
            if (const auto port = port_from_line(text.substr(pos, nl - pos), port_keys)) {
                if (ports.insert(*port).second) {
                    out.signals.push_back({SignalKind::OpenPort, path, std::to_string(*port)});
                }
            }
            pos = nl + 1;
        }
    }

    out.c = out.signals.empty() ? kContextDefault : kContextHigh;
    return out;
}

double compute_rps(const ScoreFactors& f, const ScoreWeights& w) noexcept
{
    return f.b * w.w_b + f.e * w.w_e + f.c * w.w_c;
}

double apply_confidence_penalty(double rps, Confidence confidence, const ConfidenceMultipliers& m) noexcept
{
    return std::clamp(rps * m.of(confidence), 0.0, 100.0);
}

Band assign_band(double adjusted_rps, const BandThresholds& t) noexcept
{
    if (adjusted_rps >= t.critical) {
        return Band::Critical;
    }
    if (adjusted_rps >= t.high) {
        return Band::High;
    }
    if (adjusted_rps >= t.medium) {
        return Band::Medium;
    }
    return Band::Low;
}

Finding score_match(const matching::RawMatch& match, const enrichment::EnrichmentSnapshot& feeds,
                    const ContextFactor& context, const ScoringConfig& config)
{
    Finding f;
    f.component = match.component;
    f.vuln_id = match.vuln->vuln_id;
    f.summary = match.vuln->summary;
    f.confidence = match.confidence;
    f.matched_on = match.matched_on;
    f.cvss_base = match.vuln->cvss_base;
    f.epss = feeds.epss(f.vuln_id);
    f.kev = feeds.in_kev(f.vuln_id);

    f.factors.b = f.cvss_base.value_or(kDefaultCvss);
    f.factors.b_defaulted = !f.cvss_base.has_value();
    const auto e = exploit_factor(f.epss, f.kev);
    f.factors.e = e.e;
    f.factors.e_missing = e.missing;
    f.factors.c = context.c;
    f.context_evidence = context.signals;

    f.rps = std::clamp(compute_rps(f.factors, config.weights), 0.0, 100.0);
    f.adjusted_rps = apply_confidence_penalty(f.rps, f.confidence, config.multipliers);
    f.band = assign_band(f.adjusted_rps, config.bands);
    return f;
}

std::vector<Finding> rank(std::vector<Finding> findings)
{
    const auto key = [](const Finding& f) {
        static const std::string none;
        const auto* c = f.component;
        return std::make_tuple(-f.adjusted_rps, !f.kev, std::cref(f.vuln_id), std::cref(c ? c->name : none),
                               std::cref(c ? c->version : none),
                               std::cref(c && !c->evidence_paths.empty() ? c->evidence_paths.front() : none));
    };
    std::stable_sort(findings.begin(), findings.end(),
                     [&](const Finding& a, const Finding& b) { return key(a) < key(b); });
    return findings;
}

} // namespace firmtriage::scoring
