#pragma once

// Random inputs for property tests.

#include "firmtriage/matcher.hpp"
#include "firmtriage/sbom.hpp"
#include "firmtriage/version.hpp"

#include <random>
#include <string>
#include <vector>

namespace firmtriage::test {

inline std::string random_version(std::mt19937& rng)
{
    std::uniform_int_distribution<int> seg(0, 12);
    std::uniform_int_distribution<int> count(1, 4);
    std::string v = std::to_string(seg(rng));
    for (int i = count(rng); i > 0; --i) {
        v += "." + std::to_string(seg(rng));
    }
    if (rng() % 5 == 0) {
        v.push_back(static_cast<char>('a' + rng() % 26));
    }
    if (rng() % 7 == 0) {
        v += "-" + std::to_string(seg(rng));
    }
    return v;
}

// Components satisfying the per-component invariants, unique by first path.
inline std::vector<sbom::Component> random_components(std::mt19937& rng, std::size_t max_count)
{
    static const std::vector<std::string> names{"busybox", "dropbear", "openssl", "zlib",   "lighttpd",
                                                "uclibc",  "dnsmasq",  "httpd",   "curl",   "ssl",
                                                "Acme Daemon", "pkg+x", "名前"};
    std::vector<sbom::Component> out;
    const std::size_t n = max_count == 0 ? 0 : rng() % (max_count + 1);
    for (std::size_t i = 0; i < n; ++i) {
        sbom::Component c;
        c.name = names[rng() % names.size()];
        c.kind = static_cast<sbom::ComponentKind>(rng() % 4);
        c.evidence_kind = static_cast<sbom::EvidenceKind>(rng() % 3);
        if (c.evidence_kind == sbom::EvidenceKind::FilenameOnly && rng() % 2 == 0) {
            c.version = std::string(sbom::kUnknownVersion);
        } else {
            c.version = random_version(rng);
        }
        if (!c.unknown_version() && rng() % 3 != 0) {
            c.purl = sbom::make_purl(c.name, c.version);
        }
        if (rng() % 4 == 0) {
            c.cpe = "cpe:2.3:a:vendor:" + c.name + ":" + c.version + ":*:*:*:*:*:*:*";
        }
        const std::size_t paths = 1 + rng() % 3;
        c.evidence_paths.push_back("usr/bin/f" + std::to_string(i));
        for (std::size_t k = 1; k < paths; ++k) {
            c.evidence_paths.push_back("etc/extra" + std::to_string(rng() % 100));
        }
        out.push_back(std::move(c));
    }
    return out;
}

inline SampleMetadata random_sample(std::mt19937& rng)
{
    SampleMetadata s;
    s.sample_id = "FW-" + std::to_string(rng() % 100000);
    s.device_type = rng() % 2 ? "Router" : "IP Camera";
    s.vendor = rng() % 2 ? "Acme" : "Vendor \"Q\"";
    s.release_year = 2010 + static_cast<int>(rng() % 15);
    if (rng() % 2) {
        s.sha256 = std::string(64, 'a');
    }
    return s;
}

inline const std::vector<std::string>& package_pool()
{
    static const std::vector<std::string> pool{"busybox", "dropbear", "openssl", "zlib", "lighttpd",
                                               "dnsmasq", "apache-http-server", "curl", "ssl", "uclibc"};
    return pool;
}

// Snapshot with up to `max_records` records over package_pool() and an alias
// table mapping some packages to other pool names or "httpd".
inline matching::VulnDatabase random_snapshot(std::mt19937& rng, std::size_t max_records)
{
    const auto& pool = package_pool();
    std::vector<matching::VulnRecord> records;
    const std::size_t n = rng() % (max_records + 1);
    for (std::size_t i = 0; i < n; ++i) {
        matching::VulnRecord r;
        r.vuln_id = "CVE-2020-" + std::to_string(10000 + i);
        if (rng() % 4 != 0) {
            r.cvss_base = static_cast<double>(rng() % 101) / 10.0;
        }
        const std::size_t ranges = 1 + rng() % 3;
        for (std::size_t k = 0; k < ranges; ++k) {
            std::string a = random_version(rng);
            std::string b = random_version(rng);
            if (matching::compare_versions(a, b) > 0) {
                std::swap(a, b);
            }
            matching::AffectedRange range{pool[rng() % pool.size()], rng() % 5 == 0 ? "0" : a, std::nullopt};
            if (rng() % 4 != 0) {
                range.fixed = b;
            }
            r.affected.push_back(std::move(range));
        }
        records.push_back(std::move(r));
    }
    matching::VulnDatabase::AliasTable aliases;
    if (rng() % 2 == 0) {
        aliases["apache-http-server"] = {"httpd"};
    }
    if (rng() % 2 == 0) {
        aliases[pool[rng() % pool.size()]] = {pool[rng() % pool.size()]};
    }
    return matching::VulnDatabase(std::move(records), std::move(aliases));
}

// Components named from package_pool() plus "httpd"; versions drawn close to
// the snapshot's grammar so ranges actually hit.
inline std::vector<sbom::Component> random_match_components(std::mt19937& rng, std::size_t max_count)
{
    auto comps = random_components(rng, max_count);
    const auto& pool = package_pool();
    for (auto& c : comps) {
        const std::size_t pick = rng() % (pool.size() + 1);
        c.name = pick == pool.size() ? "httpd" : pool[pick];
        if (rng() % 3 == 0) {
            c.name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(c.name[0])));
        }
    }
    return comps;
}

} // namespace firmtriage::test
