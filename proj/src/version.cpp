#include "firmtriage/version.hpp"

#include "firmtriage/error.hpp"
#include "firmtriage/sbom.hpp"

#include <algorithm>
#include <cctype>

namespace firmtriage::matching {

namespace {

bool is_digit(char c)
{
    return std::isdigit(static_cast<unsigned char>(c)) != 0;
}

bool is_alpha(char c)
{
    return std::isalpha(static_cast<unsigned char>(c)) != 0;
}

bool all_digits(std::string_view s)
{
    return !s.empty() && std::all_of(s.begin(), s.end(), is_digit);
}

// "2k" -> ("2", 'k'); numeric segments have suffix '\0'.
struct Numeric {
    std::string_view digits;
    char suffix = '\0';
};

std::optional<Numeric> as_numeric(std::string_view s)
{
    if (all_digits(s)) {
        return Numeric{s, '\0'};
    }
    if (s.size() >= 2 && is_alpha(s.back()) && all_digits(s.substr(0, s.size() - 1))) {
        return Numeric{s.substr(0, s.size() - 1), s.back()};
    }
    return std::nullopt;
}

std::strong_ordering compare_digits(std::string_view a, std::string_view b)
{
    const auto strip = [](std::string_view s) {
        const auto nz = s.find_first_not_of('0');
        return nz == std::string_view::npos ? std::string_view{} : s.substr(nz);
    };
    a = strip(a);
    b = strip(b);
    if (a.size() != b.size()) {
        return a.size() <=> b.size();
    }
    return a.compare(b) <=> 0;
}

std::strong_ordering compare_segment(std::string_view a, std::string_view b)
{
    const auto na = as_numeric(a);
    const auto nb = as_numeric(b);
    if (na && nb) {
        if (const auto c = compare_digits(na->digits, nb->digits); c != 0) {
            return c;
        }
        return na->suffix <=> nb->suffix;
    }
    return a.compare(b) <=> 0;
}

} // namespace

std::vector<std::string> version_segments(std::string_view version)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= version.size(); ++i) {
        if (i < version.size() && version[i] != '.' && version[i] != '-') {
            if (!std::isalnum(static_cast<unsigned char>(version[i]))) {
                throw Error(ErrorCode::UnparseableVersion,
                            "unexpected character '" + std::string(1, version[i]) + "'", std::string(version));
            }
            continue;
        }
        if (i == start) {
            throw Error(ErrorCode::UnparseableVersion, "empty segment", std::string(version));
        }
        out.emplace_back(version.substr(start, i - start));
        start = i + 1;
    }
    return out;
}

std::strong_ordering compare_versions(std::string_view a, std::string_view b)
{
    const auto sa = version_segments(a);
    const auto sb = version_segments(b);
    const std::size_t n = std::max(sa.size(), sb.size());
    for (std::size_t i = 0; i < n; ++i) {
        std::string_view x = i < sa.size() ? std::string_view(sa[i]) : std::string_view{};
        std::string_view y = i < sb.size() ? std::string_view(sb[i]) : std::string_view{};
        if (x.empty() && as_numeric(y)) {
            x = "0";
        }
        if (y.empty() && as_numeric(x)) {
            y = "0";
        }
        if (const auto c = compare_segment(x, y); c != 0) {
            return c;
        }
    }
    return std::strong_ordering::equal;
}

bool version_in_range(std::string_view version, std::string_view introduced, const std::optional<std::string>& fixed)
{
    if (version == sbom::kUnknownVersion) {
        throw Error(ErrorCode::UnparseableVersion, "unknown version cannot be range-checked", std::string(version));
    }
    if (compare_versions(introduced, version) > 0) {
        return false;
    }
    return !fixed || compare_versions(version, *fixed) < 0;
}

} // namespace firmtriage::matching
