#pragma once

#include <compare>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace firmtriage::matching {

// Versions split on '.' and '-'. Two numeric segments compare numerically; a
// numeric segment with one trailing letter ("2k") orders after the bare
// number and alphabetically among suffixes; any other pair compares
// lexicographically. A missing trailing segment counts as 0 against a numeric
// segment and as the empty string otherwise, so "1.0" == "1.0.0".
// Segments must be non-empty and alphanumeric; otherwise Error{UnparseableVersion}.
std::strong_ordering compare_versions(std::string_view a, std::string_view b);

std::vector<std::string> version_segments(std::string_view version);

// introduced <= version < fixed. Throws Error{UnparseableVersion} for the
// unknown-version sentinel.
bool version_in_range(std::string_view version, std::string_view introduced,
                      const std::optional<std::string>& fixed);

} // namespace firmtriage::matching
