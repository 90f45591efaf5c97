#pragma once

#include "firmtriage/io.hpp"

#include <filesystem>
#include <random>
#include <string>
#include <string_view>

namespace firmtriage::test {

inline std::filesystem::path fixture(const std::string& name)
{
    return std::filesystem::path(FIRMTRIAGE_FIXTURE_DIR) / name;
}

inline std::filesystem::path golden(const std::string& name)
{
    return std::filesystem::path(FIRMTRIAGE_GOLDEN_DIR) / name;
}

// Scratch directory removed on destruction.
class TempDir {
public:
    TempDir()
    {
        static std::mt19937_64 rng{std::random_device{}()};
        path_ = std::filesystem::temp_directory_path() / ("firmtriage-test-" + std::to_string(rng()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        for (auto it = std::filesystem::recursive_directory_iterator(path_, ec);
             !ec && it != std::filesystem::recursive_directory_iterator(); it.increment(ec)) {
            if (it->is_directory(ec) && !it->is_symlink(ec)) {
                std::filesystem::permissions(it->path(), std::filesystem::perms::owner_all,
                                             std::filesystem::perm_options::add, ec);
            }
        }
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

inline Bytes random_bytes(std::size_t n, std::uint32_t seed)
{
    std::mt19937 rng(seed);
    Bytes out(n);
    for (auto& b : out) {
        b = static_cast<std::uint8_t>(rng() & 0xFF);
    }
    return out;
}

// Writes `data` at root/rel, creating parent directories.
inline void put(const std::filesystem::path& root, const std::string& rel, std::string_view data)
{
    const auto path = root / rel;
    std::filesystem::create_directories(path.parent_path());
    write_text(path, data);
}

// Every regular file, directory and symlink below `root`, as sorted relative paths.
inline std::vector<std::string> listing(const std::filesystem::path& root)
{
    std::vector<std::string> out;
    std::error_code ec;
    for (auto it = std::filesystem::recursive_directory_iterator(root, ec);
         !ec && it != std::filesystem::recursive_directory_iterator(); it.increment(ec)) {
        out.push_back(it->path().lexically_relative(root).generic_string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace firmtriage::test
