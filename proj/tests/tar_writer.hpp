#pragma once

// Minimal ustar writer used to generate adversarial archives in tests. Kept
// separate from the library's reader so the two do not share mistakes.

#include "firmtriage/io.hpp"

#include <cstdio>
#include <cstring>
#include <string>

namespace firmtriage::test {

class TarWriter {
public:
    void file(const std::string& name, const std::string& data, unsigned mode = 0644)
    {
        header(name, '0', data.size(), "", mode);
        append(data);
    }
    void directory(const std::string& name) { header(name, '5', 0, "", 0755); }
    void symlink(const std::string& name, const std::string& target) { header(name, '2', 0, target, 0777); }

    Bytes finish()
    {
        out_.resize(out_.size() + 1024, 0);
        return out_;
    }

private:
    void header(const std::string& name, char type, std::size_t size, const std::string& link, unsigned mode)
    {
        char h[512] = {};
        std::strncpy(h, name.c_str(), 100);
        std::snprintf(h + 100, 8, "%07o", mode);
        std::snprintf(h + 108, 8, "%07o", 0u);
        std::snprintf(h + 116, 8, "%07o", 0u);
        std::snprintf(h + 124, 12, "%011zo", size);
        std::snprintf(h + 136, 12, "%011o", 1500000000u);
        h[156] = type;
        std::strncpy(h + 157, link.c_str(), 100);
        std::memcpy(h + 257, "ustar\0" "00", 8);
        std::memset(h + 148, ' ', 8);
        unsigned sum = 0;
        for (const char c : h) {
            sum += static_cast<unsigned char>(c);
        }
        std::snprintf(h + 148, 8, "%06o", sum);
        h[155] = ' ';
        out_.insert(out_.end(), h, h + 512);
    }

    void append(const std::string& data)
    {
        out_.insert(out_.end(), data.begin(), data.end());
        out_.resize((out_.size() + 511) / 512 * 512, 0);
    }

    Bytes out_;
};

} // namespace firmtriage::test
