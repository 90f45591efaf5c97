#include <httplib.h>

#include "firmtriage/enrichment.hpp"
#include "firmtriage/error.hpp"

#include <regex>

namespace firmtriage::enrichment {

Transport http_transport()
{
    return [](const std::string& url, std::chrono::milliseconds timeout) -> HttpResponse {
        static const std::regex split(R"(^(https?://[^/?#]+)(.*)$)");
        std::smatch m;
        if (!std::regex_match(url, m, split)) {
            throw Error(ErrorCode::ConfigError, "unsupported URL", url);
        }
        httplib::Client client(m.str(1));
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_follow_location(true);
        const std::string path = m.length(2) > 0 ? m.str(2) : "/";
        auto res = client.Get(path);
        if (!res) {
            throw Error(ErrorCode::NetworkError, httplib::to_string(res.error()), url);
        }
        return {res->status, res->body};
    };
}

} // namespace firmtriage::enrichment
