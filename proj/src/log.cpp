#include "firmtriage/log.hpp"

#include "firmtriage/error.hpp"
#include "firmtriage/io.hpp"

#include <algorithm>

namespace firmtriage {

EventLog::EventLog(const std::filesystem::path& file) : file_(file, std::ios::app)
{
    if (!file_) {
        throw Error(ErrorCode::IoError, "cannot open log file", file.string());
    }
}

void EventLog::record(std::string_view action, std::string_view path, std::string_view outcome)
{
    LogEvent ev{utc_timestamp(), std::string(action), std::string(path), std::string(outcome)};
    if (file_.is_open()) {
        file_ << ev.timestamp << '\t' << ev.action << '\t' << ev.path << '\t' << ev.outcome << '\n';
        file_.flush();
    }
    events_.push_back(std::move(ev));
}

std::size_t EventLog::count(std::string_view action) const
{
    return static_cast<std::size_t>(
        std::count_if(events_.begin(), events_.end(), [&](const LogEvent& e) { return e.action == action; }));
}

} // namespace firmtriage
