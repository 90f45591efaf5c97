#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace firmtriage {

struct LogEvent {
    std::string timestamp;
    std::string action;
    std::string path;
    std::string outcome;
};

// Append-only audit log. Each event is kept in memory and, when a file is
// attached, written as one tab-separated line: timestamp, action, path, outcome.
class EventLog {
public:
    EventLog() = default;
    explicit EventLog(const std::filesystem::path& file);

    void record(std::string_view action, std::string_view path, std::string_view outcome);
    void warn(std::string_view path, std::string_view message) { record("warning", path, message); }

    [[nodiscard]] const std::vector<LogEvent>& events() const noexcept { return events_; }
    [[nodiscard]] std::size_t count(std::string_view action) const;

private:
    std::vector<LogEvent> events_;
    std::ofstream file_;
};

} // namespace firmtriage
