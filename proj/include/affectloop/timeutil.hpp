#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <string>

namespace affectloop {

/// Milliseconds since the Unix epoch, UTC.
using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;
using Clock = std::function<Timestamp()>;

Timestamp now_utc();
Clock system_clock();

inline std::int64_t to_millis(Timestamp t) { return t.time_since_epoch().count(); }
inline Timestamp from_millis(std::int64_t ms) { return Timestamp{std::chrono::milliseconds{ms}}; }

struct IsoWeek {
    int year = 0;
    unsigned week = 0;

    auto operator<=>(const IsoWeek&) const = default;
};

IsoWeek iso_week(Timestamp t);
IsoWeek next_week(IsoWeek w);
/// "2026-W07"
std::string to_string(IsoWeek w);

/// RFC 3339 with millisecond precision, e.g. "2026-10-14T09:30:00.000Z".
std::string format_rfc3339(Timestamp t);

}  // namespace affectloop
