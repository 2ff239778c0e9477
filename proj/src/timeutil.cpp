#include "affectloop/timeutil.hpp"

#include <cstdio>

namespace affectloop {

using namespace std::chrono;

Timestamp now_utc() { return time_point_cast<milliseconds>(std::chrono::system_clock::now()); }

Clock system_clock() { return [] { return now_utc(); }; }

IsoWeek iso_week(Timestamp t) {
    const sys_days day = floor<days>(t);
    // ISO weeks belong to the year containing their Thursday.
    const unsigned iso_weekday = weekday{day}.iso_encoding();  // Mon=1 .. Sun=7
    const sys_days thursday = day + days{4 - static_cast<int>(iso_weekday)};
    const year_month_day thursday_ymd{thursday};
    const sys_days jan1 = sys_days{thursday_ymd.year() / January / 1};
    const auto week = static_cast<unsigned>((thursday - jan1).count() / 7 + 1);
    return {static_cast<int>(thursday_ymd.year()), week};
}

IsoWeek next_week(IsoWeek w) {
    // Thursday of week w, plus seven days.
    const sys_days jan4 = sys_days{year{w.year} / January / 4};
    const unsigned jan4_weekday = weekday{jan4}.iso_encoding();
    const sys_days week1_monday = jan4 - days{jan4_weekday - 1};
    const sys_days thursday = week1_monday + days{7 * (w.week - 1) + 3};
    return iso_week(time_point_cast<milliseconds>(thursday + days{7}));
}

std::string to_string(IsoWeek w) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-W%02u", w.year, w.week);
    return buf;
}

std::string format_rfc3339(Timestamp t) {
    const sys_days day = floor<days>(t);
    const year_month_day ymd{day};
    const hh_mm_ss<milliseconds> tod{t - day};
    char buf[40];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(tod.hours().count()), static_cast<int>(tod.minutes().count()),
                  static_cast<int>(tod.seconds().count()),
                  static_cast<int>(tod.subseconds().count()));
    return buf;
}

}  // namespace affectloop
