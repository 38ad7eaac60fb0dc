#include <spock/clock.hpp>
#include <spock/error.hpp>

#include <charconv>
#include <ctime>
#include <thread>

namespace spock {

std::string format_timestamp(Timestamp t) {
    std::time_t tt = t.time_since_epoch().count();
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
    return buf;
}

std::optional<Timestamp> try_parse_timestamp(std::string_view text) {
    // YYYYMMDDTHHMMSSZ
    if (text.size() != 16 || text[8] != 'T' || text[15] != 'Z') return std::nullopt;
    auto field = [&](std::size_t pos, std::size_t len) -> std::optional<int> {
        int v = 0;
        auto first = text.data() + pos;
        auto [ptr, ec] = std::from_chars(first, first + len, v);
        if (ec != std::errc{} || ptr != first + len) return std::nullopt;
        return v;
    };
    auto y = field(0, 4), mo = field(4, 2), d = field(6, 2);
    auto h = field(9, 2), mi = field(11, 2), s = field(13, 2);
    if (!y || !mo || !d || !h || !mi || !s) return std::nullopt;
    std::chrono::year_month_day ymd{std::chrono::year{*y}, std::chrono::month{unsigned(*mo)},
                                    std::chrono::day{unsigned(*d)}};
    if (!ymd.ok() || *h > 23 || *mi > 59 || *s > 59) return std::nullopt;
    return std::chrono::sys_days{ymd} + std::chrono::hours{*h} + std::chrono::minutes{*mi} +
           std::chrono::seconds{*s};
}

Timestamp parse_timestamp(std::string_view text) {
    auto t = try_parse_timestamp(text);
    if (!t) throw Error(ErrorCode::parse, "bad timestamp '" + std::string(text) + "'");
    return *t;
}

Timestamp SystemClock::now() {
    return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
}

void SystemClock::wait_past(Timestamp t) {
    while (now() <= t) {
        auto target = t + std::chrono::seconds{1};
        std::this_thread::sleep_until(target);
    }
}

Timestamp SteppingClock::now() {
    auto t = next_;
    next_ += std::chrono::seconds{1};
    return t;
}

void SteppingClock::wait_past(Timestamp t) {
    if (next_ <= t) next_ = t + std::chrono::seconds{1};
}

std::shared_ptr<Clock> system_clock() {
    static auto clock = std::make_shared<SystemClock>();
    return clock;
}

} // namespace spock
