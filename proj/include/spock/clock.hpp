#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

namespace spock {

using Timestamp = std::chrono::sys_seconds;

/// ISO-8601 basic UTC form, e.g. "20181001T120000Z".
std::string format_timestamp(Timestamp t);
Timestamp parse_timestamp(std::string_view text);
std::optional<Timestamp> try_parse_timestamp(std::string_view text);

class Clock {
public:
    virtual ~Clock() = default;
    virtual Timestamp now() = 0;
    /// Blocks until now() > t.
    virtual void wait_past(Timestamp t) = 0;
};

class SystemClock final : public Clock {
public:
    Timestamp now() override;
    void wait_past(Timestamp t) override;
};

/// Deterministic clock: every now() returns the current value and then
/// advances by one second. wait_past() jumps forward instead of sleeping.
class SteppingClock final : public Clock {
public:
    explicit SteppingClock(Timestamp start) : next_(start) {}
    Timestamp now() override;
    void wait_past(Timestamp t) override;

private:
    Timestamp next_;
};

std::shared_ptr<Clock> system_clock();

} // namespace spock
