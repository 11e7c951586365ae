#include "chainforge/clock.hpp"

#include <cstdlib>
#include <ctime>

namespace chainforge {

std::string format_utc(std::chrono::system_clock::time_point tp) {
    const std::time_t t = std::chrono::system_clock::to_time_t(tp);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string utc_timestamp() {
    if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch != nullptr && *epoch != '\0') {
        char* end = nullptr;
        const long long secs = std::strtoll(epoch, &end, 10);
        if (end != epoch && *end == '\0') {
            return format_utc(std::chrono::system_clock::time_point(std::chrono::seconds(secs)));
        }
    }
    return format_utc(std::chrono::system_clock::now());
}

}  // namespace chainforge
