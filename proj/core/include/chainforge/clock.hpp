#pragma once

#include <chrono>
#include <string>

namespace chainforge {

/// Current UTC time as `YYYY-MM-DDTHH:MM:SSZ`. When SOURCE_DATE_EPOCH is set
/// in the environment, that instant is used instead, which makes run
/// artifacts byte-reproducible.
std::string utc_timestamp();

std::string format_utc(std::chrono::system_clock::time_point tp);

}  // namespace chainforge
