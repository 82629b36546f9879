#include "conucb/schedule.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "conucb/errors.hpp"

namespace conucb {

ConversationSchedule ConversationSchedule::log(std::size_t q_l) {
    if (q_l == 0) throw ConfigError("log schedule: Q_l must be positive");
    return {ScheduleKind::Log, q_l, 1};
}

ConversationSchedule ConversationSchedule::linear(std::size_t q_l, std::size_t q_q) {
    if (q_l == 0 || q_q == 0) throw ConfigError("linear schedule: Q_l and Q_q must be positive");
    return {ScheduleKind::Linear, q_l, q_q};
}

std::size_t ConversationSchedule::cumulative(std::size_t t) const {
    if (t == 0) return 0;
    switch (kind) {
        case ScheduleKind::None:
            return 0;
        case ScheduleKind::Log:
            return q_l * static_cast<std::size_t>(std::floor(std::log(static_cast<double>(t))));
        case ScheduleKind::Linear:
            return q_l * (t / q_q);
    }
    return 0;
}

bool ConversationSchedule::rate_limited_through(std::size_t horizon) const {
    for (std::size_t t = 1; t <= horizon; ++t) {
        if (cumulative(t) > t) return false;
    }
    return true;
}

std::string ConversationSchedule::label() const {
    switch (kind) {
        case ScheduleKind::None:
            return "none";
        case ScheduleKind::Log:
            return "log:" + std::to_string(q_l);
        case ScheduleKind::Linear:
            return "linear:" + std::to_string(q_l) + ":" + std::to_string(q_q);
    }
    return "none";
}

std::size_t conversation_budget(const ConversationSchedule& schedule, std::size_t t) {
    if (t == 0) return 0;
    const std::size_t now = schedule.cumulative(t);
    const std::size_t before = schedule.cumulative(t - 1);
    return now > before ? now - before : 0;
}

ConversationSchedule parse_schedule(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ':')) parts.push_back(part);
    auto number = [&](const std::string& s) -> std::size_t {
        std::size_t used = 0;
        long long v = -1;
        try {
            v = std::stoll(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != s.size() || v <= 0) throw ConfigError("bad schedule '" + text + "'");
        return static_cast<std::size_t>(v);
    };
    if (parts.size() == 1 && parts[0] == "none") return ConversationSchedule::none();
    if (parts.size() == 2 && parts[0] == "log") return ConversationSchedule::log(number(parts[1]));
    if (parts.size() == 3 && parts[0] == "linear") {
        return ConversationSchedule::linear(number(parts[1]), number(parts[2]));
    }
    throw ConfigError("bad schedule '" + text + "' (expected none, log:Q_l or linear:Q_l:Q_q)");
}

}  // namespace conucb
