#pragma once

#include <cstddef>
#include <string>

namespace conucb {

enum class ScheduleKind {
    None,    // b(t) = 0
    Log,     // b(t) = Q_l * floor(ln t)
    Linear,  // b(t) = Q_l * floor(t / Q_q)
};

// Conversation frequency b(t): the number of key-term queries made up to
// round t. Natural logarithm for the log family.
struct ConversationSchedule {
    ScheduleKind kind = ScheduleKind::None;
    std::size_t q_l = 0;
    std::size_t q_q = 1;

    static ConversationSchedule none() { return {}; }
    static ConversationSchedule log(std::size_t q_l);
    static ConversationSchedule linear(std::size_t q_l, std::size_t q_q);

    // b(t) for t >= 0, with b(0) = 0.
    std::size_t cumulative(std::size_t t) const;

    // True when b(t) <= t for every t in [1, horizon]. The log family with
    // Q_l >= 2 breaks this for a few early rounds.
    bool rate_limited_through(std::size_t horizon) const;

    // "none", "log:5", "linear:5:50".
    std::string label() const;
};

// floor(b(t)) - floor(b(t-1)); q(t) = 1 iff this is positive.
std::size_t conversation_budget(const ConversationSchedule& schedule, std::size_t t);

// Inverse of label(). Throws ConfigError on malformed input.
ConversationSchedule parse_schedule(const std::string& text);

}  // namespace conucb
