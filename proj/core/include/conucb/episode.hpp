#pragma once

// One user, one policy, T rounds against a synthetic world.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "conucb/policy.hpp"
#include "conucb/schedule.hpp"
#include "conucb/world.hpp"

namespace conucb {

struct RoundRecord {
    std::size_t round = 0;
    std::vector<ArmId> slate;  // only when EpisodeOptions::record_slates
    ArmId chosen = 0;
    double reward = 0.0;
    double regret = 0.0;  // expected-reward gap to the best slate arm
    std::size_t conversations = 0;
};

struct EpisodeTrace {
    std::vector<RoundRecord> rounds;
    std::vector<double> cumulative_regret;  // R(1..T)
    std::vector<std::size_t> error_rounds;  // rounds where parameter error was sampled
    std::vector<double> parameter_error;    // ||theta_t - theta*||_2 at those rounds

    double final_regret() const { return cumulative_regret.empty() ? 0.0 : cumulative_regret.back(); }
};

// Handed to the diagnostics hook after select() and before observe().
struct RoundDiagnostics {
    std::size_t round;
    std::size_t position;
    const ContextSlate& slate;
    const Policy& policy;
    const std::vector<Query>& queries;
};

struct EpisodeOptions {
    std::size_t horizon = 1;
    std::size_t slate_size = 50;
    ConversationSchedule schedule;
    std::uint64_t seed = 0;  // environment stream: slates and noise
    bool binary = false;     // Bernoulli feedback with clipped mean
    std::size_t error_every = 50;
    bool record_slates = false;
    std::function<void(const RoundDiagnostics&)> diagnostics;
};

// Environment draws per round, in this order: slate, arm noise, key-term
// noise, two uniforms for binary mode. The count never depends on the policy,
// so every policy run with the same seed sees identical slates and noise.
EpisodeTrace run_episode(Policy& policy, const SyntheticWorld& world, std::size_t user, const EpisodeOptions& options);

// The same episode advanced one round at a time, so that the episodes of
// several users can be interleaved when their policies share state.
class Episode {
public:
    Episode(Policy& policy, const SyntheticWorld& world, std::size_t user, EpisodeOptions options);
    Episode(Episode&&) noexcept;
    Episode& operator=(Episode&&) noexcept;
    ~Episode();

    bool done() const;
    void step();
    const EpisodeTrace& trace() const;

private:
    struct State;
    std::unique_ptr<State> state_;
};

// Round t of every episode before round t + 1 of any, in the given order.
void run_interleaved(std::vector<Episode>& episodes);

}  // namespace conucb
