#pragma once

// Offline evaluation on logged interactions: each event gets a candidate pool
// built around the logged arm, the policy picks from the pool, and only
// picks that agree with the log reveal a reward.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "conucb/graph.hpp"
#include "conucb/linalg.hpp"
#include "conucb/policy.hpp"
#include "conucb/rng.hpp"
#include "conucb/schedule.hpp"
#include "conucb/world.hpp"

namespace conucb {

struct LoggedEvent {
    std::size_t user = 0;
    std::int64_t timestamp = 0;
    ArmId arm = 0;
    double reward = 0.0;  // 0 or 1
};

struct LoggedDataset {
    std::vector<LoggedEvent> events;  // replay order
    Mat arm_features;                 // d x N, unit columns
    std::shared_ptr<const RelationGraph> graph;  // from the tag file; may be null

    std::size_t num_users() const;
    std::size_t num_arms() const { return static_cast<std::size_t>(arm_features.cols()); }
    std::size_t dim() const { return static_cast<std::size_t>(arm_features.rows()); }
    Vec context(ArmId arm) const { return arm_features.col(static_cast<Eigen::Index>(arm)); }
    double click_rate() const;
};

// Files (comma separated, '#' starts a comment line):
//   events:   user_id, timestamp, arm_id, reward{0|1}
//   features: arm_id, f1, ..., fd     (every arm 0..N-1 exactly once)
//   tags:     arm_id, keyterm_id      (optional; weight 1/n_a per arm)
// Events are stably sorted by timestamp; features are scaled to unit length.
// Problems throw LoadError naming file and line.
LoggedDataset load_logged_dataset(const std::filesystem::path& events, const std::filesystem::path& features,
                                  const std::optional<std::filesystem::path>& tags = std::nullopt);
void save_logged_dataset(const LoggedDataset& data, const std::filesystem::path& events,
                         const std::filesystem::path& features, const std::optional<std::filesystem::path>& tags);

// Synthetic logs from a uniform logging policy: every user gets a random set
// of `interacted` arms; each event picks a user uniformly, then an arm of
// theirs uniformly, and clicks with probability clip(x^T theta_u, 0, 1).
struct SyntheticLogParams {
    std::size_t events = 100000;
    std::size_t interacted = 100;
};
LoggedDataset generate_synthetic_logs(const SyntheticWorld& world, const SyntheticLogParams& params,
                                      std::uint64_t seed);

// Distinct arms each user interacted with, sorted.
std::vector<std::vector<ArmId>> interacted_arms(const LoggedDataset& data);

// theta* = (sum x x^T + ridge I)^{-1} sum x r over the user's events.
Vec fit_ground_truth(const LoggedDataset& data, std::size_t user, double ridge);

struct PooledEvent {
    std::size_t event = 0;    // index into LoggedDataset::events
    std::vector<ArmId> pool;  // logged arm plus extras from the user's history, shuffled
};

struct PooledDataset {
    std::vector<PooledEvent> events;
    std::size_t pool_size = 0;
    std::size_t skipped = 0;  // events whose user has fewer than pool_size distinct arms
};

PooledDataset build_pools(const LoggedDataset& data, std::size_t pool_size, Rng& rng);

// Key-term answers during replay come from fitted preferences.
struct ReplayFeedback {
    std::vector<Vec> theta_star;  // per user
    Mat pseudo_contexts;          // d x K, full-arm
    bool binary = false;
    std::uint64_t seed = 0;       // Bernoulli stream in binary mode
};

ReplayFeedback make_replay_feedback(const LoggedDataset& data, double ridge, bool binary, std::uint64_t seed);

struct ReplayWindow {
    std::size_t index = 0;
    std::size_t events = 0;
    std::size_t matches = 0;
    double clicks = 0.0;         // policy clicks over matched events
    double logged_clicks = 0.0;  // all events in the window
    std::optional<double> ctr;             // clicks / matches, null if no match
    std::optional<double> normalized_ctr;  // ctr / logged ctr of the window
};

struct ReplayReport {
    std::string policy;
    std::vector<ReplayWindow> windows;
    std::size_t events = 0;
    std::size_t matches = 0;
    double clicks = 0.0;
    double logged_clicks = 0.0;

    std::optional<double> ctr() const;
    double logged_ctr() const;
    std::optional<double> normalized_ctr() const;
    // Binomial standard error of ctr().
    double standard_error() const;
};

inline constexpr std::size_t kReplayWindow = 500;

using PolicyFactory = std::function<PolicyPtr(std::size_t user)>;

// One fresh policy per user. Conversations for a user's round t (t = that
// user's matches so far + 1) happen once, at the first event of the round.
ReplayReport replay(const PolicyFactory& factory, const LoggedDataset& data, const PooledDataset& pooled,
                    const ConversationSchedule& schedule, const ReplayFeedback* feedback,
                    std::size_t window = kReplayWindow);

void write_replay_csv(const ReplayReport& report, const std::filesystem::path& path);

// Always picks the logged arm; the logging policy replayed against itself.
class LoggedArmPolicy final : public Policy {
public:
    LoggedArmPolicy(std::size_t dim) : dim_(dim) {}
    std::string name() const override { return "logged"; }
    std::size_t dim() const override { return dim_; }
    void set_logged(ArmId arm) { logged_ = arm; }
    std::size_t select(const ContextSlate& slate) override;
    void observe(const ContextSlate&, std::size_t, double) override {}
    Vec estimate() const override { return Vec::Zero(static_cast<Eigen::Index>(dim_)); }

private:
    std::size_t dim_;
    ArmId logged_ = 0;
};

}  // namespace conucb
