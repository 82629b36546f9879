#pragma once

// Experiment orchestration: policies x seeds x users on synthetic worlds,
// aggregation over (seed, user) pairs, and CSV/manifest emission.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "conucb/episode.hpp"
#include "conucb/hidden.hpp"
#include "conucb/policy.hpp"
#include "conucb/replay.hpp"
#include "conucb/schedule.hpp"
#include "conucb/world.hpp"

namespace conucb {

enum class PolicyKind { LinUCB, ArmCon, ConUCB, VarRS, VarMRC, VarLCR, HLinUCB, HConUCB, Oracle, Random, Logged };

std::string to_string(PolicyKind kind);
// Accepts the to_string spellings ("linucb", "armcon", "conucb", "varrs",
// "varmrc", "varlcr", "hlinucb", "hconucb", "oracle", "random", "logged").
// "logged" only makes sense in replay.
PolicyKind parse_policy_kind(const std::string& text);

struct PolicySpec {
    std::string name;
    PolicyKind kind = PolicyKind::ConUCB;
    ConUCBParams conucb;   // conversational kinds
    LinUCBParams linucb;   // linucb, armcon, hlinucb
    HiddenParams hidden;   // hlinucb, hconucb
};

struct ExperimentConfig {
    WorldParams world;
    std::optional<std::uint64_t> world_seed;  // fixed world for every seed if set
    std::vector<PolicySpec> policies;
    ConversationSchedule schedule = ConversationSchedule::log(5);
    std::size_t horizon = 2000;
    std::size_t slate_size = 50;
    std::vector<std::uint64_t> seeds;
    std::size_t error_every = 50;
    bool binary = false;
    bool bound = false;  // also evaluate the regret bound for ConUCB-style parameters
    std::size_t threads = 0;  // 0: hardware concurrency
    bool verbose = false;     // per-round diagnostics for the first seed and user
    std::filesystem::path output = "out";

    // Offline replay.
    std::optional<std::filesystem::path> events_path;
    std::optional<std::filesystem::path> features_path;
    std::optional<std::filesystem::path> tags_path;
    std::size_t pool_size = 50;
    double truth_ridge = 1.0;
};

// Six policies of the synthetic comparison with tuned exploration constants.
std::vector<PolicySpec> default_policies();
// d=20, N=1000, K=100, N_u=20, T=2000, slates of 50, seeds 1..10.
ExperimentConfig desk_config();
// d=50, N=5000, K=500, N_u=200, T=1000.
ExperimentConfig full_config();
// Hidden-feature study: 20 features of which 5 hidden; LinUCB, hLinUCB, hConUCB.
ExperimentConfig hidden_config();

// Throws ConfigError describing the first problem found.
void validate(const ExperimentConfig& config);

std::string config_to_json(const ExperimentConfig& config);
// Missing keys keep desk_config() defaults.
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

// What a policy needs from its environment.
struct WorldHandles {
    std::size_t dim = 0;  // observable
    std::size_t num_arms = 0;
    std::shared_ptr<const RelationGraph> graph;
    std::shared_ptr<const Mat> pseudo_contexts;  // observable part, d x K
    std::shared_ptr<const Mat> preferences;      // ground truth (d x N_u), for the oracle policy
};
WorldHandles make_handles(const SyntheticWorld& world);
WorldHandles make_handles(const LoggedDataset& data, const std::vector<Vec>* theta_star = nullptr);
// Hidden-feature kinds join `store` when given; otherwise each owns one.
PolicyPtr make_policy(const PolicySpec& spec, const WorldHandles& handles, std::size_t user, std::uint64_t seed,
                      std::shared_ptr<HiddenFeatureStore> store = nullptr);
bool uses_hidden_features(PolicyKind kind);
// One store per (seed, policy) shared by every user; null for other kinds.
std::shared_ptr<HiddenFeatureStore> make_feature_store(const PolicySpec& spec, const WorldHandles& handles,
                                                       std::uint64_t seed);

// Sums over the users of one seed.
struct SeriesSums {
    std::vector<double> sum;
    std::vector<double> sumsq;
    std::size_t n = 0;

    void add(const std::vector<double>& values);
    SeriesSums& operator+=(const SeriesSums& other);
};

struct PolicySeedStats {
    SeriesSums regret;
    SeriesSums error;
    std::vector<double> final_regret;  // per user
};

struct SeedStats {
    std::uint64_t seed = 0;
    std::vector<PolicySeedStats> policies;  // config order
    SeriesSums bound;                       // empty unless bound reporting is on
};

struct SeriesSummary {
    std::vector<std::size_t> rounds;
    std::vector<double> mean;
    std::vector<double> stddev;
    std::size_t n = 0;
};

SeriesSummary summarize(const SeriesSums& sums, std::vector<std::size_t> rounds);

struct PolicyReport {
    std::string name;
    SeriesSummary regret;
    SeriesSummary error;
    std::map<std::uint64_t, double> seed_final_regret;  // mean over users
};

struct AggregateReport {
    std::string schedule;
    std::size_t horizon = 0;
    std::vector<PolicyReport> policies;
    std::optional<SeriesSummary> bound;
    std::vector<SeedStats> seeds;  // sorted by seed
    std::vector<std::string> diagnostics;  // JSON lines, verbose mode only

    const PolicyReport& policy(const std::string& name) const;
};

// Users of a seed run interleaved round by round (policies with hidden
// features share them across users). Seeds are processed by a worker pool; results are combined in seed order,
// so the report does not depend on scheduling or on the order of `seeds`.
AggregateReport run_benchmark(const ExperimentConfig& config);

// Combines per-seed statistics (also used by `report`).
AggregateReport aggregate(const ExperimentConfig& config, std::vector<SeedStats> seeds);

// The regret bound at horizon T for parameters satisfying
// lambda in (0, 0.5] and lambda~ >= 2(1 - lambda)/(lambda (1 - sqrt(lambda))^2).
// b(T) below one is treated as one inside the logarithm.
double regret_bound(std::size_t dim, double lambda, double sigma, std::size_t horizon, double theta_norm,
                      std::size_t conversations);
bool regret_bound_applicable(double lambda, double lambda_tilde);
double regret_bound_min_lambda_tilde(double lambda);

// Per-round bound averaged over users and seeds; nullopt when no policy
// spec satisfies the constraints (the first ConUCB spec's parameters are used).
std::optional<SeriesSummary> regret_bound_series(const ExperimentConfig& config);

struct SweepRow {
    std::string schedule;
    std::string policy;
    double mean = 0.0;
    double stddev = 0.0;
    std::size_t n = 0;
};
std::vector<SweepRow> sweep_schedules(const ExperimentConfig& config,
                                      const std::vector<ConversationSchedule>& schedules);

// Writers. Numbers are printed with a fixed format so reruns are byte-identical.
std::string format_number(double value);
void write_report(const AggregateReport& report, const ExperimentConfig& config, const std::filesystem::path& dir);
void write_sweep(const std::vector<SweepRow>& rows, const std::filesystem::path& path);
void write_manifest(const ExperimentConfig& config, const std::filesystem::path& path, const std::string& command);

// Reads seed_stats.csv and manifest.json written by write_report.
AggregateReport reaggregate(const std::filesystem::path& dir, ExperimentConfig* config_out = nullptr);

// Replays every configured policy (besides oracle) on the configured logs.
std::vector<ReplayReport> run_replay(const ExperimentConfig& config, std::uint64_t seed);

}  // namespace conucb
