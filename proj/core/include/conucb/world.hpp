#pragma once

// Synthetic environment: key-term pseudo-features, arms built around the
// key-terms they relate to, and uniformly drawn user preferences.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include "conucb/graph.hpp"
#include "conucb/linalg.hpp"
#include "conucb/rng.hpp"
#include "conucb/slate.hpp"

namespace conucb {

struct WorldParams {
    std::size_t dim = 20;  // full feature dimension, hidden part included
    std::size_t num_arms = 1000;
    std::size_t num_keyterms = 100;
    std::size_t num_users = 20;
    std::size_t max_keyterms_per_arm = 5;
    double sigma_g = 0.1;
    std::size_t hidden_dim = 0;  // trailing coordinates not shown to learners

    std::size_t observable_dim() const { return dim - hidden_dim; }
};

// Throws ConfigError on zero sizes, sigma_g <= 0 or hidden_dim >= dim.
void validate(const WorldParams& params);

struct SyntheticWorld {
    WorldParams params;
    std::uint64_t seed = 0;

    Mat keyterm_features;   // dim x K, entries U(-1, 1)
    Mat arm_features;       // dim x N, unit columns
    std::vector<std::vector<KeyTermId>> arm_keyterms;  // Y_a, equal weights 1/n_a
    Mat user_preferences;   // dim x N_u, entries U(-1, 1)
    std::shared_ptr<const RelationGraph> graph;
    Mat keyterm_contexts;   // dim x K, full-arm pseudo-contexts

    std::size_t num_arms() const { return static_cast<std::size_t>(arm_features.cols()); }
    std::size_t num_keyterms() const { return graph->num_keyterms(); }
    std::size_t num_users() const { return static_cast<std::size_t>(user_preferences.cols()); }

    Vec preference(std::size_t user) const { return user_preferences.col(static_cast<Eigen::Index>(user)); }

    // Feature columns visible to learners (leading observable_dim rows).
    Mat observable_arm_features() const;
    Mat observable_keyterm_contexts() const;

    // x_a^T theta_u
    double expected_arm_reward(std::size_t user, ArmId arm) const;
    // sum_a w_{a,k} / (sum_a' w_{a',k}) x_a^T theta_u over all arms.
    double expected_keyterm_reward(std::size_t user, KeyTermId k) const;
};

// Deterministic in (params, seed). Key-terms that end up with no related arm
// are dropped and the remaining ids compacted.
SyntheticWorld generate_world(const WorldParams& params, std::uint64_t seed);

// x_a^T theta_u + noise, with the noise drawn once per round for all arms.
double arm_reward(const SyntheticWorld& world, std::size_t user, ArmId arm, double round_noise);
double keyterm_reward(const SyntheticWorld& world, std::size_t user, KeyTermId k, double round_noise);

// Bernoulli draw with mean clipped to [0, 1]; `uniform` is a U(0,1) variate.
double binary_feedback(double mean, double uniform);

// Uniform subset without replacement, in random order. size > N throws ConfigError.
// hidden-feature worlds yield non-unit observable contexts, so the unit-norm
// check applies only when hidden_dim == 0.
ContextSlate sample_slate(const SyntheticWorld& world, std::size_t size, Rng& rng, std::size_t round = 0);

// Ids only; sample_slate builds on this.
std::vector<ArmId> sample_without_replacement(std::size_t population, std::size_t size, Rng& rng);

}  // namespace conucb
