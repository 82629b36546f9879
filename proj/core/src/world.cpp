#include "conucb/world.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "conucb/errors.hpp"

namespace conucb {

void validate(const WorldParams& p) {
    if (p.dim == 0 || p.num_arms == 0 || p.num_keyterms == 0 || p.num_users == 0 || p.max_keyterms_per_arm == 0)
        throw ConfigError("world: d, N, K, N_u and M_max must all be at least 1");
    if (!(p.sigma_g > 0.0) || !std::isfinite(p.sigma_g)) throw ConfigError("world: sigma_g must be positive");
    if (p.hidden_dim >= p.dim) throw ConfigError("world: hidden_dim must be smaller than dim");
}

std::vector<ArmId> sample_without_replacement(std::size_t population, std::size_t size, Rng& rng) {
    if (size > population) throw ConfigError("sample: size exceeds population");
    std::vector<ArmId> ids(population);
    std::iota(ids.begin(), ids.end(), ArmId{0});
    // Partial Fisher-Yates; the first `size` entries are the sample.
    for (std::size_t i = 0; i < size; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, population - 1);
        std::swap(ids[i], ids[pick(rng)]);
    }
    ids.resize(size);
    return ids;
}

SyntheticWorld generate_world(const WorldParams& params, std::uint64_t seed) {
    validate(params);
    Rng rng(derive_seed({seed, kWorldStream}));
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::normal_distribution<double> gauss(0.0, params.sigma_g);

    const auto d = static_cast<Eigen::Index>(params.dim);
    const std::size_t n = params.num_arms;
    const std::size_t k_all = params.num_keyterms;
    const std::size_t m_max = std::min(params.max_keyterms_per_arm, k_all);

    Mat keyterms(d, static_cast<Eigen::Index>(k_all));
    for (Eigen::Index k = 0; k < keyterms.cols(); ++k)
        for (Eigen::Index i = 0; i < d; ++i) keyterms(i, k) = unit(rng);

    std::vector<std::vector<KeyTermId>> sets(n);
    Mat arms(d, static_cast<Eigen::Index>(n));
    std::uniform_int_distribution<std::size_t> count(1, m_max);
    for (std::size_t a = 0; a < n; ++a) {
        const std::size_t na = count(rng);
        sets[a] = sample_without_replacement(k_all, na, rng);
        std::sort(sets[a].begin(), sets[a].end());
        Vec mean = Vec::Zero(d);
        for (KeyTermId k : sets[a]) mean += keyterms.col(static_cast<Eigen::Index>(k));
        mean /= static_cast<double>(na);
        Vec x(d);
        for (Eigen::Index i = 0; i < d; ++i) x(i) = mean(i) + gauss(rng);
        const double norm = x.norm();
        if (!(norm > 0.0)) throw NumericalError("world: degenerate arm feature");
        arms.col(static_cast<Eigen::Index>(a)) = x / norm;
    }

    Mat users(d, static_cast<Eigen::Index>(params.num_users));
    for (Eigen::Index u = 0; u < users.cols(); ++u)
        for (Eigen::Index i = 0; i < d; ++i) users(i, u) = unit(rng);

    // Compact away key-terms nobody picked.
    std::vector<bool> used(k_all, false);
    for (const auto& s : sets)
        for (KeyTermId k : s) used[k] = true;
    std::vector<KeyTermId> remap(k_all, 0);
    std::size_t kept = 0;
    for (std::size_t k = 0; k < k_all; ++k)
        if (used[k]) remap[k] = kept++;

    SyntheticWorld world;
    world.params = params;
    world.seed = seed;
    world.keyterm_features.resize(d, static_cast<Eigen::Index>(kept));
    for (std::size_t k = 0; k < k_all; ++k)
        if (used[k]) world.keyterm_features.col(static_cast<Eigen::Index>(remap[k])) = keyterms.col(static_cast<Eigen::Index>(k));

    std::vector<Edge> edges;
    for (std::size_t a = 0; a < n; ++a) {
        for (KeyTermId& k : sets[a]) k = remap[k];
        const double w = 1.0 / static_cast<double>(sets[a].size());
        for (KeyTermId k : sets[a]) edges.push_back({a, k, w});
    }
    world.arm_keyterms = std::move(sets);
    world.arm_features = std::move(arms);
    world.user_preferences = std::move(users);
    world.graph = std::make_shared<const RelationGraph>(n, kept, std::move(edges));
    world.keyterm_contexts = key_term_contexts(*world.graph, world.arm_features);
    return world;
}

Mat SyntheticWorld::observable_arm_features() const {
    return arm_features.topRows(static_cast<Eigen::Index>(params.observable_dim()));
}

Mat SyntheticWorld::observable_keyterm_contexts() const {
    return keyterm_contexts.topRows(static_cast<Eigen::Index>(params.observable_dim()));
}

double SyntheticWorld::expected_arm_reward(std::size_t user, ArmId arm) const {
    return arm_features.col(static_cast<Eigen::Index>(arm)).dot(user_preferences.col(static_cast<Eigen::Index>(user)));
}

double SyntheticWorld::expected_keyterm_reward(std::size_t user, KeyTermId k) const {
    return keyterm_contexts.col(static_cast<Eigen::Index>(k)).dot(user_preferences.col(static_cast<Eigen::Index>(user)));
}

double arm_reward(const SyntheticWorld& world, std::size_t user, ArmId arm, double round_noise) {
    return world.expected_arm_reward(user, arm) + round_noise;
}

double keyterm_reward(const SyntheticWorld& world, std::size_t user, KeyTermId k, double round_noise) {
    return world.expected_keyterm_reward(user, k) + round_noise;
}

double binary_feedback(double mean, double uniform) {
    const double p = std::clamp(mean, 0.0, 1.0);
    return uniform < p ? 1.0 : 0.0;
}

ContextSlate sample_slate(const SyntheticWorld& world, std::size_t size, Rng& rng, std::size_t round) {
    if (size == 0) throw ConfigError("sample_slate: size must be positive");
    if (size > world.num_arms()) throw ConfigError("sample_slate: size exceeds the number of arms");
    std::vector<ArmId> ids = sample_without_replacement(world.num_arms(), size, rng);
    const auto obs = static_cast<Eigen::Index>(world.params.observable_dim());
    Mat contexts(obs, static_cast<Eigen::Index>(size));
    for (std::size_t j = 0; j < size; ++j)
        contexts.col(static_cast<Eigen::Index>(j)) = world.arm_features.col(static_cast<Eigen::Index>(ids[j])).head(obs);
    return make_slate(round, std::move(ids), std::move(contexts), world.params.hidden_dim == 0);
}

}  // namespace conucb
