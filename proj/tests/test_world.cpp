#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "conucb/errors.hpp"
#include "conucb/world.hpp"
#include "support.hpp"

using namespace conucb;
using namespace testing_support;

namespace {

WorldParams small(std::size_t dim = 6, std::size_t arms = 40, std::size_t keyterms = 12) {
    WorldParams p;
    p.dim = dim;
    p.num_arms = arms;
    p.num_keyterms = keyterms;
    p.num_users = 4;
    p.max_keyterms_per_arm = 3;
    return p;
}

}  // namespace

TEST(World, DeterministicInSeed) {
    const SyntheticWorld a = generate_world(small(), 12);
    const SyntheticWorld b = generate_world(small(), 12);
    const SyntheticWorld c = generate_world(small(), 13);
    EXPECT_EQ(a.arm_features, b.arm_features);
    EXPECT_EQ(a.user_preferences, b.user_preferences);
    EXPECT_EQ(a.keyterm_features, b.keyterm_features);
    EXPECT_EQ(a.arm_keyterms, b.arm_keyterms);
    EXPECT_NE(a.arm_features, c.arm_features);
}

TEST(World, Invariants) {
    const SyntheticWorld w = generate_world(small(8, 200, 30), 3);
    EXPECT_EQ(w.num_arms(), 200u);
    EXPECT_LE(w.num_keyterms(), 30u);
    EXPECT_EQ(w.keyterm_features.cols(), static_cast<Eigen::Index>(w.num_keyterms()));
    for (Eigen::Index a = 0; a < w.arm_features.cols(); ++a) EXPECT_NEAR(w.arm_features.col(a).norm(), 1.0, 1e-12);
    EXPECT_LE(w.user_preferences.cwiseAbs().maxCoeff(), 1.0);
    EXPECT_LE(w.keyterm_features.cwiseAbs().maxCoeff(), 1.0);
    for (ArmId a = 0; a < w.num_arms(); ++a) {
        const auto& y = w.arm_keyterms[a];
        EXPECT_GE(y.size(), 1u);
        EXPECT_LE(y.size(), 3u);
        EXPECT_EQ(std::set<KeyTermId>(y.begin(), y.end()).size(), y.size());
        double row = 0.0;
        for (const auto& e : w.graph->keyterms_of(a)) {
            row += e.weight;
            EXPECT_DOUBLE_EQ(e.weight, 1.0 / static_cast<double>(y.size()));
        }
        EXPECT_NEAR(row, 1.0, 1e-12);
    }
    for (KeyTermId k = 0; k < w.num_keyterms(); ++k) EXPECT_GT(w.graph->column_sum(k), 0.0);
    EXPECT_LE((w.keyterm_contexts - key_term_contexts(*w.graph, w.arm_features)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(World, TinyNoiseSingleKeytermAlignsWithKeyterm) {
    WorldParams p = small(5, 30, 10);
    p.max_keyterms_per_arm = 1;
    p.sigma_g = 1e-12;
    const SyntheticWorld w = generate_world(p, 21);
    for (ArmId a = 0; a < w.num_arms(); ++a) {
        ASSERT_EQ(w.arm_keyterms[a].size(), 1u);
        const Vec k = w.keyterm_features.col(static_cast<Eigen::Index>(w.arm_keyterms[a][0]));
        EXPECT_LE((w.arm_features.col(static_cast<Eigen::Index>(a)) - k / k.norm()).norm(), 1e-9);
    }
}

TEST(World, ValidationErrors) {
    WorldParams p = small();
    p.sigma_g = 0.0;
    EXPECT_THROW(generate_world(p, 1), ConfigError);
    p = small();
    p.hidden_dim = p.dim;
    EXPECT_THROW(generate_world(p, 1), ConfigError);
    p = small();
    p.num_arms = 0;
    EXPECT_THROW(generate_world(p, 1), ConfigError);
}

TEST(WorldRewards, ArmAndKeytermExamples) {
    SyntheticWorld w = generate_world(small(2, 2, 1), 1);
    w.arm_features << 1, 0, 0, 1;
    w.user_preferences.col(0) << 0.5, -0.25;
    w.keyterm_contexts = key_term_contexts(*w.graph, w.arm_features);
    EXPECT_DOUBLE_EQ(arm_reward(w, 0, 0, 0.0), 0.5);
    EXPECT_DOUBLE_EQ(arm_reward(w, 0, 1, 0.1), -0.15);
    // single key-term shared by both arms with equal weight
    EXPECT_NEAR(keyterm_reward(w, 0, 0, 0.0), 0.125, 1e-15);
}

TEST(WorldRewards, KeytermMeanIsWeightedArmMean) {
    const SyntheticWorld w = generate_world(small(6, 50, 8), 5);
    for (std::size_t u = 0; u < w.num_users(); ++u) {
        for (KeyTermId k = 0; k < w.num_keyterms(); ++k) {
            double num = 0.0, den = 0.0;
            for (ArmId a = 0; a < w.num_arms(); ++a) {
                const double wt = w.graph->weight(a, k);
                num += wt * w.expected_arm_reward(u, a);
                den += wt;
            }
            EXPECT_NEAR(w.expected_keyterm_reward(u, k), num / den, 1e-12);
        }
    }
}

TEST(WorldRewards, BinaryFeedbackClips) {
    EXPECT_EQ(binary_feedback(-0.3, 0.0), 0.0);
    EXPECT_EQ(binary_feedback(1.7, 0.999), 1.0);
    EXPECT_EQ(binary_feedback(0.4, 0.39), 1.0);
    EXPECT_EQ(binary_feedback(0.4, 0.41), 0.0);
}

TEST(Slates, FullSizeIsPermutation) {
    const SyntheticWorld w = generate_world(small(), 2);
    Rng rng(9);
    const ContextSlate s = sample_slate(w, w.num_arms(), rng, 1);
    std::vector<ArmId> ids = s.arms;
    std::sort(ids.begin(), ids.end());
    for (ArmId a = 0; a < ids.size(); ++a) EXPECT_EQ(ids[a], a);
    for (std::size_t j = 0; j < s.size(); ++j)
        EXPECT_EQ(s.contexts.col(static_cast<Eigen::Index>(j)), w.arm_features.col(static_cast<Eigen::Index>(s.arms[j])));
    EXPECT_THROW(sample_slate(w, w.num_arms() + 1, rng), ConfigError);
    EXPECT_THROW(sample_slate(w, 0, rng), ConfigError);
}

TEST(Slates, InclusionIsUniform) {
    const SyntheticWorld w = generate_world(small(4, 20, 5), 2);
    Rng rng(10);
    std::vector<double> hits(20, 0.0);
    const int n = 20000;
    for (int i = 0; i < n; ++i)
        for (ArmId a : sample_slate(w, 5, rng).arms) hits[a] += 1.0;
    const double expect = n * 5.0 / 20.0;
    double chi2 = 0.0;
    for (double h : hits) chi2 += (h - expect) * (h - expect) / expect;
    EXPECT_LT(chi2, 43.82);  // chi^2_19 at 0.999
}

TEST(Slates, HiddenWorldShowsObservablePart) {
    WorldParams p = small(7, 20, 5);
    p.hidden_dim = 2;
    const SyntheticWorld w = generate_world(p, 2);
    Rng rng(1);
    const ContextSlate s = sample_slate(w, 4, rng);
    EXPECT_EQ(s.dim(), 5);
    EXPECT_EQ(s.contexts.col(0), w.arm_features.col(static_cast<Eigen::Index>(s.arms[0])).head(5));
    EXPECT_EQ(w.observable_keyterm_contexts().rows(), 5);
}

TEST(Slates, MakeSlateValidation) {
    EXPECT_THROW(make_slate(1, {0, 0}, Mat::Identity(2, 2)), ConfigError);
    EXPECT_THROW(make_slate(1, {0, 1}, Mat::Identity(2, 3)), ConfigError);
    EXPECT_THROW(make_slate(1, {0}, Vec::Constant(2, 1.0)), ConfigError);
    EXPECT_NO_THROW(make_slate(1, {0}, Vec::Constant(2, 1.0), false));
    Mat bad = Mat::Identity(2, 1);
    bad(0, 0) = std::nan("");
    EXPECT_THROW(make_slate(1, {0}, bad, false), ConfigError);
}
