#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "conucb/baselines.hpp"
#include "conucb/errors.hpp"
#include "support.hpp"

using namespace conucb;
using namespace testing_support;

namespace {

struct ScriptedOracle final : FeedbackOracle {
    Vec rewards;  // indexed by arm id
    std::vector<ArmId> asked;
    double keyterm_feedback(KeyTermId) override { return 0.0; }
    double arm_feedback(ArmId a) override {
        asked.push_back(a);
        return rewards(static_cast<Eigen::Index>(a));
    }
};

LinUCBParams fixed(double alpha) {
    LinUCBParams p;
    p.alpha = alpha;
    return p;
}

}  // namespace

TEST(LinUCB, EstimateIsRidgeLeastSquares) {
    std::mt19937_64 rng(71);
    LinUCBPolicy p("LinUCB", 4, fixed(0.5));
    Mat gram = Mat::Identity(4, 4);
    Vec moment = Vec::Zero(4);
    for (int t = 1; t <= 60; ++t) {
        const ContextSlate slate = slate_of(random_unit_columns(rng, 4, 6), static_cast<std::size_t>(t));
        const std::size_t pos = p.select(slate);
        const double r = random_vec(rng, 1)(0);
        p.observe(slate, pos, r);
        const Vec x = slate.contexts.col(static_cast<Eigen::Index>(pos));
        gram += x * x.transpose();
        moment += r * x;
    }
    EXPECT_LE(rel_err(p.estimate(), gram.inverse() * moment), 1e-10);
    EXPECT_EQ(p.ridge().observations(), 60u);
}

TEST(LinUCB, SelectMatchesFromScratchUCB) {
    std::mt19937_64 rng(73);
    LinUCBPolicy p("LinUCB", 3, LinUCBParams{});
    Mat gram = Mat::Identity(3, 3);
    Vec moment = Vec::Zero(3);
    for (std::size_t t = 0; t < 80; ++t) {
        const ContextSlate slate = slate_of(random_unit_columns(rng, 3, 7), t + 1);
        const std::size_t pos = p.select(slate);
        const Mat gi = gram.inverse();
        const Vec th = gi * moment;
        const double alpha = std::sqrt(3.0 * std::log((1.0 + static_cast<double>(t) / 3.0) / 0.05));
        std::size_t best = 0;
        double best_ucb = -std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < 7; ++j) {
            const Vec x = slate.contexts.col(j);
            const double u = x.dot(th) + alpha * std::sqrt(x.dot(gi * x));
            if (u > best_ucb + 1e-12) {
                best_ucb = u;
                best = static_cast<std::size_t>(j);
            }
        }
        // ties (all widths equal at t = 0) are broken by rounding, so compare values
        const Vec xp = slate.contexts.col(static_cast<Eigen::Index>(pos));
        EXPECT_NEAR(xp.dot(th) + alpha * std::sqrt(xp.dot(gi * xp)), best_ucb, 1e-9) << "best " << best;
        const Vec x = slate.contexts.col(static_cast<Eigen::Index>(pos));
        const double r = random_vec(rng, 1)(0);
        p.observe(slate, pos, r);
        gram += x * x.transpose();
        moment += r * x;
    }
}

TEST(LinUCB, RejectsBadSigmaAndEmptySlate) {
    LinUCBParams bad;
    bad.sigma = 0.0;
    EXPECT_THROW(LinUCBPolicy("x", 2, bad), ConfigError);
    LinUCBPolicy p("x", 2, LinUCBParams{});
    ContextSlate empty;
    empty.contexts = Mat(2, 0);
    EXPECT_THROW(p.select(empty), UsageError);
}

TEST(ArmCon, ZeroBudgetIsLinUCB) {
    std::mt19937_64 rng(79);
    LinUCBPolicy lin("LinUCB", 3, fixed(0.3));
    ArmConPolicy con("Arm-Con", 3, fixed(0.3));
    ScriptedOracle oracle;
    for (std::size_t t = 1; t <= 50; ++t) {
        const ContextSlate slate = slate_of(random_unit_columns(rng, 3, 5), t);
        EXPECT_TRUE(con.converse(slate, 0, oracle).empty());
        const std::size_t a = lin.select(slate);
        ASSERT_EQ(con.select(slate), a);
        const double r = random_vec(rng, 1)(0);
        lin.observe(slate, a, r);
        con.observe(slate, a, r);
    }
    EXPECT_TRUE(oracle.asked.empty());
    EXPECT_EQ(lin.estimate(), con.estimate());
}

TEST(ArmCon, SingleArmBudgetOneGivesTwoObservations) {
    ArmConPolicy con("Arm-Con", 2, fixed(1.0));
    ScriptedOracle oracle;
    oracle.rewards = Vec::Constant(1, 0.4);
    const ContextSlate slate = slate_of(Vec::Unit(2, 0));
    const auto q = con.converse(slate, 1, oracle);
    ASSERT_EQ(q.size(), 1u);
    EXPECT_EQ(q[0].kind, Query::Kind::Arm);
    con.observe(slate, con.select(slate), 0.4);
    EXPECT_EQ(con.ridge().observations(), 2u);
    // (2 e1 e1^T + I)^{-1} * 0.8 e1
    EXPECT_NEAR(con.estimate()(0), 0.8 / 3.0, 1e-14);
}

TEST(ArmCon, QueriesTopUCBArmsWithRescoring) {
    std::mt19937_64 rng(83);
    for (int rep = 0; rep < 30; ++rep) {
        ArmConPolicy con("Arm-Con", 3, fixed(0.7));
        Mat gram = Mat::Identity(3, 3);
        Vec moment = Vec::Zero(3);
        for (int i = 0; i < 5; ++i) {
            const Vec x = random_unit(rng, 3);
            const double r = random_vec(rng, 1)(0);
            const ContextSlate s = slate_of(x);
            con.observe(s, 0, r);
            gram += x * x.transpose();
            moment += r * x;
        }
        ScriptedOracle oracle;
        oracle.rewards = random_vec(rng, 3);
        const ContextSlate slate = slate_of(random_unit_columns(rng, 3, 3));
        const auto q = con.converse(slate, 2, oracle);
        ASSERT_EQ(q.size(), 2u);
        // oracle: argmax UCB, add that observation, argmax among the rest
        std::vector<bool> used(3, false);
        for (std::size_t unit = 0; unit < 2; ++unit) {
            const Mat gi = gram.inverse();
            const Vec th = gi * moment;
            std::size_t best = 3;
            double bu = -std::numeric_limits<double>::infinity();
            for (Eigen::Index j = 0; j < 3; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const Vec x = slate.contexts.col(j);
                const double u = x.dot(th) + 0.7 * std::sqrt(x.dot(gi * x));
                if (u > bu + 1e-12) {
                    bu = u;
                    best = static_cast<std::size_t>(j);
                }
            }
            EXPECT_EQ(q[unit].id, best);
            used[best] = true;
            const Vec x = slate.contexts.col(static_cast<Eigen::Index>(best));
            gram += x * x.transpose();
            moment += oracle.rewards(static_cast<Eigen::Index>(best)) * x;
        }
    }
}

TEST(ArmCon, ExcessBudgetDiscarded) {
    std::mt19937_64 rng(89);
    ArmConPolicy con("Arm-Con", 3, fixed(1.0));
    ScriptedOracle oracle;
    oracle.rewards = Vec::Zero(4);
    const auto q = con.converse(slate_of(random_unit_columns(rng, 3, 4)), 10, oracle);
    EXPECT_EQ(q.size(), 4u);
    std::vector<ArmId> ids = oracle.asked;
    std::sort(ids.begin(), ids.end());
    EXPECT_EQ(ids, (std::vector<ArmId>{0, 1, 2, 3}));
}

TEST(FixedLinear, PicksTrueBest) {
    Vec theta(2);
    theta << 0.2, 0.9;
    FixedLinearPolicy p("oracle", theta);
    Mat x(2, 3);
    x << 1, 0, 0.6, 0, 1, 0.8;
    EXPECT_EQ(p.select(slate_of(x)), 1u);
}

TEST(UniformRandom, RoughlyUniformAndSeeded) {
    UniformRandomPolicy a("r", 2, 3), b("r", 2, 3);
    std::mt19937_64 rng(1);
    const ContextSlate slate = slate_of(random_unit_columns(rng, 2, 4));
    std::vector<int> hits(4, 0);
    const int n = 40000;
    for (int i = 0; i < n; ++i) {
        const std::size_t s = a.select(slate);
        ASSERT_EQ(s, b.select(slate));
        ++hits[s];
    }
    double chi2 = 0.0;
    for (int h : hits) chi2 += (h - n / 4.0) * (h - n / 4.0) / (n / 4.0);
    EXPECT_LT(chi2, 16.27);  // chi^2_3 at 0.999
}
