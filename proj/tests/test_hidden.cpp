#include <gtest/gtest.h>

#include <cmath>

#include "conucb/baselines.hpp"
#include "conucb/conucb.hpp"
#include "conucb/errors.hpp"
#include "conucb/hidden.hpp"
#include "conucb/world.hpp"
#include "support.hpp"

using namespace conucb;
using namespace testing_support;

namespace {

struct NoisyOracle final : FeedbackOracle {
    std::mt19937_64 rng{5};
    double keyterm_feedback(KeyTermId k) override { return 0.1 * static_cast<double>(k % 3) + noise(); }
    double arm_feedback(ArmId a) override { return 0.05 * static_cast<double>(a % 7) + noise(); }
    double noise() { return std::normal_distribution<double>(0.0, 0.1)(rng); }
};

ContextSlate random_slate(std::mt19937_64& rng, std::size_t d, std::size_t n_arms, std::size_t size,
                          std::size_t round) {
    std::vector<ArmId> ids = sample_without_replacement(n_arms, size, rng);
    return make_slate(round, ids, random_unit_columns(rng, static_cast<Eigen::Index>(d),
                                                      static_cast<Eigen::Index>(size)),
                      false);
}

HiddenParams hp(std::size_t l, double ridge = 1.0, double alpha_v = 0.25) {
    HiddenParams h;
    h.hidden_dim = l;
    h.feature_ridge = ridge;
    h.alpha_v = alpha_v;
    return h;
}

}  // namespace

TEST(HiddenFeatures, MoveCorrectsGram) {
    std::mt19937_64 rng(97);
    HiddenFeatures h(3, Mat::Random(2, 4), 1.0);
    std::vector<std::tuple<ArmId, Vec, double>> events;
    for (int i = 0; i < 20; ++i) {
        const ArmId a = static_cast<ArmId>(i % 4);
        const Vec x = random_vec(rng, 3);
        const double r = random_vec(rng, 1)(0);
        h.record(a, x, r);
        events.emplace_back(a, x, r);
    }
    auto totals = [&](const HiddenFeatures& f) {
        Mat g = Mat::Zero(5, 5);
        Vec m = Vec::Zero(5);
        for (const auto& [a, x, r] : events) {
            const Vec z = f.concat(x, a);
            g += z * z.transpose();
            m += r * z;
        }
        return std::make_pair(g, m);
    };
    const auto before = totals(h);
    const Vec v = random_vec(rng, 2);
    const HiddenFeatures::Correction c = h.move(2, v);
    const auto after = totals(h);
    EXPECT_EQ(h.feature(2), v);
    EXPECT_LE((before.first + c.gram - after.first).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((before.second + c.moment - after.second).norm(), 1e-10);
    EXPECT_EQ(h.count(2), 5u);
}

TEST(HiddenStore, WidthFormula) {
    Rng rng(1);
    HiddenFeatureStore s(3, hp(2, 0.5), rng);
    Vec tv(2);
    tv << 0.3, 0.4;
    EXPECT_NEAR(s.width(0, tv), std::sqrt(0.25 / 0.5), 1e-14);
    s.observed(0, nullptr);
    s.observed(0, nullptr);
    // ||tv||_{C^{-1}}, C = 2 tv tv^T + 0.5 I
    const Mat c = 2.0 * tv * tv.transpose() + 0.5 * Mat::Identity(2, 2);
    EXPECT_NEAR(s.width(0, tv), std::sqrt(tv.dot(c.inverse() * tv)), 1e-14);
    EXPECT_EQ(s.count(0), 2u);
    EXPECT_THROW(HiddenFeatureStore(3, hp(2, 0.0), rng), ConfigError);
}

TEST(HiddenLinUCB, ZeroHiddenDimIsLinUCB) {
    std::mt19937_64 rng(101);
    LinUCBParams p;
    p.alpha = 0.4;
    LinUCBPolicy lin("LinUCB", 4, p);
    HLinUCBPolicy hid("hLinUCB", 4, 30, p, hp(0), 7);
    for (std::size_t t = 1; t <= 150; ++t) {
        const ContextSlate s = random_slate(rng, 4, 30, 6, t);
        const std::size_t a = lin.select(s);
        ASSERT_EQ(hid.select(s), a) << "round " << t;
        const double r = random_vec(rng, 1)(0);
        lin.observe(s, a, r);
        hid.observe(s, a, r);
    }
    EXPECT_LE(rel_err(hid.estimate(), lin.estimate()), 1e-12);
}

TEST(HiddenConUCB, ZeroHiddenDimIsConUCB) {
    std::mt19937_64 rng(103);
    auto g = std::make_shared<const RelationGraph>(random_graph(rng, 30, 10));
    const Mat arms = random_unit_columns(rng, 4, 30);
    auto pseudo = std::make_shared<const Mat>(key_term_contexts(*g, arms));
    ConUCBParams cp;
    cp.lambda = 0.6;
    cp.exploration.alpha = 0.3;
    cp.exploration.alpha_tilde = 0.2;
    ConUCBPolicy con("ConUCB", 4, cp, KeytermRule::Optimal, g, pseudo);
    HConUCBPolicy hid("hConUCB", 4, 30, cp, hp(0), g, pseudo, 11);
    NoisyOracle o1, o2;
    for (std::size_t t = 1; t <= 120; ++t) {
        std::vector<ArmId> ids = sample_without_replacement(30, 6, rng);
        Mat x(4, 6);
        for (std::size_t j = 0; j < 6; ++j) x.col(static_cast<Eigen::Index>(j)) = arms.col(static_cast<Eigen::Index>(ids[j]));
        const ContextSlate s = make_slate(t, ids, x);
        const std::size_t budget = t % 3 == 0 ? 2 : 0;
        const auto q1 = con.converse(s, budget, o1);
        const auto q2 = hid.converse(s, budget, o2);
        ASSERT_EQ(q1.size(), q2.size());
        for (std::size_t i = 0; i < q1.size(); ++i) ASSERT_EQ(q1[i].id, q2[i].id);
        const std::size_t a = con.select(s);
        ASSERT_EQ(hid.select(s), a) << "round " << t;
        const double r = random_vec(rng, 1)(0);
        con.observe(s, a, r);
        hid.observe(s, a, r);
    }
    EXPECT_LE(rel_err(hid.estimate(), con.estimate()), 1e-10);
}

TEST(HiddenConUCB, NoConversationHalfLambdaMatchesHLinUCB) {
    // lambda = 1/2 makes the anchored arm step a ridge-1 solve; halving the
    // feature ridge compensates the lambda weight in the v-step.
    std::mt19937_64 rng(107);
    const std::size_t N = 25, d = 3, l = 2;
    auto g = std::make_shared<const RelationGraph>(random_graph(rng, N, 5));
    auto pseudo = std::make_shared<const Mat>(Mat::Zero(d, 5));
    LinUCBParams lp;
    lp.alpha = 0.3;
    ConUCBParams cp;
    cp.lambda = 0.5;
    cp.exploration.alpha = 0.3 / std::sqrt(0.5);
    cp.exploration.alpha_tilde = 0.0;
    Rng r1(55), r2(55);
    auto s1 = std::make_shared<HiddenFeatureStore>(N, hp(l, 1.0, 0.0), r1);
    auto s2 = std::make_shared<HiddenFeatureStore>(N, hp(l, 0.5, 0.0), r2);
    ASSERT_EQ(s1->features(), s2->features());
    HLinUCBPolicy lin("hLinUCB", d, N, lp, hp(l, 1.0, 0.0), 1, s1);
    HConUCBPolicy con("hConUCB", d, N, cp, hp(l, 0.5, 0.0), g, pseudo, 1, s2);
    for (std::size_t t = 1; t <= 200; ++t) {
        const ContextSlate s = random_slate(rng, d, N, 5, t);
        const std::size_t a = lin.select(s);
        ASSERT_EQ(con.select(s), a) << "round " << t;
        const double r = random_vec(rng, 1)(0);
        lin.observe(s, a, r);
        con.observe(s, a, r);
    }
    EXPECT_LE(rel_err(con.estimate(), lin.estimate()), 1e-8);
    EXPECT_LE((s1->features() - s2->features()).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(HiddenStore, SharedMembersStayConsistent) {
    // Two learners share v; after every step each local Gram must equal the
    // from-scratch Gram over its own events with the current features.
    std::mt19937_64 rng(109);
    const std::size_t N = 12, d = 3, l = 2;
    Rng init(3);
    auto store = std::make_shared<HiddenFeatureStore>(N, hp(l), init);
    LinUCBParams lp;
    lp.alpha = 0.5;
    HLinUCBPolicy a("a", d, N, lp, hp(l), 1, store);
    HLinUCBPolicy b("b", d, N, lp, hp(l), 2, store);
    std::vector<std::tuple<ArmId, Vec, double>> ev_a, ev_b;
    auto check = [&](HLinUCBPolicy& p, const std::vector<std::tuple<ArmId, Vec, double>>& ev) {
        // select() syncs first
        p.select(random_slate(rng, d, N, 2, 0));
        Mat gram = Mat::Identity(d + l, d + l);
        Vec m = Vec::Zero(d + l);
        for (const auto& [arm, x, r] : ev) {
            Vec z(d + l);
            z << x, store->feature(arm);
            gram += z * z.transpose();
            m += r * z;
        }
        EXPECT_LE((p.ridge().gram().entries() - gram).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_LE((p.ridge().moment() - m).norm(), 1e-9);
        EXPECT_EQ(p.hidden().features(), store->features());
    };
    for (std::size_t t = 1; t <= 60; ++t) {
        for (auto* pair : {&ev_a, &ev_b}) {
            HLinUCBPolicy& p = pair == &ev_a ? a : b;
            const ContextSlate s = random_slate(rng, d, N, 4, t);
            const std::size_t pos = p.select(s);
            const double r = random_vec(rng, 1)(0);
            p.observe(s, pos, r);
            pair->emplace_back(s.arms[pos], s.contexts.col(static_cast<Eigen::Index>(pos)), r);
        }
        if (t % 10 == 0) {
            check(a, ev_a);
            check(b, ev_b);
        }
    }
    std::size_t total = 0;
    for (ArmId x = 0; x < N; ++x) total += store->count(x);
    EXPECT_EQ(total, 120u);
}

TEST(HiddenStore, VStepSolvesPooledNormalEquations) {
    std::mt19937_64 rng(113);
    const std::size_t N = 6, d = 2, l = 3;
    Rng init(8);
    auto store = std::make_shared<HiddenFeatureStore>(N, hp(l, 0.7), init);
    LinUCBParams lp;
    lp.alpha = 0.1;
    HLinUCBPolicy a("a", d, N, lp, hp(l, 0.7), 1, store);
    HLinUCBPolicy b("b", d, N, lp, hp(l, 0.7), 2, store);
    for (std::size_t t = 1; t <= 30; ++t) {
        for (HLinUCBPolicy* p : {&a, &b}) {
            const ContextSlate s = random_slate(rng, d, N, 3, t);
            p->observe(s, p->select(s), random_vec(rng, 1)(0));
        }
    }
    // every member's terms for arm 0, with current theta
    PsdMatrix gram = PsdMatrix::scaled_identity(l, 0.7);
    Vec rhs = Vec::Zero(l);
    a.feature_terms(0, gram, rhs);
    b.feature_terms(0, gram, rhs);
    store->update(0);
    EXPECT_LE((gram.entries() * store->feature(0) - rhs).norm(), 1e-9);
}

TEST(HiddenBatch, AlternationIsMonotone) {
    std::mt19937_64 rng(127);
    for (int rep = 0; rep < 10; ++rep) {
        const std::size_t N = 8, d = 3, l = 2;
        std::vector<HiddenObservation> batch;
        const Mat v_true = Mat::Random(l, N);
        const Vec th_true = random_vec(rng, d + l);
        for (int i = 0; i < 200; ++i) {
            const ArmId a = static_cast<ArmId>(i % N);
            const Vec x = random_unit(rng, d);
            Vec z(d + l);
            z << x, v_true.col(static_cast<Eigen::Index>(a));
            batch.push_back({a, x, z.dot(th_true) + 0.05 * random_vec(rng, 1)(0)});
        }
        Mat v = 0.5 * Mat::Random(l, N);
        Vec th = Vec::Zero(d + l);
        double prev = hidden_objective(batch, th, v, 1.0, 1.0);
        for (int step = 0; step < 10; ++step) {
            th = hidden_theta_step(batch, v, 1.0);
            const double mid = hidden_objective(batch, th, v, 1.0, 1.0);
            EXPECT_LE(mid, prev * (1.0 + 1e-12));
            v = hidden_feature_step(batch, th, N, 1.0);
            const double now = hidden_objective(batch, th, v, 1.0, 1.0);
            EXPECT_LE(now, mid * (1.0 + 1e-12));
            prev = now;
        }
    }
}

TEST(HiddenBatch, BlockStepsAreExactMinimizers) {
    std::mt19937_64 rng(131);
    const std::size_t N = 4, d = 2, l = 2;
    std::vector<HiddenObservation> batch;
    for (int i = 0; i < 30; ++i)
        batch.push_back({static_cast<ArmId>(i % 3), random_vec(rng, d), random_vec(rng, 1)(0)});
    const Mat v = Mat::Random(l, N);
    const Vec th = hidden_theta_step(batch, v, 0.8);
    const Mat vs = hidden_feature_step(batch, th, N, 0.6);
    EXPECT_EQ(vs.col(3), Vec::Zero(l));  // arm never observed
    std::normal_distribution<double> n(0.0, 0.05);
    for (int i = 0; i < 50; ++i) {
        Vec dt(d + l);
        for (Eigen::Index j = 0; j < dt.size(); ++j) dt(j) = n(rng);
        EXPECT_LE(hidden_objective(batch, th, v, 0.8, 0.6), hidden_objective(batch, th + dt, v, 0.8, 0.6));
        Mat dv(l, N);
        for (Eigen::Index j = 0; j < dv.size(); ++j) dv(j) = n(rng);
        EXPECT_LE(hidden_objective(batch, th, vs, 0.8, 0.6), hidden_objective(batch, th, vs + dv, 0.8, 0.6));
    }
}

TEST(HiddenConUCB, PseudoContextTracksSharedFeatures) {
    std::mt19937_64 rng(137);
    const std::size_t N = 10, d = 3, l = 2;
    auto g = std::make_shared<const RelationGraph>(random_graph(rng, N, 4));
    const Mat arms = random_unit_columns(rng, d, N);
    auto pseudo = std::make_shared<const Mat>(key_term_contexts(*g, arms));
    ConUCBParams cp;
    cp.exploration.alpha = 0.2;
    cp.exploration.alpha_tilde = 0.2;
    Rng init(4);
    auto store = std::make_shared<HiddenFeatureStore>(N, hp(l), init);
    HConUCBPolicy a("a", d, N, cp, hp(l), g, pseudo, 1, store);
    HConUCBPolicy b("b", d, N, cp, hp(l), g, pseudo, 2, store);
    NoisyOracle oracle;
    for (std::size_t t = 1; t <= 40; ++t) {
        for (HConUCBPolicy* p : {&a, &b}) {
            std::vector<ArmId> ids = sample_without_replacement(N, 4, rng);
            Mat x(d, 4);
            for (std::size_t j = 0; j < 4; ++j) x.col(static_cast<Eigen::Index>(j)) = arms.col(static_cast<Eigen::Index>(ids[j]));
            const ContextSlate s = make_slate(t, ids, x);
            p->converse(s, 1, oracle);
            const std::size_t pos = p->select(s);
            p->observe(s, pos, oracle.arm_feedback(ids[pos]));
        }
    }
    a.select(slate_of(arms.leftCols(2)));
    const Mat full_arms = [&] {
        Mat z(d + l, N);
        z << arms, store->features();
        return z;
    }();
    const Mat oracle_pseudo = key_term_contexts(*g, full_arms);
    for (KeyTermId k = 0; k < g->num_keyterms(); ++k)
        EXPECT_LE((a.pseudo_context(k) - oracle_pseudo.col(static_cast<Eigen::Index>(k))).norm(), 1e-10);
}
