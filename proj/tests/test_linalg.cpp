#include <gtest/gtest.h>

#include "conucb/errors.hpp"
#include "conucb/linalg.hpp"
#include "support.hpp"

using namespace conucb;
using namespace testing_support;

TEST(RankOneUpdate, IdentityCase) {
    PsdMatrix m = PsdMatrix::scaled_identity(2, 1.0);
    m.rank_one_update(Vec::Unit(2, 0), 1.0);
    Mat expect(2, 2);
    expect << 2, 0, 0, 1;
    EXPECT_EQ(m.entries(), expect);
}

TEST(RankOneUpdate, HalfWeightExpansion) {
    const PsdMatrix m = rank_one_update(PsdMatrix::scaled_identity(2, 1.0), Vec::Ones(2), 0.5);
    Mat expect(2, 2);
    expect << 1.5, 0.5, 0.5, 1.5;
    EXPECT_EQ(m.entries(), expect);
}

TEST(RankOneUpdate, MatchesFromScratchSum) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> w(0.0, 2.0);
    PsdMatrix m = PsdMatrix::scaled_identity(5, 0.3);
    Mat oracle = 0.3 * Mat::Identity(5, 5);
    for (int i = 0; i < 200; ++i) {
        const Vec x = random_vec(rng, 5);
        const double wi = w(rng);
        m.rank_one_update(x, wi);
        for (Eigen::Index r = 0; r < 5; ++r)
            for (Eigen::Index c = 0; c < 5; ++c) oracle(r, c) += wi * x(r) * x(c);
        if (i == 4) EXPECT_LE((m.entries() - oracle).cwiseAbs().maxCoeff(), 1e-10);
    }
    EXPECT_LE((m.entries() - oracle).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE((m.entries() - m.entries().transpose()).cwiseAbs().maxCoeff(), kSymmetryTolerance);
}

TEST(RankOneUpdate, RejectsMismatchAndNegativeWeight) {
    PsdMatrix m = PsdMatrix::scaled_identity(3, 1.0);
    EXPECT_THROW(m.rank_one_update(Vec::Ones(2), 1.0), ConfigError);
    EXPECT_THROW(m.rank_one_update(Vec::Ones(3), -0.1), ConfigError);
}

TEST(RankOneUpdate, FreeFunctionLeavesInputAlone) {
    const PsdMatrix m = PsdMatrix::scaled_identity(2, 1.0);
    const PsdMatrix n = rank_one_update(m, Vec::Ones(2), 1.0);
    EXPECT_EQ(m.entries(), Mat::Identity(2, 2));
    EXPECT_NE(n.entries(), m.entries());
}

TEST(PsdMatrixCtor, RejectsAsymmetric) {
    Mat a(2, 2);
    a << 1, 0.5, 0.4, 1;
    EXPECT_THROW(PsdMatrix{a}, ConfigError);
    EXPECT_THROW(PsdMatrix{Mat::Ones(2, 3)}, ConfigError);
}

TEST(SolvePsd, ScaledIdentity) {
    const Vec v = solve_psd(PsdMatrix::scaled_identity(2, 2.0), Vec::Unit(2, 0) * 4.0);
    EXPECT_DOUBLE_EQ(v(0), 2.0);
    EXPECT_DOUBLE_EQ(v(1), 0.0);
}

TEST(SolvePsd, HandInversion) {
    Mat a(2, 2);
    a << 2, 1, 1, 2;
    const Vec v = solve_psd(PsdMatrix(a), Vec::Constant(2, 3.0));
    EXPECT_NEAR(v(0), 1.0, 1e-12);
    EXPECT_NEAR(v(1), 1.0, 1e-12);
}

TEST(SolvePsd, ResidualOnRandomInstances) {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 50; ++rep) {
        const Mat a = random_spd(rng, 8, 0.01, 3);
        const Vec b = random_vec(rng, 8, -10.0, 10.0);
        const Vec v = solve_psd(PsdMatrix(a), b);
        EXPECT_LE((a * v - b).norm(), kSolveTolerance * (1.0 + b.norm()));
    }
}

TEST(SolvePsd, SingularReportsDiagnostic) {
    Mat a = Mat::Zero(2, 2);
    a(0, 0) = 1.0;
    try {
        solve_psd(PsdMatrix(a), Vec::Ones(2));
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("eigen"), std::string::npos) << e.what();
    }
    Mat neg(2, 2);
    neg << 1, 2, 2, 1;  // indefinite
    EXPECT_THROW(PsdFactor{PsdMatrix(neg)}, NumericalError);
}

TEST(Mahalanobis, DirectIdentity) {
    EXPECT_DOUBLE_EQ(mahalanobis_norm(Vec::Unit(2, 0), PsdMatrix::scaled_identity(2, 1.0), NormMode::Direct), 1.0);
}

TEST(Mahalanobis, InverseScaled) {
    EXPECT_DOUBLE_EQ(mahalanobis_norm(Vec::Unit(2, 0), PsdMatrix::scaled_identity(2, 4.0), NormMode::Inverse), 0.5);
}

TEST(Mahalanobis, MatchesExplicitInverse) {
    std::mt19937_64 rng(8);
    for (int rep = 0; rep < 50; ++rep) {
        const Mat a = random_spd(rng, 6);
        const Vec x = random_vec(rng, 6);
        const double inv = std::sqrt(x.dot(a.inverse() * x));
        const double dir = std::sqrt(x.dot(a * x));
        EXPECT_NEAR(mahalanobis_norm(x, PsdMatrix(a), NormMode::Inverse), inv, 1e-9 * std::max(1.0, inv));
        EXPECT_NEAR(mahalanobis_norm(x, PsdMatrix(a), NormMode::Direct), dir, 1e-9 * std::max(1.0, dir));
    }
}

TEST(Mahalanobis, DegreeOneHomogeneous) {
    std::mt19937_64 rng(9);
    const PsdMatrix a(random_spd(rng, 4));
    const Vec x = random_vec(rng, 4);
    for (double s : {-3.0, 0.25, 7.0}) {
        for (NormMode mode : {NormMode::Direct, NormMode::Inverse}) {
            EXPECT_NEAR(mahalanobis_norm(s * x, a, mode), std::abs(s) * mahalanobis_norm(x, a, mode), 1e-10);
        }
    }
}

TEST(Mahalanobis, NegativeQuadraticFormRejected) {
    Mat neg(2, 2);
    neg << -1, 0, 0, 1;
    EXPECT_THROW(mahalanobis_norm(Vec::Unit(2, 0), PsdMatrix(neg), NormMode::Direct), NumericalError);
    EXPECT_THROW(mahalanobis_norm(Vec::Ones(3), PsdMatrix::scaled_identity(2, 1.0), NormMode::Direct), ConfigError);
}

TEST(ShermanMorrison, AgreesWithSolveAfterUpdate) {
    std::mt19937_64 rng(21);
    for (int rep = 0; rep < 50; ++rep) {
        const Mat a = random_spd(rng, 6, 1.0, 4);
        const Vec x = random_vec(rng, 6);
        const Vec b = random_vec(rng, 6);
        const Mat inv = a.inverse();
        const Mat sm = sherman_morrison_inverse(inv, x);
        // textbook form, written out
        const Mat oracle = inv - (inv * x * x.transpose() * inv) / (1.0 + x.dot(inv * x));
        EXPECT_LE((sm - oracle).cwiseAbs().maxCoeff(), 1e-8);
        const Vec direct = solve_psd(rank_one_update(PsdMatrix(a), x, 1.0), b);
        EXPECT_LE((sm * b - direct).norm(), 1e-8 * (1.0 + direct.norm()));
    }
}

TEST(PsdFactor, InverseQuadraticColumns) {
    std::mt19937_64 rng(4);
    const Mat a = random_spd(rng, 5);
    const Mat xs = Mat::Random(5, 7);
    const PsdFactor f{PsdMatrix(a)};
    const Vec q = f.inverse_quadratic_columns(xs);
    const Mat inv = a.inverse();
    for (Eigen::Index j = 0; j < xs.cols(); ++j) EXPECT_NEAR(q(j), xs.col(j).dot(inv * xs.col(j)), 1e-10);
    EXPECT_LE((f.inverse() - inv).cwiseAbs().maxCoeff(), 1e-10);
}
