#pragma once

// Dense symmetric positive-definite algebra for the ridge estimators.
//
// The learners keep the Gram matrices themselves (never their inverses) and
// factor on demand. At the dimensions used here (d <= ~100) a Cholesky per
// round is cheap and avoids the drift of tracked inverses.

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace conucb {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kSymmetryTolerance = 1e-9;
inline constexpr double kSolveTolerance = 1e-8;
inline constexpr double kQuadFormTolerance = 1e-12;

class PsdMatrix {
public:
    // c * I, the usual ridge prior.
    static PsdMatrix scaled_identity(Eigen::Index dim, double c);

    // Throws ConfigError unless square and symmetric within kSymmetryTolerance.
    explicit PsdMatrix(Mat entries);

    Eigen::Index dim() const { return m_.rows(); }
    const Mat& entries() const { return m_; }
    double operator()(Eigen::Index r, Eigen::Index c) const { return m_(r, c); }

    // M += w * x * x^T. Dimension mismatch or w < 0 throws ConfigError.
    void rank_one_update(const Vec& x, double w = 1.0);

    // M += delta for a symmetric correction (used when hidden features move).
    void add_symmetric(const Mat& delta);

private:
    Mat m_;
};

PsdMatrix rank_one_update(const PsdMatrix& m, const Vec& x, double w);

// Cholesky factorization of a positive-definite matrix. Construction throws
// NumericalError with an eigenvalue diagnostic when the matrix is not PD.
class PsdFactor {
public:
    explicit PsdFactor(const PsdMatrix& m);

    Eigen::Index dim() const { return llt_.rows(); }

    Vec solve(const Vec& b) const;
    Mat solve(const Mat& b) const;

    // x^T M^{-1} x, computed through the triangular factor so it is never negative.
    double inverse_quadratic(const Vec& x) const;

    // Column-wise x_j^T M^{-1} x_j for the columns of xs.
    Vec inverse_quadratic_columns(const Mat& xs) const;

    Mat inverse() const;

private:
    Eigen::LLT<Mat> llt_;
};

// v = M^{-1} b with ||M v - b|| <= kSolveTolerance * (1 + ||b||).
Vec solve_psd(const PsdMatrix& m, const Vec& b);

enum class NormMode {
    Direct,   // sqrt(x^T M x)
    Inverse,  // sqrt(x^T M^{-1} x)
};

double mahalanobis_norm(const Vec& x, const PsdMatrix& m, NormMode mode);

// (M + x x^T)^{-1} given M^{-1}, by the Sherman-Morrison identity.
Mat sherman_morrison_inverse(const Mat& inverse, const Vec& x);

}  // namespace conucb
