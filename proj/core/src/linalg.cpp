#include "conucb/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "conucb/errors.hpp"

namespace conucb {

namespace {

void require_dim(Eigen::Index expected, Eigen::Index got, const char* what) {
    if (expected != got) {
        std::ostringstream msg;
        msg << what << ": dimension mismatch (expected " << expected << ", got " << got << ")";
        throw ConfigError(msg.str());
    }
}

}  // namespace

PsdMatrix PsdMatrix::scaled_identity(Eigen::Index dim, double c) {
    if (dim <= 0) throw ConfigError("PsdMatrix: dimension must be positive");
    return PsdMatrix(Mat::Identity(dim, dim) * c);
}

PsdMatrix::PsdMatrix(Mat entries) : m_(std::move(entries)) {
    if (m_.rows() != m_.cols() || m_.rows() == 0) {
        throw ConfigError("PsdMatrix: matrix must be square and non-empty");
    }
    if (!m_.allFinite()) throw ConfigError("PsdMatrix: non-finite entry");
    const double asym = (m_ - m_.transpose()).cwiseAbs().maxCoeff();
    if (asym > kSymmetryTolerance) {
        std::ostringstream msg;
        msg << "PsdMatrix: not symmetric (max |M - M^T| = " << asym << ")";
        throw ConfigError(msg.str());
    }
}

void PsdMatrix::rank_one_update(const Vec& x, double w) {
    require_dim(dim(), x.size(), "rank_one_update");
    if (!(w >= 0.0)) throw ConfigError("rank_one_update: weight must be nonnegative");
    m_.selfadjointView<Eigen::Lower>().rankUpdate(x, w);
    m_.triangularView<Eigen::StrictlyUpper>() = m_.transpose();
}

void PsdMatrix::add_symmetric(const Mat& delta) {
    require_dim(dim(), delta.rows(), "add_symmetric");
    require_dim(dim(), delta.cols(), "add_symmetric");
    m_ += delta;
    // Keep exact symmetry; the correction is symmetric up to rounding.
    m_ = (0.5 * (m_ + m_.transpose())).eval();
}

PsdMatrix rank_one_update(const PsdMatrix& m, const Vec& x, double w) {
    PsdMatrix out = m;
    out.rank_one_update(x, w);
    return out;
}

PsdFactor::PsdFactor(const PsdMatrix& m) : llt_(m.entries()) {
    if (llt_.info() != Eigen::Success) {
        Eigen::SelfAdjointEigenSolver<Mat> eig(m.entries(), Eigen::EigenvaluesOnly);
        const auto& ev = eig.eigenvalues();
        std::ostringstream msg;
        msg << "PsdFactor: matrix is not positive definite (dim " << m.dim()
            << ", min eigenvalue " << ev.minCoeff() << ", max eigenvalue " << ev.maxCoeff() << ")";
        throw NumericalError(msg.str());
    }
}

Vec PsdFactor::solve(const Vec& b) const {
    require_dim(dim(), b.size(), "PsdFactor::solve");
    return llt_.solve(b);
}

Mat PsdFactor::solve(const Mat& b) const {
    require_dim(dim(), b.rows(), "PsdFactor::solve");
    return llt_.solve(b);
}

double PsdFactor::inverse_quadratic(const Vec& x) const {
    require_dim(dim(), x.size(), "PsdFactor::inverse_quadratic");
    return llt_.matrixL().solve(x).squaredNorm();
}

Vec PsdFactor::inverse_quadratic_columns(const Mat& xs) const {
    require_dim(dim(), xs.rows(), "PsdFactor::inverse_quadratic_columns");
    const Mat half = llt_.matrixL().solve(xs);
    return half.colwise().squaredNorm().transpose();
}

Mat PsdFactor::inverse() const {
    return llt_.solve(Mat::Identity(dim(), dim()));
}

Vec solve_psd(const PsdMatrix& m, const Vec& b) {
    return PsdFactor(m).solve(b);
}

double mahalanobis_norm(const Vec& x, const PsdMatrix& m, NormMode mode) {
    require_dim(m.dim(), x.size(), "mahalanobis_norm");
    if (mode == NormMode::Inverse) return std::sqrt(PsdFactor(m).inverse_quadratic(x));
    const double q = x.dot(m.entries() * x);
    if (q < -kQuadFormTolerance) {
        std::ostringstream msg;
        msg << "mahalanobis_norm: negative quadratic form " << q;
        throw NumericalError(msg.str());
    }
    return std::sqrt(std::max(q, 0.0));
}

Mat sherman_morrison_inverse(const Mat& inverse, const Vec& x) {
    require_dim(inverse.rows(), x.size(), "sherman_morrison_inverse");
    const Vec u = inverse * x;
    return inverse - (u * u.transpose()) / (1.0 + x.dot(u));
}

}  // namespace conucb
