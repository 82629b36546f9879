#include "conucb/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "conucb/errors.hpp"

namespace conucb {

RidgeState::RidgeState(std::size_t dim, double ridge)
    : ridge_(ridge),
      gram_(PsdMatrix::scaled_identity(static_cast<Eigen::Index>(dim), ridge)),
      moment_(Vec::Zero(static_cast<Eigen::Index>(dim))),
      theta_(Vec::Zero(static_cast<Eigen::Index>(dim))) {
    if (!(ridge > 0.0)) throw ConfigError("RidgeState: ridge must be positive");
}

void RidgeState::observe(const Vec& x, double r) {
    gram_.rank_one_update(x, 1.0);
    moment_.noalias() += r * x;
    ++observations_;
}

void RidgeState::refresh() { theta_ = solve_psd(gram_, moment_); }

void RidgeState::correct(const Mat& gram_delta, const Vec& moment_delta) {
    gram_.add_symmetric(gram_delta);
    moment_ += moment_delta;
}

std::vector<ArmScore> linucb_scores(const PsdFactor& gram, const Mat& contexts, const std::vector<ArmId>& arms,
                                    const Vec& theta, double alpha) {
    const Vec sq = gram.inverse_quadratic_columns(contexts);
    const Vec estimates = contexts.transpose() * theta;
    std::vector<ArmScore> scores(arms.size());
    for (std::size_t j = 0; j < arms.size(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        scores[j].arm = arms[j];
        scores[j].estimate = estimates(jj);
        scores[j].arm_width = alpha * std::sqrt(sq(jj));
        scores[j].width = scores[j].arm_width;
    }
    return scores;
}

double linucb_alpha(const LinUCBParams& params, std::size_t dim, std::size_t t) {
    if (params.alpha) return *params.alpha;
    const double d = static_cast<double>(dim);
    return std::sqrt(std::max(0.0, d * std::log((1.0 + static_cast<double>(t) / (params.ridge * d)) / params.sigma)));
}

LinUCBPolicy::LinUCBPolicy(std::string name, std::size_t dim, LinUCBParams params)
    : name_(std::move(name)), params_(params), ridge_(dim, params.ridge) {
    if (!(params_.sigma > 0.0 && params_.sigma < 1.0)) throw ConfigError("LinUCB: sigma must lie in (0, 1)");
    if (params_.alpha && !(*params_.alpha >= 0.0)) throw ConfigError("LinUCB: alpha must be nonnegative");
}

std::vector<ArmScore> LinUCBPolicy::score(const ContextSlate& slate) {
    if (slate.size() == 0) throw UsageError("select: empty slate");
    if (slate.dim() != static_cast<Eigen::Index>(dim())) throw ConfigError("select: slate dimension mismatch");
    ridge_.refresh();
    const PsdFactor factor(ridge_.gram());
    return linucb_scores(factor, slate.contexts, slate.arms, ridge_.theta(),
                         linucb_alpha(params_, dim(), ridge_.observations()));
}

std::size_t LinUCBPolicy::select(const ContextSlate& slate) {
    last_scores_ = score(slate);
    Vec ucb(static_cast<Eigen::Index>(last_scores_.size()));
    for (std::size_t j = 0; j < last_scores_.size(); ++j) ucb(static_cast<Eigen::Index>(j)) = last_scores_[j].ucb();
    return argmax_first(ucb);
}

void LinUCBPolicy::observe(const ContextSlate& slate, std::size_t position, double reward) {
    ridge_.observe(slate.contexts.col(static_cast<Eigen::Index>(position)), reward);
    ridge_.refresh();
}

std::vector<Query> ArmConPolicy::converse(const ContextSlate& slate, std::size_t budget, FeedbackOracle& oracle) {
    std::vector<Query> queries;
    std::vector<bool> asked(slate.size(), false);
    const std::size_t units = std::min(budget, slate.size());
    for (std::size_t unit = 0; unit < units; ++unit) {
        const std::vector<ArmScore> scores = score(slate);
        Vec ucb = Vec::Constant(static_cast<Eigen::Index>(scores.size()), -std::numeric_limits<double>::infinity());
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (!asked[j]) ucb(static_cast<Eigen::Index>(j)) = scores[j].ucb();
        }
        const std::size_t pos = argmax_first(ucb);
        asked[pos] = true;
        const double feedback = oracle.arm_feedback(slate.arms[pos]);
        mutable_ridge().observe(slate.contexts.col(static_cast<Eigen::Index>(pos)), feedback);
        queries.push_back({Query::Kind::Arm, slate.arms[pos], feedback});
    }
    return queries;
}

FixedLinearPolicy::FixedLinearPolicy(std::string name, Vec theta) : name_(std::move(name)), theta_(std::move(theta)) {}

std::size_t FixedLinearPolicy::select(const ContextSlate& slate) {
    if (slate.size() == 0) throw UsageError("select: empty slate");
    return argmax_first(slate.contexts.transpose() * theta_);
}

UniformRandomPolicy::UniformRandomPolicy(std::string name, std::size_t dim, std::uint64_t seed)
    : name_(std::move(name)), dim_(dim), rng_(seed) {}

std::size_t UniformRandomPolicy::select(const ContextSlate& slate) {
    if (slate.size() == 0) throw UsageError("select: empty slate");
    std::uniform_int_distribution<std::size_t> pick(0, slate.size() - 1);
    return pick(rng_);
}

}  // namespace conucb
