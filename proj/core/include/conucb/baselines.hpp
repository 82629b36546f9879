#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "conucb/linalg.hpp"
#include "conucb/policy.hpp"

namespace conucb {

// theta = (sum x x^T + ridge I)^{-1} sum x r, maintained incrementally.
class RidgeState {
public:
    RidgeState(std::size_t dim, double ridge);

    void observe(const Vec& x, double r);
    void refresh();
    // Gram += gram_delta (symmetric), moment += moment_delta.
    void correct(const Mat& gram_delta, const Vec& moment_delta);

    std::size_t dim() const { return static_cast<std::size_t>(moment_.size()); }
    double ridge() const { return ridge_; }
    const PsdMatrix& gram() const { return gram_; }
    const Vec& moment() const { return moment_; }
    const Vec& theta() const { return theta_; }
    std::size_t observations() const { return observations_; }

private:
    double ridge_;
    PsdMatrix gram_;
    Vec moment_;
    Vec theta_;
    std::size_t observations_ = 0;
};

// estimate = x^T theta, width = alpha ||x||_{M^{-1}} for each column.
std::vector<ArmScore> linucb_scores(const PsdFactor& gram, const Mat& contexts, const std::vector<ArmId>& arms,
                                    const Vec& theta, double alpha);

struct LinUCBParams {
    double ridge = 1.0;
    double sigma = 0.05;
    std::optional<double> alpha;  // fixed; otherwise sqrt(d ln((1 + t/(ridge d))/sigma))
};

double linucb_alpha(const LinUCBParams& params, std::size_t dim, std::size_t t);

// Arm-level feedback only.
class LinUCBPolicy : public Policy {
public:
    LinUCBPolicy(std::string name, std::size_t dim, LinUCBParams params);

    std::string name() const override { return name_; }
    std::size_t dim() const override { return ridge_.dim(); }
    std::size_t select(const ContextSlate& slate) override;
    void observe(const ContextSlate& slate, std::size_t position, double reward) override;
    Vec estimate() const override { return ridge_.theta(); }
    const std::vector<ArmScore>& last_scores() const override { return last_scores_; }

    const RidgeState& ridge() const { return ridge_; }

protected:
    // Scores the slate with the current estimate (refreshing it first).
    std::vector<ArmScore> score(const ContextSlate& slate);
    RidgeState& mutable_ridge() { return ridge_; }

private:
    std::string name_;
    LinUCBParams params_;
    RidgeState ridge_;
    std::vector<ArmScore> last_scores_;
};

// LinUCB that spends each conversation unit asking about one more arm: the
// UCB-maximal slate arm not yet asked this round. The answer is an ordinary
// arm observation; a budget above the slate size is discarded.
class ArmConPolicy final : public LinUCBPolicy {
public:
    using LinUCBPolicy::LinUCBPolicy;

    std::vector<Query> converse(const ContextSlate& slate, std::size_t budget, FeedbackOracle& oracle) override;
};

// Greedy on a fixed parameter vector. With the true preference it is the
// zero-regret oracle.
class FixedLinearPolicy final : public Policy {
public:
    FixedLinearPolicy(std::string name, Vec theta);

    std::string name() const override { return name_; }
    std::size_t dim() const override { return static_cast<std::size_t>(theta_.size()); }
    std::size_t select(const ContextSlate& slate) override;
    void observe(const ContextSlate&, std::size_t, double) override {}
    Vec estimate() const override { return theta_; }

private:
    std::string name_;
    Vec theta_;
};

class UniformRandomPolicy final : public Policy {
public:
    UniformRandomPolicy(std::string name, std::size_t dim, std::uint64_t seed);

    std::string name() const override { return name_; }
    std::size_t dim() const override { return dim_; }
    std::size_t select(const ContextSlate& slate) override;
    void observe(const ContextSlate&, std::size_t, double) override {}
    Vec estimate() const override { return Vec::Zero(static_cast<Eigen::Index>(dim_)); }

private:
    std::string name_;
    std::size_t dim_;
    std::mt19937_64 rng_;
};

}  // namespace conucb
