#pragma once

// Bandits with per-arm hidden features: the reward is (x_a, v_a)^T theta
// where v_a in R^l is unobserved and learned by alternating ridge steps.
//
// hConUCB's updates are a reconstruction. Each block is a ridge regression
// that mirrors ConUCB's closed forms on the concatenated features.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include "conucb/baselines.hpp"
#include "conucb/conucb.hpp"
#include "conucb/graph.hpp"
#include "conucb/policy.hpp"
#include "conucb/rng.hpp"

namespace conucb {

struct HiddenParams {
    std::size_t hidden_dim = 5;
    double feature_ridge = 1.0;  // lambda_2 on each v_a
    double alpha_v = 0.25;       // weight of the hidden-feature width term
};

// A learner's copy of the hidden features plus its per-arm sufficient
// statistics (n_a, sum of contexts, sum of rewards), enough to redo its own
// Gram matrix exactly when some v_a moves.
class HiddenFeatures {
public:
    HiddenFeatures(std::size_t obs_dim, Mat initial, double feature_ridge);

    std::size_t obs_dim() const { return obs_dim_; }
    std::size_t hidden_dim() const { return static_cast<std::size_t>(features_.rows()); }
    std::size_t full_dim() const { return obs_dim_ + hidden_dim(); }
    std::size_t num_arms() const { return static_cast<std::size_t>(features_.cols()); }

    const Mat& features() const { return features_; }  // l x N
    Vec feature(ArmId a) const { return features_.col(static_cast<Eigen::Index>(a)); }

    Vec concat(const Vec& x, ArmId a) const;
    Mat concat(const ContextSlate& slate) const;

    void record(ArmId a, const Vec& x, double r);
    std::size_t count(ArmId a) const { return counts_[a]; }
    Vec context_sum(ArmId a) const { return context_sums_.col(static_cast<Eigen::Index>(a)); }
    double reward_sum(ArmId a) const { return reward_sums_[a]; }

    // Change in sum z z^T and sum z r over arm a's events when v_a moves.
    struct Correction {
        Mat gram;
        Vec moment;
    };
    Correction move(ArmId a, const Vec& v_new);

    double feature_ridge() const { return feature_ridge_; }

private:
    std::size_t obs_dim_;
    double feature_ridge_;
    Mat features_;
    std::vector<std::size_t> counts_;
    Mat context_sums_;
    std::vector<double> reward_sums_;
};

// The authoritative hidden features of one experiment, shared by the
// policies of all its users. A v-step pools every member that has data on
// the arm; members catch up on changed arms through the change log before
// they act. Not thread-safe, and members must outlive their last update().
class HiddenFeatureStore {
public:
    class Member {
    public:
        virtual ~Member() = default;
        // Adds this learner's terms of the v_a normal equations.
        virtual void feature_terms(ArmId a, PsdMatrix& gram, Vec& rhs) const = 0;
    };

    // Features start at N(0, 1/l) per coordinate; l = 0 draws nothing.
    HiddenFeatureStore(std::size_t num_arms, const HiddenParams& params, Rng& rng);

    std::size_t hidden_dim() const { return static_cast<std::size_t>(features_.rows()); }
    std::size_t num_arms() const { return static_cast<std::size_t>(features_.cols()); }
    double feature_ridge() const { return feature_ridge_; }
    const Mat& features() const { return features_; }
    Vec feature(ArmId a) const { return features_.col(static_cast<Eigen::Index>(a)); }

    // One observation of arm a by `member`.
    void observed(ArmId a, const Member* member);
    // `member` has terms for v_a without observing a (conversations).
    void join(ArmId a, const Member* member);
    std::size_t count(ArmId a) const { return counts_.at(a); }

    // Ridge step for v_a with every member's parameters fixed.
    void update(ArmId a);

    std::size_t revision() const { return log_.size(); }
    ArmId changed(std::size_t i) const { return log_[i]; }

    // ||theta_v||_{C_a^{-1}} with C_a = n_a theta_v theta_v^T + lambda_2 I,
    // n_a counted over all members.
    double width(ArmId a, const Vec& theta_v) const;

private:
    double feature_ridge_;
    Mat features_;
    std::vector<std::size_t> counts_;
    std::vector<std::vector<const Member*>> members_;
    std::vector<ArmId> log_;
};

// Without a store the policy owns one, initialized from its own seed.
class HLinUCBPolicy final : public Policy, public HiddenFeatureStore::Member {
public:
    HLinUCBPolicy(std::string name, std::size_t obs_dim, std::size_t num_arms, LinUCBParams params,
                  HiddenParams hidden, std::uint64_t seed, std::shared_ptr<HiddenFeatureStore> store = nullptr);

    std::string name() const override { return name_; }
    std::size_t dim() const override { return hidden_.obs_dim(); }
    std::size_t select(const ContextSlate& slate) override;
    void observe(const ContextSlate& slate, std::size_t position, double reward) override;
    Vec estimate() const override { return ridge_.theta(); }
    const std::vector<ArmScore>& last_scores() const override { return last_scores_; }

    void feature_terms(ArmId a, PsdMatrix& gram, Vec& rhs) const override;

    const RidgeState& ridge() const { return ridge_; }
    const HiddenFeatures& hidden() const { return hidden_; }
    const HiddenFeatureStore& store() const { return *store_; }

private:
    void sync();

    std::string name_;
    LinUCBParams params_;
    HiddenParams hidden_params_;
    Rng rng_;
    std::shared_ptr<HiddenFeatureStore> store_;
    std::size_t synced_ = 0;
    HiddenFeatures hidden_;
    RidgeState ridge_;
    std::vector<ArmScore> last_scores_;
};

class HConUCBPolicy final : public Policy, public HiddenFeatureStore::Member {
public:
    // obs_pseudo_contexts: observable part of the key-term pseudo-contexts (d x K).
    HConUCBPolicy(std::string name, std::size_t obs_dim, std::size_t num_arms, ConUCBParams params,
                  HiddenParams hidden, std::shared_ptr<const RelationGraph> graph,
                  std::shared_ptr<const Mat> obs_pseudo_contexts, std::uint64_t seed,
                  std::shared_ptr<HiddenFeatureStore> store = nullptr);

    std::string name() const override { return name_; }
    std::size_t dim() const override { return hidden_.obs_dim(); }
    std::vector<Query> converse(const ContextSlate& slate, std::size_t budget, FeedbackOracle& oracle) override;
    std::size_t select(const ContextSlate& slate) override;
    void observe(const ContextSlate& slate, std::size_t position, double reward) override;
    Vec estimate() const override { return theta_; }
    const std::vector<ArmScore>& last_scores() const override { return last_scores_; }

    const Vec& theta() const { return theta_; }
    const Vec& theta_tilde() const { return theta_tilde_; }
    const HiddenFeatures& hidden() const { return hidden_; }
    const HiddenFeatureStore& store() const { return *store_; }
    // Concatenated pseudo-context of k under the current hidden features.
    Vec pseudo_context(KeyTermId k) const;

    // Arm residuals weighted lambda, plus the residual of every conversation
    // on a key-term incident to a, with v_a entering through c = w_{a,k}/W_k.
    void feature_terms(ArmId a, PsdMatrix& gram, Vec& rhs) const override;

private:
    void sync();
    void rebuild_keyterm_level();
    void refresh();
    double alpha() const;
    double alpha_tilde() const;

    struct Conversation {
        KeyTermId keyterm;
        double feedback;
    };

    std::string name_;
    ConUCBParams params_;
    HiddenParams hidden_params_;
    std::shared_ptr<const RelationGraph> graph_;
    std::shared_ptr<const Mat> obs_pseudo_;
    Rng rng_;
    std::shared_ptr<HiddenFeatureStore> store_;
    std::size_t synced_ = 0;
    HiddenFeatures hidden_;
    Mat hidden_pseudo_;  // l x K, weight-averaged hidden features of incident arms

    PsdMatrix arm_gram_;
    Vec arm_moment_;
    PsdMatrix keyterm_gram_;
    Vec keyterm_moment_;
    bool keyterm_dirty_ = false;
    Vec theta_;
    Vec theta_tilde_;
    std::size_t arm_observations_ = 0;
    std::vector<Conversation> conversations_;
    std::vector<bool> asked_;  // key-terms asked at least once
    std::vector<ArmScore> last_scores_;
};

// Batch form of the hLinUCB alternation, used to check that every block
// step weakly decreases
//   sum (r - x^T theta_x - v_a^T theta_v)^2 + ridge ||theta||^2 + feature_ridge sum_a ||v_a||^2.
struct HiddenObservation {
    ArmId arm;
    Vec context;  // observable part
    double reward;
};

double hidden_objective(const std::vector<HiddenObservation>& batch, const Vec& theta, const Mat& features,
                        double ridge, double feature_ridge);
// argmin over theta with features fixed.
Vec hidden_theta_step(const std::vector<HiddenObservation>& batch, const Mat& features, double ridge);
// argmin over every v_a with theta fixed; arms absent from the batch go to zero.
Mat hidden_feature_step(const std::vector<HiddenObservation>& batch, const Vec& theta, std::size_t num_arms,
                        double feature_ridge);

}  // namespace conucb
