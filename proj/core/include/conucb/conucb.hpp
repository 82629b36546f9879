#pragma once

// Conversational UCB: arm-level ridge estimate anchored to a key-term-level
// estimate, with a two-part confidence width and key-term selection that
// greedily shrinks the key-term part of that width over the current slate.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "conucb/graph.hpp"
#include "conucb/linalg.hpp"
#include "conucb/policy.hpp"
#include "conucb/slate.hpp"

namespace conucb {

// Fixed exploration coefficients override the confidence-bound formulas.
struct ExplorationConfig {
    std::optional<double> alpha;
    std::optional<double> alpha_tilde;
    // ||theta~*||_2 in the key-term width; unknown to a deployed learner.
    double theta_tilde_norm = 1.0;
};

struct ConUCBParams {
    double lambda = 0.5;        // arm/key-term balance, open interval (0, 1)
    double lambda_tilde = 1.0;  // key-term ridge coefficient
    double sigma = 0.05;        // confidence level, open interval (0, 1)
    ExplorationConfig exploration;
};

// Throws ConfigError on lambda outside (0,1), lambda_tilde <= 0, sigma outside (0,1).
void validate(const ConUCBParams& params);

class ConUCBState {
public:
    ConUCBState(std::size_t dim, ConUCBParams params);

    std::size_t dim() const { return dim_; }
    const ConUCBParams& params() const { return params_; }

    const PsdMatrix& arm_gram() const { return arm_gram_; }          // M_t
    const Vec& arm_moment() const { return arm_moment_; }            // b_t
    const PsdMatrix& keyterm_gram() const { return keyterm_gram_; }  // M~_t
    const Vec& keyterm_moment() const { return keyterm_moment_; }    // b~_t
    const Vec& theta() const { return theta_; }
    const Vec& theta_tilde() const { return theta_tilde_; }

    std::size_t arm_observations() const { return arm_observations_; }
    std::size_t conversations() const { return conversations_; }

    // M~ += x~ x~^T; b~ += x~ r~.
    void observe_keyterm(const Vec& pseudo_context, double feedback);
    // M += lambda x x^T; b += lambda x r.
    void observe_arm(const Vec& context, double reward);

    // theta~ = M~^{-1} b~, theta = M^{-1}(b + (1 - lambda) theta~).
    void refresh();

private:
    std::size_t dim_;
    ConUCBParams params_;
    PsdMatrix arm_gram_;
    Vec arm_moment_;
    PsdMatrix keyterm_gram_;
    Vec keyterm_moment_;
    Vec theta_;
    Vec theta_tilde_;
    std::size_t arm_observations_ = 0;
    std::size_t conversations_ = 0;
};

struct EstimatePair {
    Vec theta_tilde;
    Vec theta;
};

EstimatePair refresh(ConUCBState& state);

// sqrt(d ln((1 + lambda t / ((1 - lambda) d)) / sigma)) at t arm observations.
double alpha_formula(std::size_t dim, double lambda, double sigma, std::size_t t);
// sqrt(2 (d ln 6 + ln(2 b / sigma))) + 2 sqrt(lambda~) ||theta~*||; b = 0 keeps only the additive term.
double alpha_tilde_formula(std::size_t dim, double lambda_tilde, double sigma, std::size_t conversations,
                           double theta_tilde_norm);

double alpha_t(const ConUCBState& state);
double alpha_tilde_t(const ConUCBState& state, double theta_tilde_norm);
// Uses the configured theta_tilde_norm.
double alpha_tilde_t(const ConUCBState& state);

// Scores for the columns of `contexts`:
//   estimate = x^T theta
//   arm_width = lambda alpha ||x||_{M^{-1}}
//   keyterm_width = (1 - lambda) alpha~ ||M^{-1} x||_{M~^{-1}}
std::vector<ArmScore> conucb_arm_scores(const PsdFactor& arm_gram, const PsdFactor& keyterm_gram,
                                        const Mat& contexts, const std::vector<ArmId>& arms, const Vec& theta,
                                        double lambda, double alpha, double alpha_tilde);

struct ArmSelection {
    std::size_t position = 0;
    std::vector<ArmScore> scores;
};

// argmax of estimate + width; ties go to the lowest slate position.
ArmSelection select_arm(const ConUCBState& state, const ContextSlate& slate);

// ||X M^{-1} M~^{-1} x~||^2 / (1 + x~^T M~^{-1} x~) for each column of pseudo_contexts,
// where X stacks the columns of slate_contexts as rows.
Vec keyterm_selection_scores(const PsdFactor& arm_gram, const PsdFactor& keyterm_gram, const Mat& slate_contexts,
                             const Mat& pseudo_contexts);

// Key-term maximizing keyterm_selection_scores among ids not in `asked`
// (asked[k] == true excludes k). Ties go to the lowest id. Throws UsageError
// when no candidate remains.
KeyTermId select_keyterm(const ConUCBState& state, const ContextSlate& slate, const Mat& pseudo_contexts,
                         const std::vector<bool>& asked);

// Var-MRC: sum over slate arms incident to k of
//   (w_{a,k} / sum_{a' in slate} w_{a',k}) * alpha~ ||M^{-1} x_a||_{M~^{-1}}.
// Key-terms with no incident slate arm score NaN.
Vec max_related_confidence_scores(const ConUCBState& state, const ContextSlate& slate,
                                  const RelationGraph& graph, double alpha_tilde);

// Var-LCR: same weighting applied to C_{a,t} - C_{a,t}^{k}, where C^k is the
// width after a hypothetical M~ + x~_k x~_k^T update (Sherman-Morrison).
// alpha~ is held fixed across the comparison.
Vec largest_confidence_reduction_scores(const ConUCBState& state, const ContextSlate& slate,
                                        const RelationGraph& graph, const Mat& pseudo_contexts,
                                        double alpha_tilde);

enum class KeytermRule {
    Optimal,                     // ConUCB
    Random,                      // Var-RS
    MaxRelatedConfidence,        // Var-MRC
    LargestConfidenceReduction,  // Var-LCR
};

std::string to_string(KeytermRule rule);

// Picks the best non-asked key-term under `rule`. NaN scores are not
// candidates; when every remaining score is NaN the lowest non-asked id wins.
KeyTermId pick_from_scores(const Vec& scores, const std::vector<bool>& asked);

// ConUCB and the Var-* variants behind the Policy interface.
class ConUCBPolicy final : public Policy {
public:
    ConUCBPolicy(std::string name, std::size_t dim, ConUCBParams params, KeytermRule rule,
                 std::shared_ptr<const RelationGraph> graph, std::shared_ptr<const Mat> pseudo_contexts,
                 std::uint64_t seed = 0);

    std::string name() const override { return name_; }
    std::size_t dim() const override { return state_.dim(); }

    std::vector<Query> converse(const ContextSlate& slate, std::size_t budget, FeedbackOracle& oracle) override;
    std::size_t select(const ContextSlate& slate) override;
    void observe(const ContextSlate& slate, std::size_t position, double reward) override;
    Vec estimate() const override { return state_.theta(); }
    const std::vector<ArmScore>& last_scores() const override { return last_scores_; }

    const ConUCBState& state() const { return state_; }
    KeytermRule rule() const { return rule_; }

    // Next key-term under this policy's rule, excluding `asked`.
    KeyTermId choose_keyterm(const ContextSlate& slate, const std::vector<bool>& asked);

private:
    std::string name_;
    ConUCBState state_;
    KeytermRule rule_;
    std::shared_ptr<const RelationGraph> graph_;
    std::shared_ptr<const Mat> pseudo_contexts_;
    std::mt19937_64 rng_;
    std::vector<ArmScore> last_scores_;
};

}  // namespace conucb
