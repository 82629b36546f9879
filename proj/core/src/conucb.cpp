#include "conucb/conucb.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "conucb/errors.hpp"

namespace conucb {

void validate(const ConUCBParams& params) {
    std::ostringstream msg;
    if (!(params.lambda > 0.0 && params.lambda < 1.0)) {
        msg << "ConUCB: lambda must lie in (0, 1), got " << params.lambda;
    } else if (!(params.lambda_tilde > 0.0)) {
        msg << "ConUCB: lambda_tilde must be positive, got " << params.lambda_tilde;
    } else if (!(params.sigma > 0.0 && params.sigma < 1.0)) {
        msg << "ConUCB: sigma must lie in (0, 1), got " << params.sigma;
    } else if (params.exploration.alpha && !(*params.exploration.alpha >= 0.0)) {
        msg << "ConUCB: fixed alpha must be nonnegative";
    } else if (params.exploration.alpha_tilde && !(*params.exploration.alpha_tilde >= 0.0)) {
        msg << "ConUCB: fixed alpha_tilde must be nonnegative";
    } else if (!(params.exploration.theta_tilde_norm >= 0.0)) {
        msg << "ConUCB: theta_tilde_norm must be nonnegative";
    } else {
        return;
    }
    throw ConfigError(msg.str());
}

ConUCBState::ConUCBState(std::size_t dim, ConUCBParams params)
    : dim_(dim),
      params_(params),
      arm_gram_(PsdMatrix::scaled_identity(static_cast<Eigen::Index>(dim), 1.0 - params.lambda)),
      arm_moment_(Vec::Zero(static_cast<Eigen::Index>(dim))),
      keyterm_gram_(PsdMatrix::scaled_identity(static_cast<Eigen::Index>(dim), params.lambda_tilde)),
      keyterm_moment_(Vec::Zero(static_cast<Eigen::Index>(dim))),
      theta_(Vec::Zero(static_cast<Eigen::Index>(dim))),
      theta_tilde_(Vec::Zero(static_cast<Eigen::Index>(dim))) {
    validate(params_);
}

void ConUCBState::observe_keyterm(const Vec& pseudo_context, double feedback) {
    keyterm_gram_.rank_one_update(pseudo_context, 1.0);
    keyterm_moment_.noalias() += feedback * pseudo_context;
    ++conversations_;
}

void ConUCBState::observe_arm(const Vec& context, double reward) {
    arm_gram_.rank_one_update(context, params_.lambda);
    arm_moment_.noalias() += (params_.lambda * reward) * context;
    ++arm_observations_;
}

void ConUCBState::refresh() {
    theta_tilde_ = solve_psd(keyterm_gram_, keyterm_moment_);
    theta_ = solve_psd(arm_gram_, arm_moment_ + (1.0 - params_.lambda) * theta_tilde_);
}

EstimatePair refresh(ConUCBState& state) {
    state.refresh();
    return {state.theta_tilde(), state.theta()};
}

double alpha_formula(std::size_t dim, double lambda, double sigma, std::size_t t) {
    if (!(lambda > 0.0 && lambda < 1.0)) throw ConfigError("alpha: lambda must lie in (0, 1)");
    const double d = static_cast<double>(dim);
    const double growth = 1.0 + lambda * static_cast<double>(t) / ((1.0 - lambda) * d);
    return std::sqrt(std::max(0.0, d * std::log(growth / sigma)));
}

double alpha_tilde_formula(std::size_t dim, double lambda_tilde, double sigma, std::size_t conversations,
                           double theta_tilde_norm) {
    const double bias = 2.0 * std::sqrt(lambda_tilde) * theta_tilde_norm;
    if (conversations == 0) return bias;
    const double d = static_cast<double>(dim);
    const double inner = d * std::log(6.0) + std::log(2.0 * static_cast<double>(conversations) / sigma);
    return std::sqrt(2.0 * std::max(0.0, inner)) + bias;
}

double alpha_t(const ConUCBState& state) {
    const auto& p = state.params();
    if (p.exploration.alpha) return *p.exploration.alpha;
    return alpha_formula(state.dim(), p.lambda, p.sigma, state.arm_observations());
}

double alpha_tilde_t(const ConUCBState& state, double theta_tilde_norm) {
    const auto& p = state.params();
    if (p.exploration.alpha_tilde) return *p.exploration.alpha_tilde;
    return alpha_tilde_formula(state.dim(), p.lambda_tilde, p.sigma, state.conversations(), theta_tilde_norm);
}

double alpha_tilde_t(const ConUCBState& state) {
    return alpha_tilde_t(state, state.params().exploration.theta_tilde_norm);
}

std::vector<ArmScore> conucb_arm_scores(const PsdFactor& arm_gram, const PsdFactor& keyterm_gram,
                                        const Mat& contexts, const std::vector<ArmId>& arms, const Vec& theta,
                                        double lambda, double alpha, double alpha_tilde) {
    const Mat projected = arm_gram.solve(contexts);  // M^{-1} X^T
    const Vec arm_sq = (contexts.array() * projected.array()).colwise().sum().transpose();
    const Vec key_sq = keyterm_gram.inverse_quadratic_columns(projected);
    const Vec estimates = contexts.transpose() * theta;
    std::vector<ArmScore> scores(arms.size());
    for (std::size_t j = 0; j < arms.size(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        ArmScore& s = scores[j];
        s.arm = arms[j];
        s.estimate = estimates(jj);
        s.arm_width = lambda * alpha * std::sqrt(std::max(0.0, arm_sq(jj)));
        s.keyterm_width = (1.0 - lambda) * alpha_tilde * std::sqrt(key_sq(jj));
        s.width = s.arm_width + s.keyterm_width;
    }
    return scores;
}

ArmSelection select_arm(const ConUCBState& state, const ContextSlate& slate) {
    if (slate.size() == 0) throw UsageError("select_arm: empty slate");
    if (slate.dim() != static_cast<Eigen::Index>(state.dim())) {
        throw ConfigError("select_arm: slate dimension does not match the learner");
    }
    const PsdFactor arm_factor(state.arm_gram());
    const PsdFactor key_factor(state.keyterm_gram());
    ArmSelection out;
    out.scores = conucb_arm_scores(arm_factor, key_factor, slate.contexts, slate.arms, state.theta(),
                                   state.params().lambda, alpha_t(state), alpha_tilde_t(state));
    Vec ucb(static_cast<Eigen::Index>(out.scores.size()));
    for (std::size_t j = 0; j < out.scores.size(); ++j) ucb(static_cast<Eigen::Index>(j)) = out.scores[j].ucb();
    out.position = argmax_first(ucb);
    return out;
}

Vec keyterm_selection_scores(const PsdFactor& arm_gram, const PsdFactor& keyterm_gram, const Mat& slate_contexts,
                             const Mat& pseudo_contexts) {
    // Columns of `directions` are M~^{-1} M^{-1} x_a, so row a of X M^{-1} M~^{-1} x~ is directions.col(a) . x~.
    const Mat directions = keyterm_gram.solve(arm_gram.solve(slate_contexts));
    const Vec numer = (directions.transpose() * pseudo_contexts).colwise().squaredNorm().transpose();
    const Vec denom = keyterm_gram.inverse_quadratic_columns(pseudo_contexts).array() + 1.0;
    return numer.cwiseQuotient(denom);
}

KeyTermId pick_from_scores(const Vec& scores, const std::vector<bool>& asked) {
    std::optional<KeyTermId> best;
    std::optional<KeyTermId> first_open;
    double best_score = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < scores.size(); ++k) {
        const auto id = static_cast<KeyTermId>(k);
        if (id < asked.size() && asked[id]) continue;
        if (!first_open) first_open = id;
        const double s = scores(k);
        if (std::isnan(s)) continue;
        if (!best || s > best_score) {
            best = id;
            best_score = s;
        }
    }
    if (best) return *best;
    if (first_open) return *first_open;
    throw UsageError("select_keyterm: no candidate key-term left");
}

KeyTermId select_keyterm(const ConUCBState& state, const ContextSlate& slate, const Mat& pseudo_contexts,
                         const std::vector<bool>& asked) {
    if (slate.size() == 0) throw UsageError("select_keyterm: empty slate");
    const PsdFactor arm_factor(state.arm_gram());
    const PsdFactor key_factor(state.keyterm_gram());
    return pick_from_scores(keyterm_selection_scores(arm_factor, key_factor, slate.contexts, pseudo_contexts),
                            asked);
}

namespace {

// Slate-restricted column sums of the relation weights.
struct SlateIncidence {
    Vec slate_column_sum;  // sum_{a in slate} w_{a,k}
};

SlateIncidence slate_incidence(const RelationGraph& graph, const ContextSlate& slate) {
    SlateIncidence out{Vec::Zero(static_cast<Eigen::Index>(graph.num_keyterms()))};
    for (ArmId a : slate.arms) {
        for (const auto& inc : graph.keyterms_of(a)) {
            out.slate_column_sum(static_cast<Eigen::Index>(inc.id)) += inc.weight;
        }
    }
    return out;
}

Vec nan_vector(std::size_t n) {
    return Vec::Constant(static_cast<Eigen::Index>(n), std::numeric_limits<double>::quiet_NaN());
}

}  // namespace

Vec max_related_confidence_scores(const ConUCBState& state, const ContextSlate& slate,
                                  const RelationGraph& graph, double alpha_tilde) {
    const PsdFactor arm_factor(state.arm_gram());
    const PsdFactor key_factor(state.keyterm_gram());
    const Mat projected = arm_factor.solve(slate.contexts);
    const Vec key_sq = key_factor.inverse_quadratic_columns(projected);
    const SlateIncidence inc = slate_incidence(graph, slate);

    Vec scores = nan_vector(graph.num_keyterms());
    for (std::size_t j = 0; j < slate.size(); ++j) {
        const double width = alpha_tilde * std::sqrt(key_sq(static_cast<Eigen::Index>(j)));
        for (const auto& e : graph.keyterms_of(slate.arms[j])) {
            const auto k = static_cast<Eigen::Index>(e.id);
            const double total = inc.slate_column_sum(k);
            if (!(total > 0.0)) continue;
            if (std::isnan(scores(k))) scores(k) = 0.0;
            scores(k) += (e.weight / total) * width;
        }
    }
    return scores;
}

Vec largest_confidence_reduction_scores(const ConUCBState& state, const ContextSlate& slate,
                                        const RelationGraph& graph, const Mat& pseudo_contexts,
                                        double alpha_tilde) {
    const double lambda = state.params().lambda;
    const PsdFactor arm_factor(state.arm_gram());
    const PsdFactor key_factor(state.keyterm_gram());
    const Mat projected = arm_factor.solve(slate.contexts);      // y_a = M^{-1} x_a
    const Mat key_projected = key_factor.solve(projected);       // M~^{-1} y_a
    const Vec key_sq = (projected.array() * key_projected.array()).colwise().sum().transpose();
    const Mat key_pseudo = key_factor.solve(pseudo_contexts);    // M~^{-1} x~_k
    const Vec pseudo_sq = (pseudo_contexts.array() * key_pseudo.array()).colwise().sum().transpose();
    const SlateIncidence inc = slate_incidence(graph, slate);

    Vec scores = nan_vector(graph.num_keyterms());
    for (std::size_t j = 0; j < slate.size(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        const double before_sq = std::max(0.0, key_sq(jj));
        for (const auto& e : graph.keyterms_of(slate.arms[j])) {
            const auto k = static_cast<Eigen::Index>(e.id);
            const double total = inc.slate_column_sum(k);
            if (!(total > 0.0)) continue;
            const double cross = key_projected.col(jj).dot(pseudo_contexts.col(k));
            const double after_sq = std::max(0.0, before_sq - cross * cross / (1.0 + pseudo_sq(k)));
            const double reduction = (1.0 - lambda) * alpha_tilde * (std::sqrt(before_sq) - std::sqrt(after_sq));
            if (std::isnan(scores(k))) scores(k) = 0.0;
            scores(k) += (e.weight / total) * reduction;
        }
    }
    return scores;
}

std::string to_string(KeytermRule rule) {
    switch (rule) {
        case KeytermRule::Optimal:
            return "optimal";
        case KeytermRule::Random:
            return "random";
        case KeytermRule::MaxRelatedConfidence:
            return "max_related_confidence";
        case KeytermRule::LargestConfidenceReduction:
            return "largest_confidence_reduction";
    }
    return "optimal";
}

ConUCBPolicy::ConUCBPolicy(std::string name, std::size_t dim, ConUCBParams params, KeytermRule rule,
                           std::shared_ptr<const RelationGraph> graph, std::shared_ptr<const Mat> pseudo_contexts,
                           std::uint64_t seed)
    : name_(std::move(name)),
      state_(dim, params),
      rule_(rule),
      graph_(std::move(graph)),
      pseudo_contexts_(std::move(pseudo_contexts)),
      rng_(seed) {
    if (!graph_ || !pseudo_contexts_) throw ConfigError("ConUCBPolicy: graph and pseudo-contexts are required");
    if (pseudo_contexts_->rows() != static_cast<Eigen::Index>(dim) ||
        pseudo_contexts_->cols() != static_cast<Eigen::Index>(graph_->num_keyterms())) {
        throw ConfigError("ConUCBPolicy: pseudo-context table must be d x K");
    }
}

KeyTermId ConUCBPolicy::choose_keyterm(const ContextSlate& slate, const std::vector<bool>& asked) {
    switch (rule_) {
        case KeytermRule::Optimal:
            return select_keyterm(state_, slate, *pseudo_contexts_, asked);
        case KeytermRule::Random: {
            std::vector<KeyTermId> open;
            for (KeyTermId k = 0; k < graph_->num_keyterms(); ++k) {
                if (!asked[k]) open.push_back(k);
            }
            if (open.empty()) throw UsageError("select_keyterm: no candidate key-term left");
            std::uniform_int_distribution<std::size_t> pick(0, open.size() - 1);
            return open[pick(rng_)];
        }
        case KeytermRule::MaxRelatedConfidence:
            return pick_from_scores(max_related_confidence_scores(state_, slate, *graph_, alpha_tilde_t(state_)),
                                    asked);
        case KeytermRule::LargestConfidenceReduction:
            return pick_from_scores(largest_confidence_reduction_scores(state_, slate, *graph_, *pseudo_contexts_,
                                                                        alpha_tilde_t(state_)),
                                    asked);
    }
    throw UsageError("unknown key-term rule");
}

std::vector<Query> ConUCBPolicy::converse(const ContextSlate& slate, std::size_t budget, FeedbackOracle& oracle) {
    std::vector<Query> queries;
    std::vector<bool> asked(graph_->num_keyterms(), false);
    for (std::size_t unit = 0; unit < budget && queries.size() < graph_->num_keyterms(); ++unit) {
        const KeyTermId k = choose_keyterm(slate, asked);
        asked[k] = true;
        const double feedback = oracle.keyterm_feedback(k);
        state_.observe_keyterm(pseudo_contexts_->col(static_cast<Eigen::Index>(k)), feedback);
        queries.push_back({Query::Kind::KeyTerm, k, feedback});
    }
    return queries;
}

std::size_t ConUCBPolicy::select(const ContextSlate& slate) {
    state_.refresh();
    ArmSelection sel = select_arm(state_, slate);
    last_scores_ = std::move(sel.scores);
    return sel.position;
}

void ConUCBPolicy::observe(const ContextSlate& slate, std::size_t position, double reward) {
    state_.observe_arm(slate.contexts.col(static_cast<Eigen::Index>(position)), reward);
    state_.refresh();
}

}  // namespace conucb
