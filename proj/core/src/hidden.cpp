#include "conucb/hidden.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "conucb/errors.hpp"

namespace conucb {

HiddenFeatures::HiddenFeatures(std::size_t obs_dim, Mat initial, double feature_ridge)
    : obs_dim_(obs_dim),
      feature_ridge_(feature_ridge),
      features_(std::move(initial)),
      counts_(static_cast<std::size_t>(features_.cols()), 0),
      context_sums_(Mat::Zero(static_cast<Eigen::Index>(obs_dim), features_.cols())),
      reward_sums_(static_cast<std::size_t>(features_.cols()), 0.0) {
    if (obs_dim == 0 || features_.cols() == 0) throw ConfigError("hidden features: dimensions must be positive");
}

Vec HiddenFeatures::concat(const Vec& x, ArmId a) const {
    if (hidden_dim() == 0) return x;
    Vec z(static_cast<Eigen::Index>(full_dim()));
    z << x, features_.col(static_cast<Eigen::Index>(a));
    return z;
}

Mat HiddenFeatures::concat(const ContextSlate& slate) const {
    if (hidden_dim() == 0) return slate.contexts;
    Mat z(static_cast<Eigen::Index>(full_dim()), static_cast<Eigen::Index>(slate.size()));
    const auto d = static_cast<Eigen::Index>(obs_dim_);
    z.topRows(d) = slate.contexts;
    for (std::size_t j = 0; j < slate.size(); ++j)
        z.col(static_cast<Eigen::Index>(j)).tail(features_.rows()) = features_.col(static_cast<Eigen::Index>(slate.arms[j]));
    return z;
}

void HiddenFeatures::record(ArmId a, const Vec& x, double r) {
    ++counts_.at(a);
    context_sums_.col(static_cast<Eigen::Index>(a)) += x;
    reward_sums_[a] += r;
}

HiddenFeatures::Correction HiddenFeatures::move(ArmId a, const Vec& v_new) {
    const auto d = static_cast<Eigen::Index>(obs_dim_);
    const Eigen::Index l = features_.rows();
    const auto col = static_cast<Eigen::Index>(a);
    const Vec v_old = features_.col(col);
    const Vec delta = v_new - v_old;
    const double n = static_cast<double>(counts_[a]);
    const Vec sx = context_sums_.col(col);

    Correction c{Mat::Zero(d + l, d + l), Vec::Zero(d + l)};
    c.gram.topRightCorner(d, l) = sx * delta.transpose();
    c.gram.bottomLeftCorner(l, d) = delta * sx.transpose();
    c.gram.bottomRightCorner(l, l) = n * (v_new * v_new.transpose() - v_old * v_old.transpose());
    c.moment.tail(l) = reward_sums_[a] * delta;
    features_.col(col) = v_new;
    return c;
}

// ---------------------------------------------------------------- shared store

HiddenFeatureStore::HiddenFeatureStore(std::size_t num_arms, const HiddenParams& params, Rng& rng)
    : feature_ridge_(params.feature_ridge),
      features_(static_cast<Eigen::Index>(params.hidden_dim), static_cast<Eigen::Index>(num_arms)),
      counts_(num_arms, 0),
      members_(num_arms) {
    if (num_arms == 0) throw ConfigError("hidden features: dimensions must be positive");
    if (!(params.feature_ridge > 0.0)) throw ConfigError("hidden features: feature_ridge must be positive");
    if (!(params.alpha_v >= 0.0)) throw ConfigError("hidden features: alpha_v must be nonnegative");
    if (params.hidden_dim > 0) {
        std::normal_distribution<double> init(0.0, 1.0 / std::sqrt(static_cast<double>(params.hidden_dim)));
        for (Eigen::Index a = 0; a < features_.cols(); ++a)
            for (Eigen::Index i = 0; i < features_.rows(); ++i) features_(i, a) = init(rng);
    }
}

void HiddenFeatureStore::observed(ArmId a, const Member* member) {
    ++counts_.at(a);
    join(a, member);
}

void HiddenFeatureStore::join(ArmId a, const Member* member) {
    auto& m = members_.at(a);
    if (std::find(m.begin(), m.end(), member) == m.end()) m.push_back(member);
}

void HiddenFeatureStore::update(ArmId a) {
    const auto l = static_cast<Eigen::Index>(hidden_dim());
    if (l == 0) return;
    PsdMatrix g = PsdMatrix::scaled_identity(l, feature_ridge_);
    Vec rhs = Vec::Zero(l);
    for (const Member* m : members_.at(a)) m->feature_terms(a, g, rhs);
    features_.col(static_cast<Eigen::Index>(a)) = solve_psd(g, rhs);
    log_.push_back(a);
}

double HiddenFeatureStore::width(ArmId a, const Vec& theta_v) const {
    if (theta_v.size() == 0) return 0.0;
    const double s = theta_v.squaredNorm();
    const double n = static_cast<double>(counts_[a]);
    return std::sqrt(s / (feature_ridge_ + n * s));
}

namespace {

std::shared_ptr<HiddenFeatureStore> own_store(std::shared_ptr<HiddenFeatureStore> store, std::size_t num_arms,
                                              const HiddenParams& hidden, Rng& rng) {
    if (store) {
        if (store->hidden_dim() != hidden.hidden_dim || store->num_arms() != num_arms)
            throw ConfigError("hidden features: shared store does not match the policy");
        return store;
    }
    return std::make_shared<HiddenFeatureStore>(num_arms, hidden, rng);
}

}  // namespace

// ---------------------------------------------------------------- hLinUCB

HLinUCBPolicy::HLinUCBPolicy(std::string name, std::size_t obs_dim, std::size_t num_arms, LinUCBParams params,
                             HiddenParams hidden, std::uint64_t seed, std::shared_ptr<HiddenFeatureStore> store)
    : name_(std::move(name)),
      params_(params),
      hidden_params_(hidden),
      rng_(seed),
      store_(own_store(std::move(store), num_arms, hidden, rng_)),
      synced_(store_->revision()),
      hidden_(obs_dim, store_->features(), hidden.feature_ridge),
      ridge_(obs_dim + hidden.hidden_dim, params.ridge) {
    if (!(params_.sigma > 0.0 && params_.sigma < 1.0)) throw ConfigError("hLinUCB: sigma must lie in (0, 1)");
}

void HLinUCBPolicy::sync() {
    for (; synced_ < store_->revision(); ++synced_) {
        const ArmId a = store_->changed(synced_);
        const Vec v = store_->feature(a);
        if (v == hidden_.feature(a)) continue;
        const HiddenFeatures::Correction c = hidden_.move(a, v);
        if (hidden_.count(a) > 0) ridge_.correct(c.gram, c.moment);
    }
}

void HLinUCBPolicy::feature_terms(ArmId a, PsdMatrix& gram, Vec& rhs) const {
    // (n theta_v theta_v^T + lambda_2 I) v = theta_v (s_r - s_x^T theta_x)
    const auto d = static_cast<Eigen::Index>(hidden_.obs_dim());
    const auto l = static_cast<Eigen::Index>(hidden_.hidden_dim());
    const Vec theta_x = ridge_.theta().head(d);
    const Vec theta_v = ridge_.theta().tail(l);
    const double n = static_cast<double>(hidden_.count(a));
    if (n == 0.0) return;
    gram.rank_one_update(theta_v, n);
    rhs.noalias() += theta_v * (hidden_.reward_sum(a) - hidden_.context_sum(a).dot(theta_x));
}

std::size_t HLinUCBPolicy::select(const ContextSlate& slate) {
    if (slate.size() == 0) throw UsageError("select: empty slate");
    if (slate.dim() != static_cast<Eigen::Index>(dim())) throw ConfigError("select: slate dimension mismatch");
    sync();
    ridge_.refresh();
    const PsdFactor factor(ridge_.gram());
    const Mat z = hidden_.concat(slate);
    last_scores_ = linucb_scores(factor, z, slate.arms, ridge_.theta(),
                                 linucb_alpha(params_, hidden_.full_dim(), ridge_.observations()));
    const std::size_t l = hidden_.hidden_dim();
    if (l > 0) {
        const Vec theta_v = ridge_.theta().tail(static_cast<Eigen::Index>(l));
        for (auto& s : last_scores_) {
            const double extra = hidden_params_.alpha_v * store_->width(s.arm, theta_v);
            s.arm_width += extra;
            s.width += extra;
        }
    }
    Vec ucb(static_cast<Eigen::Index>(last_scores_.size()));
    for (std::size_t j = 0; j < last_scores_.size(); ++j) ucb(static_cast<Eigen::Index>(j)) = last_scores_[j].ucb();
    return argmax_first(ucb);
}

void HLinUCBPolicy::observe(const ContextSlate& slate, std::size_t position, double reward) {
    sync();
    const ArmId a = slate.arms[position];
    const Vec x = slate.contexts.col(static_cast<Eigen::Index>(position));
    ridge_.observe(hidden_.concat(x, a), reward);
    hidden_.record(a, x, reward);
    store_->observed(a, this);
    ridge_.refresh();  // theta-step
    if (hidden_.hidden_dim() == 0) return;
    store_->update(a);  // v-step
    sync();
}

// ---------------------------------------------------------------- hConUCB

HConUCBPolicy::HConUCBPolicy(std::string name, std::size_t obs_dim, std::size_t num_arms, ConUCBParams params,
                             HiddenParams hidden, std::shared_ptr<const RelationGraph> graph,
                             std::shared_ptr<const Mat> obs_pseudo_contexts, std::uint64_t seed,
                             std::shared_ptr<HiddenFeatureStore> store)
    : name_(std::move(name)),
      params_(params),
      hidden_params_(hidden),
      graph_(std::move(graph)),
      obs_pseudo_(std::move(obs_pseudo_contexts)),
      rng_(seed),
      store_(own_store(std::move(store), num_arms, hidden, rng_)),
      synced_(store_->revision()),
      hidden_(obs_dim, store_->features(), hidden.feature_ridge),
      arm_gram_(PsdMatrix::scaled_identity(static_cast<Eigen::Index>(obs_dim + hidden.hidden_dim), 1.0 - params.lambda)),
      arm_moment_(Vec::Zero(static_cast<Eigen::Index>(obs_dim + hidden.hidden_dim))),
      keyterm_gram_(PsdMatrix::scaled_identity(static_cast<Eigen::Index>(obs_dim + hidden.hidden_dim), params.lambda_tilde)),
      keyterm_moment_(Vec::Zero(static_cast<Eigen::Index>(obs_dim + hidden.hidden_dim))),
      theta_(Vec::Zero(static_cast<Eigen::Index>(obs_dim + hidden.hidden_dim))),
      theta_tilde_(Vec::Zero(static_cast<Eigen::Index>(obs_dim + hidden.hidden_dim))) {
    validate(params_);
    if (!graph_ || !obs_pseudo_) throw ConfigError("hConUCB: graph and pseudo-contexts are required");
    if (graph_->num_arms() != num_arms) throw ConfigError("hConUCB: graph arm count mismatch");
    if (obs_pseudo_->rows() != static_cast<Eigen::Index>(obs_dim) ||
        obs_pseudo_->cols() != static_cast<Eigen::Index>(graph_->num_keyterms()))
        throw ConfigError("hConUCB: pseudo-context table must be d x K");

    asked_.assign(graph_->num_keyterms(), false);
    const auto l = static_cast<Eigen::Index>(hidden.hidden_dim);
    hidden_pseudo_ = Mat::Zero(l, static_cast<Eigen::Index>(graph_->num_keyterms()));
    if (l > 0) {
        for (KeyTermId k = 0; k < graph_->num_keyterms(); ++k) {
            const double total = graph_->column_sum(k);
            for (const auto& e : graph_->arms_of(k))
                hidden_pseudo_.col(static_cast<Eigen::Index>(k)) += (e.weight / total) * hidden_.feature(e.id);
        }
    }
}

Vec HConUCBPolicy::pseudo_context(KeyTermId k) const {
    const auto kk = static_cast<Eigen::Index>(k);
    if (hidden_.hidden_dim() == 0) return obs_pseudo_->col(kk);
    Vec p(static_cast<Eigen::Index>(hidden_.full_dim()));
    p << obs_pseudo_->col(kk), hidden_pseudo_.col(kk);
    return p;
}

void HConUCBPolicy::sync() {
    const double lambda = params_.lambda;
    for (; synced_ < store_->revision(); ++synced_) {
        const ArmId a = store_->changed(synced_);
        const Vec v = store_->feature(a);
        const Vec v_old = hidden_.feature(a);
        if (v == v_old) continue;
        const HiddenFeatures::Correction c = hidden_.move(a, v);
        if (hidden_.count(a) > 0) {
            arm_gram_.add_symmetric(lambda * c.gram);
            arm_moment_.noalias() += lambda * c.moment;
        }
        for (const auto& e : graph_->keyterms_of(a)) {
            hidden_pseudo_.col(static_cast<Eigen::Index>(e.id)) += (e.weight / graph_->column_sum(e.id)) * (v - v_old);
            // Asked key-terms incident to a now have different pseudo-contexts.
            keyterm_dirty_ = keyterm_dirty_ || asked_[e.id];
        }
    }
}

void HConUCBPolicy::rebuild_keyterm_level() {
    if (!keyterm_dirty_) return;
    const auto dim = static_cast<Eigen::Index>(hidden_.full_dim());
    keyterm_gram_ = PsdMatrix::scaled_identity(dim, params_.lambda_tilde);
    keyterm_moment_ = Vec::Zero(dim);
    for (const auto& c : conversations_) {
        const Vec p = pseudo_context(c.keyterm);
        keyterm_gram_.rank_one_update(p, 1.0);
        keyterm_moment_.noalias() += c.feedback * p;
    }
    keyterm_dirty_ = false;
}

void HConUCBPolicy::refresh() {
    rebuild_keyterm_level();
    theta_tilde_ = solve_psd(keyterm_gram_, keyterm_moment_);
    theta_ = solve_psd(arm_gram_, arm_moment_ + (1.0 - params_.lambda) * theta_tilde_);
}

double HConUCBPolicy::alpha() const {
    if (params_.exploration.alpha) return *params_.exploration.alpha;
    return alpha_formula(hidden_.full_dim(), params_.lambda, params_.sigma, arm_observations_);
}

double HConUCBPolicy::alpha_tilde() const {
    if (params_.exploration.alpha_tilde) return *params_.exploration.alpha_tilde;
    return alpha_tilde_formula(hidden_.full_dim(), params_.lambda_tilde, params_.sigma, conversations_.size(),
                               params_.exploration.theta_tilde_norm);
}

std::vector<Query> HConUCBPolicy::converse(const ContextSlate& slate, std::size_t budget, FeedbackOracle& oracle) {
    std::vector<Query> queries;
    if (slate.size() == 0) throw UsageError("select_keyterm: empty slate");
    sync();
    rebuild_keyterm_level();
    const std::size_t num_k = graph_->num_keyterms();
    const Mat z = hidden_.concat(slate);
    Mat pseudo(static_cast<Eigen::Index>(hidden_.full_dim()), static_cast<Eigen::Index>(num_k));
    if (hidden_.hidden_dim() == 0) {
        pseudo = *obs_pseudo_;
    } else {
        pseudo << *obs_pseudo_, hidden_pseudo_;
    }
    std::vector<bool> asked(num_k, false);
    for (std::size_t unit = 0; unit < budget && queries.size() < num_k; ++unit) {
        const PsdFactor arm_factor(arm_gram_);
        const PsdFactor key_factor(keyterm_gram_);
        const KeyTermId k = pick_from_scores(keyterm_selection_scores(arm_factor, key_factor, z, pseudo), asked);
        asked[k] = true;
        if (!asked_[k]) {
            asked_[k] = true;
            for (const auto& e : graph_->arms_of(k)) store_->join(e.id, this);
        }
        const double feedback = oracle.keyterm_feedback(k);
        const Vec p = pseudo.col(static_cast<Eigen::Index>(k));
        keyterm_gram_.rank_one_update(p, 1.0);
        keyterm_moment_.noalias() += feedback * p;
        conversations_.push_back({k, feedback});
        queries.push_back({Query::Kind::KeyTerm, k, feedback});
    }
    return queries;
}

std::size_t HConUCBPolicy::select(const ContextSlate& slate) {
    if (slate.size() == 0) throw UsageError("select_arm: empty slate");
    if (slate.dim() != static_cast<Eigen::Index>(dim())) throw ConfigError("select_arm: slate dimension mismatch");
    sync();
    refresh();
    const PsdFactor arm_factor(arm_gram_);
    const PsdFactor key_factor(keyterm_gram_);
    last_scores_ = conucb_arm_scores(arm_factor, key_factor, hidden_.concat(slate), slate.arms, theta_,
                                     params_.lambda, alpha(), alpha_tilde());
    const std::size_t l = hidden_.hidden_dim();
    if (l > 0) {
        const Vec theta_v = theta_.tail(static_cast<Eigen::Index>(l));
        for (auto& s : last_scores_) {
            const double extra = hidden_params_.alpha_v * store_->width(s.arm, theta_v);
            s.arm_width += extra;
            s.width += extra;
        }
    }
    Vec ucb(static_cast<Eigen::Index>(last_scores_.size()));
    for (std::size_t j = 0; j < last_scores_.size(); ++j) ucb(static_cast<Eigen::Index>(j)) = last_scores_[j].ucb();
    return argmax_first(ucb);
}

void HConUCBPolicy::feature_terms(ArmId a, PsdMatrix& gram, Vec& rhs) const {
    const double lambda = params_.lambda;
    const auto d = static_cast<Eigen::Index>(hidden_.obs_dim());
    const auto ll = static_cast<Eigen::Index>(hidden_.hidden_dim());
    const Vec theta_x = theta_.head(d);
    const Vec theta_v = theta_.tail(ll);
    const Vec tilde_x = theta_tilde_.head(d);
    const Vec tilde_v = theta_tilde_.tail(ll);
    const Vec v_old = hidden_.feature(a);

    const double n = static_cast<double>(hidden_.count(a));
    if (n > 0.0) {
        gram.rank_one_update(theta_v, lambda * n);
        rhs.noalias() += lambda * theta_v * (hidden_.reward_sum(a) - hidden_.context_sum(a).dot(theta_x));
    }
    for (const auto& conv : conversations_) {
        const double w = graph_->weight(a, conv.keyterm);
        if (!(w > 0.0)) continue;
        const auto k = static_cast<Eigen::Index>(conv.keyterm);
        const double c = w / graph_->column_sum(conv.keyterm);
        const double rest = conv.feedback - obs_pseudo_->col(k).dot(tilde_x) -
                            (hidden_pseudo_.col(k) - c * v_old).dot(tilde_v);
        gram.rank_one_update(tilde_v, c * c);
        rhs.noalias() += (c * rest) * tilde_v;
    }
}

void HConUCBPolicy::observe(const ContextSlate& slate, std::size_t position, double reward) {
    sync();
    const ArmId a = slate.arms[position];
    const Vec x = slate.contexts.col(static_cast<Eigen::Index>(position));
    const double lambda = params_.lambda;
    arm_gram_.rank_one_update(hidden_.concat(x, a), lambda);
    arm_moment_.noalias() += (lambda * reward) * hidden_.concat(x, a);
    ++arm_observations_;
    hidden_.record(a, x, reward);
    store_->observed(a, this);
    refresh();  // key-term step, then the anchored arm step
    if (hidden_.hidden_dim() == 0) return;
    store_->update(a);  // v-step
    sync();
}

// ---------------------------------------------------------------- batch form

double hidden_objective(const std::vector<HiddenObservation>& batch, const Vec& theta, const Mat& features,
                        double ridge, double feature_ridge) {
    const Eigen::Index l = features.rows();
    const Eigen::Index d = theta.size() - l;
    double total = ridge * theta.squaredNorm() + feature_ridge * features.squaredNorm();
    for (const auto& o : batch) {
        const double pred = o.context.dot(theta.head(d)) + features.col(static_cast<Eigen::Index>(o.arm)).dot(theta.tail(l));
        total += (o.reward - pred) * (o.reward - pred);
    }
    return total;
}

Vec hidden_theta_step(const std::vector<HiddenObservation>& batch, const Mat& features, double ridge) {
    if (batch.empty()) throw UsageError("hidden_theta_step: empty batch");
    const Eigen::Index d = batch.front().context.size();
    const Eigen::Index l = features.rows();
    PsdMatrix gram = PsdMatrix::scaled_identity(d + l, ridge);
    Vec moment = Vec::Zero(d + l);
    Vec z(d + l);
    for (const auto& o : batch) {
        z << o.context, features.col(static_cast<Eigen::Index>(o.arm));
        gram.rank_one_update(z, 1.0);
        moment.noalias() += o.reward * z;
    }
    return solve_psd(gram, moment);
}

Mat hidden_feature_step(const std::vector<HiddenObservation>& batch, const Vec& theta, std::size_t num_arms,
                        double feature_ridge) {
    if (batch.empty()) throw UsageError("hidden_feature_step: empty batch");
    const Eigen::Index d = batch.front().context.size();
    const Eigen::Index l = theta.size() - d;
    const Vec theta_x = theta.head(d);
    const Vec theta_v = theta.tail(l);
    std::vector<double> counts(num_arms, 0.0);
    std::vector<double> residual_sums(num_arms, 0.0);
    for (const auto& o : batch) {
        counts.at(o.arm) += 1.0;
        residual_sums[o.arm] += o.reward - o.context.dot(theta_x);
    }
    Mat out = Mat::Zero(l, static_cast<Eigen::Index>(num_arms));
    if (l == 0) return out;
    for (std::size_t a = 0; a < num_arms; ++a) {
        if (counts[a] == 0.0) continue;
        PsdMatrix g = PsdMatrix::scaled_identity(l, feature_ridge);
        g.rank_one_update(theta_v, counts[a]);
        out.col(static_cast<Eigen::Index>(a)) = solve_psd(g, theta_v * residual_sums[a]);
    }
    return out;
}

}  // namespace conucb
