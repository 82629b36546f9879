#include "conucb/episode.hpp"

#include <algorithm>
#include <limits>
#include <random>

#include "conucb/errors.hpp"

namespace conucb {
namespace {

class WorldOracle final : public FeedbackOracle {
public:
    WorldOracle(const SyntheticWorld& world, std::size_t user, bool binary)
        : world_(world), user_(user), binary_(binary) {}

    void set_round(double arm_noise, double keyterm_noise, double arm_uniform, double keyterm_uniform) {
        arm_noise_ = arm_noise;
        keyterm_noise_ = keyterm_noise;
        arm_uniform_ = arm_uniform;
        keyterm_uniform_ = keyterm_uniform;
    }

    double arm_feedback(ArmId arm) override {
        if (binary_) return binary_feedback(world_.expected_arm_reward(user_, arm), arm_uniform_);
        return arm_reward(world_, user_, arm, arm_noise_);
    }

    double keyterm_feedback(KeyTermId k) override {
        if (k >= world_.num_keyterms()) throw UsageError("keyterm_feedback: unknown key-term");
        if (binary_) return binary_feedback(world_.expected_keyterm_reward(user_, k), keyterm_uniform_);
        return keyterm_reward(world_, user_, k, keyterm_noise_);
    }

private:
    const SyntheticWorld& world_;
    std::size_t user_;
    bool binary_;
    double arm_noise_ = 0.0;
    double keyterm_noise_ = 0.0;
    double arm_uniform_ = 0.0;
    double keyterm_uniform_ = 0.0;
};

}  // namespace

struct Episode::State {
    State(Policy& p, const SyntheticWorld& w, std::size_t u, EpisodeOptions o)
        : policy(p),
          world(w),
          user(u),
          options(std::move(o)),
          rng(options.seed),
          noise(0.0, w.params.sigma_g),
          oracle(w, u, options.binary),
          theta_star(w.preference(u)) {
        trace.rounds.reserve(options.horizon);
        trace.cumulative_regret.reserve(options.horizon);
    }

    Policy& policy;
    const SyntheticWorld& world;
    std::size_t user;
    EpisodeOptions options;
    Rng rng;
    std::normal_distribution<double> noise;
    std::uniform_real_distribution<double> uniform{0.0, 1.0};
    WorldOracle oracle;
    Vec theta_star;
    EpisodeTrace trace;
    std::size_t t = 0;
    double total = 0.0;
};

Episode::Episode(Policy& policy, const SyntheticWorld& world, std::size_t user, EpisodeOptions options) {
    if (user >= world.num_users()) throw ConfigError("run_episode: user out of range");
    if (policy.dim() != world.params.observable_dim()) throw ConfigError("run_episode: policy dimension mismatch");
    if (options.error_every == 0) throw ConfigError("run_episode: error_every must be positive");
    state_ = std::make_unique<State>(policy, world, user, std::move(options));
}

Episode::Episode(Episode&&) noexcept = default;
Episode& Episode::operator=(Episode&&) noexcept = default;
Episode::~Episode() = default;

bool Episode::done() const { return state_->t >= state_->options.horizon; }

const EpisodeTrace& Episode::trace() const { return state_->trace; }

void Episode::step() {
    State& s = *state_;
    if (done()) throw UsageError("episode: already finished");
    const std::size_t t = ++s.t;
    const ContextSlate slate = sample_slate(s.world, s.options.slate_size, s.rng, t);
    const double eps = s.noise(s.rng);
    const double eps_tilde = s.noise(s.rng);
    const double u = s.uniform(s.rng);
    const double u_tilde = s.uniform(s.rng);
    s.oracle.set_round(eps, eps_tilde, u, u_tilde);

    const std::size_t budget = conversation_budget(s.options.schedule, t);
    const std::vector<Query> queries =
        budget > 0 ? s.policy.converse(slate, budget, s.oracle) : std::vector<Query>{};

    const std::size_t pos = s.policy.select(slate);
    if (pos >= slate.size()) throw UsageError("run_episode: policy chose a position outside the slate");
    if (s.options.diagnostics) s.options.diagnostics(RoundDiagnostics{t, pos, slate, s.policy, queries});

    const ArmId chosen = slate.arms[pos];
    const double reward = s.oracle.arm_feedback(chosen);
    s.policy.observe(slate, pos, reward);

    double best = -std::numeric_limits<double>::infinity();
    for (ArmId a : slate.arms) best = std::max(best, s.world.expected_arm_reward(s.user, a));
    const double regret = std::max(0.0, best - s.world.expected_arm_reward(s.user, chosen));
    s.total += regret;

    RoundRecord rec;
    rec.round = t;
    if (s.options.record_slates) rec.slate = slate.arms;
    rec.chosen = chosen;
    rec.reward = reward;
    rec.regret = regret;
    rec.conversations = queries.size();
    s.trace.rounds.push_back(std::move(rec));
    s.trace.cumulative_regret.push_back(s.total);

    if (t % s.options.error_every == 0) {
        const Vec est = s.policy.estimate();
        const Eigen::Index n = std::min<Eigen::Index>(est.size(), s.theta_star.size());
        s.trace.error_rounds.push_back(t);
        s.trace.parameter_error.push_back((est.head(n) - s.theta_star.head(n)).norm());
    }
}

EpisodeTrace run_episode(Policy& policy, const SyntheticWorld& world, std::size_t user, const EpisodeOptions& options) {
    Episode e(policy, world, user, options);
    while (!e.done()) e.step();
    return e.trace();
}

void run_interleaved(std::vector<Episode>& episodes) {
    bool pending = true;
    while (pending) {
        pending = false;
        for (auto& e : episodes) {
            if (e.done()) continue;
            e.step();
            pending = pending || !e.done();
        }
    }
}

}  // namespace conucb
