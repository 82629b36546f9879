#include "conucb/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "conucb/baselines.hpp"
#include "conucb/conucb.hpp"
#include "conucb/errors.hpp"

namespace conucb {

using nlohmann::json;

namespace {

const std::vector<std::pair<PolicyKind, const char*>> kKindNames = {
    {PolicyKind::LinUCB, "linucb"},   {PolicyKind::ArmCon, "armcon"},   {PolicyKind::ConUCB, "conucb"},
    {PolicyKind::VarRS, "varrs"},     {PolicyKind::VarMRC, "varmrc"},   {PolicyKind::VarLCR, "varlcr"},
    {PolicyKind::HLinUCB, "hlinucb"}, {PolicyKind::HConUCB, "hconucb"}, {PolicyKind::Oracle, "oracle"},
    {PolicyKind::Random, "random"},   {PolicyKind::Logged, "logged"},
};

bool is_conversational(PolicyKind k) {
    return k == PolicyKind::ConUCB || k == PolicyKind::VarRS || k == PolicyKind::VarMRC ||
           k == PolicyKind::VarLCR || k == PolicyKind::HConUCB;
}

PolicySpec spec(std::string name, PolicyKind kind) {
    PolicySpec s;
    s.name = std::move(name);
    s.kind = kind;
    return s;
}

}  // namespace

std::string to_string(PolicyKind kind) {
    for (const auto& [k, n] : kKindNames)
        if (k == kind) return n;
    return "conucb";
}

PolicyKind parse_policy_kind(const std::string& text) {
    std::string lower = text;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    lower.erase(std::remove(lower.begin(), lower.end(), '-'), lower.end());
    for (const auto& [k, n] : kKindNames)
        if (lower == n) return k;
    throw ConfigError("unknown policy kind '" + text + "'");
}

// Exploration constants were tuned on the desk world (d=20, N=1000, K=100),
// separately for each method.
std::vector<PolicySpec> default_policies() {
    LinUCBParams lin;
    lin.ridge = 1.0;
    lin.alpha = 0.25;
    ConUCBParams con;
    con.lambda = 0.7;
    con.lambda_tilde = 0.5;
    con.exploration.alpha = 0.25;
    con.exploration.alpha_tilde = 0.25;

    std::vector<PolicySpec> out;
    auto add = [&](const char* name, PolicyKind kind) {
        PolicySpec s = spec(name, kind);
        s.linucb = lin;
        s.conucb = con;
        out.push_back(s);
    };
    add("LinUCB", PolicyKind::LinUCB);
    add("Arm-Con", PolicyKind::ArmCon);
    add("Var-RS", PolicyKind::VarRS);
    add("Var-MRC", PolicyKind::VarMRC);
    add("Var-LCR", PolicyKind::VarLCR);
    add("ConUCB", PolicyKind::ConUCB);
    return out;
}

ExperimentConfig desk_config() {
    ExperimentConfig c;
    c.world.dim = 20;
    c.world.num_arms = 1000;
    c.world.num_keyterms = 100;
    c.world.num_users = 20;
    c.world.max_keyterms_per_arm = 5;
    c.world.sigma_g = 0.1;
    c.policies = default_policies();
    c.schedule = ConversationSchedule::log(5);
    c.horizon = 2000;
    c.slate_size = 50;
    for (std::uint64_t s = 1; s <= 10; ++s) c.seeds.push_back(s);
    return c;
}

ExperimentConfig full_config() {
    ExperimentConfig c = desk_config();
    c.world.dim = 50;
    c.world.num_arms = 5000;
    c.world.num_keyterms = 500;
    c.world.num_users = 200;
    c.horizon = 1000;
    return c;
}

ExperimentConfig hidden_config() {
    ExperimentConfig c = desk_config();
    c.world.hidden_dim = 5;
    HiddenParams hidden;
    hidden.hidden_dim = 5;
    std::vector<PolicySpec> ps;
    for (const auto& p : default_policies()) {
        if (p.kind == PolicyKind::LinUCB) ps.push_back(p);
    }
    PolicySpec h = ps.front();
    h.name = "hLinUCB";
    h.kind = PolicyKind::HLinUCB;
    h.hidden = hidden;
    ps.push_back(h);
    PolicySpec hc = default_policies().back();
    hc.name = "hConUCB";
    hc.kind = PolicyKind::HConUCB;
    hc.hidden = hidden;
    ps.push_back(hc);
    c.policies = ps;
    return c;
}

void validate(const ExperimentConfig& c) {
    validate(c.world);
    if (c.horizon == 0) throw ConfigError("config: horizon must be at least 1");
    if (c.seeds.empty()) throw ConfigError("config: seeds must not be empty");
    if (std::set<std::uint64_t>(c.seeds.begin(), c.seeds.end()).size() != c.seeds.size())
        throw ConfigError("config: seeds must be distinct");
    if (c.policies.empty()) throw ConfigError("config: at least one policy is required");
    if (c.slate_size == 0 || c.slate_size > c.world.num_arms)
        throw ConfigError("config: slate_size must lie in [1, num_arms]");
    if (c.error_every == 0) throw ConfigError("config: error_every must be positive");
    if (c.pool_size == 0) throw ConfigError("config: pool_size must be positive");
    if (!(c.truth_ridge > 0.0)) throw ConfigError("config: truth_ridge must be positive");
    std::set<std::string> names;
    for (const auto& p : c.policies) {
        if (p.name.empty()) throw ConfigError("config: policy without a name");
        if (!names.insert(p.name).second) throw ConfigError("config: duplicate policy name '" + p.name + "'");
        try {
            validate(p.conucb);
            if (!(p.linucb.ridge > 0.0)) throw ConfigError("ridge must be positive");
            if (!(p.linucb.sigma > 0.0 && p.linucb.sigma < 1.0)) throw ConfigError("sigma must lie in (0, 1)");
            if (p.linucb.alpha && !(*p.linucb.alpha >= 0.0)) throw ConfigError("alpha must be nonnegative");
            if (p.kind == PolicyKind::HLinUCB || p.kind == PolicyKind::HConUCB) {
                if (p.hidden.hidden_dim > 0 && !(p.hidden.feature_ridge > 0.0))
                    throw ConfigError("feature_ridge must be positive");
                if (!(p.hidden.alpha_v >= 0.0)) throw ConfigError("alpha_v must be nonnegative");
            }
        } catch (const ConfigError& e) {
            throw ConfigError("config: policy '" + p.name + "': " + e.what());
        }
    }
    if (c.bound) {
        const auto it = std::find_if(c.policies.begin(), c.policies.end(),
                                     [](const PolicySpec& p) { return p.kind == PolicyKind::ConUCB; });
        if (it == c.policies.end()) throw ConfigError("config: bound reporting needs a conucb policy");
    }
}

// ------------------------------------------------------------------ JSON

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j, const char* key, const std::optional<double>& fallback) {
    if (!j.contains(key)) return fallback;
    if (j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

json policy_json(const PolicySpec& p) {
    return json{
        {"name", p.name},
        {"kind", to_string(p.kind)},
        {"lambda", p.conucb.lambda},
        {"lambda_tilde", p.conucb.lambda_tilde},
        {"sigma", p.conucb.sigma},
        {"alpha", optional_json(is_conversational(p.kind) ? p.conucb.exploration.alpha : p.linucb.alpha)},
        {"alpha_tilde", optional_json(p.conucb.exploration.alpha_tilde)},
        {"theta_tilde_norm", p.conucb.exploration.theta_tilde_norm},
        {"ridge", p.linucb.ridge},
        {"hidden_dim", p.hidden.hidden_dim},
        {"feature_ridge", p.hidden.feature_ridge},
        {"alpha_v", p.hidden.alpha_v},
    };
}

PolicySpec policy_from(const json& j) {
    PolicySpec p;
    if (!j.contains("kind")) throw ConfigError("config: policy entry without 'kind'");
    p.kind = parse_policy_kind(j.at("kind").get<std::string>());
    p.name = j.value("name", to_string(p.kind));
    // Start from the tuned defaults of the same kind where one exists.
    for (const auto& d : default_policies()) {
        if (d.kind == p.kind) {
            p.conucb = d.conucb;
            p.linucb = d.linucb;
        }
    }
    if (p.kind == PolicyKind::HLinUCB) p.linucb = default_policies().front().linucb;
    if (p.kind == PolicyKind::HConUCB) p.conucb = default_policies().back().conucb;
    p.conucb.lambda = j.value("lambda", p.conucb.lambda);
    p.conucb.lambda_tilde = j.value("lambda_tilde", p.conucb.lambda_tilde);
    p.conucb.sigma = j.value("sigma", p.conucb.sigma);
    p.linucb.sigma = p.conucb.sigma;
    const auto alpha = optional_from(j, "alpha", is_conversational(p.kind) ? p.conucb.exploration.alpha : p.linucb.alpha);
    p.conucb.exploration.alpha = alpha;
    p.linucb.alpha = alpha;
    p.conucb.exploration.alpha_tilde = optional_from(j, "alpha_tilde", p.conucb.exploration.alpha_tilde);
    p.conucb.exploration.theta_tilde_norm = j.value("theta_tilde_norm", p.conucb.exploration.theta_tilde_norm);
    p.linucb.ridge = j.value("ridge", p.linucb.ridge);
    p.hidden.hidden_dim = j.value("hidden_dim", p.hidden.hidden_dim);
    p.hidden.feature_ridge = j.value("feature_ridge", p.hidden.feature_ridge);
    p.hidden.alpha_v = j.value("alpha_v", p.hidden.alpha_v);
    return p;
}

json config_json(const ExperimentConfig& c) {
    json policies = json::array();
    for (const auto& p : c.policies) policies.push_back(policy_json(p));
    auto path_or_null = [](const std::optional<std::filesystem::path>& p) { return p ? json(p->string()) : json(nullptr); };
    return json{
        {"world",
         {{"dim", c.world.dim},
          {"num_arms", c.world.num_arms},
          {"num_keyterms", c.world.num_keyterms},
          {"num_users", c.world.num_users},
          {"max_keyterms_per_arm", c.world.max_keyterms_per_arm},
          {"sigma_g", c.world.sigma_g},
          {"hidden_dim", c.world.hidden_dim}}},
        {"world_seed", c.world_seed ? json(*c.world_seed) : json(nullptr)},
        {"policies", policies},
        {"schedule", c.schedule.label()},
        {"horizon", c.horizon},
        {"slate_size", c.slate_size},
        {"seeds", c.seeds},
        {"error_every", c.error_every},
        {"binary", c.binary},
        {"bound", c.bound},
        {"verbose", c.verbose},
        {"output", c.output.string()},
        {"events", path_or_null(c.events_path)},
        {"features", path_or_null(c.features_path)},
        {"tags", path_or_null(c.tags_path)},
        {"pool_size", c.pool_size},
        {"truth_ridge", c.truth_ridge},
    };
}

ExperimentConfig config_from(const json& j) {
    ExperimentConfig c = desk_config();
    if (j.contains("world")) {
        const json& w = j.at("world");
        c.world.dim = w.value("dim", c.world.dim);
        c.world.num_arms = w.value("num_arms", c.world.num_arms);
        c.world.num_keyterms = w.value("num_keyterms", c.world.num_keyterms);
        c.world.num_users = w.value("num_users", c.world.num_users);
        c.world.max_keyterms_per_arm = w.value("max_keyterms_per_arm", c.world.max_keyterms_per_arm);
        c.world.sigma_g = w.value("sigma_g", c.world.sigma_g);
        c.world.hidden_dim = w.value("hidden_dim", c.world.hidden_dim);
    }
    if (j.contains("world_seed") && !j.at("world_seed").is_null()) c.world_seed = j.at("world_seed").get<std::uint64_t>();
    if (j.contains("policies")) {
        c.policies.clear();
        for (const auto& p : j.at("policies")) c.policies.push_back(policy_from(p));
    }
    if (j.contains("schedule")) c.schedule = parse_schedule(j.at("schedule").get<std::string>());
    c.horizon = j.value("horizon", c.horizon);
    c.slate_size = j.value("slate_size", c.slate_size);
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    c.error_every = j.value("error_every", c.error_every);
    c.binary = j.value("binary", c.binary);
    c.bound = j.value("bound", c.bound);
    c.threads = j.value("threads", c.threads);
    c.verbose = j.value("verbose", c.verbose);
    if (j.contains("output")) c.output = j.at("output").get<std::string>();
    auto path = [&](const char* key, std::optional<std::filesystem::path>& dst) {
        if (j.contains(key) && !j.at(key).is_null()) dst = j.at(key).get<std::string>();
    };
    path("events", c.events_path);
    path("features", c.features_path);
    path("tags", c.tags_path);
    c.pool_size = j.value("pool_size", c.pool_size);
    c.truth_ridge = j.value("truth_ridge", c.truth_ridge);
    return c;
}

}  // namespace

std::string config_to_json(const ExperimentConfig& config) { return config_json(config).dump(2); }

ExperimentConfig config_from_json(const std::string& text) {
    try {
        return config_from(json::parse(text));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return config_from_json(buf.str());
}

// ------------------------------------------------------------------ policies

WorldHandles make_handles(const SyntheticWorld& world) {
    WorldHandles h;
    h.dim = world.params.observable_dim();
    h.num_arms = world.num_arms();
    h.graph = world.graph;
    h.pseudo_contexts = std::make_shared<const Mat>(world.observable_keyterm_contexts());
    h.preferences = std::make_shared<const Mat>(world.user_preferences);
    return h;
}

WorldHandles make_handles(const LoggedDataset& data, const std::vector<Vec>* theta_star) {
    WorldHandles h;
    h.dim = data.dim();
    h.num_arms = data.num_arms();
    h.graph = data.graph;
    if (data.graph) h.pseudo_contexts = std::make_shared<const Mat>(key_term_contexts(*data.graph, data.arm_features));
    if (theta_star && !theta_star->empty()) {
        Mat prefs(static_cast<Eigen::Index>(data.dim()), static_cast<Eigen::Index>(theta_star->size()));
        for (std::size_t u = 0; u < theta_star->size(); ++u) prefs.col(static_cast<Eigen::Index>(u)) = (*theta_star)[u];
        h.preferences = std::make_shared<const Mat>(std::move(prefs));
    }
    return h;
}

bool uses_hidden_features(PolicyKind kind) { return kind == PolicyKind::HLinUCB || kind == PolicyKind::HConUCB; }

std::shared_ptr<HiddenFeatureStore> make_feature_store(const PolicySpec& spec, const WorldHandles& h,
                                                       std::uint64_t seed) {
    if (!uses_hidden_features(spec.kind)) return nullptr;
    Rng rng(seed);
    return std::make_shared<HiddenFeatureStore>(h.num_arms, spec.hidden, rng);
}

PolicyPtr make_policy(const PolicySpec& spec, const WorldHandles& h, std::size_t user, std::uint64_t seed,
                      std::shared_ptr<HiddenFeatureStore> store) {
    auto need_graph = [&] {
        if (!h.graph || !h.pseudo_contexts) throw ConfigError("policy '" + spec.name + "' needs key-term relations");
    };
    auto conucb = [&](KeytermRule rule) -> PolicyPtr {
        need_graph();
        return std::make_unique<ConUCBPolicy>(spec.name, h.dim, spec.conucb, rule, h.graph, h.pseudo_contexts, seed);
    };
    switch (spec.kind) {
        case PolicyKind::LinUCB:
            return std::make_unique<LinUCBPolicy>(spec.name, h.dim, spec.linucb);
        case PolicyKind::ArmCon:
            return std::make_unique<ArmConPolicy>(spec.name, h.dim, spec.linucb);
        case PolicyKind::ConUCB:
            return conucb(KeytermRule::Optimal);
        case PolicyKind::VarRS:
            return conucb(KeytermRule::Random);
        case PolicyKind::VarMRC:
            return conucb(KeytermRule::MaxRelatedConfidence);
        case PolicyKind::VarLCR:
            return conucb(KeytermRule::LargestConfidenceReduction);
        case PolicyKind::HLinUCB:
            return std::make_unique<HLinUCBPolicy>(spec.name, h.dim, h.num_arms, spec.linucb, spec.hidden, seed,
                                                   std::move(store));
        case PolicyKind::HConUCB:
            need_graph();
            return std::make_unique<HConUCBPolicy>(spec.name, h.dim, h.num_arms, spec.conucb, spec.hidden, h.graph,
                                                   h.pseudo_contexts, seed, std::move(store));
        case PolicyKind::Oracle: {
            if (!h.preferences || user >= static_cast<std::size_t>(h.preferences->cols()))
                throw ConfigError("oracle policy needs ground-truth preferences");
            const Vec theta = h.preferences->col(static_cast<Eigen::Index>(user)).head(static_cast<Eigen::Index>(h.dim));
            return std::make_unique<FixedLinearPolicy>(spec.name, theta);
        }
        case PolicyKind::Random:
            return std::make_unique<UniformRandomPolicy>(spec.name, h.dim, seed);
        case PolicyKind::Logged:
            return std::make_unique<LoggedArmPolicy>(h.dim);
    }
    throw ConfigError("unknown policy kind");
}

// ------------------------------------------------------------------ aggregation

void SeriesSums::add(const std::vector<double>& values) {
    if (n == 0 && sum.empty()) {
        sum.assign(values.size(), 0.0);
        sumsq.assign(values.size(), 0.0);
    }
    if (values.size() != sum.size()) throw UsageError("SeriesSums: length mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) {
        sum[i] += values[i];
        sumsq[i] += values[i] * values[i];
    }
    ++n;
}

SeriesSums& SeriesSums::operator+=(const SeriesSums& other) {
    if (other.n == 0) return *this;
    if (n == 0 && sum.empty()) {
        *this = other;
        return *this;
    }
    if (other.sum.size() != sum.size()) throw UsageError("SeriesSums: length mismatch");
    for (std::size_t i = 0; i < sum.size(); ++i) {
        sum[i] += other.sum[i];
        sumsq[i] += other.sumsq[i];
    }
    n += other.n;
    return *this;
}

SeriesSummary summarize(const SeriesSums& s, std::vector<std::size_t> rounds) {
    SeriesSummary out;
    out.rounds = std::move(rounds);
    out.n = s.n;
    out.mean.resize(s.sum.size());
    out.stddev.resize(s.sum.size());
    const double n = static_cast<double>(s.n);
    for (std::size_t i = 0; i < s.sum.size(); ++i) {
        const double m = s.n ? s.sum[i] / n : 0.0;
        out.mean[i] = m;
        if (s.n > 1) {
            const double var = std::max(0.0, (s.sumsq[i] - n * m * m) / (n - 1.0));
            out.stddev[i] = std::sqrt(var);
        } else {
            out.stddev[i] = 0.0;
        }
    }
    return out;
}

const PolicyReport& AggregateReport::policy(const std::string& name) const {
    for (const auto& p : policies)
        if (p.name == name) return p;
    throw UsageError("report: no policy named '" + name + "'");
}

namespace {

std::vector<std::size_t> all_rounds(std::size_t horizon) {
    std::vector<std::size_t> r(horizon);
    for (std::size_t t = 0; t < horizon; ++t) r[t] = t + 1;
    return r;
}

std::vector<std::size_t> error_rounds(std::size_t horizon, std::size_t every) {
    std::vector<std::size_t> r;
    for (std::size_t t = every; t <= horizon; t += every) r.push_back(t);
    return r;
}

const PolicySpec* bound_spec(const ExperimentConfig& c) {
    for (const auto& p : c.policies)
        if (p.kind == PolicyKind::ConUCB) return &p;
    return nullptr;
}

SeriesSums bound_sums(const ExperimentConfig& c, const SyntheticWorld& world) {
    SeriesSums sums;
    const PolicySpec* p = bound_spec(c);
    if (!p || !regret_bound_applicable(p->conucb.lambda, p->conucb.lambda_tilde)) return sums;
    std::vector<double> series(c.horizon);
    for (std::size_t u = 0; u < world.num_users(); ++u) {
        const double norm = world.preference(u).head(static_cast<Eigen::Index>(world.params.observable_dim())).norm();
        for (std::size_t t = 1; t <= c.horizon; ++t)
            series[t - 1] = regret_bound(world.params.observable_dim(), p->conucb.lambda, p->conucb.sigma, t, norm,
                                           c.schedule.cumulative(t));
        sums.add(series);
    }
    return sums;
}

std::string diagnostics_line(const std::string& policy, const RoundDiagnostics& d) {
    json scores = json::array();
    for (const auto& s : d.policy.last_scores())
        scores.push_back({{"arm", s.arm},
                          {"estimate", s.estimate},
                          {"width", s.width},
                          {"arm_width", s.arm_width},
                          {"keyterm_width", s.keyterm_width}});
    json queries = json::array();
    for (const auto& q : d.queries)
        queries.push_back({{"kind", q.kind == Query::Kind::KeyTerm ? "keyterm" : "arm"}, {"id", q.id}, {"feedback", q.feedback}});
    return json{{"policy", policy},
                {"round", d.round},
                {"position", d.position},
                {"arm", d.slate.arms[d.position]},
                {"queries", queries},
                {"scores", scores}}
        .dump();
}

SeedStats run_seed(const ExperimentConfig& c, std::uint64_t seed, std::vector<std::string>* diagnostics) {
    const SyntheticWorld world = generate_world(c.world, c.world_seed.value_or(seed));
    const WorldHandles handles = make_handles(world);
    SeedStats out;
    out.seed = seed;
    out.policies.resize(c.policies.size());
    const std::size_t users = world.num_users();
    for (std::size_t p = 0; p < c.policies.size(); ++p) {
        const PolicySpec& spec = c.policies[p];
        const auto store = make_feature_store(spec, handles, derive_seed({seed, kPolicyStream, p}));
        std::vector<PolicyPtr> policies;
        std::vector<Episode> episodes;
        policies.reserve(users);
        episodes.reserve(users);
        for (std::size_t u = 0; u < users; ++u) {
            EpisodeOptions opts;
            opts.horizon = c.horizon;
            opts.slate_size = c.slate_size;
            opts.schedule = c.schedule;
            opts.seed = derive_seed({seed, u, kEnvironmentStream});
            opts.binary = c.binary;
            opts.error_every = c.error_every;
            if (diagnostics && u == 0) {
                opts.diagnostics = [&, name = spec.name](const RoundDiagnostics& d) {
                    diagnostics->push_back(diagnostics_line(name, d));
                };
            }
            policies.push_back(make_policy(spec, handles, u, derive_seed({seed, u, kPolicyStream, p}), store));
            episodes.emplace_back(*policies.back(), world, u, std::move(opts));
        }
        run_interleaved(episodes);
        PolicySeedStats& st = out.policies[p];
        for (const auto& e : episodes) {
            st.regret.add(e.trace().cumulative_regret);
            st.error.add(e.trace().parameter_error);
            st.final_regret.push_back(e.trace().final_regret());
        }
    }
    if (c.bound) out.bound = bound_sums(c, world);
    return out;
}

}  // namespace

AggregateReport aggregate(const ExperimentConfig& c, std::vector<SeedStats> seeds) {
    std::sort(seeds.begin(), seeds.end(), [](const SeedStats& a, const SeedStats& b) { return a.seed < b.seed; });
    AggregateReport r;
    r.schedule = c.schedule.label();
    r.horizon = c.horizon;
    for (std::size_t p = 0; p < c.policies.size(); ++p) {
        SeriesSums regret, error;
        PolicyReport pr;
        pr.name = c.policies[p].name;
        for (const auto& s : seeds) {
            if (p >= s.policies.size()) throw UsageError("aggregate: seed statistics do not match the config");
            regret += s.policies[p].regret;
            error += s.policies[p].error;
            const auto& f = s.policies[p].final_regret;
            double sum = 0.0;
            for (double v : f) sum += v;
            pr.seed_final_regret[s.seed] = f.empty() ? 0.0 : sum / static_cast<double>(f.size());
        }
        pr.regret = summarize(regret, all_rounds(c.horizon));
        pr.error = summarize(error, error_rounds(c.horizon, c.error_every));
        r.policies.push_back(std::move(pr));
    }
    if (c.bound) {
        SeriesSums b;
        for (const auto& s : seeds) b += s.bound;
        if (b.n > 0) r.bound = summarize(b, all_rounds(c.horizon));
    }
    r.seeds = std::move(seeds);
    return r;
}

AggregateReport run_benchmark(const ExperimentConfig& config) {
    validate(config);
    std::vector<std::uint64_t> seeds = config.seeds;
    std::sort(seeds.begin(), seeds.end());
    std::vector<SeedStats> slots(seeds.size());
    std::vector<std::string> diagnostics;

    std::size_t workers = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, seeds.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (std::size_t i = next++; i < seeds.size(); i = next++) {
            try {
                slots[i] = run_seed(config, seeds[i], config.verbose && i == 0 ? &diagnostics : nullptr);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    AggregateReport report = aggregate(config, std::move(slots));
    report.diagnostics = std::move(diagnostics);
    return report;
}

// ------------------------------------------------------------------ bound

double regret_bound_min_lambda_tilde(double lambda) {
    const double g = 1.0 - std::sqrt(lambda);
    return 2.0 * (1.0 - lambda) / (lambda * g * g);
}

bool regret_bound_applicable(double lambda, double lambda_tilde) {
    // Small slack so the boundary value itself qualifies.
    return lambda > 0.0 && lambda <= 0.5 && lambda_tilde >= regret_bound_min_lambda_tilde(lambda) * (1.0 - 1e-12);
}

double regret_bound(std::size_t dim, double lambda, double sigma, std::size_t horizon, double theta_norm,
                      std::size_t conversations) {
    if (horizon == 0) return 0.0;
    const double d = static_cast<double>(dim);
    const double t = static_cast<double>(horizon);
    const double growth = lambda * t / ((1.0 - lambda) * d);
    const double b = static_cast<double>(std::max<std::size_t>(conversations, 1));
    const double arm = std::sqrt(lambda) * std::sqrt(d * std::log((1.0 + growth) / sigma));
    const double bias = 2.0 * std::sqrt((1.0 - lambda) / lambda) * theta_norm;
    const double key = (1.0 - std::sqrt(lambda)) * std::sqrt(d * std::log(6.0) + std::log(2.0 * b / sigma));
    return 2.0 * (arm + bias + key) * std::sqrt(t * d * std::log(1.0 + growth));
}

std::optional<SeriesSummary> regret_bound_series(const ExperimentConfig& config) {
    const PolicySpec* p = bound_spec(config);
    if (!p || !regret_bound_applicable(p->conucb.lambda, p->conucb.lambda_tilde)) return std::nullopt;
    ExperimentConfig c = config;
    c.bound = true;
    std::vector<std::uint64_t> seeds = c.seeds;
    std::sort(seeds.begin(), seeds.end());
    SeriesSums total;
    for (std::uint64_t s : seeds) total += bound_sums(c, generate_world(c.world, c.world_seed.value_or(s)));
    return summarize(total, all_rounds(c.horizon));
}

// ------------------------------------------------------------------ sweep

std::vector<SweepRow> sweep_schedules(const ExperimentConfig& config,
                                      const std::vector<ConversationSchedule>& schedules) {
    std::vector<SweepRow> rows;
    for (const auto& s : schedules) {
        ExperimentConfig c = config;
        c.schedule = s;
        c.verbose = false;
        c.bound = false;
        const AggregateReport r = run_benchmark(c);
        for (const auto& p : r.policies)
            rows.push_back({s.label(), p.name, p.regret.mean.back(), p.regret.stddev.back(), p.regret.n});
    }
    return rows;
}

// ------------------------------------------------------------------ output

std::string format_number(double value) {
    if (value == 0.0) value = 0.0;  // no negative zero
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", value);
    return buf;
}

namespace {

std::string exact_number(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    return out;
}

void write_series(std::ostream& out, const std::string& name, const SeriesSummary& s) {
    for (std::size_t i = 0; i < s.mean.size(); ++i)
        out << s.rounds[i] << ',' << name << ',' << format_number(s.mean[i]) << ',' << format_number(s.stddev[i]) << ','
            << s.n << '\n';
}

}  // namespace

void write_manifest(const ExperimentConfig& config, const std::filesystem::path& path, const std::string& command) {
    json m{{"tool", "conucb"},
           {"version", CONUCB_VERSION},
           {"command", command},
           {"config", config_json(config)}};
    if (config.bound) {
        const PolicySpec* p = bound_spec(config);
        m["bound"] = p && regret_bound_applicable(p->conucb.lambda, p->conucb.lambda_tilde) ? "available" : "unavailable";
    }
    open_out(path) << m.dump(2) << '\n';
}

void write_report(const AggregateReport& report, const ExperimentConfig& config, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        auto out = open_out(dir / "regret.csv");
        out << "round,policy,mean,std,n\n";
        for (const auto& p : report.policies) write_series(out, p.name, p.regret);
    }
    {
        auto out = open_out(dir / "param_error.csv");
        out << "round,policy,mean,std,n\n";
        for (const auto& p : report.policies) write_series(out, p.name, p.error);
    }
    {
        auto out = open_out(dir / "summary.csv");
        out << "policy,final_regret_mean,final_regret_std,final_error_mean,n\n";
        for (const auto& p : report.policies) {
            out << p.name << ',' << format_number(p.regret.mean.empty() ? 0.0 : p.regret.mean.back()) << ','
                << format_number(p.regret.stddev.empty() ? 0.0 : p.regret.stddev.back()) << ','
                << (p.error.mean.empty() ? std::string("null") : format_number(p.error.mean.back())) << ','
                << p.regret.n << '\n';
        }
    }
    if (report.bound) {
        auto out = open_out(dir / "bound.csv");
        out << "round,policy,mean,std,n\n";
        write_series(out, "regret_bound", *report.bound);
    }
    {
        auto out = open_out(dir / "seed_stats.csv");
        out << "policy,seed,metric,round,n,sum,sumsq\n";
        const auto rounds = all_rounds(config.horizon);
        const auto erounds = error_rounds(config.horizon, config.error_every);
        auto dump = [&](const std::string& name, std::uint64_t seed, const char* metric, const SeriesSums& s,
                        const std::vector<std::size_t>& r) {
            for (std::size_t i = 0; i < s.sum.size(); ++i)
                out << name << ',' << seed << ',' << metric << ',' << r.at(i) << ',' << s.n << ','
                    << exact_number(s.sum[i]) << ',' << exact_number(s.sumsq[i]) << '\n';
        };
        for (const auto& s : report.seeds) {
            for (std::size_t p = 0; p < s.policies.size(); ++p) {
                const std::string& name = config.policies.at(p).name;
                dump(name, s.seed, "regret", s.policies[p].regret, rounds);
                dump(name, s.seed, "error", s.policies[p].error, erounds);
                const auto& f = s.policies[p].final_regret;
                for (std::size_t u = 0; u < f.size(); ++u)
                    out << name << ',' << s.seed << ",final," << u << ",1," << exact_number(f[u]) << ','
                        << exact_number(f[u] * f[u]) << '\n';
            }
            if (s.bound.n > 0) dump("regret_bound", s.seed, "bound", s.bound, rounds);
        }
    }
    if (!report.diagnostics.empty()) {
        auto out = open_out(dir / "diagnostics.jsonl");
        for (const auto& line : report.diagnostics) out << line << '\n';
    }
}

void write_sweep(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto out = open_out(path);
    out << "schedule,policy,final_regret_mean,final_regret_std,n\n";
    for (const auto& r : rows)
        out << r.schedule << ',' << r.policy << ',' << format_number(r.mean) << ',' << format_number(r.stddev) << ','
            << r.n << '\n';
}

AggregateReport reaggregate(const std::filesystem::path& dir, ExperimentConfig* config_out) {
    std::ifstream mf(dir / "manifest.json");
    if (!mf) throw LoadError("cannot open " + (dir / "manifest.json").string());
    json manifest;
    try {
        mf >> manifest;
    } catch (const json::exception& e) {
        throw LoadError("manifest.json: " + std::string(e.what()));
    }
    const ExperimentConfig config = config_from(manifest.at("config"));

    std::ifstream in(dir / "seed_stats.csv");
    if (!in) throw LoadError("cannot open " + (dir / "seed_stats.csv").string());
    std::map<std::string, std::size_t> index;
    for (std::size_t p = 0; p < config.policies.size(); ++p) index[config.policies[p].name] = p;
    std::map<std::uint64_t, SeedStats> seeds;
    std::string line;
    std::size_t no = 0;
    std::getline(in, line);
    ++no;
    while (std::getline(in, line)) {
        ++no;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) f.push_back(field);
        if (f.size() != 7) throw LoadError("seed_stats.csv:" + std::to_string(no) + ": expected 7 fields");
        try {
            const std::uint64_t seed = std::stoull(f[1]);
            SeedStats& s = seeds[seed];
            s.seed = seed;
            s.policies.resize(config.policies.size());
            const std::size_t n = std::stoull(f[4]);
            const double sum = std::stod(f[5]);
            const double sumsq = std::stod(f[6]);
            SeriesSums* target = nullptr;
            if (f[2] == "bound") {
                target = &s.bound;
            } else {
                const auto it = index.find(f[0]);
                if (it == index.end()) throw LoadError("unknown policy '" + f[0] + "'");
                PolicySeedStats& ps = s.policies[it->second];
                if (f[2] == "final") {
                    ps.final_regret.push_back(sum);
                    continue;
                }
                if (f[2] == "regret") target = &ps.regret;
                else if (f[2] == "error") target = &ps.error;
                else throw LoadError("unknown metric '" + f[2] + "'");
            }
            target->sum.push_back(sum);
            target->sumsq.push_back(sumsq);
            target->n = n;
        } catch (const std::logic_error& e) {
            throw LoadError("seed_stats.csv:" + std::to_string(no) + ": " + e.what());
        }
    }
    std::vector<SeedStats> list;
    for (auto& [seed, s] : seeds) list.push_back(std::move(s));
    if (config_out) *config_out = config;
    return aggregate(config, std::move(list));
}

// ------------------------------------------------------------------ replay

std::vector<ReplayReport> run_replay(const ExperimentConfig& config, std::uint64_t seed) {
    if (!config.events_path || !config.features_path)
        throw ConfigError("replay: events and features files are required");
    const LoggedDataset data = load_logged_dataset(*config.events_path, *config.features_path, config.tags_path);
    Rng rng(derive_seed({seed, kLogStream, 1}));
    const PooledDataset pooled = build_pools(data, config.pool_size, rng);
    std::optional<ReplayFeedback> fb;
    if (data.graph) fb = make_replay_feedback(data, config.truth_ridge, config.binary, derive_seed({seed, kLogStream, 2}));
    const WorldHandles handles = make_handles(data, fb ? &fb->theta_star : nullptr);

    std::vector<ReplayReport> out;
    for (std::size_t p = 0; p < config.policies.size(); ++p) {
        const PolicySpec& spec = config.policies[p];
        if (spec.kind == PolicyKind::Oracle) continue;
        const auto store = make_feature_store(spec, handles, derive_seed({seed, kPolicyStream, p}));
        const PolicyFactory factory = [&, p, store](std::size_t user) {
            return make_policy(spec, handles, user, derive_seed({seed, user, kPolicyStream, p}), store);
        };
        const bool talks = is_conversational(spec.kind);
        ReplayReport r = replay(factory, data, pooled, talks ? config.schedule : ConversationSchedule::none(),
                                fb ? &*fb : nullptr);
        r.policy = spec.name;
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace conucb
