#include "conucb/replay.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>

#include "conucb/baselines.hpp"
#include "conucb/errors.hpp"
#include "conucb/slate.hpp"

namespace conucb {
namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) out.push_back(trim(field));
    return out;
}

[[noreturn]] void fail(const std::filesystem::path& path, std::size_t line, const std::string& what) {
    throw LoadError(path.string() + ":" + std::to_string(line) + ": " + what);
}

template <class T>
T parse_int(const std::string& s, const std::filesystem::path& path, std::size_t line, const char* what) {
    T value{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) fail(path, line, std::string("bad ") + what + " '" + s + "'");
    return value;
}

double parse_real(const std::string& s, const std::filesystem::path& path, std::size_t line) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(value))
        fail(path, line, "bad number '" + s + "'");
    return value;
}

// Calls fn(fields, line_number) for each non-blank, non-comment line.
template <class Fn>
void for_each_record(const std::filesystem::path& path, Fn fn) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open " + path.string());
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        fn(split(t), no);
    }
}

}  // namespace

std::size_t LoggedDataset::num_users() const {
    std::size_t n = 0;
    for (const auto& e : events) n = std::max(n, e.user + 1);
    return n;
}

double LoggedDataset::click_rate() const {
    if (events.empty()) return 0.0;
    double clicks = 0.0;
    for (const auto& e : events) clicks += e.reward;
    return clicks / static_cast<double>(events.size());
}

LoggedDataset load_logged_dataset(const std::filesystem::path& events, const std::filesystem::path& features,
                                  const std::optional<std::filesystem::path>& tags) {
    LoggedDataset data;

    std::map<ArmId, std::pair<Vec, std::size_t>> rows;
    std::size_t dim = 0;
    for_each_record(features, [&](const std::vector<std::string>& f, std::size_t no) {
        if (f.size() < 2) fail(features, no, "expected arm_id followed by at least one feature");
        const auto arm = parse_int<ArmId>(f[0], features, no, "arm id");
        if (dim == 0) dim = f.size() - 1;
        if (f.size() - 1 != dim) fail(features, no, "feature count differs from earlier rows");
        Vec x(static_cast<Eigen::Index>(dim));
        for (std::size_t i = 0; i < dim; ++i) x(static_cast<Eigen::Index>(i)) = parse_real(f[i + 1], features, no);
        const double norm = x.norm();
        if (!(norm > 0.0)) fail(features, no, "zero feature vector cannot be normalized");
        if (!rows.emplace(arm, std::make_pair(Vec(x / norm), no)).second) fail(features, no, "duplicate arm id");
    });
    if (rows.empty()) throw LoadError(features.string() + ": no feature rows");
    const std::size_t num_arms = rows.rbegin()->first + 1;
    if (rows.size() != num_arms) throw LoadError(features.string() + ": arm ids must cover 0..N-1 without gaps");
    data.arm_features.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(num_arms));
    for (const auto& [arm, row] : rows) data.arm_features.col(static_cast<Eigen::Index>(arm)) = row.first;

    for_each_record(events, [&](const std::vector<std::string>& f, std::size_t no) {
        if (f.size() != 4) fail(events, no, "expected user_id, timestamp, arm_id, reward");
        LoggedEvent e;
        e.user = parse_int<std::size_t>(f[0], events, no, "user id");
        e.timestamp = parse_int<std::int64_t>(f[1], events, no, "timestamp");
        e.arm = parse_int<ArmId>(f[2], events, no, "arm id");
        if (e.arm >= num_arms) fail(events, no, "arm id has no feature row");
        if (f[3] == "0") e.reward = 0.0;
        else if (f[3] == "1") e.reward = 1.0;
        else fail(events, no, "reward must be 0 or 1");
        data.events.push_back(e);
    });
    std::stable_sort(data.events.begin(), data.events.end(),
                     [](const LoggedEvent& a, const LoggedEvent& b) { return a.timestamp < b.timestamp; });

    if (tags) {
        std::map<ArmId, std::vector<KeyTermId>> by_arm;
        std::size_t num_k = 0;
        for_each_record(*tags, [&](const std::vector<std::string>& f, std::size_t no) {
            if (f.size() != 2) fail(*tags, no, "expected arm_id, keyterm_id");
            const auto arm = parse_int<ArmId>(f[0], *tags, no, "arm id");
            const auto k = parse_int<KeyTermId>(f[1], *tags, no, "key-term id");
            if (arm >= num_arms) fail(*tags, no, "arm id has no feature row");
            auto& list = by_arm[arm];
            if (std::find(list.begin(), list.end(), k) != list.end()) fail(*tags, no, "duplicate tag");
            list.push_back(k);
            num_k = std::max(num_k, k + 1);
        });
        std::vector<Edge> edges;
        for (const auto& [arm, list] : by_arm)
            for (KeyTermId k : list) edges.push_back({arm, k, 1.0 / static_cast<double>(list.size())});
        try {
            data.graph = std::make_shared<const RelationGraph>(num_arms, num_k, std::move(edges));
        } catch (const ConfigError& e) {
            throw LoadError(tags->string() + ": " + e.what());
        }
    }
    return data;
}

void save_logged_dataset(const LoggedDataset& data, const std::filesystem::path& events,
                         const std::filesystem::path& features, const std::optional<std::filesystem::path>& tags) {
    {
        std::ofstream out(events);
        if (!out) throw LoadError("cannot write " + events.string());
        out << "# user_id, timestamp, arm_id, reward\n";
        for (const auto& e : data.events)
            out << e.user << ',' << e.timestamp << ',' << e.arm << ',' << (e.reward > 0.5 ? 1 : 0) << '\n';
    }
    {
        std::ofstream out(features);
        if (!out) throw LoadError("cannot write " + features.string());
        out << std::setprecision(17);
        for (Eigen::Index a = 0; a < data.arm_features.cols(); ++a) {
            out << a;
            for (Eigen::Index i = 0; i < data.arm_features.rows(); ++i) out << ',' << data.arm_features(i, a);
            out << '\n';
        }
    }
    if (tags && data.graph) {
        std::ofstream out(*tags);
        if (!out) throw LoadError("cannot write " + tags->string());
        for (const auto& e : data.graph->edges()) out << e.arm << ',' << e.keyterm << '\n';
    }
}

LoggedDataset generate_synthetic_logs(const SyntheticWorld& world, const SyntheticLogParams& params,
                                      std::uint64_t seed) {
    if (params.interacted == 0 || params.interacted > world.num_arms())
        throw ConfigError("synthetic logs: interacted must lie in [1, N]");
    Rng rng(derive_seed({seed, kLogStream}));
    const std::size_t users = world.num_users();
    std::vector<std::vector<ArmId>> sets(users);
    for (auto& s : sets) {
        s = sample_without_replacement(world.num_arms(), params.interacted, rng);
        std::sort(s.begin(), s.end());
    }
    std::uniform_int_distribution<std::size_t> pick_user(0, users - 1);
    std::uniform_int_distribution<std::size_t> pick_arm(0, params.interacted - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    LoggedDataset data;
    data.arm_features = world.arm_features;
    data.graph = world.graph;
    data.events.reserve(params.events);
    for (std::size_t i = 0; i < params.events; ++i) {
        LoggedEvent e;
        e.user = pick_user(rng);
        e.timestamp = static_cast<std::int64_t>(i);
        e.arm = sets[e.user][pick_arm(rng)];
        e.reward = binary_feedback(world.expected_arm_reward(e.user, e.arm), unit(rng));
        data.events.push_back(e);
    }
    return data;
}

std::vector<std::vector<ArmId>> interacted_arms(const LoggedDataset& data) {
    std::vector<std::vector<ArmId>> sets(data.num_users());
    for (const auto& e : data.events) sets[e.user].push_back(e.arm);
    for (auto& s : sets) {
        std::sort(s.begin(), s.end());
        s.erase(std::unique(s.begin(), s.end()), s.end());
    }
    return sets;
}

Vec fit_ground_truth(const LoggedDataset& data, std::size_t user, double ridge) {
    if (!(ridge > 0.0)) throw ConfigError("fit_ground_truth: ridge must be positive");
    RidgeState fit(data.dim(), ridge);
    for (const auto& e : data.events)
        if (e.user == user) fit.observe(data.context(e.arm), e.reward);
    if (fit.observations() == 0) throw UsageError("fit_ground_truth: user " + std::to_string(user) + " has no events");
    fit.refresh();
    return fit.theta();
}

PooledDataset build_pools(const LoggedDataset& data, std::size_t pool_size, Rng& rng) {
    if (pool_size == 0) throw ConfigError("build_pools: pool_size must be positive");
    const auto sets = interacted_arms(data);
    PooledDataset out;
    out.pool_size = pool_size;
    std::vector<ArmId> others;
    for (std::size_t i = 0; i < data.events.size(); ++i) {
        const LoggedEvent& e = data.events[i];
        const auto& mine = sets[e.user];
        if (mine.size() < pool_size) {
            ++out.skipped;
            continue;
        }
        others.clear();
        for (ArmId a : mine)
            if (a != e.arm) others.push_back(a);
        PooledEvent pe;
        pe.event = i;
        pe.pool.reserve(pool_size);
        pe.pool.push_back(e.arm);
        for (std::size_t j : sample_without_replacement(others.size(), pool_size - 1, rng)) pe.pool.push_back(others[j]);
        std::shuffle(pe.pool.begin(), pe.pool.end(), rng);
        out.events.push_back(std::move(pe));
    }
    return out;
}

ReplayFeedback make_replay_feedback(const LoggedDataset& data, double ridge, bool binary, std::uint64_t seed) {
    if (!data.graph) throw ConfigError("replay feedback: dataset has no key-term tags");
    ReplayFeedback fb;
    const auto sets = interacted_arms(data);
    fb.theta_star.resize(data.num_users());
    for (std::size_t u = 0; u < data.num_users(); ++u)
        fb.theta_star[u] = sets[u].empty() ? Vec::Zero(static_cast<Eigen::Index>(data.dim())) : fit_ground_truth(data, u, ridge);
    fb.pseudo_contexts = key_term_contexts(*data.graph, data.arm_features);
    fb.binary = binary;
    fb.seed = seed;
    return fb;
}

std::optional<double> ReplayReport::ctr() const {
    if (matches == 0) return std::nullopt;
    return clicks / static_cast<double>(matches);
}

double ReplayReport::logged_ctr() const { return events == 0 ? 0.0 : logged_clicks / static_cast<double>(events); }

std::optional<double> ReplayReport::normalized_ctr() const {
    const auto c = ctr();
    if (!c || !(logged_ctr() > 0.0)) return std::nullopt;
    return *c / logged_ctr();
}

double ReplayReport::standard_error() const {
    const auto c = ctr();
    if (!c) return 0.0;
    return std::sqrt(*c * (1.0 - *c) / static_cast<double>(matches));
}

std::size_t LoggedArmPolicy::select(const ContextSlate& slate) {
    for (std::size_t j = 0; j < slate.size(); ++j)
        if (slate.arms[j] == logged_) return j;
    throw UsageError("logged arm missing from its pool");
}

namespace {

class ReplayOracle final : public FeedbackOracle {
public:
    ReplayOracle(const ReplayFeedback* fb, Rng* rng) : fb_(fb), rng_(rng) {}
    void set_user(std::size_t user) { user_ = user; }

    double keyterm_feedback(KeyTermId k) override {
        if (!fb_) throw UsageError("replay: conversations need key-term feedback");
        const double mean = fb_->pseudo_contexts.col(static_cast<Eigen::Index>(k)).dot(fb_->theta_star.at(user_));
        if (!fb_->binary) return mean;
        return binary_feedback(mean, std::uniform_real_distribution<double>(0.0, 1.0)(*rng_));
    }
    // Arm answers would leak unlogged rewards.
    double arm_feedback(ArmId) override { throw UsageError("replay: arm-level questions are not supported"); }

private:
    const ReplayFeedback* fb_;
    Rng* rng_;
    std::size_t user_ = 0;
};

}  // namespace

ReplayReport replay(const PolicyFactory& factory, const LoggedDataset& data, const PooledDataset& pooled,
                    const ConversationSchedule& schedule, const ReplayFeedback* feedback, std::size_t window) {
    if (window == 0) throw ConfigError("replay: window must be positive");
    const std::size_t users = data.num_users();
    std::vector<PolicyPtr> policies(users);
    std::vector<std::size_t> matches(users, 0);
    std::vector<std::size_t> conversed_round(users, 0);
    Rng rng(feedback ? feedback->seed : 0);
    ReplayOracle oracle(feedback, &rng);

    ReplayReport report;
    for (std::size_t i = 0; i < pooled.events.size(); ++i) {
        const PooledEvent& pe = pooled.events[i];
        const LoggedEvent& e = data.events.at(pe.event);
        auto& policy = policies[e.user];
        if (!policy) {
            policy = factory(e.user);
            if (policy->dim() != data.dim()) throw ConfigError("replay: policy dimension does not match the dataset");
            if (report.policy.empty()) report.policy = policy->name();
        }
        if (auto* logged = dynamic_cast<LoggedArmPolicy*>(policy.get())) logged->set_logged(e.arm);

        Mat contexts(static_cast<Eigen::Index>(data.dim()), static_cast<Eigen::Index>(pe.pool.size()));
        for (std::size_t j = 0; j < pe.pool.size(); ++j)
            contexts.col(static_cast<Eigen::Index>(j)) = data.context(pe.pool[j]);
        const std::size_t t = matches[e.user] + 1;
        const ContextSlate slate = make_slate(t, pe.pool, std::move(contexts));

        if (conversed_round[e.user] < t) {
            conversed_round[e.user] = t;
            const std::size_t budget = conversation_budget(schedule, t);
            if (budget > 0) {
                oracle.set_user(e.user);
                policy->converse(slate, budget, oracle);
            }
        }

        const std::size_t pos = policy->select(slate);
        const std::size_t w = i / window;
        if (report.windows.size() <= w) {
            report.windows.push_back({});
            report.windows.back().index = w;
        }
        ReplayWindow& win = report.windows[w];
        ++win.events;
        win.logged_clicks += e.reward;
        ++report.events;
        report.logged_clicks += e.reward;
        if (slate.arms.at(pos) == e.arm) {
            policy->observe(slate, pos, e.reward);
            ++matches[e.user];
            ++win.matches;
            win.clicks += e.reward;
            ++report.matches;
            report.clicks += e.reward;
        }
    }
    for (auto& win : report.windows) {
        if (win.matches == 0) continue;
        win.ctr = win.clicks / static_cast<double>(win.matches);
        const double logged = win.logged_clicks / static_cast<double>(win.events);
        if (logged > 0.0) win.normalized_ctr = *win.ctr / logged;
    }
    return report;
}

void write_replay_csv(const ReplayReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write " + path.string());
    out << "window_index,ctr,normalized_ctr,matches\n";
    auto put = [&](const std::optional<double>& v) {
        if (v) out << std::fixed << std::setprecision(6) << *v;
        else out << "null";
    };
    for (const auto& w : report.windows) {
        out << w.index << ',';
        put(w.ctr);
        out << ',';
        put(w.normalized_ctr);
        out << ',' << w.matches << '\n';
    }
}

}  // namespace conucb
