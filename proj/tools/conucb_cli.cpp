// conucb: world generation, synthetic benchmarks, schedule sweeps, offline
// replay and re-aggregation of earlier runs.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "conucb/bench.hpp"
#include "conucb/errors.hpp"
#include "conucb/graph.hpp"
#include "conucb/replay.hpp"
#include "conucb/world.hpp"

namespace fs = std::filesystem;
using namespace conucb;

namespace {

struct Overrides {
    std::string config_path;
    std::string preset = "desk";
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> num_seeds;
    std::string out;
    bool verbose = false;
    std::optional<std::size_t> threads;

    std::optional<std::size_t> dim, arms, keyterms, users, max_keyterms, hidden_dim;
    std::optional<double> sigma_g;
    std::optional<std::size_t> horizon, slate_size, pool_size;
    std::optional<std::string> schedule;
    std::string policies;
    bool binary = false;
    bool bound = false;
    std::optional<double> lambda, lambda_tilde;
    std::string alpha, alpha_tilde;  // number or "formula"
    std::optional<std::string> events, features, tags;
};

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config_path, "JSON experiment config");
    cmd->add_option("--preset", o.preset, "desk | full | hidden")->check(CLI::IsMember({"desk", "full", "hidden"}));
    cmd->add_option("--dim", o.dim, "feature dimension");
    cmd->add_option("--arms", o.arms, "number of arms N");
    cmd->add_option("--keyterms", o.keyterms, "number of key-terms K");
    cmd->add_option("--users", o.users, "number of users");
    cmd->add_option("--max-keyterms", o.max_keyterms, "key-terms per arm at most");
    cmd->add_option("--sigma-g", o.sigma_g, "feature and reward noise scale");
    cmd->add_option("--hidden-dim", o.hidden_dim, "trailing features hidden from learners");
    cmd->add_option("--horizon,-T", o.horizon, "rounds per episode");
    cmd->add_option("--slate-size", o.slate_size, "arms offered per round");
    cmd->add_option("--schedule", o.schedule, "none | log:Q | linear:Q:P");
    cmd->add_option("--policies", o.policies, "comma-separated policy kinds");
    cmd->add_option("--num-seeds", o.num_seeds, "use seeds s..s+n-1");
    cmd->add_option("--lambda", o.lambda, "lambda for conversational policies");
    cmd->add_option("--lambda-tilde", o.lambda_tilde, "key-term ridge for conversational policies");
    cmd->add_option("--alpha", o.alpha, "fixed arm exploration, or 'formula'");
    cmd->add_option("--alpha-tilde", o.alpha_tilde, "fixed key-term exploration, or 'formula'");
    cmd->add_flag("--binary", o.binary, "Bernoulli feedback");
    cmd->add_flag("--bound", o.bound, "also emit the regret bound");
    cmd->add_option("--pool-size", o.pool_size, "replay pool size");
    cmd->add_option("--events", o.events, "logged events file");
    cmd->add_option("--features", o.features, "arm features file");
    cmd->add_option("--tags", o.tags, "arm/key-term tag file");
}

std::optional<double> exploration(const std::string& text) {
    if (text == "formula") return std::nullopt;
    return std::stod(text);
}

ExperimentConfig build_config(const Overrides& o) {
    ExperimentConfig c;
    if (!o.config_path.empty()) {
        c = load_config(o.config_path);
    } else if (o.preset == "full") {
        c = full_config();
    } else if (o.preset == "hidden") {
        c = hidden_config();
    } else {
        c = desk_config();
    }
    if (o.dim) c.world.dim = *o.dim;
    if (o.arms) c.world.num_arms = *o.arms;
    if (o.keyterms) c.world.num_keyterms = *o.keyterms;
    if (o.users) c.world.num_users = *o.users;
    if (o.max_keyterms) c.world.max_keyterms_per_arm = *o.max_keyterms;
    if (o.sigma_g) c.world.sigma_g = *o.sigma_g;
    if (o.hidden_dim) c.world.hidden_dim = *o.hidden_dim;
    if (o.horizon) c.horizon = *o.horizon;
    if (o.slate_size) c.slate_size = *o.slate_size;
    if (o.pool_size) c.pool_size = *o.pool_size;
    if (o.schedule) c.schedule = parse_schedule(*o.schedule);
    if (!o.policies.empty()) {
        std::vector<PolicySpec> chosen;
        std::stringstream ss(o.policies);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const PolicyKind kind = parse_policy_kind(item);
            PolicySpec p;
            bool found = false;
            for (const auto& d : c.policies)
                if (d.kind == kind) p = d, found = true;
            if (!found) {
                for (const auto& d : hidden_config().policies)
                    if (d.kind == kind) p = d, found = true;
            }
            if (!found) {
                p = default_policies().back();
                p.kind = kind;
                p.name = item;
            }
            chosen.push_back(p);
        }
        c.policies = chosen;
    }
    for (auto& p : c.policies) {
        if (o.lambda) p.conucb.lambda = *o.lambda;
        if (o.lambda_tilde) p.conucb.lambda_tilde = *o.lambda_tilde;
        if (!o.alpha.empty()) p.conucb.exploration.alpha = p.linucb.alpha = exploration(o.alpha);
        if (!o.alpha_tilde.empty()) p.conucb.exploration.alpha_tilde = exploration(o.alpha_tilde);
    }
    if (o.seed || o.num_seeds) {
        const std::uint64_t first = o.seed.value_or(c.seeds.empty() ? 1 : c.seeds.front());
        const std::size_t n = o.num_seeds.value_or(o.seed ? 1 : c.seeds.size());
        c.seeds.clear();
        for (std::size_t i = 0; i < n; ++i) c.seeds.push_back(first + i);
    }
    if (!o.out.empty()) c.output = o.out;
    if (o.threads) c.threads = *o.threads;
    c.verbose = c.verbose || o.verbose;
    c.binary = c.binary || o.binary;
    c.bound = c.bound || o.bound;
    if (o.events) c.events_path = *o.events;
    if (o.features) c.features_path = *o.features;
    if (o.tags) c.tags_path = *o.tags;
    validate(c);
    return c;
}

void print_summary(const AggregateReport& r) {
    std::cout << "schedule " << r.schedule << ", T=" << r.horizon << "\n";
    for (const auto& p : r.policies) {
        std::cout << "  " << p.name << ": R(T) = " << format_number(p.regret.mean.back()) << " +- "
                  << format_number(p.regret.stddev.back());
        if (!p.error.mean.empty()) std::cout << ", error " << format_number(p.error.mean.back());
        std::cout << "\n";
    }
}

int cmd_generate(const Overrides& o, std::optional<std::size_t> log_events, std::size_t interacted) {
    const ExperimentConfig c = build_config(o);
    const std::uint64_t seed = c.world_seed.value_or(c.seeds.front());
    const SyntheticWorld world = generate_world(c.world, seed);
    fs::create_directories(c.output);

    nlohmann::json manifest{{"tool", "conucb"},
                            {"kind", "world"},
                            {"seed", seed},
                            {"world",
                             {{"dim", c.world.dim},
                              {"num_arms", c.world.num_arms},
                              {"num_keyterms", c.world.num_keyterms},
                              {"num_users", c.world.num_users},
                              {"max_keyterms_per_arm", c.world.max_keyterms_per_arm},
                              {"sigma_g", c.world.sigma_g},
                              {"hidden_dim", c.world.hidden_dim}}},
                            {"keyterms_kept", world.num_keyterms()}};
    std::ofstream(c.output / "world.json") << manifest.dump(2) << '\n';
    save_graph(*world.graph, c.output / "graph.tsv");
    {
        std::ofstream out(c.output / "preferences.csv");
        out.precision(17);
        for (Eigen::Index u = 0; u < world.user_preferences.cols(); ++u) {
            out << u;
            for (Eigen::Index i = 0; i < world.user_preferences.rows(); ++i) out << ',' << world.user_preferences(i, u);
            out << '\n';
        }
    }
    if (log_events) {
        SyntheticLogParams lp;
        lp.events = *log_events;
        lp.interacted = interacted;
        const LoggedDataset logs = generate_synthetic_logs(world, lp, seed);
        save_logged_dataset(logs, c.output / "events.csv", c.output / "features.csv", c.output / "tags.csv");
    } else {
        LoggedDataset data;
        data.arm_features = world.arm_features;
        save_logged_dataset(data, c.output / "events.csv", c.output / "features.csv", std::nullopt);
        fs::remove(c.output / "events.csv");
    }
    std::cout << "world written to " << c.output.string() << " (" << world.num_arms() << " arms, "
              << world.num_keyterms() << " key-terms)\n";
    return 0;
}

int cmd_run(const Overrides& o) {
    const ExperimentConfig c = build_config(o);
    const AggregateReport r = run_benchmark(c);
    write_report(r, c, c.output);
    write_manifest(c, c.output / "manifest.json", "run");
    if (c.bound && !r.bound) std::cerr << "warning: regret bound unavailable for these parameters\n";
    print_summary(r);
    return 0;
}

int cmd_sweep(const Overrides& o, const std::string& schedules) {
    const ExperimentConfig c = build_config(o);
    std::vector<ConversationSchedule> list;
    std::stringstream ss(schedules);
    std::string item;
    while (std::getline(ss, item, ',')) list.push_back(parse_schedule(item));
    const auto rows = sweep_schedules(c, list);
    fs::create_directories(c.output);
    write_sweep(rows, c.output / "sweep.csv");
    write_manifest(c, c.output / "manifest.json", "sweep " + schedules);
    for (const auto& r : rows)
        std::cout << r.schedule << "  " << r.policy << "  " << format_number(r.mean) << " +- "
                  << format_number(r.stddev) << "\n";
    return 0;
}

int cmd_replay(const Overrides& o) {
    Overrides with = o;
    if (with.policies.empty()) with.policies = "linucb,conucb,random,logged";
    const ExperimentConfig c = build_config(with);
    const auto reports = run_replay(c, c.seeds.front());
    fs::create_directories(c.output);
    std::ofstream summary(c.output / "replay_summary.csv");
    summary << "policy,ctr,logged_ctr,normalized_ctr,matches,events,stderr\n";
    for (const auto& r : reports) {
        write_replay_csv(r, c.output / ("replay_" + r.policy + ".csv"));
        auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string("null"); };
        summary << r.policy << ',' << opt(r.ctr()) << ',' << format_number(r.logged_ctr()) << ','
                << opt(r.normalized_ctr()) << ',' << r.matches << ',' << r.events << ','
                << format_number(r.standard_error()) << '\n';
        std::cout << r.policy << ": ctr " << opt(r.ctr()) << ", normalized " << opt(r.normalized_ctr()) << " ("
                  << r.matches << " matches)\n";
    }
    write_manifest(c, c.output / "manifest.json", "replay");
    return 0;
}

int cmd_report(const std::string& in, const std::string& out) {
    ExperimentConfig c;
    const AggregateReport r = reaggregate(in, &c);
    const fs::path dir = out.empty() ? fs::path(in) : fs::path(out);
    write_report(r, c, dir);
    if (dir != fs::path(in)) write_manifest(c, dir / "manifest.json", "run");
    print_summary(r);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Conversational contextual bandit benchmarks"};
    app.require_subcommand(1);
    app.fallthrough();
    Overrides o;
    app.add_option("--seed", o.seed, "master seed (single seed unless --num-seeds)");
    app.add_option("--out", o.out, "output directory");
    app.add_flag("--verbose,-v", o.verbose, "per-round diagnostics (first seed, first user)");
    app.add_option("--threads", o.threads, "worker threads (0 = all cores)");

    auto* gen = app.add_subcommand("generate", "write a synthetic world (and optionally logs)");
    add_common(gen, o);
    std::optional<std::size_t> log_events;
    std::size_t interacted = 100;
    gen->add_option("--logs", log_events, "also write this many logged events");
    gen->add_option("--interacted", interacted, "arms per user in the logs");

    auto* run = app.add_subcommand("run", "run the synthetic benchmark");
    add_common(run, o);

    auto* sweep = app.add_subcommand("sweep", "compare conversation schedules");
    add_common(sweep, o);
    std::string schedules = "log:1,log:5,log:10,linear:1:50,linear:5:50,linear:10:50";
    sweep->add_option("--schedules", schedules, "comma-separated schedule list");

    auto* rep = app.add_subcommand("replay", "offline replay on logged data");
    add_common(rep, o);

    auto* report = app.add_subcommand("report", "re-aggregate a finished run");
    std::string in_dir;
    report->add_option("--in", in_dir, "run directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // bad invocation counts as bad config
    }
    try {
        if (*gen) return cmd_generate(o, log_events, interacted);
        if (*run) return cmd_run(o);
        if (*sweep) return cmd_sweep(o, schedules);
        if (*rep) return cmd_replay(o);
        if (*report) return cmd_report(in_dir, o.out);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const LoadError& e) {
        std::cerr << "load error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
