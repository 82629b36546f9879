#include "conucb/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>

#include "conucb/errors.hpp"

namespace conucb {

RelationGraph::RelationGraph(std::size_t num_arms, std::size_t num_keyterms, std::vector<Edge> edges,
                             double row_tolerance)
    : arm_rows_(num_arms), keyterm_cols_(num_keyterms), column_sums_(num_keyterms, 0.0) {
    if (num_arms == 0 || num_keyterms == 0) {
        throw ConfigError("RelationGraph: need at least one arm and one key-term");
    }
    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
        return a.arm != b.arm ? a.arm < b.arm : a.keyterm < b.keyterm;
    });
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const Edge& e = edges[i];
        if (e.arm >= num_arms || e.keyterm >= num_keyterms) {
            throw ConfigError("RelationGraph: edge id out of range (arm " + std::to_string(e.arm) +
                              ", key-term " + std::to_string(e.keyterm) + ")");
        }
        if (!std::isfinite(e.weight) || e.weight < 0.0) {
            throw ConfigError("RelationGraph: negative or non-finite weight on arm " +
                              std::to_string(e.arm));
        }
        if (i > 0 && edges[i - 1].arm == e.arm && edges[i - 1].keyterm == e.keyterm) {
            throw ConfigError("RelationGraph: duplicate edge (arm " + std::to_string(e.arm) +
                              ", key-term " + std::to_string(e.keyterm) + ")");
        }
        arm_rows_[e.arm].push_back({e.keyterm, e.weight});
    }
    for (std::size_t a = 0; a < num_arms; ++a) {
        double sum = 0.0;
        for (const auto& inc : arm_rows_[a]) sum += inc.weight;
        if (std::abs(sum - 1.0) > row_tolerance) {
            std::ostringstream msg;
            msg << "RelationGraph: weights of arm " << a << " sum to " << std::setprecision(12) << sum
                << ", expected 1";
            throw ConfigError(msg.str());
        }
        for (auto& inc : arm_rows_[a]) {
            inc.weight /= sum;
            keyterm_cols_[inc.id].push_back({a, inc.weight});
            column_sums_[inc.id] += inc.weight;
        }
    }
    for (std::size_t k = 0; k < num_keyterms; ++k) {
        if (!(column_sums_[k] > 0.0)) {
            throw ConfigError("RelationGraph: key-term " + std::to_string(k) + " has no incident arm");
        }
    }
}

double RelationGraph::weight(ArmId arm, KeyTermId k) const {
    for (const auto& inc : arm_rows_.at(arm)) {
        if (inc.id == k) return inc.weight;
    }
    return 0.0;
}

std::vector<Edge> RelationGraph::edges() const {
    std::vector<Edge> out;
    for (std::size_t a = 0; a < arm_rows_.size(); ++a) {
        for (const auto& inc : arm_rows_[a]) out.push_back({a, inc.id, inc.weight});
    }
    return out;
}

namespace {

[[noreturn]] void fail(const std::filesystem::path& path, std::size_t line, const std::string& why) {
    throw LoadError(path.string() + ":" + std::to_string(line) + ": " + why);
}

}  // namespace

RelationGraph load_graph(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open graph file " + path.string());

    std::string line;
    std::size_t lineno = 0;
    std::size_t num_arms = 0;
    std::size_t num_keyterms = 0;
    bool have_header = false;
    std::vector<Edge> edges;
    std::vector<std::size_t> edge_lines;
    std::map<std::pair<ArmId, KeyTermId>, std::size_t> seen;

    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        if (!have_header) {
            std::istringstream hs(line);
            std::string arms_tag;
            std::string keys_tag;
            long long n = -1;
            long long k = -1;
            if (!(hs >> arms_tag >> n >> keys_tag >> k) || arms_tag != "#arms" || keys_tag != "#keyterms" ||
                n <= 0 || k <= 0) {
                fail(path, lineno, "expected header '#arms N #keyterms K'");
            }
            num_arms = static_cast<std::size_t>(n);
            num_keyterms = static_cast<std::size_t>(k);
            have_header = true;
            continue;
        }
        if (line[0] == '#') continue;
        std::istringstream ls(line);
        long long arm = -1;
        long long key = -1;
        double w = 0.0;
        std::string rest;
        if (!(ls >> arm >> key >> w) || (ls >> rest)) {
            fail(path, lineno, "expected 'arm_id<TAB>keyterm_id<TAB>weight'");
        }
        if (arm < 0 || static_cast<std::size_t>(arm) >= num_arms) fail(path, lineno, "arm id out of range");
        if (key < 0 || static_cast<std::size_t>(key) >= num_keyterms) {
            fail(path, lineno, "key-term id out of range");
        }
        if (!std::isfinite(w) || w < 0.0) fail(path, lineno, "negative or non-finite weight");
        const auto id = std::make_pair(static_cast<ArmId>(arm), static_cast<KeyTermId>(key));
        if (auto it = seen.find(id); it != seen.end()) {
            fail(path, lineno, "duplicate edge (first seen on line " + std::to_string(it->second) + ")");
        }
        seen.emplace(id, lineno);
        edges.push_back({id.first, id.second, w});
        edge_lines.push_back(lineno);
    }
    if (!have_header) fail(path, lineno, "missing header");

    std::vector<double> row_sum(num_arms, 0.0);
    std::vector<std::size_t> row_line(num_arms, 0);
    std::vector<double> col_sum(num_keyterms, 0.0);
    for (std::size_t i = 0; i < edges.size(); ++i) {
        row_sum[edges[i].arm] += edges[i].weight;
        col_sum[edges[i].keyterm] += edges[i].weight;
        if (row_line[edges[i].arm] == 0) row_line[edges[i].arm] = edge_lines[i];
    }
    for (std::size_t a = 0; a < num_arms; ++a) {
        if (std::abs(row_sum[a] - 1.0) > 1e-6) {
            std::ostringstream msg;
            msg << "weights of arm " << a << " sum to " << std::setprecision(12) << row_sum[a]
                << " (must be 1 within 1e-6)";
            fail(path, row_line[a] == 0 ? 1 : row_line[a], msg.str());
        }
    }
    for (std::size_t k = 0; k < num_keyterms; ++k) {
        if (!(col_sum[k] > 0.0)) fail(path, 1, "key-term " + std::to_string(k) + " has no incident arm");
    }
    return RelationGraph(num_arms, num_keyterms, std::move(edges), 1e-6);
}

void save_graph(const RelationGraph& graph, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write graph file " + path.string());
    out << "#arms " << graph.num_arms() << " #keyterms " << graph.num_keyterms() << "\n";
    out << std::setprecision(17);
    for (const auto& e : graph.edges()) out << e.arm << '\t' << e.keyterm << '\t' << e.weight << '\n';
}

Vec key_term_context(const RelationGraph& graph, const Mat& arm_contexts, KeyTermId k) {
    if (arm_contexts.cols() != static_cast<Eigen::Index>(graph.num_arms())) {
        throw ConfigError("key_term_context: need one context column per arm");
    }
    Vec out = Vec::Zero(arm_contexts.rows());
    const double total = graph.column_sum(k);
    for (const auto& inc : graph.arms_of(k)) {
        out.noalias() += (inc.weight / total) * arm_contexts.col(static_cast<Eigen::Index>(inc.id));
    }
    return out;
}

Vec key_term_context(const RelationGraph& graph, const std::unordered_map<ArmId, Vec>& contexts,
                     KeyTermId k) {
    const double total = graph.column_sum(k);
    Vec out;
    for (const auto& inc : graph.arms_of(k)) {
        auto it = contexts.find(inc.id);
        if (it == contexts.end()) {
            throw ConfigError("key_term_context: missing context for arm " + std::to_string(inc.id) +
                              " incident to key-term " + std::to_string(k));
        }
        if (out.size() == 0) out = Vec::Zero(it->second.size());
        if (it->second.size() != out.size()) throw ConfigError("key_term_context: context dims differ");
        out.noalias() += (inc.weight / total) * it->second;
    }
    return out;
}

Mat key_term_contexts(const RelationGraph& graph, const Mat& arm_contexts) {
    Mat out(arm_contexts.rows(), static_cast<Eigen::Index>(graph.num_keyterms()));
    for (std::size_t k = 0; k < graph.num_keyterms(); ++k) {
        out.col(static_cast<Eigen::Index>(k)) = key_term_context(graph, arm_contexts, k);
    }
    return out;
}

}  // namespace conucb
