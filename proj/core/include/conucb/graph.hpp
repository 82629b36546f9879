#pragma once

// Weighted bipartite relation between arms and key-terms.

#include <cstddef>
#include <filesystem>
#include <span>
#include <unordered_map>
#include <vector>

#include "conucb/linalg.hpp"

namespace conucb {

using ArmId = std::size_t;
using KeyTermId = std::size_t;

struct Edge {
    ArmId arm;
    KeyTermId keyterm;
    double weight;
};

struct Incidence {
    std::size_t id;  // key-term id in an arm row, arm id in a key-term column
    double weight;
};

// Arm rows sum to one; every key-term has positive total weight. Immutable
// after construction, so it may be shared freely between threads.
class RelationGraph {
public:
    // Row sums that deviate from one by at most row_tolerance are renormalized;
    // larger deviations, negative weights, duplicate edges, out-of-range ids and
    // key-terms without incident weight throw ConfigError.
    RelationGraph(std::size_t num_arms, std::size_t num_keyterms, std::vector<Edge> edges,
                  double row_tolerance = 1e-6);

    std::size_t num_arms() const { return arm_rows_.size(); }
    std::size_t num_keyterms() const { return keyterm_cols_.size(); }

    std::span<const Incidence> keyterms_of(ArmId arm) const { return arm_rows_.at(arm); }
    std::span<const Incidence> arms_of(KeyTermId k) const { return keyterm_cols_.at(k); }

    // sum_a w_{a,k}
    double column_sum(KeyTermId k) const { return column_sums_.at(k); }

    // 0 when there is no edge.
    double weight(ArmId arm, KeyTermId k) const;

    std::vector<Edge> edges() const;

private:
    std::vector<std::vector<Incidence>> arm_rows_;
    std::vector<std::vector<Incidence>> keyterm_cols_;
    std::vector<double> column_sums_;
};

// Text format:
//   #arms N #keyterms K
//   arm_id<TAB>keyterm_id<TAB>weight
// One edge per line, 0-based ids. Errors throw LoadError naming the line.
RelationGraph load_graph(const std::filesystem::path& path);
void save_graph(const RelationGraph& graph, const std::filesystem::path& path);

// Pseudo-context of key-term k: sum_a w_{a,k} / (sum_a' w_{a',k}) x_a.
// arm_contexts holds one column per arm id.
Vec key_term_context(const RelationGraph& graph, const Mat& arm_contexts, KeyTermId k);

// Same, with contexts supplied per arm. A missing incident arm throws ConfigError.
Vec key_term_context(const RelationGraph& graph, const std::unordered_map<ArmId, Vec>& contexts,
                     KeyTermId k);

// All pseudo-contexts as a d x K matrix.
Mat key_term_contexts(const RelationGraph& graph, const Mat& arm_contexts);

}  // namespace conucb
