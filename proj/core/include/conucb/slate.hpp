#pragma once

#include <cstddef>
#include <vector>

#include "conucb/graph.hpp"
#include "conucb/linalg.hpp"

namespace conucb {

// Candidate arms offered at round t. contexts.col(j) is the context of arms[j].
struct ContextSlate {
    std::size_t round = 0;
    std::vector<ArmId> arms;
    Mat contexts;

    std::size_t size() const { return arms.size(); }
    Eigen::Index dim() const { return contexts.rows(); }
};

// Validates distinct ids, one column per id, finite entries and, unless
// disabled, unit-norm contexts within 1e-6.
ContextSlate make_slate(std::size_t round, std::vector<ArmId> arms, Mat contexts,
                        bool require_unit_norm = true);

struct ConversationRecord {
    std::size_t round = 0;
    KeyTermId keyterm = 0;
    double feedback = 0.0;
    Vec pseudo_context;
};

}  // namespace conucb
