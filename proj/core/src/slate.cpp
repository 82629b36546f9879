#include "conucb/slate.hpp"

#include <cmath>
#include <string>
#include <unordered_set>

#include "conucb/errors.hpp"

namespace conucb {

ContextSlate make_slate(std::size_t round, std::vector<ArmId> arms, Mat contexts, bool require_unit_norm) {
    if (static_cast<Eigen::Index>(arms.size()) != contexts.cols()) {
        throw ConfigError("make_slate: need one context column per arm");
    }
    std::unordered_set<ArmId> seen;
    for (ArmId a : arms) {
        if (!seen.insert(a).second) throw ConfigError("make_slate: duplicate arm id " + std::to_string(a));
    }
    if (!contexts.allFinite()) throw ConfigError("make_slate: non-finite context entry");
    if (require_unit_norm) {
        for (Eigen::Index j = 0; j < contexts.cols(); ++j) {
            if (std::abs(contexts.col(j).norm() - 1.0) > 1e-6) {
                throw ConfigError("make_slate: context of arm " + std::to_string(arms[j]) + " is not unit norm");
            }
        }
    }
    return ContextSlate{round, std::move(arms), std::move(contexts)};
}

}  // namespace conucb
