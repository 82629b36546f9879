#include "conucb/policy.hpp"

#include <cmath>
#include <limits>

namespace conucb {

std::vector<Query> Policy::converse(const ContextSlate&, std::size_t, FeedbackOracle&) { return {}; }

const std::vector<ArmScore>& Policy::last_scores() const {
    static const std::vector<ArmScore> empty;
    return empty;
}

std::size_t argmax_first(const Vec& values) {
    std::size_t best = 0;
    double best_value = -std::numeric_limits<double>::infinity();
    bool found = false;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        const double v = values(i);
        if (std::isnan(v)) continue;
        if (!found || v > best_value) {
            best = static_cast<std::size_t>(i);
            best_value = v;
            found = true;
        }
    }
    return best;
}

}  // namespace conucb
