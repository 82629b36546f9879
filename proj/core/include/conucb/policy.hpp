#pragma once

// Common interface shared by every learner, so the simulator and the replay
// evaluator can drive them uniformly.

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "conucb/graph.hpp"
#include "conucb/linalg.hpp"
#include "conucb/slate.hpp"

namespace conucb {

// Environment side of a round: answers the learner's extra questions.
class FeedbackOracle {
public:
    virtual ~FeedbackOracle() = default;
    virtual double keyterm_feedback(KeyTermId k) = 0;
    virtual double arm_feedback(ArmId arm) = 0;
};

// Upper-confidence score of one slate arm. width == arm_width + keyterm_width.
struct ArmScore {
    ArmId arm = 0;
    double estimate = 0.0;
    double width = 0.0;
    double arm_width = 0.0;
    double keyterm_width = 0.0;

    double ucb() const { return estimate + width; }
};

struct Query {
    enum class Kind { KeyTerm, Arm };
    Kind kind = Kind::KeyTerm;
    std::size_t id = 0;
    double feedback = 0.0;
};

class Policy {
public:
    virtual ~Policy() = default;

    virtual std::string name() const = 0;
    virtual std::size_t dim() const = 0;

    // Spend up to `budget` questions before the arm is chosen.
    virtual std::vector<Query> converse(const ContextSlate& slate, std::size_t budget, FeedbackOracle& oracle);

    // Slate position of the chosen arm. Empty slates throw UsageError.
    virtual std::size_t select(const ContextSlate& slate) = 0;

    virtual void observe(const ContextSlate& slate, std::size_t position, double reward) = 0;

    // Current preference estimate (for parameter-error tracking).
    virtual Vec estimate() const = 0;

    // Scores behind the most recent select(); empty for policies without them.
    virtual const std::vector<ArmScore>& last_scores() const;
};

using PolicyPtr = std::unique_ptr<Policy>;

// First index of the maximum; lower index wins ties.
std::size_t argmax_first(const Vec& values);

}  // namespace conucb
