#pragma once

// Random instances and brute-force reference computations shared by the tests.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "conucb/graph.hpp"
#include "conucb/linalg.hpp"
#include "conucb/rng.hpp"
#include "conucb/slate.hpp"

namespace testing_support {

using conucb::Mat;
using conucb::Vec;

inline Vec random_vec(std::mt19937_64& rng, Eigen::Index d, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Vec v(d);
    for (Eigen::Index i = 0; i < d; ++i) v(i) = u(rng);
    return v;
}

inline Vec random_unit(std::mt19937_64& rng, Eigen::Index d) {
    std::normal_distribution<double> n(0.0, 1.0);
    Vec v(d);
    for (Eigen::Index i = 0; i < d; ++i) v(i) = n(rng);
    return v / v.norm();
}

inline Mat random_unit_columns(std::mt19937_64& rng, Eigen::Index d, Eigen::Index n) {
    Mat m(d, n);
    for (Eigen::Index j = 0; j < n; ++j) m.col(j) = random_unit(rng, d);
    return m;
}

// c I + sum of a few random outer products; returned as a plain matrix.
inline Mat random_spd(std::mt19937_64& rng, Eigen::Index d, double c = 0.5, int terms = 6) {
    Mat m = c * Mat::Identity(d, d);
    for (int i = 0; i < terms; ++i) {
        const Vec x = random_vec(rng, d);
        m += x * x.transpose();
    }
    return m;
}

// Every arm gets 1..max_per_arm distinct key-terms with equal weights; every
// key-term is then guaranteed an arm.
inline conucb::RelationGraph random_graph(std::mt19937_64& rng, std::size_t arms, std::size_t keyterms,
                                          std::size_t max_per_arm = 3) {
    std::vector<std::vector<std::size_t>> rows(arms);
    std::uniform_int_distribution<std::size_t> pick_k(0, keyterms - 1);
    std::uniform_int_distribution<std::size_t> count(1, max_per_arm);
    for (std::size_t a = 0; a < arms; ++a) {
        const std::size_t n = count(rng);
        while (rows[a].size() < n) {
            const std::size_t k = pick_k(rng);
            if (std::find(rows[a].begin(), rows[a].end(), k) == rows[a].end()) rows[a].push_back(k);
        }
    }
    std::uniform_int_distribution<std::size_t> pick_a(0, arms - 1);
    for (std::size_t k = 0; k < keyterms; ++k) {
        bool used = false;
        for (const auto& r : rows) used = used || std::find(r.begin(), r.end(), k) != r.end();
        if (!used) rows[pick_a(rng)].push_back(k);
    }
    std::vector<conucb::Edge> edges;
    for (std::size_t a = 0; a < arms; ++a)
        for (std::size_t k : rows[a]) edges.push_back({a, k, 1.0 / static_cast<double>(rows[a].size())});
    return conucb::RelationGraph(arms, keyterms, edges);
}

inline conucb::ContextSlate slate_of(const Mat& contexts, std::size_t round = 1) {
    std::vector<conucb::ArmId> ids(static_cast<std::size_t>(contexts.cols()));
    for (std::size_t j = 0; j < ids.size(); ++j) ids[j] = j;
    return conucb::make_slate(round, ids, contexts, false);
}

inline double rel_err(const Vec& a, const Vec& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

}  // namespace testing_support
