#include <benchmark/benchmark.h>

#include <random>

#include "conucb/conucb.hpp"
#include "conucb/linalg.hpp"
#include "conucb/world.hpp"

using namespace conucb;

namespace {

Mat unit_columns(Rng& rng, Eigen::Index d, Eigen::Index n) {
    std::normal_distribution<double> g(0.0, 1.0);
    Mat m(d, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < d; ++i) m(i, j) = g(rng);
        m.col(j).normalize();
    }
    return m;
}

ConUCBState warm_state(Rng& rng, std::size_t d, int observations) {
    ConUCBParams p;
    p.exploration.alpha = 0.25;
    p.exploration.alpha_tilde = 0.25;
    ConUCBState s(d, p);
    const Mat x = unit_columns(rng, static_cast<Eigen::Index>(d), observations);
    for (int i = 0; i < observations; ++i) {
        s.observe_arm(x.col(i), 0.1);
        s.observe_keyterm(0.5 * x.col(i), 0.2);
    }
    s.refresh();
    return s;
}

}  // namespace

static void BM_RankOneUpdate(benchmark::State& state) {
    const auto d = state.range(0);
    Rng rng(1);
    PsdMatrix m = PsdMatrix::scaled_identity(d, 1.0);
    const Vec x = unit_columns(rng, d, 1).col(0);
    for (auto _ : state) {
        m.rank_one_update(x, 1e-6);
        benchmark::DoNotOptimize(m.entries().data());
    }
}
BENCHMARK(BM_RankOneUpdate)->Arg(20)->Arg(50);

static void BM_Refresh(benchmark::State& state) {
    const auto d = static_cast<std::size_t>(state.range(0));
    Rng rng(2);
    ConUCBState s = warm_state(rng, d, 200);
    for (auto _ : state) {
        s.refresh();
        benchmark::DoNotOptimize(s.theta().data());
    }
}
BENCHMARK(BM_Refresh)->Arg(20)->Arg(50);

static void BM_SelectArm(benchmark::State& state) {
    const auto d = static_cast<std::size_t>(state.range(0));
    Rng rng(3);
    const ConUCBState s = warm_state(rng, d, 200);
    const Mat x = unit_columns(rng, static_cast<Eigen::Index>(d), 50);
    std::vector<ArmId> ids(50);
    for (std::size_t j = 0; j < ids.size(); ++j) ids[j] = j;
    const ContextSlate slate = make_slate(1, ids, x);
    for (auto _ : state) benchmark::DoNotOptimize(select_arm(s, slate).position);
}
BENCHMARK(BM_SelectArm)->Arg(20)->Arg(50);

static void BM_SelectKeyterm(benchmark::State& state) {
    const auto d = static_cast<std::size_t>(state.range(0));
    const auto k = state.range(1);
    Rng rng(4);
    const ConUCBState s = warm_state(rng, d, 200);
    const Mat x = unit_columns(rng, static_cast<Eigen::Index>(d), 50);
    const Mat pseudo = 0.5 * unit_columns(rng, static_cast<Eigen::Index>(d), k);
    std::vector<ArmId> ids(50);
    for (std::size_t j = 0; j < ids.size(); ++j) ids[j] = j;
    const ContextSlate slate = make_slate(1, ids, x);
    const std::vector<bool> asked(static_cast<std::size_t>(k), false);
    for (auto _ : state) benchmark::DoNotOptimize(select_keyterm(s, slate, pseudo, asked));
}
BENCHMARK(BM_SelectKeyterm)->Args({20, 100})->Args({50, 500});

static void BM_SampleSlate(benchmark::State& state) {
    WorldParams p;
    const SyntheticWorld w = generate_world(p, 1);
    Rng rng(5);
    for (auto _ : state) benchmark::DoNotOptimize(sample_slate(w, 50, rng).arms.data());
}
BENCHMARK(BM_SampleSlate);
BENCHMARK_MAIN();
