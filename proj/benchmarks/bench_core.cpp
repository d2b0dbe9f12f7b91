#include "kinlim/flight.hpp"
#include "kinlim/kernels.hpp"
#include "kinlim/microdyn.hpp"
#include "kinlim/pointset.hpp"
#include "kinlim/stats.hpp"

#include <benchmark/benchmark.h>

using namespace kinlim;

namespace {

ScattererConfig config_of(PointSource s, double r) {
    ScattererConfig c;
    c.source = std::move(s);
    c.radius = r;
    return c;
}

// Random starts for first_collision; reused across iterations.
std::vector<ParticleState> starts(const ScattererConfig& c, int n) {
    const LorentzScatteringMap map{c.dim(), specular_angle()};
    Rng rng(1);
    std::vector<ParticleState> out;
    for (int i = 0; i < n; ++i) out.push_back(sample_initial_state(c, map, rng));
    return out;
}

void BM_FirstCollision(benchmark::State& state, ScattererConfig c) {
    const auto s0 = starts(c, 256);
    std::size_t i = 0;
    for (auto _ : state) benchmark::DoNotOptimize(first_collision(c, s0[i++ % s0.size()], 1e9));
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK_CAPTURE(BM_FirstCollision, z2_r0p01, config_of(integer_lattice(2), 0.01));
BENCHMARK_CAPTURE(BM_FirstCollision, z2_r0p001, config_of(integer_lattice(2), 0.001));
BENCHMARK_CAPTURE(BM_FirstCollision, poisson2_r0p01, config_of(PoissonSpec{2, 1.0, 3}, 0.01));
BENCHMARK_CAPTURE(BM_FirstCollision, z3_r0p05, config_of(integer_lattice(3), 0.05));

void BM_Trajectory(benchmark::State& state) {
    const auto c = config_of(integer_lattice(2), 0.01);
    const LorentzScatteringMap map{2, specular_angle()};
    StopCriterion stop;
    stop.max_collisions = state.range(0);
    std::uint64_t seed = 0;
    for (auto _ : state) benchmark::DoNotOptimize(run_trajectory(c, map, stop, ++seed));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Trajectory)->Arg(100)->Arg(1000);

void BM_LatticeKernelValue(benchmark::State& state) {
    Rng rng(2);
    std::vector<double> a(1024), b(1024), x(1024);
    for (int i = 0; i < 1024; ++i) {
        a[i] = uniform(rng, -1, 1);
        b[i] = uniform(rng, -1, 1);
        x[i] = uniform(rng, 0, 3);
    }
    std::size_t i = 0;
    for (auto _ : state) {
        const std::size_t j = i++ & 1023;
        benchmark::DoNotOptimize(lattice_kernel_2d(a[j], x[j], b[j], 1.0));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_LatticeKernelValue);

void BM_Phi0Tail(benchmark::State& state) {
    const LatticeKernel2D k(1.0);
    for (auto _ : state) benchmark::DoNotOptimize(phi0_tail(k, 0.7));
}
BENCHMARK(BM_Phi0Tail)->Unit(benchmark::kMillisecond);

void BM_KMarginalTail(benchmark::State& state) {
    const LatticeKernel2D k(1.0);
    for (auto _ : state) benchmark::DoNotOptimize(K_marginal_tail(k, 0.7));
}
BENCHMARK(BM_KMarginalTail)->Unit(benchmark::kMillisecond);

void BM_LatticeSamplerDraw(benchmark::State& state) {
    const LatticeSampler2D s{LatticeKernel2D(1.0)};
    Rng rng(3);
    const Vec prev = make_vec({0.3});
    for (auto _ : state) benchmark::DoNotOptimize(s.sample(prev, rng));
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_LatticeSamplerDraw);

void BM_LatticeSamplerStationary(benchmark::State& state) {
    const LatticeSampler2D s{LatticeKernel2D(1.0)};
    Rng rng(4);
    for (auto _ : state) benchmark::DoNotOptimize(s.sample_stationary(rng));
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_LatticeSamplerStationary);

void BM_PoissonSamplerDraw(benchmark::State& state) {
    const PoissonSampler s{PoissonKernel(3, 1.0)};
    Rng rng(5);
    const Vec prev = Vec::Zero(2);
    for (auto _ : state) benchmark::DoNotOptimize(s.sample(prev, rng));
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_PoissonSamplerDraw);

void BM_HistogramAdd(benchmark::State& state) {
    Histogram h({default_label_edges(), default_xi_edges(0.5), default_label_edges()});
    Rng rng(6);
    std::vector<double> v(3 * 1024);
    for (std::size_t i = 0; i < v.size(); i += 3) {
        v[i] = uniform(rng, -1, 1);
        v[i + 1] = -0.5 * std::log(uniform01(rng));
        v[i + 2] = uniform(rng, -1, 1);
    }
    std::size_t i = 0;
    for (auto _ : state) h.add(&v[3 * (i++ & 1023)]);
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_HistogramAdd);

void BM_PointsInBox(benchmark::State& state, PointSource src) {
    const double half = static_cast<double>(state.range(0));
    const int d = source_dim(src);
    const Box box{Vec::Constant(d, -half), Vec::Constant(d, half)};
    std::size_t n = 0;
    for (auto _ : state) {
        const auto pts = points_in_box(src, box);
        n += pts.size();
        benchmark::DoNotOptimize(pts.data());
    }
    state.SetItemsProcessed(static_cast<long>(n));
}
BENCHMARK_CAPTURE(BM_PointsInBox, z2, PointSource{integer_lattice(2)})->Arg(50);
BENCHMARK_CAPTURE(BM_PointsInBox, poisson2, PointSource{PoissonSpec{2, 1.0, 7}})->Arg(50);
BENCHMARK_CAPTURE(BM_PointsInBox, honeycomb, PointSource{honeycomb_spec()})->Arg(50);
BENCHMARK_CAPTURE(BM_PointsInBox, wennberg, PointSource{wennberg_spec()})->Arg(50);
BENCHMARK_CAPTURE(BM_PointsInBox, fibonacci, PointSource{fibonacci_spec()})->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
