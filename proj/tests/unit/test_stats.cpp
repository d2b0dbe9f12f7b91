#include "kinlim/flight.hpp"
#include "kinlim/simulate.hpp"
#include "kinlim/stats.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace kinlim;

namespace {

ScattererConfig config_of(PointSource s, double r) {
    ScattererConfig c;
    c.source = std::move(s);
    c.radius = r;
    return c;
}

Histogram filled(const std::vector<double>& edges, const std::vector<double>& xs) {
    Histogram h({edges});
    for (double x : xs) h.add(x);
    return h;
}

std::vector<double> exponential_sample(long n, double mean, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> out(n);
    for (auto& x : out) x = -mean * std::log1p(-uniform01(rng));
    return out;
}

Box box2(double x0, double y0, double x1, double y1) { return {make_vec({x0, y0}), make_vec({x1, y1})}; }

}  // namespace

TEST(Histogram, LocateAndEdges) {
    Histogram h({uniform_edges(0, 1, 4), uniform_edges(-1, 1, 2)});
    EXPECT_EQ(h.size(), 8u);
    const double in[2] = {0.3, 0.5}, out[2] = {1.0, 0.0};
    EXPECT_EQ(h.unflat(h.locate(in)), (std::vector<std::size_t>{1, 1}));
    EXPECT_EQ(h.locate(out), -1);
    h.add(0.3, 0.5);
    h.add(1.0, 0.0);
    h.add_censored(2);
    EXPECT_EQ(h.in_range(), 1u);
    EXPECT_EQ(h.outside(), 1u);
    EXPECT_EQ(h.total(), 4u);
    const auto le = log_edges(1, 1000, 3);
    EXPECT_NEAR(le[1], 10, 1e-12);
    EXPECT_NEAR(le[2], 100, 1e-12);
    const auto d = default_xi_edges(0.5);
    EXPECT_EQ(d.size(), 261u);
    EXPECT_DOUBLE_EQ(d[200], 5.0);
    EXPECT_NEAR(d.back(), 500.0, 1e-9);
    EXPECT_EQ(default_label_edges().size(), 41u);
}

TEST(Histogram, MergeIdentityOrderAndMismatch) {
    const auto edges = uniform_edges(0, 3, 30);
    const auto a = filled(edges, exponential_sample(1000, 0.5, 1));
    const auto b = filled(edges, exponential_sample(500, 0.5, 2));
    const auto c = filled(edges, exponential_sample(700, 0.5, 3));
    const Histogram empty({edges});
    EXPECT_EQ(merge(a, empty).counts(), a.counts());
    EXPECT_EQ(merge(a, empty).total(), a.total());
    EXPECT_EQ(merge(a, b).counts(), merge(b, a).counts());
    EXPECT_EQ(merge(merge(a, b), c).counts(), merge(a, merge(b, c)).counts());
    EXPECT_EQ(merge(merge(a, b), c).outside(), merge(c, merge(b, a)).outside());
    EXPECT_THROW(merge(a, Histogram({uniform_edges(0, 3, 29)})), ValidationError);
}

TEST(Histogram, DensityIntegratesWithCensoring) {
    auto h = filled(uniform_edges(0, 2, 40), exponential_sample(10000, 0.5, 4));
    h.add_censored(123);
    double integral = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) integral += h.density(i) * h.volume(i);
    const double rest = double(h.outside() + h.censored()) / h.total();
    EXPECT_NEAR(integral + rest, 1.0, 1e-12);
}

TEST(Distances, TrivialValues) {
    const auto xs = exponential_sample(2000, 0.5, 5);
    EXPECT_EQ(ks_distance(xs, xs), 0.0);
    const auto edges = uniform_edges(0, 4, 40);
    const auto a = filled(edges, xs), b = filled(edges, exponential_sample(2000, 1.5, 6));
    EXPECT_EQ(l1_distance(a, a), 0.0);
    EXPECT_LE(l1_distance(a, b), 2.0);
    EXPECT_GT(l1_distance(a, b), 0.3);
    // disjoint supports reach the bound
    const auto c = filled(edges, std::vector<double>(100, 0.1)), d = filled(edges, std::vector<double>(100, 3.9));
    EXPECT_NEAR(l1_distance(c, d), 2.0, 1e-12);
}

TEST(Distances, KsMatchesTheOracle) {
    const auto xs = exponential_sample(3000, 0.5, 7);
    auto F = [](double x) { return x <= 0 ? 0.0 : 1.0 - std::exp(-2 * x); };
    EXPECT_NEAR(ks_distance(xs, F), oracle::ks(xs, F), 1e-15);
    // the binned version can only see the edges
    const auto h = filled(uniform_edges(0, 5, 500), xs);
    EXPECT_LE(ks_distance(h, F), ks_distance(xs, F) + 1e-12);
    EXPECT_GT(ks_distance(h, F), 0.5 * ks_distance(xs, F));
    EXPECT_LT(l1_bin_error(filled(uniform_edges(0, 3, 30), exponential_sample(200000, 0.5, 8)), F), 0.02);
}

TEST(Distances, KsShrinksLikeInverseRootN) {
    auto F = [](double x) { return 1.0 - std::exp(-2 * x); };
    const int reps = 200;
    std::vector<double> mean_ks;
    for (long n : {500L, 1000L, 2000L, 4000L}) {
        double s = 0.0;
        for (int r = 0; r < reps; ++r) s += ks_distance(exponential_sample(n, 0.5, derive_seed(n, r)), F);
        mean_ks.push_back(s / reps);
    }
    for (std::size_t i = 1; i < mean_ks.size(); ++i) {
        const double ratio = mean_ks[i] / mean_ks[i - 1];
        EXPECT_GE(ratio, 0.6);
        EXPECT_LE(ratio, 0.85);
    }
}

TEST(TabulatedCdf, InterpolatesMonotone) {
    const TabulatedCdf F(uniform_edges(0, 5, 500), [](double x) { return 1.0 - std::exp(-x); });
    EXPECT_NEAR(F(1.234), 1.0 - std::exp(-1.234), 1e-5);
    EXPECT_EQ(F(-1.0), 0.0);
    EXPECT_NEAR(F(10.0), 1.0 - std::exp(-5.0), 1e-12);
}

TEST(TailSlope, ParetoSample) {
    // P(xi > x) = x^-2 on [1, inf): density 2 x^-3
    Rng rng(9);
    Histogram h({default_xi_edges(0.5)});
    for (int i = 0; i < 2000000; ++i) h.add(1.0 / std::sqrt(1.0 - uniform01(rng)));
    const auto fit = tail_slope(h, 5, 50);
    EXPECT_NEAR(fit.slope, -3.0, 0.1);
    EXPECT_NEAR(fit.constant, 2.0, 0.1);
    EXPECT_NEAR(fit.intercept, std::log(2.0), 0.3);
    EXPECT_GE(fit.bins, 10);
    EXPECT_LT(fit.slope_stderr, 0.1);
}

TEST(TailSlope, ExponentialFitsWorseThanTheLatticeLaw) {
    const auto s = make_sampler(LatticeKernel2D(1.0));
    const LorentzScatteringMap map{2, specular_angle()};
    Histogram lat({default_xi_edges(0.5)}), poi({default_xi_edges(0.5)});
    // the lattice chain's path lengths after the first follow Phi0
    for (std::uint64_t k = 0; k < 4; ++k) {
        const auto xs = flight_path_sequence(*s, map, 500000, 100 + k);
        for (std::size_t i = 1; i < xs.size(); ++i) lat.add(xs[i]);
    }
    for (double x : exponential_sample(2000000, 0.5, 10)) poi.add(x);
    const auto fl = tail_slope(lat, 5, 50);
    EXPECT_NEAR(fl.slope, -3.0, 0.3);
    EXPECT_NEAR(fl.intercept, std::log(1.0 / (oracle::pi * oracle::pi)), 0.3);
    // same decade-wide window where the exponential still has data
    const auto fp = tail_slope(poi, 0.5, 5);
    EXPECT_GE(fp.residual, 10.0 * fl.residual);
    EXPECT_THROW(tail_slope(poi, 100, 200), ValidationError);
}

TEST(FreePaths, CensoringAccounting) {
    const auto cfg = config_of(integer_lattice(2), 0.05);
    const LorentzScatteringMap map{2, specular_angle()};
    SimulationPlan plan;
    plan.trajectories = 300;
    plan.seed = 11;
    plan.stop.max_collisions = 50;
    plan.stop.L_max = 40.0;  // about 4 xi_bar: plenty of censoring
    const double r = 0.05;
    const auto acc = simulate_ensemble<FreePathAccumulator>(
        cfg, map, plan, [&] { return FreePathAccumulator(r, 2, default_xi_edges(0.5)); },
        [](FreePathAccumulator& a, const FreePathAccumulator& b) { a.merge(b); });
    const auto& h = acc.phi0();
    EXPECT_GT(h.censored(), 0u);
    EXPECT_EQ(h.outside(), 0u);
    double integral = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) integral += h.density(i) * h.volume(i);
    EXPECT_NEAR(integral + acc.censored_fraction(), 1.0, 1e-12);
}

TEST(FreePaths, FirstFlightsAreLongerOnTheLattice) {
    const double r = 0.02;
    const auto cfg = config_of(integer_lattice(2), r);
    const LorentzScatteringMap map{2, specular_angle()};
    SimulationPlan plan;
    plan.trajectories = 2000;
    plan.seed = 12;
    plan.stop.max_collisions = 20;
    const auto acc = simulate_ensemble<FreePathAccumulator>(
        cfg, map, plan, [&] { return FreePathAccumulator(r, 2, default_xi_edges(0.5)); },
        [](FreePathAccumulator& a, const FreePathAccumulator& b) { a.merge(b); });
    EXPECT_NEAR(acc.mean(), 0.5, 5 * acc.mean_stderr() + 0.01);
    // a flight drawn from K has mean E[xi^2] / (2 xi_bar) > xi_bar
    EXPECT_GT(acc.first_flight_mean(), acc.mean() + 0.1);
    EXPECT_EQ(acc.first_flights().total(), 2000u);
}

TEST(FreePaths, PoissonConfigurationIsExponential) {
    const double r = 0.01;
    const auto cfg = config_of(PoissonSpec{2, 1.0, 77}, r);
    const LorentzScatteringMap map{2, specular_angle()};
    SimulationPlan plan;
    plan.trajectories = 500;
    plan.seed = 13;
    plan.stop.max_collisions = 41;
    const auto acc = simulate_ensemble<FreePathAccumulator>(
        cfg, map, plan, [&] { return FreePathAccumulator(r, 2, default_xi_edges(0.5), true); },
        [](FreePathAccumulator& a, const FreePathAccumulator& b) { a.merge(b); });
    ASSERT_EQ(acc.samples().size(), 20000u);
    EXPECT_LT(ks_distance(acc.samples(), [](double x) { return 1.0 - std::exp(-2 * x); }), 0.02);
}

TEST(EmpiricalKernel, LatticeKernelIsSymmetricAndNearTheFormula) {
    const double r = 0.005;
    const auto cfg = config_of(integer_lattice(2), r);
    const LorentzScatteringMap map{2, specular_angle()};
    SimulationPlan plan;
    plan.trajectories = 5000;
    plan.seed = 14;
    plan.stop.max_collisions = 201;
    const auto wp = uniform_edges(-1, 1, 10), xi = uniform_edges(0, 2, 20);
    const auto est = simulate_ensemble<EmpiricalKernel2D>(
        cfg, map, plan, [&] { return EmpiricalKernel2D(r, wp, xi, wp); },
        [](EmpiricalKernel2D& a, const EmpiricalKernel2D& b) { a.merge(b); });
    // a trajectory on a lattice channel can be censored before its first collision
    EXPECT_GE(est.transitions(), 4990u * 200u);
    EXPECT_LE(est.transitions(), 5000u * 200u);
    EXPECT_LT(symmetry_defect(est, 2.0), 0.05);
    EXPECT_LT(compare_kernel(est, LatticeKernel2D(1.0), 2.0).mean_l1, 0.1);
    EXPECT_TRUE(est.sparse_slices(100).empty());
}

TEST(EmpiricalKernel, PoissonKernelDoesNotDependOnLabels) {
    const double r = 0.05;
    const auto cfg = config_of(PoissonSpec{2, 1.0, 5}, r);
    const LorentzScatteringMap map{2, specular_angle()};
    SimulationPlan plan;
    plan.trajectories = 1000;
    plan.seed = 15;
    plan.stop.max_collisions = 201;
    const auto wp = uniform_edges(-1, 1, 4), xi = uniform_edges(0, 2, 10), w = uniform_edges(-1, 1, 4);
    const auto est = simulate_ensemble<EmpiricalKernel2D>(
        cfg, map, plan, [&] { return EmpiricalKernel2D(r, wp, xi, w); },
        [](EmpiricalKernel2D& a, const EmpiricalKernel2D& b) { a.merge(b); });
    EXPECT_LT(max_slice_spread(est, 2.0), 0.05);
}

TEST(CountStatistics, PoissonCountsArePoissonAtEveryR) {
    const auto cfg = config_of(PoissonSpec{2, 1.0, 1}, 0.1);
    const std::vector<Box> boxes{box2(0, 0, 2, 2), box2(-1, 1, 1, 6)};
    for (double r : {0.1, 0.01}) {
        const auto st = count_statistics(cfg, zeros(2), r, boxes, 4000, 21);
        for (std::size_t b = 0; b < boxes.size(); ++b) {
            const double vol = (boxes[b].hi - boxes[b].lo).prod();
            const auto& dist = st.per_box[b];
            EXPECT_NEAR(dist.mean, vol, 4 * std::sqrt(vol / 4000));
            EXPECT_GE(dist.variance / dist.mean, 0.95 - 4 * std::sqrt(2.0 / 4000));
            EXPECT_LE(dist.variance / dist.mean, 1.05 + 4 * std::sqrt(2.0 / 4000));
        }
    }
}

TEST(CountStatistics, LatticeIsMoreRigidThanPoisson) {
    const std::vector<Box> thin{box2(0, 0, 0.5, 20)};
    const auto lat = count_statistics(config_of(integer_lattice(2), 0.01), zeros(2), 0.01, thin, 20000, 22);
    const auto poi = count_statistics(config_of(PoissonSpec{2, 1.0, 2}, 0.01), zeros(2), 0.01, thin, 20000, 23);
    const auto& a = lat.per_box[0];
    const auto& b = poi.per_box[0];
    EXPECT_NEAR(a.mean, 10.0, 0.5);
    const double sigma = std::hypot(a.variance_stderr, b.variance_stderr);
    EXPECT_GT(std::abs(a.variance - b.variance), 3 * sigma);
}

TEST(CountStatistics, DistributionsAndTv) {
    const auto d = make_distribution({1, 1, 2, 3});
    EXPECT_DOUBLE_EQ(d.mean, 1.75);
    EXPECT_NEAR(d.variance, 0.9166666666666666, 1e-12);
    EXPECT_DOUBLE_EQ(d.pmf.at(1), 0.5);
    EXPECT_EQ(tv_distance(d, d), 0.0);
    EXPECT_DOUBLE_EQ(tv_distance(d, make_distribution({5, 6})), 1.0);
    EXPECT_DOUBLE_EQ(tv_distance(d, make_distribution({1, 2})), 0.25);
}
