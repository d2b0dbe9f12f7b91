#include "kinlim/flight.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace kinlim;

namespace {

const double ks_crit = 1.95;  // 0.1% level, times 1/sqrt(n)

double ks_bound(std::size_t n) { return ks_crit / std::sqrt(static_cast<double>(n)); }

// Linear interpolation of a tabulated increasing CDF.
struct Table {
    std::vector<double> x, F;
    double operator()(double v) const {
        if (v <= x.front()) return F.front();
        if (v >= x.back()) return F.back();
        const auto it = std::upper_bound(x.begin(), x.end(), v);
        const std::size_t i = static_cast<std::size_t>(it - x.begin()) - 1;
        const double t = (v - x[i]) / (x[i + 1] - x[i]);
        return (1 - t) * F[i] + t * F[i + 1];
    }
};

// xi-mass of the kernel for a label pair.
double pair_mass(double a, double b) {
    const auto kinks = oracle::lattice_kinks(a, b);
    std::vector<double> cuts{0.0};
    cuts.insert(cuts.end(), kinks.begin(), kinks.end());
    return oracle::simpson_pieces([&](double s) { return oracle::lattice_kernel(a, s, b); }, cuts, 200);
}

// P(xi <= x | w') for the lattice kernel, integrating over w.
double lattice_xi_cdf(double wp, double x) {
    auto inner = [&](double b) {
        std::vector<double> cuts{0.0, x};
        for (double k : oracle::lattice_kinks(wp, b))
            if (k < x) cuts.push_back(k);
        std::erase_if(cuts, [&](double c) { return c > x; });
        return oracle::simpson_pieces([&](double s) { return oracle::lattice_kernel(wp, s, b); }, cuts, 60);
    };
    return oracle::simpson_pieces(inner, {-1.0, 0.0, wp, -wp, 1.0}, 200) / 2;
}

double lattice_stationary_tail(double x) {
    auto inner = [&](double a) {
        auto cuts = oracle::corner_cuts();
        cuts.insert(cuts.end(), {a, -a});
        return oracle::simpson_pieces([&](double b) { return oracle::lattice_excess(a, x, b); }, cuts, 16) / 2;
    };
    return 2.0 * oracle::simpson_pieces(inner, oracle::corner_cuts(), 16) / 2;
}

std::vector<double> xs_of(const EnsembleSnapshot& s) {
    std::vector<double> out;
    for (const auto& st : s.states) out.push_back(st.xi_remaining);
    return out;
}

}  // namespace

TEST(PoissonSampler, ExponentialPathsAndUniformLabels) {
    for (int d : {2, 3}) {
        const PoissonKernel k(d, 1.0);
        const auto sampler = make_sampler(k);
        Rng rng(21);
        std::vector<double> xi, rad;
        const Vec prev = Vec::Zero(d - 1);
        for (int i = 0; i < 20000; ++i) {
            const auto t = sampler->sample(prev, rng);
            xi.push_back(t.xi);
            ASSERT_EQ(t.label.size(), d - 1);
            // |b|^{d-1} is uniform on [0,1] for uniform points of B^{d-1}; in d = 2 use the signed label
            rad.push_back(d == 2 ? 0.5 * (t.label(0) + 1.0) : t.label.squaredNorm());
        }
        const double xb = k.mean_free_path();
        EXPECT_LT(oracle::ks(xi, [&](double x) { return 1.0 - std::exp(-x / xb); }), ks_bound(xi.size()));
        EXPECT_LT(oracle::ks(rad, [](double x) { return x; }), ks_bound(rad.size()));
    }
}

TEST(LatticeSampler, ConditionalXiGivenBothLabels) {
    const LatticeSampler2D s{LatticeKernel2D(1.0)};
    Rng rng(22);
    for (auto [a, b] : {std::pair{-0.5, 0.5}, std::pair{0.2, 0.9}, std::pair{-0.95, 0.97}, std::pair{0.3, 0.3001}}) {
        const double total = pair_mass(a, b);
        auto F = [&](double x) {
            std::vector<double> cuts{0.0, x};
            for (double k : oracle::lattice_kinks(a, b))
                if (k < x) cuts.push_back(k);
            return oracle::simpson_pieces([&](double t) { return oracle::lattice_kernel(a, t, b); }, cuts, 200) /
                   total;
        };
        std::vector<double> xs;
        for (int i = 0; i < 5000; ++i) xs.push_back(s.sample_xi(a, b, rng));
        EXPECT_LT(oracle::ks(xs, F), ks_bound(xs.size())) << a << " " << b;
    }
}

TEST(LatticeSampler, LabelDensityMatchesXiMass) {
    const LatticeSampler2D s{LatticeKernel2D(1.0)};
    for (double a : {-0.6, 0.0, 0.8})
        for (double b : {-0.9, -0.2, 0.5, 0.95}) EXPECT_NEAR(s.label_density(a, b), pair_mass(a, b), 1e-6);
}

TEST(LatticeSampler, JointDrawHasTheXiMarginal) {
    const LatticeSampler2D s{LatticeKernel2D(1.0)};
    for (double wp : {-0.5, 0.7}) {
        Table F;
        for (double x = 0.0; x <= 6.0; x += 0.05) {
            F.x.push_back(x);
            F.F.push_back(lattice_xi_cdf(wp, x));
        }
        EXPECT_NEAR(F.F.back(), 1.0, 0.02);
        Rng rng(23);
        std::vector<double> xs, ws;
        for (int i = 0; i < 10000; ++i) {
            const auto t = s.sample(make_vec({wp}), rng);
            xs.push_back(t.xi);
            ws.push_back(t.label(0));
        }
        EXPECT_LT(oracle::ks(xs, F), ks_bound(xs.size()) + 2e-3) << wp;
        // label marginal
        Table G;
        double acc = 0.0;
        const int n = 400;
        G.x.push_back(-1.0);
        G.F.push_back(0.0);
        for (int i = 1; i <= n; ++i) {
            const double lo = -1.0 + 2.0 * (i - 1) / n, hi = -1.0 + 2.0 * i / n;
            acc += oracle::simpson([&](double u) { return pair_mass(wp, u); }, lo, hi, 4) / 2;
            G.x.push_back(hi);
            G.F.push_back(acc);
        }
        EXPECT_NEAR(acc, 1.0, 1e-3);
        EXPECT_LT(oracle::ks(ws, G), ks_bound(ws.size()) + 2e-3) << wp;
    }
}

TEST(LatticeSampler, StationaryDrawMatchesTheKMarginal) {
    const LatticeSampler2D s{LatticeKernel2D(1.0)};
    Rng rng(24);
    std::vector<double> xs;
    const int n = 40000;
    for (int i = 0; i < n; ++i) xs.push_back(s.sample_stationary(rng).xi);
    for (double x : {0.1, 0.3, 0.5, 0.8, 1.5, 3.0}) {
        const double p = lattice_stationary_tail(x);
        const double emp = std::count_if(xs.begin(), xs.end(), [&](double v) { return v > x; }) / double(n);
        EXPECT_NEAR(emp, p, 4.5 * std::sqrt(p * (1 - p) / n) + 1e-4) << x;
    }
}

TEST(FlightCollide, MatchesTheScatteringMap) {
    const LorentzScatteringMap map{2, specular_angle()};
    const Vec v = make_vec({0.6, 0.8});
    const auto fc = flight_collide(map, v, make_vec({0.4}));
    EXPECT_NEAR(fc.v_out.norm(), 1.0, 1e-15);
    const auto direct = apply_scattering(map, v, from_signed_parameter(v, 0.4));
    EXPECT_NEAR((fc.v_out - direct.v_out).norm(), 0.0, 1e-14);
    EXPECT_NEAR(fc.exit_label(0), signed_parameter(direct.v_out, direct.s), 1e-14);
}

class Ensemble : public ::testing::Test {
protected:
    LorentzScatteringMap map{2, specular_angle()};
    EnsembleOptions opts(long n, std::vector<double> times, int threads = 1) {
        EnsembleOptions o;
        o.particles = n;
        o.times = std::move(times);
        o.seed = 31;
        o.threads = threads;
        return o;
    }
};

TEST_F(Ensemble, DeterministicAcrossThreads) {
    const auto s = make_sampler(LatticeKernel2D(1.0));
    const auto a = evolve_ensemble(*s, map, opts(500, {0.0, 1.0, 2.0}, 1));
    const auto b = evolve_ensemble(*s, map, opts(500, {0.0, 1.0, 2.0}, 3));
    for (std::size_t k = 0; k < a.size(); ++k)
        for (std::size_t i = 0; i < a[k].states.size(); ++i) {
            EXPECT_EQ(a[k].states[i].Q, b[k].states[i].Q);
            EXPECT_EQ(a[k].states[i].V, b[k].states[i].V);
            EXPECT_EQ(a[k].states[i].xi_remaining, b[k].states[i].xi_remaining);
            EXPECT_EQ(a[k].states[i].jumps, b[k].states[i].jumps);
        }
}

TEST_F(Ensemble, TimeZeroIsTheInitialState) {
    const auto s = make_sampler(PoissonKernel(2, 1.0));
    auto o = opts(2000, {0.0});
    o.Q0 = make_vec({1.5, -2.0});
    const auto snaps = evolve_ensemble(*s, map, o);
    std::vector<double> ang;
    for (const auto& st : snaps[0].states) {
        EXPECT_EQ(st.Q, o.Q0);
        EXPECT_EQ(st.jumps, 0);
        EXPECT_GT(st.xi_remaining, 0.0);
        ang.push_back(std::atan2(st.V(1), st.V(0)));
    }
    EXPECT_LT(oracle::ks(ang, [](double x) { return (x + oracle::pi) / (2 * oracle::pi); }), ks_bound(ang.size()));
}

TEST_F(Ensemble, SpeedMassAndDisplacement) {
    const auto s = make_sampler(LatticeKernel2D(1.0));
    const auto snaps = evolve_ensemble(*s, map, opts(2000, {0.5, 2.0}));
    for (const auto& snap : snaps)
        for (const auto& st : snap.states) {
            EXPECT_NEAR(st.V.norm(), 1.0, 1e-12);
            // unit speed: displacement never exceeds the elapsed time
            EXPECT_LE(st.Q.norm(), snap.time + 1e-12);
            EXPECT_GT(st.xi_remaining, 0.0);
        }
    const auto proj = project_density(snaps, 3.0, 30);
    for (const auto& p : proj) {
        EXPECT_EQ(p.mass, 2000.0);
        EXPECT_NEAR(p.mean_speed, 1.0, 1e-12);
        EXPECT_LT(p.max_speed_error, 1e-12);
        double m = 0.0;
        for (std::size_t i = 0; i + 1 < p.angle_edges.size(); ++i)
            m += p.angle_density[i] * (p.angle_edges[i + 1] - p.angle_edges[i]);
        EXPECT_NEAR(m, 1.0, 1e-9);
        for (const auto& q : p.q_marginals) {
            double mq = 0.0;
            for (std::size_t i = 0; i + 1 < p.q_edges.size(); ++i) mq += q[i] * (p.q_edges[i + 1] - p.q_edges[i]);
            EXPECT_NEAR(mq, 1.0, 1e-9);
        }
    }
}

TEST_F(Ensemble, AnglesStayUniform) {
    const auto s = make_sampler(LatticeKernel2D(1.0));
    const auto snaps = evolve_ensemble(*s, map, opts(5000, {2.5}));
    std::vector<double> ang;
    for (const auto& st : snaps[0].states) ang.push_back(std::atan2(st.V(1), st.V(0)));
    EXPECT_LT(oracle::ks(ang, [](double x) { return (x + oracle::pi) / (2 * oracle::pi); }), ks_bound(ang.size()));
}

TEST_F(Ensemble, PoissonJumpCountsArePoisson) {
    const auto s = make_sampler(PoissonKernel(2, 1.0));
    const double T = 2.5;
    const auto snaps = evolve_ensemble(*s, map, opts(20000, {T}));
    double s1 = 0, s2 = 0;
    for (const auto& st : snaps[0].states) {
        s1 += st.jumps;
        s2 += double(st.jumps) * st.jumps;
    }
    const double n = snaps[0].states.size(), mean = s1 / n, var = (s2 - n * mean * mean) / (n - 1);
    EXPECT_NEAR(mean, T / 0.5, 4 * std::sqrt(5.0 / n));
    EXPECT_GE(var / mean, 0.95);
    EXPECT_LE(var / mean, 1.05);
}

TEST_F(Ensemble, PoissonRemainingPathStaysExponential) {
    const auto s = make_sampler(PoissonKernel(2, 1.0));
    const auto snaps = evolve_ensemble(*s, map, opts(10000, {0.0, 1.0, 2.5}));
    for (const auto& snap : snaps) {
        const auto xs = xs_of(snap);
        EXPECT_LT(oracle::ks(xs, [](double x) { return 1.0 - std::exp(-2 * x); }), ks_bound(xs.size())) << snap.time;
    }
}

TEST_F(Ensemble, LatticeRemainingPathStaysStationary) {
    const auto s = make_sampler(LatticeKernel2D(1.0));
    const auto snaps = evolve_ensemble(*s, map, opts(20000, {1.0, 2.5}));
    std::vector<std::pair<double, double>> tails;
    for (double x : {0.2, 0.5, 1.0, 2.0}) tails.emplace_back(x, lattice_stationary_tail(x));
    for (const auto& snap : snaps) {
        const auto xs = xs_of(snap);
        const double n = xs.size();
        for (auto [x, p] : tails) {
            const double emp = std::count_if(xs.begin(), xs.end(), [&](double v) { return v > x; }) / n;
            EXPECT_NEAR(emp, p, 4.5 * std::sqrt(p * (1 - p) / n)) << snap.time << " " << x;
        }
    }
}

TEST_F(Ensemble, FixedExitStartDiffersFromStationary) {
    const auto s = make_sampler(LatticeKernel2D(1.0));
    auto o = opts(10000, {0.0});
    o.initial = InitialLabels::FixedExit;
    o.fixed_exit = make_vec({0.9});
    const auto xs = xs_of(evolve_ensemble(*s, map, o)[0]);
    Table F;
    for (double x = 0.0; x <= 6.0; x += 0.05) {
        F.x.push_back(x);
        F.F.push_back(lattice_xi_cdf(0.9, x));
    }
    EXPECT_LT(oracle::ks(xs, F), ks_bound(xs.size()) + 2e-3);
    o.fixed_exit = make_vec({0.1, 0.2});
    EXPECT_THROW(evolve_ensemble(*s, map, o), ValidationError);
}

TEST(PathSequence, PoissonIsIndependentExponential) {
    const auto s = make_sampler(PoissonKernel(2, 1.0));
    const LorentzScatteringMap map{2, specular_angle()};
    const auto xs = flight_path_sequence(*s, map, 50000, 41);
    EXPECT_LT(oracle::ks(xs, [](double x) { return 1.0 - std::exp(-2 * x); }), ks_bound(xs.size()));
    EXPECT_LT(std::abs(oracle::lag1_autocorrelation(xs)), 3.0 / std::sqrt(double(xs.size())));
}

TEST(PathSequence, LatticePathsAreCorrelated) {
    // clipped: the lattice law has no finite variance. At 10^6 steps the clipped lag-1 value is about 0.018.
    const auto s = make_sampler(LatticeKernel2D(1.0));
    const LorentzScatteringMap map{2, specular_angle()};
    auto xs = flight_path_sequence(*s, map, 200000, 42);
    for (double& x : xs) x = std::min(x, 2.0);
    EXPECT_GT(oracle::lag1_autocorrelation(xs), 4.0 / std::sqrt(double(xs.size())));
}

TEST(Samplers, RejectionAgreesWithInversion) {
    auto k = std::make_shared<LatticeKernel2D>(1.0);
    const RejectionSampler rej(k, 1e3);
    const LatticeSampler2D inv(*k);
    Rng r1(51), r2(52);
    std::vector<double> a, b;
    for (int i = 0; i < 4000; ++i) {
        a.push_back(rej.sample(make_vec({-0.3}), r1).xi);
        b.push_back(inv.sample(make_vec({-0.3}), r2).xi);
    }
    // two-sample KS through the empirical CDF of b
    std::sort(b.begin(), b.end());
    auto Fb = [&](double x) { return double(std::upper_bound(b.begin(), b.end(), x) - b.begin()) / b.size(); };
    EXPECT_LT(oracle::ks(a, Fb), 1.95 * std::sqrt(2.0 / 4000));
}
