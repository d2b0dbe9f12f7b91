#include "kinlim/config_io.hpp"
#include "kinlim/microdyn.hpp"
#include "kinlim/simulate.hpp"
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

ScatteringModel specular(int d) { return LorentzScatteringMap{d, specular_angle()}; }

ParticleState state(std::initializer_list<double> q, std::initializer_list<double> v) {
    return {make_vec(q), make_vec(v)};
}

}  // namespace

TEST(FirstCollision, RayBetweenColumnsIsCensored) {
    const auto c = config_of(integer_lattice(2), 0.1);
    const auto hit = first_collision(c, state({0.5, 0.2}, {0, 1}), 1e4);
    EXPECT_TRUE(hit.censored);
}

TEST(FirstCollision, QuadraticSolve) {
    const auto c = config_of(integer_lattice(2), 0.1);
    const auto hit = first_collision(c, state({-0.5, 0.05}, {1, 0}), 100);
    ASSERT_FALSE(hit.censored);
    EXPECT_NEAR(hit.t, oracle::ray_circle(-0.5, 0.05, 1, 0, 0, 0, 0.1), 1e-14);
    EXPECT_NEAR(hit.t, 0.5 - std::sqrt(0.0075), 1e-14);
    EXPECT_NEAR(hit.center.norm(), 0.0, 1e-15);
    // impact vector in units of r, orthogonal to v
    EXPECT_NEAR(hit.impact[0], 0.0, 1e-14);
    EXPECT_NEAR(hit.impact[1], 0.5, 1e-13);
}

TEST(FirstCollision, KickedSlab) {
    ScattererConfig c = config_of(integer_lattice(2), 0.1);
    c.geometry = Geometry::Slab;
    CollisionFinder f(c, KickPotential{});
    const Hit h = f.first_hit(make_vec({0.3, 0.0}), make_vec({1.0, 0.0}), 10.0);
    ASSERT_TRUE(h.found);
    EXPECT_NEAR(h.t, 0.7, 1e-14);
    EXPECT_NEAR((h.center - make_vec({1.0, 0.0})).norm(), 0.0, 1e-15);
    // a momentum that keeps |q_1 - round(q_1)| > r/2 at every integer time never collides
    const Hit miss = f.first_hit(make_vec({0.3, 0.3}), make_vec({1.0, 0.0}), 50.0);
    EXPECT_FALSE(miss.found);
}

TEST(FirstCollision, AgreesWithBruteForceOnEveryKind) {
    std::vector<ScattererConfig> configs{config_of(integer_lattice(2), 0.05), config_of(integer_lattice(3), 0.1),
                                         config_of(PoissonSpec{2, 1.0, 7}, 0.05),
                                         config_of(PoissonSpec{3, 1.0, 8}, 0.1), config_of(honeycomb_spec(), 0.05),
                                         config_of(wennberg_spec(), 0.04)};
    auto jit = config_of(integer_lattice(2), 0.05);
    jit.jitter = JitterSpec{0.5, 21};
    configs.push_back(jit);
    DeloneUnionSpec u{integer_lattice(2), {make_vec({0, 0}), make_vec({0.5, 0.5})}};
    configs.push_back(config_of(u, 0.05));
    Rng rng(1234);
    int hits = 0;
    for (const auto& c : configs) {
        CollisionFinder f(c);
        const int d = c.dim();
        auto outside = [&](const Vec& q) {
            for (const auto& y : points_in_box(c, Box{q.array() - 1.0, q.array() + 1.0}))
                if ((y - q).norm() <= c.radius) return false;
            return true;
        };
        auto start = [&] {
            for (;;) {
                const Vec q = 6.0 * random_in_ball(d, rng);
                if (outside(q)) return q;
            }
        };
        for (int i = 0; i < 1000; ++i) {
            const Vec q = start();
            const Vec v = random_unit_vector(d, rng);
            const Hit fast = f.first_hit(q, v, 30.0);
            const Hit slow = f.brute_force(q, v, 30.0);
            ASSERT_EQ(fast.found, slow.found) << i;
            if (!fast.found) continue;
            ++hits;
            EXPECT_NEAR(fast.t, slow.t, 1e-10);
            EXPECT_NEAR((fast.center - slow.center).norm(), 0.0, 1e-10);
        }
        // the generic grid must give the same answers as the fast paths
        f.force_grid(true);
        for (int i = 0; i < 200; ++i) {
            const Vec q = start();
            const Vec v = random_unit_vector(d, rng);
            const Hit g = f.first_hit(q, v, 30.0);
            const Hit slow = f.brute_force(q, v, 30.0);
            ASSERT_EQ(g.found, slow.found);
            if (g.found) EXPECT_NEAR(g.t, slow.t, 1e-10);
        }
    }
    EXPECT_GT(hits, 4000);
}

TEST(Trajectory, SpeedConservedOverManyCollisions) {
    const auto c = config_of(integer_lattice(2), 0.05);
    StopCriterion stop;
    stop.max_collisions = 10000;
    stop.L_max = 1e6;
    const auto rec = run_trajectory(c, specular(2), stop, 42);
    ASSERT_EQ(rec.collisions, 10000);
    double worst = 0.0;
    for (const auto& e : rec.events) worst = std::max(worst, std::abs(e.v_out.norm() - 1.0));
    EXPECT_LT(worst, 1e-9);
}

TEST(Trajectory, EventInvariants) {
    for (const char* name : {"z2", "poisson2", "z3", "honeycomb"}) {
        auto setup = preset_config(name);
        setup.config.radius = 0.05;
        StopCriterion stop;
        stop.max_collisions = 300;
        const auto rec = run_trajectory(setup.config, setup.model, stop, 3);
        Vec q = rec.initial.q, v = rec.initial.v;
        double t = 0.0;
        for (const auto& e : rec.events) {
            EXPECT_GT(e.free_path, 0.0);
            EXPECT_LT(e.impact.norm(), 1.0);
            EXPECT_NEAR(e.exit.norm(), e.impact.norm(), 1e-9);
            // q continuity
            EXPECT_NEAR((q + e.free_path * v - e.position).norm(), 0.0, 1e-8 * (1 + e.position.norm())) << name;
            EXPECT_NEAR((e.position - e.center).norm(), setup.config.radius, 1e-9) << name;
            t += e.free_path;
            EXPECT_NEAR(e.time, t, 1e-9 * t);
            q = e.position;
            v = e.v_out;
        }
    }
}

TEST(Trajectory, SingleScattererHeadOn) {
    // spacing 10^6 leaves one scatterer in reach
    LatticeSpec far{1e6 * Mat::Identity(2, 2)};
    const auto c = config_of(far, 0.1);
    StopCriterion stop;
    stop.max_collisions = 5;
    stop.L_max = 1e3;
    const auto rec = run_trajectory(c, specular(2), state({-1, 0}, {1, 0}), stop);
    EXPECT_EQ(rec.collisions, 1);
    EXPECT_EQ(rec.reason, Termination::Censored);
    ASSERT_EQ(rec.events.size(), 1u);
    EXPECT_NEAR((rec.events[0].v_out + unit(2, 0)).norm(), 0.0, 1e-15);
    EXPECT_NEAR(rec.events[0].free_path, 0.9, 1e-15);
}

TEST(Trajectory, TimeReversalRetracesScatterers) {
    const auto c = config_of(integer_lattice(2), 0.1);
    StopCriterion stop;
    stop.max_collisions = 8;
    const auto fwd = run_trajectory(c, specular(2), stop, 77);
    ASSERT_EQ(fwd.events.size(), 8u);
    const auto& last = fwd.events.back();
    // reversed state just before the last collision
    const ParticleState back{last.position, -last.v_in};
    StopCriterion stop2;
    stop2.max_collisions = 7;
    const auto rev = run_trajectory(c, specular(2), back, stop2);
    ASSERT_EQ(rev.events.size(), 7u);
    for (int i = 0; i < 7; ++i)
        EXPECT_NEAR((rev.events[i].center - fwd.events[6 - i].center).norm(), 0.0, 1e-9) << i;
}

TEST(Trajectory, PoissonCollisionRate) {
    // collisions in time T average T n sigma r^{d-1}
    const auto c = config_of(PoissonSpec{2, 1.0, 5}, 0.01);
    SimulationPlan plan;
    plan.trajectories = 50;
    plan.seed = 9;
    plan.stop.max_collisions = 1000000;
    plan.stop.max_time = 1e4;
    const auto all = simulate_ensemble<RecordCollector>(c, specular(2), plan, [] { return RecordCollector{}; },
                                                        [](RecordCollector& a, const RecordCollector& b) { a.merge(b); });
    double n = 0;
    for (const auto& r : all.records) n += static_cast<double>(r.collisions);
    const double expected = 50 * 1e4 * 2 * 0.01;
    EXPECT_NEAR(n, expected, 4 * std::sqrt(expected));
}

TEST(Trajectory, KickedMomentumZeroIsConstant) {
    auto setup = preset_config("kicked2");
    setup.config.radius = 0.05;
    StopCriterion stop;
    stop.max_collisions = 200;
    const auto rec = run_trajectory(setup.config, setup.model, stop, 8);
    ASSERT_GT(rec.events.size(), 10u);
    for (const auto& e : rec.events) {
        EXPECT_EQ(e.v_out[0], 1.0);
        EXPECT_LT(std::abs(e.impact[0]), 0.5 + 1e-12);
        // kicks happen at integer q_0
        EXPECT_NEAR(e.position[0], std::round(e.position[0]), 1e-9);
    }
}

TEST(Trajectory, DeterministicFromSeed) {
    const auto c = config_of(PoissonSpec{2, 1.0, 2}, 0.05);
    StopCriterion stop;
    stop.max_collisions = 50;
    const auto a = run_trajectory(c, specular(2), stop, 10);
    const auto b = run_trajectory(c, specular(2), stop, 10);
    ASSERT_EQ(a.events.size(), b.events.size());
    for (std::size_t i = 0; i < a.events.size(); ++i) EXPECT_EQ(a.events[i].position, b.events[i].position);
}

TEST(Trajectory, StopCriteria) {
    const auto c = config_of(integer_lattice(2), 0.05);
    StopCriterion stop;
    stop.max_collisions = 1000;
    stop.max_time = 50.0;
    const auto rec = run_trajectory(c, specular(2), stop, 4);
    EXPECT_EQ(rec.reason, Termination::TimeReached);
    EXPECT_NEAR(rec.final_time, 50.0, 1e-12);
    stop.max_time = std::numeric_limits<double>::infinity();
    stop.escape_box = Box::cube(2, 20.0);
    const auto esc = run_trajectory(c, specular(2), stop, 4);
    EXPECT_EQ(esc.reason, Termination::EscapedBox);
}

TEST(Rescale, UnitMacroscopicPath) {
    TrajectoryRecord rec;
    CollisionEvent e;
    e.free_path = e.flight_time = e.time = 1.0 / 0.01;
    rec.events.push_back(e);
    const auto m = macroscopic_rescale(rec, 0.01, 2);
    EXPECT_NEAR(m.events[0].flight_time, 1.0, 1e-15);
    // 100 = 1/r^2 at r = 0.1
    const auto m3 = macroscopic_rescale(rec, 0.1, 3);
    EXPECT_NEAR(m3.events[0].flight_time, 1.0, 1e-14);
}

TEST(Rescale, MeanMacroscopicPathIsHalf) {
    const auto c = config_of(integer_lattice(2), 0.01);
    StopCriterion stop;
    stop.max_collisions = 2000;
    double s = 0, s2 = 0;
    long n = 0;
    for (int k = 0; k < 20; ++k) {
        const auto rec = macroscopic_rescale(run_trajectory(c, specular(2), stop, 100 + k), 0.01, 2);
        for (std::size_t i = 1; i < rec.events.size(); ++i) {
            s += rec.events[i].flight_time;
            s2 += rec.events[i].flight_time * rec.events[i].flight_time;
            ++n;
        }
    }
    const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
    EXPECT_NEAR(mean, 0.5, 4 * se + 0.002);
}

TEST(Renormalized, ImageOfYAndInverse) {
    Rng rng(2);
    for (int d : {2, 3}) {
        const Vec wp = 0.9 * random_in_ball(d - 1, rng);
        RenormalizedProcess p(config_of(integer_lattice(d), 0.01), zeros(d), wp, 0.01, specular(d));
        const Vec img = p.map(zeros(d));
        EXPECT_NEAR(img[0], 0.0, 1e-15);
        for (int i = 1; i < d; ++i) EXPECT_NEAR(img[i], -wp[i - 1], 1e-12);
        for (int k = 0; k < 20; ++k) {
            const Vec x = 10 * random_in_ball(d, rng);
            EXPECT_NEAR((p.unmap(p.map(x)) - x).norm(), 0.0, 1e-9);
        }
    }
}

TEST(Renormalized, VolumePreserving) {
    Rng rng(6);
    for (int d : {2, 3}) {
        const Vec wp = 0.5 * random_in_ball(d - 1, rng);
        RenormalizedProcess p(config_of(integer_lattice(d), 0.05), zeros(d), wp, 0.05, specular(d));
        Mat J(d, d);
        const Vec base = p.map(zeros(d));
        for (int j = 0; j < d; ++j) J.col(j) = p.map(unit(d, j)) - base;
        EXPECT_NEAR(std::abs(J.determinant()), 1.0, 1e-10);
    }
}

TEST(Renormalized, PathAlongOutgoingVelocityScalesByR) {
    // x = (xi / r^{d-1}) v_out maps to first coordinate xi
    const int d = 2;
    const double r = 0.01;
    const Vec wp = make_vec({0.3});
    RenormalizedProcess p(config_of(integer_lattice(d), r), zeros(d), wp, r, specular(d));
    const Vec a = p.map(zeros(d));
    // the direction with the largest first-coordinate gain is the flight direction
    double best = 0.0;
    for (int k = 0; k < 3600; ++k) {
        const double ang = 2 * oracle::pi * k / 3600;
        const Vec x = (1.0 / r) * make_vec({std::cos(ang), std::sin(ang)});
        best = std::max(best, p.map(x)[0] - a[0]);
    }
    EXPECT_NEAR(best, 1.0, 1e-5);
}

TEST(MeanFreePath, Formulas) {
    EXPECT_NEAR(expected_mean_free_path(2, 1.0, 0.01), (1 - oracle::pi * 1e-4) / 0.02, 1e-12);
    EXPECT_NEAR(expected_mean_free_path(2, 1.0, 0.01), 49.984, 1e-3);
    const auto kicked = preset_config("kicked2");
    auto c = kicked.config;
    c.radius = 0.01;
    const auto res = mean_collision_time_check(c, std::get<KickPotential>(kicked.model), make_vec({0.6180339887498949}),
                                               DomainShape::Ball, 2e4, 2000, 1);
    EXPECT_NEAR(res.expected, 100.0, 1e-9);
}

TEST(MeanFreePath, ShapesAgreeAtSmallScale) {
    const auto c = config_of(integer_lattice(2), 0.05);
    const auto ball = mean_free_path_check(c, DomainShape::Ball, 2e3, 20000, 1);
    const auto sq = mean_free_path_check(c, DomainShape::Square, 2e3, 20000, 2);
    const double want = expected_mean_free_path(2, 1.0, 0.05);
    EXPECT_NEAR(ball.mean, want, 4 * ball.stderr_ + 0.01 * want);
    EXPECT_NEAR(sq.mean, want, 4 * sq.stderr_ + 0.01 * want);
    EXPECT_LT(std::abs(ball.mean - sq.mean), 4 * std::hypot(ball.stderr_, sq.stderr_));
}

TEST(FlightCap, DefaultIsThousandMeanPaths) {
    const auto c = config_of(integer_lattice(2), 0.01);
    EXPECT_NEAR(default_flight_cap(c, specular(2)), 1e3 * 0.5 / 0.01, 1e-6);
}
