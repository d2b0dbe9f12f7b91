#include "kinlim/pointset.hpp"
#include "kinlim/rng.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

using namespace kinlim;

namespace {

ScattererConfig with_source(PointSource s, double r = 0.01) {
    ScattererConfig c;
    c.source = std::move(s);
    c.radius = r;
    return c;
}

Box box2(double x0, double y0, double x1, double y1) { return {make_vec({x0, y0}), make_vec({x1, y1})}; }

std::vector<std::vector<double>> as_rows(std::vector<Vec> pts) {
    sort_lexicographic(pts);
    std::vector<std::vector<double>> out;
    for (const auto& p : pts) out.emplace_back(p.data(), p.data() + p.size());
    return out;
}

}  // namespace

TEST(Pointset, IntegerLatticeSmallBox) {
    const auto rows = as_rows(points_in_box(integer_lattice(2), box2(0, 0, 2, 2)));
    const std::vector<std::vector<double>> want{{0, 0}, {0, 1}, {1, 0}, {1, 1}};
    EXPECT_EQ(rows, want);
}

TEST(Pointset, HalfOpenBoxes) {
    // hi is excluded, lo included
    EXPECT_EQ(count_in_box(with_source(integer_lattice(2)), box2(-1, -1, 1, 1)), 4u);
    EXPECT_EQ(count_in_box(with_source(integer_lattice(2)), box2(-1, -1, 1.0000001, 1.0000001)), 9u);
}

TEST(Pointset, FibonacciFormulaPoints) {
    EXPECT_EQ(fibonacci_formula_point(0), 0.0);
    EXPECT_NEAR(fibonacci_formula_point(1), 0.6498, 1e-4);
    for (long j = -50; j <= 50; ++j) EXPECT_NEAR(fibonacci_formula_point(j), oracle::fibonacci_point(j), 1e-12) << j;
}

TEST(Pointset, FibonacciSetSmallWindow) {
    const auto pts = points_in_box(fibonacci_spec(), Box{make_vec({-0.1}), make_vec({0.7})});
    ASSERT_EQ(pts.size(), 2u);
    std::vector<double> xs{pts[0][0], pts[1][0]};
    std::sort(xs.begin(), xs.end());
    EXPECT_NEAR(xs[0], 0.0, 1e-12);
    EXPECT_NEAR(xs[1], oracle::fibonacci_point(1), 1e-12);
}

TEST(Pointset, FibonacciSetIsTheFormulaSet) {
    auto pts = points_in_box(fibonacci_spec(), Box{make_vec({-200}), make_vec({200})});
    sort_lexicographic(pts);
    std::vector<double> want;
    for (long j = -600; j <= 600; ++j) {
        const double x = oracle::fibonacci_point(j);
        if (x >= -200 && x < 200) want.push_back(x);
    }
    std::sort(want.begin(), want.end());
    ASSERT_EQ(pts.size(), want.size());
    for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(pts[i][0], want[i], 1e-9);
}

TEST(Pointset, FibonacciChainHasTwoGapsInRatioTau) {
    auto pts = points_in_box(fibonacci_chain_spec(), Box{make_vec({-500}), make_vec({500})});
    sort_lexicographic(pts);
    std::vector<double> gaps;
    for (std::size_t i = 1; i < pts.size(); ++i) gaps.push_back(pts[i][0] - pts[i - 1][0]);
    std::vector<double> distinct;
    for (double g : gaps)
        if (std::none_of(distinct.begin(), distinct.end(), [&](double d) { return std::abs(d - g) < 1e-9; }))
            distinct.push_back(g);
    ASSERT_EQ(distinct.size(), 2u);
    std::sort(distinct.begin(), distinct.end());
    EXPECT_NEAR(distinct[1] / distinct[0], oracle::golden, 1e-9);
}

TEST(Pointset, WennbergContainsColumnsAndFormulaPoints) {
    const auto cfg = with_source(wennberg_spec());
    for (int k = -3; k <= 3; ++k) {
        const auto near0 = points_in_box(cfg, box2(-1e-9, k - 1e-9, 1e-9, k + 1e-9));
        EXPECT_EQ(near0.size(), 1u) << k;
    }
    const double x1 = oracle::fibonacci_point(1);
    EXPECT_EQ(points_in_box(cfg, box2(x1 - 1e-9, -1e-9, x1 + 1e-9, 1e-9)).size(), 1u);
    // density of the formula set times that of Z
    EXPECT_NEAR(source_density(wennberg_spec()), std::sqrt(1 + oracle::golden * oracle::golden), 1e-12);
}

TEST(Pointset, Densities) {
    EXPECT_DOUBLE_EQ(source_density(integer_lattice(2)), 1.0);
    EXPECT_DOUBLE_EQ(source_density(integer_lattice(3)), 1.0);
    DeloneUnionSpec u{integer_lattice(2), {make_vec({0, 0}), make_vec({0.5, 0.5}), make_vec({0.25, 0.0})}};
    EXPECT_DOUBLE_EQ(u.density(), 3.0);
    // honeycomb: two points per hexagonal cell of area sqrt(3)/2
    EXPECT_NEAR(honeycomb_spec().density(), 4.0 / std::sqrt(3.0), 1e-12);
    const double s = std::sqrt(1 + oracle::golden * oracle::golden);
    EXPECT_NEAR(fibonacci_chain_spec().density(), oracle::golden * oracle::golden / s, 1e-12);
}

TEST(Pointset, LatticeDensityIsOneForAnyBoxShape) {
    const auto cfg = with_source(integer_lattice(2));
    const auto d = estimate_density(cfg, {10, 100, 1000}, box2(-1, -0.5, 1, 0.5));
    for (double x : d) EXPECT_NEAR(x, 1.0, 0.1);
    EXPECT_NEAR(d.back(), 1.0, 1e-3);
}

TEST(Pointset, FibonacciChainDensityConverges) {
    const auto cfg = with_source(fibonacci_chain_spec());
    const auto d = estimate_density(cfg, {10, 100, 1000, 10000}, Box{make_vec({-1}), make_vec({1})});
    const double n = fibonacci_chain_spec().density();
    EXPECT_LT(std::abs(d.back() - n), 0.005 * n);
    EXPECT_LT(std::abs(d.back() - n), std::abs(d.front() - n) + 1e-12);
}

TEST(Pointset, CutProjectDensityMatchesCount) {
    // union of two translates as a cut-and-project set with a finite window
    DeloneUnionSpec u{integer_lattice(2), {make_vec({0, 0}), make_vec({0.5, 0.5})}};
    const CutProjectSpec cp = u.as_cut_project();
    const auto a = as_rows(points_in_box(u, box2(-5, -5, 5, 5)));
    const auto b = as_rows(points_in_box(cp, box2(-5, -5, 5, 5)));
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(a[i][k], b[i][k], 1e-12);
    EXPECT_DOUBLE_EQ(cp.density(), 2.0);
}

TEST(Pointset, MinGap) {
    EXPECT_DOUBLE_EQ(min_gap(with_source(integer_lattice(2)), box2(0, 0, 4, 4)), 1.0);
    DeloneUnionSpec u{integer_lattice(2), {make_vec({0, 0}), make_vec({0.5, 0.5})}};
    EXPECT_NEAR(min_gap(with_source(u), box2(-3, -3, 3, 3)), std::sqrt(2.0) / 2, 1e-12);
}

TEST(Pointset, JitteredMinGapMatchesPairScan) {
    auto cfg = with_source(integer_lattice(2), 0.1);
    cfg.jitter = JitterSpec{0.5, 99};
    const Box box = box2(-6, -6, 6, 6);
    const auto pts = points_in_box(cfg, box);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) best = std::min(best, (pts[i] - pts[j]).norm());
    EXPECT_DOUBLE_EQ(min_gap(pts), best);
    EXPECT_LT(best, 1.0);
    // displacement stays within r * amplitude
    for (const auto& p : pts) {
        const Vec base = p.array().round().matrix();
        EXPECT_LE((p - base).norm(), 0.1 * 0.5 + 1e-12);
    }
}

TEST(Pointset, DisjointBoxesPartitionTheEnumeration) {
    std::vector<ScattererConfig> configs{with_source(integer_lattice(2)), with_source(honeycomb_spec()),
                                         with_source(wennberg_spec()), with_source(PoissonSpec{2, 1.0, 5})};
    auto jit = with_source(integer_lattice(2), 0.1);
    jit.jitter = JitterSpec{0.5, 3};
    configs.push_back(jit);
    for (const auto& c : configs) {
        const auto whole = as_rows(points_in_box(c, box2(-7.3, -4.1, 6.2, 5.5)));
        auto left = points_in_box(c, box2(-7.3, -4.1, 0.37, 5.5));
        const auto right = points_in_box(c, box2(0.37, -4.1, 6.2, 5.5));
        left.insert(left.end(), right.begin(), right.end());
        EXPECT_EQ(whole, as_rows(left));
    }
}

TEST(Pointset, EnumerationIsDeterministic) {
    const PoissonSpec p{2, 1.0, 17};
    EXPECT_EQ(as_rows(points_in_box(p, box2(-10, -10, 10, 10))), as_rows(points_in_box(p, box2(-10, -10, 10, 10))));
    EXPECT_NE(as_rows(points_in_box(p, box2(-10, -10, 10, 10))),
              as_rows(points_in_box(PoissonSpec{2, 1.0, 18}, box2(-10, -10, 10, 10))));
}

TEST(Pointset, PoissonCountsArePoisson) {
    // box of volume 100 over 10^4 realizations
    const int n = 10000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double c = static_cast<double>(
            count_in_box(with_source(PoissonSpec{2, 1.0, derive_seed(4, i)}), box2(0.3, 0.1, 10.3, 10.1)));
        s += c;
        s2 += c * c;
    }
    const double mean = s / n, var = (s2 - n * mean * mean) / (n - 1);
    EXPECT_NEAR(mean, 100.0, 4.0 * std::sqrt(100.0 / n));
    EXPECT_GE(var / mean, 0.95);
    EXPECT_LE(var / mean, 1.05);
}

TEST(Pointset, PoissonDisjointBoxesAreUncorrelated) {
    const int n = 5000;
    double sa = 0, sb = 0, sab = 0;
    for (int i = 0; i < n; ++i) {
        const auto c = with_source(PoissonSpec{2, 1.0, derive_seed(9, i)});
        const double a = static_cast<double>(count_in_box(c, box2(0, 0, 3, 3)));
        const double b = static_cast<double>(count_in_box(c, box2(3, 0, 6, 3)));
        sa += a;
        sb += b;
        sab += a * b;
    }
    const double cov = sab / n - (sa / n) * (sb / n);
    // sd of the covariance estimate is about 9 / sqrt(n)
    EXPECT_LT(std::abs(cov), 4.0 * 9.0 / std::sqrt(double(n)));
}

TEST(Pointset, ValidationErrors) {
    LatticeSpec bad{Mat::Zero(2, 2)};
    EXPECT_THROW(bad.validate(), ValidationError);
    EXPECT_THROW(validate_non_overlap(with_source(integer_lattice(2), 0.6), box2(-2, -2, 2, 2)), ValidationError);
    EXPECT_NO_THROW(validate_non_overlap(with_source(integer_lattice(2), 0.4), box2(-2, -2, 2, 2)));
    EXPECT_NO_THROW(validate_non_overlap(with_source(PoissonSpec{2, 1.0, 1}, 0.6), box2(-2, -2, 2, 2)));
    EXPECT_THROW(points_in_box(integer_lattice(2), Box{make_vec({0}), make_vec({1})}), ValidationError);
    EXPECT_THROW((PoissonSpec{2, -1.0, 0}.validate()), ValidationError);
}
