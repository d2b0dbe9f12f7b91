#include "kinlim/kernels.hpp"

#include "kinlim/quadrature.hpp"
#include "kinlim/scatter.hpp"

#include <boost/math/special_functions/zeta.hpp>

#include <algorithm>
#include <cmath>

namespace kinlim {

namespace {

QuadOptions inner_opts() { return {1e-12, 1e-15, 20}; }
QuadOptions middle_opts() { return {1e-10, 1e-14, 44}; }
QuadOptions outer_opts() { return {1e-9, 1e-13, 44}; }

void check_xi(double xi) {
    if (!(xi >= 0.0)) throw ValidationError("xi must be >= 0");
}

std::vector<double> merged(std::vector<double> a, const std::vector<double>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

}  // namespace

double mean_free_path(double density, double sigma_bar) {
    if (!(density > 0.0 && sigma_bar > 0.0)) throw ValidationError("density and cross section must be positive");
    return 1.0 / (density * sigma_bar);
}

double poisson_kernel(double xi, double xi_bar) {
    check_xi(xi);
    if (!(xi_bar > 0.0)) throw ValidationError("mean free path must be positive");
    return std::exp(-xi / xi_bar) / xi_bar;
}

double riemann_zeta(int d) {
    if (d < 2) throw ValidationError("zeta(d) needs d >= 2");
    if (d == 2) return kPi * kPi / 6.0;
    return boost::math::zeta(static_cast<double>(d));
}

KernelBounds kernel_bounds(int d, double xi, double xi_bar) {
    check_xi(xi);
    if (!(xi_bar > 0.0)) throw ValidationError("mean free path must be positive");
    const double z = riemann_zeta(d);
    const double upper = 1.0 / (z * xi_bar);
    const double lower = std::max(0.0, (1.0 - std::ldexp(1.0, d - 1) * xi / xi_bar) / (z * xi_bar));
    return {lower, upper};
}

double tail_constant(int d, double density) {
    if (d < 2) throw ValidationError("tail constant needs d >= 2");
    if (!(density > 0.0)) throw ValidationError("density must be positive");
    return std::ldexp(1.0, 2 - d) / (d * (d + 1.0) * density * density * riemann_zeta(d));
}

double TransitionKernel::total_cross_section() const { return kinlim::total_cross_section(dim()); }

double TransitionKernel::mean_free_path() const { return kinlim::mean_free_path(density(), total_cross_section()); }

std::vector<double> TransitionKernel::xi_breaks(const Vec&, const Vec&) const { return {}; }

double TransitionKernel::support_end(const Vec&, const Vec&) const { return std::numeric_limits<double>::infinity(); }

std::vector<double> TransitionKernel::label_breaks(double, double) const { return {}; }

PoissonKernel::PoissonKernel(int d, double density) : d_(d), density_(density) {
    if (d < 2 || d > kMaxDim) throw ValidationError("dimension out of range");
    if (!(density > 0.0)) throw ValidationError("density must be positive");
}

double PoissonKernel::k(const Vec&, double xi, const Vec&) const { return poisson_kernel(xi, mean_free_path()); }

double PoissonKernel::sup() const { return 1.0 / mean_free_path(); }

std::unique_ptr<TransitionKernel> make_kernel(const std::string& kind, int d, double density) {
    if (kind == "poisson") return std::make_unique<PoissonKernel>(d, density);
    if (kind == "lattice2d") {
        if (d != 2) throw ValidationError("lattice2d kernel exists only for d = 2");
        return std::make_unique<LatticeKernel2D>(density);
    }
    throw ValidationError("unknown kernel kind: " + kind);
}

namespace {

// Integral of f over the ball of radius rad in R^m (unnormalized); breaks apply to the first axis when m = 1.
double ball_integral(int m, double rad, const std::function<double(const Vec&)>& f, const std::vector<double>& breaks,
                     const QuadOptions& opts) {
    if (m == 1) {
        Vec u(1);
        return integrate([&](double x) { u(0) = x; return f(u); }, -rad, rad, breaks, opts);
    }
    if (m == 2) {
        QuadOptions inner = opts;
        inner.rel_tol *= 0.1;
        auto radial = [&](double rho) {
            Vec u(2);
            const double a = integrate(
                [&](double phi) { u(0) = rho * std::cos(phi); u(1) = rho * std::sin(phi); return f(u); }, 0.0,
                2.0 * kPi, {kPi}, inner);
            return rho * a;
        };
        return integrate(radial, 0.0, rad, {}, opts);
    }
    QuadOptions inner = opts;
    inner.rel_tol *= 0.1;
    auto slice = [&](double x) {
        const double sub = std::sqrt(std::max(0.0, rad * rad - x * x));
        if (sub == 0.0) return 0.0;
        return ball_integral(m - 1, sub, [&](const Vec& y) {
            Vec u(m);
            u(0) = x;
            u.tail(m - 1) = y;
            return f(u);
        }, {}, inner);
    };
    return integrate(slice, -rad, rad, {0.0}, opts);
}

double labels_mean(const TransitionKernel& kernel, const std::function<double(const Vec&)>& f,
                   const std::vector<double>& breaks, const QuadOptions& opts) {
    const int m = kernel.label_dim();
    return ball_integral(m, 1.0, f, breaks, opts) / unit_ball_volume(m);
}

std::vector<double> label_breaks_for(const TransitionKernel& kernel, const Vec& other, double xi) {
    if (kernel.label_dim() != 1) return {};
    return kernel.label_breaks(other(0), xi);
}

// Breaks for the outer label: at large xi only pairs near opposite corners contribute.
std::vector<double> outer_breaks(const TransitionKernel& kernel, double xi) {
    if (kernel.label_dim() != 1) return {0.0};
    const double edge = std::nextafter(1.0, 0.0);
    return merged(merged({0.0}, kernel.label_breaks(edge, xi)), kernel.label_breaks(-edge, xi));
}

// Kinks of the xi-integrated kernel as a function of one label.
std::vector<double> label_kinks(const TransitionKernel& kernel, const Vec& other) {
    if (kernel.label_dim() != 1) return {};
    const double a = other(0);
    return {-std::abs(a), 0.0, std::abs(a), a};
}

// Integral over [lo, hi] in xi; long pieces away from zero are done in log xi.
double xi_integral(const std::function<double(double)>& f, double lo, double hi, std::vector<double> breaks,
                   const QuadOptions& opts) {
    std::erase_if(breaks, [&](double x) { return !(x > lo && x < hi); });
    std::sort(breaks.begin(), breaks.end());
    std::vector<double> nodes{lo};
    nodes.insert(nodes.end(), breaks.begin(), breaks.end());
    nodes.push_back(hi);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
        const double a = nodes[i], b = nodes[i + 1];
        if (!(b > a)) continue;
        if (a > 0.0 && b > 4.0 * a) {
            auto g = [&](double u) {
                const double x = std::exp(u);
                const double v = f(x);
                return v == 0.0 ? 0.0 : v * x;
            };
            total += integrate(g, std::log(a), std::isinf(b) ? b : std::log(b), {}, opts);
        } else {
            total += integrate(f, a, b, {}, opts);
        }
    }
    return total;
}

double xi_tail_opts(const TransitionKernel& kernel, const Vec& w_prime, double xi, const Vec& w,
                    const QuadOptions& opts) {
    if (auto exact = kernel.xi_tail_exact(w_prime, xi, w)) return *exact;
    const double end = kernel.support_end(w_prime, w);
    if (xi >= end) return 0.0;
    return xi_integral([&](double s) { return kernel.k(w_prime, s, w); }, xi, end, kernel.xi_breaks(w_prime, w), opts);
}

double xi_moment_opts(const TransitionKernel& kernel, const Vec& w_prime, int order, double xi_max, const Vec& w,
                      const QuadOptions& opts) {
    if (auto exact = kernel.xi_moment_exact(w_prime, order, xi_max, w)) return *exact;
    const double end = std::min(xi_max, kernel.support_end(w_prime, w));
    if (!(end > 0.0)) return 0.0;
    return xi_integral([&](double s) { return std::pow(s, order) * kernel.k(w_prime, s, w); }, 0.0, end,
                       kernel.xi_breaks(w_prime, w), opts);
}

}  // namespace

double integrate_labels(const TransitionKernel& kernel, const std::function<double(const Vec&)>& f,
                        const std::vector<double>& breaks) {
    return labels_mean(kernel, f, breaks, outer_opts());
}

double xi_tail(const TransitionKernel& kernel, const Vec& w_prime, double xi, const Vec& w) {
    check_xi(xi);
    const double end = kernel.support_end(w_prime, w);
    if (xi >= end) return 0.0;
    return xi_integral([&](double s) { return kernel.k(w_prime, s, w); }, xi, end, kernel.xi_breaks(w_prime, w),
                       inner_opts());
}

double K_of(const TransitionKernel& kernel, double xi, const Vec& w) {
    check_xi(xi);
    const double xi_bar = kernel.mean_free_path();
    const auto breaks = merged(label_breaks_for(kernel, w, xi), label_kinks(kernel, w));
    const double mass = labels_mean(
        kernel, [&](const Vec& wp) { return xi_tail_opts(kernel, wp, xi, w, inner_opts()); }, breaks, middle_opts());
    return mass / xi_bar;
}

double phi0_of(const TransitionKernel& kernel, double xi) {
    check_xi(xi);
    auto inner = [&](const Vec& wp) {
        return labels_mean(kernel, [&](const Vec& w) { return kernel.k(wp, xi, w); }, label_breaks_for(kernel, wp, xi),
                           middle_opts());
    };
    return labels_mean(kernel, inner, outer_breaks(kernel, xi), outer_opts());
}

double phi0_tail(const TransitionKernel& kernel, double xi) {
    check_xi(xi);
    auto inner = [&](const Vec& wp) {
        const auto breaks = merged(label_breaks_for(kernel, wp, xi), label_kinks(kernel, wp));
        return labels_mean(
            kernel, [&](const Vec& w) { return xi_tail_opts(kernel, wp, xi, w, inner_opts()); }, breaks,
            middle_opts());
    };
    return labels_mean(kernel, inner, outer_breaks(kernel, xi), outer_opts());
}

double K_marginal_tail(const TransitionKernel& kernel, double xi) {
    check_xi(xi);
    const double inf = std::numeric_limits<double>::infinity();
    // int_xi^inf (s - xi) k ds = (M1(inf) - M1(xi)) - xi G(xi), per label pair.
    auto pair = [&](const Vec& wp, const Vec& w) {
        if (auto e = kernel.xi_excess_exact(wp, xi, w)) return *e;
        const double m1 = xi_moment_opts(kernel, wp, 1, inf, w, inner_opts()) -
                          xi_moment_opts(kernel, wp, 1, xi, w, inner_opts());
        return std::max(0.0, m1 - xi * xi_tail_opts(kernel, wp, xi, w, inner_opts()));
    };
    auto inner = [&](const Vec& wp) {
        const auto breaks = merged(label_breaks_for(kernel, wp, xi), label_kinks(kernel, wp));
        return labels_mean(kernel, [&](const Vec& w) { return pair(wp, w); }, breaks, middle_opts());
    };
    // The excess has a log singularity in w' at the corners |w - w'| -> 2; absolute accuracy is what CDFs need.
    QuadOptions outer = outer_opts();
    outer.abs_tol = 1e-10;
    return labels_mean(kernel, inner, outer_breaks(kernel, xi), outer) / kernel.mean_free_path();
}

double phi0_moment(const TransitionKernel& kernel, int order, double xi_max) {
    if (order < 0) throw ValidationError("moment order must be >= 0");
    if (!(xi_max > 0.0)) throw ValidationError("upper limit must be positive");
    auto inner = [&](const Vec& wp) {
        auto breaks = label_kinks(kernel, wp);
        if (std::isfinite(xi_max)) breaks = merged(breaks, label_breaks_for(kernel, wp, xi_max));
        return labels_mean(
            kernel, [&](const Vec& w) { return xi_moment_opts(kernel, wp, order, xi_max, w, inner_opts()); }, breaks,
            middle_opts());
    };
    return labels_mean(kernel, inner, {0.0}, outer_opts());
}

double kernel_normalization(const TransitionKernel& kernel) { return phi0_moment(kernel, 0); }

double K_normalization(const TransitionKernel& kernel) { return phi0_moment(kernel, 1) / kernel.mean_free_path(); }

double stationarity_residual(const TransitionKernel& kernel, const StationarityGrid& grid) {
    if (grid.n_xi < 1 || grid.n_w < 1 || !(grid.step > 0.0) || !(grid.xi_max_over_mean > 0.0))
        throw ValidationError("invalid stationarity grid");
    const int m = kernel.label_dim();
    const double xi_bar = kernel.mean_free_path();
    const double h = grid.step * xi_bar;
    const double dxi = grid.xi_max_over_mean * xi_bar / grid.n_xi;
    if (dxi < 2.0 * h) throw ValidationError("difference step too large for the grid");

    // K(0, .) tabulated along the first label axis and interpolated linearly; the analytic kernels
    // are invariant under rotations of the label ball, so this covers all of it when m > 1.
    const int n_tab = 257;
    std::vector<double> k0(n_tab);
    for (int i = 0; i < n_tab; ++i) {
        Vec u = Vec::Zero(m);
        u(0) = -1.0 + 2.0 * (i + 0.5) / n_tab;
        k0[i] = K_of(kernel, 0.0, u);
    }
    auto k0_at = [&](const Vec& u) {
        const double rho = m == 1 ? u(0) : u.norm();
        const double x = (rho + 1.0) * n_tab / 2.0 - 0.5;
        const double c = std::clamp(x, 0.0, n_tab - 1.0);
        const int i = std::min(static_cast<int>(c), n_tab - 2);
        const double t = c - i;
        return (1.0 - t) * k0[i] + t * k0[i + 1];
    };

    double worst = 0.0;
    for (int j = 0; j < grid.n_w; ++j) {
        Vec w = Vec::Zero(m);
        w(0) = -1.0 + 2.0 * (j + 0.5) / grid.n_w;
        for (int i = 1; i <= grid.n_xi; ++i) {
            const double xi = i * dxi;
            const double d = (-K_of(kernel, xi + 2 * h, w) + 8.0 * K_of(kernel, xi + h, w) -
                              8.0 * K_of(kernel, xi - h, w) + K_of(kernel, xi - 2 * h, w)) /
                             (12.0 * h);
            const double rhs = labels_mean(
                kernel, [&](const Vec& wp) { return kernel.k(wp, xi, w) * k0_at(wp); },
                merged(label_breaks_for(kernel, w, xi), label_kinks(kernel, w)), middle_opts());
            worst = std::max(worst, std::abs(-d - rhs));
        }
    }
    return worst;
}

}  // namespace kinlim
