#include "kinlim/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace kinlim {

namespace {

constexpr double kTwelveOverPi2 = 12.0 / (kPi * kPi);

// max(|w|,|w'|) + 1 - |w - w'| is 1 + min(|w|,|w'|) for equal signs and 1 - min(|w|,|w'|)
// otherwise; the second form stays exact near the corners where the first cancels.
double support_gap(double w_prime, double w) {
    const double mn = std::min(std::abs(w), std::abs(w_prime));
    return (w < 0.0) == (w_prime < 0.0) ? 1.0 + mn : 1.0 - mn;
}

}  // namespace

double upsilon(double x) {
    if (x <= 0.0) return 0.0;
    if (x < 1.0) return x;
    return 1.0;
}

double lattice_kernel_2d(double w_prime, double xi, double w, double density) {
    if (!(std::abs(w_prime) < 1.0 && std::abs(w) < 1.0)) throw ValidationError("lattice kernel labels must lie in (-1,1)");
    if (!(xi >= 0.0)) throw ValidationError("lattice kernel needs xi >= 0");
    const double c = 12.0 * density / (kPi * kPi);
    if (xi == 0.0) return c;
    const double m = std::max(std::abs(w), std::abs(w_prime));
    const double D = std::abs(w - w_prime);
    const double a = 1.0 / (density * xi);
    if (D == 0.0) return a >= m + 1.0 ? c : 0.0;
    // 1 + (a - m - 1)/D, with m + 1 - D taken from support_gap
    return c * upsilon((a - support_gap(w_prime, w)) / D);
}

LatticeKernel2D::LatticeKernel2D(double density) : density_(density) {
    if (!(density > 0.0)) throw ValidationError("density must be positive");
}

double LatticeKernel2D::k(const Vec& w_prime, double xi, const Vec& w) const {
    return lattice_kernel_2d(w_prime(0), xi, w(0), density_);
}

double LatticeKernel2D::xi_plateau(double w_prime, double w) const {
    const double m = std::max(std::abs(w), std::abs(w_prime));
    return 1.0 / (density_ * (m + 1.0));
}

double LatticeKernel2D::xi_support(double w_prime, double w) const {
    return 1.0 / (density_ * support_gap(w_prime, w));
}

std::vector<double> LatticeKernel2D::xi_breaks(const Vec& w_prime, const Vec& w) const {
    return {xi_plateau(w_prime(0), w(0))};
}

double LatticeKernel2D::support_end(const Vec& w_prime, const Vec& w) const {
    return xi_support(w_prime(0), w(0));
}

std::vector<double> LatticeKernel2D::label_breaks(double other, double xi) const {
    std::vector<double> cuts{-1.0, -std::abs(other), 0.0, std::abs(other), other, 1.0};
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    std::vector<double> out(cuts.begin() + 1, cuts.end() - 1);
    if (!(xi > 0.0)) return out;
    const double a = 1.0 / (density_ * xi);
    auto m_of = [&](double u) { return std::max(std::abs(u), std::abs(other)); };
    // Where the Upsilon argument crosses 1 and 0; both are linear between cuts.
    auto f1 = [&](double u) { return a - m_of(u) - 1.0; };
    auto f0 = [&](double u) { return a - support_gap(other, u); };
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double lo = cuts[i], hi = cuts[i + 1];
        auto root = [&](auto&& f) {
            const double flo = f(lo), fhi = f(hi);
            if ((flo < 0.0) != (fhi < 0.0) && flo != fhi) out.push_back(lo + (hi - lo) * flo / (flo - fhi));
        };
        root(f1);
        root(f0);
    }
    std::sort(out.begin(), out.end());
    return out;
}

double LatticeKernel2D::sup() const { return 12.0 * density_ / (kPi * kPi); }

double LatticeKernel2D::tail_mass(double w_prime, double xi, double w) const {
    const double x = density_ * xi;
    const double m = std::max(std::abs(w), std::abs(w_prime));
    const double D = std::abs(w - w_prime);
    const double x1 = 1.0 / (m + 1.0);
    if (D == 0.0) return kTwelveOverPi2 * std::max(0.0, x1 - x);
    const double q = support_gap(w_prime, w);
    const double x2 = 1.0 / q;
    if (x >= x2) return 0.0;
    // int_x^x2 of (1 - (m+1)/D + 1/(D s)) ds, rewritten to avoid cancellation when D is small.
    auto middle = [&](double from) {
        const double eps = from == x1 ? D * x1 : 1.0 - from * q;
        return -(eps + std::log1p(-eps)) / D;
    };
    if (x >= x1) return kTwelveOverPi2 * middle(x);
    return kTwelveOverPi2 * ((x1 - x) + middle(x1));
}

double LatticeKernel2D::excess(double w_prime, double xi, double w) const {
    const double x = density_ * xi;
    const double m = std::max(std::abs(w), std::abs(w_prime));
    const double D = std::abs(w - w_prime);
    const double x1 = 1.0 / (m + 1.0);
    double plateau = x < x1 ? 0.5 * (x1 - x) * (x1 - x) : 0.0;
    if (D == 0.0) return kTwelveOverPi2 * plateau / density_;
    const double q = support_gap(w_prime, w);
    const double x2 = 1.0 / q;
    if (x >= x2) return 0.0;
    // (x2/D) (e - e^2/2 + (1-e) log(1-e)) with e = 1 - from/x2; the series sum_{n>=3} e^n/(n(n-1)) for small e.
    auto middle = [&](double from) {
        const double e = from == x1 ? D * x1 : 1.0 - from * q;
        double s = 0.0;
        if (e < 0.25) {
            double p = e * e;
            for (int n = 3; n < 40; ++n) {
                p *= e;
                s += p / (n * (n - 1.0));
                if (p < 1e-18 * s) break;
            }
        } else {
            s = e - 0.5 * e * e + (1.0 - e) * std::log1p(-e);
        }
        return x2 * s / D;
    };
    if (x >= x1) return kTwelveOverPi2 * middle(x) / density_;
    const double g1 = tail_mass(w_prime, x1 / density_, w);  // already carries 12/pi^2
    return (kTwelveOverPi2 * (plateau + middle(x1)) + (x1 - x) * g1) / density_;
}

double LatticeKernel2D::moment(double w_prime, int order, double xi_max, double w) const {
    if (order < 0 || order > 2) throw ValidationError("closed-form moments exist for orders 0 to 2");
    const double X = density_ * xi_max;
    const double m = std::max(std::abs(w), std::abs(w_prime));
    const double D = std::abs(w - w_prime);
    const double x1 = 1.0 / (m + 1.0);
    const double p1 = order + 1.0;
    const double a = std::min(x1, X);
    double total = std::pow(a, p1) / p1;
    if (D > 0.0 && X > x1) {
        const double x2 = 1.0 / support_gap(w_prime, w);
        const double b = std::min(x2, X);
        // (1/D) int_x1^b x^p (1/x - 1/x2) dx
        double mid = 0.0;
        if (order == 0) {
            const double t = b / x1 - 1.0;
            const double q = D / (m + 1.0);
            mid = ((std::log1p(t) - t) + t * q) / D;
        } else if (order == 1) {
            mid = (b - x1) / D * (1.0 - (b + x1) / (2.0 * x2));
        } else {
            mid = (b - x1) / D * ((b + x1) / 2.0 - (b * b + b * x1 + x1 * x1) / (3.0 * x2));
        }
        total += mid;
    }
    return kTwelveOverPi2 * total / std::pow(density_, order);
}

std::optional<double> LatticeKernel2D::xi_tail_exact(const Vec& w_prime, double xi, const Vec& w) const {
    return tail_mass(w_prime(0), xi, w(0));
}

std::optional<double> LatticeKernel2D::xi_excess_exact(const Vec& w_prime, double xi, const Vec& w) const {
    return excess(w_prime(0), xi, w(0));
}

std::optional<double> LatticeKernel2D::xi_moment_exact(const Vec& w_prime, int order, double xi_max,
                                                       const Vec& w) const {
    if (order > 2) return std::nullopt;
    return moment(w_prime(0), order, xi_max, w(0));
}

}  // namespace kinlim
