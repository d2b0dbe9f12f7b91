#include "kinlim/quadrature.hpp"

#include "kinlim/types.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>

namespace kinlim {

namespace {

struct Piece {
    double lo, hi, value, error;
    unsigned depth;
    bool operator<(const Piece& o) const { return error < o.error; }
};

// One 7/15 Gauss-Kronrod rule on [lo, hi]. Node tables come from Boost; the adaptive driver
// is ours because Boost 1.74 compares an unscaled error estimate against a scaled tolerance.
Piece rule(const std::function<double(double)>& f, double lo, double hi, unsigned depth) {
    using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
    using G = boost::math::quadrature::gauss<double, 7>;
    const auto& x = GK::abscissa();
    const auto& wk = GK::weights();
    const auto& wg = G::weights();
    const double mid = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo);
    const double f0 = f(mid);
    double kr = f0 * wk[0];
    double ga = f0 * wg[0];
    for (std::size_t i = 1; i < x.size(); ++i) {
        const double s = f(mid + half * x[i]) + f(mid - half * x[i]);
        kr += s * wk[i];
        if (i % 2 == 0) ga += s * wg[i / 2];
    }
    return {lo, hi, kr * half, std::abs(kr - ga) * half, depth};
}

double adaptive(const std::function<double(double)>& f, double lo, double hi, const QuadOptions& opts) {
    std::priority_queue<Piece> heap;
    heap.push(rule(f, lo, hi, 0));
    double value = heap.top().value, error = heap.top().error;
    std::vector<Piece> done;
    for (int splits = 0; !heap.empty() && splits < 4000; ++splits) {
        const double target = std::max(opts.abs_tol, opts.rel_tol * std::abs(value));
        if (error <= target) break;
        Piece p = heap.top();
        heap.pop();
        const double m = 0.5 * (p.lo + p.hi);
        // Splitting stops helping once the rule sits at roundoff level.
        if (p.depth >= opts.max_depth || !(m > p.lo && m < p.hi) ||
            p.error <= 64.0 * std::numeric_limits<double>::epsilon() * std::abs(p.value)) {
            done.push_back(p);
            continue;
        }
        const Piece a = rule(f, p.lo, m, p.depth + 1);
        const Piece b = rule(f, m, p.hi, p.depth + 1);
        value += a.value + b.value - p.value;
        error += a.error + b.error - p.error;
        heap.push(a);
        heap.push(b);
    }
    const double target = std::max(opts.abs_tol, opts.rel_tol * std::abs(value));
    if (!std::isfinite(value)) throw NumericalError("quadrature produced a non-finite value");
    if (error > 100.0 * target) {
        std::ostringstream os;
        os.precision(17);
        os << "quadrature non-convergence on [" << lo << ", " << hi << "]: error estimate " << error;
        for (auto& q : done) os << "\n  frozen [" << q.lo << "," << q.hi << "] err " << q.error << " depth " << q.depth;
        std::vector<Piece> rest;
        while (!heap.empty()) { rest.push_back(heap.top()); heap.pop(); }
        for (std::size_t k = 0; k < std::min<std::size_t>(5, rest.size()); ++k) os << "\n  open [" << rest[k].lo << "," << rest[k].hi << "] err " << rest[k].error << " depth " << rest[k].depth;
        throw NumericalError(os.str());
    }
    return value;
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b, std::vector<double> breaks,
                 const QuadOptions& opts) {
    if (!(b >= a)) throw ValidationError("integration bounds out of order");
    if (a == b) return 0.0;
    if (std::isinf(b)) {
        if (!breaks.empty()) {
            const double last = *std::max_element(breaks.begin(), breaks.end());
            if (last > a) return integrate(f, a, last, breaks, opts) + integrate(f, last, b, {}, opts);
        }
        // x = a + t / (1 - t)
        auto g = [&](double t) {
            const double u = 1.0 - t;
            const double v = f(a + t / u);
            return v == 0.0 ? 0.0 : v / (u * u);
        };
        return adaptive(g, 0.0, 1.0, opts);
    }
    // Pieces a few ulps wide would put rule nodes on their end points.
    const double gap = 64.0 * std::numeric_limits<double>::epsilon() * std::max({1.0, std::abs(a), std::abs(b)});
    std::erase_if(breaks, [&](double x) { return !(x > a + gap && x < b - gap); });
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end(), [&](double x, double y) { return y - x <= gap; }),
                 breaks.end());
    std::vector<double> nodes;
    nodes.reserve(breaks.size() + 2);
    nodes.push_back(a);
    nodes.insert(nodes.end(), breaks.begin(), breaks.end());
    nodes.push_back(b);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i)
        if (nodes[i + 1] > nodes[i]) total += adaptive(f, nodes[i], nodes[i + 1], opts);
    return total;
}

}  // namespace kinlim
