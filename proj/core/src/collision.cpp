#include "kinlim/geometry.hpp"
#include "kinlim/microdyn.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace kinlim {

namespace {

constexpr std::size_t kMaxCachedCells = 1 << 18;

bool same_center(const Vec& a, const Vec* b, double r) {
    return b != nullptr && (a - *b).squaredNorm() < 1e-18 * r * r;
}

const LatticeSpec* base_lattice(const ScattererConfig& config) {
    if (const auto* l = std::get_if<LatticeSpec>(&config.source)) return l;
    if (const auto* u = std::get_if<DeloneUnionSpec>(&config.source)) return &u->base;
    return nullptr;
}

}  // namespace

std::size_t CollisionFinder::CellKeyHash::operator()(const std::array<std::int64_t, 3>& k) const {
    std::uint64_t h = mix64(static_cast<std::uint64_t>(k[0]));
    h = hash_combine(h, static_cast<std::uint64_t>(k[1]));
    h = hash_combine(h, static_cast<std::uint64_t>(k[2]));
    return static_cast<std::size_t>(h);
}

CollisionFinder::CollisionFinder(const ScattererConfig& config, std::optional<KickPotential> kick)
    : config_(config), kick_(std::move(kick)), d_(config.dim()) {
    config_.validate();
    if (d_ < 2 || d_ > 3) throw ValidationError("dynamics supports d = 2 and d = 3");
    if (config_.geometry == Geometry::Slab) {
        if (!kick_) throw ValidationError("slab geometry needs a kick potential");
        if (kick_->internal_dim != d_ - 1) throw ValidationError("kick potential dimension must be d-1");
        reach_ = config_.radius * kick_->half_width * std::sqrt(static_cast<double>(d_ - 1));
    } else {
        reach_ = config_.radius;
    }
    cell_edge_ = std::max(2.0 * reach_, std::pow(config_.density(), -1.0 / d_));

    if (config_.is_pure_lattice()) {
        const LatticeSpec* lat = base_lattice(config_);
        LatticeCache lc;
        lc.inverse = lat->basis.inverse();
        lc.colnorm = lc.inverse.colwise().norm().transpose();
        lattice_cache_.push_back(lc);
        if (config_.geometry == Geometry::Slab) {
            const Mat& B = lat->basis;
            bool product = std::holds_alternative<LatticeSpec>(config_.source);
            for (int j = 1; j < d_ && product; ++j) product = B(0, j) == 0.0 && B(j, 0) == 0.0;
            planes_fast_ = product;
        }
    }
}

bool CollisionFinder::test_shape(const Vec& q, const Vec& v, const Vec& c, double t_max, const Vec* exclude,
                                 Hit& best) const {
    const double r = config_.radius;
    if (same_center(c, exclude, r)) return false;
    if (filter_ && !filter_(c)) return false;
    if (config_.geometry == Geometry::Spherical) {
        const Vec rel = c - q;
        if (rel.squaredNorm() < r * r * (1.0 - 1e-9)) {
            if (config_.is_poisson()) return false;  // overlapping Poisson balls: pass through
            std::ostringstream os;
            os << "state inside a scatterer (distance " << rel.norm() << " < r = " << r << ")";
            throw ValidationError(os.str());
        }
        auto t = ray_sphere(q, v, c, r, 1e-12 * r);
        if (!t || *t > t_max) return false;
        if (!best.found || *t < best.t) {
            best.found = true;
            best.t = *t;
            best.center = c;
            return true;
        }
        return false;
    }
    // Slab {c} + {0} x r Sigma, crossed when the ray reaches the plane x_0 = c_0.
    const double t = (c(0) - q(0)) / v(0);
    if (!(t > 0.0) || t > t_max || (best.found && t >= best.t)) return false;
    const double hw = kick_->half_width * r;
    for (int i = 1; i < d_; ++i) {
        const double w = q(i) + t * v(i) - c(i);
        if (!(w > -hw && w < hw)) return false;
    }
    best.found = true;
    best.t = t;
    best.center = c;
    return true;
}

Hit CollisionFinder::first_hit(const Vec& q, const Vec& v, double t_max, const Vec* exclude) {
    if (!(t_max > 0.0) || !std::isfinite(t_max)) throw ValidationError("flight cap L_max must be finite and positive");
    if (q.size() != d_ || v.size() != d_) throw ValidationError("state dimension does not match the configuration");
    if (config_.geometry == Geometry::Slab && !(v(0) > 0.0)) throw ValidationError("kicked states need p_0 > 0");
    if (!force_grid_) {
        if (config_.geometry == Geometry::Spherical && config_.is_pure_lattice()) {
            if (const auto* l = std::get_if<LatticeSpec>(&config_.source))
                return lattice_tube(q, v, t_max, exclude, *l, Vec::Zero(d_), 0);
            const auto& u = std::get<DeloneUnionSpec>(config_.source);
            Hit best;
            for (const auto& t : u.translates) {
                Hit h = lattice_tube(q, v, best.found ? std::min(best.t, t_max) : t_max, exclude, u.base, t, 0);
                if (h.found && (!best.found || h.t < best.t)) best = h;
            }
            return best;
        }
        if (planes_fast_) return kicked_planes(q, v, t_max, exclude);
    }
    return grid(q, v, t_max, exclude);
}

Hit CollisionFinder::lattice_tube(const Vec& q, const Vec& v, double t_max, const Vec* exclude,
                                  const LatticeSpec& lat, const Vec& offset, int slot) const {
    const LatticeCache& lc = lattice_cache_[slot];
    const double r = config_.radius;
    const Vec kq = lc.inverse.transpose() * (q - offset);
    const Vec u = lc.inverse.transpose() * v;
    int dom = 0;
    for (int i = 1; i < d_; ++i)
        if (std::abs(u(i)) > std::abs(u(dom))) dom = i;
    const double ud = u(dom);
    const double aud = std::abs(ud);
    // Centers whose ball meets the ray have their dominant coordinate within
    // mt (in t) of the slice crossing; other coordinates within delta.
    const double mt = r * lc.colnorm(dom) / aud;
    int others[2] = {0, 0};
    double delta[2] = {0.0, 0.0};
    int no = 0;
    for (int i = 0; i < d_; ++i) {
        if (i == dom) continue;
        others[no] = i;
        delta[no] = r * (lc.colnorm(i) + lc.colnorm(dom) * std::abs(u(i) / ud)) * (1.0 + 1e-12) + 1e-12;
        ++no;
    }
    const long long step = ud > 0.0 ? 1 : -1;
    long long c = ud > 0.0 ? static_cast<long long>(std::ceil(kq(dom) - mt * aud))
                           : static_cast<long long>(std::floor(kq(dom) + mt * aud));
    Hit best;
    Vec k(d_);
    for (;; c += step) {
        const double tc = (static_cast<double>(c) - kq(dom)) / ud;
        const double limit = best.found ? std::min(best.t, t_max) : t_max;
        if (tc - mt - r > limit) break;
        k(dom) = static_cast<double>(c);
        const double c0 = kq(others[0]) + u(others[0]) * tc;
        const long long a0 = static_cast<long long>(std::ceil(c0 - delta[0]));
        const long long b0 = static_cast<long long>(std::floor(c0 + delta[0]));
        for (long long i0 = a0; i0 <= b0; ++i0) {
            k(others[0]) = static_cast<double>(i0);
            if (no == 1) {
                const Vec x = lat.basis.transpose() * k + offset;
                test_shape(q, v, x, t_max, exclude, best);
                continue;
            }
            const double c1 = kq(others[1]) + u(others[1]) * tc;
            const long long a1 = static_cast<long long>(std::ceil(c1 - delta[1]));
            const long long b1 = static_cast<long long>(std::floor(c1 + delta[1]));
            for (long long i1 = a1; i1 <= b1; ++i1) {
                k(others[1]) = static_cast<double>(i1);
                const Vec x = lat.basis.transpose() * k + offset;
                test_shape(q, v, x, t_max, exclude, best);
            }
        }
    }
    return best;
}

Hit CollisionFinder::kicked_planes(const Vec& q, const Vec& v, double t_max, const Vec* exclude) const {
    const Mat& B = std::get<LatticeSpec>(config_.source).basis;
    const LatticeCache& lc = lattice_cache_[0];
    const double a = B(0, 0);
    const int n = d_ - 1;
    const double r = config_.radius;
    const double hw = kick_->half_width * r;
    long long m = static_cast<long long>(std::ceil(q(0) / a - 1e-9));
    if (a < 0.0) throw ValidationError("kicked lattice needs a positive time spacing");
    Hit best;
    Vec y(n), c(d_), kk(n);
    for (;; ++m) {
        const double t = (static_cast<double>(m) * a - q(0)) / v(0);
        if (t > t_max) break;
        if (!(t > 0.0)) continue;
        for (int i = 0; i < n; ++i) y(i) = q(1 + i) + t * v(1 + i);
        // Nearest transverse lattice point, then its +-1 neighbourhood.
        Vec k0(n);
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j = 0; j < n; ++j) s += y(j) * lc.inverse(1 + j, 1 + i);
            k0(i) = std::round(s);
        }
        int codes = 1;
        for (int i = 0; i < n; ++i) codes *= 3;
        for (int code = 0; code < codes; ++code) {
            int cc = code;
            for (int i = 0; i < n; ++i) {
                kk(i) = k0(i) + (cc % 3) - 1;
                cc /= 3;
            }
            c(0) = static_cast<double>(m) * a;
            bool inside = true;
            for (int i = 0; i < n; ++i) {
                double x = 0.0;
                for (int j = 0; j < n; ++j) x += kk(j) * B(1 + j, 1 + i);
                c(1 + i) = x;
                const double w = y(i) - x;
                inside = inside && w > -hw && w < hw;
            }
            if (!inside || same_center(c, exclude, r)) continue;
            if (filter_ && !filter_(c)) continue;
            best.found = true;
            best.t = t;
            best.center = c;
            return best;
        }
    }
    return best;
}

const std::vector<Vec>& CollisionFinder::cell(const std::array<std::int64_t, 3>& key) {
    auto it = cells_.find(key);
    if (it != cells_.end()) return it->second;
    if (cells_.size() >= kMaxCachedCells) cells_.clear();
    Box b{Vec(d_), Vec(d_)};
    for (int i = 0; i < d_; ++i) {
        b.lo(i) = static_cast<double>(key[i]) * cell_edge_;
        b.hi(i) = static_cast<double>(key[i] + 1) * cell_edge_;
    }
    std::vector<Vec> pts;
    for_each_point(config_, b, [&](const Vec& x) { pts.push_back(x); });
    return cells_.emplace(key, std::move(pts)).first->second;
}

Hit CollisionFinder::grid(const Vec& q, const Vec& v, double t_max, const Vec* exclude) {
    const double h = cell_edge_;
    std::array<std::int64_t, 3> cur{0, 0, 0};
    std::array<int, 3> step{0, 0, 0};
    std::array<double, 3> t_next{}, t_delta{};
    constexpr double inf = std::numeric_limits<double>::infinity();
    for (int i = 0; i < d_; ++i) {
        cur[i] = static_cast<std::int64_t>(std::floor(q(i) / h));
        if (v(i) > 0.0) {
            step[i] = 1;
            t_next[i] = (static_cast<double>(cur[i] + 1) * h - q(i)) / v(i);
            t_delta[i] = h / v(i);
        } else if (v(i) < 0.0) {
            step[i] = -1;
            t_next[i] = (static_cast<double>(cur[i]) * h - q(i)) / v(i);
            t_delta[i] = -h / v(i);
        } else {
            t_next[i] = inf;
            t_delta[i] = inf;
        }
    }
    int ncodes = 1;
    for (int i = 0; i < d_; ++i) ncodes *= 3;
    Hit best;
    for (;;) {
        for (int code = 0; code < ncodes; ++code) {
            std::array<std::int64_t, 3> key = cur;
            int cc = code;
            for (int i = 0; i < d_; ++i) {
                key[i] += (cc % 3) - 1;
                cc /= 3;
            }
            for (const Vec& c : cell(key)) test_shape(q, v, c, t_max, exclude, best);
        }
        int axis = 0;
        for (int i = 1; i < d_; ++i)
            if (t_next[i] < t_next[axis]) axis = i;
        const double t_exit = t_next[axis];
        if (best.found && best.t <= t_exit) return best;
        if (t_exit > t_max) return best;
        cur[axis] += step[axis];
        t_next[axis] += t_delta[axis];
    }
}

Hit CollisionFinder::brute_force(const Vec& q, const Vec& v, double t_max, const Vec* exclude) const {
    Box b{q.cwiseMin(q + t_max * v), q.cwiseMax(q + t_max * v)};
    b = b.inflated(reach_ + 1e-9);
    Hit best;
    for_each_point(config_, b, [&](const Vec& c) { test_shape(q, v, c, t_max, exclude, best); });
    return best;
}

FirstCollision first_collision(const ScattererConfig& config, const ParticleState& state, double L_max) {
    if (config.geometry != Geometry::Spherical) throw ValidationError("first_collision expects spherical scatterers");
    CollisionFinder finder(config);
    const Hit h = finder.first_hit(state.q, state.v, L_max);
    FirstCollision fc;
    if (!h.found) {
        fc.censored = true;
        fc.t = L_max;
        return fc;
    }
    fc.censored = false;
    fc.t = h.t;
    fc.center = h.center;
    const Vec rel = state.q - h.center;
    fc.impact = (rel - rel.dot(state.v) * state.v) / config.radius;
    return fc;
}

}  // namespace kinlim
