#include "kinlim/geometry.hpp"
#include "kinlim/microdyn.hpp"

#include <cmath>
#include <sstream>

namespace kinlim {

namespace {

// Uniform draws from the scatterers whose centers satisfy `inside`, all of
// which lie in `bbox`.
class ScattererSampler {
public:
    ScattererSampler(const ScattererConfig& config, Box bbox, std::function<bool(const Vec&)> inside)
        : config_(config), bbox_(std::move(bbox)), inside_(std::move(inside)), d_(config.dim()) {
        if (const auto* l = std::get_if<LatticeSpec>(&config_.source); l && !config_.jitter) {
            lattice_ = l;
        } else if (const auto* u = std::get_if<DeloneUnionSpec>(&config_.source); u && !config_.jitter) {
            lattice_ = &u->base;
            translates_ = u->translates;
        }
        if (lattice_) {
            if (translates_.empty()) translates_.push_back(Vec::Zero(d_));
            const Mat inv = lattice_->basis.inverse();
            kmin_ = Vec(d_);
            kmax_ = Vec(d_);
            const Box wide = bbox_.inflated(lattice_->basis.cwiseAbs().maxCoeff() * d_);
            for (int i = 0; i < d_; ++i) {
                double a = 0.0, b = 0.0;
                for (int c = 0; c < d_; ++c) {
                    const double p = wide.lo(c) * inv(c, i);
                    const double q = wide.hi(c) * inv(c, i);
                    a += std::min(p, q);
                    b += std::max(p, q);
                }
                kmin_(i) = std::floor(a);
                kmax_(i) = std::ceil(b);
            }
        } else {
            edge_ = std::pow(config_.is_poisson() ? 1.0 / config_.density() : 8.0 / config_.density(), 1.0 / d_);
            const double lambda = config_.density() * std::pow(edge_, d_);
            slots_ = static_cast<int>(std::ceil(config_.is_poisson() ? lambda + 10.0 * std::sqrt(lambda) + 10.0
                                                                     : 4.0 * lambda + 8.0));
            cmin_.resize(d_);
            cmax_.resize(d_);
            for (int i = 0; i < d_; ++i) {
                cmin_[i] = static_cast<long long>(std::floor(bbox_.lo(i) / edge_));
                cmax_[i] = static_cast<long long>(std::floor(bbox_.hi(i) / edge_));
            }
        }
    }

    Vec sample(Rng& rng) const {
        for (long attempt = 0; attempt < 100000000L; ++attempt) {
            if (lattice_) {
                Vec k(d_);
                for (int i = 0; i < d_; ++i)
                    k(i) = kmin_(i) + std::floor(uniform01(rng) * (kmax_(i) - kmin_(i) + 1.0));
                const std::size_t j = static_cast<std::size_t>(uniform01(rng) * translates_.size());
                const Vec y = lattice_->basis.transpose() * k + translates_[j];
                if (inside_(y)) return y;
                continue;
            }
            Box cell{Vec(d_), Vec(d_)};
            for (int i = 0; i < d_; ++i) {
                const double span = static_cast<double>(cmax_[i] - cmin_[i] + 1);
                const double c = static_cast<double>(cmin_[i]) + std::floor(uniform01(rng) * span);
                cell.lo(i) = c * edge_;
                cell.hi(i) = (c + 1.0) * edge_;
            }
            const int slot = static_cast<int>(uniform01(rng) * slots_);
            std::vector<Vec> pts = points_in_box(config_, cell);
            if (static_cast<int>(pts.size()) > slots_) throw NumericalError("scatterer sampler: cell slot bound exceeded");
            if (slot < static_cast<int>(pts.size()) && inside_(pts[slot])) return pts[slot];
        }
        throw NumericalError("scatterer sampler: no scatterer found in the domain");
    }

private:
    const ScattererConfig& config_;
    Box bbox_;
    std::function<bool(const Vec&)> inside_;
    int d_;
    const LatticeSpec* lattice_ = nullptr;
    std::vector<Vec> translates_;
    Vec kmin_, kmax_;
    double edge_ = 1.0;
    int slots_ = 1;
    std::vector<long long> cmin_, cmax_;
};

struct Domain {
    DomainShape shape;
    double T;
    int d;

    // Closed domain T D.
    bool contains_ball(const Vec& c, double margin) const {
        if (shape == DomainShape::Ball) return c.norm() <= T - margin;
        return c.cwiseAbs().maxCoeff() <= T - margin;
    }
    double volume() const {
        return shape == DomainShape::Ball ? unit_ball_volume(d) * std::pow(T, d) : std::pow(2.0 * T, d);
    }
    // Parameter interval of the line q + t v inside the domain.
    std::optional<std::pair<double, double>> chord(const Vec& q, const Vec& v) const {
        if (shape == DomainShape::Square) return ray_box(q, v, Box::cube(d, T));
        const double a = v.squaredNorm();
        const double b = q.dot(v);
        const double c = q.squaredNorm() - T * T;
        const double disc = b * b - a * c;
        if (disc <= 0.0) return std::nullopt;
        const double s = std::sqrt(disc);
        return std::make_pair((-b - s) / a, (-b + s) / a);
    }
};

struct Accumulator {
    double sw = 0.0, swx = 0.0, swx2 = 0.0, sw2 = 0.0;
    void add(double w, double x) {
        sw += w;
        swx += w * x;
        swx2 += w * x * x;
        sw2 += w * w;
    }
    double mean() const { return swx / sw; }
    double stderr_() const {
        const double m = mean();
        const double var = swx2 / sw - m * m;
        const double neff = sw * sw / sw2;
        return std::sqrt(std::max(var, 0.0) / neff);
    }
};

void check_domain(const ScattererConfig& config, const Domain& dom) {
    const double expected = config.density() * dom.volume();
    if (!(dom.T > 0.0)) throw ValidationError("domain scale T must be positive");
    if (expected < 1e3) {
        std::ostringstream os;
        os << "T D must contain at least 10^3 scatterers (expected " << expected << ")";
        throw ValidationError(os.str());
    }
}

}  // namespace

MeanFreePathResult mean_free_path_check(const ScattererConfig& config, DomainShape shape, double T, long launches,
                                        std::uint64_t seed) {
    if (config.geometry != Geometry::Spherical) throw ValidationError("mean_free_path_check needs spherical scatterers");
    const int d = config.dim();
    const double r = config.radius;
    Domain dom{shape, T, d};
    check_domain(config, dom);
    auto in_pt = [&](const Vec& c) { return dom.contains_ball(c, r); };
    CollisionFinder finder(config);
    finder.set_filter(in_pt);
    ScattererSampler sampler(config, Box::cube(d, T), in_pt);

    const double inner_volume = dom.shape == DomainShape::Ball ? unit_ball_volume(d) * std::pow(T - r, d)
                                                               : std::pow(2.0 * (T - r), d);
    // #P_T from the density; its relative error is O(1/T) and enters only the boundary weight.
    const double scat_weight = config.density() * inner_volume * unit_ball_volume(d - 1) * std::pow(r, d - 1);

    Rng rng(seed);
    Accumulator acc;
    MeanFreePathResult res;
    for (long n = 0; n < launches; ++n) {
        const Vec v = random_unit_vector(d, rng);
        const Mat frame = orthonormal_complement(v);
        double bdry_weight;
        if (shape == DomainShape::Ball) bdry_weight = unit_ball_volume(d - 1) * std::pow(T, d - 1);
        else bdry_weight = std::pow(2.0 * T, d - 1) * v.cwiseAbs().sum();
        const double total = scat_weight + bdry_weight;
        Vec q;
        const Vec* exclude = nullptr;
        Vec y;
        if (uniform01(rng) * total < scat_weight) {
            y = sampler.sample(rng);
            const Vec b = frame * random_in_ball(d - 1, rng);
            q = y + r * (b + std::sqrt(std::max(0.0, 1.0 - b.squaredNorm())) * v);
            exclude = &y;
        } else {
            ++res.boundary_launches;
            const double R = shape == DomainShape::Ball ? T : T * std::sqrt(static_cast<double>(d));
            for (;;) {
                const Vec u = R * (frame * random_in_ball(d - 1, rng));
                const Vec far = u - 2.0 * R * v;
                auto ch = dom.chord(far, v);
                if (!ch) continue;
                q = far + ch->first * v;
                break;
            }
        }
        auto ch = dom.chord(q, v);
        const double t_out = ch ? std::max(ch->second, 0.0) : 0.0;
        double tau = t_out;
        if (t_out > 0.0) {
            const Hit h = finder.first_hit(q, v, t_out, exclude);
            if (h.found) tau = h.t;
        }
        acc.add(total, tau);
    }
    res.launches = launches;
    res.mean = acc.mean();
    res.stderr_ = acc.stderr_();
    res.expected = expected_mean_free_path(d, config.density(), r);
    return res;
}

MeanFreePathResult mean_collision_time_check(const ScattererConfig& config, const KickPotential& pot, const Vec& p,
                                             DomainShape shape, double T, long launches, std::uint64_t seed) {
    if (config.geometry != Geometry::Slab) throw ValidationError("mean_collision_time_check needs slab scatterers");
    const int d = config.dim();
    const int n = d - 1;
    const double r = config.radius;
    if (p.size() != n) throw ValidationError("momentum must have d-1 components");
    Domain dom{shape, T, d};
    check_domain(config, dom);
    const double hw = pot.half_width * r;
    auto in_pt = [&](const Vec& c) {
        if (shape == DomainShape::Square) {
            if (std::abs(c(0)) > T) return false;
            for (int i = 1; i < d; ++i)
                if (std::abs(c(i)) > T - hw) return false;
            return true;
        }
        return c.norm() <= T - hw * std::sqrt(static_cast<double>(n));
    };
    CollisionFinder finder(config, pot);
    finder.set_filter(in_pt);
    ScattererSampler sampler(config, Box::cube(d, T), in_pt);

    Vec vhat(d);
    vhat(0) = 1.0;
    vhat.tail(n) = p;
    const double inner_volume = shape == DomainShape::Ball ? unit_ball_volume(d) * std::pow(T, d)
                                                           : std::pow(2.0 * T, d);
    const double scat_weight = config.density() * inner_volume * std::pow(r, n) * pot.total_cross_section();
    // Shadow of T D on {q_0 = 0} along (1, p).
    const double bdry_weight = shape == DomainShape::Ball
                                   ? unit_ball_volume(n) * std::pow(T, n) * vhat.norm()
                                   : std::pow(2.0 * T, n) * (1.0 + p.cwiseAbs().sum());
    const double total = scat_weight + bdry_weight;
    Vec extent(n);
    for (int i = 0; i < n; ++i) extent(i) = T * (1.0 + std::abs(p(i))) * (shape == DomainShape::Ball ? vhat.norm() : 1.0);

    Rng rng(seed);
    Accumulator acc;
    MeanFreePathResult res;
    for (long k = 0; k < launches; ++k) {
        Vec q(d);
        const Vec* exclude = nullptr;
        Vec y;
        if (uniform01(rng) * total < scat_weight) {
            y = sampler.sample(rng);
            q = y;
            for (int i = 1; i < d; ++i) q(i) += uniform(rng, -hw, hw);
            exclude = &y;
        } else {
            ++res.boundary_launches;
            for (;;) {
                Vec h = Vec::Zero(d);
                for (int i = 1; i < d; ++i) h(i) = uniform(rng, -extent(i - 1), extent(i - 1));
                auto ch = dom.chord(h, vhat);
                if (!ch) continue;
                q = h + ch->first * vhat;
                break;
            }
        }
        auto ch = dom.chord(q, vhat);
        const double t_out = ch ? std::max(ch->second, 0.0) : 0.0;
        double tau = t_out;
        if (t_out > 0.0) {
            const Hit h = finder.first_hit(q, vhat, t_out, exclude);
            if (h.found) tau = h.t;
        }
        acc.add(1.0, tau);
    }
    res.launches = launches;
    res.mean = acc.mean();
    res.stderr_ = acc.stderr_();
    res.expected = 1.0 / (config.density() * std::pow(r, n) * pot.total_cross_section());
    return res;
}

}  // namespace kinlim
