#include "kinlim/pointset.hpp"

#include "kinlim/rng.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace kinlim {

namespace {

constexpr double kGolden = 1.6180339887498948482;
constexpr double kDetThreshold = 1e-12;
constexpr double kMaxExpectedPoints = 5e7;

std::string dim_error(const char* what, int expected, int got) {
    std::ostringstream os;
    os << what << ": expected dimension " << expected << ", got " << got;
    return os.str();
}

// Integer points k of the lattice with rows B such that x = k B lies in the
// closed ambient box [lo, hi] (up to a small slack; callers filter exactly).
// Block-diagonal structure of B is enumerated factor by factor.
class LatticeEnumerator {
public:
    explicit LatticeEnumerator(const Mat& basis) : basis_(basis), n_(static_cast<int>(basis.rows())) {
        inverse_ = basis_.inverse();
        find_blocks();
    }

    template <class F>
    void run(const Vec& lo, const Vec& hi, F&& f) const {
        // Enumerate each block into a flat list of partial ambient vectors.
        std::vector<std::vector<double>> parts(blocks_.size());
        for (std::size_t b = 0; b < blocks_.size(); ++b) {
            enumerate_block(blocks_[b], lo, hi, parts[b]);
            if (parts[b].empty()) return;
        }
        Vec x = Vec::Zero(n_);
        product(0, parts, x, f);
    }

private:
    struct Block {
        std::vector<int> rows;  // integer coordinates
        std::vector<int> cols;  // ambient coordinates
    };

    void find_blocks() {
        // Union-find over rows (0..n-1) and columns (n..2n-1).
        std::vector<int> parent(2 * n_);
        std::iota(parent.begin(), parent.end(), 0);
        auto find = [&](int a) {
            while (parent[a] != a) a = parent[a] = parent[parent[a]];
            return a;
        };
        for (int i = 0; i < n_; ++i)
            for (int c = 0; c < n_; ++c)
                if (basis_(i, c) != 0.0) parent[find(i)] = find(n_ + c);
        std::vector<int> block_of(2 * n_, -1);
        for (int v = 0; v < 2 * n_; ++v) {
            const int root = find(v);
            if (block_of[root] < 0) {
                block_of[root] = static_cast<int>(blocks_.size());
                blocks_.emplace_back();
            }
            Block& blk = blocks_[block_of[root]];
            if (v < n_) blk.rows.push_back(v);
            else blk.cols.push_back(v - n_);
        }
        std::erase_if(blocks_, [](const Block& b) { return b.rows.empty(); });
    }

    void enumerate_block(const Block& blk, const Vec& lo, const Vec& hi, std::vector<double>& out) const {
        const int b = static_cast<int>(blk.rows.size());
        // Coefficient bounding box from the inverse basis.
        std::vector<long long> kmin(b), kmax(b);
        for (int ii = 0; ii < b; ++ii) {
            const int i = blk.rows[ii];
            double a = 0.0, z = 0.0;
            for (int c : blk.cols) {
                const double p = lo(c) * inverse_(c, i);
                const double q = hi(c) * inverse_(c, i);
                a += std::min(p, q);
                z += std::max(p, q);
            }
            if (!(std::abs(a) < 4e18 && std::abs(z) < 4e18)) throw ValidationError("box volume overflow");
            kmin[ii] = static_cast<long long>(std::ceil(a - 1e-9));
            kmax[ii] = static_cast<long long>(std::floor(z + 1e-9));
            if (kmin[ii] > kmax[ii]) return;
        }
        const int last = blk.rows[b - 1];
        std::vector<long long> k(kmin.begin(), kmin.end());
        std::vector<double> partial(blk.cols.size());
        for (;;) {
            // Partial ambient coordinates from the outer coefficients.
            for (std::size_t cc = 0; cc < blk.cols.size(); ++cc) {
                const int c = blk.cols[cc];
                double s = 0.0;
                for (int ii = 0; ii + 1 < b; ++ii) s += static_cast<double>(k[ii]) * basis_(blk.rows[ii], c);
                partial[cc] = s;
            }
            double tlo = static_cast<double>(kmin[b - 1]);
            double thi = static_cast<double>(kmax[b - 1]);
            bool feasible = true;
            for (std::size_t cc = 0; cc < blk.cols.size() && feasible; ++cc) {
                const int c = blk.cols[cc];
                const double a = basis_(last, c);
                const double slack = 1e-9 * (1.0 + std::abs(lo(c)) + std::abs(hi(c)));
                if (a == 0.0) {
                    feasible = partial[cc] >= lo(c) - slack && partial[cc] <= hi(c) + slack;
                    continue;
                }
                double u = (lo(c) - slack - partial[cc]) / a;
                double w = (hi(c) + slack - partial[cc]) / a;
                if (u > w) std::swap(u, w);
                tlo = std::max(tlo, std::ceil(u));
                thi = std::min(thi, std::floor(w));
            }
            if (feasible) {
                for (double t = tlo; t <= thi; t += 1.0) {
                    for (std::size_t cc = 0; cc < blk.cols.size(); ++cc)
                        out.push_back(partial[cc] + t * basis_(last, blk.cols[cc]));
                }
            }
            // Odometer over the outer coefficients.
            int pos = b - 2;
            while (pos >= 0) {
                if (++k[pos] <= kmax[pos]) break;
                k[pos] = kmin[pos];
                --pos;
            }
            if (pos < 0) break;
        }
    }

    template <class F>
    void product(std::size_t b, const std::vector<std::vector<double>>& parts, Vec& x, F& f) const {
        if (b == blocks_.size()) {
            f(x);
            return;
        }
        const auto& cols = blocks_[b].cols;
        const std::size_t w = cols.size();
        const auto& list = parts[b];
        for (std::size_t off = 0; off < list.size(); off += w) {
            for (std::size_t cc = 0; cc < w; ++cc) x(cols[cc]) = list[off + cc];
            product(b + 1, parts, x, f);
        }
    }

    Mat basis_;
    Mat inverse_;
    int n_;
    std::vector<Block> blocks_;
};

void check_box(const Box& box, int d) {
    if (box.dim() != d) throw ValidationError(dim_error("query box", d, box.dim()));
    for (int i = 0; i < d; ++i)
        if (!(box.hi(i) > box.lo(i)) || !std::isfinite(box.lo(i)) || !std::isfinite(box.hi(i)))
            throw ValidationError("query box must have finite positive volume");
}

void enumerate_lattice(const LatticeSpec& spec, const Box& box, const Vec& offset,
                       const std::function<void(const Vec&)>& f) {
    LatticeEnumerator en(spec.basis);
    const Vec lo = box.lo - offset;
    const Vec hi = box.hi - offset;
    en.run(lo, hi, [&](const Vec& x) {
        Vec y = x + offset;
        if (box.contains(y)) f(y);
    });
}

void enumerate_cut_project(const CutProjectSpec& spec, const Box& box, const std::function<void(const Vec&)>& f) {
    const int d = spec.dim;
    const int m = spec.internal_dim;
    Vec lo(d + m), hi(d + m);
    lo.head(d) = box.lo;
    hi.head(d) = box.hi;
    Vec wlo = Vec::Constant(m, std::numeric_limits<double>::infinity());
    Vec whi = Vec::Constant(m, -std::numeric_limits<double>::infinity());
    for (const auto& wb : spec.window_boxes) {
        wlo = wlo.cwiseMin(wb.lo);
        whi = whi.cwiseMax(wb.hi);
    }
    for (const auto& wp : spec.window_points) {
        wlo = wlo.cwiseMin(wp);
        whi = whi.cwiseMax(wp);
    }
    const Vec shift = spec.internal_shift.size() == m ? spec.internal_shift : Vec::Zero(m);
    lo.tail(m) = wlo - shift;
    hi.tail(m) = whi - shift;
    if (!spec.window_points.empty()) {
        lo.tail(m).array() -= 1e-6;
        hi.tail(m).array() += 1e-6;
    }
    LatticeEnumerator en(spec.basis);
    en.run(lo, hi, [&](const Vec& x) {
        const Vec phys = x.head(d);
        if (!box.contains(phys)) return;
        if (spec.in_window(x.tail(m) + shift)) f(phys);
    });
}

std::int64_t floor_index(double x) { return static_cast<std::int64_t>(std::floor(x)); }

std::uint64_t cell_seed(std::uint64_t seed, const std::int64_t* cell, int d) {
    std::uint64_t h = mix64(seed ^ 0x5DEECE66DULL);
    for (int i = 0; i < d; ++i) h = hash_combine(h, static_cast<std::uint64_t>(cell[i]));
    return h;
}

// Poisson(lambda) by CDF inversion; lambda is the per-cell mean (1 by construction).
int poisson_count(SplitMix64& g, double lambda) {
    const double u = uniform01(g);
    double p = std::exp(-lambda);
    double cdf = p;
    int k = 0;
    while (u >= cdf && k < 100000) {
        ++k;
        p *= lambda / k;
        cdf += p;
        if (p == 0.0) break;
    }
    return k;
}

void enumerate_poisson(const PoissonSpec& spec, const Box& box, const std::function<void(const Vec&)>& f) {
    const int d = spec.dim;
    const double h = spec.cell_edge();
    std::array<std::int64_t, kMaxDim> lo{}, hi{}, c{};
    for (int i = 0; i < d; ++i) {
        lo[i] = floor_index(box.lo(i) / h);
        hi[i] = floor_index(box.hi(i) / h);
        c[i] = lo[i];
    }
    Vec x(d);
    for (;;) {
        SplitMix64 g(cell_seed(spec.seed, c.data(), d));
        const int n = poisson_count(g, spec.intensity * std::pow(h, d));
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < d; ++i) x(i) = (static_cast<double>(c[i]) + uniform01(g)) * h;
            if (box.contains(x)) f(x);
        }
        int pos = d - 1;
        while (pos >= 0) {
            if (++c[pos] <= hi[pos]) break;
            c[pos] = lo[pos];
            --pos;
        }
        if (pos < 0) break;
    }
}

std::uint64_t point_seed(std::uint64_t seed, const Vec& x) {
    std::uint64_t h = mix64(seed ^ 0x2545F4914F6CDD1DULL);
    for (int i = 0; i < x.size(); ++i) h = hash_combine(h, std::bit_cast<std::uint64_t>(x(i) + 0.0));
    return h;
}

}  // namespace

double LatticeSpec::density() const { return 1.0 / std::abs(basis.determinant()); }

void LatticeSpec::validate() const {
    if (basis.rows() < 1 || basis.rows() != basis.cols()) throw ValidationError("lattice basis must be square");
    if (!basis.allFinite()) throw ValidationError("lattice basis has non-finite entries");
    if (std::abs(basis.determinant()) < kDetThreshold) throw ValidationError("lattice basis rows are linearly dependent");
}

LatticeSpec integer_lattice(int d) { return LatticeSpec{Mat::Identity(d, d)}; }

bool CutProjectSpec::in_window(const Vec& internal) const {
    for (const auto& wb : window_boxes) {
        bool inside = true;
        for (int i = 0; i < internal_dim && inside; ++i) inside = internal(i) >= wb.lo(i) && internal(i) < wb.hi(i);
        if (inside) return true;
    }
    for (const auto& wp : window_points)
        if ((internal - wp).cwiseAbs().maxCoeff() <= 1e-9) return true;
    return false;
}

double CutProjectSpec::density() const {
    // mu_A(W) / vol(V / (L cap V)); boxes assume A = R^m, points assume A = Z^m.
    const double covol = std::abs(basis.determinant());
    if (!window_points.empty()) return static_cast<double>(window_points.size()) / covol;
    double mu = 0.0;
    for (const auto& wb : window_boxes) mu += (wb.hi - wb.lo).prod();
    return mu / covol;
}

void CutProjectSpec::validate() const {
    const int n = ambient_dim();
    if (dim < 1 || internal_dim < 1 || n > kMaxDim) throw ValidationError("cut-and-project dimensions out of range");
    if (basis.rows() != n || basis.cols() != n) throw ValidationError("cut-and-project basis must be (d+m)x(d+m)");
    if (!basis.allFinite() || std::abs(basis.determinant()) < kDetThreshold)
        throw ValidationError("cut-and-project basis is singular");
    if (window_boxes.empty() == window_points.empty())
        throw ValidationError("window must be either a union of boxes or a finite point set");
    for (const auto& wb : window_boxes) {
        if (wb.lo.size() != internal_dim || wb.hi.size() != internal_dim)
            throw ValidationError("window box dimension mismatch");
        if (!((wb.hi - wb.lo).array() > 0.0).all()) throw ValidationError("window box has empty interior");
    }
    for (const auto& wp : window_points)
        if (wp.size() != internal_dim) throw ValidationError("window point dimension mismatch");
    if (internal_shift.size() != 0 && internal_shift.size() != internal_dim)
        throw ValidationError("internal shift dimension mismatch");
    // Injectivity of the projection on a sample of about 2000 points.
    const double half = 0.5 * std::pow(2000.0 / density(), 1.0 / dim);
    std::vector<Vec> pts;
    enumerate_cut_project(*this, Box::cube(dim, half), [&](const Vec& x) { pts.push_back(x); });
    if (pts.size() >= 2 && min_gap(pts) <= 1e-9)
        throw ValidationError("projection is not injective on the window (coincident points)");
}

int CutProjectUnion::dim() const { return components.empty() ? 0 : components.front().dim; }

double CutProjectUnion::density() const {
    double s = 0.0;
    for (const auto& c : components) s += c.density();
    return s;
}

void CutProjectUnion::validate() const {
    if (components.empty()) throw ValidationError("cut-and-project union has no components");
    for (const auto& c : components) {
        if (c.dim != dim()) throw ValidationError("cut-and-project union components differ in dimension");
        c.validate();
    }
    const double half = 0.5 * std::pow(2000.0 / density(), 1.0 / dim());
    auto pts = points_in_box(PointSource{*this}, Box::cube(dim(), half));
    if (pts.size() >= 2 && min_gap(pts) <= 1e-9) throw ValidationError("cut-and-project union components intersect");
}

double DeloneUnionSpec::density() const { return static_cast<double>(translates.size()) * base.density(); }

void DeloneUnionSpec::validate() const {
    base.validate();
    if (translates.empty()) throw ValidationError("Delone union needs at least one translate");
    for (const auto& t : translates)
        if (t.size() != base.dim()) throw ValidationError("translate dimension mismatch");
    // Distinct translates must differ modulo the base lattice.
    const Mat inv = base.basis.inverse();
    for (std::size_t a = 0; a < translates.size(); ++a)
        for (std::size_t b = a + 1; b < translates.size(); ++b) {
            Vec k = (translates[a] - translates[b]).transpose() * inv;
            if ((k.array() - k.array().round()).abs().maxCoeff() < 1e-9)
                throw ValidationError("Delone union translates coincide modulo the lattice");
        }
}

CutProjectSpec DeloneUnionSpec::as_cut_project() const {
    const int d = dim();
    const int m = static_cast<int>(translates.size());
    CutProjectSpec cp;
    cp.dim = d;
    cp.internal_dim = m;
    cp.basis = Mat::Zero(d + m, d + m);
    cp.basis.topLeftCorner(d, d) = base.basis;
    for (int j = 0; j < m; ++j) {
        cp.basis.block(d + j, 0, 1, d) = translates[j].transpose();
        cp.basis(d + j, d + j) = 1.0;
    }
    for (int j = 0; j < m; ++j) cp.window_points.push_back(unit(m, j));
    cp.internal_shift = Vec::Zero(m);
    return cp;
}

double PoissonSpec::cell_edge() const { return std::pow(intensity, -1.0 / dim); }

void PoissonSpec::validate() const {
    if (dim < 1 || dim > kMaxDim) throw ValidationError("Poisson dimension out of range");
    if (!(intensity > 0.0) || !std::isfinite(intensity)) throw ValidationError("Poisson intensity must be positive");
}

int source_dim(const PointSource& source) {
    return std::visit(
        [](const auto& s) -> int {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, CutProjectSpec>) return s.dim;
            else if constexpr (std::is_same_v<T, PoissonSpec>) return s.dim;
            else return s.dim();
        },
        source);
}

double source_density(const PointSource& source) {
    return std::visit(
        [](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, PoissonSpec>) return s.intensity;
            else return s.density();
        },
        source);
}

void validate_source(const PointSource& source) {
    std::visit([](const auto& s) { s.validate(); }, source);
}

bool ScattererConfig::is_pure_lattice() const {
    return !jitter && (std::holds_alternative<LatticeSpec>(source) || std::holds_alternative<DeloneUnionSpec>(source));
}

double ScattererConfig::max_displacement() const { return jitter ? radius * jitter->amplitude : 0.0; }

void ScattererConfig::validate() const {
    validate_source(source);
    if (!(radius > 0.0) || !std::isfinite(radius)) throw ValidationError("radius must be positive");
    if (jitter && !(jitter->amplitude >= 0.0)) throw ValidationError("jitter amplitude must be non-negative");
    if (geometry == Geometry::Slab && dim() < 2) throw ValidationError("slab geometry needs d >= 2");
}

void for_each_lattice_point(const Mat& basis, const Vec& offset, const Box& box,
                            const std::function<void(const Vec&)>& f) {
    check_box(box, static_cast<int>(basis.rows()));
    enumerate_lattice(LatticeSpec{basis}, box, offset, f);
}

void for_each_point(const PointSource& source, const Box& box, const std::function<void(const Vec&)>& f) {
    check_box(box, source_dim(source));
    if (source_density(source) * box.volume() > 1e15) throw ValidationError("box volume overflow");
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, LatticeSpec>) {
                enumerate_lattice(s, box, Vec::Zero(s.dim()), f);
            } else if constexpr (std::is_same_v<T, CutProjectSpec>) {
                enumerate_cut_project(s, box, f);
            } else if constexpr (std::is_same_v<T, CutProjectUnion>) {
                for (const auto& c : s.components) enumerate_cut_project(c, box, f);
            } else if constexpr (std::is_same_v<T, DeloneUnionSpec>) {
                for (const auto& t : s.translates) enumerate_lattice(s.base, box, t, f);
            } else {
                enumerate_poisson(s, box, f);
            }
        },
        source);
}

void for_each_point(const ScattererConfig& config, const Box& box, const std::function<void(const Vec&)>& f) {
    if (!config.jitter || config.jitter->amplitude == 0.0) {
        for_each_point(config.source, box, f);
        return;
    }
    const double amp = config.max_displacement();
    const std::uint64_t seed = config.jitter->seed;
    const int d = config.dim();
    for_each_point(config.source, box.inflated(amp), [&](const Vec& x) {
        SplitMix64 g(point_seed(seed, x));
        const Vec y = x + amp * random_in_ball(d, g);
        if (box.contains(y)) f(y);
    });
}

void sort_lexicographic(std::vector<Vec>& points) {
    std::sort(points.begin(), points.end(), [](const Vec& a, const Vec& b) {
        for (int i = 0; i < a.size(); ++i) {
            if (a(i) < b(i)) return true;
            if (a(i) > b(i)) return false;
        }
        return false;
    });
}

std::vector<Vec> points_in_box(const PointSource& source, const Box& box) {
    check_box(box, source_dim(source));
    if (source_density(source) * box.volume() > kMaxExpectedPoints) throw ValidationError("box volume overflow");
    std::vector<Vec> out;
    for_each_point(source, box, [&](const Vec& x) { out.push_back(x); });
    sort_lexicographic(out);
    return out;
}

std::vector<Vec> points_in_box(const ScattererConfig& config, const Box& box) {
    check_box(box, config.dim());
    if (config.density() * box.volume() > kMaxExpectedPoints) throw ValidationError("box volume overflow");
    std::vector<Vec> out;
    for_each_point(config, box, [&](const Vec& x) { out.push_back(x); });
    sort_lexicographic(out);
    return out;
}

std::uint64_t count_in_box(const ScattererConfig& config, const Box& box) {
    std::uint64_t n = 0;
    for_each_point(config, box, [&](const Vec&) { ++n; });
    return n;
}

double fibonacci_formula_point(long long j) {
    const double s = std::sqrt(1.0 + kGolden * kGolden);
    const double q = static_cast<double>(j) / kGolden;
    const double dist = std::abs(q - std::round(q));
    return static_cast<double>(j) / s + dist / (kGolden * s);
}

CutProjectUnion fibonacci_spec() {
    // Split by the sign of delta = j/tau - n, n the nearest integer: on each
    // half the formula is linear in (j, n).
    const double t = kGolden;
    const double s = std::sqrt(1.0 + t * t);
    CutProjectUnion u;
    for (int sign : {+1, -1}) {
        CutProjectSpec c;
        c.dim = 1;
        c.internal_dim = 1;
        c.basis = Mat(2, 2);
        c.basis << 1.0 / s + sign / (t * t * s), 1.0 / t,
                   -sign / (t * s), -1.0;
        c.window_boxes = {sign > 0 ? WindowBox{make_vec({0.0}), make_vec({0.5})}
                                   : WindowBox{make_vec({-0.5}), make_vec({0.0})}};
        c.internal_shift = Vec::Zero(1);
        u.components.push_back(c);
    }
    return u;
}

CutProjectSpec fibonacci_chain_spec() {
    const double t = kGolden;
    const double s = std::sqrt(1.0 + t * t);
    CutProjectSpec c;
    c.dim = 1;
    c.internal_dim = 1;
    c.basis = Mat(2, 2);
    c.basis << t / s, -1.0 / s,
               1.0 / s, t / s;
    c.window_boxes = {WindowBox{make_vec({-1.0 / s}), make_vec({t / s})}};
    c.internal_shift = Vec::Zero(1);
    return c;
}

CutProjectUnion wennberg_spec() {
    CutProjectUnion out;
    for (const auto& c : fibonacci_spec().components) {
        CutProjectSpec w;
        w.dim = 2;
        w.internal_dim = 1;
        w.basis = Mat::Zero(3, 3);
        w.basis(0, 0) = c.basis(0, 0);
        w.basis(0, 2) = c.basis(0, 1);
        w.basis(1, 0) = c.basis(1, 0);
        w.basis(1, 2) = c.basis(1, 1);
        w.basis(2, 1) = 1.0;
        w.window_boxes = c.window_boxes;
        w.internal_shift = Vec::Zero(1);
        out.components.push_back(w);
    }
    return out;
}

DeloneUnionSpec honeycomb_spec() {
    DeloneUnionSpec h;
    h.base.basis = Mat(2, 2);
    h.base.basis << 1.0, 0.0,
                    0.5, std::sqrt(3.0) / 2.0;
    h.translates = {make_vec({0.0, 0.0}), make_vec({0.5, 0.5 / std::sqrt(3.0)})};
    return h;
}

std::vector<double> estimate_density(const ScattererConfig& config, const std::vector<double>& T, const Box& base) {
    check_box(base, config.dim());
    std::vector<double> out;
    out.reserve(T.size());
    for (double t : T) {
        if (!(t > 0.0)) throw ValidationError("scale factors must be positive");
        Box b{base.lo * t, base.hi * t};
        out.push_back(static_cast<double>(count_in_box(config, b)) / b.volume());
    }
    return out;
}

double min_gap(const std::vector<Vec>& points) {
    if (points.size() < 2) throw ValidationError("min_gap needs at least two points");
    const int d = static_cast<int>(points.front().size());
    Vec lo = points.front(), hi = points.front();
    for (const auto& p : points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    double extent = (hi - lo).maxCoeff();
    if (extent <= 0.0) return 0.0;
    // Start from the mean spacing; the answer is exact once it is below the cell edge.
    double vol = 1.0;
    for (int i = 0; i < d; ++i) vol *= std::max(hi(i) - lo(i), extent * 1e-6);
    double edge = std::pow(vol / static_cast<double>(points.size()), 1.0 / d);
    struct KeyHash {
        std::size_t operator()(const std::array<std::int64_t, kMaxDim>& k) const {
            std::uint64_t h = 0;
            for (auto v : k) h = hash_combine(h, static_cast<std::uint64_t>(v));
            return static_cast<std::size_t>(h);
        }
    };
    for (;;) {
        std::unordered_map<std::array<std::int64_t, kMaxDim>, std::vector<std::size_t>, KeyHash> grid;
        grid.reserve(points.size());
        auto key_of = [&](const Vec& p) {
            std::array<std::int64_t, kMaxDim> k{};
            for (int i = 0; i < d; ++i) k[i] = floor_index((p(i) - lo(i)) / edge);
            return k;
        };
        for (std::size_t i = 0; i < points.size(); ++i) grid[key_of(points[i])].push_back(i);
        double best2 = std::numeric_limits<double>::infinity();
        int ncells = 1;
        for (int i = 0; i < d; ++i) ncells *= 3;
        for (const auto& [key, members] : grid) {
            for (int code = 0; code < ncells; ++code) {
                std::array<std::int64_t, kMaxDim> nk = key;
                int c = code;
                for (int i = 0; i < d; ++i) {
                    nk[i] += (c % 3) - 1;
                    c /= 3;
                }
                if (nk < key) continue;
                auto it = grid.find(nk);
                if (it == grid.end()) continue;
                const bool same = (nk == key);
                for (std::size_t a = 0; a < members.size(); ++a) {
                    const std::size_t b0 = same ? a + 1 : 0;
                    for (std::size_t b = b0; b < it->second.size(); ++b)
                        best2 = std::min(best2, (points[members[a]] - points[it->second[b]]).squaredNorm());
                }
            }
        }
        if (std::sqrt(best2) <= edge) return std::sqrt(best2);
        edge *= 2.0;
    }
}

double min_gap(const ScattererConfig& config, const Box& box) { return min_gap(points_in_box(config, box)); }

void validate_non_overlap(const ScattererConfig& config, const Box& box) {
    if (config.is_poisson()) return;
    const auto pts = points_in_box(config, box);
    if (pts.size() < 2) return;
    const double gap = min_gap(pts);
    if (!(gap > 2.0 * config.radius)) {
        std::ostringstream os;
        os << "scatterers overlap: minimum center distance " << gap << " <= 2r = " << 2.0 * config.radius;
        throw ValidationError(os.str());
    }
}

}  // namespace kinlim
