#include "kinlim/microdyn.hpp"

#include <algorithm>
#include <cmath>

namespace kinlim {

RenormalizedProcess::RenormalizedProcess(ScattererConfig config, Vec y, Vec w_prime, double r, ScatteringModel model)
    : config_(std::move(config)), y_(std::move(y)), w_prime_(std::move(w_prime)), r_(r), d_(config_.dim()) {
    if (!(r_ > 0.0)) throw ValidationError("r must be positive");
    if (y_.size() != d_ || w_prime_.size() != d_ - 1) throw ValidationError("renormalized process: dimension mismatch");
    Mat S;
    if (const auto* kick = std::get_if<KickPotential>(&model)) {
        if (!kick->contains(w_prime_)) throw ValidationError("w' outside the kick support");
        S = kick->shear_matrix(w_prime_);
    } else {
        const auto& map = std::get<LorentzScatteringMap>(model);
        if (map.dim != d_) throw ValidationError("scattering map dimension mismatch");
        S = scattering_matrix(map, w_prime_);
    }
    Mat D = Mat::Identity(d_, d_);
    D(0, 0) = std::pow(r_, d_ - 1);
    for (int i = 1; i < d_; ++i) D(i, i) = 1.0 / r_;
    // Row convention x S D becomes D^T S^T x for columns.
    forward_ = D * S.transpose();
    backward_ = forward_.inverse();
}

Vec RenormalizedProcess::map(const Vec& x) const {
    Vec th = forward_ * (x - y_);
    th.tail(d_ - 1) -= w_prime_;
    return th;
}

Vec RenormalizedProcess::unmap(const Vec& theta) const {
    Vec t = theta;
    t.tail(d_ - 1) += w_prime_;
    return y_ + backward_ * t;
}

void RenormalizedProcess::for_each(const Box& box, const std::function<void(const Vec&)>& f) const {
    if (box.dim() != d_) throw ValidationError("query box dimension mismatch");
    // Lattices: Theta_r is itself a translated lattice with basis rows forward * b_i.
    const LatticeSpec* lat = std::get_if<LatticeSpec>(&config_.source);
    const DeloneUnionSpec* del = std::get_if<DeloneUnionSpec>(&config_.source);
    if (!config_.jitter && (lat || del)) {
        const Mat& B = lat ? lat->basis : del->base.basis;
        const Mat basis = (forward_ * B.transpose()).transpose();
        std::vector<Vec> shifts = del ? del->translates : std::vector<Vec>{Vec::Zero(d_)};
        for (const Vec& t : shifts) {
            Vec offset = forward_ * (t - y_);
            offset.tail(d_ - 1) -= w_prime_;
            for_each_lattice_point(basis, offset, box, f);
        }
        return;
    }
    // General sources: cut the long preimage into pieces along the stretched
    // axis, enumerate the bounding box of each piece and keep each point once.
    double transverse = 0.0;
    for (int i = 1; i < d_; ++i) transverse = std::max(transverse, (box.hi(i) - box.lo(i)) * r_);
    const double spacing = std::pow(config_.density(), -1.0 / d_);
    const double piece = 4.0 * std::max(transverse, spacing);
    const double length = (box.hi(0) - box.lo(0)) / std::pow(r_, d_ - 1);
    const long pieces = std::max(1L, static_cast<long>(std::ceil(length / piece)));
    const int ncorners = 1 << d_;
    for (long p = 0; p < pieces; ++p) {
        const double a = box.lo(0) + (box.hi(0) - box.lo(0)) * static_cast<double>(p) / static_cast<double>(pieces);
        const double b = p + 1 == pieces ? box.hi(0)
                                         : box.lo(0) + (box.hi(0) - box.lo(0)) * static_cast<double>(p + 1) /
                                                           static_cast<double>(pieces);
        Box sub = box;
        sub.lo(0) = a;
        sub.hi(0) = b;
        Vec lo = Vec::Constant(d_, std::numeric_limits<double>::infinity());
        Vec hi = -lo;
        for (int c = 0; c < ncorners; ++c) {
            Vec corner(d_);
            for (int i = 0; i < d_; ++i) corner(i) = (c >> i) & 1 ? sub.hi(i) : sub.lo(i);
            const Vec x = unmap(corner);
            lo = lo.cwiseMin(x);
            hi = hi.cwiseMax(x);
        }
        Box pre{lo, hi};
        pre = pre.inflated(1e-9 * (1.0 + pre.hi.cwiseAbs().maxCoeff()));
        for_each_point(config_, pre, [&](const Vec& x) {
            const Vec th = map(x);
            if (sub.contains(th)) f(th);
        });
    }
}

std::vector<Vec> RenormalizedProcess::points_in_box(const Box& box) const {
    std::vector<Vec> out;
    for_each(box, [&](const Vec& x) { out.push_back(x); });
    sort_lexicographic(out);
    return out;
}

std::uint64_t RenormalizedProcess::count_in_box(const Box& box) const {
    std::uint64_t n = 0;
    for_each(box, [&](const Vec&) { ++n; });
    return n;
}

}  // namespace kinlim
