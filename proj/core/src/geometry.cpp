#include "kinlim/geometry.hpp"

#include <cmath>
#include <limits>

namespace kinlim {

double Box::volume() const {
    double v = 1.0;
    for (int i = 0; i < dim(); ++i) v *= (hi(i) - lo(i));
    return v;
}

bool Box::contains(const Vec& x) const {
    for (int i = 0; i < dim(); ++i)
        if (!(x(i) >= lo(i) && x(i) < hi(i))) return false;
    return true;
}

Box Box::inflated(double margin) const {
    Box b = *this;
    b.lo.array() -= margin;
    b.hi.array() += margin;
    return b;
}

Box Box::cube(int d, double half_width) {
    return Box{Vec::Constant(d, -half_width), Vec::Constant(d, half_width)};
}

Vec make_vec(std::initializer_list<double> values) {
    Vec v(static_cast<Eigen::Index>(values.size()));
    int i = 0;
    for (double x : values) v(i++) = x;
    return v;
}

Vec zeros(int d) { return Vec::Zero(d); }

Vec unit(int d, int axis) {
    Vec v = Vec::Zero(d);
    v(axis) = 1.0;
    return v;
}

double unit_ball_volume(int d) {
    return std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
}

Mat orthonormal_complement(const Vec& v) {
    const int d = static_cast<int>(v.size());
    if (d == 2) {
        Mat m(2, 1);
        m.col(0) = perp_ccw(v);
        return m;
    }
    if (d == 3) {
        const double sign = std::copysign(1.0, v(2));
        const double a = -1.0 / (sign + v(2));
        const double b = v(0) * v(1) * a;
        Mat m(3, 2);
        m.col(0) = make_vec({1.0 + sign * v(0) * v(0) * a, sign * b, -sign * v(0)});
        m.col(1) = make_vec({b, sign + v(1) * v(1) * a, -v(1)});
        return m;
    }
    // Generic: Householder reflection mapping e_0 to v; its other columns span v-perp.
    Mat h = Mat::Identity(d, d);
    Vec u = v;
    u(0) -= 1.0;
    const double n2 = u.squaredNorm();
    if (n2 > 1e-30) h -= 2.0 * u * u.transpose() / n2;
    return h.rightCols(d - 1);
}

std::optional<double> ray_sphere(const Vec& q, const Vec& v, const Vec& c, double radius, double t_min) {
    const Vec rel = c - q;
    const double vv = v.squaredNorm();
    const double proj = rel.dot(v) / vv;
    const double perp2 = (rel - proj * v).squaredNorm();
    const double disc = radius * radius - perp2;
    if (disc <= 1e-14 * radius * radius) return std::nullopt;
    const double h = std::sqrt(disc / vv);
    const double t0 = proj - h;
    if (t0 > t_min) return t0;
    return std::nullopt;
}

std::optional<std::pair<double, double>> ray_box(const Vec& q, const Vec& v, const Box& box) {
    double t0 = -std::numeric_limits<double>::infinity();
    double t1 = std::numeric_limits<double>::infinity();
    for (int i = 0; i < box.dim(); ++i) {
        if (v(i) == 0.0) {
            if (q(i) < box.lo(i) || q(i) > box.hi(i)) return std::nullopt;
            continue;
        }
        double a = (box.lo(i) - q(i)) / v(i);
        double b = (box.hi(i) - q(i)) / v(i);
        if (a > b) std::swap(a, b);
        t0 = std::max(t0, a);
        t1 = std::min(t1, b);
    }
    if (t0 > t1) return std::nullopt;
    return std::make_pair(t0, t1);
}

}  // namespace kinlim
