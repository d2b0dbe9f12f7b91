#pragma once

#include "kinlim/types.hpp"

#include <optional>

namespace kinlim {

// Counter-clockwise normal of a planar vector.
inline Vec perp_ccw(const Vec& v) { return make_vec({-v(1), v(0)}); }

// Orthonormal basis of the hyperplane orthogonal to the unit vector v
// (columns). d=2: the ccw normal. d=3: Duff et al. branchless frame.
Mat orthonormal_complement(const Vec& v);

// Smallest t > t_min with |q + t v - c| = radius, v unit. Grazing rays
// (discriminant below 1e-14 scale^2) count as misses.
std::optional<double> ray_sphere(const Vec& q, const Vec& v, const Vec& c, double radius, double t_min);

// Parameter interval [t0, t1] where the line q + t v lies inside the box
// (closed). Empty optional if it misses.
std::optional<std::pair<double, double>> ray_box(const Vec& q, const Vec& v, const Box& box);

}  // namespace kinlim
