#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace kinlim {

// Ambient dimensions stay small (d <= 3 physical plus internal coordinates).
inline constexpr int kMaxDim = 6;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

inline constexpr double kPi = 3.14159265358979323846;

// Bad input: configuration, arguments, preconditions.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numerical failure at run time: quadrature, rejection caps, overlaps found mid-flight.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Axis-aligned box, half-open: lo <= x < hi.
struct Box {
    Vec lo;
    Vec hi;

    int dim() const { return static_cast<int>(lo.size()); }
    double volume() const;
    bool contains(const Vec& x) const;
    Box inflated(double margin) const;
    static Box cube(int d, double half_width);
};

Vec make_vec(std::initializer_list<double> values);
Vec zeros(int d);
Vec unit(int d, int axis);

// vol of the unit ball in R^d.
double unit_ball_volume(int d);

}  // namespace kinlim
