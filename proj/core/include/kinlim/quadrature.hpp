#pragma once

#include <functional>
#include <vector>

namespace kinlim {

struct QuadOptions {
    double rel_tol = 1e-10;
    double abs_tol = 1e-13;
    unsigned max_depth = 18;
};

// Adaptive Gauss-Kronrod (7/15) over [a, b], split at the given interior breakpoints.
// b may be +infinity. Throws NumericalError when the error estimate misses the tolerance.
double integrate(const std::function<double(double)>& f, double a, double b, std::vector<double> breaks = {},
                 const QuadOptions& opts = {});

}  // namespace kinlim
