#pragma once

#include "kinlim/types.hpp"

#include <functional>
#include <string>
#include <vector>

namespace kinlim {

enum class AngleCondition { A, B };

// Scattering angle theta(w) for |w| in [0,1).
struct AngleFunction {
    std::function<double(double)> theta;
    std::function<double(double)> derivative;
    AngleCondition condition = AngleCondition::A;
    std::string name;

    double operator()(double w) const;
    double dtheta(double w) const;
    // Monotonicity and endpoint conditions on a 10^3-point grid.
    void validate() const;
};

AngleFunction specular_angle();
// Monotone cubic (Fritsch-Carlson) interpolation through (w_i, theta_i), w_0 = 0.
AngleFunction tabulated_angle(std::vector<double> w, std::vector<double> theta);
AngleFunction load_angle_csv(const std::string& path);

struct LorentzScatteringMap {
    int dim = 2;
    AngleFunction angle = specular_angle();
};

// S(w) = exp of the generator with off-diagonal blocks -theta w^T / theta w,
// in the frame where v_in = e_1; w in the unit ball of R^{d-1}.
Mat scattering_matrix(const LorentzScatteringMap& map, const Vec& w);

struct ScatterResult {
    Vec v_out;
    Vec s;  // exit vector, orthogonal to v_out, units of r
};

// b: impact vector in world coordinates, orthogonal to v_in, |b| < 1.
ScatterResult apply_scattering(const LorentzScatteringMap& map, const Vec& v_in, const Vec& b);

// Signed planar impact parameter along the ccw normal of v.
double signed_parameter(const Vec& v, const Vec& b);
// World vector from a signed planar parameter.
Vec from_signed_parameter(const Vec& v, double w);

struct CrossSection {
    double sigma = 0.0;
    bool clamped = false;
};

// sigma = w^{d-2} |dw/dtheta| / sin^{d-2}(theta), at impact radius w.
CrossSection differential_cross_section(const LorentzScatteringMap& map, double w);
double total_cross_section(int d);

// Kick potential with gradient kappa*w on the box Sigma = (-1/2, 1/2)^n.
struct KickPotential {
    int internal_dim = 1;
    double kappa = 1.0;
    double half_width = 0.5;

    bool contains(const Vec& w) const;
    Vec gradient(const Vec& w) const;
    Vec inverse_gradient(const Vec& p) const;
    double total_cross_section() const;
    // sigma(p) for the linear gradient: kappa^{-n}.
    double cross_section_density() const;
    // Row-convention shear [[1, dW(w)], [0, I]].
    Mat shear_matrix(const Vec& w) const;
    void validate() const;
};

Vec kick_apply(const KickPotential& pot, const Vec& p_in, const Vec& w);

}  // namespace kinlim
