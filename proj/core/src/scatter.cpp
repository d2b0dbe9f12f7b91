#include "kinlim/scatter.hpp"

#include <math.h>  // boost 1.74 pchip uses unqualified isnan

#include <boost/math/interpolators/pchip.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace kinlim {

namespace {

void check_w(double w) {
    if (!(w >= 0.0 && w < 1.0)) throw ValidationError("impact radius outside [0,1)");
}

}  // namespace

double AngleFunction::operator()(double w) const {
    check_w(w);
    return theta(w);
}

double AngleFunction::dtheta(double w) const {
    check_w(w);
    return derivative(w);
}

void AngleFunction::validate() const {
    if (!theta || !derivative) throw ValidationError("angle function is not callable");
    const double t0 = theta(0.0);
    const double expected = condition == AngleCondition::A ? kPi : -kPi;
    if (std::abs(t0 - expected) > 1e-9) throw ValidationError("angle function violates theta(0) = +-pi");
    for (int i = 0; i < 1000; ++i) {
        const double w = (i + 0.5) / 1000.0;
        const double d = derivative(w);
        const double t = theta(w);
        const bool ok = condition == AngleCondition::A ? (d < 0.0 && t > 0.0) : (d > 0.0 && t < 0.0);
        if (!ok) {
            std::ostringstream os;
            os << "angle function '" << name << "' is not strictly monotone with the required sign at w=" << w;
            throw ValidationError(os.str());
        }
    }
}

AngleFunction specular_angle() {
    AngleFunction f;
    f.theta = [](double w) { return kPi - 2.0 * std::asin(w); };
    f.derivative = [](double w) { return -2.0 / std::sqrt(1.0 - w * w); };
    f.condition = AngleCondition::A;
    f.name = "specular";
    return f;
}

AngleFunction tabulated_angle(std::vector<double> w, std::vector<double> theta) {
    if (w.size() != theta.size() || w.size() < 4) throw ValidationError("tabulated angle needs at least 4 (w, theta) pairs");
    if (w.front() != 0.0) throw ValidationError("tabulated angle must start at w = 0");
    for (std::size_t i = 1; i < w.size(); ++i)
        if (!(w[i] > w[i - 1])) throw ValidationError("tabulated w values must increase");
    const double wmax = w.back();
    auto spline = std::make_shared<boost::math::interpolators::pchip<std::vector<double>>>(std::move(w), std::move(theta));
    AngleFunction f;
    f.theta = [spline, wmax](double x) { return (*spline)(std::min(x, wmax)); };
    f.derivative = [spline, wmax](double x) { return spline->prime(std::min(x, wmax)); };
    f.condition = (*spline)(0.0) > 0.0 ? AngleCondition::A : AngleCondition::B;
    f.name = "tabulated";
    f.validate();
    return f;
}

AngleFunction load_angle_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open angle table " + path);
    std::vector<double> w, t;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        double a, b;
        if (!(ls >> a >> b)) continue;  // header row
        w.push_back(a);
        t.push_back(b);
    }
    return tabulated_angle(std::move(w), std::move(t));
}

Mat scattering_matrix(const LorentzScatteringMap& map, const Vec& w) {
    const int d = map.dim;
    if (w.size() != d - 1) throw ValidationError("impact vector must have d-1 components");
    const double nw = w.norm();
    if (!(nw < 1.0)) throw ValidationError("impact vector outside the unit ball");
    Mat S = Mat::Identity(d, d);
    if (nw == 0.0) {
        // v_out = -v_in: any rotation by pi in a plane containing e_1.
        S(0, 0) = -1.0;
        S(1, 1) = -1.0;
        return S;
    }
    const double th = map.angle(nw);
    // Rodrigues: exp(th K), K = u e1^T - e1 u^T with u = (0, w/|w|).
    Mat K = Mat::Zero(d, d);
    for (int j = 1; j < d; ++j) {
        const double u = w(j - 1) / nw;
        K(j, 0) = u;
        K(0, j) = -u;
    }
    S += std::sin(th) * K + (1.0 - std::cos(th)) * (K * K);
    return S;
}

ScatterResult apply_scattering(const LorentzScatteringMap& map, const Vec& v_in, const Vec& b) {
    if (!(b.norm() < 1.0)) throw ValidationError("impact vector outside the unit ball");
    // Project out roundoff along v_in; otherwise |v| drifts over long trajectories.
    const Vec u = v_in.normalized();
    const Vec bp = b - b.dot(u) * u;
    const double nb = bp.norm();
    if (nb == 0.0) return ScatterResult{-u, Vec::Zero(v_in.size())};
    const double th = map.angle(nb);
    const double c = std::cos(th);
    const double s = std::sin(th);
    ScatterResult r;
    r.v_out = (c * u + (s / nb) * bp).normalized();
    r.s = -nb * s * u + c * bp;
    return r;
}

double signed_parameter(const Vec& v, const Vec& b) { return b(1) * v(0) - b(0) * v(1); }

Vec from_signed_parameter(const Vec& v, double w) { return make_vec({-w * v(1), w * v(0)}); }

CrossSection differential_cross_section(const LorentzScatteringMap& map, double w) {
    CrossSection cs;
    if (!(w > 0.0 && w < 1.0)) throw ValidationError("cross section needs w in (0,1)");
    if (w > 1.0 - 1e-8) {
        w = 1.0 - 1e-8;
        cs.clamped = true;
    }
    const double dth = map.angle.dtheta(w);
    if (dth == 0.0) throw ValidationError("theta'(w) = 0 violates strict monotonicity");
    const double th = map.angle(w);
    const int d = map.dim;
    cs.sigma = std::pow(w, d - 2) / std::abs(dth) / std::pow(std::abs(std::sin(th)), d - 2);
    return cs;
}

double total_cross_section(int d) { return unit_ball_volume(d - 1); }

bool KickPotential::contains(const Vec& w) const {
    if (w.size() != internal_dim) return false;
    for (int i = 0; i < internal_dim; ++i)
        if (!(w(i) > -half_width && w(i) < half_width)) return false;
    return true;
}

Vec KickPotential::gradient(const Vec& w) const { return kappa * w; }

Vec KickPotential::inverse_gradient(const Vec& p) const { return p / kappa; }

double KickPotential::total_cross_section() const { return std::pow(2.0 * half_width, internal_dim); }

double KickPotential::cross_section_density() const { return std::pow(kappa, -internal_dim); }

Mat KickPotential::shear_matrix(const Vec& w) const {
    const int d = internal_dim + 1;
    Mat S = Mat::Identity(d, d);
    S.block(0, 1, 1, internal_dim) = gradient(w).transpose();
    return S;
}

void KickPotential::validate() const {
    if (internal_dim < 1 || internal_dim + 1 > kMaxDim) throw ValidationError("kick potential dimension out of range");
    if (!(kappa != 0.0) || !std::isfinite(kappa)) throw ValidationError("kick strength must be nonzero");
    if (!(half_width > 0.0)) throw ValidationError("kick support must be nonempty");
}

Vec kick_apply(const KickPotential& pot, const Vec& p_in, const Vec& w) {
    if (!pot.contains(w)) throw ValidationError("kick parameter outside the support");
    return p_in - pot.gradient(w);
}

}  // namespace kinlim
