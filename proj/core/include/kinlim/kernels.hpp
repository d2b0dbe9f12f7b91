#pragma once

#include "kinlim/types.hpp"

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace kinlim {

double mean_free_path(double density, double sigma_bar);
double poisson_kernel(double xi, double xi_bar);
double upsilon(double x);
// Explicit planar lattice kernel; signed labels w', w in (-1,1).
double lattice_kernel_2d(double w_prime, double xi, double w, double density);

struct KernelBounds {
    double lower = 0.0;
    double upper = 0.0;
};
KernelBounds kernel_bounds(int d, double xi, double xi_bar);

double riemann_zeta(int d);
double tail_constant(int d, double density);

// k(w', xi, w) with labels in the unit ball B^{d-1} and d p = db / vol B^{d-1}.
class TransitionKernel {
public:
    virtual ~TransitionKernel() = default;

    virtual std::string name() const = 0;
    virtual int dim() const = 0;
    virtual double density() const = 0;
    virtual double k(const Vec& w_prime, double xi, const Vec& w) const = 0;

    int label_dim() const { return dim() - 1; }
    double total_cross_section() const;
    double mean_free_path() const;

    // Kinks of xi -> k(w', xi, w) and the end of its support (inf when unbounded).
    virtual std::vector<double> xi_breaks(const Vec& w_prime, const Vec& w) const;
    virtual double support_end(const Vec& w_prime, const Vec& w) const;
    // For one-dimensional labels: kinks of u -> k(u, xi, other) (equivalently k(other, xi, u)).
    virtual std::vector<double> label_breaks(double other, double xi) const;
    // Largest value of k (envelope for rejection sampling).
    virtual double sup() const = 0;

    // Closed forms of int_xi^inf k d xi' and int_0^X xi'^p k d xi' when a kernel has them.
    virtual std::optional<double> xi_tail_exact(const Vec&, double, const Vec&) const { return std::nullopt; }
    virtual std::optional<double> xi_moment_exact(const Vec&, int, double, const Vec&) const { return std::nullopt; }
    // int_xi^inf (xi' - xi) k d xi'.
    virtual std::optional<double> xi_excess_exact(const Vec&, double, const Vec&) const { return std::nullopt; }
};

class PoissonKernel : public TransitionKernel {
public:
    PoissonKernel(int d, double density);

    std::string name() const override { return "poisson"; }
    int dim() const override { return d_; }
    double density() const override { return density_; }
    double k(const Vec& w_prime, double xi, const Vec& w) const override;
    double sup() const override;

private:
    int d_;
    double density_;
};

class LatticeKernel2D : public TransitionKernel {
public:
    explicit LatticeKernel2D(double density = 1.0);

    std::string name() const override { return "lattice2d"; }
    int dim() const override { return 2; }
    double density() const override { return density_; }
    double k(const Vec& w_prime, double xi, const Vec& w) const override;
    std::vector<double> xi_breaks(const Vec& w_prime, const Vec& w) const override;
    double support_end(const Vec& w_prime, const Vec& w) const override;
    std::vector<double> label_breaks(double other, double xi) const override;
    double sup() const override;
    std::optional<double> xi_tail_exact(const Vec& w_prime, double xi, const Vec& w) const override;
    std::optional<double> xi_moment_exact(const Vec& w_prime, int order, double xi_max, const Vec& w) const override;
    std::optional<double> xi_excess_exact(const Vec& w_prime, double xi, const Vec& w) const override;

    // Closed forms in the scalar labels.
    double value(double w_prime, double xi, double w) const { return lattice_kernel_2d(w_prime, xi, w, density_); }
    // Plateau end and support end in xi.
    double xi_plateau(double w_prime, double w) const;
    double xi_support(double w_prime, double w) const;
    // int_xi^inf k(w', xi', w) d xi'.
    double tail_mass(double w_prime, double xi, double w) const;
    // int_0^X xi'^p k(w', xi', w) d xi' for p = 0, 1, 2.
    double moment(double w_prime, int order, double xi_max, double w) const;
    // int_xi^inf (xi' - xi) k(w', xi', w) d xi'.
    double excess(double w_prime, double xi, double w) const;

private:
    double density_;
};

std::unique_ptr<TransitionKernel> make_kernel(const std::string& kind, int d = 2, double density = 1.0);

// Integral of f over the label ball against d p.
double integrate_labels(const TransitionKernel& kernel, const std::function<double(const Vec&)>& f,
                        const std::vector<double>& breaks = {});

// int_xi^inf k(w', xi', w) d xi', numerically with the kernel's support and kinks.
double xi_tail(const TransitionKernel& kernel, const Vec& w_prime, double xi, const Vec& w);

double K_of(const TransitionKernel& kernel, double xi, const Vec& w);
double phi0_of(const TransitionKernel& kernel, double xi);
// int_xi^inf Phi0, i.e. xi_bar times the label average of K(xi, .).
double phi0_tail(const TransitionKernel& kernel, double xi);
// int_xi^inf int K(xi', w) d p(w) d xi', the tail of the xi-marginal of K.
double K_marginal_tail(const TransitionKernel& kernel, double xi);
// int_0^inf Phi0, int_0^inf xi Phi0 and int_0^X xi^2 Phi0, by xi-first quadrature per label pair.
double phi0_moment(const TransitionKernel& kernel, int order, double xi_max = std::numeric_limits<double>::infinity());
double kernel_normalization(const TransitionKernel& kernel);
// int int K d xi d p, via int_0^inf K d xi = (1/xi_bar) int xi' k d xi'.
double K_normalization(const TransitionKernel& kernel);

struct StationarityGrid {
    int n_xi = 100;
    int n_w = 50;
    double xi_max_over_mean = 4.0;
    double step = 1e-4;  // central-difference step relative to xi_bar
};

double stationarity_residual(const TransitionKernel& kernel, const StationarityGrid& grid = {});

}  // namespace kinlim
