#pragma once

#include "kinlim/kernels.hpp"
#include "kinlim/microdyn.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <vector>

namespace kinlim {

std::vector<double> uniform_edges(double lo, double hi, int bins);
std::vector<double> log_edges(double lo, double hi, int bins);
// [0, 10 xi_bar] in 200 uniform bins, then 60 logarithmic bins up to 10^3 xi_bar.
std::vector<double> default_xi_edges(double xi_bar);
// 40 uniform bins on (-1, 1).
std::vector<double> default_label_edges();

// Counts on a product of 1 to 3 axes. Samples outside the edges are kept as
// "outside" mass; censored samples have no value at all.
class Histogram {
public:
    Histogram() = default;
    explicit Histogram(std::vector<std::vector<double>> edges);

    int dim() const { return static_cast<int>(edges_.size()); }
    const std::vector<double>& edges(int axis) const { return edges_.at(axis); }
    std::size_t bins(int axis) const { return edges_.at(axis).size() - 1; }
    std::size_t size() const { return counts_.size(); }

    void add(const double* x);
    void add(double x) { add(&x); }
    void add(double x, double y) { const double v[2] = {x, y}; add(v); }
    void add(double x, double y, double z) { const double v[3] = {x, y, z}; add(v); }
    void add_censored(std::uint64_t n = 1) { censored_ += n; }

    // Flat index of the bin holding x, or -1.
    long locate(const double* x) const;
    std::size_t flat(const std::vector<std::size_t>& idx) const;
    std::vector<std::size_t> unflat(std::size_t i) const;

    std::uint64_t count(std::size_t flat_index) const { return counts_[flat_index]; }
    const std::vector<std::uint64_t>& counts() const { return counts_; }
    std::uint64_t in_range() const;
    std::uint64_t outside() const { return outside_; }
    std::uint64_t censored() const { return censored_; }
    std::uint64_t total() const { return in_range() + outside_ + censored_; }

    double volume(std::size_t flat_index) const;
    // Probability density: count / (total * volume).
    double density(std::size_t flat_index) const;
    std::vector<double> densities() const;
    double center(int axis, std::size_t bin) const;

    // Counts add; binning must match exactly.
    void merge(const Histogram& other);
    bool same_binning(const Histogram& other) const;

private:
    std::vector<std::vector<double>> edges_;
    std::vector<std::size_t> strides_;
    std::vector<std::uint64_t> counts_;
    std::uint64_t outside_ = 0;
    std::uint64_t censored_ = 0;
};

Histogram merge(const Histogram& a, const Histogram& b);

// Monotone CDF tabulated on a grid and interpolated linearly.
class TabulatedCdf {
public:
    TabulatedCdf(std::vector<double> grid, const std::function<double(double)>& cdf);
    double operator()(double x) const;

private:
    std::vector<double> x_, f_;
};

double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf);
double ks_distance(std::vector<double> a, std::vector<double> b);
// Against a CDF at the bin edges of a 1-D histogram (censored and outside mass sit above the last edge).
double ks_distance(const Histogram& h, const std::function<double(double)>& cdf);
// sum |density - bin average of f| * volume over in-range bins (1-D), with bin averages from the CDF.
double l1_bin_error(const Histogram& h, const std::function<double(double)>& cdf);
double l1_distance(const Histogram& a, const Histogram& b);

// Free path statistics in macroscopic units xi = r^{d-1} * flight time. The
// first flight of each trajectory follows K, not Phi0, and is kept apart.
class FreePathAccumulator {
public:
    FreePathAccumulator(double r, int d, std::vector<double> edges, bool keep_samples = false);

    void add_event(const CollisionEvent& e);
    // Closes a trajectory: a censored last flight goes to the censored mass.
    void finish(const TrajectoryRecord& rec);
    void add_record(const TrajectoryRecord& rec);
    EventSink sink();
    void merge(const FreePathAccumulator& other);

    const Histogram& phi0() const { return phi0_; }
    const Histogram& first_flights() const { return first_; }
    const std::vector<double>& samples() const { return samples_; }
    const std::vector<double>& first_samples() const { return first_samples_; }
    std::uint64_t flights() const { return phi0_.total(); }
    double scale() const { return scale_; }

    // Censored flights counted at the cap.
    double mean() const;
    double mean_stderr() const;
    double first_flight_mean() const;
    double censored_fraction() const;

private:
    double scale_;
    bool keep_;
    Histogram phi0_, first_;
    std::vector<double> samples_, first_samples_;
    double sum_ = 0.0, sum2_ = 0.0, first_sum_ = 0.0, cap_sum_ = 0.0, first_cap_sum_ = 0.0;
};

struct SpotBox {
    double w_prime = 0.0, xi = 0.0, w = 0.0;
    double half_w = 0.05, half_xi = 0.1;
};

// Transition statistics (s'_{n-1}, xi_n, b_n) for planar Lorentz trajectories.
class EmpiricalKernel2D {
public:
    EmpiricalKernel2D(double r, std::vector<double> wp_edges, std::vector<double> xi_edges,
                      std::vector<double> w_edges, std::vector<SpotBox> spots = {});

    void add_event(const CollisionEvent& e);
    void finish(const TrajectoryRecord& rec);
    void add_record(const TrajectoryRecord& rec);
    EventSink sink();
    void merge(const EmpiricalKernel2D& other);

    const Histogram& histogram() const { return hist_; }
    // Transitions leaving each w' slice, including those beyond xi_max and censored ones.
    const std::vector<std::uint64_t>& slice_totals() const { return slice_totals_; }
    std::uint64_t transitions() const;

    // Conditional density against d xi d p(w), d p = dw/2, normalized per w' slice.
    double value(std::size_t i_wp, std::size_t i_xi, std::size_t i_w) const;
    // Slices with fewer than min_count transitions.
    std::vector<std::size_t> sparse_slices(std::uint64_t min_count) const;

    // Box estimate of k for a registered spot, with its Poisson standard error.
    struct Spot {
        SpotBox box;
        double value = 0.0;
        double stderr_ = 0.0;
        std::uint64_t hits = 0;
        std::uint64_t slice = 0;
    };
    Spot spot(std::size_t i) const;
    std::size_t spots() const { return spots_.size(); }

private:
    double r_;
    Histogram hist_;
    std::vector<std::uint64_t> slice_totals_;
    std::vector<SpotBox> spots_;
    std::vector<std::uint64_t> spot_hits_, spot_slice_;
    double prev_exit_ = std::numeric_limits<double>::quiet_NaN();
};

// Bin averages of an analytic kernel over the cells of an empirical one (n^3 midpoints per cell).
std::vector<double> kernel_cell_averages(const EmpiricalKernel2D& est, const LatticeKernel2D& k, int n = 4);

struct KernelComparison {
    double mean_l1 = 0.0;  // slice-averaged L1 over xi < xi_cut
    double max_l1 = 0.0;
    std::vector<double> slice_l1;
    std::vector<std::size_t> sparse;
};
KernelComparison compare_kernel(const EmpiricalKernel2D& est, const LatticeKernel2D& k, double xi_cut);
// Largest L1 distance between the xi-w conditional densities of two w' slices (xi < xi_cut).
double max_slice_spread(const EmpiricalKernel2D& est, double xi_cut);
// L1 distance between k(w', xi, w) and k(w, xi, w') on a grid with matching w and w' edges (xi < xi_cut).
double symmetry_defect(const EmpiricalKernel2D& est, double xi_cut);

// Piecewise-constant kernel from an estimate; zero beyond the last xi edge.
class HistogramKernel2D : public TransitionKernel {
public:
    HistogramKernel2D(const EmpiricalKernel2D& est, double density);

    std::string name() const override { return "empirical2d"; }
    int dim() const override { return 2; }
    double density() const override { return density_; }
    double k(const Vec& w_prime, double xi, const Vec& w) const override;
    double support_end(const Vec&, const Vec&) const override { return xi_max_; }
    std::vector<double> xi_breaks(const Vec&, const Vec&) const override { return xi_edges_; }
    double sup() const override { return sup_; }

private:
    std::vector<double> wp_edges_, xi_edges_, w_edges_;
    std::vector<double> values_;
    double density_, xi_max_, sup_ = 0.0;
};

struct TailFit {
    double slope = 0.0;
    double intercept = 0.0;  // log density at xi = 1
    double slope_stderr = 0.0;
    double constant = 0.0;   // weighted estimate of C in density ~ C xi^{exponent}
    double residual = 0.0;   // weighted mean squared residual of the free fit
    int bins = 0;
    double censored_fraction = 0.0;
};

// Weighted least squares of log density against log xi (log-space bin centers,
// Poisson weights) over the bins inside [lo, hi]. The constant assumes the given exponent.
TailFit tail_slope(const Histogram& h, double lo, double hi, double exponent = -3.0);

struct CountDistribution {
    std::map<std::uint64_t, double> pmf;
    double mean = 0.0;
    double variance = 0.0;
    long samples = 0;
    double mean_stderr = 0.0;
    double variance_stderr = 0.0;
};

CountDistribution make_distribution(const std::vector<std::uint64_t>& counts);
double tv_distance(const CountDistribution& a, const CountDistribution& b);

struct CountStatistics {
    std::vector<Box> boxes;
    std::vector<CountDistribution> per_box;
    Vec y;  // the scatterer used; empty for Poisson sources
};

// Counts of Theta_r(w') in each box, w' uniform in the unit ball. Poisson sources
// draw a fresh configuration per sample with y an extra point at the origin.
// The point y itself (mapped to (0, -w')) is not counted.
CountStatistics count_statistics(const ScattererConfig& config, const Vec& y, double r, const std::vector<Box>& boxes,
                                 long samples, std::uint64_t seed, int threads = 1);

}  // namespace kinlim
