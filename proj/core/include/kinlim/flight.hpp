#pragma once

#include "kinlim/kernels.hpp"
#include "kinlim/rng.hpp"
#include "kinlim/scatter.hpp"

#include <cstdint>
#include <memory>
#include <vector>

namespace kinlim {

// Labels are points of the unit ball B^{d-1} in the frame of orthonormal_complement(V).
struct Transition {
    double xi = 0.0;
    Vec label;
};

// Draws (xi, omega) ~ k(omega', xi, omega) d xi d p(omega), and (xi, omega) ~ K d xi d p.
class TransitionSampler {
public:
    virtual ~TransitionSampler() = default;
    virtual const TransitionKernel& kernel() const = 0;
    virtual Transition sample(const Vec& previous_exit, Rng& rng) const = 0;
    virtual Transition sample_stationary(Rng& rng) const = 0;
};

class PoissonSampler : public TransitionSampler {
public:
    explicit PoissonSampler(const PoissonKernel& kernel);
    const TransitionKernel& kernel() const override { return kernel_; }
    Transition sample(const Vec& previous_exit, Rng& rng) const override;
    Transition sample_stationary(Rng& rng) const override;

private:
    PoissonKernel kernel_;
};

class LatticeSampler2D : public TransitionSampler {
public:
    explicit LatticeSampler2D(const LatticeKernel2D& kernel);
    const TransitionKernel& kernel() const override { return kernel_; }
    Transition sample(const Vec& previous_exit, Rng& rng) const override;
    Transition sample_stationary(Rng& rng) const override;

    // Conditional law of xi given both labels, by inversion of the closed-form tail.
    double sample_xi(double w_prime, double w, Rng& rng) const;
    // Marginal density of w given w' against d p(w) = dw/2.
    double label_density(double w_prime, double w) const;
    // K(xi, w) at unit density.
    double stationary_density(double xi, double w) const;

private:
    LatticeKernel2D kernel_;
};

// Box rejection for any kernel whose xi-support lies in [0, xi_max]; envelope kernel.sup().
class RejectionSampler : public TransitionSampler {
public:
    RejectionSampler(std::shared_ptr<const TransitionKernel> kernel, double xi_max, long max_tries = 10000);
    const TransitionKernel& kernel() const override { return *kernel_; }
    Transition sample(const Vec& previous_exit, Rng& rng) const override;
    Transition sample_stationary(Rng& rng) const override;

private:
    std::shared_ptr<const TransitionKernel> kernel_;
    double xi_max_;
    long max_tries_;
};

// Sampler for the analytic kernels; checks normalization for a few previous labels.
std::unique_ptr<TransitionSampler> make_sampler(const TransitionKernel& kernel);

Transition sample_transition(const TransitionSampler& sampler, const Vec& previous_exit, Rng& rng);

struct FlightState {
    Vec Q;
    Vec V;
    double xi_remaining = 0.0;
    Vec label;  // impact parameter of the upcoming collision
    long jumps = 0;
};

struct EnsembleSnapshot {
    double time = 0.0;
    std::vector<FlightState> states;
};

enum class InitialLabels { Stationary, FixedExit };

struct EnsembleOptions {
    long particles = 1000;
    std::vector<double> times;  // snapshot times, ascending
    std::uint64_t seed = 1;
    int threads = 1;
    InitialLabels initial = InitialLabels::Stationary;
    Vec fixed_exit;  // previous exit label when initial == FixedExit
    Vec Q0;          // default: origin
};

// Event-driven drift and jumps; velocities from the Lorentz scattering map.
std::vector<EnsembleSnapshot> evolve_ensemble(const TransitionSampler& sampler, const LorentzScatteringMap& map,
                                              const EnsembleOptions& options);

// One particle's path lengths xi_1..xi_n after a stationary start (the first one drawn from K).
std::vector<double> flight_path_sequence(const TransitionSampler& sampler, const LorentzScatteringMap& map, long n,
                                         std::uint64_t seed);

// Velocity after a collision with impact label omega, and the exit label in the new frame.
struct FlightCollision {
    Vec v_out;
    Vec exit_label;
};
FlightCollision flight_collide(const LorentzScatteringMap& map, const Vec& v, const Vec& label);

struct DensityProjection {
    double time = 0.0;
    double mass = 0.0;
    int dim = 2;
    std::vector<double> q_edges;                 // per-axis edges, shared by all axes
    std::vector<std::vector<double>> q_marginals;  // per axis, probability density
    std::vector<double> angle_edges;             // d = 2: polar angle of V in [-pi, pi)
    std::vector<double> angle_density;
    double mean_speed = 0.0;
    double max_speed_error = 0.0;
};

std::vector<DensityProjection> project_density(const std::vector<EnsembleSnapshot>& snapshots, double q_half_width,
                                               int bins = 50);

}  // namespace kinlim
