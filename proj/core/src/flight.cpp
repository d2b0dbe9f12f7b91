#include "kinlim/flight.hpp"

#include "kinlim/geometry.hpp"
#include "kinlim/parallel.hpp"
#include "kinlim/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace kinlim {

namespace {

constexpr double kC = 12.0 / (kPi * kPi);
constexpr long kMaxTries = 10000;

Vec ball_label(int m, Rng& rng) { return random_in_ball(m, rng); }

[[noreturn]] void rejection_failed() {
    throw NumericalError("rejection sampling exhausted its retries; kernel misconfigured?");
}

}  // namespace

int hardware_threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

PoissonSampler::PoissonSampler(const PoissonKernel& kernel) : kernel_(kernel) {}

Transition PoissonSampler::sample(const Vec&, Rng& rng) const {
    const double xi = -kernel_.mean_free_path() * std::log1p(-uniform01(rng));
    return {xi, ball_label(kernel_.label_dim(), rng)};
}

Transition PoissonSampler::sample_stationary(Rng& rng) const { return sample(Vec(), rng); }

LatticeSampler2D::LatticeSampler2D(const LatticeKernel2D& kernel) : kernel_(kernel) {}

double LatticeSampler2D::label_density(double w_prime, double w) const { return kernel_.tail_mass(w_prime, 0.0, w); }

double LatticeSampler2D::sample_xi(double w_prime, double w, Rng& rng) const {
    const double g0 = kernel_.tail_mass(w_prime, 0.0, w);
    const double target = g0 * (1.0 - uniform01(rng));  // in (0, g0]
    const double slope = kernel_.sup();
    double lo = kernel_.xi_plateau(w_prime, w);
    const double g_lo = kernel_.tail_mass(w_prime, lo, w);
    if (target >= g_lo) return std::max(0.0, lo - (target - g_lo) / slope);
    double hi = kernel_.xi_support(w_prime, w);
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (kernel_.tail_mass(w_prime, mid, w) > target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

Transition LatticeSampler2D::sample(const Vec& previous_exit, Rng& rng) const {
    const double wp = previous_exit(0);
    const double a = std::abs(wp);
    const double bound = a < 1e-8 ? kC : kC * std::atanh(a) / a;
    for (long t = 0; t < kMaxTries; ++t) {
        const double w = uniform(rng, -1.0, 1.0);
        if (w <= -1.0) continue;
        if (uniform01(rng) * bound * (1.0 + 1e-12) < label_density(wp, w))
            return {sample_xi(wp, w, rng), make_vec({w})};
    }
    rejection_failed();
}

double LatticeSampler2D::stationary_density(double xi, double w) const {
    const LatticeKernel2D unit(1.0);
    auto breaks = unit.label_breaks(w, xi);
    breaks.insert(breaks.end(), {-std::abs(w), 0.0, std::abs(w), w});
    // K = (1/xi_bar) int G d p(w') with xi_bar = 1/2 and d p = dw'/2.
    return integrate([&](double wp) { return unit.tail_mass(wp, xi, w); }, -1.0, 1.0, breaks, {1e-9, 1e-13, 40});
}

Transition LatticeSampler2D::sample_stationary(Rng& rng) const {
    // Envelope at unit density: 2 on [0,2) x (-1,1); (12/pi^2)/x on the band |w| > 1 - 1/x for x >= 2.
    const double mass_a = 4.0, mass_b = kC / 2.0;
    for (long t = 0; t < kMaxTries; ++t) {
        double x, w, env;
        if (uniform01(rng) * (mass_a + mass_b) < mass_a) {
            x = 2.0 * uniform01(rng);
            w = uniform(rng, -1.0, 1.0);
            env = 2.0;
        } else {
            x = 2.0 / (1.0 - uniform01(rng));
            const double mag = 1.0 - uniform01(rng) / x;
            w = uniform01(rng) < 0.5 ? -mag : mag;
            env = kC / x;
        }
        if (!(std::abs(w) < 1.0)) continue;
        const double K = stationary_density(x, w);
        if (K > env * (1.0 + 1e-7)) throw NumericalError("stationary envelope violated");
        if (uniform01(rng) * env < K) return {x / kernel_.density(), make_vec({w})};
    }
    rejection_failed();
}

RejectionSampler::RejectionSampler(std::shared_ptr<const TransitionKernel> kernel, double xi_max, long max_tries)
    : kernel_(std::move(kernel)), xi_max_(xi_max), max_tries_(max_tries) {
    if (!kernel_) throw ValidationError("null kernel");
    if (!(xi_max > 0.0) || !std::isfinite(xi_max)) throw ValidationError("xi_max must be positive and finite");
    if (max_tries < 1) throw ValidationError("max_tries must be >= 1");
}

Transition RejectionSampler::sample(const Vec& previous_exit, Rng& rng) const {
    const double env = kernel_->sup();
    for (long t = 0; t < max_tries_; ++t) {
        const double xi = xi_max_ * uniform01(rng);
        Vec w = ball_label(kernel_->label_dim(), rng);
        if (uniform01(rng) * env < kernel_->k(previous_exit, xi, w)) return {xi, std::move(w)};
    }
    rejection_failed();
}

Transition RejectionSampler::sample_stationary(Rng& rng) const {
    // K is largest at xi = 0, where it equals 1 / xi_bar.
    const double env = 1.0 / kernel_->mean_free_path();
    for (long t = 0; t < max_tries_; ++t) {
        const double xi = xi_max_ * uniform01(rng);
        Vec w = ball_label(kernel_->label_dim(), rng);
        if (uniform01(rng) * env < K_of(*kernel_, xi, w)) return {xi, std::move(w)};
    }
    rejection_failed();
}

std::unique_ptr<TransitionSampler> make_sampler(const TransitionKernel& kernel) {
    for (double a : {0.0, 0.5}) {
        Vec wp = Vec::Zero(kernel.label_dim());
        wp(0) = a;
        const double norm = integrate_labels(kernel, [&](const Vec& w) { return xi_tail(kernel, wp, 0.0, w); });
        if (norm < 1.0 - 1e-6) throw NumericalError("kernel normalization below 1 - 1e-6 for a previous label");
    }
    if (auto* p = dynamic_cast<const PoissonKernel*>(&kernel)) return std::make_unique<PoissonSampler>(*p);
    if (auto* l = dynamic_cast<const LatticeKernel2D*>(&kernel)) return std::make_unique<LatticeSampler2D>(*l);
    throw ValidationError("no built-in sampler for kernel " + kernel.name() + "; use RejectionSampler");
}

Transition sample_transition(const TransitionSampler& sampler, const Vec& previous_exit, Rng& rng) {
    if (previous_exit.size() != sampler.kernel().label_dim()) throw ValidationError("label dimension mismatch");
    if (!(previous_exit.norm() < 1.0)) throw ValidationError("previous label outside the unit ball");
    return sampler.sample(previous_exit, rng);
}

FlightCollision flight_collide(const LorentzScatteringMap& map, const Vec& v, const Vec& label) {
    const Mat frame = orthonormal_complement(v);
    const ScatterResult res = apply_scattering(map, v, frame * label);
    Vec v_out = res.v_out / res.v_out.norm();
    Vec exit = orthonormal_complement(v_out).transpose() * res.s;
    // Roundoff can push |s| to 1 at grazing impacts.
    const double n = exit.norm();
    if (n >= 1.0) exit *= (1.0 - 1e-15) / n;
    return {std::move(v_out), std::move(exit)};
}

std::vector<EnsembleSnapshot> evolve_ensemble(const TransitionSampler& sampler, const LorentzScatteringMap& map,
                                              const EnsembleOptions& options) {
    const int d = sampler.kernel().dim();
    if (map.dim != d) throw ValidationError("scattering map and kernel dimensions differ");
    if (options.particles < 1) throw ValidationError("need at least one particle");
    if (!std::is_sorted(options.times.begin(), options.times.end()) ||
        (!options.times.empty() && options.times.front() < 0.0))
        throw ValidationError("snapshot times must be ascending and >= 0");
    if (options.initial == InitialLabels::FixedExit && options.fixed_exit.size() != d - 1)
        throw ValidationError("fixed exit label has the wrong dimension");
    const Vec q0 = options.Q0.size() == d ? options.Q0 : Vec(Vec::Zero(d));

    std::vector<EnsembleSnapshot> snaps(options.times.size());
    for (std::size_t k = 0; k < snaps.size(); ++k) {
        snaps[k].time = options.times[k];
        snaps[k].states.resize(options.particles);
    }
    parallel_for(options.particles, options.threads, [&](long i) {
        Rng rng(derive_seed(options.seed, static_cast<std::uint64_t>(i)));
        FlightState s;
        s.Q = q0;
        s.V = random_unit_vector(d, rng);
        Transition tr = options.initial == InitialLabels::Stationary ? sampler.sample_stationary(rng)
                                                                      : sampler.sample(options.fixed_exit, rng);
        s.xi_remaining = tr.xi;
        s.label = std::move(tr.label);
        double t = 0.0;
        for (std::size_t k = 0; k < snaps.size(); ++k) {
            const double ts = options.times[k];
            while (t + s.xi_remaining <= ts) {
                s.Q += s.V * s.xi_remaining;
                t += s.xi_remaining;
                FlightCollision fc = flight_collide(map, s.V, s.label);
                s.V = std::move(fc.v_out);
                Transition next = sampler.sample(fc.exit_label, rng);
                s.xi_remaining = next.xi;
                s.label = std::move(next.label);
                ++s.jumps;
            }
            FlightState snap = s;
            snap.Q += s.V * (ts - t);
            snap.xi_remaining -= ts - t;
            snaps[k].states[i] = std::move(snap);
        }
    });
    return snaps;
}

std::vector<double> flight_path_sequence(const TransitionSampler& sampler, const LorentzScatteringMap& map, long n,
                                         std::uint64_t seed) {
    if (n < 1) throw ValidationError("need n >= 1");
    Rng rng(seed);
    Vec v = random_unit_vector(sampler.kernel().dim(), rng);
    Transition tr = sampler.sample_stationary(rng);
    std::vector<double> out;
    out.reserve(n);
    out.push_back(tr.xi);
    while (static_cast<long>(out.size()) < n) {
        FlightCollision fc = flight_collide(map, v, tr.label);
        v = std::move(fc.v_out);
        tr = sampler.sample(fc.exit_label, rng);
        out.push_back(tr.xi);
    }
    return out;
}

std::vector<DensityProjection> project_density(const std::vector<EnsembleSnapshot>& snapshots, double q_half_width,
                                               int bins) {
    if (snapshots.empty()) throw ValidationError("no snapshots");
    if (!(q_half_width > 0.0) || bins < 1) throw ValidationError("invalid projection grid");
    std::vector<DensityProjection> out;
    for (const auto& snap : snapshots) {
        if (snap.states.empty()) throw ValidationError("empty snapshot");
        DensityProjection p;
        p.time = snap.time;
        p.dim = static_cast<int>(snap.states.front().Q.size());
        p.mass = static_cast<double>(snap.states.size());
        const double dq = 2.0 * q_half_width / bins;
        for (int b = 0; b <= bins; ++b) p.q_edges.push_back(-q_half_width + b * dq);
        p.q_marginals.assign(p.dim, std::vector<double>(bins, 0.0));
        const double da = 2.0 * kPi / bins;
        if (p.dim == 2) {
            for (int b = 0; b <= bins; ++b) p.angle_edges.push_back(-kPi + b * da);
            p.angle_density.assign(bins, 0.0);
        }
        const double unit = 1.0 / p.mass;
        double speed = 0.0;
        for (const auto& s : snap.states) {
            for (int a = 0; a < p.dim; ++a) {
                const double x = (s.Q(a) + q_half_width) / dq;
                if (x >= 0.0 && x < bins) p.q_marginals[a][static_cast<int>(x)] += unit / dq;
            }
            if (p.dim == 2) {
                const int b = std::min(bins - 1, static_cast<int>((std::atan2(s.V(1), s.V(0)) + kPi) / da));
                p.angle_density[b] += unit / da;
            }
            const double v = s.V.norm();
            speed += v;
            p.max_speed_error = std::max(p.max_speed_error, std::abs(v - 1.0));
        }
        p.mean_speed = speed / p.mass;
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace kinlim
