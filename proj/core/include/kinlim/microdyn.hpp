#pragma once

#include "kinlim/pointset.hpp"
#include "kinlim/rng.hpp"
#include "kinlim/scatter.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <unordered_map>
#include <variant>
#include <vector>

namespace kinlim {

struct ParticleState {
    Vec q;
    Vec v;  // unit for Lorentz, (1, p) for kicked
};

struct CollisionEvent {
    long index = 0;
    double time = 0.0;        // cumulative flight time at the collision
    Vec center;               // scatterer y_n
    Vec position;             // hit point
    Vec impact;               // w_n, units of r (world frame for Lorentz, Sigma coordinates for kicked)
    Vec exit;                 // s_n, units of r
    Vec v_in;
    Vec v_out;
    double free_path = 0.0;   // Euclidean length of the flight ending here
    double flight_time = 0.0; // equals free_path for Lorentz; q_0 advance for kicked
    // d = 2 Lorentz: signed parameters along the ccw normals of v_in and v_out.
    double impact_signed = std::numeric_limits<double>::quiet_NaN();
    double exit_signed = std::numeric_limits<double>::quiet_NaN();
};

enum class Termination { CollisionCount, TimeReached, EscapedBox, Censored };

const char* to_string(Termination t);

struct TrajectoryRecord {
    ParticleState initial;
    std::vector<CollisionEvent> events;
    Termination reason = Termination::CollisionCount;
    ParticleState final_state;
    double final_time = 0.0;
    double censored_length = 0.0;  // length of the censored flight, if any
    long collisions = 0;
};

using ScatteringModel = std::variant<LorentzScatteringMap, KickPotential>;

struct Hit {
    bool found = false;
    double t = 0.0;
    Vec center;
};

// Earliest-intersection queries against one configuration. Holds a cell cache,
// so one finder per worker thread; the configuration itself is shared read-only.
class CollisionFinder {
public:
    using Filter = std::function<bool(const Vec&)>;

    explicit CollisionFinder(const ScattererConfig& config, std::optional<KickPotential> kick = std::nullopt);

    // Ray q + t v, 0 < t <= t_max. exclude: the departing scatterer.
    Hit first_hit(const Vec& q, const Vec& v, double t_max, const Vec* exclude = nullptr);

    // Restrict to scatterers accepted by the filter (used by finite-domain estimators).
    void set_filter(Filter filter) { filter_ = std::move(filter); }

    // Force the generic grid traversal even where a fast path exists.
    void force_grid(bool on) { force_grid_ = on; }

    const ScattererConfig& config() const { return config_; }
    const std::optional<KickPotential>& kick() const { return kick_; }

    // Brute-force reference over all scatterers in the enclosing box of the ray.
    Hit brute_force(const Vec& q, const Vec& v, double t_max, const Vec* exclude = nullptr) const;

private:
    struct CellKeyHash {
        std::size_t operator()(const std::array<std::int64_t, 3>& k) const;
    };

    bool test_shape(const Vec& q, const Vec& v, const Vec& c, double t_max, const Vec* exclude, Hit& best) const;
    Hit lattice_tube(const Vec& q, const Vec& v, double t_max, const Vec* exclude, const LatticeSpec& lat,
                     const Vec& offset, int slot) const;
    Hit kicked_planes(const Vec& q, const Vec& v, double t_max, const Vec* exclude) const;
    Hit grid(const Vec& q, const Vec& v, double t_max, const Vec* exclude);
    const std::vector<Vec>& cell(const std::array<std::int64_t, 3>& key);

    ScattererConfig config_;
    std::optional<KickPotential> kick_;
    Filter filter_;
    bool force_grid_ = false;
    int d_;
    double reach_;      // max distance from a center to a point of its scatterer
    double cell_edge_;
    struct LatticeCache {
        Mat inverse;
        Vec colnorm;
    };
    std::vector<LatticeCache> lattice_cache_;
    bool planes_fast_ = false;
    std::unordered_map<std::array<std::int64_t, 3>, std::vector<Vec>, CellKeyHash> cells_;
};

struct FirstCollision {
    bool censored = true;
    double t = 0.0;
    Vec center;
    Vec impact;
};

// Lorentz geometry: impact vector in world coordinates, units of r.
FirstCollision first_collision(const ScattererConfig& config, const ParticleState& state, double L_max);

struct StopCriterion {
    long max_collisions = 10;
    double max_time = std::numeric_limits<double>::infinity();
    double L_max = std::numeric_limits<double>::infinity();  // per flight, time units
    std::optional<Box> escape_box;
};

using EventSink = std::function<void(const CollisionEvent&)>;

// Default per-flight cap: 10^3 mean free paths (collision times for kicked).
double default_flight_cap(const ScattererConfig& config, const ScatteringModel& model);

ParticleState sample_initial_state(const ScattererConfig& config, const ScatteringModel& model, Rng& rng);

TrajectoryRecord run_trajectory(CollisionFinder& finder, const ScatteringModel& model, const ParticleState& initial,
                                const StopCriterion& stop, const EventSink& sink = {}, bool store_events = true);
TrajectoryRecord run_trajectory(const ScattererConfig& config, const ScatteringModel& model,
                                const ParticleState& initial, const StopCriterion& stop);
// Initial state drawn from the seed.
TrajectoryRecord run_trajectory(const ScattererConfig& config, const ScatteringModel& model, const StopCriterion& stop,
                                std::uint64_t seed);

TrajectoryRecord macroscopic_rescale(const TrajectoryRecord& record, double r, int d);

// Theta_r(w') = (P - y) S(w') D(r) - (0, w'), D(r) = diag(r^{d-1}, r^{-1}, ..., r^{-1}).
class RenormalizedProcess {
public:
    RenormalizedProcess(ScattererConfig config, Vec y, Vec w_prime, double r, ScatteringModel model);

    int dim() const { return d_; }
    Vec map(const Vec& x) const;
    Vec unmap(const Vec& theta) const;
    std::vector<Vec> points_in_box(const Box& box) const;
    std::uint64_t count_in_box(const Box& box) const;

private:
    void for_each(const Box& box, const std::function<void(const Vec&)>& f) const;

    ScattererConfig config_;
    Vec y_;
    Vec w_prime_;
    double r_;
    int d_;
    Mat forward_;   // theta = forward_ (x - y) - (0, w')
    Mat backward_;
};

enum class DomainShape { Ball, Square };

struct MeanFreePathResult {
    double mean = 0.0;
    double stderr_ = 0.0;
    double expected = 0.0;
    long launches = 0;
    long boundary_launches = 0;
};

// Mean of tau_1 under the launch measure on scatterer surfaces plus the
// boundary of T D (weights #P_T vol B_r^{d-1} and T^{d-1} vol D_v).
MeanFreePathResult mean_free_path_check(const ScattererConfig& config, DomainShape shape, double T, long launches,
                                        std::uint64_t seed);

// Kicked analogue for a fixed momentum p; scatterers are slabs {0} x r Sigma.
MeanFreePathResult mean_collision_time_check(const ScattererConfig& config, const KickPotential& pot, const Vec& p,
                                             DomainShape shape, double T, long launches, std::uint64_t seed);

double expected_mean_free_path(int d, double density, double r);

}  // namespace kinlim
