#include "kinlim/geometry.hpp"
#include "kinlim/microdyn.hpp"

#include <cmath>

namespace kinlim {

const char* to_string(Termination t) {
    switch (t) {
        case Termination::CollisionCount: return "collision_count";
        case Termination::TimeReached: return "time_reached";
        case Termination::EscapedBox: return "escaped_box";
        case Termination::Censored: return "censored";
    }
    return "unknown";
}

double expected_mean_free_path(int d, double density, double r) {
    return (1.0 - density * std::pow(r, d) * unit_ball_volume(d)) /
           (density * std::pow(r, d - 1) * unit_ball_volume(d - 1));
}

double default_flight_cap(const ScattererConfig& config, const ScatteringModel& model) {
    const int d = config.dim();
    const double r = config.radius;
    if (const auto* kick = std::get_if<KickPotential>(&model))
        return 1e3 / (config.density() * std::pow(r, d - 1) * kick->total_cross_section());
    return 1e3 / (config.density() * std::pow(r, d - 1) * unit_ball_volume(d - 1));
}

ParticleState sample_initial_state(const ScattererConfig& config, const ScatteringModel& model, Rng& rng) {
    const int d = config.dim();
    const double cell = std::pow(config.density(), -1.0 / d);
    ParticleState s;
    if (std::holds_alternative<KickPotential>(model)) {
        s.q = Vec(d);
        for (int i = 0; i < d; ++i) s.q(i) = cell * uniform01(rng);
        s.v = Vec(d);
        s.v(0) = 1.0;
        for (int i = 1; i < d; ++i) s.v(i) = uniform(rng, -1.0, 1.0);
        return s;
    }
    const double r = config.radius;
    for (int attempt = 0; attempt < 1000; ++attempt) {
        s.q = Vec(d);
        for (int i = 0; i < d; ++i) s.q(i) = cell * uniform01(rng);
        bool free = true;
        for_each_point(config, Box{s.q, s.q}.inflated(r), [&](const Vec& c) {
            if ((c - s.q).squaredNorm() <= r * r) free = false;
        });
        if (free) {
            s.v = random_unit_vector(d, rng);
            return s;
        }
    }
    throw NumericalError("could not place an initial state outside the scatterers");
}

TrajectoryRecord run_trajectory(CollisionFinder& finder, const ScatteringModel& model, const ParticleState& initial,
                                const StopCriterion& stop, const EventSink& sink, bool store_events) {
    const ScattererConfig& config = finder.config();
    const int d = config.dim();
    const double r = config.radius;
    const bool kicked = std::holds_alternative<KickPotential>(model);
    if (kicked != (config.geometry == Geometry::Slab))
        throw ValidationError("scattering model does not match the scatterer geometry");
    if (!kicked && std::abs(initial.v.norm() - 1.0) > 1e-12) throw ValidationError("Lorentz velocity must be a unit vector");
    const double cap = std::isfinite(stop.L_max) ? stop.L_max : default_flight_cap(config, model);

    TrajectoryRecord rec;
    rec.initial = initial;
    ParticleState st = initial;
    double time = 0.0;
    Vec last_center;
    bool have_last = false;
    for (;;) {
        if (rec.collisions >= stop.max_collisions) {
            rec.reason = Termination::CollisionCount;
            break;
        }
        const double remaining = stop.max_time - time;
        const double tcap = std::min(cap, remaining);
        Hit hit = finder.first_hit(st.q, st.v, tcap, have_last ? &last_center : nullptr);
        if (stop.escape_box) {
            auto span = ray_box(st.q, st.v, *stop.escape_box);
            const double t_out = span ? span->second : 0.0;
            if (t_out <= tcap && (!hit.found || hit.t > t_out)) {
                st.q += std::max(t_out, 0.0) * st.v;
                time += std::max(t_out, 0.0);
                rec.reason = Termination::EscapedBox;
                break;
            }
        }
        if (!hit.found) {
            st.q += tcap * st.v;
            time += tcap;
            if (remaining <= cap) {
                rec.reason = Termination::TimeReached;
            } else {
                rec.reason = Termination::Censored;
                rec.censored_length = cap * st.v.norm();
            }
            break;
        }
        CollisionEvent ev;
        ev.index = rec.collisions;
        ev.center = hit.center;
        ev.position = st.q + hit.t * st.v;
        ev.v_in = st.v;
        ev.flight_time = hit.t;
        ev.free_path = hit.t * st.v.norm();
        time += hit.t;
        ev.time = time;
        if (kicked) {
            const auto& pot = std::get<KickPotential>(model);
            const Vec w = (ev.position.tail(d - 1) - hit.center.tail(d - 1)) / r;
            ev.impact = w;
            ev.exit = w;
            ev.v_out = st.v;
            ev.v_out.tail(d - 1) = st.v.tail(d - 1) - pot.gradient(w);
            st.q = ev.position;
            st.v = ev.v_out;
        } else {
            const auto& map = std::get<LorentzScatteringMap>(model);
            const Vec rel = ev.position - hit.center;
            Vec b = (rel - rel.dot(st.v) * st.v) / r;
            const double nb = b.norm();
            if (nb >= 1.0) b *= (1.0 - 1e-15) / nb;
            const ScatterResult sr = apply_scattering(map, st.v, b);
            ev.impact = b;
            ev.exit = sr.s;
            ev.v_out = sr.v_out;
            if (d == 2) {
                ev.impact_signed = signed_parameter(st.v, b);
                ev.exit_signed = signed_parameter(sr.v_out, sr.s);
            }
            const double s2 = std::min(1.0, sr.s.squaredNorm());
            st.q = hit.center + r * sr.s + r * std::sqrt(1.0 - s2) * sr.v_out;
            st.v = sr.v_out;
        }
        last_center = hit.center;
        have_last = true;
        ++rec.collisions;
        if (sink) sink(ev);
        if (store_events) rec.events.push_back(std::move(ev));
    }
    rec.final_state = st;
    rec.final_time = time;
    return rec;
}

TrajectoryRecord run_trajectory(const ScattererConfig& config, const ScatteringModel& model,
                                const ParticleState& initial, const StopCriterion& stop) {
    std::optional<KickPotential> kick;
    if (const auto* k = std::get_if<KickPotential>(&model)) kick = *k;
    CollisionFinder finder(config, kick);
    return run_trajectory(finder, model, initial, stop);
}

TrajectoryRecord run_trajectory(const ScattererConfig& config, const ScatteringModel& model, const StopCriterion& stop,
                                std::uint64_t seed) {
    Rng rng(seed);
    return run_trajectory(config, model, sample_initial_state(config, model, rng), stop);
}

TrajectoryRecord macroscopic_rescale(const TrajectoryRecord& record, double r, int d) {
    const double f = std::pow(r, d - 1);
    TrajectoryRecord out = record;
    out.initial.q *= f;
    out.final_state.q *= f;
    out.final_time *= f;
    out.censored_length *= f;
    for (auto& ev : out.events) {
        ev.time *= f;
        ev.center *= f;
        ev.position *= f;
        ev.free_path *= f;
        ev.flight_time *= f;
    }
    return out;
}

}  // namespace kinlim
