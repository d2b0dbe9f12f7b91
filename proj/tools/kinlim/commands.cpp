#include "commands.hpp"

#include "kinlim/config_io.hpp"
#include "kinlim/experiments.hpp"
#include "kinlim/flight.hpp"
#include "kinlim/kernels.hpp"
#include "kinlim/microdyn.hpp"
#include "kinlim/simulate.hpp"
#include "kinlim/stats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <type_traits>

namespace kinlim::cli {

std::string repr(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

namespace {

using nlohmann::json;

template <class T>
struct is_vector : std::false_type {};
template <class T>
struct is_vector<std::vector<T>> : std::true_type {};

template <class T>
std::string repr_any(const T& v) {
    if constexpr (std::is_floating_point_v<T>) {
        return repr(v);
    } else if constexpr (std::is_integral_v<T>) {
        return std::to_string(v);
    } else if constexpr (std::is_same_v<T, std::string>) {
        return v;
    } else {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + repr_any(v[i]);
        return s;
    }
}

// Option with an exact default string, so manifests can spell out every parameter.
template <class T>
CLI::Option* option(CLI::App* app, const std::string& name, T& var, const std::string& desc) {
    CLI::Option* o = app->add_option(name, var, desc);
    o->default_str(repr_any(var));
    if constexpr (is_vector<T>::value) o->delimiter(',');
    return o;
}

// json cannot hold inf or nan.
json num(double x) { return std::isfinite(x) ? json(x) : json(format_double(x)); }

double bin_average_from_tail(const std::function<double(double)>& tail, double lo, double hi) {
    return (tail(lo) - tail(hi)) / (hi - lo);
}

// lo, hi, count, density and optionally a reference bin average.
Table histogram_table(const std::string& name, const Histogram& h,
                      const std::function<double(double, double)>& reference = {}) {
    Table t{name, {"lo", "hi", "count", "density"}, {}};
    if (reference) t.header.push_back("reference");
    const auto& e = h.edges(0);
    for (std::size_t i = 0; i + 1 < e.size(); ++i) {
        std::vector<double> row{e[i], e[i + 1], static_cast<double>(h.count(i)), h.density(i)};
        if (reference) row.push_back(reference(e[i], e[i + 1]));
        t.rows.push_back(std::move(row));
    }
    return t;
}

Series histogram_series(const std::string& label, const Histogram& h) {
    Series s{label, {}, {}, true};
    for (std::size_t i = 0; i < h.bins(0); ++i) {
        s.x.push_back(h.center(0, i));
        s.y.push_back(h.density(i));
    }
    return s;
}

Series curve(const std::string& label, const std::vector<double>& xs, const std::function<double(double)>& f) {
    Series s{label, xs, {}, false};
    for (double x : xs) s.y.push_back(f(x));
    return s;
}

bool is_lorentz(const RunSetup& s) { return std::holds_alternative<LorentzScatteringMap>(s.model); }

double radius_override(RunSetup& s, double r) {
    if (r < 0.0 || !std::isfinite(r)) throw ValidationError("--r must be a positive radius, or 0 for the config's");
    if (r > 0.0) s.config.radius = r;
    s.config.validate();
    return s.config.radius;
}

double cross_section(const RunSetup& s) {
    if (const auto* kick = std::get_if<KickPotential>(&s.model)) return kick->total_cross_section();
    return unit_ball_volume(s.config.dim() - 1);
}

// Analytic Phi0 reference for the configurations that have one.
std::unique_ptr<TransitionKernel> reference_kernel(const RunSetup& s) {
    if (!is_lorentz(s)) return nullptr;
    if (s.config.is_poisson()) return std::make_unique<PoissonKernel>(s.config.dim(), s.config.density());
    if (s.config.dim() == 2 && s.config.is_pure_lattice() && !s.config.jitter)
        return std::make_unique<LatticeKernel2D>(s.config.density());
    return nullptr;
}

SimulationPlan make_plan(const RunSetup& s, long paths, long collisions, double max_time, double cap,
                         std::uint64_t seed, int threads) {
    if (paths < 1) throw ValidationError("--paths must be >= 1");
    if (collisions < 1) throw ValidationError("--collisions must be >= 1");
    SimulationPlan plan;
    plan.trajectories = paths;
    plan.seed = seed;
    plan.threads = threads;
    plan.stop.max_collisions = collisions;
    plan.stop.max_time = max_time;
    plan.stop.L_max = cap > 0.0 ? cap : default_flight_cap(s.config, s.model);
    return plan;
}

// --- generate ---------------------------------------------------------------

struct GenerateParams {
    std::string config;
    double r = 0.0;
    double half_width = 10.0;
};

Command generate(CLI::App& app) {
    auto p = std::make_shared<GenerateParams>();
    auto* sub = app.add_subcommand("generate", "Scatterer centers in a cube, as CSV");
    option(sub, "--config", p->config, "Config file or preset name")->required();
    option(sub, "--r", p->r, "Scatterer radius (0: keep the config's)");
    option(sub, "--half-width", p->half_width, "Cube [-h, h)^d");
    auto run = [p](RunContext& ctx) {
        RunSetup s = load_config(p->config);
        radius_override(s, p->r);
        if (!(p->half_width > 0.0)) throw ValidationError("--half-width must be positive");
        const int d = s.config.dim();
        const Box box = Box::cube(d, p->half_width);
        auto points = points_in_box(s.config, box);
        sort_lexicographic(points);
        std::string text;
        for (int i = 0; i < d; ++i) text += (i ? ",x" : "x") + std::to_string(i);
        text += '\n';
        for (const auto& x : points) {
            for (int i = 0; i < d; ++i) text += (i ? "," : "") + format_double(x[i]);
            text += '\n';
        }
        ctx.write("points.csv", text);
        ctx.summary = {{"config", s.name},
                       {"dim", d},
                       {"points", points.size()},
                       {"box_volume", box.volume()},
                       {"empirical_density", static_cast<double>(points.size()) / box.volume()},
                       {"density", s.config.density()}};
        ctx.write_summary();
        return 0;
    };
    return {sub, run, &p->config};
}

// --- simulate ---------------------------------------------------------------

struct SimulateParams {
    std::string config;
    double r = 0.0;
    long paths = 1000;
    long collisions = 100;
    double max_time = std::numeric_limits<double>::infinity();
    double flight_cap = 0.0;
    std::uint64_t seed = 1;
};

// Event rows per trajectory, kept in trajectory order by the ensemble merge.
struct EventRows {
    double scale = 1.0;  // r^{d-1}
    std::vector<std::string> trajectories;
    std::string current;
    std::map<std::string, long> reasons;
    long events = 0;
    double xi_sum = 0.0;

    EventSink sink() {
        return [this](const CollisionEvent& e) {
            current += std::to_string(e.index + 1) + ',' + format_double(scale * e.flight_time) + ',' +
                       format_double(scale * e.time);
            for (auto* v : {&e.impact, &e.exit, &e.v_out})
                for (Eigen::Index i = 0; i < v->size(); ++i) current += ',' + format_double((*v)[i]);
            current += '\n';
            ++events;
            xi_sum += scale * e.flight_time;
        };
    }
    void finish(const TrajectoryRecord& rec) {
        trajectories.push_back(std::move(current));
        current.clear();
        ++reasons[to_string(rec.reason)];
    }
    void merge(const EventRows& o) {
        trajectories.insert(trajectories.end(), o.trajectories.begin(), o.trajectories.end());
        for (const auto& [k, n] : o.reasons) reasons[k] += n;
        events += o.events;
        xi_sum += o.xi_sum;
    }
};

Command simulate(CLI::App& app) {
    auto p = std::make_shared<SimulateParams>();
    auto* sub = app.add_subcommand("simulate", "Microscopic trajectories; collision events as CSV");
    option(sub, "--config", p->config, "Config file or preset name")->required();
    option(sub, "--r", p->r, "Scatterer radius (0: keep the config's)");
    option(sub, "--paths", p->paths, "Number of trajectories");
    option(sub, "--collisions", p->collisions, "Stop after this many collisions");
    option(sub, "--max-time", p->max_time, "Stop at this microscopic time");
    option(sub, "--flight-cap", p->flight_cap, "Censor flights longer than this (0: 1000 mean free paths)");
    option(sub, "--seed", p->seed, "Master seed");
    auto run = [p](RunContext& ctx) {
        RunSetup s = load_config(p->config);
        const double r = radius_override(s, p->r);
        const int d = s.config.dim();
        const SimulationPlan plan = make_plan(s, p->paths, p->collisions, p->max_time, p->flight_cap, p->seed,
                                              ctx.threads);
        const double scale = std::pow(r, d - 1);
        const auto rows = simulate_ensemble<EventRows>(
            s.config, s.model, plan, [&] { return EventRows{scale, {}, {}, {}, 0, 0.0}; },
            [](EventRows& a, const EventRows& b) { a.merge(b); });

        const int nw = is_lorentz(s) ? d : std::get<KickPotential>(s.model).internal_dim;
        std::string text = "trajectory,n,xi,time";
        for (const char* name : {"w", "s"})
            for (int i = 0; i < nw; ++i) text += std::string(",") + name + std::to_string(i);
        for (int i = 0; i < d; ++i) text += ",v" + std::to_string(i);
        text += '\n';
        for (std::size_t t = 0; t < rows.trajectories.size(); ++t) {
            std::istringstream lines(rows.trajectories[t]);
            for (std::string line; std::getline(lines, line);) text += std::to_string(t) + ',' + line + '\n';
        }
        ctx.write("events.csv", text);

        const long censored = rows.reasons.count("censored") ? rows.reasons.at("censored") : 0;
        json reasons = json::object();
        for (const auto& [k, n] : rows.reasons) reasons[k] = n;
        ctx.summary = {{"config", s.name},
                       {"r", r},
                       {"trajectories", p->paths},
                       {"events", rows.events},
                       {"terminations", reasons},
                       {"censored_trajectories", censored},
                       {"censored_fraction", static_cast<double>(censored) / static_cast<double>(p->paths)},
                       {"flight_cap", num(plan.stop.L_max)},
                       {"mean_xi", rows.events ? rows.xi_sum / static_cast<double>(rows.events) : 0.0},
                       {"xi_bar", mean_free_path(s.config.density(), cross_section(s))}};
        ctx.write_summary();
        return 0;
    };
    return {sub, run, &p->config};
}

// --- kicked -----------------------------------------------------------------

struct KickedParams {
    std::string config = "kicked2";
    double r = 0.01;
    std::vector<double> p{0.6180339887498949, 1.4142135623730951, -0.7320508075688772};
    std::string shape = "ball";
    double T = 2e5;
    long launches = 100000;
    std::uint64_t seed = 1;
};

Command kicked(CLI::App& app) {
    auto p = std::make_shared<KickedParams>();
    auto* sub = app.add_subcommand("kicked", "Mean collision time of a kicked Hamiltonian, per momentum");
    option(sub, "--config", p->config, "Config file or preset name (needs kick scattering)");
    option(sub, "--r", p->r, "Slab scale r");
    option(sub, "--p", p->p, "Momenta, internal_dim numbers each");
    option(sub, "--shape", p->shape, "Launch domain")->check(CLI::IsMember({"ball", "square"}));
    option(sub, "--T", p->T, "Domain scale");
    option(sub, "--launches", p->launches, "Launches per momentum");
    option(sub, "--seed", p->seed, "Master seed");
    auto run = [p](RunContext& ctx) {
        RunSetup s = load_config(p->config);
        const auto* pot = std::get_if<KickPotential>(&s.model);
        if (!pot) throw ValidationError("kicked needs a config with kick scattering");
        const double r = radius_override(s, p->r);
        const int n = pot->internal_dim;
        if (p->p.empty() || p->p.size() % n) throw ValidationError("--p needs a multiple of " + std::to_string(n) + " numbers");
        const DomainShape shape = p->shape == "ball" ? DomainShape::Ball : DomainShape::Square;
        Table t{"collision_times", {}, {}};
        for (int i = 0; i < n; ++i) t.header.push_back("p" + std::to_string(i));
        for (const char* h : {"mean", "stderr", "expected", "launches", "boundary_launches"}) t.header.push_back(h);
        json results = json::array();
        std::vector<MeanFreePathResult> all;
        for (std::size_t k = 0; k * n < p->p.size(); ++k) {
            Vec mom(n);
            for (int i = 0; i < n; ++i) mom[i] = p->p[k * n + i];
            const auto m = mean_collision_time_check(s.config, *pot, mom, shape, p->T, p->launches,
                                                     derive_seed(p->seed, k));
            std::vector<double> row(mom.data(), mom.data() + n);
            row.insert(row.end(), {m.mean, m.stderr_, m.expected, static_cast<double>(m.launches),
                                   static_cast<double>(m.boundary_launches)});
            t.rows.push_back(row);
            results.push_back({{"p", std::vector<double>(mom.data(), mom.data() + n)},
                               {"mean", m.mean},
                               {"stderr", m.stderr_},
                               {"expected", m.expected},
                               {"relative_error", m.mean / m.expected - 1.0}});
            all.push_back(m);
        }
        // Largest pairwise difference in units of its standard error.
        double max_z = 0.0;
        for (std::size_t a = 0; a < all.size(); ++a)
            for (std::size_t b = a + 1; b < all.size(); ++b)
                max_z = std::max(max_z, std::abs(all[a].mean - all[b].mean) /
                                            std::hypot(all[a].stderr_, all[b].stderr_));
        ctx.write_table(t);
        ctx.summary = {{"config", s.name}, {"r", r}, {"results", results}, {"max_pairwise_z", max_z}};
        ctx.write_summary();
        return 0;
    };
    return {sub, run, &p->config};
}

// --- estimate ---------------------------------------------------------------

struct EstimateParams {
    std::string config;
    double r = 0.01;
    long paths = 1000;
    long collisions = 101;
    double flight_cap = 0.0;
    std::uint64_t seed = 1;
    int wp_bins = 40;
    int xi_bins = 80;
    int w_bins = 40;
    double xi_max = 2.0;
};

struct EstimateAcc {
    FreePathAccumulator paths;
    std::optional<EmpiricalKernel2D> kernel;
    EventSink sink() {
        return [this](const CollisionEvent& e) {
            paths.add_event(e);
            if (kernel) kernel->add_event(e);
        };
    }
    void finish(const TrajectoryRecord& rec) {
        paths.finish(rec);
        if (kernel) kernel->finish(rec);
    }
    void merge(const EstimateAcc& o) {
        paths.merge(o.paths);
        if (kernel) kernel->merge(*o.kernel);
    }
};

std::size_t bin_of(const std::vector<double>& edges, double x) {
    const auto it = std::upper_bound(edges.begin(), edges.end(), x);
    return static_cast<std::size_t>(std::clamp<long>(it - edges.begin() - 1, 0, long(edges.size()) - 2));
}

Command estimate(CLI::App& app) {
    auto p = std::make_shared<EstimateParams>();
    auto* sub = app.add_subcommand("estimate", "Free path law and transition kernel estimates");
    option(sub, "--config", p->config, "Config file or preset name")->required();
    option(sub, "--r", p->r, "Scatterer radius");
    option(sub, "--paths", p->paths, "Number of trajectories");
    option(sub, "--collisions", p->collisions, "Collisions per trajectory");
    option(sub, "--flight-cap", p->flight_cap, "Censor flights longer than this (0: 1000 mean free paths)");
    option(sub, "--seed", p->seed, "Master seed");
    option(sub, "--wp-bins", p->wp_bins, "Kernel bins in w'");
    option(sub, "--xi-bins", p->xi_bins, "Kernel bins in xi");
    option(sub, "--w-bins", p->w_bins, "Kernel bins in w");
    option(sub, "--xi-max", p->xi_max, "Kernel xi range");
    auto run = [p](RunContext& ctx) {
        RunSetup s = load_config(p->config);
        const double r = radius_override(s, p->r);
        const int d = s.config.dim();
        if (p->wp_bins < 1 || p->xi_bins < 1 || p->w_bins < 1 || !(p->xi_max > 0.0))
            throw ValidationError("kernel bins and --xi-max must be positive");
        const SimulationPlan plan = make_plan(s, p->paths, p->collisions, std::numeric_limits<double>::infinity(),
                                              p->flight_cap, p->seed, ctx.threads);
        const double xi_bar = mean_free_path(s.config.density(), cross_section(s));
        const auto ref = reference_kernel(s);
        const bool want_kernel = is_lorentz(s) && d == 2;
        const auto wp_edges = uniform_edges(-1, 1, p->wp_bins), xi_edges = uniform_edges(0, p->xi_max, p->xi_bins),
                   w_edges = uniform_edges(-1, 1, p->w_bins);
        auto make = [&] {
            EstimateAcc a{FreePathAccumulator(r, d, default_xi_edges(xi_bar), ref != nullptr), std::nullopt};
            if (want_kernel) a.kernel.emplace(r, wp_edges, xi_edges, w_edges);
            return a;
        };
        const auto acc = simulate_ensemble<EstimateAcc>(s.config, s.model, plan, make,
                                                        [](EstimateAcc& a, const EstimateAcc& b) { a.merge(b); });

        std::function<double(double)> tail;
        if (ref) tail = [&](double x) { return phi0_tail(*ref, x); };
        std::function<double(double, double)> bin_ref;
        if (ref) bin_ref = [&](double lo, double hi) { return bin_average_from_tail(tail, lo, hi); };
        ctx.write_table(histogram_table("phi0", acc.paths.phi0(), bin_ref));
        ctx.write_table(histogram_table("first_flights", acc.paths.first_flights()));

        ctx.summary = {{"config", s.name},
                       {"r", r},
                       {"flights", acc.paths.flights()},
                       {"mean", acc.paths.mean()},
                       {"mean_stderr", acc.paths.mean_stderr()},
                       {"xi_bar", xi_bar},
                       {"first_flight_mean", acc.paths.first_flight_mean()},
                       {"censored_fraction", acc.paths.censored_fraction()},
                       {"reference", ref ? json(ref->name()) : json(nullptr)}};

        Figure phi{"phi0", "Free path density", "xi", "density", true, true, {}};
        phi.series.push_back(histogram_series("empirical", acc.paths.phi0()));
        if (ref) {
            const auto& e = acc.paths.phi0().edges(0);
            std::vector<double> grid;
            for (double x : log_edges(e[1] / 2, e.back(), 200)) grid.push_back(x);
            TabulatedCdf cdf(grid, [&](double x) { return 1.0 - tail(x); });
            auto tabulated = [&](double x) { return x <= grid.front() ? x / grid.front() * cdf(grid.front()) : cdf(x); };
            ctx.summary["ks_reference"] = ks_distance(acc.paths.samples(), tabulated);
            phi.series.push_back(curve(ref->name(), grid, [&](double x) { return phi0_of(*ref, x); }));
            if (ref->name() == "lattice2d") {
                try {
                    const TailFit fit = tail_slope(acc.paths.phi0(), 10 * xi_bar, 100 * xi_bar);
                    ctx.summary["tail"] = {{"slope", fit.slope},
                                           {"slope_stderr", fit.slope_stderr},
                                           {"constant", fit.constant},
                                           {"expected_constant", tail_constant(2, s.config.density())},
                                           {"bins", fit.bins}};
                } catch (const std::exception& e) {
                    ctx.summary["tail"] = e.what();
                }
            }
        }
        ctx.write_figure(phi);

        if (acc.kernel) {
            const auto& est = *acc.kernel;
            const auto* lat = dynamic_cast<const LatticeKernel2D*>(ref.get());
            std::vector<double> averages;
            if (lat) averages = kernel_cell_averages(est, *lat);
            Table t{"kernel", {"w_prime", "xi", "w", "count", "k_hat"}, {}};
            if (lat) t.header.push_back("k_reference");
            const Histogram& h = est.histogram();
            for (std::size_t f = 0; f < h.size(); ++f) {
                const auto idx = h.unflat(f);
                std::vector<double> row{h.center(0, idx[0]), h.center(1, idx[1]), h.center(2, idx[2]),
                                        static_cast<double>(h.count(f)), est.value(idx[0], idx[1], idx[2])};
                if (lat) row.push_back(averages[f]);
                t.rows.push_back(std::move(row));
            }
            ctx.write_table(t);
            ctx.summary["kernel"] = {{"transitions", est.transitions()},
                                     {"sparse_slices", est.sparse_slices(100).size()}};
            if (lat) {
                const auto cmp = compare_kernel(est, *lat, p->xi_max);
                ctx.summary["kernel"]["mean_l1"] = cmp.mean_l1;
                ctx.summary["kernel"]["max_l1"] = cmp.max_l1;
            }
            if (p->wp_bins == p->w_bins) ctx.summary["kernel"]["symmetry_defect"] = symmetry_defect(est, p->xi_max);

            const std::size_t i_wp = bin_of(wp_edges, -0.5), i_w = bin_of(w_edges, 0.5);
            Figure slice{"kernel_slice", "Kernel slice", "xi", "k", false, false, {}};
            Series emp{"empirical", {}, {}, true};
            for (std::size_t j = 0; j < h.bins(1); ++j) {
                emp.x.push_back(h.center(1, j));
                emp.y.push_back(est.value(i_wp, j, i_w));
            }
            slice.title = "Kernel slice w' = " + format_double(h.center(0, i_wp)) +
                          ", w = " + format_double(h.center(2, i_w));
            slice.series.push_back(emp);
            if (lat) {
                const double wp = h.center(0, i_wp), w = h.center(2, i_w);
                slice.series.push_back(curve("lattice2d", uniform_edges(0, p->xi_max, 400),
                                             [&](double x) { return lat->value(wp, x, w); }));
            }
            ctx.write_figure(slice);
        }
        ctx.write_summary();
        return 0;
    };
    return {sub, run, &p->config};
}

// --- kernel-eval ------------------------------------------------------------

struct KernelEvalParams {
    std::string kind = "lattice2d";
    int dim = 2;
    double density = 1.0;
    std::string grid = "default";
    std::vector<double> wp, xi, w;
};

Vec label(int d, double w) {
    Vec v = zeros(d - 1);
    v[0] = w;
    return v;
}

Command kernel_eval(CLI::App& app) {
    auto p = std::make_shared<KernelEvalParams>();
    auto* sub = app.add_subcommand("kernel-eval", "Tabulate k, K and Phi0 of an analytic kernel");
    option(sub, "--kind", p->kind, "Kernel")->check(CLI::IsMember({"poisson", "lattice2d"}));
    option(sub, "--dim", p->dim, "Dimension (poisson only)");
    option(sub, "--density", p->density, "Scatterer density");
    option(sub, "--grid", p->grid, "default, or custom with --wp/--xi/--w")
        ->check(CLI::IsMember({"default", "custom"}));
    option(sub, "--wp", p->wp, "Previous exit labels (first component)");
    option(sub, "--xi", p->xi, "Path lengths");
    option(sub, "--w", p->w, "Impact labels (first component)");
    auto run = [p](RunContext& ctx) {
        const auto kernel = make_kernel(p->kind, p->dim, p->density);
        const int d = kernel->dim();
        std::vector<double> wp = p->wp, xi = p->xi, w = p->w;
        if (p->grid == "default") {
            wp = w = {-0.9, -0.5, 0.0, 0.5, 0.9};
            xi.clear();
            for (int i = 0; i <= 12; ++i) xi.push_back(0.25 * i);
        }
        if (wp.empty() || xi.empty() || w.empty()) throw ValidationError("--grid custom needs --wp, --xi and --w");
        for (double x : xi)
            if (!(x >= 0.0)) throw ValidationError("xi values must be >= 0");
        for (const auto* v : {&wp, &w})
            for (double x : *v)
                if (!(std::abs(x) < 1.0)) throw ValidationError("labels must lie in (-1, 1)");

        Table k{"k", {"w_prime", "xi", "w", "k"}, {}};
        for (double a : wp)
            for (double x : xi)
                for (double b : w) k.rows.push_back({a, x, b, kernel->k(label(d, a), x, label(d, b))});
        Table K{"K", {"xi", "w", "K"}, {}};
        for (double x : xi)
            for (double b : w) K.rows.push_back({x, b, K_of(*kernel, x, label(d, b))});
        Table phi{"phi0", {"xi", "phi0", "tail"}, {}};
        for (double x : xi) phi.rows.push_back({x, phi0_of(*kernel, x), phi0_tail(*kernel, x)});
        ctx.write_table(k);
        ctx.write_table(K);
        ctx.write_table(phi);

        Figure fig{"phi0", "Phi0 for " + kernel->name(), "xi", "density", false, true, {}};
        const double top = std::max(4.0 * kernel->mean_free_path(), xi.back());
        fig.series.push_back(curve(kernel->name(), uniform_edges(0, top, 400),
                                   [&](double x) { return phi0_of(*kernel, x); }));
        ctx.write_figure(fig);

        ctx.summary = {{"kind", kernel->name()},
                       {"dim", d},
                       {"density", p->density},
                       {"xi_bar", kernel->mean_free_path()},
                       {"sup", kernel->sup()},
                       {"k_normalization", kernel_normalization(*kernel)},
                       {"K_normalization", K_normalization(*kernel)}};
        ctx.write_summary();
        return 0;
    };
    return {sub, run, nullptr};
}

// --- flight -----------------------------------------------------------------

struct FlightParams {
    std::string kind = "poisson";
    int dim = 2;
    double density = 1.0;
    long particles = 10000;
    double t_end = 2.5;
    int snapshots = 6;
    std::vector<double> times;
    std::string initial = "stationary";
    std::vector<double> fixed_exit{0.0};
    int bins = 50;
    std::uint64_t seed = 1;
};

Command flight(CLI::App& app) {
    auto p = std::make_shared<FlightParams>();
    auto* sub = app.add_subcommand("flight", "Limiting random flight process from a kernel");
    option(sub, "--kind", p->kind, "Kernel")->check(CLI::IsMember({"poisson", "lattice2d"}));
    option(sub, "--dim", p->dim, "Dimension (poisson only)");
    option(sub, "--density", p->density, "Scatterer density");
    option(sub, "--particles", p->particles, "Ensemble size");
    option(sub, "--t-end", p->t_end, "Last snapshot time");
    option(sub, "--snapshots", p->snapshots, "Evenly spaced snapshots on [0, t-end]");
    option(sub, "--times", p->times, "Explicit snapshot times (overrides --snapshots)");
    option(sub, "--initial", p->initial, "Initial labels")->check(CLI::IsMember({"stationary", "fixed"}));
    option(sub, "--fixed-exit", p->fixed_exit, "Previous exit label for --initial fixed");
    option(sub, "--bins", p->bins, "Position and angle bins");
    option(sub, "--seed", p->seed, "Master seed");
    auto run = [p](RunContext& ctx) {
        const auto kernel = make_kernel(p->kind, p->dim, p->density);
        const auto sampler = make_sampler(*kernel);
        const int d = kernel->dim();
        if (p->particles < 1) throw ValidationError("--particles must be >= 1");
        if (p->bins < 1) throw ValidationError("--bins must be >= 1");
        EnsembleOptions eo;
        eo.particles = p->particles;
        eo.seed = p->seed;
        eo.threads = ctx.threads;
        eo.times = p->times;
        if (eo.times.empty()) {
            if (p->snapshots < 1 || !(p->t_end >= 0.0)) throw ValidationError("need --snapshots >= 1 and --t-end >= 0");
            for (int i = 0; i < p->snapshots; ++i)
                eo.times.push_back(p->snapshots == 1 ? p->t_end : p->t_end * i / (p->snapshots - 1));
        }
        if (!std::is_sorted(eo.times.begin(), eo.times.end()) || eo.times.front() < 0.0)
            throw ValidationError("snapshot times must be ascending and >= 0");
        const bool stationary = p->initial == "stationary";
        if (!stationary) {
            if (static_cast<int>(p->fixed_exit.size()) != d - 1)
                throw ValidationError("--fixed-exit needs " + std::to_string(d - 1) + " numbers");
            eo.initial = InitialLabels::FixedExit;
            eo.fixed_exit = Vec::Map(p->fixed_exit.data(), d - 1);
        }
        const LorentzScatteringMap map{d, specular_angle()};
        const auto snaps = evolve_ensemble(*sampler, map, eo);
        const double xi_bar = kernel->mean_free_path();
        const auto proj = project_density(snaps, eo.times.back() + 2.0 * xi_bar, p->bins);

        // xi-marginal of K, the law of the remaining path under stationarity.
        const auto xi_edges = default_xi_edges(xi_bar);
        std::vector<double> grid;
        for (double x : uniform_edges(0, 10 * xi_bar, 250)) grid.push_back(x);
        for (double x : log_edges(10 * xi_bar, 1e3 * xi_bar, 50)) grid.push_back(x);
        grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
        const TabulatedCdf cdf(grid, [&](double x) { return 1.0 - K_marginal_tail(*kernel, x); });
        auto bin_ref = [&](double lo, double hi) { return (cdf(hi) - cdf(lo)) / (hi - lo); };

        json per = json::array();
        for (std::size_t i = 0; i < snaps.size(); ++i) {
            const auto& states = snaps[i].states;
            Histogram h({xi_edges});
            std::vector<double> remaining;
            double jumps = 0.0, jumps2 = 0.0;
            for (const auto& st : states) {
                h.add(st.xi_remaining);
                remaining.push_back(st.xi_remaining);
                jumps += st.jumps;
                jumps2 += static_cast<double>(st.jumps) * st.jumps;
            }
            const double n = static_cast<double>(states.size());
            const double mean = jumps / n, var = n > 1 ? (jumps2 - n * mean * mean) / (n - 1) : 0.0;
            const std::string stem = "snapshot_" + std::to_string(i);
            ctx.write_table(histogram_table(stem + "_xi", h, bin_ref));

            const auto& pr = proj[i];
            Table q{stem + "_position", {"lo", "hi"}, {}};
            for (int a = 0; a < d; ++a) q.header.push_back("q" + std::to_string(a));
            for (std::size_t b = 0; b + 1 < pr.q_edges.size(); ++b) {
                std::vector<double> row{pr.q_edges[b], pr.q_edges[b + 1]};
                for (int a = 0; a < d; ++a) row.push_back(pr.q_marginals[a][b]);
                q.rows.push_back(std::move(row));
            }
            ctx.write_table(q);
            if (!pr.angle_density.empty()) {
                Table ang{stem + "_angle", {"lo", "hi", "density"}, {}};
                for (std::size_t b = 0; b < pr.angle_density.size(); ++b)
                    ang.rows.push_back({pr.angle_edges[b], pr.angle_edges[b + 1], pr.angle_density[b]});
                ctx.write_table(ang);
            }
            json js = {{"time", snaps[i].time},
                       {"particles", states.size()},
                       {"mass", pr.mass},
                       {"mean_jumps", mean},
                       {"jump_variance", var},
                       {"jump_dispersion", mean > 0 ? var / mean : 0.0},
                       {"max_speed_error", pr.max_speed_error}};
            if (stationary) js["ks_stationary"] = ks_distance(remaining, cdf);
            per.push_back(js);
            if (i + 1 == snaps.size()) {
                Figure fig{"remaining_path", "Remaining path at t = " + format_double(snaps[i].time), "xi",
                           "density", false, true, {}};
                fig.series.push_back(histogram_series("ensemble", h));
                fig.series.push_back(curve("K marginal", uniform_edges(0, 10 * xi_bar, 200), [&](double x) {
                    const double hstep = 1e-3 * xi_bar;
                    return (cdf(x + hstep) - cdf(std::max(0.0, x - hstep))) / (x + hstep - std::max(0.0, x - hstep));
                }));
                ctx.write_figure(fig);
            }
        }
        ctx.summary = {{"kind", kernel->name()},
                       {"dim", d},
                       {"density", p->density},
                       {"xi_bar", xi_bar},
                       {"initial", p->initial},
                       {"snapshots", per}};
        ctx.write_summary();
        return 0;
    };
    return {sub, run, nullptr};
}

// --- compare ----------------------------------------------------------------

struct CompareParams {
    std::vector<std::string> experiments{"all"};
    double scale = 1.0;
    std::uint64_t seed = 20240601;
};

Command compare(CLI::App& app) {
    auto p = std::make_shared<CompareParams>();
    auto* sub = app.add_subcommand("compare", "Validation experiments against the analytic limits");
    std::string names;
    for (const auto& n : experiment_names()) names += (names.empty() ? "" : ", ") + n;
    option(sub, "--experiment", p->experiments, "all, or any of: " + names);
    option(sub, "--scale", p->scale, "Sample size multiplier");
    option(sub, "--seed", p->seed, "Master seed");
    auto run = [p](RunContext& ctx) {
        std::vector<std::string> todo;
        const auto known = experiment_names();
        for (const auto& n : p->experiments) {
            if (n == "all") {
                todo.insert(todo.end(), known.begin(), known.end());
            } else if (std::find(known.begin(), known.end(), n) == known.end()) {
                throw ValidationError("unknown experiment '" + n + "'");
            } else {
                todo.push_back(n);
            }
        }
        if (!(p->scale > 0.0)) throw ValidationError("--scale must be positive");
        ExperimentOptions eo;
        eo.seed = p->seed;
        eo.threads = ctx.threads;
        eo.scale = p->scale;
        json all = json::array();
        bool ok = true;
        for (const auto& name : todo) {
            ExperimentResult res = run_experiment(name, eo);
            ctx.write(name + "/report.json", report_json(res) + "\n");
            for (Table t : res.tables) {
                t.name = name + "/" + t.name;
                ctx.write_table(t);
            }
            for (Figure f : res.figures) {
                f.name = name + "/" + f.name;
                ctx.write_figure(f);
            }
            all.push_back(json::parse(report_json(res)));
            ok = ok && res.passed();
            for (const auto& m : res.metrics)
                std::printf("%-22s %-34s %s  value %s  target %s  tol %s\n", name.c_str(), m.name.c_str(),
                            m.pass ? "PASS" : "FAIL", format_double(m.value).c_str(),
                            format_double(m.target).c_str(), format_double(m.tolerance).c_str());
            std::printf("%-22s done in %.1f s\n", name.c_str(), res.seconds);
            std::fflush(stdout);
        }
        ctx.write("report.json", all.dump(2) + "\n");
        return ok ? 0 : 1;
    };
    return {sub, run, nullptr};
}

// --- renorm -----------------------------------------------------------------

struct RenormParams {
    std::string config = "z2";
    std::vector<double> r{0.1, 0.01, 0.001};
    std::vector<double> boxes{0.05, -1.0, 1.0, 1.0, 1.0, -0.5, 3.0, 0.5};
    std::vector<double> y;
    long samples = 10000;
    std::uint64_t seed = 1;
};

Command renorm(CLI::App& app) {
    auto p = std::make_shared<RenormParams>();
    auto* sub = app.add_subcommand("renorm", "Counting statistics of the renormalized point process");
    option(sub, "--config", p->config, "Config file or preset name");
    option(sub, "--r", p->r, "Radii, one run each");
    option(sub, "--boxes", p->boxes, "Boxes as lo_0..lo_{d-1}, hi_0..hi_{d-1}, repeated");
    option(sub, "--y", p->y, "Scatterer at which to renormalize (default: origin)");
    option(sub, "--samples", p->samples, "Samples of w' per radius");
    option(sub, "--seed", p->seed, "Master seed");
    auto run = [p](RunContext& ctx) {
        RunSetup s = load_config(p->config);
        if (!is_lorentz(s)) throw ValidationError("renorm needs a Lorentz config");
        const int d = s.config.dim();
        if (p->boxes.empty() || p->boxes.size() % (2 * d))
            throw ValidationError("--boxes needs a multiple of " + std::to_string(2 * d) + " numbers");
        std::vector<Box> boxes;
        for (std::size_t b = 0; b < p->boxes.size(); b += 2 * d) {
            Box box{zeros(d), zeros(d)};
            for (int i = 0; i < d; ++i) {
                box.lo[i] = p->boxes[b + i];
                box.hi[i] = p->boxes[b + d + i];
                if (!(box.lo[i] < box.hi[i])) throw ValidationError("box lo must be below hi");
            }
            boxes.push_back(box);
        }
        Vec y = zeros(d);
        if (!p->y.empty()) {
            if (static_cast<int>(p->y.size()) != d) throw ValidationError("--y needs " + std::to_string(d) + " numbers");
            y = Vec::Map(p->y.data(), d);
        }
        if (p->r.empty()) throw ValidationError("--r needs at least one radius");

        Table t{"counts", {"r", "box", "count", "probability"}, {}};
        json runs = json::array();
        std::vector<CountStatistics> stats;
        for (std::size_t k = 0; k < p->r.size(); ++k) {
            s.config.radius = p->r[k];
            s.config.validate();
            stats.push_back(count_statistics(s.config, y, p->r[k], boxes, p->samples, derive_seed(p->seed, k),
                                             ctx.threads));
            json per = json::array();
            for (std::size_t b = 0; b < boxes.size(); ++b) {
                const auto& dist = stats.back().per_box[b];
                for (const auto& [c, prob] : dist.pmf)
                    t.rows.push_back({p->r[k], static_cast<double>(b), static_cast<double>(c), prob});
                json jb = {{"box", b},
                           {"mean", dist.mean},
                           {"mean_stderr", dist.mean_stderr},
                           {"variance", dist.variance},
                           {"dispersion", dist.mean > 0 ? dist.variance / dist.mean : 0.0},
                           {"samples", dist.samples}};
                if (k > 0) jb["tv_to_previous"] = tv_distance(stats[k - 1].per_box[b], dist);
                per.push_back(jb);
            }
            runs.push_back({{"r", p->r[k]}, {"boxes", per}});
        }
        ctx.write_table(t);
        Figure fig{"counts_box0", "Counts in box 0", "count", "probability", false, false, {}};
        for (std::size_t k = 0; k < stats.size(); ++k) {
            Series ser{"r = " + format_double(p->r[k]), {}, {}, false};
            for (const auto& [c, prob] : stats[k].per_box[0].pmf) {
                ser.x.push_back(static_cast<double>(c));
                ser.y.push_back(prob);
            }
            fig.series.push_back(ser);
        }
        ctx.write_figure(fig);
        ctx.summary = {{"config", s.name}, {"runs", runs}};
        ctx.write_summary();
        return 0;
    };
    return {sub, run, &p->config};
}

}  // namespace

std::vector<Command> add_commands(CLI::App& app) {
    return {generate(app), simulate(app), kicked(app), estimate(app), kernel_eval(app),
            flight(app),   compare(app),  renorm(app)};
}

}  // namespace kinlim::cli
