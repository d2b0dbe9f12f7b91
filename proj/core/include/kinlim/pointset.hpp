#pragma once

#include "kinlim/types.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

namespace kinlim {

struct LatticeSpec {
    Mat basis;  // rows are basis vectors

    int dim() const { return static_cast<int>(basis.rows()); }
    double density() const;
    void validate() const;
};

LatticeSpec integer_lattice(int d);

struct WindowBox {
    Vec lo;
    Vec hi;
};

// P = { pi(l) : l in L, pi_int(l) + internal_shift in W }, where pi takes the
// first `dim` ambient coordinates and pi_int the remaining `internal_dim`.
struct CutProjectSpec {
    int dim = 1;
    int internal_dim = 1;
    Mat basis;  // (dim+internal_dim)^2, rows
    std::vector<WindowBox> window_boxes;
    // Discrete window (A^0 = {0}); needs integral internal coordinates.
    std::vector<Vec> window_points;
    Vec internal_shift;

    int ambient_dim() const { return dim + internal_dim; }
    bool in_window(const Vec& internal) const;
    double density() const;
    void validate() const;
};

// Disjoint union of cut-and-project sets sharing the physical space.
struct CutProjectUnion {
    std::vector<CutProjectSpec> components;

    int dim() const;
    double density() const;
    void validate() const;
};

struct DeloneUnionSpec {
    LatticeSpec base;
    std::vector<Vec> translates;

    int dim() const { return base.dim(); }
    double density() const;
    void validate() const;
    // The same set as a cut-and-project set with a finite window.
    CutProjectSpec as_cut_project() const;
};

struct PoissonSpec {
    int dim = 2;
    double intensity = 1.0;
    std::uint64_t seed = 0;

    double cell_edge() const;
    void validate() const;
};

using PointSource = std::variant<LatticeSpec, CutProjectSpec, CutProjectUnion, DeloneUnionSpec, PoissonSpec>;

int source_dim(const PointSource& source);
double source_density(const PointSource& source);
void validate_source(const PointSource& source);

enum class Geometry { Spherical, Slab };

// Displacement r * amplitude * (uniform point of the unit ball), seeded per scatterer.
struct JitterSpec {
    double amplitude = 0.5;
    std::uint64_t seed = 0;
};

struct ScattererConfig {
    PointSource source;
    std::optional<JitterSpec> jitter;
    double radius = 0.01;
    Geometry geometry = Geometry::Spherical;

    int dim() const { return source_dim(source); }
    double density() const { return source_density(source); }
    bool is_poisson() const { return std::holds_alternative<PoissonSpec>(source); }
    bool is_pure_lattice() const;
    double max_displacement() const;
    void validate() const;
};

// Unsorted enumeration of the scatterer centers in the half-open box.
void for_each_point(const ScattererConfig& config, const Box& box, const std::function<void(const Vec&)>& f);
void for_each_point(const PointSource& source, const Box& box, const std::function<void(const Vec&)>& f);

// Points k B + offset (rows of B are basis vectors, k integral) in the half-open box.
void for_each_lattice_point(const Mat& basis, const Vec& offset, const Box& box,
                            const std::function<void(const Vec&)>& f);

std::vector<Vec> points_in_box(const ScattererConfig& config, const Box& box);
std::vector<Vec> points_in_box(const PointSource& source, const Box& box);
std::uint64_t count_in_box(const ScattererConfig& config, const Box& box);

void sort_lexicographic(std::vector<Vec>& points);

// Scalar form j/s + ||j/tau||/(tau s), s = sqrt(1+tau^2).
double fibonacci_formula_point(long long j);
CutProjectUnion fibonacci_spec();
// Canonical two-gap Fibonacci chain: Z^2 projected onto the golden-slope line.
CutProjectSpec fibonacci_chain_spec();
CutProjectUnion wennberg_spec();
DeloneUnionSpec honeycomb_spec();

std::vector<double> estimate_density(const ScattererConfig& config, const std::vector<double>& T, const Box& base);

double min_gap(const std::vector<Vec>& points);
double min_gap(const ScattererConfig& config, const Box& box);
// Throws ValidationError if two scatterers in the box overlap; Poisson sources are exempt.
void validate_non_overlap(const ScattererConfig& config, const Box& box);

}  // namespace kinlim
