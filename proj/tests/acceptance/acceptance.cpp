// Runs the experiments behind the 14 acceptance criteria and prints one line per criterion.

#include "kinlim/experiments.hpp"
#include "kinlim/parallel.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <map>
#include <string>
#include <vector>

using namespace kinlim;

namespace {

struct Criterion {
    int number;
    std::string title;
    std::string experiment;
    std::vector<std::string> metrics;  // empty: every metric of the experiment
};

const std::vector<Criterion> criteria{
    {1, "microscopic mean free path, Z^2 and Poisson", "mean-free-path", {}},
    {2, "macroscopic mean path 0.5", "free-paths", {"lattice-macroscopic-mean", "poisson-macroscopic-mean"}},
    {3, "Poisson free paths are exponential", "free-paths", {"poisson-ks-exponential"}},
    {4, "planar lattice kernel estimate", "lattice2d-kernel", {"kernel-slice-l1", "kernel-spot"}},
    {5, "small-xi plateau 12/pi^2", "lattice2d-kernel", {"phi0-first-bin"}},
    {6, "C/xi^3 tail", "lattice2d-kernel", {"phi0-tail-slope", "phi0-tail-constant"}},
    {7, "kernel normalizations", "kernel-normalization", {}},
    {8, "stationarity of K under the flight process", "flight-stationarity", {}},
    {9, "Poisson kernel collision counts", "collision-counts", {}},
    {10, "supremum of the lattice kernel", "kernel-bound", {}},
    {11, "kicked Hamiltonian mean collision time", "kicked-collision-time", {}},
    {12, "Fibonacci density", "fibonacci-density", {}},
    {13, "renormalized process counts", "renormalized-counts", {}},
    {14, "microscopic free paths against the limit law", "lattice2d-kernel", {"phi0-ks-limit"}},
};

}  // namespace

int main(int argc, char** argv) {
    ExperimentOptions opts;
    opts.threads = hardware_threads();
    for (int i = 1; i + 1 < argc; i += 2) {
        if (!std::strcmp(argv[i], "--threads")) opts.threads = std::atoi(argv[i + 1]);
        else if (!std::strcmp(argv[i], "--seed")) opts.seed = std::strtoull(argv[i + 1], nullptr, 10);
        else {
            std::fprintf(stderr, "usage: %s [--threads n] [--seed s]\n", argv[0]);
            return 2;
        }
    }

    std::map<std::string, ExperimentResult> done;
    int failed = 0;
    for (const auto& c : criteria) {
        auto it = done.find(c.experiment);
        if (it == done.end()) {
            const auto t0 = std::chrono::steady_clock::now();
            ExperimentResult r = run_experiment(c.experiment, opts);
            r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            it = done.emplace(c.experiment, std::move(r)).first;
        }
        const ExperimentResult& res = it->second;
        std::vector<const Metric*> used;
        if (c.metrics.empty())
            for (const auto& m : res.metrics) used.push_back(&m);
        else
            for (const auto& name : c.metrics) used.push_back(&res.metric(name));
        bool pass = !used.empty();
        for (const Metric* m : used) pass = pass && m->pass;
        if (!pass) ++failed;
        std::printf("criterion %d: %s  %s [%s]\n", c.number, pass ? "PASS" : "FAIL", c.title.c_str(),
                    c.experiment.c_str());
        for (const Metric* m : used)
            std::printf("    %-28s %s value %.6g target %.6g tol %.3g  %s\n", m->name.c_str(), m->pass ? "ok  " : "FAIL",
                        m->value, m->target, m->tolerance, m->detail.c_str());
        std::fflush(stdout);
    }
    double total = 0.0;
    for (const auto& [name, r] : done) total += r.seconds;
    std::printf("%zu of %zu criteria passed (%.0f s)\n", criteria.size() - failed, criteria.size(), total);
    return failed ? 1 : 0;
}
