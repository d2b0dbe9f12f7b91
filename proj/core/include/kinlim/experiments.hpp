#pragma once

#include "kinlim/plot.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace kinlim {

struct Metric {
    std::string name;
    double value = 0.0;
    double target = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    std::string detail;
};

struct Table {
    std::string name;  // file stem
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

struct ExperimentOptions {
    std::uint64_t seed = 20240601;
    int threads = 1;
    // Multiplies sample sizes; 1 is the size the tolerances were set for.
    double scale = 1.0;
};

struct ExperimentResult {
    std::string name;
    std::vector<Metric> metrics;
    std::vector<Table> tables;
    std::vector<Figure> figures;
    double seconds = 0.0;

    bool passed() const;
    const Metric& metric(const std::string& name) const;
};

std::vector<std::string> experiment_names();
// One-line description per experiment.
std::string experiment_summary(const std::string& name);
ExperimentResult run_experiment(const std::string& name, const ExperimentOptions& options = {});

// JSON report: {"experiment", "pass", "metrics": [{metric, value, target, tolerance, pass, detail}]}.
std::string report_json(const ExperimentResult& result);

}  // namespace kinlim
