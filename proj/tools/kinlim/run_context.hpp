#pragma once

#include "kinlim/experiments.hpp"
#include "kinlim/plot.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace kinlim::cli {

// Where a run writes, and what it wrote.
struct RunContext {
    std::string out_dir;
    int threads = 1;
    std::string plot;  // "", "svg" or "script"
    nlohmann::json summary = nlohmann::json::object();
    std::vector<std::string> artifacts;  // relative to out_dir, in write order

    std::string path(const std::string& name) const;
    void write(const std::string& name, const std::string& text);
    void write_table(const Table& table);
    void write_figure(const Figure& fig);
    void write_summary();
};

}  // namespace kinlim::cli
