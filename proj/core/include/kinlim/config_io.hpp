#pragma once

#include "kinlim/microdyn.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace kinlim {

struct RunSetup {
    std::string name;
    ScattererConfig config;
    ScatteringModel model;
    std::string scattering;  // "specular", "kick-linear:<kappa>" or "tabulated:<csv>"
};

// JSON scatterer configuration; unknown keys and wrong types are ValidationErrors naming the offending path.
RunSetup parse_config(const std::string& json_text);
RunSetup load_config(const std::string& path_or_preset);
std::string config_to_json(const RunSetup& setup);

// Built-in configurations: z2, z3, poisson2, poisson3, honeycomb, fibonacci, fibonacci-chain, wennberg, kicked2.
std::vector<std::string> preset_names();
RunSetup preset_config(const std::string& name);

ScatteringModel parse_scattering(const std::string& spec, int dim);

// CSV with 17 significant digits.
std::string format_double(double x);
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);
void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

// 64-bit FNV-1a of a file's bytes, as 16 hex digits.
std::string fnv1a_file(const std::string& path);
std::uint64_t fnv1a(const std::string& bytes);

}  // namespace kinlim
