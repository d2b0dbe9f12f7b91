#include "run_context.hpp"

#include "kinlim/config_io.hpp"

#include <algorithm>
#include <filesystem>

namespace kinlim::cli {

std::string RunContext::path(const std::string& name) const {
    return (std::filesystem::path(out_dir) / name).string();
}

void RunContext::write(const std::string& name, const std::string& text) {
    write_text(path(name), text);
    if (std::find(artifacts.begin(), artifacts.end(), name) == artifacts.end()) artifacts.push_back(name);
}

void RunContext::write_table(const Table& table) {
    std::string text;
    for (std::size_t i = 0; i < table.header.size(); ++i) text += (i ? "," : "") + table.header[i];
    text += '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) text += ',';
            text += format_double(row[i]);
        }
        text += '\n';
    }
    write(table.name + ".csv", text);
}

void RunContext::write_figure(const Figure& fig) {
    if (plot == "svg")
        write(fig.name + ".svg", render_svg(fig));
    else if (plot == "script")
        write(fig.name + ".gp", render_gnuplot(fig));
}

void RunContext::write_summary() { write("summary.json", summary.dump(2) + "\n"); }

}  // namespace kinlim::cli
