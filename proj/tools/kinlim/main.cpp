#include "commands.hpp"

#include "kinlim/config_io.hpp"
#include "kinlim/parallel.hpp"
#include "kinlim/types.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>

namespace fs = std::filesystem;
using nlohmann::json;

namespace kinlim::cli {
namespace {

struct Globals {
    int threads = hardware_threads();
    std::string plot;
    std::string out;
    std::string manifest;
};

struct Cli {
    std::unique_ptr<CLI::App> app;
    std::vector<Command> commands;
};

Cli build(Globals& g) {
    Cli c;
    c.app = std::make_unique<CLI::App>("Boltzmann-Grad limit toolkit for Lorentz gases and kicked Hamiltonians",
                                       "kinlim");
    auto& app = *c.app;
    app.fallthrough();
    app.add_option("--threads", g.threads, "Worker threads (results do not depend on it)")
        ->check(CLI::PositiveNumber);
    app.add_option("--plot", g.plot, "Also emit plots")->check(CLI::IsMember({"svg", "script"}));
    app.add_option("--out", g.out, "Output directory (default: $KINLIM_OUTPUT_DIR/<subcommand>, else kinlim-out/...)");
    app.add_option("--manifest", g.manifest, "Re-run the manifest.json of an earlier run and check its hashes");
    c.commands = add_commands(app);
    return c;
}

std::string default_out(const std::string& sub) {
    const char* env = std::getenv("KINLIM_OUTPUT_DIR");
    return (fs::path(env && *env ? env : "kinlim-out") / sub).string();
}

// Every option of the subcommand, given or defaulted, as --name=value tokens.
std::vector<std::string> canonical_arguments(const CLI::App& sub) {
    std::vector<std::string> out;
    for (const CLI::Option* o : sub.get_options()) {
        if (o->get_lnames().empty() || o->get_lnames()[0] == "help") continue;
        const std::string name = "--" + o->get_lnames()[0];
        std::string value;
        if (name == "--config") {
            value = "config.json";
        } else if (o->count() > 0) {
            for (std::size_t i = 0; i < o->results().size(); ++i) value += (i ? "," : "") + o->results()[i];
        } else {
            value = o->get_default_str();
        }
        if (!value.empty()) out.push_back(name + "=" + value);
    }
    return out;
}

std::optional<std::uint64_t> seed_of(const CLI::App& sub) {
    for (const CLI::Option* o : sub.get_options())
        if (!o->get_lnames().empty() && o->get_lnames()[0] == "seed") {
            const std::string v = o->count() ? o->results().back() : o->get_default_str();
            return std::stoull(v);
        }
    return std::nullopt;
}

struct Expected {
    std::map<std::string, std::string> hashes;
    json config;
};

int execute(Command& cmd, const Globals& g, const std::optional<Expected>& expected) {
    const std::string name = cmd.app->get_name();
    RunContext ctx;
    ctx.out_dir = g.out.empty() ? default_out(name) : g.out;
    ctx.threads = g.threads;
    ctx.plot = g.plot;
    fs::create_directories(ctx.out_dir);

    const std::vector<std::string> arguments = canonical_arguments(*cmd.app);
    json config = nullptr;
    if (cmd.config) {
        std::string text;
        if (expected && !expected->config.is_null())
            text = expected->config.dump(2) + "\n";
        else
            text = config_to_json(load_config(*cmd.config));
        config = json::parse(text);
        write_text(ctx.path("config.json"), text);
        *cmd.config = ctx.path("config.json");
    }

    const auto t0 = std::chrono::steady_clock::now();
    const int code = cmd.run(ctx);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    json manifest;
    manifest["tool"] = "kinlim";
    manifest["subcommand"] = name;
    manifest["arguments"] = arguments;
    manifest["plot"] = g.plot;
    const auto seed = seed_of(*cmd.app);
    manifest["seed"] = seed ? json(*seed) : json(nullptr);
    manifest["config"] = config;
    manifest["threads"] = g.threads;
    manifest["exit_code"] = code;
    manifest["wall_seconds"] = wall;
    json hashes = json::object();
    for (const auto& a : ctx.artifacts) hashes[a] = fnv1a_file(ctx.path(a));
    manifest["artifacts"] = hashes;
    write_text(ctx.path("manifest.json"), manifest.dump(2) + "\n");
    std::printf("%s: %zu artifacts in %s (%.2f s)\n", name.c_str(), ctx.artifacts.size(), ctx.out_dir.c_str(), wall);

    if (expected) {
        int bad = 0;
        for (const auto& [a, h] : expected->hashes) {
            const auto it = hashes.find(a);
            if (it == hashes.end() || *it != h) {
                std::fprintf(stderr, "mismatch: %s\n", a.c_str());
                ++bad;
            }
        }
        for (const auto& [a, h] : hashes.items())
            if (!expected->hashes.count(a)) {
                std::fprintf(stderr, "unexpected artifact: %s\n", a.c_str());
                ++bad;
            }
        if (bad) {
            std::fprintf(stderr, "%d artifacts differ from the manifest\n", bad);
            return 2;
        }
        std::printf("all %zu artifacts match the manifest\n", expected->hashes.size());
    }
    return code;
}

Command* selected(Cli& c) {
    for (auto& cmd : c.commands)
        if (cmd.app->parsed()) return &cmd;
    return nullptr;
}

int rerun(const Globals& g) {
    const json m = json::parse(read_text(g.manifest));
    if (m.value("tool", "") != "kinlim") throw ValidationError(g.manifest + " is not a kinlim manifest");
    Expected expected;
    for (const auto& [a, h] : m.at("artifacts").items()) expected.hashes[a] = h.get<std::string>();
    expected.config = m.value("config", json(nullptr));

    std::vector<std::string> args{m.at("subcommand").get<std::string>()};
    for (const auto& a : m.at("arguments")) args.push_back(a.get<std::string>());
    const std::string plot = m.value("plot", "");
    if (!plot.empty()) args.push_back("--plot=" + plot);
    const std::string out = g.out.empty() ? fs::absolute(g.manifest).parent_path().string() : g.out;
    args.push_back("--out=" + out);
    args.push_back("--threads=" + std::to_string(g.threads));

    Globals g2;
    Cli c = build(g2);
    std::reverse(args.begin(), args.end());
    c.app->parse(args);
    Command* cmd = selected(c);
    if (!cmd) throw ValidationError("manifest names no subcommand");
    return execute(*cmd, g2, expected);
}

}  // namespace
}  // namespace kinlim::cli

int main(int argc, char** argv) {
    using namespace kinlim::cli;
    Globals g;
    Cli c = build(g);
    try {
        try {
            c.app->parse(argc, argv);
        } catch (const CLI::ParseError& e) {
            return c.app->exit(e) == 0 ? 0 : 1;
        }
        if (!g.manifest.empty()) {
            if (selected(c)) throw kinlim::ValidationError("--manifest takes no subcommand");
            return rerun(g);
        }
        Command* cmd = selected(c);
        if (!cmd) {
            std::cout << c.app->help();
            return 1;
        }
        return execute(*cmd, g, std::nullopt);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const kinlim::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "error: bad manifest: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "runtime error: %s\n", e.what());
        return 2;
    }
}
