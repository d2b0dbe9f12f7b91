#include "kinlim/config_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace kinlim {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& what) {
    throw ValidationError("config " + path + ": " + what);
}

void allow_keys(const json& j, const std::string& path, const std::set<std::string>& keys) {
    if (!j.is_object()) bad(path, "expected an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!keys.count(it.key())) bad(path + "." + it.key(), "unknown key");
}

const json& need(const json& j, const std::string& path, const std::string& key) {
    if (!j.contains(key)) bad(path + "." + key, "missing");
    return j.at(key);
}

double number(const json& j, const std::string& path) {
    if (!j.is_number()) bad(path, "expected a number");
    return j.get<double>();
}

int integer(const json& j, const std::string& path) {
    if (!j.is_number_integer()) bad(path, "expected an integer");
    return j.get<int>();
}

std::uint64_t seed_of(const json& j, const std::string& path) {
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0))
        bad(path, "expected a non-negative integer");
    return j.get<std::uint64_t>();
}

Vec vec_of(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty() || j.size() > static_cast<std::size_t>(kMaxDim)) bad(path, "expected a short array");
    Vec v(static_cast<int>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<int>(i)) = number(j[i], path + "[" + std::to_string(i) + "]");
    return v;
}

Mat mat_of(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty() || j.size() > static_cast<std::size_t>(kMaxDim)) bad(path, "expected rows");
    const int n = static_cast<int>(j.size());
    Mat m(n, n);
    for (int i = 0; i < n; ++i) {
        const Vec row = vec_of(j[i], path + "[" + std::to_string(i) + "]");
        if (row.size() != n) bad(path, "basis must be square");
        m.row(i) = row.transpose();
    }
    return m;
}

json vec_json(const Vec& v) {
    json a = json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

json mat_json(const Mat& m) {
    json a = json::array();
    for (int i = 0; i < m.rows(); ++i) a.push_back(vec_json(m.row(i).transpose()));
    return a;
}

CutProjectSpec cut_project_of(const json& j, const std::string& path) {
    allow_keys(j, path, {"kind", "dim", "internal_dim", "basis", "window_boxes", "window_points", "internal_shift"});
    CutProjectSpec c;
    c.dim = integer(need(j, path, "dim"), path + ".dim");
    c.internal_dim = integer(need(j, path, "internal_dim"), path + ".internal_dim");
    c.basis = mat_of(need(j, path, "basis"), path + ".basis");
    if (j.contains("window_boxes")) {
        const auto& wb = j.at("window_boxes");
        if (!wb.is_array()) bad(path + ".window_boxes", "expected an array");
        for (std::size_t i = 0; i < wb.size(); ++i) {
            const std::string p = path + ".window_boxes[" + std::to_string(i) + "]";
            allow_keys(wb[i], p, {"lo", "hi"});
            c.window_boxes.push_back({vec_of(need(wb[i], p, "lo"), p + ".lo"), vec_of(need(wb[i], p, "hi"), p + ".hi")});
        }
    }
    if (j.contains("window_points")) {
        const auto& wp = j.at("window_points");
        if (!wp.is_array()) bad(path + ".window_points", "expected an array");
        for (std::size_t i = 0; i < wp.size(); ++i)
            c.window_points.push_back(vec_of(wp[i], path + ".window_points[" + std::to_string(i) + "]"));
    }
    c.internal_shift = j.contains("internal_shift") ? vec_of(j.at("internal_shift"), path + ".internal_shift")
                                                    : Vec(Vec::Zero(c.internal_dim));
    return c;
}

json cut_project_json(const CutProjectSpec& c) {
    json j{{"kind", "cut_project"}, {"dim", c.dim}, {"internal_dim", c.internal_dim}, {"basis", mat_json(c.basis)}};
    json boxes = json::array();
    for (const auto& b : c.window_boxes) boxes.push_back({{"lo", vec_json(b.lo)}, {"hi", vec_json(b.hi)}});
    if (!c.window_boxes.empty()) j["window_boxes"] = boxes;
    if (!c.window_points.empty()) {
        json pts = json::array();
        for (const auto& p : c.window_points) pts.push_back(vec_json(p));
        j["window_points"] = pts;
    }
    if (c.internal_shift.size() > 0) j["internal_shift"] = vec_json(c.internal_shift);
    return j;
}

PointSource source_of(const json& j, const std::string& path) {
    if (!j.is_object()) bad(path, "expected an object");
    const json& kind_j = need(j, path, "kind");
    if (!kind_j.is_string()) bad(path + ".kind", "expected a string");
    const std::string kind = kind_j.get<std::string>();
    if (kind == "lattice") {
        allow_keys(j, path, {"kind", "basis", "integer"});
        if (j.contains("integer")) return integer_lattice(integer(j.at("integer"), path + ".integer"));
        return LatticeSpec{mat_of(need(j, path, "basis"), path + ".basis")};
    }
    if (kind == "poisson") {
        allow_keys(j, path, {"kind", "dim", "intensity", "seed"});
        PoissonSpec p;
        p.dim = integer(need(j, path, "dim"), path + ".dim");
        if (j.contains("intensity")) p.intensity = number(j.at("intensity"), path + ".intensity");
        if (j.contains("seed")) p.seed = seed_of(j.at("seed"), path + ".seed");
        return p;
    }
    if (kind == "cut_project") return cut_project_of(j, path);
    if (kind == "cut_project_union") {
        allow_keys(j, path, {"kind", "components"});
        const json& comps = need(j, path, "components");
        if (!comps.is_array() || comps.empty()) bad(path + ".components", "expected a non-empty array");
        CutProjectUnion u;
        for (std::size_t i = 0; i < comps.size(); ++i)
            u.components.push_back(cut_project_of(comps[i], path + ".components[" + std::to_string(i) + "]"));
        return u;
    }
    if (kind == "delone") {
        allow_keys(j, path, {"kind", "basis", "translates"});
        DeloneUnionSpec d;
        d.base.basis = mat_of(need(j, path, "basis"), path + ".basis");
        const json& tr = need(j, path, "translates");
        if (!tr.is_array() || tr.empty()) bad(path + ".translates", "expected a non-empty array");
        for (std::size_t i = 0; i < tr.size(); ++i)
            d.translates.push_back(vec_of(tr[i], path + ".translates[" + std::to_string(i) + "]"));
        return d;
    }
    if (kind == "preset") {
        allow_keys(j, path, {"kind", "name"});
        const json& n = need(j, path, "name");
        if (!n.is_string()) bad(path + ".name", "expected a string");
        const std::string name = n.get<std::string>();
        if (name == "fibonacci") return fibonacci_spec();
        if (name == "fibonacci-chain") return fibonacci_chain_spec();
        if (name == "wennberg") return wennberg_spec();
        if (name == "honeycomb") return honeycomb_spec();
        bad(path + ".name", "unknown point set preset '" + name + "'");
    }
    bad(path + ".kind", "unknown source kind '" + kind + "'");
}

json source_json(const PointSource& src) {
    return std::visit(
        [](const auto& s) -> json {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, LatticeSpec>) {
                return {{"kind", "lattice"}, {"basis", mat_json(s.basis)}};
            } else if constexpr (std::is_same_v<T, PoissonSpec>) {
                return {{"kind", "poisson"}, {"dim", s.dim}, {"intensity", s.intensity}, {"seed", s.seed}};
            } else if constexpr (std::is_same_v<T, CutProjectSpec>) {
                return cut_project_json(s);
            } else if constexpr (std::is_same_v<T, CutProjectUnion>) {
                json comps = json::array();
                for (const auto& c : s.components) comps.push_back(cut_project_json(c));
                return {{"kind", "cut_project_union"}, {"components", comps}};
            } else {
                json tr = json::array();
                for (const auto& t : s.translates) tr.push_back(vec_json(t));
                return {{"kind", "delone"}, {"basis", mat_json(s.base.basis)}, {"translates", tr}};
            }
        },
        src);
}

RunSetup setup_of(const json& j) {
    allow_keys(j, "$", {"name", "source", "radius", "jitter", "geometry", "scattering"});
    RunSetup s;
    if (j.contains("name")) {
        if (!j.at("name").is_string()) bad("$.name", "expected a string");
        s.name = j.at("name").get<std::string>();
    }
    s.config.source = source_of(need(j, "$", "source"), "$.source");
    if (j.contains("radius")) s.config.radius = number(j.at("radius"), "$.radius");
    if (j.contains("jitter")) {
        const json& jt = j.at("jitter");
        allow_keys(jt, "$.jitter", {"amplitude", "seed"});
        JitterSpec js;
        if (jt.contains("amplitude")) js.amplitude = number(jt.at("amplitude"), "$.jitter.amplitude");
        if (jt.contains("seed")) js.seed = seed_of(jt.at("seed"), "$.jitter.seed");
        s.config.jitter = js;
    }
    std::string geometry = "spherical";
    if (j.contains("geometry")) {
        if (!j.at("geometry").is_string()) bad("$.geometry", "expected a string");
        geometry = j.at("geometry").get<std::string>();
    }
    if (geometry == "spherical")
        s.config.geometry = Geometry::Spherical;
    else if (geometry == "slab")
        s.config.geometry = Geometry::Slab;
    else
        bad("$.geometry", "expected 'spherical' or 'slab'");
    s.scattering = s.config.geometry == Geometry::Slab ? "kick-linear:1" : "specular";
    if (j.contains("scattering")) {
        if (!j.at("scattering").is_string()) bad("$.scattering", "expected a string");
        s.scattering = j.at("scattering").get<std::string>();
    }
    s.model = parse_scattering(s.scattering, s.config.dim());
    if (std::holds_alternative<KickPotential>(s.model) != (s.config.geometry == Geometry::Slab))
        bad("$.scattering", "kick scattering goes with slab geometry and only with it");
    s.config.validate();
    return s;
}

}  // namespace

ScatteringModel parse_scattering(const std::string& spec, int dim) {
    if (spec == "specular") return LorentzScatteringMap{dim, specular_angle()};
    const auto colon = spec.find(':');
    const std::string head = spec.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
    if (head == "kick-linear") {
        KickPotential k;
        k.internal_dim = dim - 1;
        if (!arg.empty()) {
            std::size_t used = 0;
            try {
                k.kappa = std::stod(arg, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != arg.size()) throw ValidationError("bad kick strength in '" + spec + "'");
        }
        k.validate();
        return k;
    }
    if (head == "tabulated" && !arg.empty()) {
        LorentzScatteringMap m{dim, load_angle_csv(arg)};
        return m;
    }
    throw ValidationError("unknown scattering '" + spec + "'");
}

RunSetup parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
    return setup_of(j);
}

std::vector<std::string> preset_names() {
    return {"z2", "z3", "poisson2", "poisson3", "honeycomb", "fibonacci", "fibonacci-chain", "wennberg", "kicked2"};
}

RunSetup preset_config(const std::string& name) {
    RunSetup s;
    s.name = name;
    s.scattering = "specular";
    if (name == "z2" || name == "z3") {
        s.config.source = integer_lattice(name == "z2" ? 2 : 3);
    } else if (name == "poisson2" || name == "poisson3") {
        s.config.source = PoissonSpec{name == "poisson2" ? 2 : 3, 1.0, 1};
    } else if (name == "honeycomb") {
        s.config.source = honeycomb_spec();
    } else if (name == "fibonacci") {
        s.config.source = fibonacci_spec();
    } else if (name == "fibonacci-chain") {
        s.config.source = fibonacci_chain_spec();
    } else if (name == "wennberg") {
        s.config.source = wennberg_spec();
    } else if (name == "kicked2") {
        s.config.source = integer_lattice(2);
        s.config.geometry = Geometry::Slab;
        s.scattering = "kick-linear:1";
    } else {
        throw ValidationError("unknown preset '" + name + "'");
    }
    s.model = parse_scattering(s.scattering, s.config.dim());
    return s;
}

RunSetup load_config(const std::string& path_or_preset) {
    if (!std::filesystem::exists(path_or_preset)) {
        const auto names = preset_names();
        if (std::find(names.begin(), names.end(), path_or_preset) != names.end()) return preset_config(path_or_preset);
        throw ValidationError("no config file or preset named '" + path_or_preset + "'");
    }
    RunSetup s = parse_config(read_text(path_or_preset));
    if (s.name.empty()) s.name = std::filesystem::path(path_or_preset).stem().string();
    return s;
}

std::string config_to_json(const RunSetup& s) {
    json j;
    if (!s.name.empty()) j["name"] = s.name;
    j["source"] = source_json(s.config.source);
    j["radius"] = s.config.radius;
    if (s.config.jitter) j["jitter"] = {{"amplitude", s.config.jitter->amplitude}, {"seed", s.config.jitter->seed}};
    j["geometry"] = s.config.geometry == Geometry::Slab ? "slab" : "spherical";
    j["scattering"] = s.scattering;
    return j.dump(2);
}

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_text(const std::string& path, const std::string& text) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
    std::string text;
    for (std::size_t i = 0; i < header.size(); ++i) text += (i ? "," : "") + header[i];
    text += '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) text += ',';
            text += format_double(row[i]);
        }
        text += '\n';
    }
    write_text(path, text);
}

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string fnv1a_file(const std::string& path) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(read_text(path));
    return os.str();
}

}  // namespace kinlim
