#include "treewave/io.hpp"

#include "treewave/errors.hpp"

#include <json.hpp>

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

namespace treewave {

namespace {

using nlohmann::json;
using cd = std::complex<double>;

// 17 significant digits: enough for exact double round trips everywhere
std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// JSON writer with sorted keys and %.17g floats; nlohmann's own dump would
// use shortest-round-trip notation instead of the pinned digit count
void dump_json(const json& v, std::string& out, int depth) {
    const std::string pad(2 * static_cast<size_t>(depth), ' ');
    const std::string pad_in(2 * static_cast<size_t>(depth) + 2, ' ');
    switch (v.type()) {
    case json::value_t::object: {
        if (v.empty()) {
            out += "{}";
            return;
        }
        out += "{\n";
        bool first = true;
        for (const auto& [key, val] : v.items()) {
            if (!first)
                out += ",\n";
            first = false;
            out += pad_in + json(key).dump() + ": ";
            dump_json(val, out, depth + 1);
        }
        out += "\n" + pad + "}";
        return;
    }
    case json::value_t::array: {
        if (v.empty()) {
            out += "[]";
            return;
        }
        bool flat = true;
        for (const auto& e : v)
            if (e.is_structured())
                flat = false;
        if (flat) {
            out += "[";
            for (size_t i = 0; i < v.size(); ++i) {
                if (i)
                    out += ", ";
                dump_json(v[i], out, depth);
            }
            out += "]";
            return;
        }
        out += "[\n";
        for (size_t i = 0; i < v.size(); ++i) {
            if (i)
                out += ",\n";
            out += pad_in;
            dump_json(v[i], out, depth + 1);
        }
        out += "\n" + pad + "]";
        return;
    }
    case json::value_t::string:
        out += v.dump();
        return;
    case json::value_t::boolean:
        out += v.get<bool>() ? "true" : "false";
        return;
    case json::value_t::number_integer:
        out += std::to_string(v.get<long long>());
        return;
    case json::value_t::number_unsigned:
        out += std::to_string(v.get<unsigned long long>());
        return;
    case json::value_t::number_float:
        out += fmt(v.get<double>());
        return;
    default:
        out += "null";
        return;
    }
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw Error("cannot open " + path + " for writing");
    f << content;
    f.flush();
    if (!f)
        throw Error("write failed: " + path);
}

void write_json_file(const json& v, const std::string& path) {
    std::string out;
    dump_json(v, out, 0);
    out += "\n";
    write_text(path, out);
}

std::string read_text(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw ParseError("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

json read_json_file(const std::string& path) {
    const std::string text = read_text(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
}

json jvec(const Eigen::VectorXd& v) {
    json a = json::array();
    for (int i = 0; i < v.size(); ++i)
        a.push_back(v[i]);
    return a;
}

json jmat(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (int j = 0; j < m.cols(); ++j)
            row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

Eigen::VectorXd vec_of(const json& a, const std::string& what) {
    if (!a.is_array())
        throw SchemaError(what + " must be an array");
    Eigen::VectorXd v(static_cast<int>(a.size()));
    for (size_t i = 0; i < a.size(); ++i) {
        if (!a[i].is_number())
            throw SchemaError(what + " must hold numbers");
        v[static_cast<int>(i)] = a[i].get<double>();
    }
    return v;
}

Eigen::MatrixXd mat_of(const json& rows, const std::string& what) {
    if (!rows.is_array())
        throw SchemaError(what + " must be an array of rows");
    const int nr = static_cast<int>(rows.size());
    Eigen::MatrixXd m;
    for (int i = 0; i < nr; ++i) {
        const Eigen::VectorXd row = vec_of(rows[i], what);
        if (i == 0)
            m.resize(nr, row.size());
        else if (row.size() != m.cols())
            throw SchemaError(what + " rows differ in length");
        m.row(i) = row.transpose();
    }
    return m;
}

bool is_int(const json& v) { return v.is_number_integer() || v.is_number_unsigned(); }

std::string equation_name(Equation eq) {
    switch (eq) {
    case Equation::Wave:
        return "wave";
    case Equation::Heat:
        return "heat";
    default:
        return "schrodinger";
    }
}

Equation parse_equation(const std::string& name) {
    if (name == "wave")
        return Equation::Wave;
    if (name == "heat")
        return Equation::Heat;
    if (name == "schrodinger")
        return Equation::Schrodinger;
    throw SchemaError("unknown equation: " + name + " (wave | heat | schrodinger)");
}

double parse_number(const std::string& s, const std::string& where) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0' || errno == ERANGE)
        throw ParseError(where + ": bad number '" + s + "'");
    return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> parts;
    size_t start = 0;
    while (true) {
        const size_t pos = line.find(sep, start);
        if (pos == std::string::npos) {
            parts.push_back(line.substr(start));
            return parts;
        }
        parts.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

std::vector<std::string> read_lines(const std::string& path) {
    std::vector<std::string> lines;
    for (std::string& part : split(read_text(path), '\n'))
        lines.push_back(std::move(part));
    while (!lines.empty() && lines.back().empty())
        lines.pop_back();
    return lines;
}

// "key=value" token lookup on a comment line like "# control equation=wave"
std::string comment_field(const std::string& line, const std::string& key,
                          const std::string& where) {
    for (const std::string& tok : split(line, ' ')) {
        if (tok.rfind(key + "=", 0) == 0)
            return tok.substr(key.size() + 1);
    }
    throw ParseError(where + ": header comment lacks " + key + "=");
}

} // namespace

// --- graph files -------------------------------------------------------------

namespace {

Density parse_density(const json& d, const std::string& tag) {
    if (!d.is_object() || !d.contains("type") || !d["type"].is_string())
        throw SchemaError(tag + ": density needs a string type");
    const std::string type = d["type"].get<std::string>();
    auto params = [&]() {
        if (!d.contains("params") || !d["params"].is_array())
            throw SchemaError(tag + ": density needs a params array");
        std::vector<double> out;
        for (const auto& p : d["params"]) {
            if (!p.is_number())
                throw SchemaError(tag + ": density params must be numbers");
            out.push_back(p.get<double>());
        }
        return out;
    };
    if (type == "constant") {
        const auto p = params();
        if (p.size() != 1)
            throw SchemaError(tag + ": constant density takes one parameter");
        return Density::constant(p[0]);
    }
    if (type == "linear") {
        const auto p = params();
        if (p.size() != 2)
            throw SchemaError(tag + ": linear density takes intercept and slope");
        return Density::linear(p[0], p[1]);
    }
    if (type == "sampled") {
        if (!d.contains("x") || !d.contains("rho"))
            throw SchemaError(tag + ": sampled density needs x and rho arrays");
        const Eigen::VectorXd x = vec_of(d["x"], tag + ": density x");
        const Eigen::VectorXd r = vec_of(d["rho"], tag + ": density rho");
        return Density::sampled(std::vector<double>(x.begin(), x.end()),
                                std::vector<double>(r.begin(), r.end()));
    }
    throw SchemaError(tag + ": unknown density type '" + type + "'");
}

} // namespace

GraphSpec parse_graph_text(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(origin + ": " + e.what());
    }
    if (!j.is_object())
        throw SchemaError(origin + ": top level must be an object");
    if (!j.contains("vertices") || !j["vertices"].is_array())
        throw SchemaError(origin + ": missing vertices array");
    if (!j.contains("edges") || !j["edges"].is_array())
        throw SchemaError(origin + ": missing edges array");

    GraphSpec spec;
    for (const auto& v : j["vertices"]) {
        if (!is_int(v))
            throw SchemaError(origin + ": vertex ids must be integers");
        spec.vertices.push_back(v.get<int>());
    }
    for (const auto& e : j["edges"]) {
        if (!e.is_object())
            throw SchemaError(origin + ": each edge must be an object");
        if (!e.contains("id") || !is_int(e["id"]))
            throw SchemaError(origin + ": edge without an integer id");
        EdgeSpec edge;
        edge.id = e["id"].get<int>();
        const std::string tag = origin + ": edge " + std::to_string(edge.id);
        auto need_int = [&](const char* key) {
            if (!e.contains(key) || !is_int(e[key]))
                throw SchemaError(tag + ": missing integer " + key);
            return e[key].get<int>();
        };
        edge.tail = need_int("tail");
        edge.head = need_int("head");
        if (!e.contains("length") || !e["length"].is_number())
            throw SchemaError(tag + ": missing length");
        edge.length = e["length"].get<double>();
        if (e.contains("density"))
            edge.density = parse_density(e["density"], tag);
        spec.edges.push_back(edge);
    }
    return spec;
}

GraphSpec parse_graph_file(const std::string& path) {
    return parse_graph_text(read_text(path), path);
}

bool is_preset_graph(const std::string& name) {
    return name == "interval" || name == "star3" || name == "weighted-star3";
}

GraphSpec preset_graph(const std::string& name) {
    GraphSpec s;
    if (name == "interval") {
        s.vertices = {0, 1};
        s.edges.push_back({1, 0, 1, M_PI, Density::constant(1.0)});
        return s;
    }
    if (name == "star3") {
        s.vertices = {0, 1, 2, 3};
        for (int j = 0; j < 3; ++j)
            s.edges.push_back({j + 1, 0, j + 1, 1.0, Density::constant(1.0)});
        return s;
    }
    if (name == "weighted-star3") {
        s.vertices = {0, 1, 2, 3};
        const double rho[3] = {1.0, 2.25, 4.0};
        for (int j = 0; j < 3; ++j)
            s.edges.push_back({j + 1, 0, j + 1, static_cast<double>(j + 1),
                               Density::constant(rho[j])});
        return s;
    }
    throw SchemaError("unknown graph preset: " + name);
}

// --- spectral data files -----------------------------------------------------

namespace {

json spectrum_json(const SpectralData& sd) {
    json j;
    j["lambda"] = jvec(sd.lambda);
    j["lambda_raw"] = jvec(sd.lambda_raw);
    j["kappa"] = jmat(sd.kappa);
    j["alpha"] = jmat(sd.alpha);
    j["boundary"] = sd.boundary;
    j["elements_per_edge"] = sd.elements_per_edge;
    return j;
}

} // namespace

void write_spectrum(const SpectralData& sd, const std::string& path) {
    write_json_file(spectrum_json(sd), path);
}

SpectralData load_spectrum(const std::string& path) {
    const json j = read_json_file(path);
    if (!j.is_object())
        throw SchemaError(path + ": spectrum file must be an object");
    for (const char* key : {"lambda", "lambda_raw", "kappa", "alpha", "boundary",
                            "elements_per_edge"})
        if (!j.contains(key))
            throw SchemaError(path + ": missing " + std::string(key));
    SpectralData sd;
    sd.lambda = vec_of(j["lambda"], path + ": lambda");
    sd.lambda_raw = vec_of(j["lambda_raw"], path + ": lambda_raw");
    sd.kappa = mat_of(j["kappa"], path + ": kappa");
    sd.alpha = mat_of(j["alpha"], path + ": alpha");
    for (const auto& v : j["boundary"]) {
        if (!is_int(v))
            throw SchemaError(path + ": boundary must hold integers");
        sd.boundary.push_back(v.get<int>());
    }
    for (const auto& v : j["elements_per_edge"]) {
        if (!is_int(v))
            throw SchemaError(path + ": elements_per_edge must hold integers");
        sd.elements_per_edge.push_back(v.get<int>());
    }
    return sd;
}

// --- control and trajectory files ---------------------------------------------

void write_control(const BoundaryControl& ctl, const std::string& path) {
    if (ctl.grid.size() == 0)
        throw SchemaError("control carries no sample grid to export");
    const bool complex_vals = ctl.equation == Equation::Schrodinger;
    std::string out =
        "# control equation=" + equation_name(ctl.equation) + " horizon=" + fmt(ctl.horizon) + "\n";
    out += "t";
    for (const int v : ctl.channel_vertices) {
        if (complex_vals)
            out += ",ch_" + std::to_string(v) + "_re,ch_" + std::to_string(v) + "_im";
        else
            out += ",ch_" + std::to_string(v);
    }
    out += "\n";
    for (int i = 0; i < ctl.grid.size(); ++i) {
        out += fmt(ctl.grid[i]);
        for (int c = 0; c < ctl.channels(); ++c) {
            out += "," + fmt(ctl.grid_values(i, c).real());
            if (complex_vals)
                out += "," + fmt(ctl.grid_values(i, c).imag());
        }
        out += "\n";
    }
    write_text(path, out);
}

BoundaryControl load_control(const std::string& path) {
    const std::vector<std::string> lines = read_lines(path);
    if (lines.size() < 3 || lines[0].rfind("# control ", 0) != 0)
        throw ParseError(path + ": not a control file");
    BoundaryControl ctl;
    ctl.equation = parse_equation(comment_field(lines[0], "equation", path));
    ctl.horizon = parse_number(comment_field(lines[0], "horizon", path), path);
    const bool complex_vals = ctl.equation == Equation::Schrodinger;

    const std::vector<std::string> header = split(lines[1], ',');
    if (header.empty() || header[0] != "t")
        throw ParseError(path + ": header must start with t");
    const int stride = complex_vals ? 2 : 1;
    if ((static_cast<int>(header.size()) - 1) % stride != 0)
        throw ParseError(path + ": channel column count mismatch");
    const int channels = (static_cast<int>(header.size()) - 1) / stride;
    for (int c = 0; c < channels; ++c) {
        const std::string& name = header[1 + static_cast<size_t>(c) * stride];
        if (name.rfind("ch_", 0) != 0)
            throw ParseError(path + ": bad channel column '" + name + "'");
        std::string id = name.substr(3);
        if (complex_vals) {
            if (id.size() < 3 || id.substr(id.size() - 3) != "_re")
                throw ParseError(path + ": bad channel column '" + name + "'");
            id = id.substr(0, id.size() - 3);
        }
        ctl.channel_vertices.push_back(static_cast<int>(parse_number(id, path)));
    }

    const int rows = static_cast<int>(lines.size()) - 2;
    ctl.grid.resize(rows);
    ctl.grid_values.resize(rows, channels);
    for (int i = 0; i < rows; ++i) {
        const std::vector<std::string> cells = split(lines[static_cast<size_t>(i) + 2], ',');
        if (static_cast<int>(cells.size()) != 1 + channels * stride)
            throw ParseError(path + ": row " + std::to_string(i + 1) + " has " +
                             std::to_string(cells.size()) + " cells");
        ctl.grid[i] = parse_number(cells[0], path);
        for (int c = 0; c < channels; ++c) {
            const double re = parse_number(cells[1 + static_cast<size_t>(c) * stride], path);
            const double im =
                complex_vals ? parse_number(cells[2 + static_cast<size_t>(c) * stride], path) : 0.0;
            ctl.grid_values(i, c) = cd(re, im);
        }
    }
    return ctl;
}

void write_trajectory(const Trajectory& traj, const std::string& path) {
    const bool wave = traj.equation == Equation::Wave;
    std::string out = "# trajectory equation=" + equation_name(traj.equation) +
                      " provenance=" + traj.provenance + "\n";
    out += "t";
    for (int k = 0; k < traj.modes(); ++k)
        out += ",c_" + std::to_string(k) + "_re,c_" + std::to_string(k) + "_im";
    if (wave)
        for (int k = 0; k < traj.modes(); ++k)
            out += ",cdot_" + std::to_string(k) + "_re,cdot_" + std::to_string(k) + "_im";
    out += "\n";
    for (int i = 0; i < traj.times.size(); ++i) {
        out += fmt(traj.times[i]);
        for (int k = 0; k < traj.modes(); ++k)
            out += "," + fmt(traj.c(i, k).real()) + "," + fmt(traj.c(i, k).imag());
        if (wave)
            for (int k = 0; k < traj.modes(); ++k)
                out += "," + fmt(traj.cdot(i, k).real()) + "," + fmt(traj.cdot(i, k).imag());
        out += "\n";
    }
    write_text(path, out);
}

Trajectory load_trajectory(const std::string& path) {
    const std::vector<std::string> lines = read_lines(path);
    if (lines.size() < 2 || lines[0].rfind("# trajectory ", 0) != 0)
        throw ParseError(path + ": not a trajectory file");
    Trajectory traj;
    traj.equation = parse_equation(comment_field(lines[0], "equation", path));
    traj.provenance = comment_field(lines[0], "provenance", path);
    const bool wave = traj.equation == Equation::Wave;

    const std::vector<std::string> header = split(lines[1], ',');
    if (header.empty() || header[0] != "t")
        throw ParseError(path + ": header must start with t");
    const int cols = static_cast<int>(header.size()) - 1;
    const int per_mode = wave ? 4 : 2;
    if (cols % per_mode != 0)
        throw ParseError(path + ": mode column count mismatch");
    const int K = cols / per_mode;

    const int rows = static_cast<int>(lines.size()) - 2;
    traj.times.resize(rows);
    traj.c.resize(rows, K);
    if (wave)
        traj.cdot.resize(rows, K);
    for (int i = 0; i < rows; ++i) {
        const std::vector<std::string> cells = split(lines[static_cast<size_t>(i) + 2], ',');
        if (static_cast<int>(cells.size()) != 1 + cols)
            throw ParseError(path + ": row " + std::to_string(i + 1) + " has " +
                             std::to_string(cells.size()) + " cells");
        traj.times[i] = parse_number(cells[0], path);
        for (int k = 0; k < K; ++k)
            traj.c(i, k) = cd(parse_number(cells[1 + 2 * static_cast<size_t>(k)], path),
                              parse_number(cells[2 + 2 * static_cast<size_t>(k)], path));
        if (wave)
            for (int k = 0; k < K; ++k)
                traj.cdot(i, k) =
                    cd(parse_number(cells[1 + 2 * static_cast<size_t>(K + k)], path),
                       parse_number(cells[2 + 2 * static_cast<size_t>(K + k)], path));
    }
    return traj;
}

// --- targets -------------------------------------------------------------------

namespace {

Eigen::VectorXcd parse_coef_array(const json& arr, const std::string& what) {
    if (!arr.is_array())
        throw SchemaError(what + " must be an array");
    Eigen::VectorXcd v(static_cast<int>(arr.size()));
    for (size_t i = 0; i < arr.size(); ++i) {
        const auto& e = arr[i];
        if (e.is_number()) {
            v[static_cast<int>(i)] = e.get<double>();
        } else if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number()) {
            v[static_cast<int>(i)] = cd(e[0].get<double>(), e[1].get<double>());
        } else {
            throw SchemaError(what + " entries must be numbers or [re, im] pairs");
        }
    }
    return v;
}

} // namespace

ModalState parse_target_file(const std::string& path) {
    const json j = read_json_file(path);
    if (!j.is_object() || !j.contains("a"))
        throw SchemaError(path + ": target file needs an 'a' coefficient array");
    ModalState st;
    st.a = parse_coef_array(j["a"], path + ": a");
    if (j.contains("b"))
        st.b = parse_coef_array(j["b"], path + ": b");
    return st;
}

// --- command plumbing -----------------------------------------------------------

namespace {

namespace fs = std::filesystem;

void validate_config(const RunConfig& cfg) {
    if (cfg.modes < 1)
        throw SchemaError("--modes must be at least 1");
    if (cfg.mesh < 0)
        throw SchemaError("--mesh must be positive (or 0 to derive it)");
    if (cfg.horizon < 0.0)
        throw SchemaError("--horizon must be positive (or 0 for the critical time)");
    parse_equation(cfg.equation);
}

GraphSpec load_graph(const RunConfig& cfg) {
    return is_preset_graph(cfg.graph) ? preset_graph(cfg.graph) : parse_graph_file(cfg.graph);
}

std::vector<int> channel_set(const MetricTree& tree, const RunConfig& cfg) {
    if (cfg.exclude_vertex < 0)
        return tree.boundary();
    return all_but(tree.boundary(), cfg.exclude_vertex);
}

SpectralData make_spectral(const MetricTree& tree, const RunConfig& cfg) {
    const MeshConfig mesh = cfg.mesh > 0 ? MeshConfig::uniform(tree, cfg.mesh, cfg.modes)
                                         : MeshConfig::for_modes(tree, cfg.modes);
    return solve_spectrum(tree, mesh, cfg.modes, cfg.seed);
}

Eigen::VectorXcd padded_to(const Eigen::VectorXcd& v, int K) {
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(K);
    out.head(std::min<int>(static_cast<int>(v.size()), K)) =
        v.head(std::min<int>(static_cast<int>(v.size()), K));
    return out;
}

ModalState make_state(const RunConfig& cfg, Equation eq) {
    const int K = cfg.modes;
    ModalState st;
    if (cfg.target == "first-mode") {
        st.a = Eigen::VectorXcd::Zero(K);
        st.a[0] = 1.0;
        if (eq == Equation::Wave)
            st.b = Eigen::VectorXcd::Zero(K);
        return st;
    }
    if (cfg.target == "random") {
        std::mt19937_64 rng(cfg.seed);
        std::uniform_real_distribution<double> uni(-1.0, 1.0);
        st.a.resize(K);
        for (int k = 0; k < K; ++k) {
            const double re = uni(rng);
            st.a[k] = eq == Equation::Schrodinger ? cd(re, uni(rng)) : cd(re, 0.0);
        }
        if (eq == Equation::Wave) {
            st.b.resize(K);
            for (int k = 0; k < K; ++k)
                st.b[k] = uni(rng);
        }
        return st;
    }
    return parse_target_file(cfg.target);
}

std::string artifact(const RunConfig& cfg, const char* name) {
    return (fs::path(cfg.out_dir) / name).string();
}

json report_json(const SynthesisReport& rep) {
    json j;
    j["residual"] = jvec(rep.residual);
    j["max_residual"] = rep.max_residual;
    j["tail_bound"] = rep.tail_bound;
    j["sigma_min"] = rep.sigma_min;
    j["condition"] = rep.condition;
    j["control_l2"] = rep.control_l2;
    j["warnings"] = rep.warnings;
    return j;
}

// everything the synthesize/simulate/verify pipeline shares
struct Pipeline {
    MetricTree tree;
    SpectralData sd;
    Equation eq;
    std::vector<int> channels;
    double horizon = 0.0;
    ModalState state;
    BoundaryControl ctl;
    SynthesisReport rep;
};

Pipeline synthesize_pipeline(const RunConfig& cfg, std::ostream& log) {
    Pipeline p{build_tree(load_graph(cfg)), {}, parse_equation(cfg.equation), {}, 0.0, {}, {}, {}};
    p.sd = make_spectral(p.tree, cfg);
    p.channels = channel_set(p.tree, cfg);
    p.horizon = cfg.horizon > 0.0 ? cfg.horizon : default_horizon(p.tree, p.channels);
    p.state = make_state(cfg, p.eq);
    const ControlProblem problem =
        make_problem(p.eq, p.sd, p.state, p.horizon, cfg.modes, p.channels);
    std::tie(p.ctl, p.rep) = synthesize(problem);

    write_control(p.ctl, artifact(cfg, "control.csv"));
    json j;
    j["equation"] = equation_name(p.eq);
    j["graph"] = cfg.graph;
    j["modes"] = cfg.modes;
    j["horizon"] = p.horizon;
    j["channels"] = p.channels;
    j["target"] = cfg.target;
    j["seed"] = cfg.seed;
    j["report"] = report_json(p.rep);
    write_json_file(j, artifact(cfg, "synthesis.json"));

    log << "synthesized " << equation_name(p.eq) << " control, horizon " << fmt(p.horizon)
        << ", " << cfg.modes << " modes, " << p.channels.size() << " channels\n";
    log << "max moment residual " << fmt(p.rep.max_residual) << ", gram condition "
        << fmt(p.rep.condition) << ", control L2 norm " << fmt(p.rep.control_l2) << "\n";
    for (const auto& w : p.rep.warnings)
        log << "warning: " << w << "\n";
    return p;
}

Trajectory simulate_pipeline(const Pipeline& p, const RunConfig& cfg) {
    switch (p.eq) {
    case Equation::Wave:
        return wave_forward(p.sd, p.ctl, p.horizon, cfg.modes);
    case Equation::Heat:
        return heat_forward(p.sd, p.state.a, p.ctl, p.horizon, cfg.modes);
    default:
        return schrodinger_forward(p.sd, p.state.a, p.ctl, p.horizon, cfg.modes);
    }
}

double wave_state_error(const SpectralData& sd, int K, const Eigen::VectorXcd& c,
                        const Eigen::VectorXcd& cdot, const Eigen::VectorXcd& a,
                        const Eigen::VectorXcd& b) {
    const Eigen::VectorXd lam = sd.lambda.head(K);
    return std::hypot(modal_norm(c - a, lam, 1), modal_norm(cdot - b, lam, -1));
}

// --- commands --------------------------------------------------------------------

int cmd_geometry(const RunConfig& cfg, std::ostream& log) {
    const MetricTree tree = build_tree(load_graph(cfg));
    json j;
    json edges = json::array();
    for (const auto& e : tree.spec().edges)
        edges.push_back({{"id", e.id},
                         {"tail", e.tail},
                         {"head", e.head},
                         {"length", e.length},
                         {"optical_length", tree.edge_optical_length(e.id)}});
    j["edges"] = edges;
    j["total_optical_length"] = tree.total_optical_length();
    j["boundary"] = tree.boundary();

    const DiameterResult d = optical_diameter(tree);
    j["diameter"] = {{"value", d.value}, {"vertex_a", d.vertex_a}, {"vertex_b", d.vertex_b}};
    const CenterResult c = optical_center(tree);
    j["center"] = {{"edge", c.point.edge}, {"x", c.point.x}, {"eccentricity", c.eccentricity}};

    json d1 = json::array();
    for (const int g : tree.boundary()) {
        const double ecc = eccentricity(tree, g);
        d1.push_back({{"vertex", g}, {"d1", ecc}, {"critical_time", 2.0 * ecc}});
    }
    j["boundary_eccentricity"] = d1;
    write_json_file(j, artifact(cfg, "geometry.json"));

    log << "optical diameter " << fmt(d.value) << " between vertices " << d.vertex_a << " and "
        << d.vertex_b << "\n";
    log << "center on edge " << c.point.edge << " at x " << fmt(c.point.x)
        << ", eccentricity " << fmt(c.eccentricity) << "\n";
    for (const auto& row : d1)
        log << "d1(" << row["vertex"].get<int>() << ") " << fmt(row["d1"].get<double>()) << "\n";
    return exit_ok;
}

int cmd_spectrum(const RunConfig& cfg, std::ostream& log) {
    const MetricTree tree = build_tree(load_graph(cfg));
    const SpectralData sd = make_spectral(tree, cfg);
    const WeylReport weyl = weyl_check(sd, tree);

    json j = spectrum_json(sd);
    j["weyl"] = {{"l_optical", weyl.l_optical},
                 {"max_deviation", weyl.max_deviation},
                 {"monotone", weyl.monotone},
                 {"deviation", jvec(weyl.deviation)}};
    write_json_file(j, artifact(cfg, "spectrum.json"));

    log << sd.modes() << " modes, lambda from " << fmt(sd.lambda[0]) << " to "
        << fmt(sd.lambda[sd.modes() - 1]) << "\n";
    log << "weyl: optical length " << fmt(weyl.l_optical) << ", max counting deviation "
        << fmt(weyl.max_deviation) << (weyl.monotone ? "" : ", non-monotone") << "\n";
    return exit_ok;
}

int cmd_basis_report(const RunConfig& cfg, std::ostream& log) {
    const MetricTree tree = build_tree(load_graph(cfg));
    const SpectralData sd = make_spectral(tree, cfg);
    const std::vector<int> channels = channel_set(tree, cfg);
    const Equation eq = parse_equation(cfg.equation);
    const double T = cfg.horizon > 0.0 ? cfg.horizon : default_horizon(tree, channels);
    const int K = cfg.modes;

    auto sigma_at = [&](double horizon, int k) {
        if (eq == Equation::Wave) {
            const FamilySpec fam = make_family(FamilyKind::Sin, sd, horizon, channels);
            return sigma_min(wave_gram(fam.amplitude.topRows(k), sd.omega().head(k), horizon));
        }
        const FamilyKind kind =
            eq == Equation::Heat ? FamilyKind::Parabolic : FamilyKind::Schrodinger;
        return sigma_min(gram(make_family(kind, sd, horizon, channels), k));
    };

    json j;
    j["equation"] = equation_name(eq);
    j["graph"] = cfg.graph;
    j["modes"] = K;
    j["horizon"] = T;
    j["channels"] = channels;

    json hsweep = json::array();
    for (const double factor : {0.25, 0.5, 0.75, 1.0, 1.5, 2.0}) {
        const SigmaReport s = sigma_at(factor * T, K);
        hsweep.push_back({{"factor", factor},
                          {"horizon", factor * T},
                          {"sigma_min", s.sigma_min},
                          {"sigma_max", s.sigma_max},
                          {"condition", s.condition}});
        log << "horizon " << fmt(factor * T) << ": sigma_min " << fmt(s.sigma_min)
            << ", condition " << fmt(s.condition) << "\n";
    }
    j["horizon_sweep"] = hsweep;

    json ksweep = json::array();
    for (int k = 1; k <= K; ++k) {
        const SigmaReport s = sigma_at(T, k);
        ksweep.push_back({{"modes", k}, {"sigma_min", s.sigma_min}, {"condition", s.condition}});
    }
    j["mode_sweep"] = ksweep;

    if (eq != Equation::Wave) {
        const FamilyKind kind =
            eq == Equation::Heat ? FamilyKind::Parabolic : FamilyKind::Schrodinger;
        const FamilySpec fam = make_family(kind, sd, T, channels);
        const BiorthResult bi = biorthogonal(fam, K);
        j["biorthogonal"] = {{"defect", bi.defect},
                             {"rank", bi.rank},
                             {"condition", bi.condition},
                             {"singular_warning", bi.singular_warning}};
        log << "biorthogonal defect " << fmt(bi.defect) << ", rank " << bi.rank << "\n";
        if (eq == Equation::Heat) {
            const GrowthFit fit = biorth_growth_fit(fam, K);
            j["growth"] = {{"beta", fit.beta},
                           {"intercept", fit.intercept},
                           {"residual", fit.residual},
                           {"curvature", fit.curvature},
                           {"single_exponential", fit.single_exponential},
                           {"sqrt_lambda", jvec(fit.sqrt_lambda)},
                           {"log_norms", jvec(fit.log_norms)}};
            log << "growth fit: beta " << fmt(fit.beta) << ", residual " << fmt(fit.residual)
                << (fit.single_exponential ? ", at most single-exponential" : "") << "\n";
        }
    }
    write_json_file(j, artifact(cfg, "basis_report.json"));
    return exit_ok;
}

int cmd_synthesize(const RunConfig& cfg, std::ostream& log) {
    synthesize_pipeline(cfg, log);
    return exit_ok;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& log) {
    const Pipeline p = synthesize_pipeline(cfg, log);
    const Trajectory traj = simulate_pipeline(p, cfg);
    write_trajectory(traj, artifact(cfg, "trajectory.csv"));
    const int last = static_cast<int>(traj.times.size()) - 1;
    log << "simulated " << traj.times.size() << " steps to t " << fmt(traj.times[last]) << "\n";
    return exit_ok;
}

int cmd_verify(const RunConfig& cfg, std::ostream& log) {
    const Pipeline p = synthesize_pipeline(cfg, log);
    const Trajectory traj = simulate_pipeline(p, cfg);
    write_trajectory(traj, artifact(cfg, "trajectory.csv"));

    const int K = cfg.modes;
    const int last = static_cast<int>(traj.times.size()) - 1;
    const Eigen::VectorXcd cT = traj.c.row(last).transpose();
    const Eigen::VectorXd lam = p.sd.lambda.head(K);

    json j;
    j["equation"] = equation_name(p.eq);
    j["horizon"] = p.horizon;
    j["modes"] = K;
    j["synthesis"] = report_json(p.rep);

    bool passed = false;
    if (p.eq == Equation::Wave) {
        const Eigen::VectorXcd a = padded_to(p.state.a, K), b = padded_to(p.state.b, K);
        const Eigen::VectorXcd dT = traj.cdot.row(last).transpose();
        const double scale =
            std::max(1e-300, std::hypot(modal_norm(a, lam, 1), modal_norm(b, lam, -1)));
        const double err = wave_state_error(p.sd, K, cT, dT, a, b) / scale;

        const GridState grid = fdtd_wave(p.tree, p.ctl, p.horizon, FdtdConfig::uniform(p.tree, 400));
        const ModalState proj = project(grid, p.sd, p.tree, K);
        const double err_fdtd = wave_state_error(p.sd, K, proj.a, proj.b, a, b) / scale;

        const double tol = 1e-3, tol_fdtd = 5e-3;
        passed = err <= tol && err_fdtd <= tol_fdtd;
        j["final_error_spectral"] = err;
        j["tolerance_spectral"] = tol;
        j["final_error_fdtd"] = err_fdtd;
        j["tolerance_fdtd"] = tol_fdtd;
        log << "final relative error, spectral " << fmt(err) << " (tolerance " << fmt(tol)
            << ")\n";
        log << "final relative error, fdtd " << fmt(err_fdtd) << " (tolerance " << fmt(tol_fdtd)
            << ")\n";
    } else {
        const Eigen::VectorXcd a = padded_to(p.state.a, K);
        const double scale = std::max(1e-300, modal_norm(a, lam, -1));
        const double err = modal_norm(cT, lam, -1) / scale;
        const double tol = 1e-3;
        passed = err <= tol;
        j["final_error_spectral"] = err;
        j["tolerance_spectral"] = tol;
        log << "final relative error, spectral " << fmt(err) << " (tolerance " << fmt(tol)
            << ")\n";
    }
    j["passed"] = passed;
    write_json_file(j, artifact(cfg, "verify.json"));
    log << (passed ? "verification passed\n" : "verification failed\n");
    return passed ? exit_ok : exit_verify_failed;
}

int classify(const Error& e) {
    if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const SchemaError*>(&e) ||
        dynamic_cast<const CycleDetected*>(&e) || dynamic_cast<const Disconnected*>(&e) ||
        dynamic_cast<const NonpositiveDensity*>(&e) ||
        dynamic_cast<const NonpositiveLength*>(&e) ||
        dynamic_cast<const IndexOutOfRange*>(&e) ||
        dynamic_cast<const InconsistentChannels*>(&e))
        return exit_invalid_input;
    if (dynamic_cast<const NumericallySingular*>(&e) ||
        dynamic_cast<const EigenSolverFailure*>(&e) ||
        dynamic_cast<const DegenerateMassMatrix*>(&e))
        return exit_numerical;
    if (dynamic_cast<const MeshTooCoarse*>(&e) || dynamic_cast<const CFLViolation*>(&e) ||
        dynamic_cast<const UnderresolvedQuadrature*>(&e))
        return exit_resolution;
    return exit_internal;
}

} // namespace

int run(const RunConfig& config, std::ostream& log) {
    try {
        validate_config(config);
        fs::create_directories(config.out_dir);
        if (config.command == "geometry")
            return cmd_geometry(config, log);
        if (config.command == "spectrum")
            return cmd_spectrum(config, log);
        if (config.command == "basis-report")
            return cmd_basis_report(config, log);
        if (config.command == "synthesize")
            return cmd_synthesize(config, log);
        if (config.command == "simulate")
            return cmd_simulate(config, log);
        if (config.command == "verify")
            return cmd_verify(config, log);
        throw SchemaError("unknown command: " + config.command);
    } catch (const Error& e) {
        log << "error: " << e.what() << "\n";
        return classify(e);
    } catch (const std::exception& e) {
        log << "internal error: " << e.what() << "\n";
        return exit_internal;
    }
}

} // namespace treewave
