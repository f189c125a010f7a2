#include "cli_app.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <vector>

#include "CLI11.hpp"
#include "geolens/catalog.hpp"
#include "geolens/measure.hpp"
#include "geolens/parallel.hpp"
#include "geolens/rigidity.hpp"
#include "json.hpp"

namespace geolens::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";

const std::vector<std::string> kCommands = {
    "lens-table",     "distance",   "volume-check", "intersection-check", "fan-check",
    "douady-check",   "trapped-probe", "conjugate-scan", "cone-check",    "theta-curve",
    "jensen",         "psi-map",    "certificate",  "croke-chain"};

const std::set<std::string> kModelKeys = {"name",          "radius",        "half_width",    "period",
                                          "bump_amplitude", "bump_center_x", "bump_center_y", "bump_width",
                                          "swirl_amplitude", "swirl_radius"};

const std::set<std::string> kPairKeys = {"relation",      "swirl_amplitude", "swirl_radius", "bump_amplitude",
                                         "bump_center_x", "bump_center_y",   "bump_width"};

const std::set<std::string> kRunKeys = {
    "command",     "seed",        "threads",      "t_max",        "grid",         "rtol",         "atol",
    "n_s",         "n_phi",       "n_theta",      "n_tau",        "edge_points",  "a_component",  "a_param",
    "b_component", "b_param",     "winding",      "n_max",        "x1_component", "x1_param",     "x2_component",
    "x2_param",    "x3_component", "x3_param",    "x4_component", "x4_param",     "depth",        "horizons",
    "orbits",      "point_u",     "point_v",      "direction",    "tau",          "alpha",        "rho",
    "lyapunov_t",  "thetas",      "samples",      "theta",        "function",     "psi_grid",     "pairs",
    "area_grid",   "probes",      "boundary_samples"};

const std::set<std::string> kOutputKeys = {"dir"};

const std::map<std::string, const std::set<std::string>*> kSections = {
    {"model", &kModelKeys}, {"model2", &kModelKeys}, {"pair", &kPairKeys}, {"run", &kRunKeys},
    {"output", &kOutputKeys}};

std::string fmt17(double x) {
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

// ---------------------------------------------------------------------------
// Scenario: flat "section.key" -> value map with typed, recorded access.

class Scenario {
public:
    void load(const std::string& path) {
        path_ = path;
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
        std::stringstream text;
        text << in.rdbuf();
        index_lines(text.str());
        boost::property_tree::ptree tree;
        try {
            std::istringstream is(text.str());
            boost::property_tree::ini_parser::read_ini(is, tree);
        } catch (const boost::property_tree::ini_parser_error& e) {
            std::ostringstream os;
            os << path << ":" << e.line() << ": " << e.message();
            throw ConfigError(os.str());
        }
        for (const auto& [section, body] : tree) {
            if (body.empty() && !body.data().empty())
                throw ConfigError(where(section) + "field '" + section + "' outside of a section");
            const auto it = kSections.find(section);
            if (it == kSections.end()) throw ConfigError(where(section) + "unknown section [" + section + "]");
            for (const auto& [key, value] : body) {
                const std::string full = section + "." + key;
                if (!it->second->count(key)) throw ConfigError(where(full) + "unknown field " + full);
                values_[full] = value.data();
            }
        }
    }

    // "section.key=value" from the command line.
    void set(const std::string& assignment) {
        const auto eq = assignment.find('=');
        const auto dot = assignment.find('.');
        if (eq == std::string::npos || dot == std::string::npos || dot > eq)
            throw ConfigError("--set expects section.key=value, got '" + assignment + "'");
        const std::string full = assignment.substr(0, eq);
        const auto it = kSections.find(full.substr(0, dot));
        if (it == kSections.end() || !it->second->count(full.substr(dot + 1)))
            throw ConfigError("unknown field " + full + " in --set");
        values_[full] = assignment.substr(eq + 1);
        lines_.erase(full);
    }

    void override_value(const std::string& full, const std::string& value) {
        values_[full] = value;
        lines_.erase(full);
    }

    bool has(const std::string& full) const { return values_.count(full) > 0; }

    std::string get_string(const std::string& full, const std::string& def) {
        const auto it = values_.find(full);
        const std::string v = it == values_.end() ? def : it->second;
        resolved_[full] = v;
        return v;
    }

    double get_double(const std::string& full, double def) {
        const auto it = values_.find(full);
        if (it == values_.end()) {
            resolved_[full] = fmt17(def);
            return def;
        }
        const double v = parse_double(full, it->second);
        resolved_[full] = fmt17(v);
        return v;
    }

    long long get_int(const std::string& full, long long def) {
        const auto it = values_.find(full);
        long long v = def;
        if (it != values_.end()) {
            std::size_t used = 0;
            try {
                v = std::stoll(it->second, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || !trailing_blank(it->second, used))
                throw ConfigError(where(full) + "field " + full + ": expected an integer, got '" + it->second + "'");
        }
        resolved_[full] = std::to_string(v);
        return v;
    }

    std::vector<double> get_list(const std::string& full, const std::vector<double>& def) {
        const auto it = values_.find(full);
        std::vector<double> out = def;
        if (it != values_.end()) {
            out.clear();
            std::string s = it->second;
            for (char& c : s)
                if (c == ',') c = ' ';
            std::istringstream is(s);
            std::string tok;
            while (is >> tok) out.push_back(parse_double(full, tok));
            if (out.empty()) throw ConfigError(where(full) + "field " + full + ": empty list");
        }
        std::string r;
        for (double x : out) r += (r.empty() ? "" : " ") + fmt17(x);
        resolved_[full] = r;
        return out;
    }

    int positive(const std::string& full, long long def) {
        const long long v = get_int(full, def);
        if (v < 1) throw ConfigError(where(full) + "field " + full + " must be positive");
        return static_cast<int>(v);
    }

    const std::map<std::string, std::string>& resolved() const { return resolved_; }
    std::string where(const std::string& full) const {
        const auto it = lines_.find(full);
        if (it == lines_.end()) return path_.empty() ? "" : path_ + ": ";
        return path_ + ":" + std::to_string(it->second) + ": ";
    }

private:
    static bool trailing_blank(const std::string& s, std::size_t from) {
        for (std::size_t i = from; i < s.size(); ++i)
            if (!std::isspace(static_cast<unsigned char>(s[i]))) return false;
        return true;
    }

    double parse_double(const std::string& full, const std::string& text) const {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(text, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || !trailing_blank(text, used) || !std::isfinite(v))
            throw ConfigError(where(full) + "field " + full + ": expected a number, got '" + text + "'");
        return v;
    }

    // line numbers of "key = value" entries, for diagnostics
    void index_lines(const std::string& text) {
        std::istringstream is(text);
        std::string line, section;
        for (int n = 1; std::getline(is, line); ++n) {
            const auto b = line.find_first_not_of(" \t");
            if (b == std::string::npos || line[b] == ';' || line[b] == '#') continue;
            if (line[b] == '[') {
                const auto e = line.find(']', b);
                section = line.substr(b + 1, e == std::string::npos ? std::string::npos : e - b - 1);
                lines_[section] = n;
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            std::string key = line.substr(b, eq - b);
            key.erase(key.find_last_not_of(" \t") + 1);
            lines_[section.empty() ? key : section + "." + key] = n;
        }
    }

    std::string path_;
    std::map<std::string, std::string> values_;
    std::map<std::string, int> lines_;
    std::map<std::string, std::string> resolved_;
};

// ---------------------------------------------------------------------------
// Models.

SurfaceModel build_model(Scenario& sc, const std::string& section) {
    const std::string name = sc.get_string(section + ".name", "euclidean_disk");
    SurfaceModel m = [&]() -> SurfaceModel {
        if (name == "euclidean_disk") return euclidean_disk(sc.get_double(section + ".radius", 1.0));
        if (name == "poincare_disk") return poincare_disk(sc.get_double(section + ".radius", 0.5));
        if (name == "round_sphere") return round_sphere(sc.get_double(section + ".radius", 3.0));
        if (name == "hyperbolic_cylinder")
            return hyperbolic_cylinder(sc.get_double(section + ".half_width", 1.0),
                                       sc.get_double(section + ".period", 2.0));
        if (name == "flat_cylinder")
            return flat_cylinder(sc.get_double(section + ".half_width", 1.0), sc.get_double(section + ".period", 2.0));
        throw ConfigError(sc.where(section + ".name") + "field " + section + ".name: unknown model '" + name + "'");
    }();
    try {
        if (sc.has(section + ".swirl_amplitude") || sc.has(section + ".swirl_radius"))
            m = pullback(m, std::make_shared<SwirlDiffeo>(sc.get_double(section + ".swirl_amplitude", 0.6),
                                                          sc.get_double(section + ".swirl_radius", 0.4)));
        if (sc.has(section + ".bump_amplitude"))
            m = conformal_bump(m, sc.get_double(section + ".bump_amplitude", 0.1),
                               {sc.get_double(section + ".bump_center_x", 0.0),
                                sc.get_double(section + ".bump_center_y", 0.0)},
                               sc.get_double(section + ".bump_width", 0.3));
    } catch (const DomainError& e) {
        throw ConfigError(std::string("model deformation in [") + section + "]: " + e.what());
    }
    return m;
}

MetricPair build_pair(Scenario& sc) {
    const SurfaceModel g1 = build_model(sc, "model");
    const std::string rel = sc.get_string("pair.relation", "identical");
    if (rel == "identical") return identical_pair(g1);
    if (rel == "pullback")
        return pullback_pair(g1, std::make_shared<SwirlDiffeo>(sc.get_double("pair.swirl_amplitude", 0.6),
                                                               sc.get_double("pair.swirl_radius", 0.4)));
    if (rel == "conformal")
        return conformal_pair(g1, std::make_shared<BumpField>(
                                      sc.get_double("pair.bump_amplitude", 0.1),
                                      Vec2{sc.get_double("pair.bump_center_x", 0.03),
                                           sc.get_double("pair.bump_center_y", 0.0)},
                                      sc.get_double("pair.bump_width", 0.45)));
    if (rel == "unrelated") return unrelated_pair(g1, build_model(sc, "model2"));
    throw ConfigError(sc.where("pair.relation") + "field pair.relation: unknown relation '" + rel + "'");
}

void gate(const SurfaceModel& m, bool allow_nonconvex) {
    if (allow_nonconvex) return;
    const double k = boundary_convexity_check(m, 256);
    if (!(k > 0.0)) {
        std::ostringstream os;
        os << m.name() << " has minimal boundary geodesic curvature " << k
           << " (strict convexity required; pass --allow-nonconvex to override)";
        throw ModelRejected(os.str());
    }
}

// ---------------------------------------------------------------------------
// Outputs.

void write_atomic(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

Json num(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

Json point_json(BoundaryPoint b) { return Json{{"component", b.component}, {"param", b.param}}; }

struct Context {
    std::string command;
    Scenario sc;
    bool allow_nonconvex = false;
    fs::path dir;
    FlowOptions flow;
    double t_max = 0.0;
    std::vector<std::pair<std::string, std::string>> files;  // name, content (without the hash)
    Json result;

    void csv(const std::string& name, const std::string& body) { files.emplace_back(name, body); }
};

FlowOptions flow_options(Scenario& sc) {
    FlowOptions f;
    f.rtol = sc.get_double("run.rtol", f.rtol);
    f.atol = sc.get_double("run.atol", f.atol);
    if (!(f.rtol > 0.0) || !(f.atol > 0.0)) throw ConfigError("fields run.rtol and run.atol must be positive");
    return f;
}

BoundaryPoint boundary_key(Context& c, const std::string& prefix, BoundaryPoint def) {
    return {static_cast<int>(c.sc.get_int("run." + prefix + "_component", def.component)),
            c.sc.get_double("run." + prefix + "_param", def.param)};
}

ShootingOptions shooting(const Context& c) {
    ShootingOptions s;
    s.flow = c.flow;
    s.t_max = c.t_max;
    return s;
}

std::string csv_header_hash(const std::string& hash) { return "# config_hash=" + hash + "\n"; }

// Counter-based uniform in (0, 1).
double counter_uniform(std::uint64_t seed, std::uint64_t i) {
    std::uint64_t z = seed * 0x9e3779b97f4a7c15ULL + i + 0x632be59bd9b4e019ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return (static_cast<double>(z >> 11) + 0.5) * 0x1.0p-53;
}

// Interior points at most `fraction` of the way to the boundary.
std::vector<Vec2> interior_points(const SurfaceModel& m, int n, std::uint64_t seed, double fraction) {
    std::vector<Vec2> out;
    for (int i = 0; i < n; ++i) {
        const double a = counter_uniform(seed, 2 * i), b = counter_uniform(seed, 2 * i + 1);
        if (const auto* d = std::get_if<DiskChart>(&m.chart())) {
            const double r = fraction * d->radius * std::sqrt(a);
            out.push_back({r * std::cos(2.0 * kPi * b), r * std::sin(2.0 * kPi * b)});
        } else {
            const auto& s = std::get<StripChart>(m.chart());
            const double mid = 0.5 * (s.lower + s.upper), half = 0.5 * (s.upper - s.lower);
            out.push_back({s.period * a, mid + fraction * half * (2.0 * b - 1.0)});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Commands.

SurfaceModel single_model(Context& c) {
    SurfaceModel m = build_model(c.sc, "model");
    gate(m, c.allow_nonconvex);
    c.result["model"] = m.name();
    return m;
}

MetricPair pair_models(Context& c) {
    MetricPair p = build_pair(c.sc);
    gate(p.g1, c.allow_nonconvex);
    gate(p.g2, c.allow_nonconvex);
    c.result["model"] = p.g1.name();
    c.result["model2"] = p.g2.name();
    c.result["relation"] = to_string(p.relation);
    return p;
}

void cmd_lens_table(Context& c) {
    const SurfaceModel m = single_model(c);
    const int grid = c.sc.positive("run.grid", 64);
    const int n_s = c.sc.positive("run.n_s", grid), n_theta = c.sc.positive("run.n_theta", std::max(grid / 2, 1));
    std::vector<BoundaryPoint> nodes;
    for (int comp = 0; comp < m.boundary_components(); ++comp)
        for (int k = 0; k < n_s; ++k) nodes.push_back({comp, m.param_period() * k / n_s});
    std::vector<double> thetas;
    for (int j = 0; j < n_theta; ++j) thetas.push_back(kPi * (j + 0.5) / n_theta);
    const auto rows = shoot_table(m, nodes, thetas, c.t_max, c.flow);
    std::ostringstream os;
    os << std::setprecision(17);
    write_lens_csv(os, m, rows);
    c.csv("lens_table.csv", os.str());
    int exited = 0, tangential = 0, trapped = 0;
    for (const auto& r : rows) {
        if (r.flag == EscapeStatus::Exited) ++exited;
        if (r.flag == EscapeStatus::Tangential) ++tangential;
        if (r.flag == EscapeStatus::Trapped) ++trapped;
    }
    c.result["rows"] = rows.size();
    c.result["exited"] = exited;
    c.result["tangential"] = tangential;
    c.result["trapped"] = trapped;
}

GeodesicRecord solve_ab(Context& c, const SurfaceModel& m) {
    const BoundaryPoint a = boundary_key(c, "a", {0, 0.0});
    const BoundaryPoint b = boundary_key(c, "b", {m.is_annulus() ? 1 : 0, m.is_annulus() ? 0.0 : 2.0});
    const HomotopyClass cls{static_cast<int>(c.sc.get_int("run.winding", 0))};
    c.result["a"] = point_json(a);
    c.result["b"] = point_json(b);
    c.result["winding"] = cls.winding;
    return boundary_distance(m, a, b, cls, shooting(c));
}

void cmd_distance(Context& c) {
    const SurfaceModel m = single_model(c);
    const GeodesicRecord g = solve_ab(c, m);
    c.result["length"] = g.length;
    c.result["solver"] = g.solver == GeodesicSolver::Shooting ? "shooting" : "shortening";
    c.result["entry_angle"] = g.entry_angle;
    c.result["residual"] = g.residual;
    c.result["iterations"] = g.iterations;
    std::ostringstream os;
    os << std::setprecision(17) << "t,u,v\n";
    for (std::size_t i = 0; i < g.samples.size(); ++i)
        os << g.times[i] << "," << g.samples[i].p.x << "," << g.samples[i].p.y << "\n";
    c.csv("distance_path.csv", os.str());
}

void cmd_volume(Context& c) {
    const SurfaceModel m = single_model(c);
    const int grid = c.sc.positive("run.grid", 256);
    const int n_s = c.sc.positive("run.n_s", grid), n_phi = c.sc.positive("run.n_phi", grid);
    const VolumeReport r = volume_via_lens(m, make_fan_grid(m, n_s, n_phi, c.t_max, c.flow));
    c.result["value"] = r.lens_value;
    c.result["direct"] = r.direct_value;
    c.result["defect"] = r.defect;
    c.result["relative_defect"] = r.defect / r.direct_value;
    c.result["masked_fraction"] = r.masked_fraction;
    c.result["grid"] = {n_s, n_phi};
}

EtaOptions eta_options(const Context& c) {
    EtaOptions e;
    e.shooting = shooting(c);
    return e;
}

void cmd_intersection(Context& c) {
    const SurfaceModel m = single_model(c);
    const GeodesicRecord g = solve_ab(c, m);
    const int n_max = static_cast<int>(c.sc.get_int("run.n_max", 5));
    const IntersectionReport r = intersection_number(m, g, n_max, eta_options(c));
    c.result["length"] = g.length;
    c.result["eta"] = r.eta;
    c.result["twice_length"] = r.twice_length;
    c.result["defect"] = r.defect;
    c.result["relative_defect"] = r.defect / r.twice_length;
    c.result["truncation_residual"] = r.truncation_residual;
    c.result["n_max"] = n_max;
}

void cmd_fan(Context& c) {
    const SurfaceModel m = single_model(c);
    const GeodesicRecord g = solve_ab(c, m);
    const int grid = c.sc.positive("run.grid", 8);
    const int n_tau = c.sc.positive("run.n_tau", grid), n_theta = c.sc.positive("run.n_theta", grid);
    const int edge = c.sc.positive("run.edge_points", 4);
    const FanChartReport r = fan_chart_check(m, g, n_tau, n_theta, edge, c.flow);
    c.result["length"] = g.length;
    c.result["l1_defect"] = r.l1_defect;
    c.result["max_defect"] = r.max_defect;
    c.result["total_eta"] = r.total_eta;
    c.result["total_expected"] = r.total_expected;
    c.result["boxes"] = r.boxes;
    c.result["invalid"] = r.invalid;
}

void cmd_douady(Context& c) {
    const SurfaceModel m = single_model(c);
    const double P = m.param_period();
    const bool ann = m.is_annulus();
    const BoundaryPoint x1 = boundary_key(c, "x1", {0, ann ? -0.5 : 0.0});
    const BoundaryPoint x2 = boundary_key(c, "x2", {0, ann ? 0.5 : 0.25 * P});
    const BoundaryPoint x3 = boundary_key(c, "x3", {ann ? 1 : 0, ann ? 1.0 : 0.5 * P});
    const BoundaryPoint x4 = boundary_key(c, "x4", {ann ? 1 : 0, ann ? -1.0 : 0.75 * P});
    const int depth = static_cast<int>(c.sc.get_int("run.depth", 6));
    const DouadyReport d = douady_reconstruct(m, x1, x2, x3, x4, eta_options(c));
    const DyadicReport y = dyadic_reconstruct(m, x1, x2, depth, eta_options(c));
    c.result["corners"] = {point_json(x1), point_json(x2), point_json(x3), point_json(x4)};
    c.result["four_corner"] = d.four_corner;
    c.result["direct"] = d.direct;
    c.result["defect"] = d.defect;
    c.result["dyadic_by_depth"] = y.by_depth;
    c.result["dyadic_direct"] = y.direct;
}

void cmd_trapped(Context& c) {
    const SurfaceModel m = single_model(c);
    const int grid = c.sc.positive("run.grid", 64);
    const int n_s = c.sc.positive("run.n_s", grid), n_phi = c.sc.positive("run.n_phi", grid);
    const std::vector<double> horizons = c.sc.get_list("run.horizons", {10.0, 20.0, 40.0});
    const std::vector<double> f = trapped_fraction_curve(m, n_s, n_phi, horizons, c.flow);
    std::ostringstream os;
    os << std::setprecision(17) << "t_max,trapped_fraction\n";
    for (std::size_t i = 0; i < f.size(); ++i) os << horizons[i] << "," << f[i] << "\n";
    c.csv("trapped_fraction.csv", os.str());
    c.result["horizons"] = horizons;
    c.result["fractions"] = f;
    c.result["decay_ratio"] = f.back() > 0.0 ? num(f.front() / f.back()) : Json(nullptr);
}

void cmd_conjugate(Context& c) {
    const SurfaceModel m = single_model(c);
    const int orbits = c.sc.positive("run.orbits", 1000);
    const auto seed = static_cast<unsigned long long>(c.sc.get_int("run.seed", 1));
    const double T = c.t_max > 0.0 ? c.t_max : 5.0 * m.diameter();
    const auto samples = liouville_samples(m, {orbits, seed, 0.0}, c.flow);
    std::vector<std::optional<double>> ts(samples.size());
    parallel_for(samples.size(), [&](std::size_t i) { ts[i] = conjugate_scan(m, samples[i].y, T, c.flow); });
    std::ostringstream os;
    os << std::setprecision(17) << "index,u,v,wu,wv,t_conjugate\n";
    int found = 0;
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const PhasePoint& y = samples[i].y;
        os << i << "," << y.p.x << "," << y.p.y << "," << y.w.x << "," << y.w.y << ",";
        if (ts[i]) {
            ++found;
            lo = std::min(lo, *ts[i]);
            hi = std::max(hi, *ts[i]);
            os << *ts[i];
        }
        os << "\n";
    }
    c.csv("conjugate_times.csv", os.str());
    c.result["orbits"] = orbits;
    c.result["horizon"] = T;
    c.result["with_conjugate_point"] = found;
    c.result["min_t"] = found ? num(lo) : Json(nullptr);
    c.result["max_t"] = found ? num(hi) : Json(nullptr);
}

void cmd_cone(Context& c) {
    const SurfaceModel m = single_model(c);
    const Vec2 p{c.sc.get_double("run.point_u", 0.0), c.sc.get_double("run.point_v", 0.0)};
    const double dir = c.sc.get_double("run.direction", 0.0);
    const PhasePoint y{p, g_normalize(m.metric().at(p), {std::cos(dir), std::sin(dir)})};
    const double tau = c.sc.get_double("run.tau", 2.0);
    const double alpha = c.sc.get_double("run.alpha", 0.5), rho = c.sc.get_double("run.rho", 0.5);
    const double T = c.sc.get_double("run.lyapunov_t", 30.0);
    const ConeReport r = cone_expansion_check(m, y, tau, alpha, rho, 8.0, 17, c.flow);
    c.result["contained"] = r.contained;
    c.result["min_factor"] = r.min_factor;
    c.result["max_ratio"] = r.max_ratio;
    c.result["unstable"] = r.unstable;
    c.result["stable"] = r.stable;
    c.result["lyapunov"] = lyapunov_estimate(m, y, T, {0.0, 1.0}, c.flow);
    c.result["lyapunov_t"] = T;
}

TransferOptions transfer_options(const Context& c) {
    TransferOptions t;
    t.t_max = c.t_max;
    t.flow = c.flow;
    t.shooting = shooting(c);
    return t;
}

SamplingSpec sampling(Context& c) {
    return {c.sc.positive("run.samples", 2000), static_cast<unsigned long long>(c.sc.get_int("run.seed", 1)),
            c.t_max};
}

void cmd_theta_curve(Context& c) {
    const MetricPair p = pair_models(c);
    std::vector<double> def;
    const int n = c.sc.positive("run.n_theta", 11);
    for (int k = 0; k < n; ++k) def.push_back(n == 1 ? 0.5 * kPi : kPi * k / (n - 1));
    const std::vector<double> thetas = c.sc.get_list("run.thetas", def);
    for (double t : thetas)
        if (t < 0.0 || t > kPi) throw ConfigError("field run.thetas: angles must lie in [0, pi]");
    const SamplingSpec spec = sampling(c);
    const auto est = theta_curve(p, thetas, spec, transfer_options(c));
    std::ostringstream os;
    os << std::setprecision(17) << "theta,Theta,stderr,invalid_mass\n";
    double max_dev = 0.0, max_z = 0.0, max_invalid = 0.0;
    for (const auto& e : est) {
        os << e.theta << "," << e.Theta << "," << e.std_error << "," << e.invalid_mass << "\n";
        max_dev = std::max(max_dev, std::abs(e.Theta - e.theta));
        max_z = std::max(max_z, std::abs(e.Theta - e.theta) / e.std_error);
        max_invalid = std::max(max_invalid, e.invalid_mass);
    }
    c.csv("theta_curve.csv", os.str());
    c.result["samples"] = spec.samples;
    c.result["max_abs_deviation"] = max_dev;
    c.result["max_deviation_in_stderr"] = max_z;
    c.result["max_invalid_mass"] = max_invalid;
}

void cmd_jensen(Context& c) {
    const MetricPair p = pair_models(c);
    const double theta = c.sc.get_double("run.theta", 0.5 * kPi);
    const std::string fname = c.sc.get_string("run.function", "square");
    ConvexFunction f;
    try {
        f = convex_function(fname);
    } catch (const DomainError&) {
        throw ConfigError(c.sc.where("run.function") + "field run.function: unknown function '" + fname + "'");
    }
    const SamplingSpec spec = sampling(c);
    const JensenReport r = jensen_gap(p, theta, f, spec, transfer_options(c));
    c.result["theta"] = r.theta;
    c.result["function"] = fname;
    c.result["Theta"] = num(r.Theta);
    c.result["mean_f"] = num(r.mean_f);
    c.result["f_Theta"] = num(r.f_Theta);
    c.result["gap"] = num(r.gap);
    c.result["stderr"] = num(r.std_error);
    c.result["invalid_mass"] = r.invalid_mass;
    c.result["samples"] = r.samples;
}

void cmd_psi_map(Context& c) {
    const MetricPair p = pair_models(c);
    const int n = c.sc.positive("run.psi_grid", 5);
    const int probes = c.sc.positive("run.probes", 4);
    const auto seed = static_cast<std::uint64_t>(c.sc.get_int("run.seed", 1));
    const std::vector<Vec2> pts = interior_points(p.g1, n * n, seed, 0.8);
    std::vector<std::optional<PsiEstimate>> est(pts.size());
    const TransferOptions to = transfer_options(c);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        try {
            est[i] = psi_reconstruct(p, pts[i], probes, to);
        } catch (const ProbeTrapped&) {
        }
    }
    std::ostringstream os;
    os << std::setprecision(17) << "x,y,psi_x,psi_y,spread\n";
    double max_spread = 0.0, max_oracle = 0.0;
    int invalid = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        os << pts[i].x << "," << pts[i].y << ",";
        if (!est[i]) {
            ++invalid;
            os << ",,\n";
            continue;
        }
        os << est[i]->psi.x << "," << est[i]->psi.y << "," << est[i]->spread << "\n";
        max_spread = std::max(max_spread, est[i]->spread);
        if (p.diffeo) max_oracle = std::max(max_oracle, norm(est[i]->psi - p.diffeo->inverse(pts[i])));
    }
    c.csv("psi_map.csv", os.str());
    c.result["points"] = pts.size();
    c.result["invalid"] = invalid;
    c.result["max_spread"] = max_spread;
    c.result["max_oracle_error"] = p.diffeo ? Json(max_oracle) : Json(nullptr);
}

void cmd_certificate(Context& c) {
    const MetricPair p = pair_models(c);
    const int n = c.sc.positive("run.pairs", 10);
    const auto seed = static_cast<std::uint64_t>(c.sc.get_int("run.seed", 1));
    const std::vector<Vec2> pts = interior_points(p.g1, 2 * n, seed, 0.7);
    std::vector<std::pair<Vec2, Vec2>> pairs;
    for (int i = 0; i < n; ++i) pairs.emplace_back(pts[2 * i], pts[2 * i + 1]);
    CertificateOptions opt;
    opt.n_probes = c.sc.positive("run.probes", 4);
    opt.boundary_samples = c.sc.positive("run.boundary_samples", 8);
    opt.transfer = transfer_options(c);
    const CertificateReport r = isometry_certificate(p, pairs, opt);
    c.result["pairs"] = r.pairs;
    c.result["max_distance_defect"] = r.max_distance_defect;
    c.result["boundary_drift"] = r.boundary_drift;
    c.result["max_spread"] = r.max_spread;
}

void cmd_croke(Context& c) {
    const MetricPair p = pair_models(c);
    if (p.relation != Relation::Conformal)
        throw ConfigError(c.sc.where("pair.relation") + "field pair.relation must be 'conformal' for croke-chain");
    CrokeOptions opt;
    opt.area_grid = c.sc.positive("run.area_grid", 128);
    opt.n_s = c.sc.positive("run.n_s", 64);
    opt.n_phi = c.sc.positive("run.n_phi", 32);
    opt.t_max = c.t_max;
    opt.shooting = shooting(c);
    const CrokeReport r = croke_conformal_check(p, opt);
    c.result["vol1"] = r.vol1;
    c.result["vol2"] = r.vol2;
    c.result["vol1_lens"] = r.vol1_lens;
    c.result["e_omega"] = r.e_omega;
    c.result["e_omega_santalo"] = r.e_omega_santalo;
    c.result["holder_defect"] = r.holder_defect;
    c.result["distance_chain"] = r.distance_chain;
    c.result["max_distance_discrepancy"] = r.max_distance_discrepancy;
    c.result["masked_fraction"] = r.masked_fraction;
    c.result["distance_failures"] = r.distance_failures;
}

const std::map<std::string, std::function<void(Context&)>> kHandlers = {
    {"lens-table", cmd_lens_table},   {"distance", cmd_distance},         {"volume-check", cmd_volume},
    {"intersection-check", cmd_intersection}, {"fan-check", cmd_fan},     {"douady-check", cmd_douady},
    {"trapped-probe", cmd_trapped},   {"conjugate-scan", cmd_conjugate},  {"cone-check", cmd_cone},
    {"theta-curve", cmd_theta_curve}, {"jensen", cmd_jensen},             {"psi-map", cmd_psi_map},
    {"certificate", cmd_certificate}, {"croke-chain", cmd_croke}};

struct Flags {
    std::string scenario;
    std::vector<std::string> sets;
    std::optional<long long> seed;
    std::optional<int> threads;
    std::optional<double> t_max;
    std::optional<int> grid;
    std::optional<std::string> out;
    bool allow_nonconvex = false;
};

int execute(const std::string& cmd_in, const Flags& flags) {
    Context c;
    fs::path manifest_dir;
    const auto t0 = std::chrono::steady_clock::now();
    std::string hash;
    auto fail = [&](int code, const std::string& msg) {
        std::cerr << "geolens_cli: " << msg << "\n";
        if (!manifest_dir.empty()) {
            try {
                Json man;
                man["command"] = c.command;
                man["status"] = "failed";
                man["exit_code"] = code;
                man["error"] = msg;
                man["config_hash"] = hash.empty() ? config_hash(c.command, c.sc.resolved()) : hash;
                man["config"] = c.sc.resolved();
                man["version"] = kVersion;
                fs::create_directories(manifest_dir);
                write_atomic(manifest_dir / "manifest.json", man.dump(2) + "\n");
            } catch (const std::exception&) {
            }
        }
        return code;
    };
    try {
        if (!flags.scenario.empty()) c.sc.load(flags.scenario);
        for (const auto& s : flags.sets) c.sc.set(s);
        if (flags.seed) c.sc.override_value("run.seed", std::to_string(*flags.seed));
        if (flags.threads) c.sc.override_value("run.threads", std::to_string(*flags.threads));
        if (flags.t_max) c.sc.override_value("run.t_max", fmt17(*flags.t_max));
        if (flags.grid) c.sc.override_value("run.grid", std::to_string(*flags.grid));
        if (flags.out) c.sc.override_value("output.dir", *flags.out);

        std::string cmd = cmd_in;
        if (cmd.empty()) {
            if (!c.sc.has("run.command")) throw ConfigError("field run.command is required for 'run'");
            cmd = c.sc.get_string("run.command", "");
        } else if (c.sc.has("run.command") && c.sc.get_string("run.command", "") != cmd) {
            throw ConfigError(c.sc.where("run.command") + "field run.command names '" +
                              c.sc.get_string("run.command", "") + "' but the subcommand is '" + cmd + "'");
        }
        if (!kHandlers.count(cmd)) throw ConfigError("field run.command: unknown command '" + cmd + "'");
        c.command = cmd;
        c.allow_nonconvex = flags.allow_nonconvex;
        c.dir = c.sc.get_string("output.dir", "geolens_out");
        manifest_dir = c.dir;
        const long long threads = c.sc.get_int("run.threads", 0);
        if (threads < 0) throw ConfigError("field run.threads must be >= 0");
        set_thread_limit(static_cast<int>(threads));
        c.flow = flow_options(c.sc);
        c.t_max = c.sc.get_double("run.t_max", 0.0);
        if (c.t_max < 0.0) throw ConfigError("field run.t_max must be >= 0");

        c.result["command"] = cmd;
        kHandlers.at(cmd)(c);

        hash = config_hash(cmd, c.sc.resolved());
        Json out;
        out["command"] = cmd;
        out["config_hash"] = hash;
        out["seed"] = c.sc.get_int("run.seed", 1);
        for (auto& [k, v] : c.result.items())
            if (k != "command") out[k] = v;
        fs::create_directories(c.dir);
        std::vector<std::string> artifacts;
        const std::string json_name = cmd + ".json";
        write_atomic(c.dir / json_name, out.dump(2) + "\n");
        artifacts.push_back(json_name);
        for (const auto& [name, body] : c.files) {
            write_atomic(c.dir / name, csv_header_hash(hash) + body);
            artifacts.push_back(name);
        }
        Json man;
        man["command"] = cmd;
        man["status"] = "ok";
        man["exit_code"] = kOk;
        man["config_hash"] = hash;
        man["seed"] = c.sc.get_int("run.seed", 1);
        man["threads"] = threads;
        man["version"] = kVersion;
        man["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        man["artifacts"] = artifacts;
        man["config"] = c.sc.resolved();
        write_atomic(c.dir / "manifest.json", man.dump(2) + "\n");
        std::cout << out.dump(2) << "\n";
        return kOk;
    } catch (const ConfigError& e) {
        return fail(kConfigError, e.what());
    } catch (const ModelRejected& e) {
        return fail(kModelRejected, e.what());
    } catch (const CurvatureSignViolation& e) {
        return fail(kModelRejected, e.what());
    } catch (const BoundaryMismatch& e) {
        return fail(kModelRejected, e.what());
    } catch (const std::exception& e) {
        return fail(kNumericFailure, std::string(c.command) + ": " + e.what());
    }
}

}  // namespace

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string config_hash(const std::string& command, const std::map<std::string, std::string>& resolved) {
    std::string canon = "command=" + command + "\n";
    for (const auto& [k, v] : resolved) {
        if (k == "run.threads" || k.rfind("output.", 0) == 0 || k == "run.command") continue;
        canon += k + "=" + v + "\n";
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(canon);
    return os.str();
}

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Geodesic lens data and rigidity diagnostics on surfaces with convex boundary"};
    app.require_subcommand(1);
    Flags flags;
    std::string chosen;
    auto add_common = [&](CLI::App* sub, bool scenario_required) {
        auto* opt = sub->add_option("scenario", flags.scenario, "INI scenario file");
        if (scenario_required) opt->required();
        sub->add_option("--set", flags.sets, "Override a scenario field: section.key=value");
        sub->add_option("--seed", flags.seed, "Random seed (run.seed)");
        sub->add_option("--threads", flags.threads, "Worker cap, 0 = all cores (run.threads)");
        sub->add_option("--t-max", flags.t_max, "Flow horizon (run.t_max)");
        sub->add_option("--grid", flags.grid, "Grid size (run.grid)");
        sub->add_option("--out", flags.out, "Output directory (output.dir)");
        sub->add_flag("--allow-nonconvex", flags.allow_nonconvex, "Skip the boundary convexity gate");
    };
    for (const std::string& name : kCommands) {
        CLI::App* sub = app.add_subcommand(name, "Run the " + name + " diagnostic");
        add_common(sub, false);
        sub->callback([&chosen, name] { chosen = name; });
    }
    CLI::App* run = app.add_subcommand("run", "Run the command named in the scenario's [run] section");
    add_common(run, true);
    run->callback([&chosen] { chosen.clear(); });
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfigError;
    }
    return execute(chosen, flags);
}

}  // namespace geolens::cli
