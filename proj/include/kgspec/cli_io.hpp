#pragma once

// Scenario configuration (JSON), run orchestration and file outputs for the
// kgspec command-line tool. Every output is a pure function of the resolved
// configuration; floats go out with 17 significant digits.

#include "kgspec/classify.hpp"
#include "kgspec/evolution.hpp"
#include "kgspec/observables.hpp"
#include "kgspec/oracle_fd.hpp"
#include "kgspec/spectral.hpp"

#include "json.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace kgspec::cli_io {

using json = nlohmann::json;
using namespace kgspec::extensions;
using evolution::CauchyData;
using evolution::EvolveOptions;
using evolution::Profile;
using evolution::Solution;
using geometry::Point;
using geometry::SpatialSet;

/// Invalid configuration; `path` names the offending field (e.g. "extension.alpha").
class ConfigError : public InvalidArgument {
public:
    ConfigError(std::string path, const std::string& what)
        : InvalidArgument(path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

struct DataTerm {
    enum class Kind { bump, bump_derivative, mode };
    Kind kind = Kind::bump;
    double center = 0.5;
    double halfwidth = 0.1;
    double lambda = 0.0;  // mode
    cplx amplitude = 1.0;
    int component = 0;
};

struct ScenarioConfig {
    std::string name = "scenario";
    ManifoldSpec manifold = ManifoldSpec::interval(1.0);
    ExtensionSpec extension = IntervalDirichlet{};
    std::vector<DataTerm> phi0;
    std::vector<DataTerm> phidot0;
    double t_start = 0.0;
    double t_end = 1.0;
    int steps = 10;
    int grid_points = 200;     // subdivisions; an interval samples its n - 1 interior nodes
    double grid_extent = 0.0;  // half-lines; 0 picks sup K + max|t| + 5
    std::string solver = "spectral";
    EvolveOptions truncation;
    double fd_h = 1.0 / 512;
    cplx greens_lambda = cplx(-1.0, 0.5);
    int greens_points = 41;
    int greens_branch = 1;
    int spectrum_count = 20;
    std::string fault;  // "", "eigenvalue"

    std::vector<double> times() const {
        std::vector<double> t;
        for (int i = 0; i <= steps; ++i) t.push_back(t_start + (t_end - t_start) * i / steps);
        return t;
    }
    double max_abs_time() const { return std::max(std::abs(t_start), std::abs(t_end)); }
};

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

inline const json* field(const json& j, const std::string& key) {
    auto it = j.find(key);
    return it == j.end() || it->is_null() ? nullptr : &*it;
}

inline double number(const json& j, const std::string& key, const std::string& path, std::optional<double> fallback) {
    const json* v = field(j, key);
    if (!v) {
        if (fallback) return *fallback;
        throw ConfigError(path + "." + key, "required number missing");
    }
    if (!v->is_number()) throw ConfigError(path + "." + key, "expected a number");
    const double x = v->get<double>();
    if (!std::isfinite(x)) throw ConfigError(path + "." + key, "must be finite");
    return x;
}

inline int integer(const json& j, const std::string& key, const std::string& path, int fallback) {
    const json* v = field(j, key);
    if (!v) return fallback;
    if (!v->is_number_integer()) throw ConfigError(path + "." + key, "expected an integer");
    return v->get<int>();
}

/// A number or a [re, im] pair.
inline cplx complex(const json& j, const std::string& key, const std::string& path, std::optional<cplx> fallback) {
    const json* v = field(j, key);
    if (!v) {
        if (fallback) return *fallback;
        throw ConfigError(path + "." + key, "required value missing");
    }
    if (v->is_number()) return v->get<double>();
    if (v->is_array() && v->size() == 2 && (*v)[0].is_number() && (*v)[1].is_number())
        return {(*v)[0].get<double>(), (*v)[1].get<double>()};
    throw ConfigError(path + "." + key, "expected a number or [re, im]");
}

inline std::string string(const json& j, const std::string& key, const std::string& path,
                          std::optional<std::string> fallback) {
    const json* v = field(j, key);
    if (!v) {
        if (fallback) return *fallback;
        throw ConfigError(path + "." + key, "required string missing");
    }
    if (!v->is_string()) throw ConfigError(path + "." + key, "expected a string");
    return v->get<std::string>();
}

inline const json& object(const json& j, const std::string& key, const std::string& path) {
    const json* v = field(j, key);
    if (!v || !v->is_object()) throw ConfigError(path + "." + key, "expected an object");
    return *v;
}

inline json complex_json(cplx z) {
    if (z.imag() == 0.0) return z.real();
    return json::array({z.real(), z.imag()});
}

inline ManifoldSpec parse_manifold(const json& j, const std::string& path) {
    const std::string kind = string(j, "kind", path, std::nullopt);
    try {
        if (kind == "circle") return ManifoldSpec::circle(number(j, "length", path, std::nullopt));
        if (kind == "interval") return ManifoldSpec::interval(number(j, "length", path, std::nullopt));
        if (kind == "half_line") return ManifoldSpec::half_line();
        if (kind == "disjoint_half_lines") return ManifoldSpec::disjoint_half_lines(integer(j, "count", path, 1));
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(path, e.what());
    }
    throw ConfigError(path + ".kind", "unknown manifold '" + kind + "'");
}

inline ExtensionSpec parse_extension(const json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError(path, "expected an object");
    const std::string kind = string(j, "kind", path, std::nullopt);
    if (kind == "circle_closure") return CircleClosure{};
    if (kind == "interval_dirichlet") return IntervalDirichlet{};
    if (kind == "half_line_robin") {
        const double a = number(j, "alpha", path, std::nullopt);
        if (!(a > -pi / 2 && a <= pi / 2)) throw ConfigError(path + ".alpha", "must lie in (-pi/2, pi/2]");
        return HalfLineRobin{a};
    }
    if (kind == "first_kind")
        return IntervalFirstKind{number(j, "theta11", path, 0.0), number(j, "theta22", path, 0.0),
                                 complex(j, "theta12", path, cplx(0.0))};
    if (kind == "second_kind") {
        const cplx w1 = complex(j, "w1", path, std::nullopt), w2 = complex(j, "w2", path, std::nullopt);
        if (std::norm(w1) + std::norm(w2) == 0.0) throw ConfigError(path + ".w1", "(w1, w2) must not vanish");
        return IntervalSecondKind{w1, w2, number(j, "theta", path, 0.0)};
    }
    if (kind == "mass_shift") {
        const double mu = number(j, "mu", path, std::nullopt);
        if (!(mu >= 0.0)) throw ConfigError(path + ".mu", "must be >= 0");
        return mass_shift(parse_extension(object(j, "inner", path), path + ".inner"), mu);
    }
    if (kind == "direct_sum") {
        const json* c = field(j, "components");
        if (!c || !c->is_array() || c->empty()) throw ConfigError(path + ".components", "expected a non-empty array");
        DirectSum s;
        for (std::size_t i = 0; i < c->size(); ++i)
            s.components.push_back(parse_extension((*c)[i], path + ".components[" + std::to_string(i) + "]"));
        return s;
    }
    throw ConfigError(path + ".kind", "unknown extension '" + kind + "'");
}

inline std::vector<DataTerm> parse_terms(const json& j, const std::string& key, const std::string& path) {
    std::vector<DataTerm> out;
    const json* v = field(j, key);
    if (!v) return out;
    if (!v->is_array()) throw ConfigError(path + "." + key, "expected an array");
    for (std::size_t i = 0; i < v->size(); ++i) {
        const std::string p = path + "." + key + "[" + std::to_string(i) + "]";
        const json& t = (*v)[i];
        if (!t.is_object()) throw ConfigError(p, "expected an object");
        DataTerm d;
        const std::string type = string(t, "type", p, std::nullopt);
        if (type == "bump" || type == "bump_derivative") {
            d.kind = type == "bump" ? DataTerm::Kind::bump : DataTerm::Kind::bump_derivative;
            d.center = number(t, "center", p, std::nullopt);
            d.halfwidth = number(t, "halfwidth", p, std::nullopt);
            if (!(d.halfwidth > 0.0)) throw ConfigError(p + ".halfwidth", "must be positive");
        } else if (type == "mode") {
            d.kind = DataTerm::Kind::mode;
            d.lambda = number(t, "lambda", p, std::nullopt);
        } else {
            throw ConfigError(p + ".type", "unknown data term '" + type + "'");
        }
        d.amplitude = complex(t, "amplitude", p, cplx(1.0));
        d.component = integer(t, "component", p, 0);
        out.push_back(d);
    }
    return out;
}

inline json extension_json(const ExtensionSpec& e) {
    return std::visit(
        [](const auto& v) -> json {
            using T = std::decay_t<decltype(v)>;
            json j;
            if constexpr (std::is_same_v<T, CircleClosure>) {
                j["kind"] = "circle_closure";
            } else if constexpr (std::is_same_v<T, HalfLineRobin>) {
                j["kind"] = "half_line_robin";
                j["alpha"] = v.alpha;
            } else if constexpr (std::is_same_v<T, IntervalDirichlet>) {
                j["kind"] = "interval_dirichlet";
            } else if constexpr (std::is_same_v<T, IntervalFirstKind>) {
                j["kind"] = "first_kind";
                j["theta11"] = v.theta11;
                j["theta22"] = v.theta22;
                j["theta12"] = complex_json(v.theta12);
            } else if constexpr (std::is_same_v<T, IntervalSecondKind>) {
                j["kind"] = "second_kind";
                j["w1"] = complex_json(v.w1);
                j["w2"] = complex_json(v.w2);
                j["theta"] = v.theta;
            } else if constexpr (std::is_same_v<T, MassShift>) {
                j["kind"] = "mass_shift";
                j["mu"] = v.mu;
                j["inner"] = extension_json(*v.inner);
            } else {
                j["kind"] = "direct_sum";
                j["components"] = json::array();
                for (const auto& c : v.components) j["components"].push_back(extension_json(c));
            }
            return j;
        },
        e.variant());
}

inline json manifold_json(const ManifoldSpec& m) {
    json j;
    switch (m.kind) {
        case ManifoldKind::circle:
            j["kind"] = "circle";
            j["length"] = m.length;
            break;
        case ManifoldKind::interval:
            j["kind"] = "interval";
            j["length"] = m.length;
            break;
        case ManifoldKind::half_line:
            j["kind"] = "half_line";
            break;
        case ManifoldKind::disjoint_half_lines:
            j["kind"] = "disjoint_half_lines";
            j["count"] = m.count;
            break;
    }
    return j;
}

inline json terms_json(const std::vector<DataTerm>& terms) {
    json a = json::array();
    for (const auto& d : terms) {
        json t;
        if (d.kind == DataTerm::Kind::mode) {
            t["type"] = "mode";
            t["lambda"] = d.lambda;
        } else {
            t["type"] = d.kind == DataTerm::Kind::bump ? "bump" : "bump_derivative";
            t["center"] = d.center;
            t["halfwidth"] = d.halfwidth;
        }
        t["amplitude"] = complex_json(d.amplitude);
        t["component"] = d.component;
        a.push_back(t);
    }
    return a;
}

}  // namespace detail

inline ScenarioConfig parse_config(const json& j) {
    using namespace detail;
    if (!j.is_object()) throw ConfigError("$", "configuration must be a JSON object");
    ScenarioConfig c;
    c.name = string(j, "name", "$", std::string("scenario"));
    c.manifold = parse_manifold(object(j, "manifold", "$"), "manifold");
    c.extension = parse_extension(object(j, "extension", "$"), "extension");
    try {
        Operator(c.manifold, c.extension);
    } catch (const Error& e) {
        throw ConfigError("extension", e.what());
    }
    if (const json* d = field(j, "data")) {
        if (!d->is_object()) throw ConfigError("data", "expected an object");
        c.phi0 = parse_terms(*d, "phi0", "data");
        c.phidot0 = parse_terms(*d, "phidot0", "data");
    }
    if (const json* t = field(j, "time")) {
        c.t_start = number(*t, "t_start", "time", 0.0);
        c.t_end = number(*t, "t_end", "time", 1.0);
        c.steps = integer(*t, "steps", "time", 10);
        if (c.steps < 1) throw ConfigError("time.steps", "must be >= 1");
    }
    if (const json* g = field(j, "grid")) {
        c.grid_points = integer(*g, "points", "grid", 200);
        c.grid_extent = number(*g, "extent", "grid", 0.0);
        if (c.grid_points < 2) throw ConfigError("grid.points", "must be >= 2");
        if (c.grid_extent < 0.0) throw ConfigError("grid.extent", "must be >= 0");
    }
    c.solver = string(j, "solver", "$", std::string("spectral"));
    if (c.solver != "spectral" && c.solver != "fd" && c.solver != "both")
        throw ConfigError("solver", "must be spectral, fd or both");
    if (const json* t = field(j, "truncation")) {
        const int modes = integer(*t, "modes", "truncation", 0);
        const int max_modes = integer(*t, "max_modes", "truncation", 512);
        if (modes < 0) throw ConfigError("truncation.modes", "must be >= 0");
        if (max_modes < 1) throw ConfigError("truncation.max_modes", "must be >= 1");
        c.truncation.modes = static_cast<std::size_t>(modes);
        c.truncation.max_modes = static_cast<std::size_t>(max_modes);
        c.truncation.parseval_tol = number(*t, "parseval_tol", "truncation", c.truncation.parseval_tol);
        c.truncation.continuum_tail_tol =
            number(*t, "continuum_tail_tol", "truncation", c.truncation.continuum_tail_tol);
        if (!(c.truncation.parseval_tol > 0.0)) throw ConfigError("truncation.parseval_tol", "must be positive");
        if (!(c.truncation.continuum_tail_tol > 0.0))
            throw ConfigError("truncation.continuum_tail_tol", "must be positive");
    }
    if (const json* f = field(j, "fd")) {
        c.fd_h = number(*f, "h", "fd", c.fd_h);
        if (!(c.fd_h > 0.0)) throw ConfigError("fd.h", "must be positive");
    }
    if (const json* g = field(j, "greens")) {
        c.greens_lambda = complex(*g, "lambda", "greens", c.greens_lambda);
        c.greens_points = integer(*g, "points", "greens", c.greens_points);
        c.greens_branch = integer(*g, "branch", "greens", c.greens_branch);
        if (c.greens_points < 2) throw ConfigError("greens.points", "must be >= 2");
        if (c.greens_branch != 1 && c.greens_branch != -1) throw ConfigError("greens.branch", "must be 1 or -1");
    }
    if (const json* s = field(j, "spectrum")) {
        c.spectrum_count = integer(*s, "count", "spectrum", c.spectrum_count);
        if (c.spectrum_count < 1) throw ConfigError("spectrum.count", "must be >= 1");
    }
    c.fault = string(j, "fault", "$", std::string());
    if (!c.fault.empty() && c.fault != "eigenvalue") throw ConfigError("fault", "only 'eigenvalue' is supported");
    return c;
}

/// Resolved configuration with every default filled in and the extension in
/// canonical form.
inline json to_json(const ScenarioConfig& c) {
    using namespace detail;
    json j;
    j["name"] = c.name;
    j["manifold"] = manifold_json(c.manifold);
    j["extension"] = extension_json(canonicalize(c.extension));
    j["data"] = {{"phi0", terms_json(c.phi0)}, {"phidot0", terms_json(c.phidot0)}};
    j["time"] = {{"t_start", c.t_start}, {"t_end", c.t_end}, {"steps", c.steps}};
    j["grid"] = {{"points", c.grid_points}, {"extent", c.grid_extent}};
    j["solver"] = c.solver;
    j["truncation"] = {{"modes", c.truncation.modes},
                       {"max_modes", c.truncation.max_modes},
                       {"parseval_tol", c.truncation.parseval_tol},
                       {"continuum_tail_tol", c.truncation.continuum_tail_tol}};
    j["fd"] = {{"h", c.fd_h}};
    j["greens"] = {{"lambda", complex_json(c.greens_lambda)}, {"points", c.greens_points}, {"branch", c.greens_branch}};
    j["spectrum"] = {{"count", c.spectrum_count}};
    if (!c.fault.empty()) j["fault"] = c.fault;
    return j;
}

inline ScenarioConfig load_config(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw ConfigError("$", "cannot open " + p.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("$", std::string("JSON parse error: ") + e.what());
    }
    return parse_config(j);
}

// ---------------------------------------------------------------------------
// Scenario assembly

inline Operator make_operator(const ScenarioConfig& c) { return Operator(c.manifold, c.extension); }

inline CauchyData make_data(const ScenarioConfig& c, const Operator& op) {
    auto build = [&](const std::vector<DataTerm>& terms, const std::string& key) {
        Profile p;
        for (std::size_t i = 0; i < terms.size(); ++i) {
            const auto& t = terms[i];
            const std::string path = "data." + key + "[" + std::to_string(i) + "]";
            try {
                Profile term;
                switch (t.kind) {
                    case DataTerm::Kind::bump:
                        term = evolution::make_bump(op.manifold, t.center, t.halfwidth, t.amplitude, t.component);
                        break;
                    case DataTerm::Kind::bump_derivative:
                        term = evolution::make_bump_derivative(op.manifold, t.center, t.halfwidth, t.amplitude,
                                                               t.component);
                        break;
                    case DataTerm::Kind::mode:
                        if (t.component < 0 || t.component >= op.components())
                            throw InvalidArgument("component out of range");
                        term = evolution::mode_profile(
                            op.manifold, spectral::eigenfunction(op, t.lambda, t.component), t.amplitude);
                        break;
                }
                p += term;
            } catch (const Error& e) {
                throw ConfigError(path, e.what());
            }
        }
        return p;
    };
    CauchyData d;
    d.phi0 = build(c.phi0, "phi0");
    d.phidot0 = build(c.phidot0, "phidot0");
    return d;
}

inline double grid_extent(const ScenarioConfig& c, const SpatialSet& K) {
    if (c.grid_extent > 0.0) return c.grid_extent;
    return (K.empty() ? 0.0 : K.sup()) + c.max_abs_time() + 5.0;
}

/// Evolution options with the continuum horizon covering every evaluation of
/// the run (snapshots, leakage integration, FD comparison nodes).
inline EvolveOptions run_options(const ScenarioConfig& c, const SpatialSet& K) {
    EvolveOptions o = c.truncation;
    const double supK = K.empty() ? 0.0 : K.sup();
    const double T = std::max(c.max_abs_time(), 1.0);
    double reach = std::max(grid_extent(c, K), supK + T + 5.0);
    if (c.solver != "spectral") reach = std::max(reach, supK + T + 30.0);
    o.continuum_horizon = std::max(o.continuum_horizon, reach + T + 1.0);
    return o;
}

/// Basis for the scenario; fault "eigenvalue" shifts the lowest mode's
/// eigenvalue by 1e-3 (1 + |lambda|) so verification has something to catch.
inline std::shared_ptr<const evolution::Basis> make_scenario_basis(const ScenarioConfig& c, const Operator& op,
                                                                   const CauchyData& data, const EvolveOptions& o) {
    auto b = evolution::make_basis(op, {&data}, o);
    if (c.fault == "eigenvalue" && !b->spectrum.modes.empty()) {
        auto corrupt = std::make_shared<evolution::Basis>(*b);
        auto& m = corrupt->spectrum.modes.front();
        const double old = m.lambda;
        m.lambda += 1e-3 * (1.0 + std::abs(old));
        for (auto& ev : corrupt->spectrum.eigenvalues)
            if (ev.lambda == old && ev.component == m.component) ev.lambda = m.lambda;
        return corrupt;
    }
    return b;
}

// ---------------------------------------------------------------------------
// Output

inline std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// Git blob hash: SHA-1 of "blob <size>\0" followed by the content.
inline std::string git_blob_hash(const std::string& content) {
    const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
    EVP_DigestUpdate(ctx, header.data(), header.size());
    EVP_DigestUpdate(ctx, content.data(), content.size());
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    std::string hex;
    char b[3];
    for (unsigned i = 0; i < len; ++i) {
        std::snprintf(b, sizeof b, "%02x", md[i]);
        hex += b;
    }
    return hex;
}

/// Collects output files and their hashes for meta.json.
class OutputDir {
public:
    explicit OutputDir(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

    void write(const std::string& name, const std::string& content) {
        std::ofstream out(dir_ / name, std::ios::binary);
        if (!out) throw Error("cannot write " + (dir_ / name).string());
        out << content;
        hashes_[name] = git_blob_hash(content);
    }
    void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

    const json& hashes() const { return hashes_; }
    const std::filesystem::path& path() const { return dir_; }

private:
    std::filesystem::path dir_;
    json hashes_ = json::object();
};

inline std::string spectrum_csv(const spectral::SpectralData& sd) {
    std::ostringstream s;
    s << "index,lambda,multiplicity,mode_tag,component,k,re_A,im_A,re_B,im_B\n";
    for (std::size_t i = 0; i < sd.modes.size(); ++i) {
        const auto& m = sd.modes[i];
        int mult = 1;
        for (const auto& ev : sd.eigenvalues)
            if (ev.lambda == m.lambda && ev.component == m.component) mult = ev.multiplicity;
        s << i << ',' << fmt(m.lambda) << ',' << mult << ',' << spectral::to_string(m.tag) << ',' << m.component << ','
          << fmt(m.k) << ',' << fmt(m.A.real()) << ',' << fmt(m.A.imag()) << ',' << fmt(m.B.real()) << ','
          << fmt(m.B.imag()) << '\n';
    }
    return s.str();
}

inline constexpr const char* snapshot_header = "t,x,re_phi,im_phi,re_phidot,im_phidot\n";

/// One snapshot table per component; component 0 in `base`.csv, component
/// n >= 1 in `base`_c<n>.csv.
inline void write_snapshots(OutputDir& out, const std::string& base, const std::vector<evolution::FieldState>& states,
                            int components) {
    for (int c = 0; c < components; ++c) {
        std::ostringstream s;
        s << snapshot_header;
        for (const auto& st : states)
            for (std::size_t i = 0; i < st.grid.size(); ++i) {
                if (st.grid[i].component != c) continue;
                s << fmt(st.t) << ',' << fmt(st.grid[i].x) << ',' << fmt(st.phi[i].real()) << ','
                  << fmt(st.phi[i].imag()) << ',' << fmt(st.phidot[i].real()) << ',' << fmt(st.phidot[i].imag())
                  << '\n';
            }
        out.write(c == 0 ? base + ".csv" : base + "_c" + std::to_string(c) + ".csv", s.str());
    }
}

struct ConservedRow {
    double t, energy, sigma, leakage, phi_norm;
};

inline std::string conserved_csv(const std::vector<ConservedRow>& rows) {
    std::ostringstream s;
    s << "t,E,sigma,leakage,phi_norm\n";
    for (const auto& r : rows)
        s << fmt(r.t) << ',' << fmt(r.energy) << ',' << fmt(r.sigma) << ',' << fmt(r.leakage) << ',' << fmt(r.phi_norm)
          << '\n';
    return s.str();
}

inline json support_json(const SpatialSet& K) {
    json a = json::array();
    for (int c = 0; c < K.components(); ++c)
        for (const auto& iv : K.intervals(c)) a.push_back({{"component", c}, {"lo", iv.lo}, {"hi", iv.hi}});
    return a;
}

inline json window_json(const ManifoldSpec& m, const SpatialSet& K) {
    json j;
    j["K"] = support_json(K);
    if (K.empty()) {
        j["t_infinity"] = nullptr;
        j["t_infinity_finite"] = false;
        j["ladder"] = json::array();
        return j;
    }
    const auto w = geometry::causal_window(m, K);
    j["t_infinity"] = w.finite() ? json(w.t_inf) : json(nullptr);
    j["t_infinity_finite"] = w.finite();
    json ladder = json::array();
    if (w.finite())
        for (int n = 1; n <= 6; ++n) ladder.push_back(w.ladder(n));
    j["ladder"] = ladder;
    return j;
}

inline json meta_base(const ScenarioConfig& c, const std::string& command) {
    json j;
    const json cfg = to_json(c);
    j["command"] = command;
    j["name"] = c.name;
    j["config"] = cfg;
    j["hash"] = git_blob_hash(cfg.dump());
    return j;
}

inline json truncation_json(const evolution::Basis& b, const evolution::ModeCoefficients& co) {
    json j;
    json modes = json::array(), nodes = json::array();
    for (int c = 0; c < b.op.components(); ++c) modes.push_back(b.modes_in(c));
    for (const auto& g : b.continuum) nodes.push_back(g.count);
    j["modes"] = modes;
    j["continuum_nodes"] = nodes;
    j["parseval_defect"] = co.parseval_defect;
    j["warnings"] = co.warnings;
    return j;
}

// ---------------------------------------------------------------------------
// Commands

struct FDComparison {
    fd::FDRun run;
    std::vector<double> difference;  // per snapshot, relative L2
};

inline fd::FDRun run_fd(const ScenarioConfig& c, const Operator& op, const CauchyData& data) {
    if (c.t_start != 0.0) throw ConfigError("time.t_start", "the fd solver starts at t = 0");
    return fd::fd_evolve(op, data, c.t_end, fd::FDGrid::fit(c.fd_h, std::abs(c.t_end) / c.steps), c.steps);
}

/// Grid analogs of the conserved.csv columns; sigma pairs the run with a
/// second run from the partner data (-phidot0, phi0).
inline std::vector<ConservedRow> fd_conserved(const ScenarioConfig& c, const Operator& op, const CauchyData& data,
                                              const fd::FDRun& run) {
    CauchyData partner;
    partner.phi0 = cplx(-1.0) * data.phidot0;
    partner.phidot0 = data.phi0;
    const fd::FDRun prun = run_fd(c, op, partner);
    const SpatialSet K = data.support();
    double far = 0.0;
    for (const auto& d : run.domains) far = std::max(far, d.manifold.length);
    std::vector<ConservedRow> rows;
    for (std::size_t n = 0; n < run.states.size(); ++n) {
        const auto& s = run.states[n];
        const auto& p = prun.states[n];
        cplx sigma = 0.0;
        for (std::size_t i = 0; i < s.grid.size(); ++i)
            sigma += run.weights[i] * (s.phi[i] * std::conj(p.phidot[i]) - s.phidot[i] * std::conj(p.phi[i]));
        double lk = 0.0;
        if (!K.empty()) {
            const auto outside = geometry::complement(op.manifold, geometry::causal_slice(op.manifold, K, s.t).set, far);
            lk = fd::fd_leakage(run, s, outside);
        }
        rows.push_back({s.t, fd::fd_energy(run, s), sigma.real(), lk, std::sqrt(fd::fd_norm2(run, s))});
    }
    return rows;
}

/// simulate: meta.json, spectrum.csv, snapshots.csv, conserved.csv, plus
/// snapshots_fd.csv and comparison.json for solver "both".
inline json run_simulate(const ScenarioConfig& c, const std::filesystem::path& dir) {
    const Operator op = make_operator(c);
    const CauchyData data = make_data(c, op);
    const SpatialSet K = data.support();
    const EvolveOptions o = run_options(c, K);
    OutputDir out(dir);
    json meta = meta_base(c, "simulate");
    meta["solver"] = c.solver;
    meta.update(window_json(op.manifold, K));
    meta["classification"] = to_string(classify(op));
    const auto times = c.times();
    meta["times"] = times;

    const auto basis = make_scenario_basis(c, op, data, o);
    const Solution psi = evolution::solve(basis, data, o);
    meta["truncation"] = truncation_json(*basis, psi.coefficients());
    out.write("spectrum.csv", spectrum_csv(basis->spectrum));

    const auto grid = evolution::uniform_grid(op.manifold, c.grid_points, grid_extent(c, K));
    if (c.solver == "spectral" || c.solver == "both") {
        std::vector<evolution::FieldState> states;
        for (double t : times) states.push_back(psi.state(t, grid));
        write_snapshots(out, "snapshots", states, op.components());
        const Solution partner = observables::symplectic_partner(psi);
        const auto cs = observables::conserved_series({{psi, psi}, {psi, partner}}, times, true);
        std::vector<ConservedRow> rows;
        for (std::size_t i = 0; i < times.size(); ++i)
            rows.push_back({times[i], cs.energy[0][i].real(), cs.symplectic[1][i].real(), cs.leakage[i], cs.phi_norm[i]});
        out.write("conserved.csv", conserved_csv(rows));
        meta["energy_drift"] = cs.energy_drift[0];
        meta["symplectic_drift"] = cs.symplectic_drift[1];
    }
    if (c.solver == "fd" || c.solver == "both") {
        const fd::FDRun run = run_fd(c, op, data);
        meta["fd"] = {{"h", run.grid.h}, {"k", run.grid.k}, {"courant", run.grid.courant()}};
        if (c.solver == "fd") {
            write_snapshots(out, "snapshots", run.states, op.components());
            out.write("conserved.csv", conserved_csv(fd_conserved(c, op, data, run)));
        } else {
            write_snapshots(out, "snapshots_fd", run.states, op.components());
            json cmp;
            json rows = json::array();
            double worst = 0.0;
            for (const auto& s : run.states) {
                const double d = fd::spectral_difference(run, s, psi);
                worst = std::max(worst, d);
                rows.push_back({{"t", s.t}, {"l2_relative", d}});
            }
            cmp["snapshots"] = rows;
            cmp["max_l2_relative"] = worst;
            cmp["measure"] = "||phi_fd - phi_spectral||_2 / max(||phi_0||, ||phi_t||) on the fd nodes";
            cmp["h"] = run.grid.h;
            out.write_json("comparison.json", cmp);
        }
    }
    meta["files"] = out.hashes();
    out.write_json("meta.json", meta);
    return meta;
}

/// spectrum: spectrum.csv with spectrum.count eigenvalues per component and
/// spectrum.json with the classification and the lambda = 0 criterion of the
/// unshifted operator (evaluated at lambda = mu for a mass shift).
inline json run_spectrum(const ScenarioConfig& c, const std::filesystem::path& dir) {
    const Operator op = make_operator(c);
    OutputDir out(dir);
    spectral::SpectrumOptions so;
    so.max_modes = static_cast<std::size_t>(c.spectrum_count);
    const auto sd = spectral::compute_spectrum(op, so);
    out.write("spectrum.csv", spectrum_csv(sd));
    const auto rep = classify_report(op);
    json s;
    s["classification"] = to_string(rep.kind);
    s["infimum"] = rep.infimum;
    s["component_infima"] = rep.component_infima;
    json zero = json::array();
    for (int k = 0; k < op.components(); ++k) {
        const Operator comp = op.component(k);
        double mu = 0.0;
        unshifted(comp.extension, mu);
        json z;
        z["component"] = k;
        z["mass_shift"] = mu;
        z["criterion"] = spectral::eigenvalue_condition(comp, mu);
        z["zero_is_eigenvalue"] = spectral::detail::zero_is_eigenvalue(comp);
        zero.push_back(z);
    }
    s["zero_criterion"] = zero;
    json cont = json::array();
    for (const auto& d : sd.continua) cont.push_back({{"component", d.component}, {"bottom", d.mu}});
    s["continuum"] = cont;
    out.write_json("spectrum.json", s);
    json meta = meta_base(c, "spectrum");
    meta["files"] = out.hashes();
    out.write_json("meta.json", meta);
    return s;
}

/// greens: greens.csv with g(x, y; lambda) on greens.points nodes per
/// component (diagonal blocks; off-diagonal blocks of a direct sum vanish).
inline json run_greens(const ScenarioConfig& c, const std::filesystem::path& dir) {
    const Operator op = make_operator(c);
    OutputDir out(dir);
    const double extent = c.grid_extent > 0.0 ? c.grid_extent : 5.0;
    const auto grid = evolution::uniform_grid(op.manifold, c.greens_points, extent);
    std::ostringstream s;
    s << "component,x,y,re_g,im_g\n";
    for (const auto& x : grid)
        for (const auto& y : grid) {
            if (x.component != y.component) continue;
            const cplx g = spectral::greens_function(op, x, y, c.greens_lambda, c.greens_branch);
            s << x.component << ',' << fmt(x.x) << ',' << fmt(y.x) << ',' << fmt(g.real()) << ',' << fmt(g.imag())
              << '\n';
        }
    out.write("greens.csv", s.str());
    json meta = meta_base(c, "greens");
    meta["lambda"] = detail::complex_json(c.greens_lambda);
    meta["files"] = out.hashes();
    out.write_json("meta.json", meta);
    return meta;
}

struct Check {
    std::string name;
    double value = 0.0;
    double tolerance = 0.0;
    std::string note;
    bool pass() const { return value <= tolerance; }
};

/// Invariant battery; the report goes to verify.json.
inline std::vector<Check> verify_checks(const ScenarioConfig& c) {
    const Operator op = make_operator(c);
    const CauchyData data = make_data(c, op);
    const SpatialSet K = data.support();
    const EvolveOptions o = run_options(c, K);
    const auto basis = make_scenario_basis(c, op, data, o);
    const Solution psi = evolution::solve(basis, data, o);
    const auto times = c.times();
    const double T = c.max_abs_time() > 0.0 ? c.max_abs_time() : 1.0;
    std::vector<Check> checks;

    // eigenvalues used by the evolution are roots of the boundary problem
    double spec = 0.0;
    for (const auto& m : basis->spectrum.modes) {
        const Operator comp = op.component(m.component);
        const double tol = 1e-9 * (1.0 + std::abs(m.lambda));
        const auto near = spectral::find_eigenvalues(comp, m.lambda - tol, m.lambda + tol);
        double best = infinity;
        for (const auto& ev : near) best = std::min(best, std::abs(ev.lambda - m.lambda));
        if (near.empty()) {
            const auto all = spectral::find_eigenvalues(comp, m.lambda - 1.0 - std::abs(m.lambda),
                                                        m.lambda + 1.0 + std::abs(m.lambda));
            for (const auto& ev : all) best = std::min(best, std::abs(ev.lambda - m.lambda));
        }
        spec = std::max(spec, std::isfinite(best) ? best / (1.0 + std::abs(m.lambda)) : 1.0);
    }
    checks.push_back({"eigenvalue_consistency", spec, 1e-10, "relative distance to recomputed eigenvalues"});

    checks.push_back({"composition", evolution::check_composition(op, data, 0.37 * T, 0.41 * T, o), 1e-8,
                      "relative L2 of phi_{t1+t2} against evolving phi_{t1} by t2"});
    double pyth = 0.0;
    for (double t : times) pyth = std::max(pyth, evolution::check_pythagoras(psi, t));
    checks.push_back({"pythagoras", pyth, 1e-8, "A S^2 + C^2 - I on the coefficients"});

    const Solution partner = observables::symplectic_partner(psi);
    const auto cs = observables::conserved_series({{psi, psi}, {psi, partner}}, times, false);
    checks.push_back({"energy_conservation", cs.energy_drift[0], 1e-8, "relative to the t = 0 magnitude scale"});
    checks.push_back({"symplectic_conservation", cs.symplectic_drift[1], 1e-8, "sigma(psi, psi*) drift"});
    checks.push_back({"symmetry", observables::symmetry_defects(psi, partner, 0.5 * T, times).worst(), 1e-8,
                      "E and sigma under time translation and reflection"});

    double leak = 0.0;
    std::string note = "no data";
    if (!K.empty()) {
        const auto w = geometry::causal_window(op.manifold, K);
        std::vector<double> lt;
        if (w.finite()) {
            const double edge = w.t_inf - 2.0 * c.fd_h;
            for (int i = 0; i <= 10; ++i) lt.push_back(-edge + 2.0 * edge * i / 10);
            note = "|t| <= t_infinity - 2h";
        } else {
            lt = times;
            note = "scenario times (t_infinity infinite)";
        }
        for (double t : lt) leak = std::max(leak, observables::leakage(psi, t));
    }
    checks.push_back({"support_leakage", leak, 1e-6, note});

    const double tf = c.t_end != 0.0 ? std::copysign(std::min(std::abs(c.t_end), 1.0), c.t_end) : 1.0;
    const auto run = fd::fd_state(op, data, tf, c.fd_h);
    checks.push_back({"fd_agreement", fd::spectral_difference(run, run.states.back(), psi), 1e-3,
                      "relative L2 against the leapfrog oracle at t = " + fmt(tf)});
    return checks;
}

inline json run_verify(const ScenarioConfig& c, const std::filesystem::path& dir) {
    OutputDir out(dir);
    const auto checks = verify_checks(c);
    json rep;
    rep["name"] = c.name;
    json arr = json::array();
    bool ok = true;
    for (const auto& ch : checks) {
        arr.push_back({{"name", ch.name}, {"value", ch.value}, {"tolerance", ch.tolerance}, {"pass", ch.pass()},
                       {"note", ch.note}});
        ok = ok && ch.pass();
    }
    rep["checks"] = arr;
    rep["pass"] = ok;
    out.write_json("verify.json", rep);
    json meta = meta_base(c, "verify");
    meta["files"] = out.hashes();
    out.write_json("meta.json", meta);
    return rep;
}

}  // namespace kgspec::cli_io
