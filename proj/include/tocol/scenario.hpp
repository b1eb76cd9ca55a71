#pragma once

#include "tocol/mpc.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tocol {

using Json = nlohmann::ordered_json;

/// Malformed or inconsistent scenario input.
class ScenarioError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct MpcBlock {
    MpcConfig config;
    /// Multiplicative factors on the named model parameters of the plant.
    std::map<std::string, double> plant_mismatch;
};

struct SamplingBlock {
    int count = 20;
    Vector lower;
    Vector upper;
};

/// Parsed scenario file. Keeps the raw system description so the spec and
/// the plant can both be rebuilt from it.
struct Scenario {
    std::string system;                       // vdp | rocket | double_integrator | linear
    std::map<std::string, double> model;      // named model parameters
    Matrix A, B;                              // linear systems only
    Vector x_start;
    std::vector<std::optional<double>> target;
    Vector x_lower, x_upper, u_lower, u_upper;
    int N = 10;
    double dt_min = 0.0;
    double dt_max = kInf;
    ControlParam param = ControlParam::constant;
    CollocationForm form = CollocationForm::compressed;
    double time_per_distance = 1.0;
    SolverConfig solver;
    std::optional<MpcBlock> mpc;
    std::optional<SamplingBlock> sampling;

    SystemModel build_model(const std::map<std::string, double>& factors = {}) const;
    OcpSpec build_spec() const;
    SystemModel build_plant() const;
};

namespace detail {

inline const std::map<std::string, double>& model_defaults(const std::string& system) {
    static const std::map<std::string, double> vdp{{"damping", 1.0}};
    static const std::map<std::string, double> rocket{{"drag", 0.02}, {"fuel_rate", 0.01}};
    static const std::map<std::string, double> none{};
    if (system == "vdp") return vdp;
    if (system == "rocket") return rocket;
    return none;
}

inline void reject_unknown(const Json& obj, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key())) throw ScenarioError("unknown key \"" + it.key() + "\" in " + where);
    }
}

inline double number(const Json& j, const std::string& key) {
    if (!j.is_number()) throw ScenarioError("key \"" + key + "\" must be a number");
    return j.get<double>();
}

// null means unbounded in the given direction.
inline double bound(const Json& j, const std::string& key, double unbounded) {
    if (j.is_null()) return unbounded;
    return number(j, key);
}

inline int integer(const Json& j, const std::string& key) {
    if (!j.is_number_integer()) throw ScenarioError("key \"" + key + "\" must be an integer");
    return j.get<int>();
}

inline Vector vector(const Json& j, const std::string& key, double unbounded = std::nan("")) {
    if (!j.is_array()) throw ScenarioError("key \"" + key + "\" must be an array");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string name = key + "[" + std::to_string(i) + "]";
        v[static_cast<Eigen::Index>(i)] = std::isnan(unbounded) ? number(j[i], name) : bound(j[i], name, unbounded);
    }
    return v;
}

inline Matrix matrix(const Json& j, const std::string& key) {
    if (!j.is_array() || j.empty() || !j[0].is_array()) throw ScenarioError("key \"" + key + "\" must be a nested array");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        if (!j[r].is_array() || static_cast<Eigen::Index>(j[r].size()) != cols) {
            throw ScenarioError("key \"" + key + "\" has ragged rows");
        }
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = number(j[r][c], key);
    }
    return m;
}

inline void box(const Json& j, const std::string& key, Vector& lower, Vector& upper) {
    if (!j.is_object()) throw ScenarioError("key \"" + key + "\" must be an object with lower/upper");
    reject_unknown(j, {"lower", "upper"}, key);
    if (!j.contains("lower") || !j.contains("upper")) throw ScenarioError("key \"" + key + "\" needs lower and upper");
    lower = vector(j["lower"], key + ".lower", -kInf);
    upper = vector(j["upper"], key + ".upper", kInf);
    if (lower.size() != upper.size()) throw ScenarioError("key \"" + key + "\": lower and upper differ in length");
}

inline Json bound_json(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json vector_json(const Vector& v, bool allow_inf = false) {
    Json arr = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(allow_inf ? bound_json(v[i]) : Json(v[i]));
    return arr;
}

inline Json matrix_json(const Matrix& m) {
    Json arr = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        arr.push_back(row);
    }
    return arr;
}

inline void parse_solver(const Json& j, SolverConfig& s) {
    if (!j.is_object()) throw ScenarioError("key \"solver\" must be an object");
    reject_unknown(j,
                   {"kkt_tol", "constraint_tol", "max_outer_iters", "max_inner_iters", "penalty_init",
                    "penalty_growth", "fd_step", "penalty_max"},
                   "solver");
    if (j.contains("kkt_tol")) s.kkt_tol = number(j["kkt_tol"], "solver.kkt_tol");
    if (j.contains("constraint_tol")) s.constraint_tol = number(j["constraint_tol"], "solver.constraint_tol");
    if (j.contains("max_outer_iters")) s.max_outer_iters = integer(j["max_outer_iters"], "solver.max_outer_iters");
    if (j.contains("max_inner_iters")) s.max_inner_iters = integer(j["max_inner_iters"], "solver.max_inner_iters");
    if (j.contains("penalty_init")) s.penalty_init = number(j["penalty_init"], "solver.penalty_init");
    if (j.contains("penalty_growth")) s.penalty_growth = number(j["penalty_growth"], "solver.penalty_growth");
    if (j.contains("fd_step")) s.fd_step = number(j["fd_step"], "solver.fd_step");
    if (j.contains("penalty_max")) s.penalty_max = number(j["penalty_max"], "solver.penalty_max");
}

inline std::map<std::string, double> parse_params(const Json& j, const std::string& key, const std::string& system) {
    if (!j.is_object()) throw ScenarioError("key \"" + key + "\" must be an object");
    const auto& defaults = model_defaults(system);
    std::map<std::string, double> out;
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!defaults.count(it.key())) {
            throw ScenarioError("unknown key \"" + it.key() + "\" in " + key + " (system " + system + ")");
        }
        out[it.key()] = number(it.value(), key + "." + it.key());
    }
    return out;
}

inline MpcBlock parse_mpc(const Json& j, const Scenario& sc) {
    if (!j.is_object()) throw ScenarioError("key \"mpc\" must be an object");
    reject_unknown(j,
                   {"N0", "N_min", "dt_min", "dt_max", "radius", "max_steps", "warm_start", "settle_steps",
                    "plant_mismatch"},
                   "mpc");
    MpcBlock b;
    MpcConfig& c = b.config;
    c.N0 = sc.N;
    c.dt_max = sc.dt_max;
    c.param = sc.param;
    c.form = sc.form;
    if (j.contains("N0")) c.N0 = integer(j["N0"], "mpc.N0");
    if (j.contains("N_min")) c.N_min = integer(j["N_min"], "mpc.N_min");
    if (j.contains("dt_min")) c.dt_min = number(j["dt_min"], "mpc.dt_min");
    if (j.contains("dt_max")) c.dt_max = bound(j["dt_max"], "mpc.dt_max", kInf);
    if (j.contains("radius")) c.convergence_radius = number(j["radius"], "mpc.radius");
    if (j.contains("max_steps")) c.max_steps = integer(j["max_steps"], "mpc.max_steps");
    if (j.contains("settle_steps")) c.settle_steps = integer(j["settle_steps"], "mpc.settle_steps");
    if (j.contains("warm_start")) {
        if (!j["warm_start"].is_boolean()) throw ScenarioError("key \"mpc.warm_start\" must be a boolean");
        c.warm_start = j["warm_start"].get<bool>();
    }
    if (j.contains("plant_mismatch")) b.plant_mismatch = parse_params(j["plant_mismatch"], "mpc.plant_mismatch", sc.system);
    c.solver = sc.solver;
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw ScenarioError(e.what());
    }
    return b;
}

inline SamplingBlock parse_sampling(const Json& j, int p) {
    if (!j.is_object()) throw ScenarioError("key \"sampling\" must be an object");
    reject_unknown(j, {"count", "lower", "upper"}, "sampling");
    SamplingBlock s;
    if (j.contains("count")) s.count = integer(j["count"], "sampling.count");
    if (!j.contains("lower") || !j.contains("upper")) throw ScenarioError("key \"sampling\" needs lower and upper");
    s.lower = vector(j["lower"], "sampling.lower");
    s.upper = vector(j["upper"], "sampling.upper");
    if (s.count < 1) throw ScenarioError("sampling.count must be >= 1");
    if (s.lower.size() != p || s.upper.size() != p) throw ScenarioError("sampling box has wrong dimension");
    if ((s.lower.array() > s.upper.array()).any()) throw ScenarioError("sampling.lower exceeds sampling.upper");
    return s;
}

}  // namespace detail

inline SystemModel Scenario::build_model(const std::map<std::string, double>& factors) const {
    auto param = [&](const std::string& name) {
        double v = model.count(name) ? model.at(name) : detail::model_defaults(system).at(name);
        if (factors.count(name)) v *= factors.at(name);
        return v;
    };
    if (system == "vdp") return make_vdp(param("damping"));
    if (system == "rocket") return make_rocket(param("drag"), param("fuel_rate"));
    if (system == "double_integrator") return make_double_integrator();
    if (system == "linear") return make_linear(A, B);
    throw ScenarioError("unknown system \"" + system + "\"");
}

inline OcpSpec Scenario::build_spec() const {
    OcpSpec spec;
    spec.model = build_model();
    spec.x_start = x_start;
    spec.target.components = target;
    spec.x_lower = x_lower;
    spec.x_upper = x_upper;
    spec.u_lower = u_lower;
    spec.u_upper = u_upper;
    spec.N = N;
    spec.dt_min = dt_min;
    spec.dt_max = dt_max;
    spec.param = param;
    spec.form = form;
    spec.time_per_distance = time_per_distance;
    try {
        spec.validate();
    } catch (const std::invalid_argument& e) {
        throw ScenarioError(e.what());
    }
    return spec;
}

inline SystemModel Scenario::build_plant() const { return build_model(mpc ? mpc->plant_mismatch : std::map<std::string, double>{}); }

inline Scenario parse_scenario(const Json& root) {
    if (!root.is_object()) throw ScenarioError("scenario must be a JSON object");
    detail::reject_unknown(root,
                           {"system", "model", "x_start", "target", "x_bounds", "u_bounds", "N", "dt_min", "dt_max",
                            "param", "form", "time_per_distance", "solver", "mpc", "sampling"},
                           "scenario");
    for (const char* key : {"system", "x_start", "target", "u_bounds"}) {
        if (!root.contains(key)) throw ScenarioError(std::string("missing required key \"") + key + "\"");
    }
    Scenario sc;
    const Json& sys = root["system"];
    if (sys.is_string()) {
        sc.system = sys.get<std::string>();
        if (sc.system != "vdp" && sc.system != "rocket" && sc.system != "double_integrator") {
            throw ScenarioError("unknown system \"" + sc.system + "\"");
        }
    } else if (sys.is_object()) {
        detail::reject_unknown(sys, {"A", "B"}, "system");
        if (!sys.contains("A") || !sys.contains("B")) throw ScenarioError("linear system needs A and B");
        sc.system = "linear";
        sc.A = detail::matrix(sys["A"], "system.A");
        sc.B = detail::matrix(sys["B"], "system.B");
    } else {
        throw ScenarioError("key \"system\" must be a name or an {A, B} object");
    }
    if (root.contains("model")) sc.model = detail::parse_params(root["model"], "model", sc.system);

    SystemModel m;
    try {
        m = sc.build_model();
    } catch (const std::invalid_argument& e) {
        throw ScenarioError(e.what());
    }
    sc.x_start = detail::vector(root["x_start"], "x_start");
    const Json& tgt = root["target"];
    if (!tgt.is_array()) throw ScenarioError("key \"target\" must be an array");
    for (std::size_t i = 0; i < tgt.size(); ++i) {
        if (tgt[i].is_string() && tgt[i].get<std::string>() == "free") {
            sc.target.emplace_back(std::nullopt);
        } else {
            sc.target.emplace_back(detail::number(tgt[i], "target[" + std::to_string(i) + "]"));
        }
    }
    if (root.contains("x_bounds")) {
        detail::box(root["x_bounds"], "x_bounds", sc.x_lower, sc.x_upper);
    } else {
        sc.x_lower = Vector::Constant(m.p, -kInf);
        sc.x_upper = Vector::Constant(m.p, kInf);
    }
    detail::box(root["u_bounds"], "u_bounds", sc.u_lower, sc.u_upper);
    if (root.contains("N")) sc.N = detail::integer(root["N"], "N");
    if (root.contains("dt_min")) sc.dt_min = detail::number(root["dt_min"], "dt_min");
    if (root.contains("dt_max")) sc.dt_max = detail::bound(root["dt_max"], "dt_max", kInf);
    try {
        if (root.contains("param")) sc.param = parse_control_param(root["param"].get<std::string>());
        if (root.contains("form")) sc.form = parse_collocation_form(root["form"].get<std::string>());
    } catch (const std::exception& e) {
        throw ScenarioError(std::string("param/form: ") + e.what());
    }
    if (root.contains("time_per_distance")) sc.time_per_distance = detail::number(root["time_per_distance"], "time_per_distance");
    if (root.contains("solver")) detail::parse_solver(root["solver"], sc.solver);
    try {
        sc.solver.validate();
    } catch (const std::invalid_argument& e) {
        throw ScenarioError(e.what());
    }
    sc.build_spec();  // dimension and consistency checks
    if (root.contains("mpc")) sc.mpc = detail::parse_mpc(root["mpc"], sc);
    if (root.contains("sampling")) sc.sampling = detail::parse_sampling(root["sampling"], m.p);
    return sc;
}

/// Parses scenario text; syntax errors report line and column.
inline Scenario parse_scenario_text(const std::string& text) {
    Json root;
    try {
        root = Json::parse(text);
    } catch (const Json::parse_error& e) {
        const std::size_t pos = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i < pos; ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ScenarioError("syntax error at line " + std::to_string(line) + ", column " + std::to_string(col));
    }
    return parse_scenario(root);
}

inline Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ScenarioError("cannot read scenario " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario_text(buf.str());
}

/// Normalized scenario with every default filled in; parses back to the same scenario.
inline Json to_json(const Scenario& sc) {
    Json j;
    if (sc.system == "linear") {
        j["system"] = {{"A", detail::matrix_json(sc.A)}, {"B", detail::matrix_json(sc.B)}};
    } else {
        j["system"] = sc.system;
    }
    Json model = Json::object();
    for (const auto& [name, def] : detail::model_defaults(sc.system)) model[name] = sc.model.count(name) ? sc.model.at(name) : def;
    if (!model.empty()) j["model"] = model;
    j["x_start"] = detail::vector_json(sc.x_start);
    Json tgt = Json::array();
    for (const auto& c : sc.target) tgt.push_back(c ? Json(*c) : Json("free"));
    j["target"] = tgt;
    j["x_bounds"] = {{"lower", detail::vector_json(sc.x_lower, true)}, {"upper", detail::vector_json(sc.x_upper, true)}};
    j["u_bounds"] = {{"lower", detail::vector_json(sc.u_lower, true)}, {"upper", detail::vector_json(sc.u_upper, true)}};
    j["N"] = sc.N;
    j["dt_min"] = sc.dt_min;
    j["dt_max"] = detail::bound_json(sc.dt_max);
    j["param"] = std::string(to_string(sc.param));
    j["form"] = std::string(to_string(sc.form));
    j["time_per_distance"] = sc.time_per_distance;
    const SolverConfig& s = sc.solver;
    j["solver"] = {{"kkt_tol", s.kkt_tol},
                   {"constraint_tol", s.constraint_tol},
                   {"max_outer_iters", s.max_outer_iters},
                   {"max_inner_iters", s.max_inner_iters},
                   {"penalty_init", s.penalty_init},
                   {"penalty_growth", s.penalty_growth},
                   {"fd_step", s.fd_step},
                   {"penalty_max", s.penalty_max}};
    if (sc.mpc) {
        const MpcConfig& c = sc.mpc->config;
        Json mpc = {{"N0", c.N0},
                    {"N_min", c.N_min},
                    {"dt_min", c.dt_min},
                    {"dt_max", detail::bound_json(c.dt_max)},
                    {"radius", c.convergence_radius},
                    {"max_steps", c.max_steps},
                    {"warm_start", c.warm_start},
                    {"settle_steps", c.settle_steps}};
        if (!sc.mpc->plant_mismatch.empty()) {
            Json pm = Json::object();
            for (const auto& [k, v] : sc.mpc->plant_mismatch) pm[k] = v;
            mpc["plant_mismatch"] = pm;
        }
        j["mpc"] = mpc;
    }
    if (sc.sampling) {
        j["sampling"] = {{"count", sc.sampling->count},
                         {"lower", detail::vector_json(sc.sampling->lower)},
                         {"upper", detail::vector_json(sc.sampling->upper)}};
    }
    return j;
}

}  // namespace tocol
