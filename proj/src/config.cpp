#include "odcbf/config.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

namespace odcbf {

using nlohmann::json;

std::string_view to_string(Study s)
{
    switch (s) {
    case Study::Compare: return "compare";
    case Study::Pareto: return "pareto";
    case Study::MonteCarlo: return "montecarlo";
    }
    return "unknown";
}

Study parse_study(std::string_view name)
{
    for (Study s : {Study::Compare, Study::Pareto, Study::MonteCarlo})
        if (to_string(s) == name)
            return s;
    throw ConfigError("unknown study '" + std::string(name) + "' (compare, pareto, montecarlo)");
}

ExperimentConfig ExperimentConfig::defaults()
{
    ExperimentConfig c;
    for (auto v : {ControllerVariant::PdSat, ControllerVariant::ResClfQp, ControllerVariant::OdClfQp,
                   ControllerVariant::OdClfCbfQp})
        c.controllers.push_back(ControllerConfig::defaults(v));
    return c;
}

SimOptions ExperimentConfig::sim_options() const
{
    SimOptions o;
    o.horizon = scenario.horizon;
    o.f_ctrl = scenario.f_ctrl;
    o.substep = scenario.substep;
    return o;
}

SpacecraftState ExperimentConfig::initial_state() const
{
    SpacecraftState x0;
    x0.sigma = euler321_to_mrp(scenario.euler_deg * (std::numbers::pi / 180.0));
    return x0;
}

const ControllerConfig* ExperimentConfig::find(ControllerVariant v) const
{
    for (const auto& c : controllers)
        if (c.variant == v)
            return &c;
    return nullptr;
}

void ExperimentConfig::validate() const
{
    try {
        model.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("model: ") + e.what());
    }

    const ScenarioConfig& s = scenario;
    if (!s.euler_deg.allFinite())
        throw ConfigError("scenario.euler_deg must be finite");
    if (!(s.horizon > 0.0) || !(s.f_ctrl > 0.0) || !(s.substep > 0.0))
        throw ConfigError("scenario: horizon, f_ctrl and substep must be positive");
    const double ratio = 1.0 / (s.f_ctrl * s.substep);
    if (std::round(ratio) < 1.0 || std::abs(ratio - std::round(ratio)) > 1e-9 * ratio)
        throw ConfigError("scenario.substep must divide the control period 1/f_ctrl");

    if (controllers.empty())
        throw ConfigError("controllers: at least one controller is required");
    std::set<ControllerVariant> seen;
    for (const auto& c : controllers) {
        if (!seen.insert(c.variant).second)
            throw ConfigError("controllers: duplicate variant '" + std::string(to_string(c.variant)) + "'");
        try {
            c.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError("controllers[" + std::string(to_string(c.variant)) + "]: " + e.what());
        }
    }

    auto sampled_alpha = [&](double alpha, const std::string& where) {
        if (!(alpha >= 0.0))
            throw ConfigError(where + ": alpha must be non-negative");
        if (alpha / s.f_ctrl > 1.0)
            throw ConfigError(where + ": alpha / f_ctrl must not exceed 1");
    };
    for (const auto& c : controllers)
        if (c.variant == ControllerVariant::OdClfCbfQp)
            sampled_alpha(c.alpha, "controllers[od-clf-cbf-qp]");
    for (double a : sweep.alpha)
        sampled_alpha(a, "sweep.alpha");
    for (double nu : sweep.nu)
        if (!(nu > 0.0))
            throw ConfigError("sweep.nu: entries must be positive");
    for (std::size_t i = 0; i < sweep.t_grid.size(); ++i) {
        if (!(sweep.t_grid[i] > 0.0))
            throw ConfigError("sweep.t_grid: entries must be positive");
        if (i > 0 && !(sweep.t_grid[i] > sweep.t_grid[i - 1]))
            throw ConfigError("sweep.t_grid must be increasing");
    }
    if (study == Study::Pareto && (sweep.nu.empty() || sweep.alpha.empty() || sweep.t_grid.empty()))
        throw ConfigError("sweep: the pareto study needs nonempty nu, alpha and t_grid");

    if (montecarlo.seeds < 1)
        throw ConfigError("montecarlo.seeds must be at least 1");
    sampled_alpha(montecarlo.alpha, "montecarlo");

    if (ocp.N < 20)
        throw ConfigError("ocp.N must be at least 20");
    if (!(ocp.max_substep > 0.0))
        throw ConfigError("ocp.max_substep must be positive");
    if (jobs < 1)
        throw ConfigError("jobs must be at least 1");
}

// ---------------------------------------------------------------------------

namespace {

void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> keys)
{
    if (!j.is_object())
        throw ConfigError(where + " must be an object");
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : keys)
            known = known || item.key() == k;
        if (!known)
            throw ConfigError("unknown key '" + item.key() + "' in " + where);
    }
}

template <class T>
void get(const json& j, const char* key, T& out, const std::string& where)
{
    if (!j.contains(key))
        return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + " has the wrong type");
    }
}

// n x n as nested rows, or a length-n list taken as the diagonal
template <int N>
void get_matrix(const json& j, const char* key, Eigen::Matrix<double, N, N>& out, const std::string& where)
{
    if (!j.contains(key))
        return;
    const json& m = j.at(key);
    const std::string name = where + "." + key;
    if (!m.is_array() || m.size() != static_cast<std::size_t>(N))
        throw ConfigError(name + " must have " + std::to_string(N) + " rows (or diagonal entries)");
    try {
        if (m[0].is_number()) {
            out.setZero();
            for (int i = 0; i < N; ++i)
                out(i, i) = m[static_cast<std::size_t>(i)].get<double>();
            return;
        }
        for (int i = 0; i < N; ++i) {
            const json& row = m[static_cast<std::size_t>(i)];
            if (!row.is_array() || row.size() != static_cast<std::size_t>(N))
                throw ConfigError(name + " rows must have " + std::to_string(N) + " entries");
            for (int k = 0; k < N; ++k)
                out(i, k) = row[static_cast<std::size_t>(k)].get<double>();
        }
    } catch (const json::exception&) {
        throw ConfigError(name + " must contain numbers");
    }
}

void get_vec3(const json& j, const char* key, Vec3& out, const std::string& where)
{
    if (!j.contains(key))
        return;
    std::vector<double> v;
    get(j, key, v, where);
    if (v.size() != 3)
        throw ConfigError(where + "." + key + " must have 3 entries");
    out = Vec3(v[0], v[1], v[2]);
}

template <int N>
json matrix_json(const Eigen::Matrix<double, N, N>& m)
{
    json rows = json::array();
    for (int i = 0; i < N; ++i) {
        json row = json::array();
        for (int k = 0; k < N; ++k)
            row.push_back(m(i, k));
        rows.push_back(row);
    }
    return rows;
}

ControllerConfig parse_controller(const json& j, std::size_t index)
{
    const std::string where = "controllers[" + std::to_string(index) + "]";
    reject_unknown(j, where,
                   {"variant", "k_p", "k_d", "Q", "k1", "k2", "epsilon", "res_scaled_coordinates", "nu",
                    "clf_mode", "H", "p_delta", "p_rho", "alpha"});
    if (!j.contains("variant"))
        throw ConfigError(where + ".variant is required");
    std::string name;
    get(j, "variant", name, where);
    ControllerConfig c;
    try {
        c = ControllerConfig::defaults(parse_variant(name));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(where + ": " + e.what());
    }
    get(j, "k_p", c.k_p, where);
    get(j, "k_d", c.k_d, where);
    get_matrix(j, "Q", c.Q, where);
    get(j, "k1", c.k1, where);
    get(j, "k2", c.k2, where);
    get(j, "epsilon", c.epsilon, where);
    get(j, "res_scaled_coordinates", c.res_scaled_coordinates, where);
    get(j, "nu", c.nu, where);
    if (j.contains("clf_mode")) {
        std::string mode;
        get(j, "clf_mode", mode, where);
        if (mode == "per-step-r")
            c.clf_mode = ClfMode::PerStepR;
        else if (mode == "frozen-p")
            c.clf_mode = ClfMode::FrozenP;
        else
            throw ConfigError(where + ".clf_mode must be 'per-step-r' or 'frozen-p'");
    }
    get_matrix(j, "H", c.H, where);
    get(j, "p_delta", c.p_delta, where);
    get(j, "p_rho", c.p_rho, where);
    get(j, "alpha", c.alpha, where);
    return c;
}

} // namespace

ExperimentConfig parse_config(const json& j)
{
    reject_unknown(j, "config",
                   {"schema_version", "study", "seed", "jobs", "out", "model", "scenario", "controllers", "sweep",
                    "montecarlo", "ocp"});
    ExperimentConfig c = ExperimentConfig::defaults();

    if (j.contains("schema_version")) {
        int v = 0;
        get(j, "schema_version", v, "config");
        if (v != kSchemaVersion)
            throw ConfigError("unsupported schema_version " + std::to_string(v));
    }
    if (j.contains("study")) {
        std::string s;
        get(j, "study", s, "config");
        try {
            c.study = parse_study(s);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config.study: ") + e.what());
        }
    }
    get(j, "seed", c.seed, "config");
    get(j, "jobs", c.jobs, "config");
    get(j, "out", c.out, "config");

    if (j.contains("model")) {
        const json& m = j.at("model");
        reject_unknown(m, "model", {"J", "u_max", "h_w_max"});
        get_matrix(m, "J", c.model.J, "model");
        get(m, "u_max", c.model.u_max, "model");
        get(m, "h_w_max", c.model.h_w_max, "model");
    }
    if (j.contains("scenario")) {
        const json& s = j.at("scenario");
        reject_unknown(s, "scenario", {"euler_deg", "horizon", "f_ctrl", "substep"});
        get_vec3(s, "euler_deg", c.scenario.euler_deg, "scenario");
        get(s, "horizon", c.scenario.horizon, "scenario");
        get(s, "f_ctrl", c.scenario.f_ctrl, "scenario");
        get(s, "substep", c.scenario.substep, "scenario");
    }
    if (j.contains("controllers")) {
        const json& list = j.at("controllers");
        if (!list.is_array())
            throw ConfigError("controllers must be a list");
        c.controllers.clear();
        for (std::size_t i = 0; i < list.size(); ++i)
            c.controllers.push_back(parse_controller(list[i], i));
    }
    if (j.contains("sweep")) {
        const json& s = j.at("sweep");
        reject_unknown(s, "sweep", {"nu", "alpha", "t_grid"});
        get(s, "nu", c.sweep.nu, "sweep");
        get(s, "alpha", c.sweep.alpha, "sweep");
        get(s, "t_grid", c.sweep.t_grid, "sweep");
    }
    if (j.contains("montecarlo")) {
        const json& m = j.at("montecarlo");
        reject_unknown(m, "montecarlo", {"seeds", "alpha"});
        get(m, "seeds", c.montecarlo.seeds, "montecarlo");
        get(m, "alpha", c.montecarlo.alpha, "montecarlo");
    }
    if (j.contains("ocp")) {
        const json& o = j.at("ocp");
        reject_unknown(o, "ocp", {"N", "max_substep"});
        get(o, "N", c.ocp.N, "ocp");
        get(o, "max_substep", c.ocp.max_substep, "ocp");
    }
    return c;
}

ExperimentConfig load_config(const std::string& path)
{
    std::ifstream is(path);
    if (!is)
        throw ConfigError("cannot open config '" + path + "'");
    json j;
    try {
        j = json::parse(is, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path + "': " + e.what());
    }
    return parse_config(j);
}

json to_json(const ControllerConfig& c)
{
    json j;
    j["variant"] = std::string(to_string(c.variant));
    switch (c.variant) {
    case ControllerVariant::PdSat:
        j["k_p"] = c.k_p;
        j["k_d"] = c.k_d;
        break;
    case ControllerVariant::ResClfQp:
        j["Q"] = matrix_json(c.Q);
        j["k1"] = c.k1;
        j["k2"] = c.k2;
        j["epsilon"] = c.epsilon;
        j["res_scaled_coordinates"] = c.res_scaled_coordinates;
        j["H"] = matrix_json(c.H);
        j["p_delta"] = c.p_delta;
        break;
    case ControllerVariant::OdClfCbfQp:
        j["alpha"] = c.alpha;
        [[fallthrough]];
    case ControllerVariant::OdClfQp:
        j["Q"] = matrix_json(c.Q);
        j["nu"] = c.nu;
        j["clf_mode"] = c.clf_mode == ClfMode::PerStepR ? "per-step-r" : "frozen-p";
        j["H"] = matrix_json(c.H);
        j["p_delta"] = c.p_delta;
        j["p_rho"] = c.p_rho;
        break;
    }
    return j;
}

json to_json(const ExperimentConfig& c)
{
    json j;
    j["schema_version"] = kSchemaVersion;
    j["study"] = std::string(to_string(c.study));
    j["seed"] = c.seed;
    j["model"] = {{"J", matrix_json(c.model.J)}, {"u_max", c.model.u_max}, {"h_w_max", c.model.h_w_max}};
    j["scenario"] = {{"euler_deg", {c.scenario.euler_deg[0], c.scenario.euler_deg[1], c.scenario.euler_deg[2]}},
                     {"horizon", c.scenario.horizon},
                     {"f_ctrl", c.scenario.f_ctrl},
                     {"substep", c.scenario.substep}};
    j["controllers"] = json::array();
    for (const auto& cc : c.controllers)
        j["controllers"].push_back(to_json(cc));
    j["sweep"] = {{"nu", c.sweep.nu}, {"alpha", c.sweep.alpha}, {"t_grid", c.sweep.t_grid}};
    j["montecarlo"] = {{"seeds", c.montecarlo.seeds}, {"alpha", c.montecarlo.alpha}};
    j["ocp"] = {{"N", c.ocp.N}, {"max_substep", c.ocp.max_substep}};
    return j;
}

} // namespace odcbf
