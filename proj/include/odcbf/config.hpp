#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "odcbf/controllers.hpp"
#include "odcbf/ocp.hpp"

namespace odcbf {

inline constexpr int kSchemaVersion = 1;

enum class Study { Compare, Pareto, MonteCarlo };

std::string_view to_string(Study s);
Study parse_study(std::string_view name);

struct ScenarioConfig {
    Vec3 euler_deg{140.0, 20.0, 100.0};  // 3-2-1 angles of the initial attitude
    double horizon = 120.0;             // s
    double f_ctrl = 10.0;               // Hz
    double substep = 0.01;              // s
};

struct OcpConfig {
    int N = 100;
    double max_substep = 0.05;
};

struct SweepConfig {
    std::vector<double> nu{5.0, 10.0, 20.0};
    std::vector<double> alpha{0.02, 0.05, 0.2};
    std::vector<double> t_grid{15.0, 20.0, 25.0, 30.0, 40.0, 50.0, 60.0, 80.0, 100.0};
};

struct MonteCarloConfig {
    int seeds = 20;
    double alpha = 1.0;
};

struct ExperimentConfig {
    PlantModel model = PlantModel::reference();
    ScenarioConfig scenario;
    std::vector<ControllerConfig> controllers;
    Study study = Study::Compare;
    SweepConfig sweep;
    MonteCarloConfig montecarlo;
    OcpConfig ocp;
    std::string out = "out";
    std::uint64_t seed = 0;
    int jobs = 1;

    /// Reference plant and scenario with the four comparative tunings.
    static ExperimentConfig defaults();

    /// Throws ConfigError on the first invalid field.
    void validate() const;

    SimOptions sim_options() const;
    SpacecraftState initial_state() const;
    const ControllerConfig* find(ControllerVariant v) const;
};

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Missing keys keep their defaults; unknown keys are rejected. Controller
/// entries start from ControllerConfig::defaults of their variant.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

nlohmann::json to_json(const ExperimentConfig& c);
nlohmann::json to_json(const ControllerConfig& c);

} // namespace odcbf
