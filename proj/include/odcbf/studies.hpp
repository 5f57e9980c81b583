#pragma once

#include <atomic>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "odcbf/config.hpp"

namespace odcbf {

/// Runs fn(0..n-1) on `jobs` threads. fn must not throw; results are meant to
/// be written into preallocated slots by index.
template <class Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn)
{
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++)
                fn(i);
        });
}

struct ClosedLoopRun {
    std::string name;
    Trajectory trajectory;
    RunMetrics metrics;
    std::optional<std::string> error;  // construction failure or aborted run
};

ClosedLoopRun run_controller(const PlantModel& model, const ControllerConfig& config, const SpacecraftState& x0,
                             const SimOptions& options);

// ---------------------------------------------------------------------------

struct CompareResult {
    std::vector<ClosedLoopRun> runs;  // config order
    std::optional<OcpResult> ocp;     // at the OD-CLF-CBF-QP T_final
    std::optional<std::string> ocp_error;
    double ocp_T_final = 0.0;
    bool completed = true;
};

CompareResult run_compare(const ExperimentConfig& config);

struct TuningPoint {
    double nu = 0.0;
    double alpha = 0.0;
    ClosedLoopRun run;
    std::optional<OcpResult> ocp;  // at this tuning's T_final, when converged
};

struct ParetoResult {
    std::vector<ParetoPoint> curve;
    std::vector<TuningPoint> tunings;  // nu-major
    bool completed = true;
};

ParetoResult run_pareto(const ExperimentConfig& config);

struct MonteCarloRun {
    int index = 0;
    std::uint64_t seed = 0;
    SpacecraftState x0;
    ClosedLoopRun run;
};

struct MonteCarloResult {
    std::vector<MonteCarloRun> runs;
    int converged = 0;
    double max_hw_violation = 0.0;
    double max_u = 0.0;
    bool completed = true;
};

/// Per-run orientation seeds drawn from the config seed.
std::vector<std::uint64_t> montecarlo_seeds(std::uint64_t seed, int count);

MonteCarloResult run_montecarlo(const ExperimentConfig& config);

// ---------------------------------------------------------------------------
// Artifacts. Everything except timing.json is a function of (config, seed)
// only; `solve_times` fills the solve_ms column of the trajectory CSVs, which
// otherwise holds zeros.

nlohmann::json compare_report(const ExperimentConfig& config, const CompareResult& r);
nlohmann::json pareto_report(const ExperimentConfig& config, const ParetoResult& r);
nlohmann::json montecarlo_report(const ExperimentConfig& config, const MonteCarloResult& r);

void write_compare(const std::filesystem::path& dir, const ExperimentConfig& config, const CompareResult& r,
                   bool solve_times = false);
void write_pareto(const std::filesystem::path& dir, const ExperimentConfig& config, const ParetoResult& r,
                  bool solve_times = false);
void write_montecarlo(const std::filesystem::path& dir, const ExperimentConfig& config, const MonteCarloResult& r,
                      bool solve_times = false);

/// Runs config.study and writes its artifacts into `dir`; returns false when a
/// run failed (the failure is recorded in the report).
bool run_study(const ExperimentConfig& config, const std::filesystem::path& dir, bool solve_times = false);

} // namespace odcbf
