#include <cstdio>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "odcbf/studies.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"Optimal-decay CLF-CBF-QP attitude control experiments"};

    std::string study, config_path, out;
    std::uint64_t seed = 0;
    int jobs = 0;
    double horizon = 0.0;
    int seeds = 0;
    bool solve_times = false;

    app.add_option("--study", study, "compare | pareto | montecarlo")
        ->required()
        ->check(CLI::IsMember({"compare", "pareto", "montecarlo"}));
    app.add_option("--config", config_path, "JSON experiment config")->required()->check(CLI::ExistingFile);
    app.add_option("--out", out, "output directory")->required();
    app.add_option("--seed", seed, "experiment seed")->required();
    app.add_option("--jobs", jobs, "worker threads (default: config value)")->check(CLI::PositiveNumber);
    app.add_option("--horizon", horizon, "override scenario.horizon [s]")->check(CLI::PositiveNumber);
    app.add_option("--seeds", seeds, "override montecarlo.seeds")->check(CLI::PositiveNumber);
    app.add_flag("--solve-times", solve_times, "write measured QP solve times into the trajectory CSVs");

    CLI11_PARSE(app, argc, argv);

    odcbf::ExperimentConfig config;
    try {
        config = odcbf::load_config(config_path);
        config.study = odcbf::parse_study(study);
        config.out = out;
        config.seed = seed;
        if (jobs > 0)
            config.jobs = jobs;
        if (horizon > 0.0)
            config.scenario.horizon = horizon;
        if (seeds > 0)
            config.montecarlo.seeds = seeds;
        config.validate();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "odcbf: invalid configuration: %s\n", e.what());
        return 2;
    }

    try {
        const bool ok = odcbf::run_study(config, std::filesystem::path(out), solve_times);
        if (!ok) {
            std::fprintf(stderr, "odcbf: %s study finished with failed runs (see report in %s)\n", study.c_str(),
                         out.c_str());
            return 1;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "odcbf: %s\n", e.what());
        return 1;
    }
    return 0;
}
