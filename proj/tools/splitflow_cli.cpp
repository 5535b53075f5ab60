// Command-line front end: run a configuration, drive the accuracy studies,
// compare the two schemes or summarize the iteration logs of a finished run.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "splitflow/config.hpp"
#include "splitflow/output.hpp"
#include "splitflow/studies.hpp"

using namespace splitflow;

namespace {

SimulationConfig load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"operator-split domain-decomposition two-phase flow simulator"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", mode = "timegrid", run_dir;
    int levels = 4;

    CLI::App* run = app.add_subcommand("run", "run a configuration");
    run->add_option("config", config_path, "configuration file")->required();
    run->add_option("--out", out_dir, "output directory");

    CLI::App* study = app.add_subcommand("study", "accuracy studies");
    study->require_subcommand(1);
    CLI::App* conv = study->add_subcommand("convergence", "temporal refinement");
    conv->add_option("config", config_path, "configuration file")->required();
    conv->add_option("--levels", levels, "refinement levels");
    conv->add_option("--mode", mode, "timegrid or multirate")
        ->check(CLI::IsMember({"timegrid", "multirate"}));
    conv->add_option("--out", out_dir, "output directory");

    CLI::App* cmp = app.add_subcommand("compare-schemes",
                                       "run both schemes on one configuration");
    cmp->add_option("config", config_path, "configuration file")->required();
    cmp->add_option("--out", out_dir, "output directory");

    CLI::App* rep = app.add_subcommand("report", "summaries of finished runs");
    rep->require_subcommand(1);
    CLI::App* rit = rep->add_subcommand("iterations", "iteration totals");
    rit->add_option("rundir", run_dir, "run output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            SimulationConfig cfg = load(config_path);
            Simulation sim(cfg);
            SimulationOutput out = sim.run();
            auto files = write_run_outputs(cfg, out, out_dir);
            std::cout << "wrote " << files.size() + 1 << " files to " << out_dir
                      << "\n";
            double worst = 0.0;
            for (const auto& w : out.windows)
                worst = std::max(worst, w.ledger_error);
            std::cout << "windows " << out.windows.size()
                      << "  worst ledger error " << worst << "\n";
        } else if (study->parsed() && conv->parsed()) {
            SimulationConfig cfg = load(config_path);
            StudyResult res = study_convergence(
                cfg, levels,
                mode == "timegrid" ? StudyMode::TimeGrid : StudyMode::Multirate);
            std::cout << res.csv();
            std::filesystem::create_directories(out_dir);
            std::ofstream f(out_dir + "/study_" + mode + ".csv");
            f << res.csv();
        } else if (cmp->parsed()) {
            SimulationConfig cfg = load(config_path);
            SchemeComparison c = compare_schemes(cfg);
            std::cout << c.csv();
            std::filesystem::create_directories(out_dir);
            std::ofstream f(out_dir + "/compare_schemes.csv");
            f << c.csv();
        } else if (rep->parsed() && rit->parsed()) {
            std::cout << report_iterations(run_dir);
        }
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
