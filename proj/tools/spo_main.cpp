#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "spo/calibration.hpp"
#include "spo/experiment.hpp"
#include "spo/io_util.hpp"
#include "spo/rng.hpp"
#include "spo/synthgen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') {
            quoted = !quoted;
        } else if (c == ',' && !quoted) {
            cells.push_back(cell);
            cell.clear();
        } else {
            cell += c;
        }
    }
    cells.push_back(cell);
    return cells;
}

int cmd_run(const std::string& config_path, const std::string& output_override) {
    spo::ExperimentConfig config = spo::ExperimentConfig::from_json_file(config_path);
    if (!output_override.empty()) config.output_dir = output_override;
    const spo::ExperimentResult result = spo::run_experiment(config);
    std::cout << "cells: " << result.runs.size() << "  failures: " << result.failures
              << "  output: " << config.output_dir << "\n";
    return result.failures == 0 ? 0 : 1;
}

int cmd_gen_data(std::uint64_t seed, int n, double shift, const std::string& out_prefix,
                 bool debug) {
    const spo::SyntheticWorld world = spo::gen_world(seed, shift);
    const std::uint64_t data_seed = spo::derive_seed(seed, "data");
    const spo::Dataset data = spo::gen_dataset(world, n, data_seed, debug);

    const fs::path prefix(out_prefix);
    if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());
    const std::string teacher_path = out_prefix + ".teacher.bin";
    spo::save_checkpoint(world.teacher, teacher_path, world.seed);
    spo::save_dataset_csv(data, world.context_dim, out_prefix + ".csv");
    spo::save_dataset_metadata(world, n, data_seed, teacher_path, out_prefix + ".meta.json");
    std::cout << "wrote " << out_prefix << ".csv (" << n << " examples, s=" << shift << ")\n";
    return 0;
}

int cmd_calibrate(const std::string& checkpoint, double kappa, int m, std::uint64_t seed,
                  const std::string& divergence, bool flip) {
    const spo::MlpPolicy policy = spo::load_checkpoint(checkpoint);
    const spo::FDivergenceSpec spec = spo::FDivergenceSpec::from_config_string(divergence);
    const spo::ProbabilityRow ref = spo::ProbabilityRow::uniform(policy.shape().actions);
    const auto contexts = spo::gen_contexts(m, policy.shape().input_dim, seed);

    json out;
    try {
        const spo::CalibrationResult r =
            spo::calibrate_beta(policy, ref, spec, contexts, kappa, 0.05, 20.0, flip);
        out["beta_hat"] = r.beta_hat;
        out["achieved_divergence"] = r.achieved_divergence;
        out["bracket"] = {r.bracket_lo, r.bracket_hi};
        out["m"] = r.context_count;
        out["pinned_at_floor"] = r.pinned_at_floor;
    } catch (const spo::BudgetUnattainableError& e) {
        out["error"] = e.what();
        std::cout << out.dump(2) << "\n";
        return 1;
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

// Rebuilds figure CSVs from the runs.csv/curves.csv of a completed sweep.
int cmd_figures(const std::string& dir) {
    const fs::path base(dir);
    std::ifstream manifest_in(base / "manifest.json");
    if (!manifest_in) {
        std::cerr << "no manifest.json under " << dir << "\n";
        return 1;
    }
    const json manifest = json::parse(manifest_in);
    spo::ExperimentConfig config =
        spo::ExperimentConfig::from_json_text(manifest.at("config").dump());
    config.output_dir = dir;

    std::ifstream runs_in(base / "runs.csv");
    std::ifstream curves_in(base / "curves.csv");
    if (!runs_in || !curves_in) {
        std::cerr << "missing runs.csv or curves.csv under " << dir << "\n";
        return 1;
    }

    spo::ExperimentResult result;
    std::map<std::tuple<int, double, std::string>, std::size_t> index;
    std::string line;
    std::getline(runs_in, line);
    while (std::getline(runs_in, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> cells = split_csv_row(line);
        if (cells.size() < 12) continue;
        spo::RunOutcome r;
        r.rep = std::stoi(cells[0]);
        r.s = std::stod(cells[1]);
        r.method = spo::method_from_name(cells[2]);
        r.ok = cells[3] == "1";
        r.reward_at_budget = std::stod(cells[5]);
        r.rho = std::stod(cells[7]);
        r.auc_conditional = std::stod(cells[9]);
        r.corr_true_index = std::stod(cells[11]);
        index[{r.rep, r.s, cells[2]}] = result.runs.size();
        result.runs.push_back(std::move(r));
    }
    std::getline(curves_in, line);
    while (std::getline(curves_in, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> cells = split_csv_row(line);
        if (cells.size() < 6) continue;
        const auto key = std::make_tuple(std::stoi(cells[0]), std::stod(cells[1]), cells[2]);
        const auto it = index.find(key);
        if (it == index.end()) continue;
        result.runs[it->second].curve.push_back(
            {std::stod(cells[3]), std::stod(cells[4]), std::stod(cells[5])});
    }
    for (const spo::RunOutcome& r : result.runs)
        if (!r.ok) ++result.failures;

    spo::emit_figure_data(config, result);
    std::cout << "figures rebuilt under " << (base / "figures").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semiparametric preference optimization lab"};
    app.require_subcommand(1);

    std::string config_path, output_override;
    CLI::App* run = app.add_subcommand("run", "Run the experiment sweep from a JSON config");
    run->add_option("config", config_path, "Path to the experiment config")->required();
    run->add_option("--output-dir", output_override, "Override the config's output directory");

    std::uint64_t seed = 1;
    int n = 1000;
    double shift = 0.0;
    std::string out_prefix = "spo_data";
    bool debug = false;
    CLI::App* gen = app.add_subcommand("gen-data", "Generate a synthetic preference dataset");
    gen->add_option("--seed", seed, "World seed");
    gen->add_option("--n", n, "Number of preference examples");
    gen->add_option("--shift", shift, "Link misspecification shift s");
    gen->add_option("--out", out_prefix, "Output path prefix");
    gen->add_flag("--debug", debug, "Record reward gaps on the in-memory examples");

    std::string checkpoint, divergence = "kl";
    double kappa = 0.2;
    int m = 2000;
    std::uint64_t calib_seed = 1;
    bool flip = false;
    CLI::App* calib = app.add_subcommand("calibrate", "Calibrate beta to a divergence budget");
    calib->add_option("--checkpoint", checkpoint, "Policy checkpoint path")->required();
    calib->add_option("--kappa", kappa, "Divergence budget");
    calib->add_option("--m", m, "Number of calibration contexts");
    calib->add_option("--seed", calib_seed, "Context seed");
    calib->add_option("--divergence", divergence, "kl or alpha:<a>");
    calib->add_flag("--flip", flip, "Negate the potential (OSPO sign alignment)");

    std::string figures_dir;
    CLI::App* figs = app.add_subcommand("figures", "Rebuild figure CSVs from a finished sweep");
    figs->add_option("dir", figures_dir, "Sweep output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, output_override);
        if (gen->parsed()) return cmd_gen_data(seed, n, shift, out_prefix, debug);
        if (calib->parsed()) return cmd_calibrate(checkpoint, kappa, m, calib_seed, divergence, flip);
        if (figs->parsed()) return cmd_figures(figures_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
