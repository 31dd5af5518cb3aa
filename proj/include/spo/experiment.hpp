#pragma once

#include <map>
#include <string>
#include <vector>

#include "spo/eval.hpp"
#include "spo/trainers.hpp"

namespace spo {

// Sweep definition for the synthetic link-misspecification study.  Parsed
// from a single JSON config; unknown keys are hard errors.
struct ExperimentConfig {
    int n = 1000;
    int seeds = 50;
    std::vector<double> s_grid{0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5};
    std::vector<Method> methods{Method::DPO, Method::PSPO, Method::OSPO, Method::RSPO};
    double kappa = 0.2;
    std::vector<double> beta_grid;  // empty -> default_beta_grid()
    int eval_contexts = 2000;
    int eval_preferences = 2000;
    int context_dim = 20;
    int num_actions = 10;
    FDivergenceSpec divergence = FDivergenceSpec::kl();
    std::uint64_t master_seed = 1;
    std::string output_dir = "spo_out";
    int workers = 0;  // 0 = hardware concurrency; SPO_THREADS caps either way
    bool training_logs = false;
    TrainConfig train_defaults;
    std::map<std::string, TrainConfig> train_by_method;  // resolved per-method configs

    static std::vector<double> default_beta_grid();

    static ExperimentConfig from_json_text(const std::string& text);
    static ExperimentConfig from_json_file(const std::string& path);
    void validate() const;

    TrainConfig train_config_for(Method m) const;

    // Hash over every field that affects results (output_dir, workers and
    // training_logs excluded).  Hex, stable across runs.
    std::string config_hash() const;
    // config_hash() + "-" + hash(output_dir): two configs differing only in
    // the output path share the prefix but not the identity.
    std::string run_identity() const;
    std::string canonical_json(bool include_non_result_fields) const;
};

struct RunOutcome {
    int rep = 0;
    double s = 0.0;
    Method method = Method::DPO;
    bool ok = false;
    std::string error;

    double reward_at_budget = 0.0;
    bool budget_clamped = false;
    double rho = 0.0;
    double best_scale = 0.0;
    double auc_conditional = 0.0;
    double auc_symmetric = 0.0;
    double corr_true_index = 0.0;
    double beta_hat = 0.0;
    double achieved_divergence = 0.0;
    bool calib_pinned = false;
    double sign_s_hat = 0.0;
    bool sign_flip = false;

    std::uint64_t world_seed = 0, data_seed = 0, train_seed = 0;
    std::vector<ParetoPoint> curve;
};

struct AggregateStat {
    double mean = 0.0, p5 = 0.0, p95 = 0.0;
};

struct AggregateRow {
    Method method = Method::DPO;
    double s = 0.0;
    int count = 0;  // successful runs aggregated
    AggregateStat reward, rho, auc_conditional, corr_true_index;
};

struct ExperimentResult {
    std::vector<RunOutcome> runs;
    std::vector<AggregateRow> aggregates;
    int failures = 0;
};

// Runs one (rep, s, method) cell.  Exposed so the acceptance suite can drive
// bespoke sweeps through the exact same path.
RunOutcome run_cell(const ExperimentConfig& config, int rep, double s, Method method);

// Full sweep over (rep, s, method) with a worker pool; writes runs.csv,
// curves.csv, aggregate.csv and manifest.json under output_dir, plus figure
// CSVs.  Failed cells are recorded as error rows and the sweep continues.
ExperimentResult run_experiment(const ExperimentConfig& config);

// In-memory variant (no files) used by tests and the acceptance suite.
ExperimentResult run_experiment_in_memory(const ExperimentConfig& config);

// Figure data mirroring the study's panels: reward_vs_s.csv per method and
// pareto_s{val}.csv per shift, under <output_dir>/figures.
void emit_figure_data(const ExperimentConfig& config, const ExperimentResult& result);

// mean, 5th and 95th percentile (linear interpolation) of a sample.
AggregateStat aggregate_stat(std::vector<double> values);

double pearson_corr(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace spo
