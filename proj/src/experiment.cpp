#include "spo/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "spo/calibration.hpp"
#include "spo/io_util.hpp"
#include "spo/rng.hpp"
#include "spo/synthgen.hpp"

namespace spo {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<double> ExperimentConfig::default_beta_grid() {
    // 25 log-spaced temperatures from 0.05 to 50; spans near-greedy tilts
    // down to near-reference ones for potentials of the scale the study
    // produces.
    std::vector<double> grid;
    const int k = 25;
    for (int i = 0; i < k; ++i)
        grid.push_back(0.05 * std::pow(1000.0, static_cast<double>(i) / (k - 1)));
    return grid;
}

namespace {

const std::set<std::string> kTopLevelKeys = {
    "n",           "seeds",         "s_grid",      "methods",       "kappa",
    "beta_grid",   "eval_contexts", "eval_preferences", "context_dim", "num_actions",
    "divergence",  "master_seed",   "output_dir",  "workers",       "training_logs",
    "train"};

const std::set<std::string> kTrainKeys = {
    "learning_rate",   "epochs",          "batch_size",        "hidden",
    "warmstart_epochs", "pspo_refit_period", "pspo_outer_iters", "pspo_inner_epochs",
    "ospo_bank_capacity", "ospo_bandwidth_factor", "ospo_kernel", "init"};

void reject_unknown_keys(const json& obj, const std::set<std::string>& known,
                         const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!known.count(it.key()))
            throw std::invalid_argument("config: unknown key \"" + it.key() + "\" in " + where);
}

FDivergenceSpec parse_divergence(const json& j) {
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s == "kl" || s == "KL") return FDivergenceSpec::kl();
        throw std::invalid_argument("config: unknown divergence \"" + s + "\"");
    }
    if (j.is_object()) {
        if (j.size() != 1 || !j.contains("alpha"))
            throw std::invalid_argument("config: divergence object must be {\"alpha\": a}");
        return FDivergenceSpec::alpha(j.at("alpha").get<double>());
    }
    throw std::invalid_argument("config: divergence must be \"kl\" or {\"alpha\": a}");
}

void apply_train_keys(TrainConfig& tc, const json& obj, const std::string& where) {
    reject_unknown_keys(obj, kTrainKeys, where);
    if (obj.contains("learning_rate")) tc.learning_rate = obj.at("learning_rate").get<double>();
    if (obj.contains("epochs")) tc.epochs = obj.at("epochs").get<int>();
    if (obj.contains("batch_size")) tc.batch_size = obj.at("batch_size").get<int>();
    if (obj.contains("hidden")) tc.hidden = obj.at("hidden").get<int>();
    if (obj.contains("warmstart_epochs")) tc.warmstart_epochs = obj.at("warmstart_epochs").get<int>();
    if (obj.contains("pspo_refit_period"))
        tc.pspo_refit_period = obj.at("pspo_refit_period").get<int>();
    if (obj.contains("pspo_outer_iters")) tc.pspo_outer_iters = obj.at("pspo_outer_iters").get<int>();
    if (obj.contains("pspo_inner_epochs"))
        tc.pspo_inner_epochs = obj.at("pspo_inner_epochs").get<int>();
    if (obj.contains("ospo_bank_capacity"))
        tc.ospo_bank_capacity = obj.at("ospo_bank_capacity").get<std::size_t>();
    if (obj.contains("ospo_bandwidth_factor"))
        tc.ospo_bandwidth_factor = obj.at("ospo_bandwidth_factor").get<double>();
    if (obj.contains("ospo_kernel")) {
        const std::string k = obj.at("ospo_kernel").get<std::string>();
        if (k == "gaussian")
            tc.ospo_kernel = KernelKind::Gaussian;
        else if (k == "epanechnikov")
            tc.ospo_kernel = KernelKind::Epanechnikov;
        else
            throw std::invalid_argument("config: unknown kernel \"" + k + "\"");
    }
    if (obj.contains("init")) {
        const std::string v = obj.at("init").get<std::string>();
        if (v == "random")
            tc.init = TrainConfig::Init::Random;
        else if (v == "reference")
            tc.init = TrainConfig::Init::Reference;
        else
            throw std::invalid_argument("config: unknown init \"" + v + "\"");
    }
}

json train_to_json(const TrainConfig& tc) {
    json j;
    j["learning_rate"] = tc.learning_rate;
    j["epochs"] = tc.epochs;
    j["batch_size"] = tc.batch_size;
    j["hidden"] = tc.hidden;
    j["warmstart_epochs"] = tc.warmstart_epochs;
    j["pspo_refit_period"] = tc.pspo_refit_period;
    j["pspo_outer_iters"] = tc.pspo_outer_iters;
    j["pspo_inner_epochs"] = tc.pspo_inner_epochs;
    j["ospo_bank_capacity"] = tc.ospo_bank_capacity;
    j["ospo_bandwidth_factor"] = tc.ospo_bandwidth_factor;
    j["ospo_kernel"] = tc.ospo_kernel == KernelKind::Gaussian ? "gaussian" : "epanechnikov";
    j["init"] = tc.init == TrainConfig::Init::Random ? "random" : "reference";
    return j;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
    reject_unknown_keys(j, kTopLevelKeys, "top level");

    ExperimentConfig cfg;
    if (j.contains("n")) cfg.n = j.at("n").get<int>();
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<int>();
    if (j.contains("s_grid")) cfg.s_grid = j.at("s_grid").get<std::vector<double>>();
    if (j.contains("methods")) {
        cfg.methods.clear();
        for (const auto& m : j.at("methods")) cfg.methods.push_back(method_from_name(m.get<std::string>()));
    }
    if (j.contains("kappa")) cfg.kappa = j.at("kappa").get<double>();
    if (j.contains("beta_grid")) cfg.beta_grid = j.at("beta_grid").get<std::vector<double>>();
    if (j.contains("eval_contexts")) cfg.eval_contexts = j.at("eval_contexts").get<int>();
    if (j.contains("eval_preferences")) cfg.eval_preferences = j.at("eval_preferences").get<int>();
    if (j.contains("context_dim")) cfg.context_dim = j.at("context_dim").get<int>();
    if (j.contains("num_actions")) cfg.num_actions = j.at("num_actions").get<int>();
    if (j.contains("divergence")) cfg.divergence = parse_divergence(j.at("divergence"));
    if (j.contains("master_seed")) cfg.master_seed = j.at("master_seed").get<std::uint64_t>();
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("workers")) cfg.workers = j.at("workers").get<int>();
    if (j.contains("training_logs")) cfg.training_logs = j.at("training_logs").get<bool>();

    if (j.contains("train")) {
        const json& t = j.at("train");
        if (!t.is_object()) throw std::invalid_argument("config: \"train\" must be an object");
        std::set<std::string> train_known = kTrainKeys;
        for (const char* m : {"dpo", "pspo", "ospo", "rspo"}) train_known.insert(m);
        reject_unknown_keys(t, train_known, "train");
        json shared = t;
        for (const char* m : {"dpo", "pspo", "ospo", "rspo"}) shared.erase(m);
        apply_train_keys(cfg.train_defaults, shared, "train");
        for (const char* m : {"dpo", "pspo", "ospo", "rspo"}) {
            if (!t.contains(m)) continue;
            TrainConfig tc = cfg.train_defaults;
            apply_train_keys(tc, t.at(m), std::string("train.") + m);
            cfg.train_by_method[m] = tc;
        }
    }
    if (cfg.beta_grid.empty()) cfg.beta_grid = default_beta_grid();
    cfg.validate();
    return cfg;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return from_json_text(buffer.str());
}

void ExperimentConfig::validate() const {
    if (n < 1) throw std::invalid_argument("config: n must be >= 1");
    if (seeds < 1) throw std::invalid_argument("config: seeds must be >= 1");
    if (!(kappa > 0.0)) throw std::invalid_argument("config: kappa must be > 0");
    if (s_grid.empty()) throw std::invalid_argument("config: s_grid must be non-empty");
    for (double s : s_grid)
        if (s < 0.0) throw std::invalid_argument("config: shifts must be nonnegative");
    if (methods.empty()) throw std::invalid_argument("config: methods must be non-empty");
    if (beta_grid.empty()) throw std::invalid_argument("config: beta_grid must be non-empty");
    if (eval_contexts < 1) throw std::invalid_argument("config: eval_contexts must be >= 1");
    if (eval_preferences < 2) throw std::invalid_argument("config: eval_preferences must be >= 2");
    if (context_dim < 1 || num_actions < 2)
        throw std::invalid_argument("config: context_dim >= 1 and num_actions >= 2 required");
    train_defaults.validate();
    for (const auto& [name, tc] : train_by_method) tc.validate();
}

TrainConfig ExperimentConfig::train_config_for(Method m) const {
    const auto it = train_by_method.find(method_name(m));
    TrainConfig tc = it != train_by_method.end() ? it->second : train_defaults;
    tc.method = m;
    return tc;
}

std::string ExperimentConfig::canonical_json(bool include_non_result_fields) const {
    json j;
    j["n"] = n;
    j["seeds"] = seeds;
    j["s_grid"] = s_grid;
    std::vector<std::string> ms;
    for (Method m : methods) ms.push_back(method_name(m));
    j["methods"] = ms;
    j["kappa"] = kappa;
    j["beta_grid"] = beta_grid;
    j["eval_contexts"] = eval_contexts;
    j["eval_preferences"] = eval_preferences;
    j["context_dim"] = context_dim;
    j["num_actions"] = num_actions;
    j["divergence"] = divergence.to_config_string();
    j["master_seed"] = master_seed;
    j["train"] = train_to_json(train_defaults);
    for (const auto& [name, tc] : train_by_method) j["train_overrides"][name] = train_to_json(tc);
    if (include_non_result_fields) {
        j["output_dir"] = output_dir;
        j["workers"] = workers;
        j["training_logs"] = training_logs;
    }
    return j.dump();
}

std::string ExperimentConfig::config_hash() const {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canonical_json(false))));
    return std::string(buf);
}

std::string ExperimentConfig::run_identity() const {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(output_dir)));
    return config_hash() + "-" + std::string(buf);
}

namespace {

std::string cell_tag(const char* kind, int rep, double s, Method method) {
    std::string tag = std::string(kind) + "/rep" + std::to_string(rep);
    if (s >= 0.0) tag += "/s" + format_double(s);
    tag += "/" + method_name(method);
    return tag;
}

std::string shift_tag(const char* kind, int rep, double s) {
    return std::string(kind) + "/rep" + std::to_string(rep) + "/s" + format_double(s);
}

std::string rep_tag(const char* kind, int rep) {
    return std::string(kind) + "/rep" + std::to_string(rep);
}

}  // namespace

double pearson_corr(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2)
        throw std::invalid_argument("pearson_corr: need two samples of equal length >= 2");
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
        sab += (a[i] - ma) * (b[i] - mb);
    }
    if (saa <= 0.0 || sbb <= 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

AggregateStat aggregate_stat(std::vector<double> values) {
    AggregateStat stat;
    if (values.empty()) return stat;
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += v;
    stat.mean = sum / static_cast<double>(values.size());
    auto percentile = [&](double p) {
        const double pos = p / 100.0 * static_cast<double>(values.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, values.size() - 1);
        const double frac = pos - std::floor(pos);
        return values[lo] + frac * (values[hi] - values[lo]);
    };
    stat.p5 = percentile(5.0);
    stat.p95 = percentile(95.0);
    return stat;
}

RunOutcome run_cell(const ExperimentConfig& config, int rep, double s, Method method) {
    RunOutcome out;
    out.rep = rep;
    out.s = s;
    out.method = method;
    out.world_seed = derive_seed(config.master_seed, rep_tag("world", rep));
    out.data_seed = derive_seed(config.master_seed, shift_tag("data", rep, s));
    out.train_seed = derive_seed(config.master_seed, cell_tag("train", rep, s, method));

    try {
        const SyntheticWorld world =
            gen_world(out.world_seed, s, config.context_dim, config.num_actions);
        const Dataset data = gen_dataset(world, config.n, out.data_seed);

        TrainConfig tc = config.train_config_for(method);
        tc.seed = out.train_seed;
        const TrainResult trained = train(data, tc, world.reference, config.divergence);
        const bool flip = trained.sign && trained.sign->flip;
        if (trained.sign) {
            out.sign_s_hat = trained.sign->s_hat;
            out.sign_flip = trained.sign->flip;
        }

        const auto contexts = gen_contexts(config.eval_contexts, config.context_dim,
                                           derive_seed(config.master_seed, rep_tag("evalctx", rep)));
        out.curve = pareto_curve(trained.policy, world, config.divergence, contexts,
                                 config.beta_grid, flip);
        const BudgetReward budget = reward_at_budget(out.curve, config.kappa);
        out.reward_at_budget = budget.reward;
        out.budget_clamped = budget.clamped;

        const double sign = flip ? -1.0 : 1.0;
        const RhoReport rho = rho_metric(
            [&](const std::vector<double>& x) {
                std::vector<double> h = potential_row(trained.policy, config.divergence,
                                                      world.reference, x);
                for (double& v : h) v *= sign;
                return h;
            },
            [&](const std::vector<double>& x) { return world.true_potential_row(x); },
            world.reference, contexts);
        out.rho = rho.rho;
        out.best_scale = rho.best_scale;

        const Dataset eval_data =
            gen_dataset(world, config.eval_preferences,
                        derive_seed(config.master_seed, shift_tag("evaldata", rep, s)));
        std::vector<double> t_hat(eval_data.size()), t_star(eval_data.size());
        std::vector<int> labels(eval_data.size());
        for (std::size_t i = 0; i < eval_data.size(); ++i) {
            const PreferenceExample& ex = eval_data[i];
            t_hat[i] = sign * index_value(trained.policy, config.divergence, world.reference, ex);
            const std::vector<double> hs = world.true_potential_row(ex.x);
            t_star[i] = hs[static_cast<std::size_t>(ex.y1)] - hs[static_cast<std::size_t>(ex.y0)];
            labels[i] = ex.z;
        }
        out.auc_conditional = empirical_auc(t_hat, labels, AucOrientation::Conditional);
        out.auc_symmetric = empirical_auc(t_hat, labels, AucOrientation::Symmetric);
        out.corr_true_index = pearson_corr(t_hat, t_star);

        const CalibrationResult calib = calibrate_beta(
            trained.policy, world.reference, config.divergence, contexts, config.kappa,
            0.05, 20.0, flip);
        out.beta_hat = calib.beta_hat;
        out.achieved_divergence = calib.achieved_divergence;
        out.calib_pinned = calib.pinned_at_floor;

        if (config.training_logs) {
            const fs::path logdir = fs::path(config.output_dir) / "logs";
            fs::create_directories(logdir);
            const std::string stem = "rep" + std::to_string(rep) + "_s" + format_double(s) + "_" +
                                     method_name(method);
            std::ofstream log(logdir / (stem + ".train.csv"));
            write_training_log(trained.log, log);
            if (trained.link) {
                std::ofstream link_csv(logdir / (stem + ".link.csv"));
                trained.link->to_csv(link_csv);
            }
        }
        out.ok = true;
    } catch (const std::exception& e) {
        out.ok = false;
        out.error = e.what();
    }
    return out;
}

namespace {

int resolve_workers(const ExperimentConfig& config) {
    int w = config.workers > 0 ? config.workers
                               : static_cast<int>(std::thread::hardware_concurrency());
    if (w < 1) w = 1;
    if (const char* cap = std::getenv("SPO_THREADS")) {
        const int c = std::atoi(cap);
        if (c >= 1) w = std::min(w, c);
    }
    return w;
}

std::vector<AggregateRow> aggregate(const ExperimentConfig& config,
                                    const std::vector<RunOutcome>& runs) {
    std::vector<AggregateRow> rows;
    for (Method m : config.methods) {
        for (double s : config.s_grid) {
            AggregateRow row;
            row.method = m;
            row.s = s;
            std::vector<double> reward, rho, auc, corr;
            for (const RunOutcome& r : runs) {
                if (!r.ok || r.method != m || r.s != s) continue;
                reward.push_back(r.reward_at_budget);
                rho.push_back(r.rho);
                auc.push_back(r.auc_conditional);
                corr.push_back(r.corr_true_index);
            }
            row.count = static_cast<int>(reward.size());
            row.reward = aggregate_stat(reward);
            row.rho = aggregate_stat(rho);
            row.auc_conditional = aggregate_stat(auc);
            row.corr_true_index = aggregate_stat(corr);
            rows.push_back(row);
        }
    }
    return rows;
}

void write_runs_csv(const ExperimentConfig& config, const std::vector<RunOutcome>& runs,
                    std::ostream& out) {
    (void)config;
    out << "rep,s,method,ok,error,reward_at_budget,budget_clamped,rho,best_scale,"
           "auc_conditional,auc_symmetric,corr_true_index,beta_hat,achieved_divergence,"
           "calib_pinned,sign_s_hat,sign_flip,world_seed,data_seed,train_seed\n";
    for (const RunOutcome& r : runs) {
        out << r.rep << "," << format_double(r.s) << "," << method_name(r.method) << ","
            << (r.ok ? 1 : 0) << "," << csv_escape(r.error) << ","
            << format_double(r.reward_at_budget) << "," << (r.budget_clamped ? 1 : 0) << ","
            << format_double(r.rho) << "," << format_double(r.best_scale) << ","
            << format_double(r.auc_conditional) << "," << format_double(r.auc_symmetric) << ","
            << format_double(r.corr_true_index) << "," << format_double(r.beta_hat) << ","
            << format_double(r.achieved_divergence) << "," << (r.calib_pinned ? 1 : 0) << ","
            << format_double(r.sign_s_hat) << "," << (r.sign_flip ? 1 : 0) << "," << r.world_seed
            << "," << r.data_seed << "," << r.train_seed << "\n";
    }
}

void write_curves_csv(const std::vector<RunOutcome>& runs, std::ostream& out) {
    out << "rep,s,method,beta,reward,divergence\n";
    for (const RunOutcome& r : runs) {
        if (!r.ok) continue;
        for (const ParetoPoint& p : r.curve)
            out << r.rep << "," << format_double(r.s) << "," << method_name(r.method) << ","
                << format_double(p.beta) << "," << format_double(p.mean_reward) << ","
                << format_double(p.mean_divergence) << "\n";
    }
}

void write_aggregate_csv(const std::vector<AggregateRow>& rows, std::ostream& out) {
    out << "method,s,count,reward_mean,reward_p5,reward_p95,rho_mean,rho_p5,rho_p95,"
           "auc_mean,auc_p5,auc_p95,corr_mean,corr_p5,corr_p95\n";
    for (const AggregateRow& r : rows) {
        out << method_name(r.method) << "," << format_double(r.s) << "," << r.count << ","
            << format_double(r.reward.mean) << "," << format_double(r.reward.p5) << ","
            << format_double(r.reward.p95) << "," << format_double(r.rho.mean) << ","
            << format_double(r.rho.p5) << "," << format_double(r.rho.p95) << ","
            << format_double(r.auc_conditional.mean) << "," << format_double(r.auc_conditional.p5)
            << "," << format_double(r.auc_conditional.p95) << ","
            << format_double(r.corr_true_index.mean) << "," << format_double(r.corr_true_index.p5)
            << "," << format_double(r.corr_true_index.p95) << "\n";
    }
}

}  // namespace

ExperimentResult run_experiment_in_memory(const ExperimentConfig& config) {
    config.validate();
    struct Cell {
        int rep;
        double s;
        Method method;
    };
    std::vector<Cell> cells;
    for (int rep = 0; rep < config.seeds; ++rep)
        for (double s : config.s_grid)
            for (Method m : config.methods) cells.push_back({rep, s, m});

    ExperimentResult result;
    result.runs.resize(cells.size());
    std::atomic<std::size_t> next{0};
    const int workers = resolve_workers(config);
    auto drain = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) break;
            result.runs[i] = run_cell(config, cells[i].rep, cells[i].s, cells[i].method);
        }
    };
    if (workers <= 1 || cells.size() <= 1) {
        drain();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(drain);
        for (std::thread& t : pool) t.join();
    }

    for (const RunOutcome& r : result.runs)
        if (!r.ok) ++result.failures;
    result.aggregates = aggregate(config, result.runs);
    return result;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    ExperimentResult result = run_experiment_in_memory(config);

    const fs::path dir(config.output_dir);
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "runs.csv");
        if (!out) throw std::runtime_error("cannot write runs.csv under " + config.output_dir);
        write_runs_csv(config, result.runs, out);
    }
    {
        std::ofstream out(dir / "curves.csv");
        write_curves_csv(result.runs, out);
    }
    {
        std::ofstream out(dir / "aggregate.csv");
        write_aggregate_csv(result.aggregates, out);
    }
    {
        json manifest;
        manifest["config"] = json::parse(config.canonical_json(true));
        manifest["config_hash"] = config.config_hash();
        manifest["run_identity"] = config.run_identity();
        manifest["seed_derivation"] =
            "cell seeds are splitmix64(master_seed ^ fnv1a64(tag)) with tags "
            "world/rep{r}, data/rep{r}/s{s}, train/rep{r}/s{s}/{method}, "
            "evalctx/rep{r}, evaldata/rep{r}/s{s}";
        manifest["failures"] = result.failures;
        json cells = json::array();
        for (const RunOutcome& r : result.runs) {
            json c;
            c["rep"] = r.rep;
            c["s"] = r.s;
            c["method"] = method_name(r.method);
            c["ok"] = r.ok;
            c["world_seed"] = r.world_seed;
            c["data_seed"] = r.data_seed;
            c["train_seed"] = r.train_seed;
            if (!r.ok) c["error"] = r.error;
            cells.push_back(c);
        }
        manifest["cells"] = cells;
        std::ofstream out(dir / "manifest.json");
        out << manifest.dump(2) << "\n";
    }
    emit_figure_data(config, result);
    return result;
}

void emit_figure_data(const ExperimentConfig& config, const ExperimentResult& result) {
    const fs::path dir = fs::path(config.output_dir) / "figures";
    fs::create_directories(dir);

    {
        std::ofstream out(dir / "reward_vs_s.csv");
        out << "method,s,mean,lo,hi\n";
        for (const AggregateRow& row : result.aggregates) {
            if (row.count == 0) continue;
            out << method_name(row.method) << "," << format_double(row.s) << ","
                << format_double(row.reward.mean) << "," << format_double(row.reward.p5) << ","
                << format_double(row.reward.p95) << "\n";
        }
    }

    for (double s : config.s_grid) {
        std::ofstream out(dir / ("pareto_s" + format_double(s) + ".csv"));
        out << "method,beta,mean_reward,mean_divergence\n";
        for (Method m : config.methods) {
            // average the per-run curves pointwise over successful reps
            std::vector<double> reward(config.beta_grid.size(), 0.0);
            std::vector<double> divergence(config.beta_grid.size(), 0.0);
            int count = 0;
            for (const RunOutcome& r : result.runs) {
                if (!r.ok || r.method != m || r.s != s) continue;
                for (std::size_t b = 0; b < r.curve.size(); ++b) {
                    reward[b] += r.curve[b].mean_reward;
                    divergence[b] += r.curve[b].mean_divergence;
                }
                ++count;
            }
            if (count == 0) continue;
            for (std::size_t b = 0; b < config.beta_grid.size(); ++b)
                out << method_name(m) << "," << format_double(config.beta_grid[b]) << ","
                    << format_double(reward[b] / count) << ","
                    << format_double(divergence[b] / count) << "\n";
        }
    }
}

}  // namespace spo
