#include "spo/trainers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "spo/io_util.hpp"
#include "spo/rng.hpp"

namespace spo {

namespace {

// log(1 + exp(-u)) without overflow
double softplus_neg(double u) {
    if (u > 0.0) return std::log1p(std::exp(-u));
    return -u + std::log1p(std::exp(u));
}

// d/du log(1 + exp(-u)) = -sigmoid(-u)
double softplus_neg_grad(double u) { return -sigmoid(-u); }

// dh(y)/d log pi(y|x): 1 for KL, f''(r) r in general.
double potential_chain(const FDivergenceSpec& spec, double log_prob, double ref_mass) {
    if (spec.kind() == DivergenceKind::KL) return 1.0;
    const double r = std::exp(log_prob) / ref_mass;
    return spec.f_double_prime(r) * r;
}

void check_batch(const Batch& batch) {
    if (batch.empty()) throw std::invalid_argument("loss: empty batch");
}

void accumulate(GradientVector& total, const GradientVector& part) {
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += part[i];
}

}  // namespace

std::string method_name(Method m) {
    switch (m) {
        case Method::DPO: return "dpo";
        case Method::PSPO: return "pspo";
        case Method::OSPO: return "ospo";
        case Method::RSPO: return "rspo";
    }
    throw std::logic_error("unreachable");
}

Method method_from_name(const std::string& name) {
    if (name == "dpo") return Method::DPO;
    if (name == "pspo") return Method::PSPO;
    if (name == "ospo") return Method::OSPO;
    if (name == "rspo") return Method::RSPO;
    throw std::invalid_argument("unknown method: " + name);
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning rate must be > 0");
    if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch size must be >= 1");
    if (hidden < 1) throw std::invalid_argument("TrainConfig: hidden width must be >= 1");
    if (warmstart_epochs < 0) throw std::invalid_argument("TrainConfig: warm-start epochs must be >= 0");
    if (pspo_refit_period < 1) throw std::invalid_argument("TrainConfig: refit period must be >= 1");
    if (pspo_outer_iters < 0 || pspo_inner_epochs < 0)
        throw std::invalid_argument("TrainConfig: outer/inner schedule must be nonnegative");
    if (ospo_bandwidth_factor < 0.0)
        throw std::invalid_argument("TrainConfig: bandwidth factor must be >= 0");
}

Batch full_batch(const Dataset& data) {
    Batch batch;
    batch.reserve(data.size());
    for (const PreferenceExample& ex : data) batch.push_back(&ex);
    return batch;
}

LossResult quasi_loglik_loss(const Batch& batch, const MlpPolicy& policy,
                             const ProbabilityRow& ref, const FDivergenceSpec& spec,
                             const LinkFn& link) {
    check_batch(batch);
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    LossResult out;
    out.grad.assign(policy.params().size(), 0.0);
    std::vector<double> upstream(static_cast<std::size_t>(ref.size()));
    for (const PreferenceExample* ex : batch) {
        const std::vector<double> lp = policy.log_prob(ex->x);
        const std::size_t y1 = static_cast<std::size_t>(ex->y1);
        const std::size_t y0 = static_cast<std::size_t>(ex->y0);
        const double h1 = spec.kind() == DivergenceKind::KL ? lp[y1] - std::log(ref[ex->y1])
                                                            : spec.f_prime(std::exp(lp[y1]) / ref[ex->y1]);
        const double h0 = spec.kind() == DivergenceKind::KL ? lp[y0] - std::log(ref[ex->y0])
                                                            : spec.f_prime(std::exp(lp[y0]) / ref[ex->y0]);
        const double t = h1 - h0;

        double g, dg_dt;
        link(t, ex->id, g, dg_dt);
        out.loss += inv_b * -(ex->z == 1 ? std::log(g) : std::log(1.0 - g));
        const double dloss_dg = ex->z == 1 ? -1.0 / g : 1.0 / (1.0 - g);
        const double coef = inv_b * dloss_dg * dg_dt;

        std::fill(upstream.begin(), upstream.end(), 0.0);
        upstream[y1] += coef * potential_chain(spec, lp[y1], ref[ex->y1]);
        upstream[y0] -= coef * potential_chain(spec, lp[y0], ref[ex->y0]);
        accumulate(out.grad, policy.backward(ex->x, upstream));
    }
    return out;
}

LossResult dpo_loss(const Batch& batch, const MlpPolicy& policy, const ProbabilityRow& ref) {
    check_batch(batch);
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    LossResult out;
    out.grad.assign(policy.params().size(), 0.0);
    std::vector<double> upstream(static_cast<std::size_t>(ref.size()));
    for (const PreferenceExample* ex : batch) {
        const std::vector<double> lp = policy.log_prob(ex->x);
        const int winner = ex->z == 1 ? ex->y1 : ex->y0;
        const int loser = ex->z == 1 ? ex->y0 : ex->y1;
        const double s = (lp[static_cast<std::size_t>(winner)] - std::log(ref[winner])) -
                         (lp[static_cast<std::size_t>(loser)] - std::log(ref[loser]));
        out.loss += inv_b * softplus_neg(s);
        const double coef = inv_b * softplus_neg_grad(s);
        std::fill(upstream.begin(), upstream.end(), 0.0);
        upstream[static_cast<std::size_t>(winner)] += coef;
        upstream[static_cast<std::size_t>(loser)] -= coef;
        accumulate(out.grad, policy.backward(ex->x, upstream));
    }
    return out;
}

LossResult pspo_loss(const Batch& batch, const MlpPolicy& policy, const ProbabilityRow& ref,
                     const FDivergenceSpec& spec, const MonotoneLink& link) {
    if (!link.fitted()) throw std::invalid_argument("pspo_loss: link has not been fitted");
    return quasi_loglik_loss(batch, policy, ref, spec,
                             [&link](double t, std::int64_t, double& g, double& dg) {
                                 link.eval_soft_grad(t, g, dg);
                             });
}

OspoLossResult ospo_loss(const Batch& batch, const MlpPolicy& policy, const ProbabilityRow& ref,
                         const FDivergenceSpec& spec, const KernelBank& bank) {
    check_batch(batch);
    if (bank.size() < batch.size())
        throw std::runtime_error("ospo_loss: bank is cold (" + std::to_string(bank.size()) +
                                 " entries for batch of " + std::to_string(batch.size()) +
                                 "); warm-start first");
    OspoLossResult out;
    out.batch_entries.reserve(batch.size());
    LossResult base = quasi_loglik_loss(
        batch, policy, ref, spec,
        [&bank, &out](double t, std::int64_t id, double& g, double& dg) {
            nw_regress_grad(bank, t, id, g, dg);
            out.batch_entries.push_back({t, 0.0, id});
        });
    // labels were not visible inside the link callback; fill them here
    for (std::size_t i = 0; i < batch.size(); ++i)
        out.batch_entries[i].z = static_cast<double>(batch[i]->z);
    out.loss = base.loss;
    out.grad = std::move(base.grad);
    return out;
}

LossResult rspo_pop_dpo_loss(const Batch& batch, const MlpPolicy& policy,
                             const ProbabilityRow& ref) {
    check_batch(batch);
    const std::size_t b = batch.size();

    std::vector<double> s(b);
    std::vector<int> winner(b), loser(b);
    for (std::size_t i = 0; i < b; ++i) {
        const PreferenceExample* ex = batch[i];
        const std::vector<double> lp = policy.log_prob(ex->x);
        winner[i] = ex->z == 1 ? ex->y1 : ex->y0;
        loser[i] = ex->z == 1 ? ex->y0 : ex->y1;
        s[i] = (lp[static_cast<std::size_t>(winner[i])] - std::log(ref[winner[i]])) -
               (lp[static_cast<std::size_t>(loser[i])] - std::log(ref[loser[i]]));
    }

    LossResult out;
    out.grad.assign(policy.params().size(), 0.0);
    const double inv_b2 = 1.0 / (static_cast<double>(b) * static_cast<double>(b));
    std::vector<double> coef(b, 0.0);
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < b; ++j) {
            const double u = s[i] + s[j];
            out.loss += inv_b2 * softplus_neg(u);
            const double d = inv_b2 * softplus_neg_grad(u);
            coef[i] += d;
            coef[j] += d;
        }
    }
    std::vector<double> upstream(static_cast<std::size_t>(ref.size()));
    for (std::size_t i = 0; i < b; ++i) {
        std::fill(upstream.begin(), upstream.end(), 0.0);
        upstream[static_cast<std::size_t>(winner[i])] += coef[i];
        upstream[static_cast<std::size_t>(loser[i])] -= coef[i];
        accumulate(out.grad, policy.backward(batch[i]->x, upstream));
    }
    return out;
}

SignAlignment sign_align(const Dataset& data, const MlpPolicy& policy, const ProbabilityRow& ref,
                         const FDivergenceSpec& spec) {
    if (data.empty()) throw std::invalid_argument("sign_align: empty dataset");
    double s_hat = 0.0;
    for (const PreferenceExample& ex : data)
        s_hat += index_value(policy, spec, ref, ex) * static_cast<double>(ex.z);
    s_hat /= static_cast<double>(data.size());
    return SignAlignment{s_hat, s_hat < 0.0};
}

void write_training_log(const std::vector<TrainLogRow>& rows, std::ostream& out) {
    out << "step,loss,grad_norm,link_refit,bank_fill,skipped\n";
    for (const TrainLogRow& r : rows)
        out << r.step << "," << format_double(r.loss) << "," << format_double(r.grad_norm) << ","
            << (r.link_refit ? 1 : 0) << "," << r.bank_fill << "," << (r.skipped ? 1 : 0) << "\n";
}

namespace {

struct Adam {
    double lr;
    std::vector<double> m, v;
    int applied = 0;

    explicit Adam(double learning_rate, std::size_t dim)
        : lr(learning_rate), m(dim, 0.0), v(dim, 0.0) {}

    void step(std::vector<double>& params, const GradientVector& grad) {
        static constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        ++applied;
        const double c1 = 1.0 - std::pow(b1, applied);
        const double c2 = 1.0 - std::pow(b2, applied);
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
            v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
            params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    }
};

bool all_finite(double loss, const GradientVector& grad) {
    if (!std::isfinite(loss)) return false;
    for (double g : grad)
        if (!std::isfinite(g)) return false;
    return true;
}

double l2_norm(const GradientVector& grad) {
    double s = 0.0;
    for (double g : grad) s += g * g;
    return std::sqrt(s);
}

MonotoneLink refit_link(const Dataset& data, const MlpPolicy& policy, const ProbabilityRow& ref,
                        const FDivergenceSpec& spec) {
    std::vector<std::pair<double, double>> points;
    points.reserve(data.size());
    for (const PreferenceExample& ex : data)
        points.emplace_back(index_value(policy, spec, ref, ex), static_cast<double>(ex.z));
    return pava_fit(points);
}

std::vector<KernelBank::Entry> batch_indices(const Batch& batch, const MlpPolicy& policy,
                                             const ProbabilityRow& ref,
                                             const FDivergenceSpec& spec) {
    std::vector<KernelBank::Entry> entries;
    entries.reserve(batch.size());
    for (const PreferenceExample* ex : batch)
        entries.push_back({index_value(policy, spec, ref, *ex), static_cast<double>(ex->z), ex->id});
    return entries;
}

}  // namespace

TrainResult train(const Dataset& data, const TrainConfig& config, const ProbabilityRow& ref,
                  const FDivergenceSpec& spec) {
    config.validate();
    if (data.empty()) throw std::invalid_argument("train: empty dataset");
    const int n = static_cast<int>(data.size());
    const int batch_size = std::min(config.batch_size, n);
    const int steps_per_epoch = (n + batch_size - 1) / batch_size;

    const bool uses_warm = config.method == Method::PSPO || config.method == Method::OSPO;
    int warm = 0;
    int epochs = config.epochs;
    if (uses_warm && epochs > 0) {
        warm = config.warmstart_epochs > 0 ? config.warmstart_epochs : std::max(1, (epochs + 9) / 10);
        warm = std::min(warm, epochs);
    }
    int refit_period = config.pspo_refit_period;
    if (config.method == Method::PSPO && config.pspo_outer_iters > 0 &&
        config.pspo_inner_epochs > 0) {
        refit_period = config.pspo_inner_epochs * steps_per_epoch;
        epochs = warm + config.pspo_outer_iters * config.pspo_inner_epochs;
    }

    MlpShape shape{static_cast<int>(data.front().x.size()), config.hidden, ref.size()};
    MlpPolicy policy = config.init == TrainConfig::Init::Reference
                           ? MlpPolicy::reference_init(shape, derive_seed(config.seed, "init"))
                           : MlpPolicy::random_init(shape, derive_seed(config.seed, "init"));

    TrainResult result{policy, std::nullopt, std::nullopt, {}};
    if (epochs == 0) {
        if (config.method == Method::OSPO) result.sign = sign_align(data, policy, ref, spec);
        return result;
    }

    Adam adam(config.learning_rate, policy.params().size());
    Rng shuffler(derive_seed(config.seed, "shuffle"));
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    const std::size_t bank_capacity = config.ospo_bank_capacity > 0
                                          ? config.ospo_bank_capacity
                                          : static_cast<std::size_t>(32) * batch_size;
    const double bandwidth = config.ospo_bandwidth_factor > 0.0
                                 ? config.ospo_bandwidth_factor
                                 : std::pow(static_cast<double>(n), -0.2);
    KernelBank bank(bank_capacity, config.ospo_kernel, bandwidth);
    MonotoneLink link;

    int step = 0;
    int pspo_step = 0;  // steps taken in the PSPO phase, drives the refit schedule
    for (int epoch = 0; epoch < epochs; ++epoch) {
        // Fisher-Yates with the run's own rng keeps runs bit-reproducible
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(shuffler.uniform_int(i));
            std::swap(order[i - 1], order[j]);
        }
        const bool warm_phase = uses_warm && epoch < warm;
        for (int start = 0; start < n; start += batch_size) {
            Batch batch;
            batch.reserve(static_cast<std::size_t>(batch_size));
            for (int k = start; k < std::min(start + batch_size, n); ++k)
                batch.push_back(&data[order[static_cast<std::size_t>(k)]]);

            TrainLogRow row;
            row.step = step;
            std::vector<KernelBank::Entry> entries;
            LossResult loss;
            if (warm_phase || config.method == Method::DPO) {
                loss = dpo_loss(batch, policy, ref);
                if (config.method == Method::OSPO) entries = batch_indices(batch, policy, ref, spec);
            } else if (config.method == Method::RSPO) {
                loss = rspo_pop_dpo_loss(batch, policy, ref);
            } else if (config.method == Method::PSPO) {
                if (pspo_step % refit_period == 0) {
                    link = refit_link(data, policy, ref, spec);
                    row.link_refit = true;
                }
                ++pspo_step;
                loss = pspo_loss(batch, policy, ref, spec, link);
            } else {  // OSPO
                OspoLossResult ospo = ospo_loss(batch, policy, ref, spec, bank);
                loss.loss = ospo.loss;
                loss.grad = std::move(ospo.grad);
                entries = std::move(ospo.batch_entries);
            }

            row.loss = loss.loss;
            if (all_finite(loss.loss, loss.grad)) {
                row.grad_norm = l2_norm(loss.grad);
                adam.step(policy.mutable_params(), loss.grad);
            } else {
                row.skipped = true;
                row.grad_norm = std::numeric_limits<double>::quiet_NaN();
            }
            if (config.method == Method::OSPO) {
                for (const KernelBank::Entry& e : entries)
                    if (std::isfinite(e.t)) bank.push(e.t, e.z, e.id);
            }
            row.bank_fill = config.method == Method::OSPO ? bank.size() : 0;
            result.log.push_back(row);
            ++step;
        }
    }

    result.policy = policy;
    if (config.method == Method::OSPO) result.sign = sign_align(data, policy, ref, spec);
    if (config.method == Method::PSPO && link.fitted())
        result.link = refit_link(data, policy, ref, spec);
    return result;
}

}  // namespace spo
