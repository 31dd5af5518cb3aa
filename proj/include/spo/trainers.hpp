#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include "spo/fdiv.hpp"
#include "spo/link_estimation.hpp"
#include "spo/policy.hpp"
#include "spo/preference.hpp"

namespace spo {

enum class Method { DPO, PSPO, OSPO, RSPO };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

struct TrainConfig {
    Method method = Method::DPO;
    double learning_rate = 2e-3;
    int epochs = 100;
    int batch_size = 128;
    std::uint64_t seed = 0;
    int hidden = 32;

    // 0 resolves to ceil(epochs / 10) for PSPO/OSPO; ignored by DPO/RSPO.
    int warmstart_epochs = 0;

    // PSPO: PAVA refit every this many optimizer steps.  The alternative
    // outer/inner schedule, when both are set, overrides the period with
    // inner_epochs full passes and runs outer_iters of them after the warm
    // start.
    int pspo_refit_period = 50;
    int pspo_outer_iters = 0;
    int pspo_inner_epochs = 0;

    // OSPO: 0 resolves to 32 * batch_size (resp. n^{-1/5}).
    std::size_t ospo_bank_capacity = 0;
    double ospo_bandwidth_factor = 0.0;
    KernelKind ospo_kernel = KernelKind::Gaussian;

    enum class Init { Random, Reference };
    Init init = Init::Random;

    void validate() const;  // throws invalid_argument on out-of-range fields
};

// Sign of the learned index relative to the labels: s_hat = mean t(w_i) z_i.
// flip means downstream evaluation negates the potential.  Ties (s_hat == 0)
// do not flip.
struct SignAlignment {
    double s_hat = 0.0;
    bool flip = false;
};

struct LossResult {
    double loss = 0.0;
    GradientVector grad;
};

using Batch = std::vector<const PreferenceExample*>;

Batch full_batch(const Dataset& data);

// Plug-in link for the quasi-likelihood engine: maps an index value (and the
// example id, for leave-one-out plug-ins) to the estimated P(z=1) and its
// derivative in the index.
using LinkFn = std::function<void(double t, std::int64_t id, double& value, double& dvalue_dt)>;

// Negative mean binary cross-entropy -[z log g(t) + (1-z) log(1-g(t))] with
// gradients flowing through the link's index argument only.  Shared by PSPO,
// OSPO, and known-link baselines.
LossResult quasi_loglik_loss(const Batch& batch, const MlpPolicy& policy,
                             const ProbabilityRow& ref, const FDivergenceSpec& spec,
                             const LinkFn& link);

// DPO: mean log(1 + exp(-s_i)) over the batch, where s_i is the index with
// the preferred action in the winning slot.  KL divergence is assumed.
LossResult dpo_loss(const Batch& batch, const MlpPolicy& policy, const ProbabilityRow& ref);

// PSPO step loss against a frozen isotonic link evaluated in soft mode.
LossResult pspo_loss(const Batch& batch, const MlpPolicy& policy, const ProbabilityRow& ref,
                     const FDivergenceSpec& spec, const MonotoneLink& link);

struct OspoLossResult {
    double loss = 0.0;
    GradientVector grad;
    // (index, label, id) snapshots at the evaluated parameters, for the
    // caller to append to the bank after the optimizer step.
    std::vector<KernelBank::Entry> batch_entries;
};

// OSPO: quasi-likelihood with the leave-one-out kernel regression plug-in.
// Bank entries are constants for gradient purposes.  Throws when the bank
// holds fewer entries than the batch (cold bank: warm-start first).
OspoLossResult ospo_loss(const Batch& batch, const MlpPolicy& policy, const ProbabilityRow& ref,
                         const FDivergenceSpec& spec, const KernelBank& bank);

// RSPO as PoP-DPO: (1/B^2) sum_{i,j} log(1 + exp(-(s_i + s_j))), diagonal
// included.  KL divergence is assumed.
LossResult rspo_pop_dpo_loss(const Batch& batch, const MlpPolicy& policy,
                             const ProbabilityRow& ref);

SignAlignment sign_align(const Dataset& data, const MlpPolicy& policy, const ProbabilityRow& ref,
                         const FDivergenceSpec& spec);

struct TrainLogRow {
    int step = 0;
    double loss = 0.0;
    double grad_norm = 0.0;
    bool link_refit = false;
    std::size_t bank_fill = 0;
    bool skipped = false;  // non-finite loss guard fired
};

void write_training_log(const std::vector<TrainLogRow>& rows, std::ostream& out);

struct TrainResult {
    MlpPolicy policy;
    std::optional<SignAlignment> sign;  // present for OSPO
    std::optional<MonotoneLink> link;   // present for PSPO (final refit)
    std::vector<TrainLogRow> log;
};

// Shuffled minibatch Adam (beta1 0.9, beta2 0.999, eps 1e-8).  PSPO refits
// PAVA on the full dataset on its schedule; OSPO warm-starts with DPO epochs,
// feeds the bank along the way, and sign-aligns on the training data at the
// end.  Non-finite losses skip the update.  Deterministic in config.seed.
TrainResult train(const Dataset& data, const TrainConfig& config, const ProbabilityRow& ref,
                  const FDivergenceSpec& spec);

}  // namespace spo
