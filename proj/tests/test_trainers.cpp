#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "oracles.hpp"
#include "spo/rng.hpp"
#include "spo/trainers.hpp"

using namespace spo;

namespace {

constexpr double kLog2 = 0.69314718055994530941723212145818;

// zero-weight policy whose logits are exactly the given output biases
MlpPolicy bias_policy(int d, int actions, const std::vector<double>& bias) {
    const MlpShape shape{d, 4, actions};
    std::vector<double> params(static_cast<std::size_t>(shape.param_count()), 0.0);
    for (int a = 0; a < actions; ++a)
        params[params.size() - static_cast<std::size_t>(actions - a)] =
            bias[static_cast<std::size_t>(a)];
    return MlpPolicy(shape, std::move(params));
}

PreferenceExample make_example(std::vector<double> x, int y0, int y1, int z, std::int64_t id) {
    PreferenceExample ex;
    ex.x = std::move(x);
    ex.y0 = y0;
    ex.y1 = y1;
    ex.z = z;
    ex.id = id;
    return ex;
}

Dataset random_dataset(Rng& rng, int n, int d, int actions) {
    Dataset data;
    for (int i = 0; i < n; ++i) {
        std::vector<double> x(static_cast<std::size_t>(d));
        for (double& v : x) v = rng.normal();
        data.push_back(make_example(std::move(x),
                                    static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(actions))),
                                    static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(actions))),
                                    static_cast<int>(rng.uniform_int(2)), i));
    }
    return data;
}

double softplus_of_minus(double u) {
    if (u > 0.0) return std::log1p(std::exp(-u));
    return -u + std::log1p(std::exp(u));
}

}  // namespace

TEST_CASE("dpo examples") {
    const ProbabilityRow ref = ProbabilityRow::uniform(2);
    Rng rng(301);

    SUBCASE("policy equal to the reference gives loss log 2") {
        const MlpPolicy policy = MlpPolicy::reference_init({3, 4, 2}, 1);
        const Dataset data = random_dataset(rng, 12, 3, 2);
        const LossResult r = dpo_loss(full_batch(data), policy, ref);
        CHECK(r.loss == doctest::Approx(kLog2).epsilon(1e-15));
    }
    SUBCASE("perfect separation drives the loss to zero") {
        const MlpPolicy policy = bias_policy(2, 2, {40.0, 0.0});
        Dataset data{make_example({0.1, 0.2}, 1, 0, 1, 0)};  // winner = action 0
        const LossResult r = dpo_loss(full_batch(data), policy, ref);
        CHECK(r.loss < 1e-12);
    }
    SUBCASE("two symmetric examples, scalar oracle at s = 1") {
        const MlpPolicy policy = bias_policy(2, 2, {1.0, 0.0});
        Dataset data{make_example({0.0, 0.0}, 1, 0, 1, 0),   // s = +1
                     make_example({0.0, 0.0}, 1, 0, 0, 1)};  // s = -1
        const LossResult r = dpo_loss(full_batch(data), policy, ref);
        const double expected = 0.5 * (softplus_of_minus(1.0) + softplus_of_minus(-1.0));
        CHECK(r.loss == doctest::Approx(expected).epsilon(1e-14));
        CHECK(r.loss == doctest::Approx(0.8132616875182228).epsilon(1e-12));
    }
}

TEST_CASE("rspo examples") {
    const ProbabilityRow ref = ProbabilityRow::uniform(2);

    SUBCASE("all oriented indices zero gives log 2") {
        const MlpPolicy policy = MlpPolicy::reference_init({2, 4, 2}, 2);
        Rng rng(302);
        const Dataset data = random_dataset(rng, 6, 2, 2);
        CHECK(rspo_pop_dpo_loss(full_batch(data), policy, ref).loss ==
              doctest::Approx(kLog2).epsilon(1e-15));
    }
    SUBCASE("B = 2 with s = [1, -1], scalar oracle") {
        const MlpPolicy policy = bias_policy(2, 2, {1.0, 0.0});
        Dataset data{make_example({0.0, 0.0}, 1, 0, 1, 0),   // s = +1
                     make_example({0.0, 0.0}, 1, 0, 0, 1)};  // s = -1
        const double loss = rspo_pop_dpo_loss(full_batch(data), policy, ref).loss;
        const double expected = 0.25 * (softplus_of_minus(2.0) + 2.0 * softplus_of_minus(0.0) +
                                        softplus_of_minus(-2.0));
        CHECK(loss == doctest::Approx(expected).epsilon(1e-14));
        CHECK(loss == doctest::Approx(0.9100375958014587).epsilon(1e-12));
    }
    SUBCASE("loss is invariant to permuting the batch") {
        Rng rng(303);
        const MlpPolicy policy = MlpPolicy::random_init({3, 6, 4}, 3);
        const ProbabilityRow ref4 = ProbabilityRow::uniform(4);
        Dataset data = random_dataset(rng, 7, 3, 4);
        const double forward = rspo_pop_dpo_loss(full_batch(data), policy, ref4).loss;
        std::reverse(data.begin(), data.end());
        CHECK(rspo_pop_dpo_loss(full_batch(data), policy, ref4).loss ==
              doctest::Approx(forward).epsilon(1e-14));
    }
    SUBCASE("B = 1 restriction: loss equals log(1 + exp(-2s))") {
        const MlpPolicy policy = bias_policy(2, 2, {0.7, 0.0});
        Dataset data{make_example({0.0, 0.0}, 1, 0, 1, 0)};  // s = 0.7
        const double loss = rspo_pop_dpo_loss(full_batch(data), policy, ref).loss;
        CHECK(loss == softplus_of_minus(1.4));
    }
}

TEST_CASE("rspo equals the materialized pairs-of-pairs logistic loss") {
    // For each ordered (i, j) materialize one augmented point labeled 1 with
    // the winners in the y1 slots and the swapped copy labeled 0; the mean
    // logistic loss over the 2B^2 points must equal the batch loss, and the
    // two labeled halves mirror each other.
    Rng rng(304);
    const FDivergenceSpec kl = FDivergenceSpec::kl();
    for (int b = 1; b <= 8; ++b) {
        const MlpPolicy policy = MlpPolicy::random_init({3, 6, 4}, 400 + b);
        const ProbabilityRow ref = ProbabilityRow::uniform(4);
        const Dataset data = random_dataset(rng, b, 3, 4);
        const double loss = rspo_pop_dpo_loss(full_batch(data), policy, ref).loss;

        double total_label1 = 0.0, total_label0 = 0.0;
        for (const PreferenceExample& ej : data) {
            for (const PreferenceExample& ei : data) {
                const int win_j = ej.z == 1 ? ej.y1 : ej.y0;
                const int lose_j = ej.z == 1 ? ej.y0 : ej.y1;
                const int win_i = ei.z == 1 ? ei.y1 : ei.y0;
                const int lose_i = ei.z == 1 ? ei.y0 : ei.y1;
                // label-1 point: winner of j in the y1 slot, winner of i in the y0 slot
                const PreferenceExample a_j = make_example(ej.x, lose_j, win_j, 1, -1);
                const PreferenceExample a_i = make_example(ei.x, win_i, lose_i, 1, -1);
                const double score_a =
                    index_value(policy, kl, ref, a_j) - index_value(policy, kl, ref, a_i);
                total_label1 += softplus_of_minus(score_a);
                // label-0 point: both pairs swapped
                const PreferenceExample b_j = make_example(ej.x, win_j, lose_j, 0, -1);
                const PreferenceExample b_i = make_example(ei.x, lose_i, win_i, 0, -1);
                const double score_b =
                    index_value(policy, kl, ref, b_j) - index_value(policy, kl, ref, b_i);
                total_label0 += softplus_of_minus(-score_b);  // logistic loss for label 0
            }
        }
        const double mean_aug = (total_label1 + total_label0) / (2.0 * b * b);
        CHECK(std::abs(loss - mean_aug) <= 1e-12);
        CHECK(std::abs(total_label1 - total_label0) <= 1e-12);
    }
}

TEST_CASE("pspo examples") {
    const ProbabilityRow ref = ProbabilityRow::uniform(2);
    const FDivergenceSpec kl = FDivergenceSpec::kl();

    SUBCASE("constant half link at zero index gives log 2 and no slope signal") {
        const MonotoneLink link({0.0}, {0.5});
        const MlpPolicy policy = MlpPolicy::reference_init({2, 4, 2}, 5);
        Rng rng(305);
        const Dataset data = random_dataset(rng, 8, 2, 2);
        const LossResult r = pspo_loss(full_batch(data), policy, ref, kl, link);
        CHECK(r.loss == doctest::Approx(kLog2).epsilon(1e-12));
        // the interpolation part of the soft link is flat; only the 5%
        // logistic mix carries slope
        double value, slope;
        link.eval_soft_grad(0.0, value, slope);
        CHECK(slope == doctest::Approx(0.05 * 0.25).epsilon(1e-12));
    }
    SUBCASE("z = 1 against a fitted value of 0.9 contributes -log 0.9") {
        LinkFn fixed = [](double, std::int64_t, double& g, double& dg) {
            g = 0.9;
            dg = 0.0;
        };
        const MlpPolicy policy = MlpPolicy::random_init({2, 4, 2}, 6);
        Dataset data{make_example({0.3, -0.4}, 0, 1, 1, 0)};
        const LossResult r = quasi_loglik_loss(full_batch(data), policy, ref, kl, fixed);
        CHECK(r.loss == doctest::Approx(-std::log(0.9)).epsilon(1e-14));
    }
    SUBCASE("unfitted link throws") {
        const MonotoneLink link;
        const MlpPolicy policy = MlpPolicy::random_init({2, 4, 2}, 7);
        Dataset data{make_example({0.0, 0.0}, 0, 1, 1, 0)};
        CHECK_THROWS_AS(pspo_loss(full_batch(data), policy, ref, kl, link), std::invalid_argument);
    }
    SUBCASE("loss matches a hand evaluation through the soft link") {
        Rng rng(306);
        const MlpPolicy policy = MlpPolicy::random_init({3, 5, 3}, 8);
        const ProbabilityRow ref3 = ProbabilityRow::uniform(3);
        const Dataset fit_data = random_dataset(rng, 30, 3, 3);
        std::vector<std::pair<double, double>> points;
        for (const PreferenceExample& ex : fit_data)
            points.push_back({index_value(policy, kl, ref3, ex), static_cast<double>(ex.z)});
        const MonotoneLink link = pava_fit(points);

        const Dataset batch_data = random_dataset(rng, 9, 3, 3);
        const LossResult r = pspo_loss(full_batch(batch_data), policy, ref3, kl, link);
        double expected = 0.0;
        for (const PreferenceExample& ex : batch_data) {
            const double t = index_value(policy, kl, ref3, ex);
            const double g = link.eval_soft(t);
            expected += -(ex.z == 1 ? std::log(g) : std::log(1.0 - g));
        }
        expected /= static_cast<double>(batch_data.size());
        CHECK(r.loss == doctest::Approx(expected).epsilon(1e-13));
    }
}

TEST_CASE("ospo examples") {
    const FDivergenceSpec kl = FDivergenceSpec::kl();
    const ProbabilityRow ref = ProbabilityRow::uniform(2);

    SUBCASE("balanced constant bank at zero index gives log 2") {
        const MlpPolicy policy = MlpPolicy::reference_init({2, 4, 2}, 9);
        KernelBank bank(16, KernelKind::Gaussian, 0.5);
        for (int i = 0; i < 8; ++i) bank.push(0.0, i % 2 ? 1.0 : 0.0, 100 + i);
        Rng rng(307);
        const Dataset data = random_dataset(rng, 4, 2, 2);
        const OspoLossResult r = ospo_loss(full_batch(data), policy, ref, kl, bank);
        CHECK(r.loss == doctest::Approx(kLog2).epsilon(1e-12));
        CHECK(r.batch_entries.size() == 4);
        for (const KernelBank::Entry& e : r.batch_entries) CHECK(e.t == 0.0);
    }
    SUBCASE("cold bank raises") {
        const MlpPolicy policy = MlpPolicy::random_init({2, 4, 2}, 10);
        KernelBank bank(16, KernelKind::Gaussian, 0.5);
        bank.push(0.0, 1.0, 50);
        Rng rng(308);
        const Dataset data = random_dataset(rng, 4, 2, 2);
        CHECK_THROWS_AS(ospo_loss(full_batch(data), policy, ref, kl, bank), std::runtime_error);
    }
    SUBCASE("leave-one-out at the loss level: poisoning the own slot changes nothing") {
        const MlpPolicy policy = MlpPolicy::random_init({2, 4, 2}, 11);
        Rng rng(309);
        Dataset data = random_dataset(rng, 1, 2, 2);
        data[0].id = 500;
        KernelBank bank(16, KernelKind::Gaussian, 0.5);
        for (int i = 0; i < 8; ++i)
            bank.push(rng.uniform(-1.0, 1.0), static_cast<double>(rng.uniform_int(2)), 200 + i);
        bank.push(0.123, 1.0, 500);
        const double before = ospo_loss(full_batch(data), policy, ref, kl, bank).loss;

        KernelBank poisoned(16, KernelKind::Gaussian, 0.5);
        for (const KernelBank::Entry& e : bank.entries())
            poisoned.push(e.t, e.id == 500 ? 0.0 : e.z, e.id);
        CHECK(ospo_loss(full_batch(data), policy, ref, kl, poisoned).loss == before);

        // flipping some other slot's label does move the loss
        KernelBank other(16, KernelKind::Gaussian, 0.5);
        for (const KernelBank::Entry& e : bank.entries())
            other.push(e.t, e.id == 203 ? 1.0 - e.z : e.z, e.id);
        CHECK(ospo_loss(full_batch(data), policy, ref, kl, other).loss != before);
    }
    SUBCASE("hand bank of three points, scalar oracle") {
        // zero-weight policy with output biases (0.8, 0): index of (y0=1, y1=0) is 0.8
        const MlpPolicy policy = bias_policy(2, 2, {0.8, 0.0});
        Dataset data{make_example({0.0, 0.0}, 1, 0, 1, 42)};
        KernelBank bank(8, KernelKind::Gaussian, 0.9);
        bank.push(-0.5, 0.0, 1);
        bank.push(0.2, 1.0, 2);
        bank.push(0.9, 1.0, 3);
        // direct evaluation of the Nadaraya-Watson ratio at u = 0.8
        const double mean = (-0.5 + 0.2 + 0.9) / 3.0;
        const double var = ((-0.5 - mean) * (-0.5 - mean) + (0.2 - mean) * (0.2 - mean) +
                            (0.9 - mean) * (0.9 - mean)) /
                           3.0;
        const double b = 0.9 * std::sqrt(var);
        auto kern = [&](double t) {
            const double v = (0.8 - t) / b;
            return std::exp(-0.5 * v * v);
        };
        const double raw = (kern(-0.5) * 0.0 + kern(0.2) * 1.0 + kern(0.9) * 1.0) /
                           (kern(-0.5) + kern(0.2) + kern(0.9));
        const double mixed = 0.95 * std::min(std::max(raw, 1e-4), 1.0 - 1e-4) +
                             0.05 * (1.0 / (1.0 + std::exp(-0.8)));
        const double expected = -std::log(mixed);
        CHECK(ospo_loss(full_batch(data), policy, ref, kl, bank).loss ==
              doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("ospo oracle mode reproduces the known-link cross-entropy") {
    // With the true link substituted for g-hat the quasi-likelihood matches
    // an independently computed cross-entropy under that link.
    Rng rng(310);
    const FDivergenceSpec kl = FDivergenceSpec::kl();
    const ProbabilityRow ref = ProbabilityRow::uniform(3);
    const MlpPolicy policy = MlpPolicy::random_init({3, 6, 3}, 12);
    const Dataset data = random_dataset(rng, 25, 3, 3);

    LinkFn true_link = [](double t, std::int64_t, double& g, double& dg) {
        g = sigmoid(t);
        dg = g * (1.0 - g);
    };
    const double engine = quasi_loglik_loss(full_batch(data), policy, ref, kl, true_link).loss;

    double direct = 0.0;
    for (const PreferenceExample& ex : data) {
        const double t = index_value(policy, kl, ref, ex);
        const double p = 1.0 / (1.0 + std::exp(-t));
        direct += -(ex.z == 1 ? std::log(p) : std::log(1.0 - p));
    }
    direct /= static_cast<double>(data.size());
    CHECK(engine == doctest::Approx(direct).epsilon(1e-9));
}

TEST_CASE("gradients of all four losses match finite differences") {
    Rng rng(311);
    const MlpShape shape{4, 8, 3};
    const ProbabilityRow ref = ProbabilityRow::uniform(3);
    const FDivergenceSpec kl = FDivergenceSpec::kl();
    const FDivergenceSpec alpha = FDivergenceSpec::alpha(0.5);

    for (int trial = 0; trial < 10; ++trial) {
        const MlpPolicy policy = MlpPolicy::random_init(shape, 6000 + trial);
        const Dataset data = random_dataset(rng, 4, 4, 3);
        const Batch batch = full_batch(data);

        {
            const LossResult r = dpo_loss(batch, policy, ref);
            const double err = oracles::max_rel_grad_error(
                policy, [&](const MlpPolicy& p) { return dpo_loss(batch, p, ref).loss; }, r.grad);
            CHECK(err < 1e-4);
        }
        {
            const LossResult r = rspo_pop_dpo_loss(batch, policy, ref);
            const double err = oracles::max_rel_grad_error(
                policy, [&](const MlpPolicy& p) { return rspo_pop_dpo_loss(batch, p, ref).loss; },
                r.grad);
            CHECK(err < 1e-4);
        }
        for (const FDivergenceSpec& spec : {kl, alpha}) {
            // fit the link on held-out data so batch indices do not sit on
            // breakpoints (training hits those kinks by design; the check
            // needs a smooth neighborhood)
            const Dataset held_out = random_dataset(rng, 40, 4, 3);
            std::vector<std::pair<double, double>> points;
            for (const PreferenceExample& ex : held_out)
                points.push_back({index_value(policy, spec, ref, ex), static_cast<double>(ex.z)});
            const MonotoneLink link = pava_fit(points);
            const LossResult r = pspo_loss(batch, policy, ref, spec, link);
            const double err = oracles::max_rel_grad_error(
                policy,
                [&](const MlpPolicy& p) { return pspo_loss(batch, p, ref, spec, link).loss; },
                r.grad);
            CHECK(err < 1e-4);
        }
        for (const FDivergenceSpec& spec : {kl, alpha}) {
            KernelBank bank(64, KernelKind::Gaussian, 0.6);
            for (int i = 0; i < 30; ++i)
                bank.push(rng.uniform(-2.0, 2.0), static_cast<double>(rng.uniform_int(2)), 1000 + i);
            const OspoLossResult r = ospo_loss(batch, policy, ref, spec, bank);
            const double err = oracles::max_rel_grad_error(
                policy,
                [&](const MlpPolicy& p) { return ospo_loss(batch, p, ref, spec, bank).loss; },
                r.grad);
            CHECK(err < 1e-4);
        }
    }
}

TEST_CASE("sign_align examples") {
    const FDivergenceSpec kl = FDivergenceSpec::kl();
    const ProbabilityRow ref = ProbabilityRow::uniform(2);

    SUBCASE("null index gives zero and no flip") {
        const MlpPolicy policy = MlpPolicy::reference_init({2, 4, 2}, 13);
        Rng rng(312);
        const Dataset data = random_dataset(rng, 10, 2, 2);
        const SignAlignment a = sign_align(data, policy, ref, kl);
        CHECK(a.s_hat == 0.0);
        CHECK_FALSE(a.flip);
    }
    SUBCASE("negating the potential negates s_hat") {
        const MlpPolicy policy = bias_policy(2, 2, {0.9, -0.3});
        const MlpPolicy negated = bias_policy(2, 2, {-0.9, 0.3});
        Rng rng(313);
        const Dataset data = random_dataset(rng, 20, 2, 2);
        const SignAlignment a = sign_align(data, policy, ref, kl);
        const SignAlignment b = sign_align(data, negated, ref, kl);
        CHECK(a.s_hat == doctest::Approx(-b.s_hat).epsilon(1e-12));
        if (a.s_hat > 0.0) {
            CHECK_FALSE(a.flip);
            CHECK(b.flip);
        }
    }
    SUBCASE("labels tracking the index sign give a positive mean, 4-point oracle") {
        const MlpPolicy policy = bias_policy(2, 2, {1.2, 0.0});  // t(y0=1,y1=0) = 1.2
        Dataset data{make_example({0.0, 0.0}, 1, 0, 1, 0),   // t = 1.2, z = 1{t>0} = 1
                     make_example({0.0, 0.0}, 0, 1, 0, 1),   // t = -1.2, z = 0
                     make_example({0.0, 0.0}, 1, 0, 1, 2),   // t = 1.2, z = 1
                     make_example({0.0, 0.0}, 0, 1, 0, 3)};  // t = -1.2, z = 0
        const SignAlignment a = sign_align(data, policy, ref, kl);
        CHECK(a.s_hat == doctest::Approx(2.0 * 1.2 / 4.0).epsilon(1e-12));
        CHECK_FALSE(a.flip);
    }
    SUBCASE("empty dataset throws") {
        const MlpPolicy policy = MlpPolicy::random_init({2, 4, 2}, 14);
        CHECK_THROWS_AS(sign_align({}, policy, ref, kl), std::invalid_argument);
    }
}

TEST_CASE("train: zero epochs returns the initial policy unchanged") {
    Rng rng(314);
    const Dataset data = random_dataset(rng, 16, 3, 2);
    TrainConfig cfg;
    cfg.method = Method::DPO;
    cfg.epochs = 0;
    cfg.seed = 99;
    cfg.hidden = 6;
    const TrainResult result = train(data, cfg, ProbabilityRow::uniform(2), FDivergenceSpec::kl());
    const MlpPolicy fresh = MlpPolicy::random_init({3, 6, 2}, derive_seed(99, "init"));
    CHECK(result.policy.params() == fresh.params());
    CHECK(result.log.empty());
}

TEST_CASE("train: fixed seed gives bit-identical parameters") {
    Rng rng(315);
    const Dataset data = random_dataset(rng, 40, 3, 3);
    for (Method m : {Method::DPO, Method::PSPO, Method::OSPO, Method::RSPO}) {
        TrainConfig cfg;
        cfg.method = m;
        cfg.epochs = 4;
        cfg.batch_size = 8;
        cfg.seed = 1234;
        cfg.hidden = 6;
        cfg.pspo_refit_period = 5;
        const TrainResult a = train(data, cfg, ProbabilityRow::uniform(3), FDivergenceSpec::kl());
        const TrainResult b = train(data, cfg, ProbabilityRow::uniform(3), FDivergenceSpec::kl());
        CHECK(a.policy.params() == b.policy.params());
        cfg.seed = 4321;
        const TrainResult c = train(data, cfg, ProbabilityRow::uniform(3), FDivergenceSpec::kl());
        CHECK(a.policy.params() != c.policy.params());
    }
}

TEST_CASE("train: dpo on linearly separable toy data converges") {
    // d = 2, two actions; action 1 preferred exactly when x_0 > 0
    Rng rng(316);
    Dataset data;
    for (int i = 0; i < 200; ++i) {
        std::vector<double> x{rng.normal(), rng.normal()};
        const int z = x[0] > 0.0 ? 1 : 0;
        data.push_back(make_example(std::move(x), 0, 1, z, i));
    }
    TrainConfig cfg;
    cfg.method = Method::DPO;
    cfg.epochs = 150;
    cfg.batch_size = 200;  // full batch keeps the descent smooth
    cfg.learning_rate = 5e-3;
    cfg.seed = 7;
    cfg.hidden = 16;
    const TrainResult result = train(data, cfg, ProbabilityRow::uniform(2), FDivergenceSpec::kl());

    // per-epoch mean losses decrease monotonically and end below 0.2
    const int steps_per_epoch = static_cast<int>(result.log.size()) / cfg.epochs;
    std::vector<double> epoch_mean(static_cast<std::size_t>(cfg.epochs), 0.0);
    for (std::size_t i = 0; i < result.log.size(); ++i)
        epoch_mean[i / static_cast<std::size_t>(steps_per_epoch)] +=
            result.log[i].loss / steps_per_epoch;
    for (std::size_t e = 1; e < epoch_mean.size(); ++e) CHECK(epoch_mean[e] < epoch_mean[e - 1]);
    CHECK(epoch_mean.back() < 0.2);
}

TEST_CASE("train: pspo refits the link exactly every period steps") {
    Rng rng(317);
    const Dataset data = random_dataset(rng, 32, 2, 2);
    TrainConfig cfg;
    cfg.method = Method::PSPO;
    cfg.epochs = 6;
    cfg.warmstart_epochs = 1;
    cfg.batch_size = 8;
    cfg.seed = 11;
    cfg.hidden = 4;
    cfg.pspo_refit_period = 3;
    const TrainResult result =
        train(data, cfg, ProbabilityRow::uniform(2), FDivergenceSpec::kl());
    CHECK(result.link.has_value());

    // 4 steps per epoch, 1 warm epoch, 20 PSPO steps: refits at pspo steps 0,3,6,...
    int pspo_step = 0;
    for (const TrainLogRow& row : result.log) {
        if (row.step < 4) {
            CHECK_FALSE(row.link_refit);  // warm phase
            continue;
        }
        CHECK(row.link_refit == (pspo_step % cfg.pspo_refit_period == 0));
        ++pspo_step;
    }
    CHECK(pspo_step == 20);
}

TEST_CASE("train: ospo returns a sign alignment and feeds the bank") {
    Rng rng(318);
    const Dataset data = random_dataset(rng, 48, 3, 3);
    TrainConfig cfg;
    cfg.method = Method::OSPO;
    cfg.epochs = 5;
    cfg.warmstart_epochs = 2;
    cfg.batch_size = 16;
    cfg.seed = 21;
    cfg.hidden = 6;
    const TrainResult result = train(data, cfg, ProbabilityRow::uniform(3), FDivergenceSpec::kl());
    CHECK(result.sign.has_value());
    // 3 batches per epoch, 5 epochs: 240 snapshots, capacity 32*16 never binds
    CHECK(result.log.back().bank_fill == 240);
    // warm phase already feeds the bank
    CHECK(result.log[2].bank_fill == 48);
}

TEST_CASE("train: non-finite loss skips the update") {
    Dataset data{make_example({std::numeric_limits<double>::infinity(), 0.0}, 0, 1, 1, 0)};
    TrainConfig cfg;
    cfg.method = Method::DPO;
    cfg.epochs = 1;
    cfg.batch_size = 1;
    cfg.seed = 31;
    cfg.hidden = 4;
    const TrainResult result = train(data, cfg, ProbabilityRow::uniform(2), FDivergenceSpec::kl());
    CHECK(result.log.size() == 1);
    CHECK(result.log[0].skipped);
    const MlpPolicy fresh = MlpPolicy::random_init({2, 4, 2}, derive_seed(31, "init"));
    CHECK(result.policy.params() == fresh.params());
}

TEST_CASE("train: config validation") {
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.learning_rate = 1e-3;
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.batch_size = 8;
    cfg.pspo_refit_period = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("training log csv schema") {
    std::vector<TrainLogRow> rows{{0, 0.5, 1.25, true, 7, false}};
    std::ostringstream out;
    write_training_log(rows, out);
    CHECK(out.str() == "step,loss,grad_norm,link_refit,bank_fill,skipped\n0,0.5,1.25,1,7,0\n");
}
