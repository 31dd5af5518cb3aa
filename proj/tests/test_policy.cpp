#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include "oracles.hpp"
#include "spo/policy.hpp"
#include "spo/preference.hpp"
#include "spo/rng.hpp"

using namespace spo;

namespace {

std::vector<double> random_context(Rng& rng, int d) {
    std::vector<double> x(static_cast<std::size_t>(d));
    for (double& v : x) v = rng.normal();
    return x;
}

}  // namespace

TEST_CASE("zero-weight network is uniform over actions") {
    const MlpShape shape{4, 8, 5};
    MlpPolicy policy(shape, std::vector<double>(static_cast<std::size_t>(shape.param_count()), 0.0));
    const std::vector<double> lp = policy.log_prob({0.3, -1.2, 0.0, 2.0});
    for (double v : lp) CHECK(v == doctest::Approx(std::log(0.2)).epsilon(1e-14));
}

TEST_CASE("log_prob normalizes and repeats bit-identically") {
    Rng rng(7);
    const MlpShape shape{6, 16, 4};
    const MlpPolicy policy = MlpPolicy::random_init(shape, 99);
    for (int i = 0; i < 30; ++i) {
        const std::vector<double> x = random_context(rng, shape.input_dim);
        const std::vector<double> lp = policy.log_prob(x);
        CHECK(logsumexp(lp) == doctest::Approx(0.0).epsilon(1e-12));
        double total = 0.0;
        for (double v : lp) total += std::exp(v);
        CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
        const std::vector<double> again = policy.log_prob(x);
        for (std::size_t k = 0; k < lp.size(); ++k) CHECK(lp[k] == again[k]);
    }
    CHECK_THROWS_AS(policy.log_prob({1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("same seed gives identical parameters") {
    const MlpShape shape{5, 8, 3};
    const MlpPolicy a = MlpPolicy::random_init(shape, 1234);
    const MlpPolicy b = MlpPolicy::random_init(shape, 1234);
    CHECK(a.params() == b.params());
    const MlpPolicy c = MlpPolicy::random_init(shape, 1235);
    CHECK(a.params() != c.params());
}

TEST_CASE("reference init starts at the uniform policy") {
    const MlpShape shape{5, 8, 3};
    const MlpPolicy policy = MlpPolicy::reference_init(shape, 77);
    Rng rng(8);
    const std::vector<double> lp = policy.log_prob(random_context(rng, 5));
    for (double v : lp) CHECK(v == doctest::Approx(std::log(1.0 / 3.0)).epsilon(1e-14));
}

TEST_CASE("potential examples") {
    const MlpShape shape{3, 4, 2};
    Rng rng(9);
    const MlpPolicy policy = MlpPolicy::random_init(shape, 5);
    const std::vector<double> x = random_context(rng, 3);
    const std::vector<double> lp = policy.log_prob(x);

    SUBCASE("matching policy and reference give zero potential") {
        // reference equal to the policy's own row at this context
        std::vector<double> probs(lp.size());
        double total = 0.0;
        for (std::size_t i = 0; i < lp.size(); ++i) total += probs[i] = std::exp(lp[i]);
        probs.back() += 1.0 - total;
        const ProbabilityRow ref = ProbabilityRow::validated(probs);
        CHECK(potential(policy, FDivergenceSpec::kl(), ref, x, 0) ==
              doctest::Approx(0.0).epsilon(1e-9));
        CHECK(potential(policy, FDivergenceSpec::alpha(0.5), ref, x, 1) ==
              doctest::Approx(0.0).epsilon(1e-9));
    }
    SUBCASE("KL potential is the log ratio") {
        const ProbabilityRow ref = ProbabilityRow::uniform(2);
        CHECK(potential(policy, FDivergenceSpec::kl(), ref, x, 0) ==
              doctest::Approx(lp[0] - std::log(0.5)).epsilon(1e-12));
    }
    SUBCASE("zero reference mass is a domain error") {
        const ProbabilityRow ref = ProbabilityRow::validated({1.0, 0.0});
        CHECK_THROWS_AS(potential(policy, FDivergenceSpec::kl(), ref, x, 1), std::domain_error);
    }
}

TEST_CASE("index examples") {
    const MlpShape shape{3, 4, 3};
    Rng rng(10);
    const MlpPolicy policy = MlpPolicy::random_init(shape, 15);
    const ProbabilityRow ref = ProbabilityRow::uniform(3);
    const FDivergenceSpec kl = FDivergenceSpec::kl();

    PreferenceExample ex;
    ex.x = random_context(rng, 3);
    ex.y0 = 1;
    ex.y1 = 1;
    CHECK(index_value(policy, kl, ref, ex) == 0.0);

    ex.y1 = 2;
    const double forward = index_value(policy, kl, ref, ex);
    std::swap(ex.y0, ex.y1);
    CHECK(index_value(policy, kl, ref, ex) == doctest::Approx(-forward).epsilon(1e-14));
}

TEST_CASE("KL index equals the directly computed DPO log-ratio difference") {
    const MlpShape shape{4, 8, 4};
    Rng rng(11);
    const MlpPolicy policy = MlpPolicy::random_init(shape, 16);
    const ProbabilityRow ref = oracles::random_simplex_row(4, 321);
    for (int i = 0; i < 50; ++i) {
        PreferenceExample ex;
        ex.x = random_context(rng, 4);
        ex.y0 = static_cast<int>(rng.uniform_int(4));
        ex.y1 = static_cast<int>(rng.uniform_int(4));
        // independent route: raw log-probabilities and reference masses
        const std::vector<double> lp = policy.log_prob(ex.x);
        const double direct = (lp[static_cast<std::size_t>(ex.y1)] - std::log(ref[ex.y1])) -
                              (lp[static_cast<std::size_t>(ex.y0)] - std::log(ref[ex.y0]));
        CHECK(index_value(policy, FDivergenceSpec::kl(), ref, ex) ==
              doctest::Approx(direct).epsilon(1e-12));
    }
}

TEST_CASE("index is invariant to shifting all output logits") {
    const MlpShape shape{4, 6, 3};
    const MlpPolicy policy = MlpPolicy::random_init(shape, 17);
    MlpPolicy shifted = policy;
    // add a constant to every output bias
    for (int a = 0; a < shape.actions; ++a)
        shifted.mutable_params()[shifted.params().size() - 1 - static_cast<std::size_t>(a)] += 0.5;

    Rng rng(12);
    const ProbabilityRow ref = ProbabilityRow::uniform(3);
    for (int i = 0; i < 30; ++i) {
        PreferenceExample ex;
        ex.x = random_context(rng, 4);
        ex.y0 = static_cast<int>(rng.uniform_int(3));
        ex.y1 = static_cast<int>(rng.uniform_int(3));
        const double a = index_value(policy, FDivergenceSpec::kl(), ref, ex);
        const double b = index_value(shifted, FDivergenceSpec::kl(), ref, ex);
        CHECK(a == doctest::Approx(b).epsilon(1e-12));
    }
}

TEST_CASE("backward: zero upstream and score mean") {
    const MlpShape shape{4, 8, 3};
    const MlpPolicy policy = MlpPolicy::random_init(shape, 18);
    Rng rng(13);
    const std::vector<double> x = random_context(rng, 4);

    SUBCASE("zero upstream gives a zero gradient") {
        const GradientVector g = policy.backward(x, {0.0, 0.0, 0.0});
        for (double v : g) CHECK(v == 0.0);
    }
    SUBCASE("upstream = pi gives the zero-mean score identity") {
        std::vector<double> probs(3);
        const std::vector<double> lp = policy.log_prob(x);
        for (std::size_t i = 0; i < 3; ++i) probs[i] = std::exp(lp[i]);
        const GradientVector g = policy.backward(x, probs);
        for (double v : g) CHECK(std::abs(v) < 1e-8);
    }
}

TEST_CASE("backward matches central finite differences on 20 random triples") {
    Rng rng(14);
    for (int trial = 0; trial < 20; ++trial) {
        const MlpShape shape{4, 8, 3};
        const MlpPolicy policy = MlpPolicy::random_init(shape, 1000 + trial);
        const std::vector<double> x = random_context(rng, 4);
        std::vector<double> upstream(3);
        for (double& u : upstream) u = rng.uniform(-1.0, 1.0);

        const GradientVector grad = policy.backward(x, upstream);
        const double err = oracles::max_rel_grad_error(
            policy,
            [&](const MlpPolicy& p) {
                const std::vector<double> lp = p.log_prob(x);
                double v = 0.0;
                for (std::size_t i = 0; i < lp.size(); ++i) v += upstream[i] * lp[i];
                return v;
            },
            grad);
        CHECK(err < 1e-4);
    }
}

TEST_CASE("checkpoint round trip") {
    const MlpShape shape{6, 10, 4};
    const MlpPolicy policy = MlpPolicy::random_init(shape, 19);
    const std::string path =
        (std::filesystem::temp_directory_path() / "spo_ckpt_test.bin").string();
    save_checkpoint(policy, path, 19);
    const MlpPolicy loaded = load_checkpoint(path);
    CHECK(loaded.shape() == shape);
    CHECK(loaded.params() == policy.params());
    std::filesystem::remove(path);
    std::filesystem::remove(path + ".json");
}
