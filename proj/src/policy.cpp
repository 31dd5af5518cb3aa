#include "spo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "spo/preference.hpp"
#include "spo/rng.hpp"

namespace spo {

double logsumexp(const std::vector<double>& v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

MlpPolicy::MlpPolicy(MlpShape shape, std::vector<double> params)
    : shape_(shape), params_(std::move(params)) {
    if (params_.size() != static_cast<std::size_t>(shape_.param_count()))
        throw std::invalid_argument("MlpPolicy: parameter vector has wrong length");
}

MlpPolicy MlpPolicy::random_init(MlpShape shape, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> p(static_cast<std::size_t>(shape.param_count()));
    std::size_t at = 0;
    auto fill_layer = [&](int rows, int cols) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
        for (int i = 0; i < rows * cols + rows; ++i) p[at++] = rng.uniform(-bound, bound);
    };
    fill_layer(shape.hidden, shape.input_dim);
    fill_layer(shape.hidden, shape.hidden);
    fill_layer(shape.actions, shape.hidden);
    return MlpPolicy(shape, std::move(p));
}

MlpPolicy MlpPolicy::reference_init(MlpShape shape, std::uint64_t seed) {
    MlpPolicy policy = random_init(shape, seed);
    const std::size_t tail = static_cast<std::size_t>(shape.actions * shape.hidden + shape.actions);
    std::fill(policy.params_.end() - static_cast<std::ptrdiff_t>(tail), policy.params_.end(), 0.0);
    return policy;
}

namespace {

struct Layers {
    const double *w1, *b1, *w2, *b2, *w3, *b3;
};

Layers split(const MlpShape& s, const double* p) {
    Layers l;
    l.w1 = p;
    l.b1 = l.w1 + s.hidden * s.input_dim;
    l.w2 = l.b1 + s.hidden;
    l.b2 = l.w2 + s.hidden * s.hidden;
    l.w3 = l.b2 + s.hidden;
    l.b3 = l.w3 + s.actions * s.hidden;
    return l;
}

}  // namespace

std::vector<double> MlpPolicy::logits(const std::vector<double>& x) const {
    const MlpShape& s = shape_;
    if (x.size() != static_cast<std::size_t>(s.input_dim))
        throw std::invalid_argument("MlpPolicy: context has wrong dimension");
    const Layers l = split(s, params_.data());

    std::vector<double> a1(static_cast<std::size_t>(s.hidden));
    for (int i = 0; i < s.hidden; ++i) {
        double acc = l.b1[i];
        const double* row = l.w1 + i * s.input_dim;
        for (int j = 0; j < s.input_dim; ++j) acc += row[j] * x[static_cast<std::size_t>(j)];
        a1[static_cast<std::size_t>(i)] = acc > 0.0 ? acc : 0.0;
    }
    std::vector<double> a2(static_cast<std::size_t>(s.hidden));
    for (int i = 0; i < s.hidden; ++i) {
        double acc = l.b2[i];
        const double* row = l.w2 + i * s.hidden;
        for (int j = 0; j < s.hidden; ++j) acc += row[j] * a1[static_cast<std::size_t>(j)];
        a2[static_cast<std::size_t>(i)] = acc > 0.0 ? acc : 0.0;
    }
    std::vector<double> out(static_cast<std::size_t>(s.actions));
    for (int i = 0; i < s.actions; ++i) {
        double acc = l.b3[i];
        const double* row = l.w3 + i * s.hidden;
        for (int j = 0; j < s.hidden; ++j) acc += row[j] * a2[static_cast<std::size_t>(j)];
        out[static_cast<std::size_t>(i)] = acc;
    }
    return out;
}

std::vector<double> MlpPolicy::log_prob(const std::vector<double>& x) const {
    std::vector<double> out = logits(x);
    const double lse = logsumexp(out);
    for (double& v : out) v -= lse;
    return out;
}

GradientVector MlpPolicy::backward(const std::vector<double>& x,
                                   const std::vector<double>& upstream) const {
    const MlpShape& s = shape_;
    if (upstream.size() != static_cast<std::size_t>(s.actions))
        throw std::invalid_argument("MlpPolicy::backward: upstream has wrong length");
    const Layers l = split(s, params_.data());

    // forward with pre-activations kept for the ReLU masks
    std::vector<double> z1(static_cast<std::size_t>(s.hidden)), a1(z1.size());
    for (int i = 0; i < s.hidden; ++i) {
        double acc = l.b1[i];
        const double* row = l.w1 + i * s.input_dim;
        for (int j = 0; j < s.input_dim; ++j) acc += row[j] * x[static_cast<std::size_t>(j)];
        z1[static_cast<std::size_t>(i)] = acc;
        a1[static_cast<std::size_t>(i)] = acc > 0.0 ? acc : 0.0;
    }
    std::vector<double> z2(static_cast<std::size_t>(s.hidden)), a2(z2.size());
    for (int i = 0; i < s.hidden; ++i) {
        double acc = l.b2[i];
        const double* row = l.w2 + i * s.hidden;
        for (int j = 0; j < s.hidden; ++j) acc += row[j] * a1[static_cast<std::size_t>(j)];
        z2[static_cast<std::size_t>(i)] = acc;
        a2[static_cast<std::size_t>(i)] = acc > 0.0 ? acc : 0.0;
    }
    std::vector<double> logit(static_cast<std::size_t>(s.actions));
    for (int i = 0; i < s.actions; ++i) {
        double acc = l.b3[i];
        const double* row = l.w3 + i * s.hidden;
        for (int j = 0; j < s.hidden; ++j) acc += row[j] * a2[static_cast<std::size_t>(j)];
        logit[static_cast<std::size_t>(i)] = acc;
    }
    const double lse = logsumexp(logit);

    // d/dlogit_k of sum_y u_y log pi_y = u_k - (sum_y u_y) pi_k
    double usum = 0.0;
    for (double u : upstream) usum += u;
    std::vector<double> dlogit(static_cast<std::size_t>(s.actions));
    for (int k = 0; k < s.actions; ++k)
        dlogit[static_cast<std::size_t>(k)] =
            upstream[static_cast<std::size_t>(k)] -
            usum * std::exp(logit[static_cast<std::size_t>(k)] - lse);

    GradientVector grad(params_.size(), 0.0);
    double *gw1 = grad.data(), *gb1 = gw1 + s.hidden * s.input_dim, *gw2 = gb1 + s.hidden,
           *gb2 = gw2 + s.hidden * s.hidden, *gw3 = gb2 + s.hidden,
           *gb3 = gw3 + s.actions * s.hidden;

    std::vector<double> da2(static_cast<std::size_t>(s.hidden), 0.0);
    for (int i = 0; i < s.actions; ++i) {
        const double d = dlogit[static_cast<std::size_t>(i)];
        gb3[i] = d;
        double* grow = gw3 + i * s.hidden;
        const double* row = l.w3 + i * s.hidden;
        for (int j = 0; j < s.hidden; ++j) {
            grow[j] = d * a2[static_cast<std::size_t>(j)];
            da2[static_cast<std::size_t>(j)] += d * row[j];
        }
    }
    std::vector<double> da1(static_cast<std::size_t>(s.hidden), 0.0);
    for (int i = 0; i < s.hidden; ++i) {
        const double d = z2[static_cast<std::size_t>(i)] > 0.0 ? da2[static_cast<std::size_t>(i)] : 0.0;
        gb2[i] = d;
        double* grow = gw2 + i * s.hidden;
        const double* row = l.w2 + i * s.hidden;
        for (int j = 0; j < s.hidden; ++j) {
            grow[j] = d * a1[static_cast<std::size_t>(j)];
            da1[static_cast<std::size_t>(j)] += d * row[j];
        }
    }
    for (int i = 0; i < s.hidden; ++i) {
        const double d = z1[static_cast<std::size_t>(i)] > 0.0 ? da1[static_cast<std::size_t>(i)] : 0.0;
        gb1[i] = d;
        double* grow = gw1 + i * s.input_dim;
        for (int j = 0; j < s.input_dim; ++j) grow[j] = d * x[static_cast<std::size_t>(j)];
    }
    return grad;
}

double potential(const MlpPolicy& policy, const FDivergenceSpec& spec, const ProbabilityRow& ref,
                 const std::vector<double>& x, int y) {
    if (y < 0 || y >= ref.size()) throw std::invalid_argument("potential: action out of range");
    if (ref[y] <= 0.0) throw std::domain_error("potential: reference gives action zero mass");
    const std::vector<double> lp = policy.log_prob(x);
    const double logp = lp[static_cast<std::size_t>(y)];
    if (spec.kind() == DivergenceKind::KL) return logp - std::log(ref[y]);
    return spec.f_prime(std::exp(logp) / ref[y]);
}

std::vector<double> potential_row(const MlpPolicy& policy, const FDivergenceSpec& spec,
                                  const ProbabilityRow& ref, const std::vector<double>& x) {
    const std::vector<double> lp = policy.log_prob(x);
    std::vector<double> h(lp.size());
    for (int y = 0; y < ref.size(); ++y) {
        const std::size_t i = static_cast<std::size_t>(y);
        if (ref[y] <= 0.0) throw std::domain_error("potential_row: reference has a zero entry");
        h[i] = spec.kind() == DivergenceKind::KL ? lp[i] - std::log(ref[y])
                                                 : spec.f_prime(std::exp(lp[i]) / ref[y]);
    }
    return h;
}

double index_value(const MlpPolicy& policy, const FDivergenceSpec& spec, const ProbabilityRow& ref,
                   const PreferenceExample& example) {
    const std::vector<double> h = potential_row(policy, spec, ref, example.x);
    return h[static_cast<std::size_t>(example.y1)] - h[static_cast<std::size_t>(example.y0)];
}

void save_checkpoint(const MlpPolicy& policy, const std::string& path, std::uint64_t seed) {
    std::ofstream bin(path, std::ios::binary);
    if (!bin) throw std::runtime_error("cannot open checkpoint file for write: " + path);
    bin.write(reinterpret_cast<const char*>(policy.params().data()),
              static_cast<std::streamsize>(policy.params().size() * sizeof(double)));
    if (!bin) throw std::runtime_error("checkpoint write failed: " + path);

    nlohmann::json side;
    side["format"] = "spo-mlp-f64le";
    side["input_dim"] = policy.shape().input_dim;
    side["hidden"] = policy.shape().hidden;
    side["actions"] = policy.shape().actions;
    side["param_count"] = policy.shape().param_count();
    side["init_seed"] = seed;
    std::ofstream js(path + ".json");
    if (!js) throw std::runtime_error("cannot open checkpoint sidecar for write");
    js << side.dump(2) << "\n";
}

MlpPolicy load_checkpoint(const std::string& path) {
    std::ifstream js(path + ".json");
    if (!js) throw std::runtime_error("missing checkpoint sidecar: " + path + ".json");
    nlohmann::json side = nlohmann::json::parse(js);
    MlpShape shape;
    shape.input_dim = side.at("input_dim").get<int>();
    shape.hidden = side.at("hidden").get<int>();
    shape.actions = side.at("actions").get<int>();

    std::ifstream bin(path, std::ios::binary);
    if (!bin) throw std::runtime_error("missing checkpoint file: " + path);
    std::vector<double> params(static_cast<std::size_t>(shape.param_count()));
    bin.read(reinterpret_cast<char*>(params.data()),
             static_cast<std::streamsize>(params.size() * sizeof(double)));
    if (bin.gcount() != static_cast<std::streamsize>(params.size() * sizeof(double)))
        throw std::runtime_error("checkpoint truncated: " + path);
    return MlpPolicy(shape, std::move(params));
}

}  // namespace spo
