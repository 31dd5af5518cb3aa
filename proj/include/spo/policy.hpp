#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spo/fdiv.hpp"

namespace spo {

struct PreferenceExample;

using GradientVector = std::vector<double>;

struct MlpShape {
    int input_dim = 20;
    int hidden = 32;   // two hidden layers of this width, ReLU
    int actions = 10;

    int param_count() const {
        return hidden * input_dim + hidden + hidden * hidden + hidden + actions * hidden + actions;
    }
    bool operator==(const MlpShape& o) const {
        return input_dim == o.input_dim && hidden == o.hidden && actions == o.actions;
    }
};

// Softmax policy over a finite action set, backed by a two-hidden-layer MLP.
// Parameters live in one flat vector (W1, b1, W2, b2, W3, b3) so the Adam
// loop and finite-difference oracles stay architecture-agnostic.
class MlpPolicy {
public:
    MlpPolicy(MlpShape shape, std::vector<double> params);

    // Per-layer uniform init on [-1/sqrt(fan_in), +1/sqrt(fan_in)].
    static MlpPolicy random_init(MlpShape shape, std::uint64_t seed);
    // Zero output layer: logits identically zero, so the policy starts at the
    // uniform reference (zero potential).  Hidden layers are random.
    static MlpPolicy reference_init(MlpShape shape, std::uint64_t seed);

    const MlpShape& shape() const { return shape_; }
    const std::vector<double>& params() const { return params_; }
    std::vector<double>& mutable_params() { return params_; }

    std::vector<double> logits(const std::vector<double>& x) const;
    // log pi(y|x) for all y; exp of the row sums to 1.
    std::vector<double> log_prob(const std::vector<double>& x) const;

    // Gradient of sum_y upstream[y] * log pi(y|x) with respect to the flat
    // parameter vector.  Exact reverse mode; recomputes the forward pass.
    GradientVector backward(const std::vector<double>& x,
                            const std::vector<double>& upstream) const;

private:
    MlpShape shape_;
    std::vector<double> params_;
};

// h_theta(x,y) = f'(pi_theta(y|x) / pi_ref(y)); the log policy ratio under KL.
double potential(const MlpPolicy& policy, const FDivergenceSpec& spec, const ProbabilityRow& ref,
                 const std::vector<double>& x, int y);

// Whole potential row h_theta(x, .) from one forward pass.
std::vector<double> potential_row(const MlpPolicy& policy, const FDivergenceSpec& spec,
                                  const ProbabilityRow& ref, const std::vector<double>& x);

// t_theta(w) = h_theta(x, y1) - h_theta(x, y0).
double index_value(const MlpPolicy& policy, const FDivergenceSpec& spec, const ProbabilityRow& ref,
                   const PreferenceExample& example);

// Checkpoint: flat little-endian float64 array at `path`, shape header in a
// JSON sidecar at `path + ".json"`.
void save_checkpoint(const MlpPolicy& policy, const std::string& path, std::uint64_t seed);
MlpPolicy load_checkpoint(const std::string& path);

double logsumexp(const std::vector<double>& v);

}  // namespace spo
