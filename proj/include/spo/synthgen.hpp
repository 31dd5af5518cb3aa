#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spo/fdiv.hpp"
#include "spo/policy.hpp"
#include "spo/preference.hpp"

namespace spo {

// Synthetic preference universe: Gaussian contexts, uniform reference over a
// finite action set, a fixed teacher policy, and the shifted-mixture link.
// The reward is r(x,y) = reward_scale * log(pi_teacher(y|x) / pi_ref(y)).
struct SyntheticWorld {
    int context_dim = 20;
    int num_actions = 10;
    double reward_scale = 10.0;
    double link_shift = 0.0;
    double link_slope = 4.0;
    std::uint64_t seed = 0;
    MlpPolicy teacher;
    ProbabilityRow reference;

    double reward(const std::vector<double>& x, int y) const;
    std::vector<double> reward_row(const std::vector<double>& x) const;
    // True potential h*(x,.) = log(pi_teacher / pi_ref); the ground truth the
    // rho metric compares against.
    std::vector<double> true_potential_row(const std::vector<double>& x) const;
};

// Even mixture of two shifted logistic links with slope 4:
//   g(u) = 0.5 s(4(u - shift)) + 0.5 s(4(u + shift))
// Symmetric: g(u) + g(-u) = 1; shift 0 recovers the plain logistic link.
double link_mixture(double u, double shift, double slope = 4.0);

SyntheticWorld gen_world(std::uint64_t seed, double link_shift = 0.0, int context_dim = 20,
                         int num_actions = 10, int hidden = 32);

// n preference examples: x ~ N(0, I), y0 and y1 independent uniform, and
// z ~ Bernoulli(g(r(x,y1) - r(x,y0))).  Deterministic in (world, n, seed).
// Debug mode records the reward gap on each example.
Dataset gen_dataset(const SyntheticWorld& world, int n, std::uint64_t seed, bool debug = false);

// Fresh evaluation contexts x ~ N(0, I_d).
std::vector<std::vector<double>> gen_contexts(int count, int dim, std::uint64_t seed);

// Dataset file pair: CSV (header x_1..x_d, y0, y1, z) plus a JSON metadata
// sidecar carrying seed, shift, n, and the teacher checkpoint path.
void save_dataset_csv(const Dataset& data, int context_dim, const std::string& path);
Dataset load_dataset_csv(const std::string& path);
void save_dataset_metadata(const SyntheticWorld& world, int n, std::uint64_t data_seed,
                           const std::string& teacher_checkpoint, const std::string& path);

}  // namespace spo
