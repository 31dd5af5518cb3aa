#pragma once

#include <functional>
#include <vector>

#include "spo/fdiv.hpp"
#include "spo/policy.hpp"
#include "spo/synthgen.hpp"

namespace spo {

struct ParetoPoint {
    double beta = 0.0;
    double mean_reward = 0.0;
    double mean_divergence = 0.0;
};

struct RhoReport {
    double rho = 0.0;
    double best_scale = 0.0;        // optimal a, clamped to >= 1e-12
    bool centering_applied = true;  // inner inf over b(x) solved per context
};

// Evaluates a potential row h(x, .) on a context.
using PotentialEvaluator = std::function<std::vector<double>(const std::vector<double>& x)>;

// Monte-Carlo scale- and per-context-location-invariant index error:
//   rho(h)^2 = inf_{a > 0} mean_x inf_b sum_y ref(y) (a h(x,y) - b - h*(x,y))^2
// The inner infimum is the ref-weighted per-context centering; the outer one
// is a 1-D quadratic solved in closed form, with a negative unconstrained
// optimum clamped to the 1e-12 floor (the a > 0 infimum is then approached at
// the floor).
RhoReport rho_metric(const PotentialEvaluator& h, const PotentialEvaluator& h_star,
                     const ProbabilityRow& ref, const std::vector<std::vector<double>>& contexts);

enum class AucOrientation { Conditional, Symmetric };

// Empirical AUC with half-credit ties.
//   Conditional: mean over (z=0, z=1) pairs of phi(t_j - t_i)     (needs both classes)
//   Symmetric:   mean over all ordered pairs of phi(s_i + s_j), s the z-oriented index
// Sort-based; exactly matches pairwise enumeration because wins and ties are
// counted in integers before the single division.
double empirical_auc(const std::vector<double>& index_values, const std::vector<int>& labels,
                     AucOrientation orientation);

// Reward/divergence frontier over the beta grid (strictly positive,
// ascending).  flip_sign applies the OSPO alignment before tilting.
std::vector<ParetoPoint> pareto_curve(const MlpPolicy& policy, const SyntheticWorld& world,
                                      const FDivergenceSpec& spec,
                                      const std::vector<std::vector<double>>& contexts,
                                      const std::vector<double>& beta_grid,
                                      bool flip_sign = false);

struct BudgetReward {
    double reward = 0.0;
    bool clamped = false;  // kappa outside the measured range, nearest point used
};

// Reward at divergence budget kappa: linear interpolation in divergence
// between the two grid points with divergence closest to kappa (ties toward
// smaller beta); nearest point with the flag set when kappa is out of range.
BudgetReward reward_at_budget(const std::vector<ParetoPoint>& curve, double kappa);

}  // namespace spo
