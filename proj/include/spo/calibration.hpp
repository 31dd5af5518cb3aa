#pragma once

#include <stdexcept>
#include <vector>

#include "spo/fdiv.hpp"
#include "spo/policy.hpp"

namespace spo {

struct CalibrationResult {
    double beta_hat = 0.0;
    double achieved_divergence = 0.0;
    double bracket_lo = 0.0;  // bracket after automatic expansion
    double bracket_hi = 0.0;
    int context_count = 0;
    // Set when the budget was slack even at the bracket floor and beta_hat is
    // pinned there instead of solving the root.
    bool pinned_at_floor = false;
};

// Raised when the divergence budget cannot bind because the potential has no
// variation under the reference (the v > 0 proviso).
struct BudgetUnattainableError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Mean over contexts of D_f(tilted_policy(h(x,.), beta) || pi_ref).  The
// potential is negated first when flip_sign is set (OSPO sign alignment).
double divergence_at(const MlpPolicy& policy, const ProbabilityRow& ref,
                     const FDivergenceSpec& spec,
                     const std::vector<std::vector<double>>& contexts, double beta,
                     bool flip_sign = false);

// Root-finds beta so the mean divergence hits kappa.  The supplied bracket is
// expanded geometrically (factor 10) until it straddles kappa, capped at
// [1e-3, 1e6]; bisection then runs in log beta until
// |divergence - kappa| <= 1e-6 or 100 iterations.  Throws
// BudgetUnattainableError for a degenerate potential; a non-degenerate
// potential whose divergence never reaches kappa pins beta at the bracket
// floor with the warning flag set.
CalibrationResult calibrate_beta(const MlpPolicy& policy, const ProbabilityRow& ref,
                                 const FDivergenceSpec& spec,
                                 const std::vector<std::vector<double>>& contexts, double kappa,
                                 double bracket_lo = 0.05, double bracket_hi = 20.0,
                                 bool flip_sign = false);

}  // namespace spo
