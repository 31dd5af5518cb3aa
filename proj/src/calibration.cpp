#include "spo/calibration.hpp"

#include <cmath>

namespace spo {

namespace {
constexpr double kBracketFloor = 1e-3;
constexpr double kBracketCeil = 1e6;
constexpr double kDivergenceTol = 1e-6;

std::vector<double> signed_potential(const MlpPolicy& policy, const FDivergenceSpec& spec,
                                     const ProbabilityRow& ref, const std::vector<double>& x,
                                     bool flip_sign) {
    std::vector<double> h = potential_row(policy, spec, ref, x);
    if (flip_sign)
        for (double& v : h) v = -v;
    return h;
}

}  // namespace

double divergence_at(const MlpPolicy& policy, const ProbabilityRow& ref,
                     const FDivergenceSpec& spec,
                     const std::vector<std::vector<double>>& contexts, double beta,
                     bool flip_sign) {
    if (!(beta > 0.0)) throw std::invalid_argument("divergence_at: beta must be > 0");
    if (contexts.empty()) throw std::invalid_argument("divergence_at: need at least one context");
    double total = 0.0;
    for (const std::vector<double>& x : contexts) {
        const std::vector<double> h = signed_potential(policy, spec, ref, x, flip_sign);
        total += d_f(spec, tilted_policy(spec, h, beta, ref), ref);
    }
    return total / static_cast<double>(contexts.size());
}

CalibrationResult calibrate_beta(const MlpPolicy& policy, const ProbabilityRow& ref,
                                 const FDivergenceSpec& spec,
                                 const std::vector<std::vector<double>>& contexts, double kappa,
                                 double bracket_lo, double bracket_hi, bool flip_sign) {
    if (!(kappa > 0.0)) throw std::invalid_argument("calibrate_beta: kappa must be > 0");
    if (contexts.empty()) throw std::invalid_argument("calibrate_beta: need at least one context");
    if (!(bracket_lo > 0.0 && bracket_hi > bracket_lo))
        throw std::invalid_argument("calibrate_beta: malformed bracket");

    double lo = std::max(bracket_lo, kBracketFloor);
    double hi = std::min(bracket_hi, kBracketCeil);
    auto phi = [&](double beta) { return divergence_at(policy, ref, spec, contexts, beta, flip_sign); };

    double phi_lo = phi(lo);
    while (phi_lo <= kappa && lo > kBracketFloor) {
        lo = std::max(lo / 10.0, kBracketFloor);
        phi_lo = phi(lo);
    }
    double phi_hi = phi(hi);
    while (phi_hi >= kappa && hi < kBracketCeil) {
        hi = std::min(hi * 10.0, kBracketCeil);
        phi_hi = phi(hi);
    }

    CalibrationResult result;
    result.bracket_lo = lo;
    result.bracket_hi = hi;
    result.context_count = static_cast<int>(contexts.size());

    if (phi_lo <= kappa) {
        // Even the most aggressive tilt stays inside the budget.  Distinguish
        // a degenerate potential (v = mean ref-variance of h is zero, budget
        // can never bind) from a merely slack constraint.
        double v = 0.0;
        for (const std::vector<double>& x : contexts) {
            const std::vector<double> h = signed_potential(policy, spec, ref, x, flip_sign);
            double mean = 0.0;
            for (int y = 0; y < ref.size(); ++y) mean += ref[y] * h[static_cast<std::size_t>(y)];
            for (int y = 0; y < ref.size(); ++y) {
                const double d = h[static_cast<std::size_t>(y)] - mean;
                v += ref[y] * d * d;
            }
        }
        v /= static_cast<double>(contexts.size());
        if (v < 1e-12)
            throw BudgetUnattainableError(
                "calibrate_beta: potential has no variation under the reference; "
                "the divergence budget cannot bind");
        result.beta_hat = lo;
        result.achieved_divergence = phi_lo;
        result.pinned_at_floor = true;
        return result;
    }

    // Divergence is continuous and strictly decreasing in beta, so bisection
    // (in log beta, the bracket spans decades) converges to the unique root.
    double log_lo = std::log(lo), log_hi = std::log(hi);
    double beta = std::exp(0.5 * (log_lo + log_hi));
    double achieved = phi(beta);
    for (int iter = 0; iter < 100 && std::abs(achieved - kappa) > kDivergenceTol; ++iter) {
        if (achieved > kappa)
            log_lo = std::log(beta);
        else
            log_hi = std::log(beta);
        beta = std::exp(0.5 * (log_lo + log_hi));
        achieved = phi(beta);
    }
    result.beta_hat = beta;
    result.achieved_divergence = achieved;
    return result;
}

}  // namespace spo
