#include "spo/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace spo {

RhoReport rho_metric(const PotentialEvaluator& h, const PotentialEvaluator& h_star,
                     const ProbabilityRow& ref, const std::vector<std::vector<double>>& contexts) {
    if (contexts.empty()) throw std::invalid_argument("rho_metric: need at least one context");
    const double inv_m = 1.0 / static_cast<double>(contexts.size());

    // With per-context ref-weighted centering applied to both potentials the
    // objective is quadratic in a: a^2 S_hh - 2 a S_hs + S_ss.
    double s_hh = 0.0, s_hs = 0.0, s_ss = 0.0;
    for (const std::vector<double>& x : contexts) {
        const std::vector<double> hv = h(x);
        const std::vector<double> sv = h_star(x);
        if (hv.size() != static_cast<std::size_t>(ref.size()) || sv.size() != hv.size())
            throw std::invalid_argument("rho_metric: potential row size mismatch");
        double mean_h = 0.0, mean_s = 0.0;
        for (int y = 0; y < ref.size(); ++y) {
            mean_h += ref[y] * hv[static_cast<std::size_t>(y)];
            mean_s += ref[y] * sv[static_cast<std::size_t>(y)];
        }
        for (int y = 0; y < ref.size(); ++y) {
            const double ch = hv[static_cast<std::size_t>(y)] - mean_h;
            const double cs = sv[static_cast<std::size_t>(y)] - mean_s;
            s_hh += inv_m * ref[y] * ch * ch;
            s_hs += inv_m * ref[y] * ch * cs;
            s_ss += inv_m * ref[y] * cs * cs;
        }
    }

    constexpr double kFloor = 1e-12;
    double a = s_hh > 0.0 ? s_hs / s_hh : kFloor;
    if (a < kFloor) a = kFloor;  // anti-aligned or degenerate: infimum at the floor
    const double sq = std::max(a * a * s_hh - 2.0 * a * s_hs + s_ss, 0.0);
    return RhoReport{std::sqrt(sq), a, true};
}

namespace {

// phi(u) = 1{u > 0} + 0.5 * 1{u == 0}, accumulated as integers: for each a in
// `pos` count b in `neg` with a > b (wins) and a == b (ties).  Both inputs get
// sorted.  The caller divides (2*wins + ties) by 2*N once, matching the
// enumeration oracle's float ops exactly.
void count_wins_ties(std::vector<double>& pos, std::vector<double>& neg, long long& wins,
                     long long& ties) {
    std::sort(pos.begin(), pos.end());
    std::sort(neg.begin(), neg.end());
    wins = 0;
    ties = 0;
    for (double a : pos) {
        const auto lt = std::lower_bound(neg.begin(), neg.end(), a) - neg.begin();
        const auto le = std::upper_bound(neg.begin(), neg.end(), a) - neg.begin();
        wins += lt;
        ties += le - lt;
    }
}

}  // namespace

double empirical_auc(const std::vector<double>& index_values, const std::vector<int>& labels,
                     AucOrientation orientation) {
    if (index_values.size() != labels.size() || index_values.empty())
        throw std::invalid_argument("empirical_auc: size mismatch or empty input");

    if (orientation == AucOrientation::Conditional) {
        std::vector<double> pos, neg;
        for (std::size_t i = 0; i < labels.size(); ++i)
            (labels[i] == 1 ? pos : neg).push_back(index_values[i]);
        if (pos.empty() || neg.empty())
            throw std::invalid_argument("empirical_auc: conditional mode needs both classes");
        long long wins, ties;
        count_wins_ties(pos, neg, wins, ties);
        const double total = static_cast<double>(wins) + 0.5 * static_cast<double>(ties);
        return total / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
    }

    // symmetric: phi(s_i + s_j) over all ordered pairs = count s_i > -s_j
    std::vector<double> oriented(index_values.size()), negated(index_values.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        oriented[i] = labels[i] == 1 ? index_values[i] : -index_values[i];
        negated[i] = -oriented[i];
    }
    long long wins, ties;
    count_wins_ties(oriented, negated, wins, ties);
    const double n = static_cast<double>(index_values.size());
    return (static_cast<double>(wins) + 0.5 * static_cast<double>(ties)) / (n * n);
}

std::vector<ParetoPoint> pareto_curve(const MlpPolicy& policy, const SyntheticWorld& world,
                                      const FDivergenceSpec& spec,
                                      const std::vector<std::vector<double>>& contexts,
                                      const std::vector<double>& beta_grid, bool flip_sign) {
    if (contexts.empty()) throw std::invalid_argument("pareto_curve: need contexts");
    if (beta_grid.empty()) throw std::invalid_argument("pareto_curve: empty beta grid");
    for (std::size_t i = 0; i < beta_grid.size(); ++i) {
        if (!(beta_grid[i] > 0.0))
            throw std::invalid_argument("pareto_curve: beta grid must be strictly positive");
        if (i > 0 && !(beta_grid[i] > beta_grid[i - 1]))
            throw std::invalid_argument("pareto_curve: beta grid must be ascending");
    }

    const double inv_m = 1.0 / static_cast<double>(contexts.size());
    std::vector<ParetoPoint> curve(beta_grid.size());
    for (std::size_t b = 0; b < beta_grid.size(); ++b) curve[b].beta = beta_grid[b];

    for (const std::vector<double>& x : contexts) {
        std::vector<double> h = potential_row(policy, spec, world.reference, x);
        if (flip_sign)
            for (double& v : h) v = -v;
        const std::vector<double> r = world.reward_row(x);
        for (std::size_t b = 0; b < beta_grid.size(); ++b) {
            const ProbabilityRow tilt = tilted_policy(spec, h, beta_grid[b], world.reference);
            double reward = 0.0;
            for (int y = 0; y < world.num_actions; ++y)
                reward += tilt[y] * r[static_cast<std::size_t>(y)];
            curve[b].mean_reward += inv_m * reward;
            curve[b].mean_divergence += inv_m * d_f(spec, tilt, world.reference);
        }
    }
    return curve;
}

BudgetReward reward_at_budget(const std::vector<ParetoPoint>& curve, double kappa) {
    if (curve.empty()) throw std::invalid_argument("reward_at_budget: empty curve");
    double div_min = curve.front().mean_divergence, div_max = div_min;
    for (const ParetoPoint& p : curve) {
        div_min = std::min(div_min, p.mean_divergence);
        div_max = std::max(div_max, p.mean_divergence);
    }

    // closest two points in measured divergence; ties toward smaller beta
    std::size_t best = 0, second = curve.size() > 1 ? 1 : 0;
    auto closer = [&](std::size_t a, std::size_t b) {
        const double da = std::abs(curve[a].mean_divergence - kappa);
        const double db = std::abs(curve[b].mean_divergence - kappa);
        return da < db || (da == db && curve[a].beta < curve[b].beta);
    };
    if (curve.size() > 1 && closer(second, best)) std::swap(best, second);
    for (std::size_t i = 2; i < curve.size(); ++i) {
        if (closer(i, best)) {
            second = best;
            best = i;
        } else if (closer(i, second)) {
            second = i;
        }
    }

    if (kappa < div_min || kappa > div_max)
        return BudgetReward{curve[best].mean_reward, true};

    const double d1 = curve[best].mean_divergence, d2 = curve[second].mean_divergence;
    const double r1 = curve[best].mean_reward, r2 = curve[second].mean_reward;
    if (d1 == d2) return BudgetReward{r1, false};
    return BudgetReward{r1 + (kappa - d1) * (r2 - r1) / (d2 - d1), false};
}

}  // namespace spo
