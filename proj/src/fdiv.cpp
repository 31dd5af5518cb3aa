#include "spo/fdiv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace spo {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

FDivergenceSpec FDivergenceSpec::kl() { return FDivergenceSpec(DivergenceKind::KL, 0.0); }

FDivergenceSpec FDivergenceSpec::alpha(double a) {
    if (!(a > 0.0 && a < 1.0))
        throw std::invalid_argument("alpha divergence requires alpha in (0,1), got " +
                                    std::to_string(a));
    return FDivergenceSpec(DivergenceKind::Alpha, a);
}

double FDivergenceSpec::f(double u) const {
    if (!(u > 0.0)) throw std::domain_error("f(u) requires u > 0");
    if (kind_ == DivergenceKind::KL) return u * std::log(u) - u + 1.0;
    const double a = alpha_;
    return (std::pow(u, a) - a * u + a - 1.0) / (a * (a - 1.0));
}

double FDivergenceSpec::f_prime(double u) const {
    if (!(u > 0.0)) throw std::domain_error("f'(u) requires u > 0");
    if (kind_ == DivergenceKind::KL) return std::log(u);
    return (std::pow(u, alpha_ - 1.0) - 1.0) / (alpha_ - 1.0);
}

double FDivergenceSpec::f_prime_inv(double v) const {
    if (kind_ == DivergenceKind::KL) return std::exp(v);
    // f' maps (0,inf) onto (-inf, 1/(1-alpha)); past the cap the preimage
    // escapes to +inf and we extend continuously.
    const double am1 = alpha_ - 1.0;
    const double base = 1.0 + am1 * v;
    if (!(base > 0.0)) return kInf;
    return std::pow(base, 1.0 / am1);
}

double FDivergenceSpec::f_double_prime(double u) const {
    if (!(u > 0.0)) throw std::domain_error("f''(u) requires u > 0");
    if (kind_ == DivergenceKind::KL) return 1.0 / u;
    return std::pow(u, alpha_ - 2.0);
}

double FDivergenceSpec::f_at_zero() const {
    if (kind_ == DivergenceKind::KL) return 1.0;
    return 1.0 / alpha_;
}

std::string FDivergenceSpec::to_config_string() const {
    if (kind_ == DivergenceKind::KL) return "kl";
    return "alpha:" + std::to_string(alpha_);
}

FDivergenceSpec FDivergenceSpec::from_config_string(const std::string& text) {
    if (text == "kl" || text == "KL") return kl();
    const std::string prefix = "alpha:";
    if (text.rfind(prefix, 0) == 0) return alpha(std::stod(text.substr(prefix.size())));
    throw std::invalid_argument("unknown divergence spec: " + text);
}

ProbabilityRow ProbabilityRow::validated(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("probability row must be non-empty");
    double sum = 0.0;
    for (double p : v) {
        if (!(p >= 0.0)) throw std::invalid_argument("probability row has a negative entry");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("probability row sums to " + std::to_string(sum));
    ProbabilityRow row;
    row.values = std::move(v);
    return row;
}

ProbabilityRow ProbabilityRow::uniform(int n) {
    if (n <= 0) throw std::invalid_argument("uniform row needs n >= 1");
    ProbabilityRow row;
    row.values.assign(static_cast<std::size_t>(n), 1.0 / n);
    return row;
}

double d_f(const FDivergenceSpec& spec, const ProbabilityRow& p, const ProbabilityRow& q) {
    if (p.size() != q.size()) throw std::invalid_argument("d_f: mismatched row sizes");
    double total = 0.0;
    for (int y = 0; y < p.size(); ++y) {
        if (q[y] <= 0.0) {
            if (p[y] > 0.0) return kInf;
            continue;
        }
        const double r = p[y] / q[y];
        total += q[y] * (r > 0.0 ? spec.f(r) : spec.f_at_zero());
    }
    return total;
}

namespace {

// F(lambda) = sum_y ref(y) g((h(y)-lambda)/beta) - 1, strictly decreasing.
double normalization_gap(const FDivergenceSpec& spec, const std::vector<double>& h,
                         double beta, const ProbabilityRow& ref, double lambda) {
    double sum = 0.0;
    for (int y = 0; y < ref.size(); ++y) {
        if (ref[y] <= 0.0) continue;
        sum += ref[y] * spec.f_prime_inv((h[static_cast<std::size_t>(y)] - lambda) / beta);
        if (sum == kInf) return kInf;
    }
    return sum - 1.0;
}

}  // namespace

double normalization_lambda(const FDivergenceSpec& spec, const std::vector<double>& h_row,
                            double beta, const ProbabilityRow& pi_ref) {
    if (!(beta > 0.0)) throw std::invalid_argument("normalization_lambda: beta must be > 0");
    if (h_row.size() != static_cast<std::size_t>(pi_ref.size()))
        throw std::invalid_argument("normalization_lambda: h row / ref size mismatch");
    bool any_support = false;
    double h_min = kInf, h_max = -kInf;
    for (int y = 0; y < pi_ref.size(); ++y) {
        if (pi_ref[y] <= 0.0) continue;
        any_support = true;
        const double h = h_row[static_cast<std::size_t>(y)];
        if (!std::isfinite(h))
            throw std::invalid_argument("normalization_lambda: potentials must be finite");
        h_min = std::min(h_min, h);
        h_max = std::max(h_max, h);
    }
    if (!any_support)
        throw std::invalid_argument("normalization_lambda: reference row has no support");

    // Since g(0) = 1 the root lies in [min h, max h]; the widened bracket with
    // geometric growth guards against a malformed generator anyway.
    double c = 1.0;
    double lo = h_min - beta * c;
    double hi = h_max + beta * c;
    while (!(normalization_gap(spec, h_row, beta, pi_ref, lo) > 0.0 &&
             normalization_gap(spec, h_row, beta, pi_ref, hi) < 0.0)) {
        c *= 2.0;
        if (c > 0x1p40)
            throw std::runtime_error("normalization_lambda: could not bracket the root");
        lo = h_min - beta * c;
        hi = h_max + beta * c;
    }

    double mid = 0.5 * (lo + hi);
    for (int iter = 0; iter < 200; ++iter) {
        mid = 0.5 * (lo + hi);
        const double gap = normalization_gap(spec, h_row, beta, pi_ref, mid);
        if (gap > 0.0)
            lo = mid;
        else
            hi = mid;
        if (hi - lo <= 1e-15 * std::max(1.0, std::abs(mid))) break;
    }
    mid = 0.5 * (lo + hi);
    if (std::abs(normalization_gap(spec, h_row, beta, pi_ref, mid)) > 1e-10)
        throw std::runtime_error("normalization_lambda: bisection failed to converge");
    return mid;
}

ProbabilityRow tilted_policy(const FDivergenceSpec& spec, const std::vector<double>& h_row,
                             double beta, const ProbabilityRow& pi_ref) {
    const double lambda = normalization_lambda(spec, h_row, beta, pi_ref);
    std::vector<double> out(h_row.size(), 0.0);
    for (int y = 0; y < pi_ref.size(); ++y) {
        if (pi_ref[y] <= 0.0) continue;
        const std::size_t i = static_cast<std::size_t>(y);
        out[i] = pi_ref[y] * spec.f_prime_inv((h_row[i] - lambda) / beta);
    }
    return ProbabilityRow::validated(std::move(out));
}

}  // namespace spo
