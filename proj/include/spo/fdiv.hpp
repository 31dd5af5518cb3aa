#pragma once

#include <string>
#include <vector>

namespace spo {

enum class DivergenceKind { KL, Alpha };

// Convex generator of an f-divergence, canonicalized so that f(1) = 0 and
// f'(1) = 0 (the affine shift f(u) - f'(1)(u-1) leaves D_f unchanged).
// Two families are supported:
//   KL        f(u) = u log u - u + 1
//   Alpha(a)  f(u) = (u^a - a u + a - 1) / (a (a - 1)),  a in (0, 1)
// Both are strictly convex with f'(0+) = -inf, which is what the tilted
// policy construction requires.
class FDivergenceSpec {
public:
    static FDivergenceSpec kl();
    static FDivergenceSpec alpha(double a);  // throws unless a in (0, 1)

    DivergenceKind kind() const { return kind_; }
    double alpha_param() const { return alpha_; }

    double f(double u) const;             // domain error if u <= 0
    double f_prime(double u) const;       // f', maps (0,inf) onto its range
    double f_prime_inv(double v) const;   // (f')^{-1}; +inf past the alpha range cap
    double f_double_prime(double u) const;
    double f_at_zero() const;             // lim_{u->0+} f(u), used by d_f for p(y)=0 terms

    // Config form: "kl" or {"alpha": 0.5} under the "divergence" key.
    std::string to_config_string() const;
    static FDivergenceSpec from_config_string(const std::string& text);

    bool operator==(const FDivergenceSpec& other) const {
        return kind_ == other.kind_ && alpha_ == other.alpha_;
    }

private:
    FDivergenceSpec(DivergenceKind kind, double a) : kind_(kind), alpha_(a) {}

    DivergenceKind kind_;
    double alpha_;
};

// Probability mass function over the finite action set.
struct ProbabilityRow {
    std::vector<double> values;

    // Validates entries >= 0 and sum within 1e-9 of 1.
    static ProbabilityRow validated(std::vector<double> v);
    static ProbabilityRow uniform(int n);

    int size() const { return static_cast<int>(values.size()); }
    double operator[](int i) const { return values[static_cast<std::size_t>(i)]; }
};

// D_f(p || q) = sum_{q(y)>0} q(y) f(p(y)/q(y)); +inf when p charges a q-null
// action.  The infinity is returned as an IEEE infinity set explicitly, not
// reached by overflow.
double d_f(const FDivergenceSpec& spec, const ProbabilityRow& p, const ProbabilityRow& q);

// Solves sum_y ref(y) (f')^{-1}((h(y) - lambda) / beta) = 1 for lambda by
// bisection on the strictly decreasing map F(lambda).  The bracket starts at
// [min h - beta C, max h + beta C] with C = 1 and doubles C until it
// straddles the root (capped at C = 2^40, after which the spec is treated as
// malformed).  Throws after 200 bisection iterations without |F| <= 1e-10.
double normalization_lambda(const FDivergenceSpec& spec, const std::vector<double>& h_row,
                            double beta, const ProbabilityRow& pi_ref);

// The beta-regularized tilt of pi_ref along the potential row h:
//   pi_beta(y) = pi_ref(y) (f')^{-1}((h(y) - lambda) / beta)
// with lambda from normalization_lambda.  Actions with pi_ref(y) = 0 stay at
// probability zero.
ProbabilityRow tilted_policy(const FDivergenceSpec& spec, const std::vector<double>& h_row,
                             double beta, const ProbabilityRow& pi_ref);

}  // namespace spo
