#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

namespace spo {

// Nondecreasing step function fitted by PAVA.  Breakpoints are the sorted
// unique index values seen at fit time; values are clipped into
// [1e-6, 1 - 1e-6].
class MonotoneLink {
public:
    MonotoneLink() = default;
    MonotoneLink(std::vector<double> breakpoints, std::vector<double> values);

    bool fitted() const { return !breakpoints_.empty(); }
    const std::vector<double>& breakpoints() const { return breakpoints_; }
    const std::vector<double>& values() const { return values_; }

    // Step-function value: constant extension below the first and above the
    // last breakpoint, right-continuous in between.
    double eval_hard(double u) const;

    // Differentiable evaluation: distance-softmax interpolation over the
    // breakpoints (temperature 0.1) mixed with a 5% logistic term, clipped to
    // [1e-6, 1 - 1e-6].
    double eval_soft(double u) const;
    // eval_soft value and its derivative in u (zero where the clip binds).
    void eval_soft_grad(double u, double& value, double& dvalue_du) const;

    // CSV dump (breakpoint, value) for plotting the recovered link.
    void to_csv(std::ostream& out) const;

private:
    std::vector<double> breakpoints_;
    std::vector<double> values_;
};

// Weighted least-squares isotonic fit of z on u (which for binary z also
// maximizes the Bernoulli profile likelihood over monotone links after
// clipping).  Exact ties in u are pooled into one weighted point before the
// PAVA sweep.  Empty weights mean unit weights.
MonotoneLink pava_fit(const std::vector<std::pair<double, double>>& points,
                      const std::vector<double>& weights = {});

enum class LinkEvalMode { Hard, Soft };
double link_eval(const MonotoneLink& link, double u, LinkEvalMode mode);

enum class KernelKind { Gaussian, Epanechnikov };

// Ring buffer of recent (index, label) pairs used by the OSPO plug-in
// regression.  Entries carry the dataset id of the originating example so
// leave-one-out evaluation can exclude every stored snapshot of it.
class KernelBank {
public:
    KernelBank(std::size_t capacity, KernelKind kernel, double bandwidth_factor);

    void push(double t, double z, std::int64_t id);
    std::size_t size() const { return entries_.size(); }
    std::size_t capacity() const { return capacity_; }
    KernelKind kernel() const { return kernel_; }
    double bandwidth_factor() const { return bandwidth_factor_; }

    struct Entry {
        double t;
        double z;
        std::int64_t id;
    };
    const std::vector<Entry>& entries() const { return entries_; }

    // Population standard deviation of the stored index values.
    double index_stddev() const;

private:
    std::size_t capacity_;
    KernelKind kernel_;
    double bandwidth_factor_;
    std::vector<Entry> entries_;
    std::size_t next_slot_ = 0;  // ring position once full
};

// Raw Nadaraya-Watson regression of z on the stored indices at query u, with
// bandwidth b = factor * stddev(stored indices).  Entries whose id equals
// `exclude_id` are left out (pass a negative id to keep everything).  Falls
// back to the mean stored label when the kernel mass vanishes or the bank
// indices are degenerate.
double nw_regress_raw(const KernelBank& bank, double u, std::int64_t exclude_id = -1);

// Guarded value used by the OSPO loss: 0.95 * clip(raw, 1e-4, 1 - 1e-4)
// + 0.05 * sigmoid(u).
double nw_regress(const KernelBank& bank, double u, std::int64_t exclude_id = -1);

// nw_regress value together with its derivative in the query argument; bank
// contents are treated as constants.
void nw_regress_grad(const KernelBank& bank, double u, std::int64_t exclude_id, double& value,
                     double& dvalue_du);

double sigmoid(double u);

}  // namespace spo
