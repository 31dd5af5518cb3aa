#include "spo/link_estimation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace spo {

namespace {
constexpr double kLinkClip = 1e-6;
constexpr double kKernelClip = 1e-4;
constexpr double kSoftTemperature = 0.1;
constexpr double kLogisticMix = 0.05;
}  // namespace

double sigmoid(double u) {
    if (u >= 0.0) {
        const double e = std::exp(-u);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(u);
    return e / (1.0 + e);
}

MonotoneLink::MonotoneLink(std::vector<double> breakpoints, std::vector<double> values)
    : breakpoints_(std::move(breakpoints)), values_(std::move(values)) {
    if (breakpoints_.size() != values_.size())
        throw std::invalid_argument("MonotoneLink: breakpoint/value length mismatch");
    for (std::size_t i = 1; i < breakpoints_.size(); ++i) {
        if (breakpoints_[i] < breakpoints_[i - 1])
            throw std::invalid_argument("MonotoneLink: breakpoints not sorted");
        if (values_[i] < values_[i - 1])
            throw std::invalid_argument("MonotoneLink: values not nondecreasing");
    }
}

double MonotoneLink::eval_hard(double u) const {
    if (!fitted()) throw std::logic_error("MonotoneLink: evaluated before fitting");
    if (u <= breakpoints_.front()) return values_.front();
    if (u >= breakpoints_.back()) return values_.back();
    // last breakpoint <= u
    const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), u);
    const std::size_t idx = static_cast<std::size_t>(it - breakpoints_.begin()) - 1;
    return values_[idx];
}

void MonotoneLink::eval_soft_grad(double u, double& value, double& dvalue_du) const {
    if (!fitted()) throw std::logic_error("MonotoneLink: evaluated before fitting");
    const std::size_t k = breakpoints_.size();

    // softmax over -|u - u_j| / tau, stabilized by the max score
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j)
        best = std::max(best, -std::abs(u - breakpoints_[j]) / kSoftTemperature);
    double wsum = 0.0, vsum = 0.0, dsum = 0.0, dvsum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        const double gap = u - breakpoints_[j];
        const double score = -std::abs(gap) / kSoftTemperature;
        const double w = std::exp(score - best);
        const double dscore = (gap > 0.0 ? -1.0 : gap < 0.0 ? 1.0 : 0.0) / kSoftTemperature;
        wsum += w;
        vsum += w * values_[j];
        dsum += w * dscore;
        dvsum += w * dscore * values_[j];
    }
    const double interp = vsum / wsum;
    // d interp/du via the softmax quotient rule
    const double dinterp = dvsum / wsum - interp * (dsum / wsum);

    const double sig = sigmoid(u);
    const double raw = (1.0 - kLogisticMix) * interp + kLogisticMix * sig;
    if (raw <= kLinkClip) {
        value = kLinkClip;
        dvalue_du = 0.0;
    } else if (raw >= 1.0 - kLinkClip) {
        value = 1.0 - kLinkClip;
        dvalue_du = 0.0;
    } else {
        value = raw;
        dvalue_du = (1.0 - kLogisticMix) * dinterp + kLogisticMix * sig * (1.0 - sig);
    }
}

double MonotoneLink::eval_soft(double u) const {
    double value, grad;
    eval_soft_grad(u, value, grad);
    return value;
}

void MonotoneLink::to_csv(std::ostream& out) const {
    out << "breakpoint,value\n";
    for (std::size_t i = 0; i < breakpoints_.size(); ++i)
        out << breakpoints_[i] << "," << values_[i] << "\n";
}

double link_eval(const MonotoneLink& link, double u, LinkEvalMode mode) {
    return mode == LinkEvalMode::Hard ? link.eval_hard(u) : link.eval_soft(u);
}

MonotoneLink pava_fit(const std::vector<std::pair<double, double>>& points,
                      const std::vector<double>& weights) {
    if (points.empty()) throw std::invalid_argument("pava_fit: empty input");
    if (!weights.empty() && weights.size() != points.size())
        throw std::invalid_argument("pava_fit: weight length mismatch");
    for (double w : weights)
        if (!(w > 0.0)) throw std::invalid_argument("pava_fit: weights must be positive");

    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return points[a].first < points[b].first; });

    // pool exact ties in u so the fit is a function of u
    std::vector<double> u, y, w;
    for (std::size_t idx : order) {
        const double ui = points[idx].first;
        const double yi = points[idx].second;
        const double wi = weights.empty() ? 1.0 : weights[idx];
        if (!u.empty() && ui == u.back()) {
            y.back() = (y.back() * w.back() + yi * wi) / (w.back() + wi);
            w.back() += wi;
        } else {
            u.push_back(ui);
            y.push_back(yi);
            w.push_back(wi);
        }
    }

    // PAVA sweep: blocks of (weighted mean, weight, extent)
    const std::size_t n = u.size();
    std::vector<double> mean(n), weight(n);
    std::vector<std::size_t> count(n);
    std::size_t top = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mean[top] = y[i];
        weight[top] = w[i];
        count[top] = 1;
        ++top;
        while (top > 1 && mean[top - 2] >= mean[top - 1]) {
            const double tw = weight[top - 2] + weight[top - 1];
            mean[top - 2] = (mean[top - 2] * weight[top - 2] + mean[top - 1] * weight[top - 1]) / tw;
            weight[top - 2] = tw;
            count[top - 2] += count[top - 1];
            --top;
        }
    }

    std::vector<double> fitted(n);
    std::size_t at = 0;
    for (std::size_t b = 0; b < top; ++b) {
        const double v = std::clamp(mean[b], kLinkClip, 1.0 - kLinkClip);
        for (std::size_t c = 0; c < count[b]; ++c) fitted[at++] = v;
    }
    return MonotoneLink(std::move(u), std::move(fitted));
}

KernelBank::KernelBank(std::size_t capacity, KernelKind kernel, double bandwidth_factor)
    : capacity_(capacity), kernel_(kernel), bandwidth_factor_(bandwidth_factor) {
    if (capacity_ == 0) throw std::invalid_argument("KernelBank: capacity must be positive");
    if (!(bandwidth_factor_ > 0.0))
        throw std::invalid_argument("KernelBank: bandwidth factor must be positive");
    entries_.reserve(capacity_);
}

void KernelBank::push(double t, double z, std::int64_t id) {
    if (entries_.size() < capacity_) {
        entries_.push_back({t, z, id});
    } else {
        entries_[next_slot_] = {t, z, id};
        next_slot_ = (next_slot_ + 1) % capacity_;
    }
}

double KernelBank::index_stddev() const {
    if (entries_.empty()) return 0.0;
    double mean = 0.0;
    for (const Entry& e : entries_) mean += e.t;
    mean /= static_cast<double>(entries_.size());
    double var = 0.0;
    for (const Entry& e : entries_) var += (e.t - mean) * (e.t - mean);
    return std::sqrt(var / static_cast<double>(entries_.size()));
}

namespace {

struct RawRegression {
    double value;
    double dvalue_du;
};

RawRegression nw_raw_with_grad(const KernelBank& bank, double u, std::int64_t exclude_id) {
    if (bank.size() == 0) throw std::invalid_argument("nw_regress: empty bank");

    double zsum = 0.0;
    std::size_t included = 0;
    for (const KernelBank::Entry& e : bank.entries()) {
        if (exclude_id >= 0 && e.id == exclude_id) continue;
        ++included;
        zsum += e.z;
    }
    if (included == 0) throw std::invalid_argument("nw_regress: bank empty after exclusion");
    const double fallback = zsum / static_cast<double>(included);

    const double sigma = bank.index_stddev();
    const double b = bank.bandwidth_factor() * sigma;
    if (!(b > 0.0)) return {fallback, 0.0};  // degenerate index spread

    double num = 0.0, den = 0.0, dnum = 0.0, dden = 0.0;
    for (const KernelBank::Entry& e : bank.entries()) {
        if (exclude_id >= 0 && e.id == exclude_id) continue;
        const double v = (u - e.t) / b;
        double k, dk_du;
        if (bank.kernel() == KernelKind::Gaussian) {
            k = std::exp(-0.5 * v * v);
            dk_du = -v * k / b;
        } else {
            k = std::max(1.0 - v * v, 0.0);
            dk_du = k > 0.0 ? -2.0 * v / b : 0.0;
        }
        num += k * e.z;
        den += k;
        dnum += dk_du * e.z;
        dden += dk_du;
    }
    if (den <= 0.0) return {fallback, 0.0};  // no in-support points (Epanechnikov)
    const double value = num / den;
    return {value, (dnum - value * dden) / den};
}

}  // namespace

double nw_regress_raw(const KernelBank& bank, double u, std::int64_t exclude_id) {
    return nw_raw_with_grad(bank, u, exclude_id).value;
}

void nw_regress_grad(const KernelBank& bank, double u, std::int64_t exclude_id, double& value,
                     double& dvalue_du) {
    const RawRegression raw = nw_raw_with_grad(bank, u, exclude_id);
    double clipped = raw.value;
    double dclipped = raw.dvalue_du;
    if (clipped <= kKernelClip) {
        clipped = kKernelClip;
        dclipped = 0.0;
    } else if (clipped >= 1.0 - kKernelClip) {
        clipped = 1.0 - kKernelClip;
        dclipped = 0.0;
    }
    const double sig = sigmoid(u);
    value = (1.0 - kLogisticMix) * clipped + kLogisticMix * sig;
    dvalue_du = (1.0 - kLogisticMix) * dclipped + kLogisticMix * sig * (1.0 - sig);
}

double nw_regress(const KernelBank& bank, double u, std::int64_t exclude_id) {
    double value, grad;
    nw_regress_grad(bank, u, exclude_id, value, grad);
    return value;
}

}  // namespace spo
