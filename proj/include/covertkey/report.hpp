#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

namespace covertkey {

// Fixed 12-significant-digit rendering used by every CSV and JSON-lines emitter,
// so identical runs produce byte-identical outputs.
inline std::string format_sig12(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return std::string(buf);
}

// Compensated (Kahan) accumulator; summation order independence for parallel
// reductions is achieved by summing per-chunk results in fixed index order.
class KahanSum {
public:
    void add(double v) {
        const double y = v - c_;
        const double t = s_ + y;
        c_ = (t - s_) - y;
        s_ = t;
    }
    double value() const { return s_; }

private:
    double s_ = 0.0;
    double c_ = 0.0;
};

// Standard error of a Bernoulli frequency estimate from `hits` successes in
// `trials` draws.
inline double frequency_sigma(std::int64_t hits, std::int64_t trials) {
    if (trials <= 0) return 0.0;
    const double p = static_cast<double>(hits) / static_cast<double>(trials);
    return std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
}

// Mean and standard error of the mean for a sample of reals.
struct MeanSigma {
    double mean = 0.0;
    double sigma = 0.0;
};

inline MeanSigma mean_sigma(const std::vector<double>& values) {
    MeanSigma r;
    if (values.empty()) return r;
    KahanSum total;
    for (double v : values) total.add(v);
    r.mean = total.value() / static_cast<double>(values.size());
    if (values.size() < 2) return r;
    KahanSum sq;
    for (double v : values) sq.add((v - r.mean) * (v - r.mean));
    const double var = sq.value() / static_cast<double>(values.size() - 1);
    r.sigma = std::sqrt(var / static_cast<double>(values.size()));
    return r;
}

// Display-only clamp for vacuous probability bounds; evaluators themselves
// return bounds as computed, even above 1.
inline double clamp_unit(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

} // namespace covertkey
