#include "covertkey/info.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace covertkey {

namespace {

// Shared kernel: KL divergence between two flat nonnegative vectors of equal length.
double kl_kernel(const Eigen::Ref<const Eigen::VectorXd>& p,
                 const Eigen::Ref<const Eigen::VectorXd>& q) {
    double d = 0.0;
    for (Eigen::Index a = 0; a < p.size(); ++a) {
        if (p[a] > 0.0) {
            if (q[a] <= 0.0) {
                throw DivergenceError("kl: q vanishes on the support of p (index " +
                                      std::to_string(a) + ")");
            }
            d += p[a] * std::log2(p[a] / q[a]);
        }
    }
    return d;
}

} // namespace

double kl(const Pmf& p, const Pmf& q) {
    if (!p.same_support(q)) throw AlphabetError("kl: alphabet sizes differ");
    return kl_kernel(p.vec(), q.vec());
}

double kl(const JointPmf& p, const JointPmf& q) {
    if (!p.same_support(q)) throw AlphabetError("kl: joint alphabet sizes differ");
    return kl_kernel(p.mat().reshaped(), q.mat().reshaped());
}

double chi2(const Pmf& p, const Pmf& q) {
    if (!p.same_support(q)) throw AlphabetError("chi2: alphabet sizes differ");
    double d = 0.0;
    for (int a = 0; a < p.size(); ++a) {
        if (q(a) <= 0.0) {
            throw DivergenceError("chi2: q must be strictly positive (index " +
                                  std::to_string(a) + ")");
        }
        const double diff = p(a) - q(a);
        d += diff * diff / q(a);
    }
    return d;
}

double tv(const Pmf& p, const Pmf& q) {
    if (!p.same_support(q)) throw AlphabetError("tv: alphabet sizes differ");
    return 0.5 * (p.vec() - q.vec()).lpNorm<1>();
}

double tv(const JointPmf& p, const JointPmf& q) {
    if (!p.same_support(q)) throw AlphabetError("tv: joint alphabet sizes differ");
    return 0.5 * (p.mat() - q.mat()).lpNorm<1>();
}

double entropy(const Pmf& p) {
    double h = 0.0;
    for (int a = 0; a < p.size(); ++a) {
        if (p(a) > 0.0) h -= p(a) * std::log2(p(a));
    }
    return h;
}

double binary_entropy(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("binary_entropy: p outside [0, 1]");
    double h = 0.0;
    if (p > 0.0) h -= p * std::log2(p);
    if (p < 1.0) h -= (1.0 - p) * std::log2(1.0 - p);
    return h;
}

double mutual_information(const JointPmf& j) {
    const Pmf px = j.row_marginal();
    const Pmf py = j.col_marginal();
    double mi = 0.0;
    for (int a = 0; a < j.row_size(); ++a) {
        for (int b = 0; b < j.col_size(); ++b) {
            const double m = j(a, b);
            // Marginals are positive wherever the joint is, so the ratio is finite.
            if (m > 0.0) mi += m * std::log2(m / (px(a) * py(b)));
        }
    }
    return mi;
}

double empirical_mi(std::span<const std::uint8_t> x, std::span<const std::uint8_t> y,
                    int x_size, int y_size) {
    return mutual_information(joint_type(x, y, x_size, y_size));
}

double empirical_mi(std::span<const std::uint8_t> x, std::span<const std::uint8_t> y) {
    if (x.size() != y.size()) throw ShapeError("empirical_mi: sequence lengths differ");
    if (x.empty()) throw ShapeError("empirical_mi: empty sequences");
    const int x_size = 1 + *std::max_element(x.begin(), x.end());
    const int y_size = 1 + *std::max_element(y.begin(), y.end());
    return empirical_mi(x, y, x_size, y_size);
}

} // namespace covertkey
