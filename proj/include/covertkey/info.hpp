#pragma once

#include <cstdint>
#include <span>

#include "covertkey/pmf.hpp"

namespace covertkey {

// Information measures over dense pmfs. All values are in bits (log base 2),
// with the 0*log(0) = 0 convention throughout.

// Kullback-Leibler divergence D(p || q). Throws DivergenceError if some symbol
// has p > 0 but q = 0 (the divergence would be infinite).
double kl(const Pmf& p, const Pmf& q);
double kl(const JointPmf& p, const JointPmf& q);

// Chi-squared divergence sum_a (p(a) - q(a))^2 / q(a); requires q strictly positive.
double chi2(const Pmf& p, const Pmf& q);

// Total variation distance (1/2) * sum |p - q|.
double tv(const Pmf& p, const Pmf& q);
double tv(const JointPmf& p, const JointPmf& q);

// Shannon entropy in bits.
double entropy(const Pmf& p);

// Binary entropy function H_b(p), p in [0, 1].
double binary_entropy(double p);

// Mutual information of a joint pmf: D(joint || product of marginals).
double mutual_information(const JointPmf& j);

// Mutual information of the joint empirical type of two equal-length sequences.
double empirical_mi(std::span<const std::uint8_t> x, std::span<const std::uint8_t> y,
                    int x_size, int y_size);
// Variant inferring alphabet sizes as max(symbol) + 1.
double empirical_mi(std::span<const std::uint8_t> x, std::span<const std::uint8_t> y);

} // namespace covertkey
