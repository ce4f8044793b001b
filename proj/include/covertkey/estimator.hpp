#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "covertkey/channel.hpp"
#include "covertkey/rng.hpp"

namespace covertkey {

// Probe-based estimation of the adversary's state weight, the halting rule
// bounding how many channel uses probing may consume, and the power-of-two
// code-size selection driven by the resulting estimate.

struct EstimatorConfig {
    int n = 0;          // coding block length
    int g = 0;          // probe budget: extra uses reserved for probing
    double kappa = 0.0; // per-position probe probability
    double mu = 0.0;    // halting slack in g >= (1+mu)*kappa*n'
    int y0 = 0;         // probe output symbol
    double mu0 = 0.0;   // P(y0 | x=1, s=0)
    double mu1 = 0.0;   // P(y0 | x=1, s=1)

    int n_prime() const { return n + g; }

    // Picks y0 maximizing |P(y|x=1,s=1) - P(y|x=1,s=0)| (smallest index on ties),
    // the separation that minimizes the estimator variance; requires the two
    // input-1 laws to differ.
    static EstimatorConfig from_channel(const StateDmc& ch, int n, int g, double kappa, double mu);

    // Checks parameter ranges and the probe-budget inequality g >= ceil((1+mu)*kappa*n').
    void validate() const;
};

// Independently select each of the n' positions with probability kappa;
// returned indices are sorted.
std::vector<int> select_positions(int n_prime, double kappa, Rng& rng);

// Halt when the probe count exceeds the budget (equality proceeds).
inline bool halting_check(std::int64_t probe_count, std::int64_t g) { return probe_count > g; }

// Closed-form bound on the halting probability: 2^(-mu^2 * kappa * n' / 3).
double halting_prob_bound(double mu, double kappa, int n_prime);

// Unbiased state-weight estimate from the probe outputs: each probe contributes
// (1{y = y0} - mu0) / (mu1 - mu0); an empty probe set estimates 1.
double estimate_beta(std::span<const std::uint8_t> probe_outputs, const EstimatorConfig& cfg);

// Conditional deviation bound at probe count ell:
// P(|estimate - weight| > lambda | ell probes) <=
//   2*exp(-(mu1-mu0)^2 * lambda^2 * ell / 2) + 2*exp(-lambda^2 * ell / 2).
double deviation_bound(double lambda, std::int64_t ell, double mu0, double mu1);

// Smallest output mass of the innocent main-channel law, min_y P(y | x=0, s=0);
// its log reciprocal sets the total index budget.
double mu0_channel(const StateDmc& ch);

// Mutual information I(X; Y) in bits for X ~ Bernoulli(alpha) through the
// state-weight-beta mixture of the two main-channel laws.
double mixture_input_mi(const StateDmc& ch, double beta, double alpha);

// Power-of-two code sizes as log2 integers, together with the real-valued
// targets they round. Construction guarantees:
//   log2_m1 + log2_m2 + log2_m3 >= ceil(target_total)    (total index budget)
//   log2_m1 + log2_m3           <= floor(target_key_pub) (decodability budget)
//   log2_m3                     >= ceil(target_m3)       (state-randomization floor)
struct MSelection {
    int log2_m1 = 0;
    int log2_m2 = 0;
    int log2_m3 = 0;
    double beta_used = 0.0;     // estimate clamped to [0, 1]
    double mix_mi = 0.0;        // I(X; Y) at beta_used
    double target_total = 0.0;
    double target_key_pub = 0.0;
    double target_m3 = 0.0;

    std::int64_t m1() const { return std::int64_t{1} << log2_m1; }
    std::int64_t m2() const { return std::int64_t{1} << log2_m2; }
    std::int64_t m3() const { return std::int64_t{1} << log2_m3; }
};

// Select code sizes from a (possibly out-of-range) weight estimate:
//   target_total   = (1+zeta) * n * log2(1/mu0_ch)
//   target_key_pub = (1-zeta) * (I(X;Y at clamped estimate) - zeta*alpha) * n
//   target_m3      = (1+zeta) * alpha * (estimate-weighted i_s average + zeta) * n
// Throws InfeasibleSelectionError when the key count would fall below 1.
MSelection choose_m(const StateDmc& ch, double beta_hat, double zeta, double alpha, int n,
                    double mu0_ch);

// Membership of a state sequence in the set the code sizes defend against,
// evaluated at the sequence's true weight fraction and without the selection
// slacks: total budget as above, decodability budget (1-zeta)*I(X;Y)*n, and
// state-randomization floor (1+zeta)*alpha*(weighted i_s average)*n.
bool s_in_s_set(const StateDmc& ch, std::span<const std::uint8_t> s, int log2_m1, int log2_m2,
                int log2_m3, double zeta, double alpha, double mu0_ch);

} // namespace covertkey
