#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "covertkey/rng.hpp"

namespace covertkey {

// Closed-form concentration bounds used by the protocol analysis, each paired
// with a Monte-Carlo verification harness. Bounds are pure functions of their
// parameters (bit-reproducible) and are returned as computed even when vacuous
// (> 1); clamp_unit() exists for display.

// Deviation of the reciprocal 1/(1 + S), S ~ Binomial(n, p), from 1/((n+1)p):
// P( |1/(1+S) - 1/((n+1)p)| >= eps/((n+1)p) ) <= 2*exp(-n*p*eps^2/32),
// valid for 2/(n*p) < eps < 1.
double lemma1_prob_bound(std::int64_t n, double p, double eps);

// Expectation version: E|1/(1+S) - 1/((n+1)p)| <=
// eps/((n+1)p) + (1 + 1/((n+1)p)) * exp(-n*p*eps^2/32), same eps range.
double lemma1_exp_bound(std::int64_t n, double p, double eps);

// Minimum of lemma1_exp_bound over an eps grid within the valid range; the bound
// holds for every admissible eps, so the grid minimum is itself a valid bound.
struct BestEps {
    double eps = 0.0;
    double bound = 0.0;
};
BestEps lemma1_exp_bound_best(std::int64_t n, double p, int grid_points = 512);

// Two-sided multiplicative Chernoff pair for S ~ Binomial(n, p), 0 < mu < 1:
// P(S <= (1-mu)np) <= exp(-np mu^2/2) and P(S >= (1+mu)np) <= exp(-np mu^2/3).
struct ChernoffBounds {
    double lower_tail = 0.0;
    double upper_tail = 0.0;
};
ChernoffBounds chernoff_bounds(std::int64_t n, double p, double mu);

// Tail bound exp(-lambda^2 * draws / 2) on |H/draws - K/population| >= lambda/2
// for H hypergeometric (draws without replacement from a population with K
// successes), kept in its printed one-sided-constant form.
double hypergeometric_tail(std::int64_t population, std::int64_t successes, std::int64_t draws,
                           double lambda);

// One row of a bound-vs-empirical verification table.
struct BoundVerdict {
    std::string name;
    std::vector<std::pair<std::string, double>> params;
    double bound = 0.0;
    double empirical = 0.0;
    double sigma = 0.0; // MC standard error of `empirical`
    bool pass = false;  // empirical <= bound + 3*sigma

    void finalize() { pass = empirical <= bound + 3.0 * sigma; }
};

// MC harnesses; `trials` independent draws each, deterministic per rng seed.
BoundVerdict verify_lemma1_prob(std::int64_t n, double p, double eps, std::int64_t trials, Rng& rng);
BoundVerdict verify_lemma1_exp(std::int64_t n, double p, double eps, std::int64_t trials, Rng& rng);
BoundVerdict verify_chernoff_lower(std::int64_t n, double p, double mu, std::int64_t trials, Rng& rng);
BoundVerdict verify_chernoff_upper(std::int64_t n, double p, double mu, std::int64_t trials, Rng& rng);
BoundVerdict verify_hypergeometric(std::int64_t population, std::int64_t successes,
                                   std::int64_t draws, double lambda, std::int64_t trials,
                                   Rng& rng);

// CSV emission: header "name,params,bound,empirical,sigma,pass".
void write_verdicts_csv(const std::vector<BoundVerdict>& rows, const std::string& path);

} // namespace covertkey
