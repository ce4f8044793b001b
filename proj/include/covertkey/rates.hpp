#pragma once

#include <string>
#include <vector>

#include "covertkey/channel.hpp"

namespace covertkey {

// Closed-form square-root-law key rates (bits per root channel use) for the
// two-state channel model. Throughout, the input-0 main-channel law is read
// from state 0; channels passing the state-invariance hypothesis make the two
// states agree, and the CLI enforces that hypothesis before evaluating.

// Which chi-squared term the state weights multiply in the converse:
// kDerived pairs each weight with its own state's chi-squared (the maximizer of
// the underlying time-sharing expression, and the only pairing that meets the
// achievable rate at the endpoints); kAsStated is the cross pairing kept
// selectable for comparison.
enum class ConversePairing { kDerived, kAsStated };

std::string to_string(ConversePairing pairing);
ConversePairing pairing_from_string(const std::string& name);

// Rate penalty/bonus term for state s: D(Q1||Q0) + D(P1||P0) - D((PQ)1||(PQ)0)
// + D((PQ)1||P1xQ1), all at state s. Identically zero when the x=0 joint slice
// factorizes; nonzero values require a correlated x=0 slice.
double i_s(const StateDmc& ch, int s);

// Chi-squared divergence of the observer's two input laws at state s.
double chi2_s(const StateDmc& ch, int s);

// Weighted observer chi-squared (1-beta)*chi2_s(0) + beta*chi2_s(1).
double chi2_weighted(const StateDmc& ch, double beta);

// Achievable key rate against a state-weight-beta adversary:
// sqrt(2) * [D((1-b)P1^0 + b*P1^1 || P0) - ((1-b)I^0 + b*I^1)] / sqrt(chi2_weighted).
double active_rate(const StateDmc& ch, double beta);

// Converse bound sqrt(2) * sqrt(b*(D(P1^1||P0)-I^1)^2/chi2 + (1-b)*(D(P1^0||P0)-I^0)^2/chi2')
// with the chi-squared assignment chosen by `pairing`.
double converse_rate(const StateDmc& ch, double beta, ConversePairing pairing);

// Upper/lower key-rate bounds for the single-state (state-0) restriction.
// Requires the x=0 joint slice to factorize within tol.
struct PassiveBounds {
    double lower = 0.0;
    double upper = 0.0;
};
PassiveBounds passive_bounds(const StateDmc& ch, double tol = 1e-9);

// Single-state capacity when both joint slices factorize:
// sqrt(2 / chi2(Q1||Q0)) * D(P1||P0); coincides with both passive bounds.
double passive_capacity_independent(const StateDmc& ch, double tol = 1e-9);

struct RatePoint {
    double beta = 0.0;
    double achievable = 0.0;
    double converse = 0.0;
    ConversePairing pairing = ConversePairing::kDerived;
};

// Evaluate achievable and converse rates on a uniform beta grid of `grid_points`
// points spanning [0, 1].
std::vector<RatePoint> rate_curve(const StateDmc& ch, int grid_points, ConversePairing pairing);

// CSV emission with mandatory header "beta,achievable,converse,pairing".
void write_rate_curve_csv(const std::vector<RatePoint>& curve, const std::string& path);

// Per-symbol covertness divergence of a weight-alpha input mixture against the
// innocent observer law, exactly and via its small-alpha quadratic approximation
// (1/2) * alpha^2 * chi2_weighted / ln 2. Both in bits.
struct CovertnessCheck {
    double exact = 0.0;
    double quadratic = 0.0;
};
CovertnessCheck covertness_quadratic_check(const StateDmc& ch, double alpha, double beta);

// Throws PreconditionError (with the report's deviations in the message) unless
// the channel satisfies the two-state rate hypotheses within tol.
void require_two_state_hypotheses(const StateDmc& ch, double tol = 1e-9);

} // namespace covertkey
