#include "covertkey/rates.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "covertkey/info.hpp"
#include "covertkey/report.hpp"

namespace covertkey {

std::string to_string(ConversePairing pairing) {
    return pairing == ConversePairing::kDerived ? "derived" : "as-stated";
}

ConversePairing pairing_from_string(const std::string& name) {
    if (name == "derived") return ConversePairing::kDerived;
    if (name == "as-stated") return ConversePairing::kAsStated;
    throw ParseError("unknown pairing '" + name + "' (expected derived or as-stated)");
}

double i_s(const StateDmc& ch, int s) {
    const JointPmf& j1 = ch.joint_pq(1, s);
    const JointPmf& j0 = ch.joint_pq(0, s);
    const Pmf p1 = j1.row_marginal();
    const Pmf p0 = j0.row_marginal();
    const Pmf q1 = j1.col_marginal();
    const Pmf q0 = j0.col_marginal();
    return kl(q1, q0) + kl(p1, p0) - kl(j1, j0) + kl(j1, JointPmf::outer(p1, q1));
}

double chi2_s(const StateDmc& ch, int s) {
    return chi2(ch.marginal_q(1, s), ch.marginal_q(0, s));
}

double chi2_weighted(const StateDmc& ch, double beta) {
    if (!(beta >= 0.0 && beta <= 1.0)) throw DomainError("chi2_weighted: beta outside [0, 1]");
    double total = 0.0;
    if (beta < 1.0) total += (1.0 - beta) * chi2_s(ch, 0);
    if (beta > 0.0) total += beta * chi2_s(ch, 1);
    return total;
}

double active_rate(const StateDmc& ch, double beta) {
    if (!(beta >= 0.0 && beta <= 1.0)) throw DomainError("active_rate: beta outside [0, 1]");
    const double denom = chi2_weighted(ch, beta);
    if (!(denom > 0.0)) {
        throw PreconditionError("active_rate: observer laws coincide at every weighted state "
                                "(zero chi-squared denominator)");
    }
    const Pmf p0 = ch.marginal_p(0, 0);
    const Pmf p1_mix = mixture(ch.marginal_p(1, 0), ch.marginal_p(1, 1), beta);
    const double i_mix = (1.0 - beta) * i_s(ch, 0) + beta * i_s(ch, 1);
    return std::numbers::sqrt2 * (kl(p1_mix, p0) - i_mix) / std::sqrt(denom);
}

double converse_rate(const StateDmc& ch, double beta, ConversePairing pairing) {
    if (!(beta >= 0.0 && beta <= 1.0)) throw DomainError("converse_rate: beta outside [0, 1]");
    const Pmf p0 = ch.marginal_p(0, 0);

    // Numerator margins per state: D(P1^s || P0) - I^s.
    const double margin[2] = {kl(ch.marginal_p(1, 0), p0) - i_s(ch, 0),
                              kl(ch.marginal_p(1, 1), p0) - i_s(ch, 1)};
    // Weight on each state's squared margin.
    const double weight[2] = {1.0 - beta, beta};
    // Chi-squared divisor per state under the selected pairing.
    double divisor[2] = {chi2_s(ch, 0), chi2_s(ch, 1)};
    if (pairing == ConversePairing::kAsStated) std::swap(divisor[0], divisor[1]);

    double total = 0.0;
    for (int s = 0; s < 2; ++s) {
        if (weight[s] == 0.0) continue; // zero-weight terms drop before the division
        if (!(divisor[s] > 0.0)) {
            throw PreconditionError("converse_rate: zero chi-squared divisor for a "
                                    "positive-weight state");
        }
        total += weight[s] * margin[s] * margin[s] / divisor[s];
    }
    return std::numbers::sqrt2 * std::sqrt(total);
}

PassiveBounds passive_bounds(const StateDmc& ch, double tol) {
    const JointPmf& j0 = ch.joint_pq(0, 0);
    const JointPmf& j1 = ch.joint_pq(1, 0);
    const Pmf p0 = j0.row_marginal();
    const Pmf q0 = j0.col_marginal();
    const Pmf p1 = j1.row_marginal();
    const Pmf q1 = j1.col_marginal();

    const JointPmf prod0 = JointPmf::outer(p0, q0);
    const double dev = (j0.mat() - prod0.mat()).cwiseAbs().maxCoeff();
    if (dev > tol) {
        throw PreconditionError("passive_bounds: x=0 outputs must be independent (deviation " +
                                format_sig12(dev) + ")");
    }
    const double c2 = chi2(q1, q0);
    if (!(c2 > 0.0)) {
        throw PreconditionError("passive_bounds: observer laws coincide (zero chi-squared)");
    }
    const double scale = std::sqrt(2.0 / c2);
    PassiveBounds b;
    b.upper = scale * (kl(j1, prod0) - kl(q1, q0));
    b.lower = b.upper - scale * kl(j1, JointPmf::outer(p1, q1));
    return b;
}

double passive_capacity_independent(const StateDmc& ch, double tol) {
    const JointPmf& j1 = ch.joint_pq(1, 0);
    const Pmf p1 = j1.row_marginal();
    const Pmf q1 = j1.col_marginal();
    const double dev1 = (j1.mat() - JointPmf::outer(p1, q1).mat()).cwiseAbs().maxCoeff();
    if (dev1 > tol) {
        throw PreconditionError("passive_capacity_independent: x=1 outputs must be independent "
                                "(deviation " + format_sig12(dev1) + ")");
    }
    PassiveBounds b = passive_bounds(ch, tol); // also enforces x=0 independence
    (void)b;
    const Pmf p0 = ch.marginal_p(0, 0);
    const Pmf q0 = ch.marginal_q(0, 0);
    return std::sqrt(2.0 / chi2(q1, q0)) * kl(p1, p0);
}

std::vector<RatePoint> rate_curve(const StateDmc& ch, int grid_points, ConversePairing pairing) {
    if (grid_points < 2) throw DomainError("rate_curve: need at least 2 grid points");
    std::vector<RatePoint> curve;
    curve.reserve(static_cast<std::size_t>(grid_points));
    for (int i = 0; i < grid_points; ++i) {
        RatePoint pt;
        pt.beta = static_cast<double>(i) / static_cast<double>(grid_points - 1);
        pt.achievable = active_rate(ch, pt.beta);
        pt.converse = converse_rate(ch, pt.beta, pairing);
        pt.pairing = pairing;
        curve.push_back(pt);
    }
    return curve;
}

void write_rate_curve_csv(const std::vector<RatePoint>& curve, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("rate curve: cannot write " + path);
    out << "beta,achievable,converse,pairing\n";
    for (const RatePoint& pt : curve) {
        out << format_sig12(pt.beta) << ',' << format_sig12(pt.achievable) << ','
            << format_sig12(pt.converse) << ',' << to_string(pt.pairing) << '\n';
    }
}

CovertnessCheck covertness_quadratic_check(const StateDmc& ch, double alpha, double beta) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("covertness check: alpha outside [0, 1]");
    if (!(beta >= 0.0 && beta <= 1.0)) throw DomainError("covertness check: beta outside [0, 1]");
    CovertnessCheck c;
    for (int s = 0; s < 2; ++s) {
        const double w = (s == 0) ? 1.0 - beta : beta;
        if (w == 0.0) continue;
        const Pmf q0 = ch.marginal_q(0, s);
        const Pmf q1 = ch.marginal_q(1, s);
        c.exact += w * kl(mixture(q0, q1, alpha), q0);
    }
    c.quadratic = 0.5 * alpha * alpha * chi2_weighted(ch, beta) / std::numbers::ln2;
    return c;
}

void require_two_state_hypotheses(const StateDmc& ch, double tol) {
    const HypothesisReport r = ch.validate_hypotheses(tol);
    if (r.two_state_rate_ok()) return;
    std::string msg = "channel fails two-state rate hypotheses:";
    if (!r.p0_state_invariant) {
        msg += " input-0 law varies across states (deviation " + format_sig12(r.p0_deviation) + ");";
    }
    if (!r.p1_states_distinct) {
        msg += " input-1 laws coincide across states (deviation " + format_sig12(r.p1_deviation) + ");";
    }
    for (int s = 0; s < 2; ++s) {
        if (!r.zero_input_independent[s]) {
            msg += " x=0 outputs correlated at state " + std::to_string(s) + " (deviation " +
                   format_sig12(r.zero_input_deviation[s]) + ");";
        }
    }
    throw PreconditionError(msg);
}

} // namespace covertkey
