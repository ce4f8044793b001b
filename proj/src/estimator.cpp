#include "covertkey/estimator.hpp"

#include <cmath>

#include "covertkey/info.hpp"
#include "covertkey/rates.hpp"

namespace covertkey {

EstimatorConfig EstimatorConfig::from_channel(const StateDmc& ch, int n, int g, double kappa,
                                              double mu) {
    const Pmf p10 = ch.marginal_p(1, 0);
    const Pmf p11 = ch.marginal_p(1, 1);
    EstimatorConfig cfg;
    cfg.n = n;
    cfg.g = g;
    cfg.kappa = kappa;
    cfg.mu = mu;
    double best = 0.0;
    for (int y = 0; y < ch.y_size(); ++y) {
        const double sep = std::abs(p11(y) - p10(y));
        // ties (up to rounding noise) keep the smallest symbol index
        if (sep > best + 1e-12) {
            best = sep;
            cfg.y0 = y;
        }
    }
    if (!(best > 0.0)) {
        throw PreconditionError("EstimatorConfig: input-1 laws coincide across states; "
                                "no probe symbol separates them");
    }
    cfg.mu0 = p10(cfg.y0);
    cfg.mu1 = p11(cfg.y0);
    cfg.validate();
    return cfg;
}

void EstimatorConfig::validate() const {
    if (n <= 0 || g < 0) throw DomainError("EstimatorConfig: need n > 0 and g >= 0");
    if (!(kappa > 0.0 && kappa < 1.0)) throw DomainError("EstimatorConfig: kappa outside (0, 1)");
    if (!(mu > 0.0 && mu < 1.0)) throw DomainError("EstimatorConfig: mu outside (0, 1)");
    if (mu0 == mu1) throw PreconditionError("EstimatorConfig: probe masses mu0 and mu1 coincide");
    const double budget = (1.0 + mu) * kappa * static_cast<double>(n_prime());
    if (static_cast<double>(g) < std::ceil(budget)) {
        throw PreconditionError("EstimatorConfig: probe budget g = " + std::to_string(g) +
                                " below (1+mu)*kappa*n' = " + std::to_string(budget));
    }
}

std::vector<int> select_positions(int n_prime, double kappa, Rng& rng) {
    if (n_prime <= 0) throw DomainError("select_positions: n' must be positive");
    if (!(kappa >= 0.0 && kappa <= 1.0)) throw DomainError("select_positions: kappa outside [0, 1]");
    std::vector<int> positions;
    for (int i = 0; i < n_prime; ++i) {
        if (rng.bernoulli(kappa)) positions.push_back(i);
    }
    return positions; // ascending by construction
}

double halting_prob_bound(double mu, double kappa, int n_prime) {
    if (!(mu > 0.0 && mu < 1.0)) throw DomainError("halting_prob_bound: mu outside (0, 1)");
    if (!(kappa > 0.0 && kappa < 1.0)) throw DomainError("halting_prob_bound: kappa outside (0, 1)");
    if (n_prime <= 0) throw DomainError("halting_prob_bound: n' must be positive");
    return std::exp2(-mu * mu * kappa * static_cast<double>(n_prime) / 3.0);
}

double estimate_beta(std::span<const std::uint8_t> probe_outputs, const EstimatorConfig& cfg) {
    if (cfg.mu0 == cfg.mu1) throw PreconditionError("estimate_beta: probe masses coincide");
    if (probe_outputs.empty()) return 1.0; // convention for an empty probe set
    double total = 0.0;
    for (std::uint8_t y : probe_outputs) {
        total += ((y == cfg.y0 ? 1.0 : 0.0) - cfg.mu0) / (cfg.mu1 - cfg.mu0);
    }
    return total / static_cast<double>(probe_outputs.size());
}

double deviation_bound(double lambda, std::int64_t ell, double mu0, double mu1) {
    if (!(lambda > 0.0)) throw DomainError("deviation_bound: lambda must be positive");
    if (ell <= 0) throw DomainError("deviation_bound: ell must be positive");
    if (mu0 == mu1) throw PreconditionError("deviation_bound: probe masses coincide");
    const double gap = mu1 - mu0;
    const double l = static_cast<double>(ell);
    return 2.0 * std::exp(-gap * gap * lambda * lambda * l / 2.0) +
           2.0 * std::exp(-lambda * lambda * l / 2.0);
}

double mu0_channel(const StateDmc& ch) {
    const double m = ch.marginal_p(0, 0).min_mass();
    if (!(m > 0.0)) {
        throw PreconditionError("mu0_channel: innocent law must have full support");
    }
    return m;
}

double mixture_input_mi(const StateDmc& ch, double beta, double alpha) {
    if (!(beta >= 0.0 && beta <= 1.0)) throw DomainError("mixture_input_mi: beta outside [0, 1]");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("mixture_input_mi: alpha outside [0, 1]");
    const CondPmf w = mixture(ch.cond_p(0), ch.cond_p(1), beta);
    return mutual_information(w.joint_with(Pmf::bernoulli(alpha)));
}

MSelection choose_m(const StateDmc& ch, double beta_hat, double zeta, double alpha, int n,
                    double mu0_ch) {
    if (!(zeta > 0.0 && zeta < 1.0)) throw DomainError("choose_m: zeta outside (0, 1)");
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("choose_m: alpha outside (0, 1)");
    if (n <= 0) throw DomainError("choose_m: n must be positive");
    if (!(mu0_ch > 0.0 && mu0_ch <= 1.0)) throw DomainError("choose_m: mu0_ch outside (0, 1]");

    MSelection sel;
    // Out-of-range estimates clamp only here, at the selection boundary.
    sel.beta_used = std::min(1.0, std::max(0.0, beta_hat));
    sel.mix_mi = mixture_input_mi(ch, sel.beta_used, alpha);

    const double dn = static_cast<double>(n);
    sel.target_total = (1.0 + zeta) * dn * std::log2(1.0 / mu0_ch);
    sel.target_key_pub = (1.0 - zeta) * (sel.mix_mi - zeta * alpha) * dn;
    sel.target_m3 = (1.0 + zeta) * alpha *
                    (sel.beta_used * i_s(ch, 1) + (1.0 - sel.beta_used) * i_s(ch, 0) + zeta) * dn;

    const std::int64_t total = static_cast<std::int64_t>(std::ceil(sel.target_total));
    const std::int64_t key_pub = static_cast<std::int64_t>(std::floor(sel.target_key_pub));
    // The floor constraint is one-sided, so a nonpositive target collapses to 0.
    const std::int64_t m3 = std::max<std::int64_t>(
        0, static_cast<std::int64_t>(std::ceil(sel.target_m3)));

    if (key_pub - m3 < 0) {
        throw InfeasibleSelectionError(
            "choose_m: key count below 1 (decodability budget " + std::to_string(key_pub) +
            " bits < state-randomization floor " + std::to_string(m3) + " bits)");
    }
    if (total - key_pub < 0) {
        throw InfeasibleSelectionError("choose_m: total index budget below decodability budget");
    }
    sel.log2_m3 = static_cast<int>(m3);
    sel.log2_m1 = static_cast<int>(key_pub - m3);
    sel.log2_m2 = static_cast<int>(total - key_pub);
    return sel;
}

bool s_in_s_set(const StateDmc& ch, std::span<const std::uint8_t> s, int log2_m1, int log2_m2,
                int log2_m3, double zeta, double alpha, double mu0_ch) {
    if (s.empty()) throw ShapeError("s_in_s_set: empty state sequence");
    if (log2_m1 < 0 || log2_m2 < 0 || log2_m3 < 0) {
        throw DomainError("s_in_s_set: code sizes must be at least 1");
    }
    const double dn = static_cast<double>(s.size());
    const double beta = static_cast<double>(sequence_weight(s)) / dn;

    const double total_target = (1.0 + zeta) * dn * std::log2(1.0 / mu0_ch);
    const double key_pub_target = (1.0 - zeta) * mixture_input_mi(ch, beta, alpha) * dn;
    const double m3_target =
        (1.0 + zeta) * alpha * (beta * i_s(ch, 1) + (1.0 - beta) * i_s(ch, 0)) * dn;

    const double sum = log2_m1 + log2_m2 + log2_m3;
    return sum >= std::ceil(total_target) &&
           static_cast<double>(log2_m1 + log2_m3) <= std::floor(key_pub_target) &&
           static_cast<double>(log2_m3) >= std::ceil(m3_target);
}

} // namespace covertkey
