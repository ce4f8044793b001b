#include "covertkey/protocol.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "covertkey/info.hpp"
#include "covertkey/parallel.hpp"
#include "covertkey/rates.hpp"
#include "covertkey/report.hpp"

namespace covertkey {

namespace {

// Substream bases, keeping codebook and trial draws disjoint under one seed.
constexpr std::uint64_t kCodeStream = std::uint64_t{1} << 40;
constexpr std::uint64_t kTrialStream = std::uint64_t{1} << 41;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::int64_t checked_pow(std::int64_t base, int exp, std::int64_t cap) {
    std::int64_t v = 1;
    for (int i = 0; i < exp; ++i) {
        if (v > cap / base) return -1;
        v *= base;
    }
    return v;
}

// Little-endian packing of a digit subsequence, matching the exact enumerator's
// sequence indexing.
std::int64_t pack_subsequence(std::span<const std::uint8_t> seq, const std::vector<int>& positions,
                              int base) {
    std::int64_t packed = 0;
    std::int64_t place = 1;
    for (int pos : positions) {
        packed += static_cast<std::int64_t>(seq[pos]) * place;
        place *= base;
    }
    return packed;
}

// First n non-probe positions (ascending) and the remaining non-probe positions.
void split_positions(int n_prime, int n, const std::vector<char>& is_probe,
                     std::vector<int>& coding, std::vector<int>& filler) {
    coding.clear();
    filler.clear();
    for (int i = 0; i < n_prime; ++i) {
        if (is_probe[i]) continue;
        if (static_cast<int>(coding.size()) < n) {
            coding.push_back(i);
        } else {
            filler.push_back(i);
        }
    }
}

} // namespace

std::string to_string(BetaMode mode) {
    return mode == BetaMode::kOracle ? "oracle" : "estimated";
}

BetaMode beta_mode_from_string(const std::string& name) {
    if (name == "oracle") return BetaMode::kOracle;
    if (name == "estimated") return BetaMode::kEstimated;
    throw ParseError("unknown weight mode '" + name + "' (expected oracle or estimated)");
}

std::string to_string(HaltReason reason) {
    switch (reason) {
        case HaltReason::kNone: return "none";
        case HaltReason::kProbeBudget: return "probe-budget";
        case HaltReason::kInfeasibleSizes: return "infeasible-sizes";
    }
    return "none";
}

std::vector<std::string> ProtocolConfig::validate(const StateDmc& ch) const {
    if (n < 1) throw DomainError("protocol: n must be at least 1");
    if (g < 0) throw DomainError("protocol: g must be nonnegative");
    if (!(alpha >= 0.0 && alpha < 1.0)) throw DomainError("protocol: alpha must lie in [0, 1)");
    if (!(kappa >= 0.0 && kappa < 1.0)) throw DomainError("protocol: kappa must lie in [0, 1)");
    if (!(zeta >= 0.0)) throw DomainError("protocol: zeta must be nonnegative");
    if (!(mu > 0.0 && mu < 1.0)) throw DomainError("protocol: mu must lie in (0, 1)");
    if (u_count < 1) throw DomainError("protocol: code family size must be at least 1");

    const bool any_fixed = fixed_log2_m[0] >= 0 || fixed_log2_m[1] >= 0 || fixed_log2_m[2] >= 0;
    if (any_fixed && !fixed_sizes()) {
        throw DomainError("protocol: fixed code sizes must set all three exponents");
    }
    if (fixed_sizes()) {
        for (int l : fixed_log2_m) {
            if (l > 24) throw DomainError("protocol: fixed code-size exponent above 24");
        }
    }
    if (codebook_law && codebook_law->size() != ch.y_size()) {
        throw AlphabetError("protocol: codebook law size does not match the channel");
    }

    // Probe-budget consistency and estimability, via the estimator's own checks;
    // kappa = 0 disables probing entirely and skips them.
    if (kappa > 0.0) EstimatorConfig::from_channel(ch, n, g, kappa, mu).validate();

    std::vector<std::string> warnings;
    const double threshold = family_size_threshold(n);
    if (static_cast<double>(u_count) <= threshold) {
        warnings.push_back("code family size " + std::to_string(u_count) +
                           " is at or below the elimination threshold " +
                           format_sig12(threshold) + "; averaged-performance guarantees lapse");
    }
    return warnings;
}

Pmf default_codebook_law(const StateDmc& ch, double alpha) {
    return mixture(ch.marginal_p(0, 0), ch.marginal_p(1, 0), alpha);
}

Pmf protocol_codebook_law(const StateDmc& ch, const ProtocolConfig& cfg) {
    return cfg.codebook_law ? *cfg.codebook_law : default_codebook_law(ch, cfg.alpha);
}

CodeFamily::CodeFamily(const StateDmc& ch, const ProtocolConfig& cfg)
    : qy_(protocol_codebook_law(ch, cfg)),
      n_(cfg.n),
      u_count_(cfg.u_count),
      master_seed_(cfg.master_seed) {}

const Codebook& CodeFamily::get(const std::array<int, 3>& log2_m, int code_index) {
    if (code_index < 0 || code_index >= u_count_) {
        throw DomainError("code family: index out of range");
    }
    for (int l : log2_m) {
        if (l < 0 || l > 24) throw DomainError("code family: exponent out of range");
    }
    const std::uint64_t key =
        ((static_cast<std::uint64_t>(log2_m[0]) * 64 + log2_m[1]) * 64 + log2_m[2]) *
            static_cast<std::uint64_t>(u_count_) +
        static_cast<std::uint64_t>(code_index);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;

    Rng code_rng = Rng(master_seed_).derive(kCodeStream + key);
    Codebook cb = gen_codebook(qy_, n_, 1 << log2_m[0], 1 << log2_m[1], 1 << log2_m[2], code_rng);
    return cache_.emplace(key, std::move(cb)).first->second;
}

std::string trial_json(const TrialOutcome& t) {
    nlohmann::ordered_json j;
    j["halted"] = t.halted;
    j["reason"] = to_string(t.reason);
    j["beta_true"] = format_sig12(t.beta_true);
    j["probe_count"] = t.probe_count;
    j["probe_positions"] = t.probe_positions;
    if (t.estimated) j["beta_hat"] = format_sig12(t.beta_hat);
    if (!t.halted) {
        j["selection_feasible"] = t.selection_feasible;
        if (t.selection_feasible) {
            j["selection"] = {{"log2_m1", t.selection.log2_m1},
                              {"log2_m2", t.selection.log2_m2},
                              {"log2_m3", t.selection.log2_m3},
                              {"beta_used", format_sig12(t.selection.beta_used)}};
        }
        j["log2_m_used"] = t.log2_m_used;
        j["code_index"] = t.code_index;
        j["w1"] = t.w1;
        j["w2"] = t.w2;
        j["w1_hat"] = t.w1_hat;
        j["fallback_used"] = t.fallback_used;
        j["key_match"] = t.key_match;
    }
    return j.dump();
}

TrialOutcome run_trial(const StateDmc& ch, std::span<const std::uint8_t> s,
                       const ProtocolConfig& cfg, CodeFamily& family, Rng& rng,
                       TrialSample* sample) {
    const int np = cfg.n_prime();
    if (static_cast<int>(s.size()) != np) {
        throw ShapeError("run_trial: state sequence length must equal n + g");
    }

    TrialOutcome o;
    o.beta_true = static_cast<double>(sequence_weight(s)) / static_cast<double>(np);

    o.probe_positions = select_positions(np, cfg.kappa, rng);
    o.probe_count = static_cast<int>(o.probe_positions.size());
    if (halting_check(o.probe_count, cfg.g)) {
        o.halted = true;
        o.reason = HaltReason::kProbeBudget;
        return o;
    }

    std::vector<char> is_probe(static_cast<std::size_t>(np), 0);
    for (int pos : o.probe_positions) is_probe[static_cast<std::size_t>(pos)] = 1;

    // Covert input: 1 at probes, weight-alpha elsewhere.
    std::vector<std::uint8_t> xs(static_cast<std::size_t>(np));
    for (int i = 0; i < np; ++i) {
        xs[i] = is_probe[i] ? std::uint8_t{1} : static_cast<std::uint8_t>(rng.bernoulli(cfg.alpha));
    }
    std::vector<std::uint8_t> ys(static_cast<std::size_t>(np)), zs(static_cast<std::size_t>(np));
    ch.sample(xs, s, rng, ys, zs);

    if (cfg.kappa > 0.0) {
        const EstimatorConfig est =
            EstimatorConfig::from_channel(ch, cfg.n, cfg.g, cfg.kappa, cfg.mu);
        std::vector<std::uint8_t> probe_outputs;
        probe_outputs.reserve(o.probe_positions.size());
        for (int pos : o.probe_positions) probe_outputs.push_back(ys[pos]);
        o.beta_hat = estimate_beta(probe_outputs, est);
    } else {
        o.beta_hat = 1.0; // empty-probe convention; probing is disabled
    }
    o.estimated = true;

    const double beta_used = cfg.beta_mode == BetaMode::kOracle ? o.beta_true : o.beta_hat;
    try {
        o.selection = choose_m(ch, beta_used, cfg.zeta, cfg.alpha, cfg.n, mu0_channel(ch));
        o.selection_feasible = true;
    } catch (const InfeasibleSelectionError&) {
        o.selection_feasible = false;
    } catch (const DomainError&) {
        // The selection formula needs alpha, zeta in (0, 1); outside that range
        // no formula-driven sizes exist.
        o.selection_feasible = false;
    }

    if (cfg.fixed_sizes()) {
        o.log2_m_used = cfg.fixed_log2_m;
    } else if (o.selection_feasible) {
        o.log2_m_used = {o.selection.log2_m1, o.selection.log2_m2, o.selection.log2_m3};
    } else {
        o.halted = true;
        o.reason = HaltReason::kInfeasibleSizes;
        return o;
    }

    o.code_index = static_cast<int>(rng.uniform_int(family.u_count()));
    const Codebook& cb = family.get(o.log2_m_used, o.code_index);

    std::vector<int> coding, filler;
    split_positions(np, cfg.n, is_probe, coding, filler);
    std::vector<std::uint8_t> y_cod, x_cod;
    y_cod.reserve(coding.size());
    x_cod.reserve(coding.size());
    for (int pos : coding) {
        y_cod.push_back(ys[pos]);
        x_cod.push_back(xs[pos]);
    }

    const EncodeResult enc = likelihood_encode(y_cod, cb, rng);
    o.w1 = enc.w1;
    o.w2 = enc.w2;
    o.fallback_used = enc.fallback;
    o.w1_hat = mmi_decode(x_cod, enc.w2, cb);
    o.key_match = o.w1_hat == o.w1;

    if (sample != nullptr && np <= 62) {
        sample->probe_mask = 0;
        for (int pos : o.probe_positions) sample->probe_mask |= std::uint64_t{1} << pos;
        if (checked_pow(ch.z_size(), static_cast<int>(coding.size()),
                        std::numeric_limits<std::int64_t>::max() / 4) > 0) {
            sample->z_packed = pack_subsequence(zs, coding, ch.z_size());
        }
    }
    return o;
}

TrialOutcome run_trial(const StateDmc& ch, std::span<const std::uint8_t> s,
                       const ProtocolConfig& cfg, Rng& rng) {
    cfg.validate(ch);
    CodeFamily family(ch, cfg);
    return run_trial(ch, s, cfg, family, rng, nullptr);
}

namespace {

// Shared guard logic for the exact enumeration; empty result means feasible.
std::string exact_infeasible_reason(const StateDmc& ch, const ProtocolConfig& cfg) {
    if (!cfg.fixed_sizes()) return "exact metrics require fixed code sizes";
    const int np = cfg.n_prime();
    if (np > 26) return "total block length too large for layout enumeration";
    const std::int64_t z_total = checked_pow(ch.z_size(), np, kMaxExactObserverSpace);
    if (z_total < 0) return "observer sequence space exceeds the enumeration cap";
    std::int64_t layouts = 0;
    // Count layouts with at most g probes: sum of binomial coefficients.
    double binom = 1.0;
    for (int l = 0; l <= std::min(cfg.g, np); ++l) {
        layouts += static_cast<std::int64_t>(binom);
        binom = binom * (np - l) / (l + 1);
        if (layouts > kMaxExactProbeLayouts) return "probe layout count exceeds the cap";
    }
    const double work = static_cast<double>(layouts) * cfg.u_count * static_cast<double>(z_total);
    if (work > static_cast<double>(kMaxExactWork)) {
        return "combined layout/code/observer enumeration exceeds the work cap";
    }
    return "";
}

} // namespace

bool exact_metrics_feasible(const StateDmc& ch, const ProtocolConfig& cfg) {
    return exact_infeasible_reason(ch, cfg).empty();
}

const ExactProtocolMetrics::Cell* ExactProtocolMetrics::find_cell(std::uint64_t probe_mask,
                                                                  int code_index) const {
    auto it = cell_of.find(probe_mask * static_cast<std::uint64_t>(code_count) + code_index);
    return it == cell_of.end() ? nullptr : &cells[it->second];
}

bool cell_favored(const ExactProtocolMetrics::Cell& cell, int m1, int m2, int w1, int w2,
                  std::int64_t z_packed) {
    double column = 0.0;
    for (int a = 0; a < m1; ++a) column += cell.pair_z(a * m2 + w2, z_packed);
    const double ideal = column / static_cast<double>(m1);
    return cell.pair_z(w1 * m2 + w2, z_packed) > ideal;
}

ExactProtocolMetrics exact_protocol_metrics(const StateDmc& ch, std::span<const std::uint8_t> s,
                                            const ProtocolConfig& cfg, CodeFamily& family) {
    const std::string reason = exact_infeasible_reason(ch, cfg);
    if (!reason.empty()) throw GuardError("exact metrics: " + reason);
    const int np = cfg.n_prime();
    if (static_cast<int>(s.size()) != np) {
        throw ShapeError("exact metrics: state sequence length must equal n + g");
    }

    const int zk = ch.z_size();
    const std::int64_t z_total = checked_pow(zk, np, kMaxExactObserverSpace);
    const std::array<int, 3> sizes = cfg.fixed_log2_m;
    const int m1 = 1 << sizes[0];
    const int m2 = 1 << sizes[1];
    const int u_count = family.u_count();

    // Probability of keeping the probe layout within budget.
    double p_nonhalt = 0.0;
    {
        double binom = 1.0;
        for (int l = 0; l <= std::min(cfg.g, np); ++l) {
            p_nonhalt += binom * std::pow(cfg.kappa, l) * std::pow(1.0 - cfg.kappa, np - l);
            binom = binom * (np - l) / (l + 1);
        }
    }

    // Per-position observer laws: innocent, probe, and covert-mixture factors.
    std::vector<Eigen::VectorXd> q0(np), q1(np), qmix(np);
    for (int i = 0; i < np; ++i) {
        q0[i] = ch.marginal_q(0, s[i]).vec();
        q1[i] = ch.marginal_q(1, s[i]).vec();
        qmix[i] = (1.0 - cfg.alpha) * q0[i] + cfg.alpha * q1[i];
    }

    ExactProtocolMetrics out;
    out.p_nonhalt = p_nonhalt;
    out.code_count = u_count;

    Eigen::VectorXd induced = Eigen::VectorXd::Zero(z_total);
    Eigen::VectorXd w2_marginal = Eigen::VectorXd::Zero(m2);
    KahanSum p_error, secrecy, fallback, favored, ideal_favored;

    std::vector<char> is_probe(static_cast<std::size_t>(np));
    std::vector<int> coding, filler;
    std::vector<std::uint8_t> digits(static_cast<std::size_t>(np));

    const std::uint64_t mask_limit = std::uint64_t{1} << np;
    for (std::uint64_t mask = 0; mask < mask_limit; ++mask) {
        const int probes = std::popcount(mask);
        if (probes > cfg.g) continue;
        const double p_layout =
            std::pow(cfg.kappa, probes) * std::pow(1.0 - cfg.kappa, np - probes);

        for (int i = 0; i < np; ++i) is_probe[i] = (mask >> i) & 1 ? 1 : 0;
        split_positions(np, cfg.n, is_probe, coding, filler);

        std::vector<std::uint8_t> coding_states;
        coding_states.reserve(coding.size());
        for (int pos : coding) coding_states.push_back(s[pos]);
        const SourceSeq src =
            source_from_channel(Pmf::bernoulli(cfg.alpha), ch, coding_states);

        Eigen::VectorXd z_law_mix;
        for (int u = 0; u < u_count; ++u) {
            const Codebook& cb = family.get(sizes, u);
            const ExactInduced ex = exact_induced_joint(cb, src, {});
            const double branch_w = p_layout / static_cast<double>(u_count);
            const double cond_w = branch_w / p_nonhalt;

            if (z_law_mix.size() == 0) z_law_mix = Eigen::VectorXd::Zero(ex.z_space);
            z_law_mix += ex.z_law / static_cast<double>(u_count);

            p_error.add(cond_w * ex.p_error);
            secrecy.add(cond_w * ex.secrecy_tv_uniform_pair());
            fallback.add(cond_w * ex.fallback_prob);

            ExactProtocolMetrics::Cell cell;
            cell.probe_mask = mask;
            cell.code_index = u;
            cell.weight = cond_w;
            cell.coding_positions = coding;
            cell.pair_z = ex.pair_z;
            for (std::int64_t z = 0; z < ex.z_space; ++z) {
                for (int w2 = 0; w2 < m2; ++w2) {
                    double column = 0.0;
                    for (int a = 0; a < m1; ++a) column += cell.pair_z(a * m2 + w2, z);
                    const double ideal = column / static_cast<double>(m1);
                    for (int w1 = 0; w1 < m1; ++w1) {
                        const double mass = cell.pair_z(w1 * m2 + w2, z);
                        if (mass > ideal) {
                            cell.favored_mass += mass;
                            cell.ideal_favored_mass += ideal;
                        }
                    }
                }
            }
            favored.add(cond_w * cell.favored_mass);
            ideal_favored.add(cond_w * cell.ideal_favored_mass);

            for (int r = 0; r < m1 * m2; ++r) {
                w2_marginal[r % m2] += cond_w * cell.pair_z.row(r).sum();
            }

            out.cell_of.emplace(mask * static_cast<std::uint64_t>(u_count) + u,
                                static_cast<int>(out.cells.size()));
            out.cells.push_back(std::move(cell));
        }

        // Unconditional observer law for this layout: the code-averaged joint
        // at the coding positions times probe and filler factors elsewhere.
        std::vector<int> probe_positions;
        for (int i = 0; i < np; ++i) {
            if (is_probe[i]) probe_positions.push_back(i);
        }
        for (std::int64_t zf = 0; zf < z_total; ++zf) {
            std::int64_t rem = zf;
            for (int i = 0; i < np; ++i) {
                digits[i] = static_cast<std::uint8_t>(rem % zk);
                rem /= zk;
            }
            double mass = z_law_mix[pack_subsequence(digits, coding, zk)];
            if (mass == 0.0) continue;
            for (int pos : probe_positions) {
                mass *= q1[pos][digits[pos]];
                if (mass == 0.0) break;
            }
            for (int pos : filler) {
                mass *= qmix[pos][digits[pos]];
                if (mass == 0.0) break;
            }
            if (mass > 0.0) induced[zf] += p_layout * mass;
        }
    }

    // Halted rounds transmit the innocent all-zero sequence.
    const double p_halt = 1.0 - p_nonhalt;
    Eigen::VectorXd innocent = Eigen::VectorXd::Zero(z_total);
    for (std::int64_t zf = 0; zf < z_total; ++zf) {
        std::int64_t rem = zf;
        double prod = 1.0;
        for (int i = 0; i < np; ++i) {
            prod *= q0[i][static_cast<int>(rem % zk)];
            rem /= zk;
        }
        innocent[zf] = prod;
        induced[zf] += p_halt * prod;
    }

    KahanSum kl_sum;
    for (std::int64_t zf = 0; zf < z_total; ++zf) {
        if (induced[zf] <= 0.0) continue;
        if (innocent[zf] <= 0.0) {
            throw DivergenceError("exact metrics: induced observer law escapes the innocent support");
        }
        kl_sum.add(induced[zf] * std::log2(induced[zf] / innocent[zf]));
    }

    out.p_error = p_error.value();
    out.secrecy_tv = secrecy.value();
    out.fallback_prob = fallback.value();
    out.favored_mass = favored.value();
    out.ideal_favored_mass = ideal_favored.value();
    out.covertness_kl = std::max(0.0, kl_sum.value());
    double w2_tv = 0.0;
    for (int w2 = 0; w2 < m2; ++w2) {
        w2_tv += std::abs(w2_marginal[w2] - 1.0 / static_cast<double>(m2));
    }
    out.w2_uniformity_tv = 0.5 * w2_tv;
    return out;
}

double common_randomness_bits(const ProtocolConfig& cfg) {
    return std::log2(static_cast<double>(cfg.u_count)) +
           cfg.n_prime() * binary_entropy(cfg.kappa) +
           std::log2(static_cast<double>(cfg.n_prime()) + 1.0);
}

std::string metrics_json(const MetricsReport& m) {
    nlohmann::ordered_json j;
    j["trials"] = m.trials;
    j["halted_probe"] = m.halted_probe;
    j["halted_infeasible"] = m.halted_infeasible;
    j["evaluated"] = m.evaluated;
    j["halt_freq"] = format_sig12(m.halt_freq);
    j["halting_bound"] = format_sig12(m.halting_bound);
    j["p_e"] = format_sig12(m.p_e);
    j["p_e_sigma"] = format_sig12(m.p_e_sigma);
    j["fallback_freq"] = format_sig12(m.fallback_freq);
    j["beta_true"] = format_sig12(m.beta_true);
    j["beta_hat_mean"] = format_sig12(m.beta_hat_mean);
    j["beta_hat_sigma"] = format_sig12(m.beta_hat_sigma);
    j["selection_feasible_freq"] = format_sig12(m.selection_feasible_freq);
    j["exact_available"] = m.exact_available;
    j["exact_p_error"] = format_sig12(m.exact_p_error);
    j["exact_secrecy_tv"] = format_sig12(m.exact_secrecy_tv);
    j["exact_fallback_prob"] = format_sig12(m.exact_fallback_prob);
    j["exact_p_nonhalt"] = format_sig12(m.exact_p_nonhalt);
    j["covertness_kl"] = format_sig12(m.covertness_kl);
    j["w2_uniformity_tv"] = format_sig12(m.w2_uniformity_tv);
    j["secrecy_tv_sampled"] = format_sig12(m.secrecy_tv_sampled);
    j["secrecy_sampled_sigma"] = format_sig12(m.secrecy_sampled_sigma);
    j["log2_m_used"] = m.log2_m_used;
    j["key_bits"] = format_sig12(m.key_bits);
    j["common_randomness_bits"] = format_sig12(m.common_randomness_bits);
    j["throughput_gross"] = format_sig12(m.throughput_gross);
    j["throughput_net"] = format_sig12(m.throughput_net);
    j["active_rate_ref"] = format_sig12(m.active_rate_ref);
    j["throughput_ratio"] = format_sig12(m.throughput_ratio);
    return j.dump();
}

MetricsReport evaluate(const StateDmc& ch, std::span<const std::uint8_t> s,
                       const ProtocolConfig& cfg, std::int64_t trials, Rng& rng,
                       std::vector<std::string>* trial_lines) {
    cfg.validate(ch);
    const int np = cfg.n_prime();
    if (static_cast<int>(s.size()) != np) {
        throw ShapeError("evaluate: state sequence length must equal n + g");
    }
    if (trials < 1) throw DomainError("evaluate: trial count must be positive");

    CodeFamily family(ch, cfg);
    const bool exact_ok = exact_metrics_feasible(ch, cfg);
    ExactProtocolMetrics exact;
    if (exact_ok) exact = exact_protocol_metrics(ch, s, cfg, family);

    const int m1 = cfg.fixed_sizes() ? 1 << cfg.fixed_log2_m[0] : 0;
    const int m2 = cfg.fixed_sizes() ? 1 << cfg.fixed_log2_m[1] : 0;

    MetricsReport r;
    r.trials = trials;
    r.beta_true = static_cast<double>(sequence_weight(s)) / static_cast<double>(np);
    r.halting_bound = cfg.kappa > 0.0 ? halting_prob_bound(cfg.mu, cfg.kappa, np) : 1.0;
    r.common_randomness_bits = common_randomness_bits(cfg);
    r.log2_m_used = cfg.fixed_sizes() ? cfg.fixed_log2_m : std::array<int, 3>{-1, -1, -1};

    std::int64_t pe_hits = 0, fallback_hits = 0, favored_hits = 0, feasible_hits = 0;
    std::vector<double> beta_hats;
    KahanSum key_bits_sum;

    for (std::int64_t t = 0; t < trials; ++t) {
        Rng trial_rng = rng.derive(kTrialStream + static_cast<std::uint64_t>(t));
        TrialSample sample;
        const TrialOutcome o = run_trial(ch, s, cfg, family, trial_rng, &sample);
        if (trial_lines != nullptr) trial_lines->push_back(trial_json(o));
        if (o.estimated) beta_hats.push_back(o.beta_hat);
        if (o.halted) {
            if (o.reason == HaltReason::kProbeBudget) {
                ++r.halted_probe;
            } else {
                ++r.halted_infeasible;
            }
            continue;
        }
        ++r.evaluated;
        if (!o.key_match) ++pe_hits;
        if (o.fallback_used) ++fallback_hits;
        if (o.selection_feasible) ++feasible_hits;
        key_bits_sum.add(static_cast<double>(o.log2_m_used[0]));
        if (exact_ok) {
            const auto* cell = exact.find_cell(sample.probe_mask, o.code_index);
            if (cell == nullptr) {
                throw Error("evaluate: sampled probe layout missing from the exact enumeration");
            }
            if (cell_favored(*cell, m1, m2, o.w1, o.w2, sample.z_packed)) ++favored_hits;
        }
    }

    r.halt_freq = static_cast<double>(r.halted_probe) / static_cast<double>(trials);
    if (r.evaluated > 0) {
        r.p_e = static_cast<double>(pe_hits) / static_cast<double>(r.evaluated);
        r.p_e_sigma = frequency_sigma(pe_hits, r.evaluated);
        r.fallback_freq = static_cast<double>(fallback_hits) / static_cast<double>(r.evaluated);
        r.selection_feasible_freq =
            static_cast<double>(feasible_hits) / static_cast<double>(r.evaluated);
        r.key_bits = key_bits_sum.value() / static_cast<double>(r.evaluated);
    } else {
        r.p_e = kNaN;
        r.p_e_sigma = kNaN;
        r.fallback_freq = kNaN;
        r.selection_feasible_freq = kNaN;
        r.key_bits = kNaN;
    }
    const MeanSigma bh = mean_sigma(beta_hats);
    r.beta_hat_mean = beta_hats.empty() ? kNaN : bh.mean;
    r.beta_hat_sigma = beta_hats.empty() ? kNaN : bh.sigma;

    r.exact_available = exact_ok;
    if (exact_ok) {
        r.exact_p_error = exact.p_error;
        r.exact_secrecy_tv = exact.secrecy_tv;
        r.exact_fallback_prob = exact.fallback_prob;
        r.exact_p_nonhalt = exact.p_nonhalt;
        r.covertness_kl = exact.covertness_kl;
        r.w2_uniformity_tv = exact.w2_uniformity_tv;
        if (r.evaluated > 0) {
            const double favored_freq =
                static_cast<double>(favored_hits) / static_cast<double>(r.evaluated);
            r.secrecy_tv_sampled = favored_freq - exact.ideal_favored_mass;
            r.secrecy_sampled_sigma = frequency_sigma(favored_hits, r.evaluated);
        } else {
            r.secrecy_tv_sampled = kNaN;
            r.secrecy_sampled_sigma = kNaN;
        }
    } else {
        r.exact_p_error = kNaN;
        r.exact_secrecy_tv = kNaN;
        r.exact_fallback_prob = kNaN;
        r.exact_p_nonhalt = kNaN;
        r.covertness_kl = kNaN;
        r.w2_uniformity_tv = kNaN;
        r.secrecy_tv_sampled = kNaN;
        r.secrecy_sampled_sigma = kNaN;
    }

    try {
        r.active_rate_ref = active_rate(ch, r.beta_true);
    } catch (const Error&) {
        r.active_rate_ref = kNaN;
    }
    if (exact_ok && r.covertness_kl > 0.0) {
        const double scale = std::sqrt(static_cast<double>(cfg.n) * r.covertness_kl);
        r.throughput_gross = r.key_bits / scale;
        r.throughput_net = (r.key_bits - r.common_randomness_bits) / scale;
        r.throughput_ratio =
            r.active_rate_ref > 0.0 ? r.throughput_gross / r.active_rate_ref : kNaN;
    } else {
        r.throughput_gross = kNaN;
        r.throughput_net = kNaN;
        r.throughput_ratio = kNaN;
    }
    return r;
}

StateGen StateGen::constant_weight(double beta) {
    StateGen s;
    s.kind = StateGenKind::kConstantWeight;
    s.beta = beta;
    return s;
}

StateGen StateGen::iid_bernoulli(double beta) {
    StateGen s;
    s.kind = StateGenKind::kIidBernoulli;
    s.beta = beta;
    return s;
}

StateGen StateGen::explicit_sequence(std::vector<std::uint8_t> seq) {
    StateGen s;
    s.kind = StateGenKind::kExplicit;
    s.explicit_seq = std::move(seq);
    return s;
}

std::vector<std::uint8_t> StateGen::make(int length, Rng& rng) const {
    if (length < 1) throw DomainError("state generator: length must be positive");
    switch (kind) {
        case StateGenKind::kConstantWeight: {
            if (!(beta >= 0.0 && beta <= 1.0)) {
                throw DomainError("state generator: weight fraction must lie in [0, 1]");
            }
            const int weight = static_cast<int>(std::floor(beta * length));
            std::vector<int> idx(static_cast<std::size_t>(length));
            std::iota(idx.begin(), idx.end(), 0);
            for (int i = 0; i < weight; ++i) {
                const int j = i + static_cast<int>(rng.uniform_int(length - i));
                std::swap(idx[i], idx[j]);
            }
            std::vector<std::uint8_t> s(static_cast<std::size_t>(length), 0);
            for (int i = 0; i < weight; ++i) s[idx[i]] = 1;
            return s;
        }
        case StateGenKind::kIidBernoulli: {
            if (!(beta >= 0.0 && beta <= 1.0)) {
                throw DomainError("state generator: weight fraction must lie in [0, 1]");
            }
            std::vector<std::uint8_t> s(static_cast<std::size_t>(length));
            for (auto& v : s) v = static_cast<std::uint8_t>(rng.bernoulli(beta));
            return s;
        }
        case StateGenKind::kExplicit: {
            if (static_cast<int>(explicit_seq.size()) != length) {
                throw ShapeError("state generator: explicit sequence length mismatch");
            }
            for (std::uint8_t v : explicit_seq) {
                if (v > 1) throw DomainError("state generator: states must be binary");
            }
            return explicit_seq;
        }
    }
    throw DomainError("state generator: unknown kind");
}

std::string to_string(StateGenKind kind) {
    switch (kind) {
        case StateGenKind::kConstantWeight: return "constant-weight";
        case StateGenKind::kIidBernoulli: return "iid-bernoulli";
        case StateGenKind::kExplicit: return "explicit";
    }
    return "constant-weight";
}

StateGenKind state_gen_kind_from_string(const std::string& name) {
    if (name == "constant-weight") return StateGenKind::kConstantWeight;
    if (name == "iid-bernoulli") return StateGenKind::kIidBernoulli;
    if (name == "explicit") return StateGenKind::kExplicit;
    throw ParseError("unknown state generator '" + name + "'");
}

CodePerformance evaluate_code_on_state(const StateDmc& ch, const Codebook& cb, double alpha,
                                       std::span<const std::uint8_t> s) {
    if (static_cast<int>(s.size()) != cb.n()) {
        throw ShapeError("code evaluation: state sequence length must equal the code length");
    }
    const SourceSeq src = source_from_channel(Pmf::bernoulli(alpha), ch, s);
    const ExactInduced ex = exact_induced_joint(cb, src, {});
    return {ex.p_error, ex.secrecy_tv_independence()};
}

namespace {

struct FamilyTable {
    int pool = 0;
    int states = 0;
    std::vector<CodePerformance> perf; // code-major: perf[f * states + s]
    double eps_hat = 0.0;
};

FamilyTable build_family_table(const StateDmc& ch, const std::vector<Codebook>& family,
                               const std::vector<std::vector<std::uint8_t>>& state_set,
                               double alpha) {
    if (family.empty()) throw PreconditionError("derandomize: empty candidate family");
    if (state_set.empty()) throw PreconditionError("derandomize: empty state set");
    const int n = family.front().n();
    for (const auto& cb : family) {
        if (cb.n() != n) throw ShapeError("derandomize: candidate codes differ in length");
    }
    for (const auto& s : state_set) {
        if (static_cast<int>(s.size()) != n) {
            throw ShapeError("derandomize: state sequence length must equal the code length");
        }
    }

    FamilyTable t;
    t.pool = static_cast<int>(family.size());
    t.states = static_cast<int>(state_set.size());
    t.perf.resize(static_cast<std::size_t>(t.pool) * t.states);
    parallel_for(t.pool, [&](std::int64_t f) {
        for (int s = 0; s < t.states; ++s) {
            t.perf[f * t.states + s] =
                evaluate_code_on_state(ch, family[f], alpha, state_set[s]);
        }
    });

    for (int s = 0; s < t.states; ++s) {
        double err = 0.0, sec = 0.0;
        for (int f = 0; f < t.pool; ++f) {
            err += t.perf[f * t.states + s].p_error;
            sec += t.perf[f * t.states + s].secrecy_tv;
        }
        err /= t.pool;
        sec /= t.pool;
        t.eps_hat = std::max(t.eps_hat, std::max(err, sec));
    }
    return t;
}

// Averaged metrics of a subset, per state.
void subset_averages(const FamilyTable& t, const std::vector<int>& subset,
                     std::vector<double>& err, std::vector<double>& sec) {
    err.assign(static_cast<std::size_t>(t.states), 0.0);
    sec.assign(static_cast<std::size_t>(t.states), 0.0);
    for (int f : subset) {
        for (int s = 0; s < t.states; ++s) {
            err[s] += t.perf[f * t.states + s].p_error;
            sec[s] += t.perf[f * t.states + s].secrecy_tv;
        }
    }
    const double inv = 1.0 / static_cast<double>(subset.size());
    for (int s = 0; s < t.states; ++s) {
        err[s] *= inv;
        sec[s] *= inv;
    }
}

std::vector<int> draw_subset(int pool, int size, Rng& rng) {
    std::vector<int> idx(static_cast<std::size_t>(pool));
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < size; ++i) {
        const int j = i + static_cast<int>(rng.uniform_int(pool - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(static_cast<std::size_t>(size));
    std::sort(idx.begin(), idx.end());
    return idx;
}

} // namespace

DerandomizeResult derandomize(const StateDmc& ch, const std::vector<Codebook>& family,
                              const std::vector<std::vector<std::uint8_t>>& state_set,
                              double alpha, double eps_prime, int selected_size, int retry_cap,
                              bool enforce_condition, Rng& rng) {
    if (!(eps_prime > 0.0)) throw DomainError("derandomize: eps' must be positive");
    if (retry_cap < 1) throw DomainError("derandomize: retry cap must be positive");
    const FamilyTable table = build_family_table(ch, family, state_set, alpha);
    const int n = family.front().n();

    DerandomizeResult r;
    r.eps_prime = eps_prime;
    r.eps_hat = table.eps_hat;
    r.min_family_size = (2.0 / eps_prime) * (1.0 + n);
    const int size = selected_size > 0
                         ? selected_size
                         : static_cast<int>(std::floor(r.min_family_size)) + 1;
    if (size < 1 || size > table.pool) {
        throw PreconditionError("derandomize: requested subset size " + std::to_string(size) +
                                " exceeds the candidate pool " + std::to_string(table.pool));
    }
    r.lemma_condition_met = eps_prime > 2.0 * std::log2(1.0 + table.eps_hat) &&
                            static_cast<double>(size) > r.min_family_size;
    if (enforce_condition && !r.lemma_condition_met) {
        throw PreconditionError(
            "derandomize: sufficient conditions fail (eps'=" + format_sig12(eps_prime) +
            ", 2*log2(1+eps)=" + format_sig12(2.0 * std::log2(1.0 + table.eps_hat)) +
            ", size=" + std::to_string(size) +
            ", threshold=" + format_sig12(r.min_family_size) + ")");
    }

    std::vector<double> err, sec;
    double worst_err = 0.0, worst_sec = 0.0;
    for (int attempt = 1; attempt <= retry_cap; ++attempt) {
        const std::vector<int> subset = draw_subset(table.pool, size, rng);
        subset_averages(table, subset, err, sec);
        const double max_err = *std::max_element(err.begin(), err.end());
        const double max_sec = *std::max_element(sec.begin(), sec.end());
        if (max_err <= eps_prime && max_sec <= eps_prime) {
            r.selected = subset;
            r.attempts = attempt;
            r.family_error = err;
            r.family_secrecy = sec;
            return r;
        }
        worst_err = std::max(worst_err, max_err);
        worst_sec = std::max(worst_sec, max_sec);
    }
    throw SearchError("derandomize: no admissible subset in " + std::to_string(retry_cap) +
                      " attempts (worst averaged error " + format_sig12(worst_err) +
                      ", worst averaged secrecy " + format_sig12(worst_sec) + ", eps' " +
                      format_sig12(eps_prime) + ")");
}

FamilySearchStats derandomize_success_rate(const StateDmc& ch, const std::vector<Codebook>& family,
                                           const std::vector<std::vector<std::uint8_t>>& state_set,
                                           double alpha, double eps_prime, int selected_size,
                                           int samples, Rng& rng) {
    if (!(eps_prime > 0.0)) throw DomainError("derandomize: eps' must be positive");
    if (samples < 1) throw DomainError("derandomize: sample count must be positive");
    const FamilyTable table = build_family_table(ch, family, state_set, alpha);
    const int size = selected_size > 0 ? selected_size : 1;
    if (size > table.pool) {
        throw PreconditionError("derandomize: subset size exceeds the candidate pool");
    }

    FamilySearchStats stats;
    stats.attempts = samples;
    std::vector<double> err, sec;
    for (int i = 0; i < samples; ++i) {
        const std::vector<int> subset = draw_subset(table.pool, size, rng);
        subset_averages(table, subset, err, sec);
        const double max_err = *std::max_element(err.begin(), err.end());
        const double max_sec = *std::max_element(sec.begin(), sec.end());
        if (max_err <= eps_prime && max_sec <= eps_prime) ++stats.successes;
    }
    return stats;
}

} // namespace covertkey
