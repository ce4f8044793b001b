#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "covertkey/channel.hpp"
#include "covertkey/estimator.hpp"
#include "covertkey/oneshot.hpp"
#include "covertkey/pmf.hpp"
#include "covertkey/rng.hpp"

namespace covertkey {

// Assembled key-generation round trip over the two-state channel: probe-based
// weight estimation with a halting budget, covert input sampling, codebook
// encoding of the receiver sequence, and key recovery from the transmitted
// sequence plus the public index. Metrics are sampled by Monte Carlo and, at
// tiny scale, computed exactly by enumerating probe layouts and observer
// sequences.

// Which weight feeds the code-size selection recorded per trial.
enum class BetaMode { kOracle, kEstimated };

std::string to_string(BetaMode mode);
BetaMode beta_mode_from_string(const std::string& name);

struct ProtocolConfig {
    int n = 0;          // coding block length
    int g = 0;          // probe budget; total uses n' = n + g
    double alpha = 0.0; // covert input weight
    double kappa = 0.0; // per-position probe probability
    double zeta = 0.0;  // code-size selection slack
    double mu = 0.0;    // halting slack
    BetaMode beta_mode = BetaMode::kOracle;
    int u_count = 1;                 // shared code family size
    std::uint64_t master_seed = 0;   // root of all shared randomness

    // Operative code sizes as log2 integers; any negative entry switches to
    // per-trial formula-driven sizes (feasible only for very small targets).
    std::array<int, 3> fixed_log2_m{-1, -1, -1};

    // Symbol law the codebook entries are drawn from; unset uses the weight-
    // alpha mixture of the two main-channel laws at state 0.
    std::optional<Pmf> codebook_law;

    int n_prime() const { return n + g; }
    bool fixed_sizes() const {
        return fixed_log2_m[0] >= 0 && fixed_log2_m[1] >= 0 && fixed_log2_m[2] >= 0;
    }

    // Family size below which the code-elimination argument gives no guarantee.
    static double family_size_threshold(int n) {
        const double nd = static_cast<double>(n);
        return 2.0 * nd * nd * nd * nd * (nd + 1.0);
    }

    // Throws on out-of-range scalars; returns human-readable warnings for
    // permitted but guarantee-weakening settings (small code family).
    std::vector<std::string> validate(const StateDmc& ch) const;
};

// Weight-alpha mixture of the state-0 main-channel laws, the default entry law.
Pmf default_codebook_law(const StateDmc& ch, double alpha);
// The configured entry law, or the default when none is set.
Pmf protocol_codebook_law(const StateDmc& ch, const ProtocolConfig& cfg);

// Lazily built codebooks keyed by (sizes, code index); entry symbols are a pure
// function of the master seed, so any call order yields the same codebooks.
// Not thread-safe: confine one instance to one thread.
class CodeFamily {
public:
    CodeFamily(const StateDmc& ch, const ProtocolConfig& cfg);

    const Codebook& get(const std::array<int, 3>& log2_m, int code_index);
    int u_count() const { return u_count_; }
    const Pmf& entry_law() const { return qy_; }

private:
    Pmf qy_;
    int n_;
    int u_count_;
    std::uint64_t master_seed_;
    std::unordered_map<std::uint64_t, Codebook> cache_;
};

enum class HaltReason { kNone, kProbeBudget, kInfeasibleSizes };

std::string to_string(HaltReason reason);

struct TrialOutcome {
    bool halted = false;
    HaltReason reason = HaltReason::kNone;
    double beta_true = 0.0;
    double beta_hat = 0.0; // raw estimate; meaningful only when estimation ran
    bool estimated = false;
    int probe_count = 0;
    std::vector<int> probe_positions;

    bool selection_feasible = false;
    MSelection selection;               // formula record, valid when feasible
    std::array<int, 3> log2_m_used{};   // operative sizes (non-halted trials)

    int code_index = -1;
    int w1 = -1, w2 = -1, w1_hat = -1;
    bool fallback_used = false;
    bool key_match = false;
};

// One JSON object per trial, fixed key order; key fields are omitted on halted
// trials and estimation fields are omitted when no estimate was formed.
std::string trial_json(const TrialOutcome& t);

// Compact per-trial record for cross-checks against the exact enumeration.
struct TrialSample {
    std::uint64_t probe_mask = 0;
    std::int64_t z_packed = -1; // observer subsequence at the coding positions
};

// One protocol round: probe layout draw, halting check, covert input fill
// (1 at probes, weight-alpha elsewhere), channel sampling, weight estimation
// from the probe outputs, size selection from the configured weight source,
// code index draw, encoding of the first n non-probe receiver outputs, and key
// recovery from the transmitted subsequence and the public index.
TrialOutcome run_trial(const StateDmc& ch, std::span<const std::uint8_t> s,
                       const ProtocolConfig& cfg, CodeFamily& family, Rng& rng,
                       TrialSample* sample = nullptr);
// Convenience overload building a fresh family per call.
TrialOutcome run_trial(const StateDmc& ch, std::span<const std::uint8_t> s,
                       const ProtocolConfig& cfg, Rng& rng);

// Enumeration caps for the exact metric path.
inline constexpr std::int64_t kMaxExactProbeLayouts = std::int64_t{1} << 16;
inline constexpr std::int64_t kMaxExactObserverSpace = std::int64_t{1} << 20;
inline constexpr std::int64_t kMaxExactWork = std::int64_t{1} << 26;

// True when the exact path's guards admit this configuration (fixed sizes and
// all enumeration caps satisfied).
bool exact_metrics_feasible(const StateDmc& ch, const ProtocolConfig& cfg);

// Exact distributions of the non-halting protocol, obtained by enumerating
// every admissible probe layout and code index. Key-path quantities are
// conditional on not halting; the observer's law is unconditional (a halted
// round transmits the innocent all-zero sequence).
struct ExactProtocolMetrics {
    double p_nonhalt = 1.0;
    double p_error = 0.0;
    double secrecy_tv = 0.0; // tv(P_{W1 W2 Z}, Unif(W1) x P_{W2 Z})
    double fallback_prob = 0.0;
    double covertness_kl = 0.0; // bits, against the all-zero-input observer law
    double w2_uniformity_tv = 0.0;

    // Mass of the favoring set {P > ideal product} under both laws; their
    // difference equals secrecy_tv, and the actual-law mass is the target the
    // sampled secrecy estimator tracks.
    double favored_mass = 0.0;
    double ideal_favored_mass = 0.0;

    struct Cell {
        std::uint64_t probe_mask = 0;
        int code_index = 0;
        double weight = 0.0; // P(layout, code | not halting)
        std::vector<int> coding_positions;
        Eigen::MatrixXd pair_z; // conditional (m1*m2) x z_space law
        double favored_mass = 0.0;
        double ideal_favored_mass = 0.0;
    };
    std::vector<Cell> cells;
    int code_count = 1; // stride of the cell lookup key
    std::unordered_map<std::uint64_t, int> cell_of; // probe_mask * code_count + code_index

    const Cell* find_cell(std::uint64_t probe_mask, int code_index) const;
};

// Whether (w1, w2, packed z) lies in the cell's favoring set; the same strict
// comparison classifies sampled trials and the exact favored masses.
bool cell_favored(const ExactProtocolMetrics::Cell& cell, int m1, int m2, int w1, int w2,
                  std::int64_t z_packed);

ExactProtocolMetrics exact_protocol_metrics(const StateDmc& ch, std::span<const std::uint8_t> s,
                                            const ProtocolConfig& cfg, CodeFamily& family);

struct MetricsReport {
    std::int64_t trials = 0;
    std::int64_t halted_probe = 0;
    std::int64_t halted_infeasible = 0;
    std::int64_t evaluated = 0; // non-halted trials; the three counts sum to trials

    double halt_freq = 0.0;
    double halting_bound = 0.0; // closed-form probe-budget bound

    double p_e = 0.0; // key disagreement frequency over evaluated trials
    double p_e_sigma = 0.0;
    double fallback_freq = 0.0;

    double beta_true = 0.0;
    double beta_hat_mean = 0.0;
    double beta_hat_sigma = 0.0;
    double selection_feasible_freq = 0.0;

    bool exact_available = false;
    double exact_p_error = 0.0;
    double exact_secrecy_tv = 0.0;
    double exact_fallback_prob = 0.0;
    double exact_p_nonhalt = 0.0;
    double covertness_kl = 0.0;
    double w2_uniformity_tv = 0.0;

    // Unbiased sampled secrecy: favoring-set frequency minus the exact ideal
    // mass of the same set; requires the exact path.
    double secrecy_tv_sampled = 0.0;
    double secrecy_sampled_sigma = 0.0;

    std::array<int, 3> log2_m_used{};
    double key_bits = 0.0; // log2(M1); averaged over trials when sizes vary
    double common_randomness_bits = 0.0;
    double throughput_gross = 0.0; // key_bits / sqrt(n * covertness_kl)
    double throughput_net = 0.0;   // subtracts the common-randomness bits
    double active_rate_ref = 0.0;  // closed-form rate at the true weight
    double throughput_ratio = 0.0; // gross over the closed-form reference
};

// One JSON object, fixed key order, every real rendered at 12 significant digits.
std::string metrics_json(const MetricsReport& m);

// Monte-Carlo metric evaluation over `trials` rounds, with exact enumeration
// joined in whenever the configuration admits it. Trial JSON lines are appended
// to `trial_lines` when non-null. Deterministic per rng seed.
MetricsReport evaluate(const StateDmc& ch, std::span<const std::uint8_t> s,
                       const ProtocolConfig& cfg, std::int64_t trials, Rng& rng,
                       std::vector<std::string>* trial_lines = nullptr);

// Accounted secret shared randomness: code index, probe layout, and the padded
// estimate broadcast: log2(U) + n' * Hb(kappa) + log2(n' + 1).
double common_randomness_bits(const ProtocolConfig& cfg);

// State-sequence generators for experiment configs.
enum class StateGenKind { kConstantWeight, kIidBernoulli, kExplicit };

struct StateGen {
    StateGenKind kind = StateGenKind::kConstantWeight;
    double beta = 0.0;
    std::vector<std::uint8_t> explicit_seq;

    static StateGen constant_weight(double beta);
    static StateGen iid_bernoulli(double beta);
    static StateGen explicit_sequence(std::vector<std::uint8_t> s);

    // Constant-weight: floor(beta * length) ones at uniformly drawn positions.
    // Explicit sequences must already have the requested length.
    std::vector<std::uint8_t> make(int length, Rng& rng) const;
};

std::string to_string(StateGenKind kind);
StateGenKind state_gen_kind_from_string(const std::string& name);

// Exact per-code performance on one state sequence: decoding error and the
// independence secrecy tv, for a weight-alpha input through the channel.
struct CodePerformance {
    double p_error = 0.0;
    double secrecy_tv = 0.0;
};

CodePerformance evaluate_code_on_state(const StateDmc& ch, const Codebook& cb, double alpha,
                                       std::span<const std::uint8_t> s);

struct DerandomizeResult {
    std::vector<int> selected; // ascending indices into the candidate family
    int attempts = 0;
    double eps_hat = 0.0;        // worst pool-average metric across states
    double eps_prime = 0.0;
    double min_family_size = 0.0; // (2 / eps') * (1 + n)
    bool lemma_condition_met = false;
    std::vector<double> family_error;   // per state, selected-family average
    std::vector<double> family_secrecy; // per state, selected-family average
};

// Select `selected_size` codes (0 = smallest size exceeding the threshold)
// uniformly without replacement from the candidate family until the averaged
// error and secrecy stay within eps_prime for every state sequence. All
// per-code values are exact; retries draw fresh subsets. When
// `enforce_condition` is set, the sufficient conditions eps' > 2*log2(1+eps)
// and size > (2/eps')(1+n) are required up front; otherwise the search runs
// with no success guarantee and the result records whether they held.
DerandomizeResult derandomize(const StateDmc& ch, const std::vector<Codebook>& family,
                              const std::vector<std::vector<std::uint8_t>>& state_set,
                              double alpha, double eps_prime, int selected_size, int retry_cap,
                              bool enforce_condition, Rng& rng);

// Success frequency of the subset constraint check over independently drawn
// subsets, for regimes where the sufficient conditions do not hold.
struct FamilySearchStats {
    int attempts = 0;
    int successes = 0;
};

FamilySearchStats derandomize_success_rate(const StateDmc& ch, const std::vector<Codebook>& family,
                                           const std::vector<std::vector<std::uint8_t>>& state_set,
                                           double alpha, double eps_prime, int selected_size,
                                           int samples, Rng& rng);

} // namespace covertkey
