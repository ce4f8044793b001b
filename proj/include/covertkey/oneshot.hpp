#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "covertkey/channel.hpp"
#include "covertkey/pmf.hpp"
#include "covertkey/rng.hpp"

namespace covertkey {

// Random-codebook source coding with a likelihood encoder and a maximum
// empirical-information decoder, together with evaluators for its one-shot
// reliability and secrecy bounds and an exact enumeration of the induced joint
// distribution at tiny scale.

// Hard cap on the number of symbols a generated codebook may hold.
inline constexpr std::int64_t kMaxCodebookSymbols = std::int64_t{1} << 24;
// Cap on |Y|^n * (index count) for exact enumeration.
inline constexpr std::int64_t kMaxExactEnumeration = std::int64_t{1} << 20;

// Codebook of m1*m2*m3 length-n entries over the dense alphabet {0..y_size-1},
// indexed by a key index w1, a public index w2, and an auxiliary index w3.
class Codebook {
public:
    Codebook(int n, int m1, int m2, int m3, int y_size, std::vector<std::uint8_t> symbols);

    int n() const { return n_; }
    int m1() const { return m1_; }
    int m2() const { return m2_; }
    int m3() const { return m3_; }
    int y_size() const { return y_size_; }
    std::int64_t total_entries() const { return std::int64_t{1} * m1_ * m2_ * m3_; }

    std::span<const std::uint8_t> entry(int w1, int w2, int w3) const;

private:
    int n_, m1_, m2_, m3_, y_size_;
    std::vector<std::uint8_t> symbols_; // entry-major: ((w1*m2 + w2)*m3 + w3)*n + position
};

// Entries drawn iid symbol-by-symbol from qy. Throws GuardError beyond
// kMaxCodebookSymbols total symbols.
Codebook gen_codebook(const Pmf& qy, int n, int m1, int m2, int m3, Rng& rng);

struct EncodeResult {
    int w1 = 0;
    int w2 = 0;
    bool fallback = false; // observation matched no entry; pair drawn uniformly
};

// Index-pair probabilities the likelihood encoder samples from: entry-match
// counts over w3, normalized; uniform when nothing matches.
Eigen::MatrixXd encode_distribution(std::span<const std::uint8_t> y, const Codebook& cb);

// Draw (w1, w2) from encode_distribution(y).
EncodeResult likelihood_encode(std::span<const std::uint8_t> y, const Codebook& cb, Rng& rng);

// Sequence scoring function for the decoder.
using ScoreFn = std::function<double(std::span<const std::uint8_t>, std::span<const std::uint8_t>)>;

// Default decoder score: mutual information of the joint empirical type.
ScoreFn empirical_mi_score(int x_size, int y_size);

// Decode the key index from an own-sequence x and the public index w2:
// argmax over w1 of max over w3 of score(x, entry(w1, w2, w3)), smallest
// maximizing w1 on ties. Empty score uses empirical_mi_score(2, cb.y_size()).
int mmi_decode(std::span<const std::uint8_t> x, int w2, const Codebook& cb,
               const ScoreFn& score = {});

// Symbol-level scoring function nu(x, y) for the one-shot bound evaluators.
using SymbolScore = std::function<double(int, int)>;

// Reliability bound right-hand side:
//   sum_{x,y} P_XY(x,y) * min(1, key_count * q(x,y))
//   + (2 + total_count) * exp(-(total_count - 1) * mu_Q * delta^2 / 32) + delta
// with q(x,y) = sum_{y'} Q_Y(y') * 1{nu(x,y') >= nu(x,y)} and mu_Q = min_y Q_Y(y).
// key_count is the number of indices the decoder must resolve at a fixed public
// index (the key-group size in the chosen index grouping); total_count is the
// full index count. Valid for 2/((total_count-1)*mu_Q) < delta < 1.
double reliability_bound_rhs(const JointPmf& p_xy, const Pmf& qy, std::int64_t key_count,
                             std::int64_t total_count, double delta, const SymbolScore& nu);

// Secrecy bound right-hand side:
//   sum_{y,z} P_YZ(y,z) * 1{P_YZ(y,z) >= gamma * P_Z(z) * Q_Y(y)}
//   + (1/2) * sqrt(gamma / rand_count) + delta/2
//   + (1/2) * (2 + total_count) * exp(-(total_count - 1) * mu_Q * delta^2 / 32)
// where rand_count is the index count the encoder randomizes over at a fixed
// key index. Same delta validity range.
double secrecy_bound_rhs(const JointPmf& p_yz, const Pmf& qy, std::int64_t rand_count,
                         std::int64_t total_count, double gamma, double delta);

// Smallest admissible delta (exclusive) for the bound evaluators.
double delta_lower_limit(std::int64_t total_count, const Pmf& qy);

// Grid minimization over admissible tuning parameters; both bounds hold for
// every admissible value, so the grid minimum is itself a valid bound.
struct ReliabilityTuning {
    double delta = 0.0;
    double rhs = 0.0;
};
ReliabilityTuning tune_reliability_rhs(const JointPmf& p_xy, const Pmf& qy, std::int64_t key_count,
                                       std::int64_t total_count, const SymbolScore& nu,
                                       int grid_points = 64);

struct SecrecyTuning {
    double gamma = 0.0;
    double delta = 0.0;
    double rhs = 0.0;
};
SecrecyTuning tune_secrecy_rhs(const JointPmf& p_yz, const Pmf& qy, std::int64_t rand_count,
                               std::int64_t total_count, int grid_points = 64);

// Memoryless three-way source: P(x, y, z) over dense index alphabets.
class XyzPmf {
public:
    XyzPmf(int x_size, int y_size, int z_size, Eigen::VectorXd flat);

    // Chain construction P(x) * P(y|x) * P(z|y).
    static XyzPmf from_chain(const Pmf& px, const CondPmf& y_given_x, const CondPmf& z_given_y);
    // Binary input feeding a per-input joint output law.
    static XyzPmf from_input_slices(const Pmf& px, const std::vector<JointPmf>& yz_given_x);

    int x_size() const { return x_size_; }
    int y_size() const { return y_size_; }
    int z_size() const { return z_size_; }
    double operator()(int x, int y, int z) const {
        return flat_[(x * y_size_ + y) * z_size_ + z];
    }

    JointPmf xy() const;
    JointPmf yz() const;
    Pmf x_marginal() const;
    Pmf y_marginal() const;
    Pmf z_marginal() const;

private:
    int x_size_, y_size_, z_size_;
    Eigen::VectorXd flat_;
};

// Per-position source laws for an n-position memoryless block.
struct SourceSeq {
    std::vector<XyzPmf> positions;

    int length() const { return static_cast<int>(positions.size()); }
    void validate() const;
};

// Positions i drawn as (X_i, Y_i, Z_i) ~ qx(x) * channel joint at (x, s_i).
SourceSeq source_from_channel(const Pmf& qx, const StateDmc& ch, std::span<const std::uint8_t> s);

// Exact distributions induced by one codebook: the encoder's index pair, the
// decoder's key estimate, and the observer sequence, enumerated in full.
struct ExactInduced {
    int m1 = 0, m2 = 0;
    std::int64_t z_space = 0;   // z-sequence count
    double p_error = 0.0;       // P(decoded key != encoded key)
    double fallback_prob = 0.0; // P(observation matched no entry)
    Eigen::MatrixXd key_joint;  // m1 x m1 joint of (encoded key, decoded key)
    Eigen::MatrixXd pair_z;     // (m1*m2) x z_space joint of (w1, w2, z-sequence)
    Eigen::VectorXd z_law;      // source marginal of the z-sequence

    // tv(P_{W1 W2 Z}, Unif(W1) x P_{W2 Z}).
    double secrecy_tv_uniform_pair() const;
    // tv(P_{W1 W2 Z}, P_{W1 W2} x P_Z): independence of the index pair from the
    // observation, the per-code secrecy quantity averaged by the code-family
    // elimination argument.
    double secrecy_tv_independence() const;
    // tv(P_{W1 Z}, Unif(W1) x P_Z): the key-only one-shot secrecy quantity.
    double secrecy_tv_uniform_key() const;
    // tv(P_{W2}, Unif(W2)): uniformity of the public index.
    double public_uniformity_tv() const;
};

ExactInduced exact_induced_joint(const Codebook& cb, const SourceSeq& src, const ScoreFn& score);

// Bound-vs-exact verification over freshly drawn codebooks at one-shot scale
// (single-position source). Per-codebook values are exact; only the average
// over codebooks is Monte Carlo.
struct OneShotVerifyCell {
    int m1 = 0, m2 = 0, m3 = 0;
    std::int64_t key_count = 0, rand_count = 0, total_count = 0;
    int codebooks = 0;
    double delta = 0.0, gamma = 0.0;
    double pe_mean = 0.0, pe_sigma = 0.0, pe_bound = 0.0;
    double sec_mean = 0.0, sec_sigma = 0.0, sec_bound = 0.0;
    bool pe_pass = false, sec_pass = false;

    void finalize() {
        pe_pass = pe_mean <= pe_bound + 3.0 * pe_sigma;
        sec_pass = sec_mean <= sec_bound + 3.0 * sec_sigma;
    }
};

OneShotVerifyCell verify_oneshot_bounds(const XyzPmf& source, const Pmf& qy, int m1, int m2,
                                        int m3, std::int64_t key_count, std::int64_t rand_count,
                                        const SymbolScore& nu, int codebooks, Rng& rng);

// One JSON object per line, fixed key order, for the verification report.
std::string oneshot_cell_json(const OneShotVerifyCell& cell);

} // namespace covertkey
