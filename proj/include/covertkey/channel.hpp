#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "covertkey/pmf.hpp"
#include "covertkey/rng.hpp"

namespace covertkey {

// Structural checks on a two-state channel, with the worst-case entry deviation
// backing each flag so near-misses are diagnosable.
struct HypothesisReport {
    double tol = 0.0;

    bool p0_state_invariant = false;   // input-0 main-channel law identical across states
    double p0_deviation = 0.0;         // max |P(y | x=0, s=0) - P(y | x=0, s=1)|

    bool p1_states_distinct = false;   // input-1 main-channel laws differ across states
    double p1_deviation = 0.0;         // max |P(y | x=1, s=0) - P(y | x=1, s=1)|

    std::array<bool, 2> zero_input_independent{};  // per state: joint at x=0 factorizes
    std::array<double, 2> zero_input_deviation{};  // max |joint - product of marginals|

    std::array<bool, 2> one_input_independent{};   // per state: joint at x=1 factorizes
    std::array<double, 2> one_input_deviation{};

    // Hypotheses required by the two-state achievable-rate formula.
    bool two_state_rate_ok() const {
        return p0_state_invariant && p1_states_distinct && zero_input_independent[0] &&
               zero_input_independent[1];
    }
};

// Memoryless channel with binary input x, binary state s, and a joint output law
// over (y, z) per (x, s) pair. Joints are stored unfactored: correlation between
// the two receivers' outputs is representable.
class StateDmc {
public:
    // Slices indexed by (x, s): w00 = (x=0, s=0), w10 = (x=1, s=0),
    // w01 = (x=0, s=1), w11 = (x=1, s=1). All must share alphabet sizes.
    StateDmc(JointPmf w00, JointPmf w10, JointPmf w01, JointPmf w11);

    int y_size() const { return y_size_; }
    int z_size() const { return z_size_; }

    const JointPmf& joint_pq(int x, int s) const;
    Pmf marginal_p(int x, int s) const; // first receiver's output law
    Pmf marginal_q(int x, int s) const; // observer's output law

    // Conditional law of the first receiver's output given the input, at state s.
    CondPmf cond_p(int s) const;
    CondPmf cond_q(int s) const;

    HypothesisReport validate_hypotheses(double tol) const;

    // Sample output pairs for an input sequence under a state sequence.
    // Deterministic given the rng state; sequences must have equal length.
    void sample(std::span<const std::uint8_t> xs, std::span<const std::uint8_t> ss, Rng& rng,
                std::span<std::uint8_t> ys, std::span<std::uint8_t> zs) const;

private:
    int y_size_;
    int z_size_;
    std::array<JointPmf, 4> slices_;        // index 2*s + x
    std::array<Eigen::VectorXd, 4> flat_;   // row-major flattened slice, for sampling

    const JointPmf& slice(int x, int s) const { return slices_[2 * s + x]; }
};

// The worked two-state example: at s=0 both receivers see independent symmetric
// flips (0.1 toward the first receiver, 0.4 toward the observer); at s=1 the first
// receiver's flip rates become input-asymmetric (0.1 at x=0, 0.2 at x=1) and the
// observer's flip rate is 0.3. Outputs are conditionally independent throughout.
StateDmc example_two_state();

// Channel file I/O: JSON object with "y_size", "z_size", and a "slices" object
// holding four row-major probability lists keyed "x0s0", "x1s0", "x0s1", "x1s1".
StateDmc load_channel(const std::string& path);
void save_channel(const StateDmc& ch, const std::string& path);

} // namespace covertkey
