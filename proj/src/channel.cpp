#include "covertkey/channel.hpp"

#include <cmath>
#include <utility>

namespace covertkey {

namespace {

// Row-major flattening of a joint slice for inverse-CDF sampling.
Eigen::VectorXd flatten(const JointPmf& j) {
    Eigen::VectorXd flat(j.row_size() * j.col_size());
    for (int y = 0; y < j.row_size(); ++y) {
        for (int z = 0; z < j.col_size(); ++z) {
            flat[y * j.col_size() + z] = j(y, z);
        }
    }
    return flat;
}

double max_abs_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

// Worst-case deviation of a joint slice from the product of its marginals.
double independence_deviation(const JointPmf& j) {
    const JointPmf prod = JointPmf::outer(j.row_marginal(), j.col_marginal());
    return (j.mat() - prod.mat()).cwiseAbs().maxCoeff();
}

// Joint output law for conditionally independent receivers with binary flips.
JointPmf binary_product_slice(double p_flip_to_1, double q_flip_to_1) {
    return JointPmf::outer(Pmf::bernoulli(p_flip_to_1), Pmf::bernoulli(q_flip_to_1));
}

} // namespace

StateDmc::StateDmc(JointPmf w00, JointPmf w10, JointPmf w01, JointPmf w11)
    : y_size_(w00.row_size()),
      z_size_(w00.col_size()),
      slices_{std::move(w00), std::move(w10), std::move(w01), std::move(w11)} {
    for (const JointPmf& s : slices_) {
        if (s.row_size() != y_size_ || s.col_size() != z_size_) {
            throw AlphabetError("StateDmc: slices must share output alphabet sizes");
        }
    }
    for (int i = 0; i < 4; ++i) flat_[i] = flatten(slices_[i]);
}

const JointPmf& StateDmc::joint_pq(int x, int s) const {
    if (x < 0 || x > 1 || s < 0 || s > 1) throw DomainError("StateDmc: x and s are binary");
    return slice(x, s);
}

Pmf StateDmc::marginal_p(int x, int s) const { return joint_pq(x, s).row_marginal(); }

Pmf StateDmc::marginal_q(int x, int s) const { return joint_pq(x, s).col_marginal(); }

CondPmf StateDmc::cond_p(int s) const {
    Eigen::MatrixXd rows(2, y_size_);
    rows.row(0) = marginal_p(0, s).vec().transpose();
    rows.row(1) = marginal_p(1, s).vec().transpose();
    return CondPmf(std::move(rows));
}

CondPmf StateDmc::cond_q(int s) const {
    Eigen::MatrixXd rows(2, z_size_);
    rows.row(0) = marginal_q(0, s).vec().transpose();
    rows.row(1) = marginal_q(1, s).vec().transpose();
    return CondPmf(std::move(rows));
}

HypothesisReport StateDmc::validate_hypotheses(double tol) const {
    HypothesisReport r;
    r.tol = tol;

    r.p0_deviation = max_abs_diff(marginal_p(0, 0).vec(), marginal_p(0, 1).vec());
    r.p0_state_invariant = r.p0_deviation <= tol;

    r.p1_deviation = max_abs_diff(marginal_p(1, 0).vec(), marginal_p(1, 1).vec());
    r.p1_states_distinct = r.p1_deviation > tol;

    for (int s = 0; s < 2; ++s) {
        r.zero_input_deviation[s] = independence_deviation(slice(0, s));
        r.zero_input_independent[s] = r.zero_input_deviation[s] <= tol;
        r.one_input_deviation[s] = independence_deviation(slice(1, s));
        r.one_input_independent[s] = r.one_input_deviation[s] <= tol;
    }
    return r;
}

void StateDmc::sample(std::span<const std::uint8_t> xs, std::span<const std::uint8_t> ss,
                      Rng& rng, std::span<std::uint8_t> ys, std::span<std::uint8_t> zs) const {
    if (xs.size() != ss.size() || xs.size() != ys.size() || xs.size() != zs.size()) {
        throw ShapeError("StateDmc::sample: sequence lengths differ");
    }
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (xs[i] > 1 || ss[i] > 1) throw AlphabetError("StateDmc::sample: x and s are binary");
        const int flat = rng.categorical(flat_[2 * ss[i] + xs[i]]);
        ys[i] = static_cast<std::uint8_t>(flat / z_size_);
        zs[i] = static_cast<std::uint8_t>(flat % z_size_);
    }
}

StateDmc example_two_state() {
    // s = 0: symmetric flips for both receivers.
    JointPmf w00 = binary_product_slice(0.1, 0.4); // x=0: y flips to 1 w.p. 0.1, z w.p. 0.4
    JointPmf w10 = binary_product_slice(0.9, 0.6); // x=1: flips back toward 0 w.p. 0.1 / 0.4
    // s = 1: asymmetric main-channel flips (0.1 at x=0, 0.2 at x=1), observer flip 0.3.
    JointPmf w01 = binary_product_slice(0.1, 0.3);
    JointPmf w11 = binary_product_slice(0.8, 0.7);
    return StateDmc(std::move(w00), std::move(w10), std::move(w01), std::move(w11));
}

} // namespace covertkey
