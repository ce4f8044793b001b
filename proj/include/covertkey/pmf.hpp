#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "covertkey/errors.hpp"

namespace covertkey {

// Tolerance on |sum - 1| accepted at construction; inputs further off must go
// through the explicit normalized() constructor.
inline constexpr double kNormalizationTol = 1e-12;

// Probability mass function over the dense index alphabet {0, ..., size-1}.
// Immutable after construction: all operations return new objects.
class Pmf {
public:
    // Validating constructor: entries nonnegative, total within kNormalizationTol of 1.
    explicit Pmf(Eigen::VectorXd mass);

    // Explicit renormalizing variant for inputs that are only proportional to a pmf.
    static Pmf normalized(Eigen::VectorXd mass);

    static Pmf bernoulli(double p);      // mass p on symbol 1
    static Pmf point_mass(int symbol, int size);
    static Pmf uniform(int size);

    int size() const { return static_cast<int>(p_.size()); }
    double operator()(int a) const { return p_[a]; }
    const Eigen::VectorXd& vec() const { return p_; }
    double min_mass() const { return p_.minCoeff(); }

    bool same_support(const Pmf& other) const { return size() == other.size(); }

private:
    Eigen::VectorXd p_;
};

// Mixture (1-w)*a + w*b of two pmfs on the same alphabet.
Pmf mixture(const Pmf& a, const Pmf& b, double w);

// Joint pmf over a pair of dense index alphabets; rows index the first coordinate.
class JointPmf {
public:
    explicit JointPmf(Eigen::MatrixXd mass);
    static JointPmf normalized(Eigen::MatrixXd mass);
    static JointPmf outer(const Pmf& row, const Pmf& col);

    int row_size() const { return static_cast<int>(p_.rows()); }
    int col_size() const { return static_cast<int>(p_.cols()); }
    double operator()(int a, int b) const { return p_(a, b); }
    const Eigen::MatrixXd& mat() const { return p_; }

    Pmf row_marginal() const; // marginal of the first coordinate
    Pmf col_marginal() const; // marginal of the second coordinate

    bool same_support(const JointPmf& other) const {
        return row_size() == other.row_size() && col_size() == other.col_size();
    }

private:
    Eigen::MatrixXd p_;
};

// Conditional pmf: one output distribution per input symbol (rows are pmfs).
class CondPmf {
public:
    explicit CondPmf(Eigen::MatrixXd rows);

    int input_size() const { return static_cast<int>(rows_.rows()); }
    int output_size() const { return static_cast<int>(rows_.cols()); }
    double operator()(int out, int in) const { return rows_(in, out); }
    Pmf row(int in) const { return Pmf(rows_.row(in).transpose()); }
    const Eigen::MatrixXd& mat() const { return rows_; }

    // Joint distribution induced by an input pmf.
    JointPmf joint_with(const Pmf& input) const;

private:
    Eigen::MatrixXd rows_; // row i = P(output | input = i)
};

// Per-row mixture (1-w)*a + w*b of two conditional pmfs.
CondPmf mixture(const CondPmf& a, const CondPmf& b, double w);

// Empirical type (symbol counts) of a sequence over a dense index alphabet.
class SeqType {
public:
    SeqType(std::span<const std::uint8_t> seq, int alphabet_size);

    std::int64_t length() const { return n_; }
    std::int64_t count(int a) const { return counts_[a]; }
    int alphabet_size() const { return static_cast<int>(counts_.size()); }
    // Hamming weight for binary sequences: occurrences of symbol 1.
    std::int64_t weight() const { return counts_.size() > 1 ? counts_[1] : 0; }
    double fraction(int a) const { return static_cast<double>(counts_[a]) / static_cast<double>(n_); }

    Pmf to_pmf() const;

private:
    std::int64_t n_;
    std::vector<std::int64_t> counts_;
};

// Joint empirical type of a pair of equal-length sequences, as a JointPmf.
JointPmf joint_type(std::span<const std::uint8_t> x, std::span<const std::uint8_t> y,
                    int x_size, int y_size);

// Hamming weight of a binary sequence.
std::int64_t sequence_weight(std::span<const std::uint8_t> s);

} // namespace covertkey
