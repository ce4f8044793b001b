#include "covertkey/pmf.hpp"

#include <cmath>
#include <string>

namespace covertkey {

namespace {

void check_mass_vector(const Eigen::Ref<const Eigen::VectorXd>& m, const char* what) {
    if (m.size() == 0) throw AlphabetError(std::string(what) + ": empty alphabet");
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        if (!(m[i] >= 0.0)) {
            throw DomainError(std::string(what) + ": negative or NaN mass at index " +
                              std::to_string(i));
        }
    }
}

} // namespace

Pmf::Pmf(Eigen::VectorXd mass) : p_(std::move(mass)) {
    check_mass_vector(p_, "Pmf");
    const double total = p_.sum();
    if (std::abs(total - 1.0) > kNormalizationTol) {
        throw DomainError("Pmf: mass sums to " + std::to_string(total) +
                          ", outside the construction tolerance");
    }
}

Pmf Pmf::normalized(Eigen::VectorXd mass) {
    check_mass_vector(mass, "Pmf::normalized");
    const double total = mass.sum();
    if (!(total > 0.0)) throw DomainError("Pmf::normalized: total mass must be positive");
    mass /= total;
    return Pmf(std::move(mass));
}

Pmf Pmf::bernoulli(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("Pmf::bernoulli: p outside [0, 1]");
    Eigen::VectorXd m(2);
    m << 1.0 - p, p;
    return Pmf::normalized(std::move(m));
}

Pmf Pmf::point_mass(int symbol, int size) {
    if (size <= 0 || symbol < 0 || symbol >= size) {
        throw DomainError("Pmf::point_mass: symbol outside alphabet");
    }
    Eigen::VectorXd m = Eigen::VectorXd::Zero(size);
    m[symbol] = 1.0;
    return Pmf(std::move(m));
}

Pmf Pmf::uniform(int size) {
    if (size <= 0) throw DomainError("Pmf::uniform: size must be positive");
    return Pmf(Eigen::VectorXd::Constant(size, 1.0 / size));
}

Pmf mixture(const Pmf& a, const Pmf& b, double w) {
    if (!a.same_support(b)) throw AlphabetError("mixture: alphabet sizes differ");
    if (!(w >= 0.0 && w <= 1.0)) throw DomainError("mixture: weight outside [0, 1]");
    return Pmf::normalized((1.0 - w) * a.vec() + w * b.vec());
}

JointPmf::JointPmf(Eigen::MatrixXd mass) : p_(std::move(mass)) {
    if (p_.rows() == 0 || p_.cols() == 0) throw AlphabetError("JointPmf: empty alphabet");
    for (Eigen::Index i = 0; i < p_.rows(); ++i) {
        for (Eigen::Index j = 0; j < p_.cols(); ++j) {
            if (!(p_(i, j) >= 0.0)) {
                throw DomainError("JointPmf: negative or NaN mass at (" + std::to_string(i) +
                                  ", " + std::to_string(j) + ")");
            }
        }
    }
    const double total = p_.sum();
    if (std::abs(total - 1.0) > kNormalizationTol) {
        throw DomainError("JointPmf: mass sums to " + std::to_string(total) +
                          ", outside the construction tolerance");
    }
}

JointPmf JointPmf::normalized(Eigen::MatrixXd mass) {
    const double total = mass.sum();
    if (!(total > 0.0)) throw DomainError("JointPmf::normalized: total mass must be positive");
    mass /= total;
    return JointPmf(std::move(mass));
}

JointPmf JointPmf::outer(const Pmf& row, const Pmf& col) {
    return JointPmf::normalized(row.vec() * col.vec().transpose());
}

Pmf JointPmf::row_marginal() const {
    return Pmf::normalized(p_.rowwise().sum());
}

Pmf JointPmf::col_marginal() const {
    return Pmf::normalized(p_.colwise().sum().transpose());
}

CondPmf::CondPmf(Eigen::MatrixXd rows) : rows_(std::move(rows)) {
    if (rows_.rows() == 0 || rows_.cols() == 0) throw AlphabetError("CondPmf: empty alphabet");
    for (Eigen::Index i = 0; i < rows_.rows(); ++i) {
        check_mass_vector(rows_.row(i).transpose(), "CondPmf row");
        const double total = rows_.row(i).sum();
        if (std::abs(total - 1.0) > kNormalizationTol) {
            throw DomainError("CondPmf: row " + std::to_string(i) + " sums to " +
                              std::to_string(total));
        }
    }
}

JointPmf CondPmf::joint_with(const Pmf& input) const {
    if (input.size() != input_size()) throw AlphabetError("CondPmf::joint_with: input size mismatch");
    // Joint (input, output) with rows indexed by the input symbol.
    return JointPmf::normalized(input.vec().asDiagonal() * rows_);
}

CondPmf mixture(const CondPmf& a, const CondPmf& b, double w) {
    if (a.input_size() != b.input_size() || a.output_size() != b.output_size()) {
        throw AlphabetError("mixture: conditional pmf shapes differ");
    }
    if (!(w >= 0.0 && w <= 1.0)) throw DomainError("mixture: weight outside [0, 1]");
    return CondPmf((1.0 - w) * a.mat() + w * b.mat());
}

SeqType::SeqType(std::span<const std::uint8_t> seq, int alphabet_size)
    : n_(static_cast<std::int64_t>(seq.size())), counts_(alphabet_size, 0) {
    if (alphabet_size <= 0) throw AlphabetError("SeqType: alphabet size must be positive");
    if (n_ == 0) throw ShapeError("SeqType: empty sequence");
    for (std::uint8_t a : seq) {
        if (a >= counts_.size()) throw AlphabetError("SeqType: symbol outside alphabet");
        ++counts_[a];
    }
}

Pmf SeqType::to_pmf() const {
    Eigen::VectorXd m(counts_.size());
    for (std::size_t i = 0; i < counts_.size(); ++i) {
        m[static_cast<Eigen::Index>(i)] = static_cast<double>(counts_[i]);
    }
    return Pmf::normalized(std::move(m));
}

JointPmf joint_type(std::span<const std::uint8_t> x, std::span<const std::uint8_t> y,
                    int x_size, int y_size) {
    if (x.size() != y.size()) throw ShapeError("joint_type: sequence lengths differ");
    if (x.empty()) throw ShapeError("joint_type: empty sequences");
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(x_size, y_size);
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] >= x_size || y[i] >= y_size) {
            throw AlphabetError("joint_type: symbol outside alphabet");
        }
        counts(x[i], y[i]) += 1.0;
    }
    return JointPmf::normalized(std::move(counts));
}

std::int64_t sequence_weight(std::span<const std::uint8_t> s) {
    std::int64_t w = 0;
    for (std::uint8_t v : s) w += (v != 0);
    return w;
}

} // namespace covertkey
