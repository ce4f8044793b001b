#include "covertkey/oneshot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include <json.hpp>

#include "covertkey/info.hpp"
#include "covertkey/parallel.hpp"
#include "covertkey/report.hpp"

namespace covertkey {

namespace {

// base^exp with overflow reported as -1 (callers treat it as a guard breach).
std::int64_t checked_ipow(std::int64_t base, int exp) {
    std::int64_t v = 1;
    for (int i = 0; i < exp; ++i) {
        if (v > std::numeric_limits<std::int64_t>::max() / base) return -1;
        v *= base;
    }
    return v;
}

// Position-major digit of a packed sequence index.
inline int unpack_digit(std::int64_t packed, int position, int base) {
    for (int i = 0; i < position; ++i) packed /= base;
    return static_cast<int>(packed % base);
}

void unpack_sequence(std::int64_t packed, int base, std::span<std::uint8_t> out) {
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<std::uint8_t>(packed % base);
        packed /= base;
    }
}

std::int64_t pack_sequence(std::span<const std::uint8_t> seq, int base) {
    std::int64_t packed = 0;
    for (std::size_t i = seq.size(); i-- > 0;) packed = packed * base + seq[i];
    return packed;
}

} // namespace

Codebook::Codebook(int n, int m1, int m2, int m3, int y_size, std::vector<std::uint8_t> symbols)
    : n_(n), m1_(m1), m2_(m2), m3_(m3), y_size_(y_size), symbols_(std::move(symbols)) {
    if (n <= 0 || m1 <= 0 || m2 <= 0 || m3 <= 0 || y_size < 2) {
        throw DomainError("Codebook: sizes must be positive (alphabet at least binary)");
    }
    if (static_cast<std::int64_t>(symbols_.size()) != total_entries() * n_) {
        throw ShapeError("Codebook: symbol buffer does not match n * m1 * m2 * m3");
    }
    for (std::uint8_t v : symbols_) {
        if (v >= y_size_) throw AlphabetError("Codebook: symbol outside alphabet");
    }
}

std::span<const std::uint8_t> Codebook::entry(int w1, int w2, int w3) const {
    if (w1 < 0 || w1 >= m1_ || w2 < 0 || w2 >= m2_ || w3 < 0 || w3 >= m3_) {
        throw DomainError("Codebook::entry: index out of range");
    }
    const std::size_t offset =
        (static_cast<std::size_t>(w1) * m2_ + w2) * m3_ * n_ + static_cast<std::size_t>(w3) * n_;
    return std::span<const std::uint8_t>(symbols_.data() + offset, static_cast<std::size_t>(n_));
}

Codebook gen_codebook(const Pmf& qy, int n, int m1, int m2, int m3, Rng& rng) {
    if (n <= 0 || m1 <= 0 || m2 <= 0 || m3 <= 0) {
        throw DomainError("gen_codebook: sizes must be positive");
    }
    const std::int64_t entries = std::int64_t{1} * m1 * m2 * m3;
    if (entries > kMaxCodebookSymbols / n) {
        throw GuardError("gen_codebook: codebook would exceed " +
                         std::to_string(kMaxCodebookSymbols) + " symbols");
    }
    std::vector<std::uint8_t> symbols(static_cast<std::size_t>(entries * n));
    for (std::uint8_t& s : symbols) {
        s = static_cast<std::uint8_t>(rng.categorical(qy.vec()));
    }
    return Codebook(n, m1, m2, m3, qy.size(), std::move(symbols));
}

namespace {

// Match counts per index pair; returns the total match count.
double match_counts(std::span<const std::uint8_t> y, const Codebook& cb, Eigen::MatrixXd& counts) {
    if (static_cast<int>(y.size()) != cb.n()) {
        throw ShapeError("likelihood encoder: observation length differs from entry length");
    }
    counts.setZero(cb.m1(), cb.m2());
    double total = 0.0;
    for (int w1 = 0; w1 < cb.m1(); ++w1) {
        for (int w2 = 0; w2 < cb.m2(); ++w2) {
            for (int w3 = 0; w3 < cb.m3(); ++w3) {
                const auto e = cb.entry(w1, w2, w3);
                if (std::equal(e.begin(), e.end(), y.begin())) {
                    counts(w1, w2) += 1.0;
                    total += 1.0;
                }
            }
        }
    }
    return total;
}

} // namespace

Eigen::MatrixXd encode_distribution(std::span<const std::uint8_t> y, const Codebook& cb) {
    Eigen::MatrixXd counts;
    const double total = match_counts(y, cb, counts);
    if (total > 0.0) {
        counts /= total;
    } else {
        counts.setConstant(1.0 / static_cast<double>(cb.m1() * cb.m2()));
    }
    return counts;
}

EncodeResult likelihood_encode(std::span<const std::uint8_t> y, const Codebook& cb, Rng& rng) {
    Eigen::MatrixXd counts;
    const double total = match_counts(y, cb, counts);
    EncodeResult r;
    if (total > 0.0) {
        const int idx = rng.categorical(counts.reshaped());
        // Eigen reshape is column-major: index = w1 + m1 * w2.
        r.w1 = idx % cb.m1();
        r.w2 = idx / cb.m1();
    } else {
        r.fallback = true;
        const std::int64_t idx = rng.uniform_int(std::int64_t{1} * cb.m1() * cb.m2());
        r.w1 = static_cast<int>(idx % cb.m1());
        r.w2 = static_cast<int>(idx / cb.m1());
    }
    return r;
}

ScoreFn empirical_mi_score(int x_size, int y_size) {
    return [x_size, y_size](std::span<const std::uint8_t> x, std::span<const std::uint8_t> y) {
        return empirical_mi(x, y, x_size, y_size);
    };
}

int mmi_decode(std::span<const std::uint8_t> x, int w2, const Codebook& cb, const ScoreFn& score) {
    if (static_cast<int>(x.size()) != cb.n()) {
        throw ShapeError("mmi_decode: sequence length differs from entry length");
    }
    if (w2 < 0 || w2 >= cb.m2()) throw DomainError("mmi_decode: public index out of range");
    const ScoreFn& nu = score ? score : empirical_mi_score(2, cb.y_size());
    int best_w1 = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (int w1 = 0; w1 < cb.m1(); ++w1) {
        double s_w1 = -std::numeric_limits<double>::infinity();
        for (int w3 = 0; w3 < cb.m3(); ++w3) {
            s_w1 = std::max(s_w1, nu(x, cb.entry(w1, w2, w3)));
        }
        if (s_w1 > best) { // strict: ties keep the smallest index
            best = s_w1;
            best_w1 = w1;
        }
    }
    return best_w1;
}

double delta_lower_limit(std::int64_t total_count, const Pmf& qy) {
    if (total_count < 2) throw DomainError("delta_lower_limit: need at least 2 indices");
    const double mu_q = qy.min_mass();
    if (!(mu_q > 0.0)) throw PreconditionError("delta_lower_limit: Q_Y must have full support");
    return 2.0 / (static_cast<double>(total_count - 1) * mu_q);
}

namespace {

void check_delta(double delta, std::int64_t total_count, const Pmf& qy, const char* who) {
    const double lo = delta_lower_limit(total_count, qy);
    if (!(delta > lo && delta < 1.0)) {
        throw PreconditionError(std::string(who) + ": delta must lie in (" + format_sig12(lo) +
                                ", 1)");
    }
}

double codebook_tail(std::int64_t total_count, double mu_q, double delta) {
    return (2.0 + static_cast<double>(total_count)) *
           std::exp(-static_cast<double>(total_count - 1) * mu_q * delta * delta / 32.0);
}

} // namespace

double reliability_bound_rhs(const JointPmf& p_xy, const Pmf& qy, std::int64_t key_count,
                             std::int64_t total_count, double delta, const SymbolScore& nu) {
    if (key_count < 1 || total_count < key_count) {
        throw DomainError("reliability_bound_rhs: inconsistent index counts");
    }
    if (p_xy.col_size() != qy.size()) {
        throw AlphabetError("reliability_bound_rhs: observation alphabets differ");
    }
    if (!nu) throw DomainError("reliability_bound_rhs: scoring function required");
    check_delta(delta, total_count, qy, "reliability_bound_rhs");

    const double mu_q = qy.min_mass();
    double term1 = 0.0;
    for (int x = 0; x < p_xy.row_size(); ++x) {
        for (int y = 0; y < p_xy.col_size(); ++y) {
            if (p_xy(x, y) == 0.0) continue;
            // q(x, y): mass of observations scoring at least as high as y under x.
            double q = 0.0;
            for (int yp = 0; yp < qy.size(); ++yp) {
                if (nu(x, yp) >= nu(x, y)) q += qy(yp);
            }
            term1 += p_xy(x, y) * std::min(1.0, static_cast<double>(key_count) * q);
        }
    }
    return term1 + codebook_tail(total_count, mu_q, delta) + delta;
}

double secrecy_bound_rhs(const JointPmf& p_yz, const Pmf& qy, std::int64_t rand_count,
                         std::int64_t total_count, double gamma, double delta) {
    if (rand_count < 1 || total_count < rand_count) {
        throw DomainError("secrecy_bound_rhs: inconsistent index counts");
    }
    if (p_yz.row_size() != qy.size()) {
        throw AlphabetError("secrecy_bound_rhs: observation alphabets differ");
    }
    if (!(gamma > 0.0)) throw DomainError("secrecy_bound_rhs: gamma must be positive");
    check_delta(delta, total_count, qy, "secrecy_bound_rhs");

    const double mu_q = qy.min_mass();
    const Pmf pz = p_yz.col_marginal();
    double term1 = 0.0;
    for (int y = 0; y < p_yz.row_size(); ++y) {
        for (int z = 0; z < p_yz.col_size(); ++z) {
            if (p_yz(y, z) >= gamma * pz(z) * qy(y)) term1 += p_yz(y, z);
        }
    }
    return term1 + 0.5 * std::sqrt(gamma / static_cast<double>(rand_count)) + 0.5 * delta +
           0.5 * codebook_tail(total_count, mu_q, delta);
}

ReliabilityTuning tune_reliability_rhs(const JointPmf& p_xy, const Pmf& qy,
                                       std::int64_t key_count, std::int64_t total_count,
                                       const SymbolScore& nu, int grid_points) {
    const double lo = delta_lower_limit(total_count, qy);
    if (!(lo < 1.0)) {
        throw PreconditionError("tune_reliability_rhs: empty delta range "
                                "(total index count too small for this Q_Y)");
    }
    ReliabilityTuning best;
    best.rhs = std::numeric_limits<double>::infinity();
    for (int i = 0; i < grid_points; ++i) {
        const double delta = lo + (1.0 - lo) * (i + 1.0) / (grid_points + 1.0);
        const double rhs = reliability_bound_rhs(p_xy, qy, key_count, total_count, delta, nu);
        if (rhs < best.rhs) {
            best.rhs = rhs;
            best.delta = delta;
        }
    }
    return best;
}

SecrecyTuning tune_secrecy_rhs(const JointPmf& p_yz, const Pmf& qy, std::int64_t rand_count,
                               std::int64_t total_count, int grid_points) {
    const double lo = delta_lower_limit(total_count, qy);
    if (!(lo < 1.0)) {
        throw PreconditionError("tune_secrecy_rhs: empty delta range "
                                "(total index count too small for this Q_Y)");
    }
    // The indicator term changes only at the likelihood ratios present in the
    // distribution, so those (nudged just above) are the only gamma candidates
    // worth scanning besides one below the smallest ratio.
    const Pmf pz = p_yz.col_marginal();
    std::vector<double> ratios;
    for (int y = 0; y < p_yz.row_size(); ++y) {
        for (int z = 0; z < p_yz.col_size(); ++z) {
            const double denom = pz(z) * qy(y);
            if (denom > 0.0 && p_yz(y, z) > 0.0) ratios.push_back(p_yz(y, z) / denom);
        }
    }
    std::sort(ratios.begin(), ratios.end());
    ratios.erase(std::unique(ratios.begin(), ratios.end()), ratios.end());
    std::vector<double> gammas;
    if (ratios.empty()) {
        gammas.push_back(1.0);
    } else {
        gammas.push_back(ratios.front() * 0.5);
        for (double r : ratios) gammas.push_back(r * (1.0 + 1e-12));
    }

    SecrecyTuning best;
    best.rhs = std::numeric_limits<double>::infinity();
    for (int i = 0; i < grid_points; ++i) {
        const double delta = lo + (1.0 - lo) * (i + 1.0) / (grid_points + 1.0);
        for (double gamma : gammas) {
            const double rhs = secrecy_bound_rhs(p_yz, qy, rand_count, total_count, gamma, delta);
            if (rhs < best.rhs) {
                best.rhs = rhs;
                best.gamma = gamma;
                best.delta = delta;
            }
        }
    }
    return best;
}

XyzPmf::XyzPmf(int x_size, int y_size, int z_size, Eigen::VectorXd flat)
    : x_size_(x_size), y_size_(y_size), z_size_(z_size), flat_(std::move(flat)) {
    if (x_size < 1 || y_size < 1 || z_size < 1) throw AlphabetError("XyzPmf: empty alphabet");
    if (flat_.size() != static_cast<Eigen::Index>(x_size) * y_size * z_size) {
        throw ShapeError("XyzPmf: flat buffer does not match alphabet sizes");
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < flat_.size(); ++i) {
        if (!(flat_[i] >= 0.0)) throw DomainError("XyzPmf: negative or NaN mass");
        total += flat_[i];
    }
    if (std::abs(total - 1.0) > kNormalizationTol) {
        throw DomainError("XyzPmf: mass sums to " + std::to_string(total));
    }
}

XyzPmf XyzPmf::from_chain(const Pmf& px, const CondPmf& y_given_x, const CondPmf& z_given_y) {
    if (y_given_x.input_size() != px.size() ||
        z_given_y.input_size() != y_given_x.output_size()) {
        throw AlphabetError("XyzPmf::from_chain: alphabet sizes do not chain");
    }
    const int nx = px.size();
    const int ny = y_given_x.output_size();
    const int nz = z_given_y.output_size();
    Eigen::VectorXd flat(static_cast<Eigen::Index>(nx) * ny * nz);
    for (int x = 0; x < nx; ++x) {
        for (int y = 0; y < ny; ++y) {
            for (int z = 0; z < nz; ++z) {
                flat[(x * ny + y) * nz + z] = px(x) * y_given_x(y, x) * z_given_y(z, y);
            }
        }
    }
    return XyzPmf(nx, ny, nz, std::move(flat));
}

XyzPmf XyzPmf::from_input_slices(const Pmf& px, const std::vector<JointPmf>& yz_given_x) {
    if (static_cast<int>(yz_given_x.size()) != px.size()) {
        throw AlphabetError("XyzPmf::from_input_slices: one slice per input symbol required");
    }
    const int nx = px.size();
    const int ny = yz_given_x.front().row_size();
    const int nz = yz_given_x.front().col_size();
    Eigen::VectorXd flat(static_cast<Eigen::Index>(nx) * ny * nz);
    for (int x = 0; x < nx; ++x) {
        if (yz_given_x[x].row_size() != ny || yz_given_x[x].col_size() != nz) {
            throw AlphabetError("XyzPmf::from_input_slices: slices must share alphabet sizes");
        }
        for (int y = 0; y < ny; ++y) {
            for (int z = 0; z < nz; ++z) {
                flat[(x * ny + y) * nz + z] = px(x) * yz_given_x[x](y, z);
            }
        }
    }
    return XyzPmf(nx, ny, nz, std::move(flat));
}

JointPmf XyzPmf::xy() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(x_size_, y_size_);
    for (int x = 0; x < x_size_; ++x) {
        for (int y = 0; y < y_size_; ++y) {
            for (int z = 0; z < z_size_; ++z) m(x, y) += (*this)(x, y, z);
        }
    }
    return JointPmf::normalized(std::move(m));
}

JointPmf XyzPmf::yz() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(y_size_, z_size_);
    for (int x = 0; x < x_size_; ++x) {
        for (int y = 0; y < y_size_; ++y) {
            for (int z = 0; z < z_size_; ++z) m(y, z) += (*this)(x, y, z);
        }
    }
    return JointPmf::normalized(std::move(m));
}

Pmf XyzPmf::x_marginal() const { return xy().row_marginal(); }
Pmf XyzPmf::y_marginal() const { return xy().col_marginal(); }
Pmf XyzPmf::z_marginal() const { return yz().col_marginal(); }

void SourceSeq::validate() const {
    if (positions.empty()) throw ShapeError("SourceSeq: no positions");
    for (const XyzPmf& p : positions) {
        if (p.x_size() != positions.front().x_size() || p.y_size() != positions.front().y_size() ||
            p.z_size() != positions.front().z_size()) {
            throw AlphabetError("SourceSeq: positions must share alphabet sizes");
        }
    }
}

SourceSeq source_from_channel(const Pmf& qx, const StateDmc& ch, std::span<const std::uint8_t> s) {
    if (qx.size() != 2) throw AlphabetError("source_from_channel: input alphabet is binary");
    SourceSeq src;
    src.positions.reserve(s.size());
    for (std::uint8_t si : s) {
        if (si > 1) throw AlphabetError("source_from_channel: states are binary");
        src.positions.push_back(
            XyzPmf::from_input_slices(qx, {ch.joint_pq(0, si), ch.joint_pq(1, si)}));
    }
    src.validate();
    return src;
}

double ExactInduced::secrecy_tv_uniform_pair() const {
    double total = 0.0;
    for (std::int64_t z = 0; z < z_space; ++z) {
        for (int w2 = 0; w2 < m2; ++w2) {
            double column = 0.0;
            for (int w1 = 0; w1 < m1; ++w1) column += pair_z(w1 * m2 + w2, z);
            const double ref = column / static_cast<double>(m1);
            for (int w1 = 0; w1 < m1; ++w1) {
                total += std::abs(pair_z(w1 * m2 + w2, z) - ref);
            }
        }
    }
    return 0.5 * total;
}

double ExactInduced::secrecy_tv_independence() const {
    const Eigen::VectorXd pair_marginal = pair_z.rowwise().sum();
    const Eigen::VectorXd z_marginal = pair_z.colwise().sum();
    double total = 0.0;
    for (int r = 0; r < pair_z.rows(); ++r) {
        for (std::int64_t z = 0; z < z_space; ++z) {
            total += std::abs(pair_z(r, z) - pair_marginal[r] * z_marginal[z]);
        }
    }
    return 0.5 * total;
}

double ExactInduced::secrecy_tv_uniform_key() const {
    double total = 0.0;
    for (std::int64_t z = 0; z < z_space; ++z) {
        double column = 0.0;
        for (int w1 = 0; w1 < m1; ++w1) {
            for (int w2 = 0; w2 < m2; ++w2) column += pair_z(w1 * m2 + w2, z);
        }
        const double ref = column / static_cast<double>(m1);
        for (int w1 = 0; w1 < m1; ++w1) {
            double row = 0.0;
            for (int w2 = 0; w2 < m2; ++w2) row += pair_z(w1 * m2 + w2, z);
            total += std::abs(row - ref);
        }
    }
    return 0.5 * total;
}

double ExactInduced::public_uniformity_tv() const {
    Eigen::VectorXd w2_mass = Eigen::VectorXd::Zero(m2);
    for (int w1 = 0; w1 < m1; ++w1) {
        for (int w2 = 0; w2 < m2; ++w2) {
            w2_mass[w2] += pair_z.row(w1 * m2 + w2).sum();
        }
    }
    const double uniform = 1.0 / static_cast<double>(m2);
    double total = 0.0;
    for (int w2 = 0; w2 < m2; ++w2) total += std::abs(w2_mass[w2] - uniform);
    return 0.5 * total;
}

ExactInduced exact_induced_joint(const Codebook& cb, const SourceSeq& src, const ScoreFn& score) {
    src.validate();
    const int n = cb.n();
    if (src.length() != n) {
        throw ShapeError("exact_induced_joint: source length differs from entry length");
    }
    const XyzPmf& front = src.positions.front();
    if (front.y_size() != cb.y_size()) {
        throw AlphabetError("exact_induced_joint: source and codebook observation alphabets differ");
    }
    const ScoreFn& nu = score ? score : empirical_mi_score(front.x_size(), cb.y_size());

    const std::int64_t y_space = checked_ipow(front.y_size(), n);
    const std::int64_t x_space = checked_ipow(front.x_size(), n);
    const std::int64_t z_space = checked_ipow(front.z_size(), n);
    if (y_space < 0 || y_space * cb.total_entries() > kMaxExactEnumeration) {
        throw GuardError("exact_induced_joint: |Y|^n * index count exceeds the enumeration guard");
    }
    if (x_space < 0 || x_space > kMaxExactEnumeration || z_space < 0 ||
        z_space * cb.m1() * cb.m2() > (std::int64_t{1} << 22)) {
        throw GuardError("exact_induced_joint: sequence spaces exceed the enumeration guard");
    }

    // Distinct observation sequences appearing in the codebook, with the exact
    // encoder distribution each induces (multiplicity-weighted match ratios).
    struct DistinctEntry {
        std::vector<std::uint8_t> seq;
        Eigen::MatrixXd enc; // m1 x m2 pair probabilities given this observation
    };
    std::unordered_map<std::int64_t, int> packed_to_distinct;
    std::vector<DistinctEntry> distinct;
    for (int w1 = 0; w1 < cb.m1(); ++w1) {
        for (int w2 = 0; w2 < cb.m2(); ++w2) {
            for (int w3 = 0; w3 < cb.m3(); ++w3) {
                const auto e = cb.entry(w1, w2, w3);
                const std::int64_t packed = pack_sequence(e, cb.y_size());
                auto [it, inserted] = packed_to_distinct.try_emplace(
                    packed, static_cast<int>(distinct.size()));
                if (inserted) {
                    DistinctEntry d;
                    d.seq.assign(e.begin(), e.end());
                    d.enc = Eigen::MatrixXd::Zero(cb.m1(), cb.m2());
                    distinct.push_back(std::move(d));
                }
                distinct[it->second].enc(w1, w2) += 1.0;
            }
        }
    }
    for (DistinctEntry& d : distinct) d.enc /= d.enc.sum();

    // Per-position tables hoisted out of the enumeration loops.
    std::vector<Eigen::MatrixXd> xy_i, yz_i;
    std::vector<Eigen::VectorXd> x_i, z_i;
    xy_i.reserve(static_cast<std::size_t>(n));
    yz_i.reserve(static_cast<std::size_t>(n));
    x_i.reserve(static_cast<std::size_t>(n));
    z_i.reserve(static_cast<std::size_t>(n));
    for (const XyzPmf& p : src.positions) {
        xy_i.push_back(p.xy().mat());
        yz_i.push_back(p.yz().mat());
        x_i.push_back(p.x_marginal().vec());
        z_i.push_back(p.z_marginal().vec());
    }

    ExactInduced out;
    out.m1 = cb.m1();
    out.m2 = cb.m2();
    out.z_space = z_space;
    out.key_joint = Eigen::MatrixXd::Zero(cb.m1(), cb.m1());
    out.pair_z = Eigen::MatrixXd::Zero(cb.m1() * cb.m2(), z_space);
    out.z_law = Eigen::VectorXd::Zero(z_space);

    const double uniform_pair = 1.0 / static_cast<double>(cb.m1() * cb.m2());

    // Error probability and key joint: enumerate own-sequences x, with the
    // observation restricted to codebook entries plus the aggregated fallback.
    std::vector<std::uint8_t> xs(static_cast<std::size_t>(n));
    std::vector<int> dec(static_cast<std::size_t>(cb.m2()));
    for (std::int64_t xp = 0; xp < x_space; ++xp) {
        unpack_sequence(xp, front.x_size(), xs);

        double px = 1.0;
        for (int i = 0; i < n; ++i) px *= x_i[i][xs[i]];
        if (px == 0.0) continue;

        for (int w2 = 0; w2 < cb.m2(); ++w2) dec[w2] = mmi_decode(xs, w2, cb, nu);

        double covered = 0.0;
        for (const DistinctEntry& d : distinct) {
            double pxy = 1.0;
            for (int i = 0; i < n; ++i) pxy *= xy_i[i](xs[i], d.seq[i]);
            if (pxy == 0.0) continue;
            covered += pxy;
            for (int w1 = 0; w1 < cb.m1(); ++w1) {
                for (int w2 = 0; w2 < cb.m2(); ++w2) {
                    const double mass = pxy * d.enc(w1, w2);
                    if (mass == 0.0) continue;
                    out.key_joint(w1, dec[w2]) += mass;
                    if (dec[w2] != w1) out.p_error += mass;
                }
            }
        }
        const double fallback = std::max(0.0, px - covered);
        out.fallback_prob += fallback;
        for (int w1 = 0; w1 < cb.m1(); ++w1) {
            for (int w2 = 0; w2 < cb.m2(); ++w2) {
                const double mass = fallback * uniform_pair;
                out.key_joint(w1, dec[w2]) += mass;
                if (dec[w2] != w1) out.p_error += mass;
            }
        }
    }

    // Observer joint: enumerate observer sequences z, again restricting the
    // observation to entries plus fallback.
    std::vector<std::uint8_t> zs(static_cast<std::size_t>(n));
    for (std::int64_t zp = 0; zp < z_space; ++zp) {
        unpack_sequence(zp, front.z_size(), zs);
        double pz = 1.0;
        for (int i = 0; i < n; ++i) pz *= z_i[i][zs[i]];
        out.z_law[zp] = pz;
        if (pz == 0.0) continue;

        double covered = 0.0;
        for (const DistinctEntry& d : distinct) {
            double pyz = 1.0;
            for (int i = 0; i < n; ++i) pyz *= yz_i[i](d.seq[i], zs[i]);
            if (pyz == 0.0) continue;
            covered += pyz;
            for (int w1 = 0; w1 < cb.m1(); ++w1) {
                for (int w2 = 0; w2 < cb.m2(); ++w2) {
                    out.pair_z(w1 * cb.m2() + w2, zp) += pyz * d.enc(w1, w2);
                }
            }
        }
        const double fallback = std::max(0.0, pz - covered);
        for (int w1 = 0; w1 < cb.m1(); ++w1) {
            for (int w2 = 0; w2 < cb.m2(); ++w2) {
                out.pair_z(w1 * cb.m2() + w2, zp) += fallback * uniform_pair;
            }
        }
    }
    return out;
}

OneShotVerifyCell verify_oneshot_bounds(const XyzPmf& source, const Pmf& qy, int m1, int m2,
                                        int m3, std::int64_t key_count, std::int64_t rand_count,
                                        const SymbolScore& nu, int codebooks, Rng& rng) {
    if (codebooks < 2) throw DomainError("verify_oneshot_bounds: need at least 2 codebooks");
    if (!nu) throw DomainError("verify_oneshot_bounds: scoring function required");

    OneShotVerifyCell cell;
    cell.m1 = m1;
    cell.m2 = m2;
    cell.m3 = m3;
    cell.key_count = key_count;
    cell.rand_count = rand_count;
    cell.total_count = std::int64_t{1} * m1 * m2 * m3;
    cell.codebooks = codebooks;

    const ReliabilityTuning rel =
        tune_reliability_rhs(source.xy(), qy, key_count, cell.total_count, nu);
    const SecrecyTuning sec = tune_secrecy_rhs(source.yz(), qy, rand_count, cell.total_count);
    cell.delta = rel.delta;
    cell.gamma = sec.gamma;
    cell.pe_bound = rel.rhs;
    cell.sec_bound = sec.rhs;

    SourceSeq one;
    one.positions.push_back(source);
    const ScoreFn score = [&nu](std::span<const std::uint8_t> x, std::span<const std::uint8_t> y) {
        return nu(x[0], y[0]);
    };

    std::vector<double> pe(static_cast<std::size_t>(codebooks));
    std::vector<double> secrecy(static_cast<std::size_t>(codebooks));
    parallel_for(codebooks, [&](std::int64_t i) {
        Rng draw_rng = rng.derive(static_cast<std::uint64_t>(i));
        const Codebook cb = gen_codebook(qy, 1, m1, m2, m3, draw_rng);
        const ExactInduced exact = exact_induced_joint(cb, one, score);
        pe[static_cast<std::size_t>(i)] = exact.p_error;
        secrecy[static_cast<std::size_t>(i)] = exact.secrecy_tv_uniform_key();
    });

    const MeanSigma pe_ms = mean_sigma(pe);
    const MeanSigma sec_ms = mean_sigma(secrecy);
    cell.pe_mean = pe_ms.mean;
    cell.pe_sigma = pe_ms.sigma;
    cell.sec_mean = sec_ms.mean;
    cell.sec_sigma = sec_ms.sigma;
    cell.finalize();
    return cell;
}

std::string oneshot_cell_json(const OneShotVerifyCell& cell) {
    nlohmann::ordered_json j;
    j["m1"] = cell.m1;
    j["m2"] = cell.m2;
    j["m3"] = cell.m3;
    j["key_count"] = cell.key_count;
    j["rand_count"] = cell.rand_count;
    j["total_count"] = cell.total_count;
    j["codebooks"] = cell.codebooks;
    j["delta"] = format_sig12(cell.delta);
    j["gamma"] = format_sig12(cell.gamma);
    j["pe_mean"] = format_sig12(cell.pe_mean);
    j["pe_sigma"] = format_sig12(cell.pe_sigma);
    j["pe_bound"] = format_sig12(cell.pe_bound);
    j["pe_pass"] = cell.pe_pass;
    j["sec_mean"] = format_sig12(cell.sec_mean);
    j["sec_sigma"] = format_sig12(cell.sec_sigma);
    j["sec_bound"] = format_sig12(cell.sec_bound);
    j["sec_pass"] = cell.sec_pass;
    return j.dump();
}

} // namespace covertkey
