#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "covertkey/channel.hpp"
#include "covertkey/info.hpp"
#include "covertkey/rates.hpp"

using namespace covertkey;

namespace {

// Two-state channel whose x=0 joint slice is correlated, the regime where the
// per-state rate adjustment term becomes nonzero.
StateDmc correlated_channel() {
    Eigen::MatrixXd x0(2, 2), x1s0(2, 2), x1s1(2, 2);
    x0 << 0.4, 0.1, 0.1, 0.4;
    x1s0 << 0.45, 0.05, 0.05, 0.45;
    x1s1 << 0.3, 0.2, 0.1, 0.4;
    return StateDmc(JointPmf(x0), JointPmf(x1s0), JointPmf(x0), JointPmf(x1s1));
}

} // namespace

TEST_CASE("endpoint rates match independent closed-form arithmetic") {
    const StateDmc ch = example_two_state();
    // Weight-0 adversary: sqrt(2 / chi2) * D with D = (0.9-0.1)*log2(9) and
    // chi2 = (0.6-0.4)^2/0.4 + (0.4-0.6)^2/0.6 = 1/6, all written out directly.
    const double d0 = 0.8 * std::log2(9.0);
    const double rate0 = std::sqrt(2.0 / (1.0 / 6.0)) * d0;
    CHECK(active_rate(ch, 0.0) == doctest::Approx(rate0).epsilon(1e-12));
    CHECK(rate0 == doctest::Approx(8.7848).epsilon(1e-4));

    // Weight-1 adversary: D = 0.8*log2(0.8/0.1) + 0.2*log2(0.2/0.9),
    // chi2 = 0.16/0.3 + 0.16/0.7 = 16/21.
    const double d1 = 0.8 * std::log2(8.0) + 0.2 * std::log2(0.2 / 0.9);
    const double rate1 = std::sqrt(2.0 / (16.0 / 21.0)) * d1;
    CHECK(active_rate(ch, 1.0) == doctest::Approx(rate1).epsilon(1e-12));
    CHECK(rate1 == doctest::Approx(3.1853).epsilon(1e-4));
}

TEST_CASE("converse meets the achievable rate exactly at the endpoints") {
    const StateDmc ch = example_two_state();
    for (double beta : {0.0, 1.0}) {
        CHECK(std::abs(converse_rate(ch, beta, ConversePairing::kDerived) -
                       active_rate(ch, beta)) < 1e-9);
    }
}

TEST_CASE("converse dominates the achievable rate across the weight grid") {
    const StateDmc ch = example_two_state();
    const std::vector<RatePoint> curve = rate_curve(ch, 101, ConversePairing::kDerived);
    REQUIRE(curve.size() == 101);
    CHECK(curve.front().beta == 0.0);
    CHECK(curve.back().beta == 1.0);
    for (std::size_t i = 0; i < curve.size(); ++i) {
        CHECK(curve[i].converse >= curve[i].achievable - 1e-12);
        CHECK(curve[i].achievable > 0.0);
        if (i > 0) CHECK(curve[i].beta > curve[i - 1].beta);
    }
}

TEST_CASE("the alternative chi-squared pairing differs away from the endpoints") {
    const StateDmc ch = example_two_state();
    const double derived = converse_rate(ch, 0.5, ConversePairing::kDerived);
    const double stated = converse_rate(ch, 0.5, ConversePairing::kAsStated);
    CHECK(std::abs(derived - stated) > 1e-3);
    CHECK(to_string(ConversePairing::kAsStated) == "as-stated");
    CHECK(pairing_from_string("derived") == ConversePairing::kDerived);
    CHECK_THROWS_AS(pairing_from_string("other"), ParseError);
}

TEST_CASE("the state adjustment term vanishes on factorized zero-input slices") {
    const StateDmc ch = example_two_state();
    CHECK(std::abs(i_s(ch, 0)) < 1e-12);
    CHECK(std::abs(i_s(ch, 1)) < 1e-12);
}

TEST_CASE("the state adjustment term matches a direct sum on a correlated slice") {
    const StateDmc ch = correlated_channel();
    // Independent evaluation: average of log2( joint0(y,z) / (p0(y)*q0(z)) )
    // under the x=1 joint at state 0, written as explicit sums.
    const JointPmf j0 = ch.joint_pq(0, 0);
    const JointPmf j1 = ch.joint_pq(1, 0);
    const Pmf p0 = j0.row_marginal();
    const Pmf q0 = j0.col_marginal();
    double direct = 0.0;
    for (int y = 0; y < 2; ++y)
        for (int z = 0; z < 2; ++z)
            direct += j1(y, z) * std::log2(j0(y, z) / (p0(y) * q0(z)));
    CHECK(direct > 0.45); // the deliberately correlated slice rewards dependence
    CHECK(i_s(ch, 0) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("weighted observer chi-squared interpolates the per-state values") {
    const StateDmc ch = example_two_state();
    CHECK(chi2_s(ch, 0) == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
    CHECK(chi2_s(ch, 1) == doctest::Approx(16.0 / 21.0).epsilon(1e-12));
    CHECK(chi2_weighted(ch, 0.25) ==
          doctest::Approx(0.75 / 6.0 + 0.25 * 16.0 / 21.0).epsilon(1e-12));
}

TEST_CASE("passive bounds coincide on doubly factorized channels") {
    const StateDmc ch = example_two_state();
    const PassiveBounds b = passive_bounds(ch);
    const double cap = passive_capacity_independent(ch);
    CHECK(std::abs(b.lower - b.upper) < 1e-12);
    CHECK(std::abs(b.lower - cap) < 1e-12);
    CHECK(cap == doctest::Approx(std::sqrt(12.0) * 0.8 * std::log2(9.0)).epsilon(1e-12));

    CHECK_THROWS_AS(passive_bounds(correlated_channel()), PreconditionError);
}

TEST_CASE("hypothesis enforcement rejects correlated or degenerate channels") {
    CHECK_NOTHROW(require_two_state_hypotheses(example_two_state()));
    CHECK_THROWS_AS(require_two_state_hypotheses(correlated_channel()), PreconditionError);
}

TEST_CASE("small-weight covertness divergence matches its quadratic form") {
    const StateDmc ch = example_two_state();
    for (double beta : {0.0, 0.5, 1.0}) {
        const CovertnessCheck c = covertness_quadratic_check(ch, 1e-3, beta);
        CHECK(c.exact > 0.0);
        CHECK(std::abs(c.exact - c.quadratic) / c.quadratic < 0.01);
    }
    const CovertnessCheck zero = covertness_quadratic_check(ch, 0.0, 0.5);
    CHECK(zero.exact == 0.0);
    CHECK(zero.quadratic == 0.0);
}

TEST_CASE("rate curve files carry the fixed header and full grid") {
    const StateDmc ch = example_two_state();
    const std::string path = "/tmp/covertkey_rates_test.csv";
    write_rate_curve_csv(rate_curve(ch, 5, ConversePairing::kDerived), path);
    std::ifstream in(path);
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "beta,achievable,converse,pairing");
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        CHECK(line.find("derived") != std::string::npos);
    }
    CHECK(rows == 5);
    std::remove(path.c_str());
}
