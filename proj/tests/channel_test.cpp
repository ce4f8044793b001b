#include <cstdio>
#include <fstream>
#include <vector>

#include <doctest.h>

#include "covertkey/channel.hpp"
#include "covertkey/info.hpp"
#include "covertkey/pmf.hpp"
#include "covertkey/rng.hpp"

using namespace covertkey;

namespace {

std::string temp_path(const char* name) {
    return std::string("/tmp/covertkey_channel_test_") + name + ".json";
}

// Two-state channel whose x=0 joint slice is deliberately correlated.
StateDmc correlated_channel() {
    Eigen::MatrixXd x0(2, 2), x1s0(2, 2), x1s1(2, 2);
    x0 << 0.4, 0.1, 0.1, 0.4;
    x1s0 << 0.45, 0.05, 0.05, 0.45;
    x1s1 << 0.3, 0.2, 0.1, 0.4;
    return StateDmc(JointPmf(x0), JointPmf(x1s0), JointPmf(x0), JointPmf(x1s1));
}

} // namespace

TEST_CASE("the worked example satisfies the two-state rate hypotheses") {
    const StateDmc ch = example_two_state();
    const HypothesisReport rep = ch.validate_hypotheses(1e-9);
    CHECK(rep.p0_state_invariant);
    CHECK(rep.p1_states_distinct);
    CHECK(rep.zero_input_independent[0]);
    CHECK(rep.zero_input_independent[1]);
    CHECK(rep.one_input_independent[0]);
    CHECK(rep.one_input_independent[1]);
    CHECK(rep.two_state_rate_ok());

    CHECK(ch.marginal_p(0, 0)(1) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(ch.marginal_p(1, 0)(1) == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(ch.marginal_p(1, 1)(1) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(ch.marginal_q(0, 0)(1) == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(ch.marginal_q(1, 0)(1) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(ch.marginal_q(0, 1)(1) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(ch.marginal_q(1, 1)(1) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("hypothesis report flags structural violations with deviations") {
    const StateDmc ch = correlated_channel();
    const HypothesisReport rep = ch.validate_hypotheses(1e-9);
    CHECK_FALSE(rep.zero_input_independent[0]);
    CHECK(rep.zero_input_deviation[0] > 0.1);
    CHECK_FALSE(rep.two_state_rate_ok());
    CHECK(rep.p0_state_invariant); // both states share the same x=0 slice

    // A channel whose input-1 laws coincide across states.
    Eigen::MatrixXd flat(2, 2);
    flat << 0.25, 0.25, 0.25, 0.25;
    const StateDmc same{JointPmf(flat), JointPmf(flat), JointPmf(flat), JointPmf(flat)};
    const HypothesisReport rep2 = same.validate_hypotheses(1e-9);
    CHECK_FALSE(rep2.p1_states_distinct);
    CHECK(rep2.p1_deviation == doctest::Approx(0.0));
}

TEST_CASE("conditional views agree with the stored joints") {
    const StateDmc ch = example_two_state();
    const CondPmf p0 = ch.cond_p(0);
    CHECK(p0(1, 0) == doctest::Approx(0.1).epsilon(1e-12)); // P(y=1 | x=0, s=0)
    CHECK(p0(1, 1) == doctest::Approx(0.9).epsilon(1e-12)); // P(y=1 | x=1, s=0)
    const CondPmf q1 = ch.cond_q(1);
    CHECK(q1(1, 0) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(q1(1, 1) == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(ch.joint_pq(1, 1)(1, 1) == doctest::Approx(0.8 * 0.7).epsilon(1e-12));
}

TEST_CASE("channel sampling reproduces the slice frequencies") {
    const StateDmc ch = example_two_state();
    Rng rng(2024);
    const int n = 200000;
    std::vector<std::uint8_t> xs(n, 1), ss(n, 0), ys(n), zs(n);
    for (int i = n / 2; i < n; ++i) ss[i] = 1;
    ch.sample(xs, ss, rng, ys, zs);

    // First half: (x=1, s=0) -> y ~ Bernoulli(0.9), z ~ Bernoulli(0.6).
    std::int64_t y1 = 0, z1 = 0;
    for (int i = 0; i < n / 2; ++i) {
        y1 += ys[i];
        z1 += zs[i];
    }
    CHECK(std::abs(y1 / (n / 2.0) - 0.9) < 0.01);
    CHECK(std::abs(z1 / (n / 2.0) - 0.6) < 0.01);

    // Second half: (x=1, s=1) joint must match the slice on all four cells.
    const JointPmf target = ch.joint_pq(1, 1);
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(2, 2);
    for (int i = n / 2; i < n; ++i) counts(ys[i], zs[i]) += 1.0;
    for (int y = 0; y < 2; ++y)
        for (int z = 0; z < 2; ++z) CHECK(std::abs(counts(y, z) / (n / 2.0) - target(y, z)) < 0.01);

    std::vector<std::uint8_t> short_xs(3);
    CHECK_THROWS_AS(ch.sample(short_xs, ss, rng, ys, zs), ShapeError);
}

TEST_CASE("channel files round-trip through save and load") {
    const StateDmc ch = example_two_state();
    const std::string path = temp_path("roundtrip");
    save_channel(ch, path);
    const StateDmc back = load_channel(path);
    for (int s = 0; s < 2; ++s)
        for (int x = 0; x < 2; ++x)
            for (int y = 0; y < 2; ++y)
                for (int z = 0; z < 2; ++z)
                    CHECK(back.joint_pq(x, s)(y, z) ==
                          doctest::Approx(ch.joint_pq(x, s)(y, z)).epsilon(1e-12));
    std::remove(path.c_str());
}

TEST_CASE("channel loading rejects malformed files") {
    const std::string path = temp_path("malformed");

    CHECK_THROWS_AS(load_channel("/tmp/covertkey_no_such_file.json"), ParseError);

    std::ofstream(path) << "{not json";
    CHECK_THROWS_AS(load_channel(path), ParseError);

    std::ofstream(path) << R"({"y_size": 2, "z_size": 2})";
    CHECK_THROWS_AS(load_channel(path), ParseError);

    std::ofstream(path) << R"({"y_size": 9, "z_size": 2, "slices": {}})";
    CHECK_THROWS_AS(load_channel(path), ParseError);

    // Slice mass off by more than the file tolerance.
    std::ofstream(path) << R"({"y_size": 2, "z_size": 2, "slices": {
        "x0s0": [0.5, 0.4, 0.05, 0.04],
        "x1s0": [0.04, 0.06, 0.36, 0.54],
        "x0s1": [0.63, 0.27, 0.07, 0.03],
        "x1s1": [0.06, 0.14, 0.24, 0.56]}})";
    CHECK_THROWS_AS(load_channel(path), ParseError);
    std::remove(path.c_str());
}

TEST_CASE("slice constructors reject mismatched alphabets") {
    Eigen::MatrixXd a(2, 2), b(2, 3);
    a << 0.25, 0.25, 0.25, 0.25;
    b << 0.2, 0.2, 0.1, 0.2, 0.2, 0.1;
    CHECK_THROWS_AS(StateDmc(JointPmf(a), JointPmf(b), JointPmf(a), JointPmf(a)), AlphabetError);
}
