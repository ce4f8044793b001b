#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "covertkey/channel.hpp"
#include "covertkey/concentration.hpp"
#include "covertkey/errors.hpp"
#include "covertkey/estimator.hpp"
#include "covertkey/info.hpp"
#include "covertkey/oneshot.hpp"
#include "covertkey/pmf.hpp"
#include "covertkey/protocol.hpp"
#include "covertkey/rates.hpp"
#include "covertkey/report.hpp"
#include "covertkey/rng.hpp"

namespace ck = covertkey;

namespace {

// Exit codes: 0 success, 2 parse, 3 precondition/domain, 4 guard, 5 verdict.
constexpr int kExitOk = 0;
constexpr int kExitParse = 2;
constexpr int kExitPrecondition = 3;
constexpr int kExitGuard = 4;
constexpr int kExitVerdict = 5;

// Bound corruption factor for the harness self-test hook.
constexpr double kCorruptFactor = 1e-9;

struct VerdictFailure : ck::Error {
    using Error::Error;
};

nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ck::ParseError("cannot open file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ck::ParseError("malformed JSON in " + path + ": " + e.what());
    }
    return j;
}

// Paths inside a config resolve relative to the config file's directory.
std::string resolve_relative(const std::string& config_path, const std::string& ref) {
    const std::filesystem::path p(ref);
    if (p.is_absolute()) return ref;
    return (std::filesystem::path(config_path).parent_path() / p).string();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ck::ParseError("cannot open output file: " + path);
    out << content;
}

double json_number(const nlohmann::json& j, const std::string& key) {
    if (!j.contains(key) || !j[key].is_number()) {
        throw ck::ParseError("config: missing or non-numeric field '" + key + "'");
    }
    return j[key].get<double>();
}

double json_number_or(const nlohmann::json& j, const std::string& key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number()) throw ck::ParseError("config: non-numeric field '" + key + "'");
    return j[key].get<double>();
}

int json_int(const nlohmann::json& j, const std::string& key) {
    if (!j.contains(key) || !j[key].is_number_integer()) {
        throw ck::ParseError("config: missing or non-integer field '" + key + "'");
    }
    return j[key].get<int>();
}

int json_int_or(const nlohmann::json& j, const std::string& key, int fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number_integer()) {
        throw ck::ParseError("config: non-integer field '" + key + "'");
    }
    return j[key].get<int>();
}

std::vector<std::uint8_t> json_binary_seq(const nlohmann::json& j, const std::string& what) {
    if (!j.is_array()) throw ck::ParseError("config: '" + what + "' must be an array");
    std::vector<std::uint8_t> s;
    for (const auto& v : j) {
        if (!v.is_number_integer()) {
            throw ck::ParseError("config: '" + what + "' entries must be integers");
        }
        const int b = v.get<int>();
        if (b != 0 && b != 1) throw ck::ParseError("config: '" + what + "' entries must be 0 or 1");
        s.push_back(static_cast<std::uint8_t>(b));
    }
    return s;
}

ck::StateGen parse_state_gen(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
        throw ck::ParseError("config: 'state' must be an object with a string 'kind'");
    }
    const ck::StateGenKind kind = ck::state_gen_kind_from_string(j["kind"].get<std::string>());
    switch (kind) {
        case ck::StateGenKind::kConstantWeight:
            return ck::StateGen::constant_weight(json_number(j, "beta"));
        case ck::StateGenKind::kIidBernoulli:
            return ck::StateGen::iid_bernoulli(json_number(j, "beta"));
        case ck::StateGenKind::kExplicit:
            if (!j.contains("sequence")) {
                throw ck::ParseError("config: explicit state generator needs 'sequence'");
            }
            return ck::StateGen::explicit_sequence(json_binary_seq(j["sequence"], "sequence"));
    }
    throw ck::ParseError("config: unknown state generator");
}

std::optional<ck::Pmf> parse_optional_pmf(const nlohmann::json& j, const std::string& key) {
    if (!j.contains(key)) return std::nullopt;
    if (!j[key].is_array()) throw ck::ParseError("config: '" + key + "' must be an array");
    Eigen::VectorXd v(j[key].size());
    int i = 0;
    for (const auto& e : j[key]) {
        if (!e.is_number()) throw ck::ParseError("config: '" + key + "' entries must be numbers");
        v[i++] = e.get<double>();
    }
    return ck::Pmf(std::move(v));
}

// ---- rates ----------------------------------------------------------------

struct RatesArgs {
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    int grid = 101;
    std::string pairing = "derived";
};

int cmd_rates(const RatesArgs& a) {
    const ck::StateDmc ch = ck::load_channel(a.config);
    ck::require_two_state_hypotheses(ch);
    if (a.grid < 2) throw ck::DomainError("rates: grid must have at least 2 points");
    const ck::ConversePairing pairing = ck::pairing_from_string(a.pairing);
    const std::vector<ck::RatePoint> curve = ck::rate_curve(ch, a.grid, pairing);
    ck::write_rate_curve_csv(curve, a.out);
    std::cout << "wrote " << curve.size() << " rate points to " << a.out << "\n";
    return kExitOk;
}

// ---- simulate -------------------------------------------------------------

struct SimulateArgs {
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    std::int64_t trials = 1000;
    std::string mode = "oracle";
};

std::string summary_csv(const ck::MetricsReport& m) {
    const auto j = nlohmann::ordered_json::parse(ck::metrics_json(m));
    std::string header, row;
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.value().is_array()) {
            for (std::size_t k = 0; k < it.value().size(); ++k) {
                header += it.key() + "_" + std::to_string(k) + ",";
                row += it.value()[k].dump() + ",";
            }
            continue;
        }
        header += it.key() + ",";
        row += (it.value().is_string() ? it.value().get<std::string>() : it.value().dump()) + ",";
    }
    header.back() = '\n';
    row.back() = '\n';
    return header + row;
}

void check_report_invariants(const ck::MetricsReport& m) {
    std::vector<std::string> violations;
    if (m.halted_probe + m.halted_infeasible + m.evaluated != m.trials) {
        violations.push_back("trial accounting does not sum");
    }
    auto in_unit = [](double v) { return std::isnan(v) || (v >= 0.0 && v <= 1.0); };
    if (!in_unit(m.p_e)) violations.push_back("p_e outside [0,1]");
    if (!in_unit(m.fallback_freq)) violations.push_back("fallback_freq outside [0,1]");
    if (!in_unit(m.halt_freq)) violations.push_back("halt_freq outside [0,1]");
    if (!in_unit(m.exact_p_error)) violations.push_back("exact_p_error outside [0,1]");
    if (!in_unit(m.exact_secrecy_tv)) violations.push_back("exact_secrecy_tv outside [0,1]");
    if (!std::isnan(m.covertness_kl) && m.covertness_kl < 0.0) {
        violations.push_back("covertness_kl negative");
    }
    if (!violations.empty()) {
        std::string msg = "metrics invariant check failed:";
        for (const auto& v : violations) msg += " " + v + ";";
        throw VerdictFailure(msg);
    }
}

int cmd_simulate(const SimulateArgs& a) {
    const nlohmann::json j = load_json_file(a.config);
    if (!j.contains("channel") || !j["channel"].is_string()) {
        throw ck::ParseError("config: missing 'channel' path");
    }
    const ck::StateDmc ch = ck::load_channel(resolve_relative(a.config, j["channel"]));

    ck::ProtocolConfig cfg;
    cfg.n = json_int(j, "n");
    cfg.g = json_int(j, "g");
    cfg.alpha = json_number(j, "alpha");
    cfg.kappa = json_number(j, "kappa");
    cfg.zeta = json_number_or(j, "zeta", 0.0);
    cfg.mu = json_number(j, "mu");
    cfg.u_count = json_int_or(j, "u_count", 1);
    cfg.beta_mode = ck::beta_mode_from_string(a.mode);
    cfg.master_seed = a.seed;
    if (j.contains("fixed_log2_m")) {
        const auto& f = j["fixed_log2_m"];
        if (!f.is_array() || f.size() != 3) {
            throw ck::ParseError("config: 'fixed_log2_m' must be an array of 3 integers");
        }
        for (int k = 0; k < 3; ++k) cfg.fixed_log2_m[k] = f[k].get<int>();
    }
    cfg.codebook_law = parse_optional_pmf(j, "codebook_law");
    if (!j.contains("state")) throw ck::ParseError("config: missing 'state' generator");
    const ck::StateGen gen = parse_state_gen(j["state"]);

    for (const std::string& w : cfg.validate(ch)) std::cerr << "warning: " << w << "\n";

    ck::Rng root(a.seed);
    ck::Rng state_rng = root.derive(1);
    const std::vector<std::uint8_t> s = gen.make(cfg.n_prime(), state_rng);

    std::vector<std::string> trial_lines;
    const ck::MetricsReport report = ck::evaluate(ch, s, cfg, a.trials, root, &trial_lines);

    std::string jsonl;
    for (const std::string& line : trial_lines) jsonl += line + "\n";
    write_text_file(a.out + ".trials.jsonl", jsonl);
    write_text_file(a.out + ".summary.csv", summary_csv(report));
    std::cout << ck::metrics_json(report) << "\n";

    check_report_invariants(report);
    return kExitOk;
}

// ---- verify-lemma1 --------------------------------------------------------

struct VerifyArgs {
    std::string out;
    std::uint64_t seed = 0;
    std::int64_t trials = 1000000;
    bool corrupt_bounds = false;
};

int finish_verdicts(std::vector<ck::BoundVerdict> rows, const VerifyArgs& a) {
    bool all_pass = true;
    for (ck::BoundVerdict& r : rows) {
        if (a.corrupt_bounds) {
            r.bound *= kCorruptFactor;
            r.sigma *= kCorruptFactor;
            r.finalize();
        }
        all_pass = all_pass && r.pass;
    }
    ck::write_verdicts_csv(rows, a.out);
    std::cout << rows.size() << " verdicts written to " << a.out
              << (all_pass ? "; all pass" : "; FAILURES present") << "\n";
    if (!all_pass) throw VerdictFailure("bound verification reported failures");
    return kExitOk;
}

int cmd_verify_lemma1(const VerifyArgs& a) {
    ck::Rng root(a.seed);
    std::vector<ck::BoundVerdict> rows;
    const struct { std::int64_t n; double p, eps; } grid[] = {
        {1000, 0.1, 0.3}, {10000, 0.5, 0.5}, {1000, 0.5, 0.2}};
    std::uint64_t stream = 0;
    for (const auto& c : grid) {
        ck::Rng r1 = root.derive(stream++);
        rows.push_back(ck::verify_lemma1_prob(c.n, c.p, c.eps, a.trials, r1));
        ck::Rng r2 = root.derive(stream++);
        rows.push_back(ck::verify_lemma1_exp(c.n, c.p, c.eps, a.trials, r2));
    }
    const struct { std::int64_t n; double p, mu; } cgrid[] = {{1000, 0.1, 0.2}, {500, 0.5, 0.1}};
    for (const auto& c : cgrid) {
        ck::Rng r1 = root.derive(stream++);
        rows.push_back(ck::verify_chernoff_lower(c.n, c.p, c.mu, a.trials, r1));
        ck::Rng r2 = root.derive(stream++);
        rows.push_back(ck::verify_chernoff_upper(c.n, c.p, c.mu, a.trials, r2));
    }
    const struct { std::int64_t pop, succ, draws; double lambda; } hgrid[] = {
        {1000, 300, 100, 0.2}, {500, 250, 200, 0.1}};
    for (const auto& c : hgrid) {
        ck::Rng r = root.derive(stream++);
        rows.push_back(ck::verify_hypergeometric(c.pop, c.succ, c.draws, c.lambda, a.trials, r));
    }
    return finish_verdicts(std::move(rows), a);
}

// ---- verify-oneshot -------------------------------------------------------

std::string oneshot_csv(const std::vector<ck::OneShotVerifyCell>& cells) {
    std::string out =
        "m1,m2,m3,key_count,rand_count,codebooks,delta,gamma,"
        "pe_mean,pe_sigma,pe_bound,pe_pass,sec_mean,sec_sigma,sec_bound,sec_pass\n";
    for (const auto& c : cells) {
        out += std::to_string(c.m1) + "," + std::to_string(c.m2) + "," + std::to_string(c.m3) +
               "," + std::to_string(c.key_count) + "," + std::to_string(c.rand_count) + "," +
               std::to_string(c.codebooks) + "," + ck::format_sig12(c.delta) + "," +
               ck::format_sig12(c.gamma) + "," + ck::format_sig12(c.pe_mean) + "," +
               ck::format_sig12(c.pe_sigma) + "," + ck::format_sig12(c.pe_bound) + "," +
               (c.pe_pass ? "1" : "0") + "," + ck::format_sig12(c.sec_mean) + "," +
               ck::format_sig12(c.sec_sigma) + "," + ck::format_sig12(c.sec_bound) + "," +
               (c.sec_pass ? "1" : "0") + "\n";
    }
    return out;
}

// The standard small verification source: Bernoulli(0.4) input, symmetric
// binary channels with flip rates 0.15 (to the encoder) and 0.25 (onward to
// the observer).
ck::XyzPmf oneshot_verify_source() {
    Eigen::MatrixXd bsc1(2, 2), bsc2(2, 2);
    bsc1 << 0.85, 0.15, 0.15, 0.85;
    bsc2 << 0.75, 0.25, 0.25, 0.75;
    return ck::XyzPmf::from_chain(ck::Pmf::bernoulli(0.4), ck::CondPmf(bsc1), ck::CondPmf(bsc2));
}

int cmd_verify_oneshot(const VerifyArgs& a, int codebooks) {
    ck::Rng root(a.seed);
    const ck::XyzPmf source = oneshot_verify_source();
    const ck::Pmf qy = ck::Pmf::uniform(2);
    const ck::JointPmf xy = source.xy();
    // Symbol score: log-likelihood of the encoder's observation given the input.
    const ck::CondPmf y_given_x = [&] {
        Eigen::MatrixXd rows(2, 2);
        const ck::Pmf px = source.x_marginal();
        for (int x = 0; x < 2; ++x)
            for (int y = 0; y < 2; ++y) rows(x, y) = xy(x, y) / px(x);
        return ck::CondPmf(rows);
    }();
    const ck::SymbolScore nu = [y_given_x](int x, int y) {
        return std::log2(y_given_x(y, x));
    };

    std::vector<ck::OneShotVerifyCell> cells;
    const int m3 = 4;
    std::uint64_t stream = 0;
    bool all_pass = true;
    for (int m1 : {2, 4}) {
        for (int m2 : {2, 4}) {
            ck::Rng r = root.derive(stream++);
            ck::OneShotVerifyCell cell = ck::verify_oneshot_bounds(
                source, qy, m1, m2, m3, std::int64_t{m1} * m3, std::int64_t{m2} * m3, nu,
                codebooks, r);
            if (a.corrupt_bounds) {
                cell.pe_bound *= kCorruptFactor;
                cell.sec_bound *= kCorruptFactor;
                cell.pe_sigma *= kCorruptFactor;
                cell.sec_sigma *= kCorruptFactor;
                cell.finalize();
            }
            all_pass = all_pass && cell.pe_pass && cell.sec_pass;
            cells.push_back(cell);
        }
    }
    write_text_file(a.out, oneshot_csv(cells));
    std::cout << cells.size() << " cells written to " << a.out
              << (all_pass ? "; all pass" : "; FAILURES present") << "\n";
    if (!all_pass) throw VerdictFailure("one-shot bound verification reported failures");
    return kExitOk;
}

// ---- estimate-beta --------------------------------------------------------

// Conditional deviation harness: population of 4*ell positions at weight 1/2,
// ell probes drawn without replacement, each probe's output drawn from the
// input-1 law at its state.
ck::BoundVerdict deviation_verdict(const ck::StateDmc& ch, double lambda, std::int64_t ell,
                                   std::int64_t trials, ck::Rng& rng) {
    // Probe constants only; the protocol-level budget checks do not apply here.
    ck::EstimatorConfig probe;
    {
        const ck::Pmf a = ch.marginal_p(1, 0);
        const ck::Pmf b = ch.marginal_p(1, 1);
        double best = 0.0;
        for (int y = 0; y < ch.y_size(); ++y) {
            if (std::abs(b(y) - a(y)) > best) {
                best = std::abs(b(y) - a(y));
                probe.y0 = y;
            }
        }
        if (!(best > 0.0)) {
            throw ck::PreconditionError("estimate-beta: input-1 laws coincide across states");
        }
        probe.mu0 = a(probe.y0);
        probe.mu1 = b(probe.y0);
    }
    const std::int64_t population = 4 * ell;
    const std::int64_t weight = population / 2;
    const double beta = static_cast<double>(weight) / static_cast<double>(population);
    const ck::Pmf p10 = ch.marginal_p(1, 0);
    const ck::Pmf p11 = ch.marginal_p(1, 1);

    std::vector<int> idx(static_cast<std::size_t>(population));
    std::vector<std::uint8_t> outputs(static_cast<std::size_t>(ell));
    std::int64_t hits = 0;
    for (std::int64_t t = 0; t < trials; ++t) {
        std::iota(idx.begin(), idx.end(), 0);
        for (std::int64_t i = 0; i < ell; ++i) {
            const std::int64_t j = i + rng.uniform_int(population - i);
            std::swap(idx[i], idx[j]);
        }
        for (std::int64_t i = 0; i < ell; ++i) {
            const bool state_one = idx[i] < weight;
            outputs[i] =
                static_cast<std::uint8_t>(rng.categorical(state_one ? p11.vec() : p10.vec()));
        }
        const double est = ck::estimate_beta(outputs, probe);
        if (std::abs(est - beta) > lambda) ++hits;
    }

    ck::BoundVerdict v;
    v.name = "estimator-deviation";
    v.params = {{"lambda", lambda},
                {"ell", static_cast<double>(ell)},
                {"beta", beta}};
    v.bound = ck::deviation_bound(lambda, ell, probe.mu0, probe.mu1);
    v.empirical = static_cast<double>(hits) / static_cast<double>(trials);
    v.sigma = ck::frequency_sigma(hits, trials);
    v.finalize();
    return v;
}

ck::BoundVerdict halting_verdict(double mu, double kappa, int n_prime, std::int64_t trials,
                                 ck::Rng& rng) {
    const std::int64_t g = static_cast<std::int64_t>(std::ceil((1.0 + mu) * kappa * n_prime));
    std::int64_t hits = 0;
    for (std::int64_t t = 0; t < trials; ++t) {
        const std::int64_t probes = rng.binomial(n_prime, kappa);
        if (ck::halting_check(probes, g)) ++hits;
    }
    ck::BoundVerdict v;
    v.name = "estimator-halting";
    v.params = {{"mu", mu}, {"kappa", kappa}, {"n_prime", static_cast<double>(n_prime)}};
    v.bound = ck::halting_prob_bound(mu, kappa, n_prime);
    v.empirical = static_cast<double>(hits) / static_cast<double>(trials);
    v.sigma = ck::frequency_sigma(hits, trials);
    v.finalize();
    return v;
}

int cmd_estimate_beta(const VerifyArgs& a, const std::string& channel_path) {
    const ck::StateDmc ch =
        channel_path.empty() ? ck::example_two_state() : ck::load_channel(channel_path);
    ck::Rng root(a.seed);
    std::vector<ck::BoundVerdict> rows;
    std::uint64_t stream = 0;
    for (double lambda : {0.05, 0.1, 0.2}) {
        for (std::int64_t ell : {std::int64_t{100}, std::int64_t{1000}}) {
            ck::Rng r = root.derive(stream++);
            rows.push_back(deviation_verdict(ch, lambda, ell, a.trials, r));
        }
    }
    const struct { double mu, kappa; int n_prime; } hgrid[] = {
        {0.5, 0.1, 1000}, {0.2, 0.1, 1000}, {0.1, 0.5, 200}};
    for (const auto& c : hgrid) {
        ck::Rng r = root.derive(stream++);
        rows.push_back(halting_verdict(c.mu, c.kappa, c.n_prime, a.trials, r));
    }
    return finish_verdicts(std::move(rows), a);
}

// ---- derandomize ----------------------------------------------------------

struct DerandomizeArgs {
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
};

int cmd_derandomize(const DerandomizeArgs& a) {
    const nlohmann::json j = load_json_file(a.config);
    if (!j.contains("channel") || !j["channel"].is_string()) {
        throw ck::ParseError("config: missing 'channel' path");
    }
    const ck::StateDmc ch = ck::load_channel(resolve_relative(a.config, j["channel"]));
    const double alpha = json_number(j, "alpha");
    const int n = json_int(j, "n");
    if (!j.contains("log2_m") || !j["log2_m"].is_array() || j["log2_m"].size() != 3) {
        throw ck::ParseError("config: 'log2_m' must be an array of 3 integers");
    }
    const int l1 = j["log2_m"][0].get<int>();
    const int l2 = j["log2_m"][1].get<int>();
    const int l3 = j["log2_m"][2].get<int>();
    const int pool = json_int(j, "pool");
    const double eps_prime = json_number(j, "eps_prime");
    const int selected_size = json_int_or(j, "selected_size", 0);
    const int retry_cap = json_int_or(j, "retry_cap", 100);
    const bool enforce = !j.contains("enforce_condition") || j["enforce_condition"].get<bool>();
    if (pool < 1) throw ck::DomainError("derandomize: pool must be positive");
    if (n < 1) throw ck::DomainError("derandomize: n must be positive");

    if (!j.contains("states") || !j["states"].is_array() || j["states"].empty()) {
        throw ck::ParseError("config: 'states' must be a non-empty array");
    }
    ck::Rng root(a.seed);
    ck::Rng state_rng = root.derive(1);
    std::vector<std::vector<std::uint8_t>> states;
    for (const auto& e : j["states"]) {
        if (e.is_array()) {
            states.push_back(json_binary_seq(e, "states"));
        } else {
            states.push_back(parse_state_gen(e).make(n, state_rng));
        }
    }

    const std::optional<ck::Pmf> law = parse_optional_pmf(j, "codebook_law");
    const ck::Pmf qy = law ? *law : ck::default_codebook_law(ch, alpha);
    ck::Rng code_root = root.derive(2);
    std::vector<ck::Codebook> family;
    family.reserve(static_cast<std::size_t>(pool));
    for (int f = 0; f < pool; ++f) {
        ck::Rng r = code_root.derive(static_cast<std::uint64_t>(f));
        family.push_back(ck::gen_codebook(qy, n, 1 << l1, 1 << l2, 1 << l3, r));
    }

    ck::Rng search_rng = root.derive(3);
    const ck::DerandomizeResult res = ck::derandomize(ch, family, states, alpha, eps_prime,
                                                      selected_size, retry_cap, enforce,
                                                      search_rng);

    nlohmann::ordered_json out;
    out["selected"] = res.selected;
    out["attempts"] = res.attempts;
    out["eps_hat"] = ck::format_sig12(res.eps_hat);
    out["eps_prime"] = ck::format_sig12(res.eps_prime);
    out["min_family_size"] = ck::format_sig12(res.min_family_size);
    out["lemma_condition_met"] = res.lemma_condition_met;
    nlohmann::ordered_json per_state = nlohmann::ordered_json::array();
    for (std::size_t s = 0; s < res.family_error.size(); ++s) {
        per_state.push_back({{"error", ck::format_sig12(res.family_error[s])},
                             {"secrecy", ck::format_sig12(res.family_secrecy[s])}});
    }
    out["per_state"] = per_state;
    const std::string text = out.dump(2) + "\n";
    write_text_file(a.out, text);
    std::cout << text;
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Covert key generation testbed: rate formulas, bound verification, "
                 "and end-to-end protocol simulation on two-state channels"};
    app.require_subcommand(1);

    RatesArgs rates;
    CLI::App* c_rates = app.add_subcommand(
        "rates", "Achievable and converse key-rate curve over a state-weight grid");
    c_rates->add_option("--config", rates.config, "Channel spec (JSON)")->required();
    c_rates->add_option("--seed", rates.seed, "Run seed (unused; accepted for uniformity)")
        ->required();
    c_rates->add_option("--out", rates.out, "Output CSV path")->required();
    c_rates->add_option("--grid", rates.grid, "Grid point count");
    c_rates->add_option("--pairing", rates.pairing, "Converse pairing: derived | as-stated");

    SimulateArgs sim;
    CLI::App* c_sim = app.add_subcommand(
        "simulate", "Monte-Carlo protocol rounds with exact-enumeration cross-checks");
    c_sim->add_option("--config", sim.config, "Run config (JSON)")->required();
    c_sim->add_option("--seed", sim.seed, "Master seed")->required();
    c_sim->add_option("--out", sim.out, "Output stem (.trials.jsonl / .summary.csv appended)")
        ->required();
    c_sim->add_option("--trials", sim.trials, "Trial count");
    c_sim->add_option("--mode", sim.mode, "Size-selection weight source: oracle | estimated");

    VerifyArgs vl;
    CLI::App* c_vl = app.add_subcommand(
        "verify-lemma1", "Concentration-bound verification: reciprocal-Bernoulli, "
                         "Chernoff, and hypergeometric grids");
    c_vl->add_option("--seed", vl.seed, "Run seed")->required();
    c_vl->add_option("--out", vl.out, "Output CSV path")->required();
    c_vl->add_option("--trials", vl.trials, "MC draws per cell");
    c_vl->add_flag("--corrupt-bounds", vl.corrupt_bounds, "Self-test hook: scale bounds to force failure")
        ->group("");

    VerifyArgs vo;
    int vo_codebooks = 1000;
    CLI::App* c_vo = app.add_subcommand(
        "verify-oneshot", "Reliability and secrecy bound verification over random codebooks");
    c_vo->add_option("--seed", vo.seed, "Run seed")->required();
    c_vo->add_option("--out", vo.out, "Output CSV path")->required();
    c_vo->add_option("--codebooks", vo_codebooks, "Codebooks per cell");
    c_vo->add_flag("--corrupt-bounds", vo.corrupt_bounds, "Self-test hook: scale bounds to force failure")
        ->group("");

    VerifyArgs ve;
    ve.trials = 100000;
    std::string ve_channel;
    CLI::App* c_ve = app.add_subcommand(
        "estimate-beta", "State-weight estimator deviation and halting bound verification");
    c_ve->add_option("--seed", ve.seed, "Run seed")->required();
    c_ve->add_option("--out", ve.out, "Output CSV path")->required();
    c_ve->add_option("--trials", ve.trials, "MC draws per cell");
    c_ve->add_option("--config", ve_channel, "Channel spec (JSON); default built-in example");
    c_ve->add_flag("--corrupt-bounds", ve.corrupt_bounds, "Self-test hook: scale bounds to force failure")
        ->group("");

    DerandomizeArgs der;
    CLI::App* c_der = app.add_subcommand(
        "derandomize", "Select a small code family meeting averaged error/secrecy constraints");
    c_der->add_option("--config", der.config, "Run config (JSON)")->required();
    c_der->add_option("--seed", der.seed, "Run seed")->required();
    c_der->add_option("--out", der.out, "Output JSON path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitParse;
    }

    try {
        if (c_rates->parsed()) return cmd_rates(rates);
        if (c_sim->parsed()) return cmd_simulate(sim);
        if (c_vl->parsed()) return cmd_verify_lemma1(vl);
        if (c_vo->parsed()) return cmd_verify_oneshot(vo, vo_codebooks);
        if (c_ve->parsed()) return cmd_estimate_beta(ve, ve_channel);
        if (c_der->parsed()) return cmd_derandomize(der);
    } catch (const VerdictFailure& e) {
        std::cerr << "verdict failure: " << e.what() << "\n";
        return kExitVerdict;
    } catch (const ck::SearchError& e) {
        std::cerr << "search failure: " << e.what() << "\n";
        return kExitVerdict;
    } catch (const ck::GuardError& e) {
        std::cerr << "guard violation: " << e.what() << "\n";
        return kExitGuard;
    } catch (const ck::ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitParse;
    } catch (const ck::Error& e) {
        std::cerr << "precondition error: " << e.what() << "\n";
        return kExitPrecondition;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPrecondition;
    }
    return kExitOk;
}
