#include "covertkey/concentration.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "covertkey/errors.hpp"
#include "covertkey/report.hpp"

namespace covertkey {

namespace {

void check_lemma1_range(std::int64_t n, double p, double eps) {
    if (n <= 0) throw DomainError("lemma1 bound: n must be positive");
    if (!(p > 0.0 && p < 1.0)) throw DomainError("lemma1 bound: p must lie in (0, 1)");
    const double lo = 2.0 / (static_cast<double>(n) * p);
    if (!(eps > lo && eps < 1.0)) {
        throw PreconditionError("lemma1 bound: eps must lie in (2/(n*p), 1) = (" +
                                format_sig12(lo) + ", 1)");
    }
}

} // namespace

double lemma1_prob_bound(std::int64_t n, double p, double eps) {
    check_lemma1_range(n, p, eps);
    return 2.0 * std::exp(-static_cast<double>(n) * p * eps * eps / 32.0);
}

double lemma1_exp_bound(std::int64_t n, double p, double eps) {
    check_lemma1_range(n, p, eps);
    const double center = 1.0 / (static_cast<double>(n + 1) * p);
    return eps * center + (1.0 + center) * std::exp(-static_cast<double>(n) * p * eps * eps / 32.0);
}

BestEps lemma1_exp_bound_best(std::int64_t n, double p, int grid_points) {
    if (grid_points < 2) throw DomainError("lemma1_exp_bound_best: need at least 2 grid points");
    const double lo = 2.0 / (static_cast<double>(n) * p);
    if (!(lo < 1.0)) {
        throw PreconditionError("lemma1_exp_bound_best: empty eps range (n*p <= 2)");
    }
    BestEps best;
    best.bound = std::numeric_limits<double>::infinity();
    for (int i = 0; i < grid_points; ++i) {
        // Interior grid over (lo, 1), excluding both open endpoints.
        const double eps = lo + (1.0 - lo) * (i + 1.0) / (grid_points + 1.0);
        const double b = lemma1_exp_bound(n, p, eps);
        if (b < best.bound) {
            best.bound = b;
            best.eps = eps;
        }
    }
    return best;
}

ChernoffBounds chernoff_bounds(std::int64_t n, double p, double mu) {
    if (n <= 0) throw DomainError("chernoff_bounds: n must be positive");
    if (!(p > 0.0 && p < 1.0)) throw DomainError("chernoff_bounds: p must lie in (0, 1)");
    if (!(mu > 0.0 && mu < 1.0)) throw DomainError("chernoff_bounds: mu must lie in (0, 1)");
    const double np = static_cast<double>(n) * p;
    ChernoffBounds b;
    b.lower_tail = std::exp(-np * mu * mu / 2.0);
    b.upper_tail = std::exp(-np * mu * mu / 3.0);
    return b;
}

double hypergeometric_tail(std::int64_t population, std::int64_t successes, std::int64_t draws,
                           double lambda) {
    if (population <= 0 || draws <= 0 || draws > population || successes < 0 ||
        successes > population) {
        throw DomainError("hypergeometric_tail: inconsistent population parameters");
    }
    if (!(lambda > 0.0)) throw DomainError("hypergeometric_tail: lambda must be positive");
    return std::exp(-lambda * lambda * static_cast<double>(draws) / 2.0);
}

BoundVerdict verify_lemma1_prob(std::int64_t n, double p, double eps, std::int64_t trials,
                                Rng& rng) {
    BoundVerdict v;
    v.name = "lemma1_prob";
    v.params = {{"n", double(n)}, {"p", p}, {"eps", eps}, {"trials", double(trials)}};
    v.bound = lemma1_prob_bound(n, p, eps);
    const double center = 1.0 / (static_cast<double>(n + 1) * p);
    std::int64_t hits = 0;
    for (std::int64_t t = 0; t < trials; ++t) {
        const std::int64_t s = rng.binomial(n, p);
        const double dev = std::abs(1.0 / (1.0 + static_cast<double>(s)) - center);
        hits += (dev >= eps * center);
    }
    v.empirical = static_cast<double>(hits) / static_cast<double>(trials);
    v.sigma = frequency_sigma(hits, trials);
    v.finalize();
    return v;
}

BoundVerdict verify_lemma1_exp(std::int64_t n, double p, double eps, std::int64_t trials,
                               Rng& rng) {
    BoundVerdict v;
    v.name = "lemma1_exp";
    v.params = {{"n", double(n)}, {"p", p}, {"eps", eps}, {"trials", double(trials)}};
    v.bound = lemma1_exp_bound(n, p, eps);
    const double center = 1.0 / (static_cast<double>(n + 1) * p);
    KahanSum total;
    KahanSum total_sq;
    for (std::int64_t t = 0; t < trials; ++t) {
        const std::int64_t s = rng.binomial(n, p);
        const double dev = std::abs(1.0 / (1.0 + static_cast<double>(s)) - center);
        total.add(dev);
        total_sq.add(dev * dev);
    }
    const double mean = total.value() / static_cast<double>(trials);
    const double var =
        std::max(0.0, total_sq.value() / static_cast<double>(trials) - mean * mean);
    v.empirical = mean;
    v.sigma = std::sqrt(var / static_cast<double>(trials));
    v.finalize();
    return v;
}

BoundVerdict verify_chernoff_lower(std::int64_t n, double p, double mu, std::int64_t trials,
                                   Rng& rng) {
    BoundVerdict v;
    v.name = "chernoff_lower";
    v.params = {{"n", double(n)}, {"p", p}, {"mu", mu}, {"trials", double(trials)}};
    v.bound = chernoff_bounds(n, p, mu).lower_tail;
    const double np = static_cast<double>(n) * p;
    std::int64_t hits = 0;
    for (std::int64_t t = 0; t < trials; ++t) {
        hits += (static_cast<double>(rng.binomial(n, p)) <= (1.0 - mu) * np);
    }
    v.empirical = static_cast<double>(hits) / static_cast<double>(trials);
    v.sigma = frequency_sigma(hits, trials);
    v.finalize();
    return v;
}

BoundVerdict verify_chernoff_upper(std::int64_t n, double p, double mu, std::int64_t trials,
                                   Rng& rng) {
    BoundVerdict v;
    v.name = "chernoff_upper";
    v.params = {{"n", double(n)}, {"p", p}, {"mu", mu}, {"trials", double(trials)}};
    v.bound = chernoff_bounds(n, p, mu).upper_tail;
    const double np = static_cast<double>(n) * p;
    std::int64_t hits = 0;
    for (std::int64_t t = 0; t < trials; ++t) {
        hits += (static_cast<double>(rng.binomial(n, p)) >= (1.0 + mu) * np);
    }
    v.empirical = static_cast<double>(hits) / static_cast<double>(trials);
    v.sigma = frequency_sigma(hits, trials);
    v.finalize();
    return v;
}

BoundVerdict verify_hypergeometric(std::int64_t population, std::int64_t successes,
                                   std::int64_t draws, double lambda, std::int64_t trials,
                                   Rng& rng) {
    BoundVerdict v;
    v.name = "hypergeometric";
    v.params = {{"population", double(population)},
                {"successes", double(successes)},
                {"draws", double(draws)},
                {"lambda", lambda},
                {"trials", double(trials)}};
    v.bound = hypergeometric_tail(population, successes, draws, lambda);
    const double beta = static_cast<double>(successes) / static_cast<double>(population);
    std::int64_t hits = 0;
    for (std::int64_t t = 0; t < trials; ++t) {
        // Exact sampling without replacement via sequential conditional draws.
        std::int64_t remaining_good = successes;
        std::int64_t remaining = population;
        std::int64_t h = 0;
        for (std::int64_t d = 0; d < draws; ++d) {
            if (rng.uniform() * static_cast<double>(remaining) <
                static_cast<double>(remaining_good)) {
                ++h;
                --remaining_good;
            }
            --remaining;
        }
        const double dev = std::abs(static_cast<double>(h) / static_cast<double>(draws) - beta);
        hits += (dev >= lambda / 2.0);
    }
    v.empirical = static_cast<double>(hits) / static_cast<double>(trials);
    v.sigma = frequency_sigma(hits, trials);
    v.finalize();
    return v;
}

void write_verdicts_csv(const std::vector<BoundVerdict>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("verdict table: cannot write " + path);
    out << "name,params,bound,empirical,sigma,pass\n";
    for (const BoundVerdict& v : rows) {
        out << v.name << ',';
        std::string params;
        for (const auto& [key, value] : v.params) {
            if (!params.empty()) params += ' ';
            params += key + "=" + format_sig12(value);
        }
        out << params << ',' << format_sig12(v.bound) << ',' << format_sig12(v.empirical) << ','
            << format_sig12(v.sigma) << ',' << (v.pass ? "pass" : "FAIL") << '\n';
    }
}

} // namespace covertkey
