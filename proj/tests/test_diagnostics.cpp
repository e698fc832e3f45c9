#include <cmath>
#include <random>

#include <doctest.h>

#include "rggsb/diagnostics.hpp"
#include "rggsb/errors.hpp"

using namespace rggsb;

namespace {

std::vector<std::vector<double>> iid_normal_chains(int m, int n, std::uint64_t seed,
                                                   double mean = 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(mean, 1.0);
    std::vector<std::vector<double>> chains(m);
    for (auto& c : chains) {
        c.resize(n);
        for (auto& v : c) v = normal(rng);
    }
    return chains;
}

// Independent direct implementation of the split variance-ratio formula.
double rhat_oracle(const std::vector<std::vector<double>>& chains) {
    std::vector<std::vector<double>> halves;
    for (const auto& c : chains) {
        std::size_t h = c.size() / 2;
        halves.emplace_back(c.begin(), c.begin() + h);
        halves.emplace_back(c.end() - h, c.end());
    }
    const std::size_t m = halves.size();
    const double n = static_cast<double>(halves[0].size());
    std::vector<double> means;
    double w = 0.0;
    for (const auto& hc : halves) {
        double mu = 0.0;
        for (double v : hc) mu += v;
        mu /= n;
        means.push_back(mu);
        double s2 = 0.0;
        for (double v : hc) s2 += (v - mu) * (v - mu);
        w += s2 / (n - 1.0);
    }
    w /= static_cast<double>(m);
    double grand = 0.0;
    for (double mu : means) grand += mu;
    grand /= static_cast<double>(m);
    double b_over_n = 0.0;
    for (double mu : means) b_over_n += (mu - grand) * (mu - grand);
    b_over_n /= static_cast<double>(m - 1);
    return std::sqrt(((n - 1.0) / n * w + b_over_n) / w);
}

}  // namespace

TEST_SUITE("diagnostics") {

TEST_CASE("split_rhat near 1 for iid chains") {
    auto chains = iid_normal_chains(4, 1000, 99);
    double r = split_rhat(chains);
    CHECK(r >= 0.99);
    CHECK(r <= 1.02);
}

TEST_CASE("split_rhat large for separated chains") {
    auto chains = iid_normal_chains(2, 1000, 7, 0.0);
    auto shifted = iid_normal_chains(2, 1000, 8, 10.0);
    chains.insert(chains.end(), shifted.begin(), shifted.end());
    double r = split_rhat(chains);
    CHECK(r > 2.0);
    // brute-force variance-ratio evaluation on the same fixture
    CHECK(r == doctest::Approx(rhat_oracle(chains)).epsilon(1e-10));
}

TEST_CASE("split_rhat of constant chains is 1 by convention") {
    std::vector<std::vector<double>> chains(3, std::vector<double>(100, 4.2));
    CHECK(split_rhat(chains) == 1.0);
}

TEST_CASE("split_rhat equals an independent recomputation on sampler-like data") {
    auto chains = iid_normal_chains(4, 501, 314);  // odd length: middle draw dropped
    CHECK(split_rhat(chains) == doctest::Approx(rhat_oracle(chains)).epsilon(1e-8));
}

TEST_CASE("ess_bulk of iid chains is near the nominal draw count") {
    auto chains = iid_normal_chains(4, 1000, 2718);
    double e = ess_bulk(chains);
    CHECK(e >= 3200.0);
    CHECK(e <= 4800.0);
}

TEST_CASE("ess_bulk of a strongly autocorrelated chain matches the AR(1) closed form") {
    // AR(1), coefficient 0.9: ESS ~ n (1-phi)/(1+phi) = 10000/19 ~ 526
    std::mt19937_64 rng(5150);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> chain(10000);
    double x = normal(rng) / std::sqrt(1.0 - 0.81);
    for (auto& v : chain) {
        x = 0.9 * x + normal(rng);
        v = x;
    }
    double e = ess_bulk({chain});
    CHECK(e > 526.3 / 1.5);
    CHECK(e < 526.3 * 1.5);
}

TEST_CASE("ess_bulk of constant chains is 0 by convention") {
    std::vector<std::vector<double>> chains(2, std::vector<double>(50, -1.0));
    CHECK(ess_bulk(chains) == 0.0);
}

TEST_CASE("ess_bulk stays within the nominal bound with tolerance") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull}) {
        auto chains = iid_normal_chains(4, 500, seed);
        double e = ess_bulk(chains);
        CHECK(e >= 0.0);
        CHECK(e <= 4 * 500 * 1.25);
    }
}

TEST_CASE("validation rejects short or ragged chains") {
    CHECK_THROWS_AS(split_rhat({}), UsageError);
    CHECK_THROWS_AS(split_rhat({{1.0, 2.0}}), UsageError);
    CHECK_THROWS_AS(split_rhat({{1, 2, 3, 4, 5}, {1, 2, 3}}), UsageError);
}

}  // TEST_SUITE
