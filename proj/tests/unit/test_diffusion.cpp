#include "pardec/diffusion.hpp"
#include "pardec/errors.hpp"
#include "test_util.hpp"

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/chi_squared.hpp>
#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace pardec;
using pardec::testing::random_tokens;
using pardec::testing::small_vocab;

namespace {

double mask_fraction(const Tokens & x, TokenId mask) {
    return static_cast<double>(std::count(x.begin(), x.end(), mask)) / static_cast<double>(x.size());
}

PositionDistributions point_mass(const Tokens & x0, int vocab_size) {
    PositionDistributions d;
    d.rows = static_cast<int>(x0.size());
    d.cols = vocab_size;
    d.probs.assign(static_cast<std::size_t>(d.rows) * d.cols, 0.0);
    for (int i = 0; i < d.rows; ++i) {
        d.row(i)[x0[i]] = 1.0;
    }
    return d;
}

PositionDistributions uniform_rows(int rows, int cols) {
    PositionDistributions d;
    d.rows = rows;
    d.cols = cols;
    d.probs.assign(static_cast<std::size_t>(rows) * cols, 1.0 / cols);
    return d;
}

}  // namespace

TEST_CASE("noise level domain") {
    CHECK_NOTHROW(NoiseLevel(0.0));
    CHECK_NOTHROW(NoiseLevel(1.0));
    CHECK_THROWS_AS(NoiseLevel(-0.1), DomainError);
    CHECK_THROWS_AS(NoiseLevel(1.5), DomainError);
    CHECK_THROWS_AS(NoiseLevel(std::nan("")), DomainError);
}

TEST_CASE("forward mask endpoints") {
    const Vocabulary v = small_vocab();
    Rng              rng(3);
    const Tokens     x0 = random_tokens(rng, 200, v);
    CHECK(forward_mask(x0, NoiseLevel(0.0), v, rng) == x0);
    const Tokens all = forward_mask(x0, NoiseLevel(1.0), v, rng);
    CHECK(std::all_of(all.begin(), all.end(), [&](TokenId t) { return t == v.mask_id(); }));
    Tokens bad = x0;
    bad[4]     = v.mask_id();
    CHECK_THROWS_AS(forward_mask(bad, NoiseLevel(0.5), v, rng), PreconditionError);
}

TEST_CASE("forward mask is deterministic given the seed") {
    const Vocabulary v = small_vocab();
    Rng              g(1);
    const Tokens     x0 = random_tokens(g, 500, v);
    Rng              a(99), b(99);
    CHECK(forward_mask(x0, NoiseLevel(0.4), v, a) == forward_mask(x0, NoiseLevel(0.4), v, b));
}

TEST_CASE("forward mask fraction at L=10000") {
    const Vocabulary v = small_vocab();
    Rng              g(5);
    const Tokens     x0 = random_tokens(g, 10000, v);
    double           sum = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);
        sum += mask_fraction(forward_mask(x0, NoiseLevel(0.3), v, rng), v.mask_id());
    }
    CHECK(std::abs(sum / 10.0 - 0.3) <= 0.015);
}

TEST_CASE("forward mask counts follow Binomial(64, 0.5)") {
    const Vocabulary v = small_vocab();
    constexpr int    L = 64, draws = 2000;
    Rng              g(11);
    const Tokens     x0 = random_tokens(g, L, v);
    std::vector<int> observed(L + 1, 0);
    for (int seed = 0; seed < draws; ++seed) {
        Rng          rng(static_cast<std::uint64_t>(seed));
        const Tokens x = forward_mask(x0, NoiseLevel(0.5), v, rng);
        ++observed[std::count(x.begin(), x.end(), v.mask_id())];
    }

    // Pool outer counts until every bin expects at least 5 draws.
    const boost::math::binomial_distribution<double> binom(L, 0.5);
    std::vector<double> expected_bins, observed_bins;
    double              exp_acc = 0.0, obs_acc = 0.0;
    for (int k = 0; k <= L; ++k) {
        exp_acc += draws * boost::math::pdf(binom, k);
        obs_acc += observed[k];
        if (exp_acc >= 5.0 && draws * boost::math::cdf(complement(binom, k)) >= 5.0) {
            expected_bins.push_back(exp_acc);
            observed_bins.push_back(obs_acc);
            exp_acc = obs_acc = 0.0;
        }
    }
    expected_bins.back() += exp_acc;
    observed_bins.back() += obs_acc;

    double chi2 = 0.0;
    for (std::size_t i = 0; i < expected_bins.size(); ++i) {
        chi2 += (observed_bins[i] - expected_bins[i]) * (observed_bins[i] - expected_bins[i]) / expected_bins[i];
    }
    const boost::math::chi_squared_distribution<double> dist(static_cast<double>(expected_bins.size() - 1));
    const double critical = boost::math::quantile(dist, 0.99);
    INFO("chi2 = " << chi2 << ", critical = " << critical << ", bins = " << expected_bins.size());
    CHECK(chi2 < critical);
}

TEST_CASE("reverse keep probability") {
    CHECK(reverse_keep_mask_prob(NoiseLevel(0.25), NoiseLevel(0.5)) == 0.5);
    CHECK(reverse_keep_mask_prob(NoiseLevel(0.0), NoiseLevel(0.5)) == 0.0);
    CHECK_THROWS_AS(reverse_keep_mask_prob(NoiseLevel(0.9), NoiseLevel(0.3)), DomainError);
    CHECK_THROWS_AS(reverse_keep_mask_prob(NoiseLevel(0.5), NoiseLevel(0.5)), DomainError);
    CHECK_THROWS_AS(reverse_keep_mask_prob(NoiseLevel(0.0), NoiseLevel(0.0)), DomainError);
}

TEST_CASE("reverse step leaves unmasked positions alone") {
    const Vocabulary v = small_vocab();
    Rng              rng(8);
    const Tokens     xt = random_tokens(rng, 100, v);
    const auto       d  = uniform_rows(100, v.size());
    CHECK(sample_reverse_step(xt, NoiseLevel(0.2), NoiseLevel(0.7), d, v, rng) == xt);

    Tokens partial = forward_mask(xt, NoiseLevel(0.5), v, rng);
    Tokens next    = sample_reverse_step(partial, NoiseLevel(0.3), NoiseLevel(0.5), d, v, rng);
    for (std::size_t i = 0; i < partial.size(); ++i) {
        if (partial[i] != v.mask_id()) {
            CHECK(next[i] == partial[i]);
        }
    }
}

TEST_CASE("reverse step to s=0 resolves every mask and never emits the mask token") {
    const Vocabulary v = small_vocab(6);
    Rng              rng(2);
    const Tokens     xt(300, v.mask_id());
    // Mass on the mask token is dropped and the rest renormalized.
    PositionDistributions d = uniform_rows(300, v.size());
    const Tokens          out = sample_reverse_step(xt, NoiseLevel(0.0), NoiseLevel(0.5), d, v, rng);
    CHECK(std::none_of(out.begin(), out.end(), [&](TokenId t) { return t == v.mask_id(); }));
}

TEST_CASE("reverse keep fraction matches s/t") {
    const Vocabulary v = small_vocab();
    const Tokens     xt(10000, v.mask_id());
    const auto       d   = uniform_rows(10000, v.size());
    double           sum = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);
        sum += mask_fraction(sample_reverse_step(xt, NoiseLevel(0.25), NoiseLevel(0.5), d, v, rng), v.mask_id());
    }
    CHECK(std::abs(sum / 10.0 - 0.5) <= 0.02);
}

TEST_CASE("reverse step rejects malformed distributions") {
    const Vocabulary      v = small_vocab(8);
    Rng                   rng(1);
    const Tokens          xt(4, v.mask_id());
    PositionDistributions d = uniform_rows(4, v.size());
    d.row(2)[3] += 0.01;
    CHECK_THROWS_AS(sample_reverse_step(xt, NoiseLevel(0.0), NoiseLevel(1.0), d, v, rng), PreconditionError);
    d = uniform_rows(4, v.size());
    d.row(1)[3] = -d.row(1)[3];
    CHECK_THROWS_AS(sample_reverse_step(xt, NoiseLevel(0.0), NoiseLevel(1.0), d, v, rng), PreconditionError);
    CHECK_THROWS_AS(sample_reverse_step(xt, NoiseLevel(0.0), NoiseLevel(1.0), uniform_rows(3, v.size()), v, rng),
                    PreconditionError);
}

TEST_CASE("forward then reverse with a perfect oracle reconstructs the input") {
    const Vocabulary v = small_vocab();
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng          rng(seed);
        const Tokens x0 = random_tokens(rng, 256, v);
        const double t  = 0.05 + 0.9 * rng.uniform();
        const Tokens xt = forward_mask(x0, NoiseLevel(t), v, rng);
        CHECK(sample_reverse_step(xt, NoiseLevel(0.0), NoiseLevel(t), point_mass(x0, v.size()), v, rng) == x0);
    }
}
