#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "pulsetls/ensemble.hpp"

using namespace pulsetls;

TEST(Draws, ReproducibleAndIndexed)
{
    const DetuningModel m{0.0, 1e8, 200, 42};
    EXPECT_EQ(draw_detuning(m, 7), draw_detuning(m, 7));
    EXPECT_NE(draw_detuning(m, 7), draw_detuning(m, 8));
    DetuningModel other = m;
    other.seed = 43;
    EXPECT_NE(draw_detuning(m, 7), draw_detuning(other, 7));
}

TEST(Draws, MomentsMatchModel)
{
    const DetuningModel m{3e7, 2e8, 200, 9};
    const int n = 20000;
    double s = 0.0, ss = 0.0;
    for (int i = 0; i < n; ++i) {
        const double d = draw_detuning(m, static_cast<std::uint64_t>(i));
        s += d;
        ss += d * d;
    }
    const double mean = s / n;
    const double sd = std::sqrt(ss / n - mean * mean);
    EXPECT_NEAR(mean, m.mean, 4.0 * m.sigma / std::sqrt(n));
    EXPECT_NEAR(sd / m.sigma, 1.0, 0.03);
}

TEST(Draws, DegenerateModel)
{
    const DetuningModel m{5e7, 0.0, 200, 1};
    EXPECT_EQ(draw_detuning(m, 0), 5e7);
    EXPECT_EQ(draw_detuning(m, 123), 5e7);
}

TEST(GaussHermite, IntegratesPolynomialsExactly)
{
    const auto rule = gauss_hermite(21);
    ASSERT_EQ(rule.nodes.size(), 21u);
    // int x^{2k} exp(-x^2) dx = Gamma(k + 1/2)
    for (int k = 0; k <= 20; ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i)
            acc += rule.weights[i] * std::pow(rule.nodes[i], 2 * k);
        EXPECT_NEAR(acc / std::tgamma(k + 0.5), 1.0, 1e-9) << k;
    }
    EXPECT_THROW(gauss_hermite(0), ConfigError);
}

TEST(GaussHermite, GaussianMoments)
{
    const DetuningModel m{2.0, 3.0, 1, 1};
    const auto rule = gaussian_detuning_nodes(m, 21);
    double w = 0.0, mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        w += rule.weights[i];
        mean += rule.weights[i] * rule.nodes[i];
    }
    for (std::size_t i = 0; i < rule.nodes.size(); ++i)
        var += rule.weights[i] * (rule.nodes[i] - mean) * (rule.nodes[i] - mean);
    EXPECT_NEAR(w, 1.0, 1e-13);
    EXPECT_NEAR(mean, 2.0, 1e-12);
    EXPECT_NEAR(var, 9.0, 1e-11);
}

TEST(ParallelMap, OrderAndExceptions)
{
    for (unsigned threads : {1u, 2u, 7u}) {
        const auto v = parallel_map(100, threads, [](std::size_t i) { return static_cast<int>(i * i); });
        for (std::size_t i = 0; i < v.size(); ++i)
            EXPECT_EQ(v[i], static_cast<int>(i * i));
    }
    EXPECT_THROW(parallel_map(50, 4u,
                              [](std::size_t i) {
                                  if (i == 17)
                                      throw std::runtime_error("boom");
                                  return 1;
                              }),
                 std::runtime_error);
    EXPECT_TRUE(parallel_map(0, 4u, [](std::size_t) { return 0; }).empty());
}
