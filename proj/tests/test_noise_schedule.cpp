#include <gtest/gtest.h>

#include <cmath>

#include "ldp/errors.hpp"
#include "ldp/noise_schedule.hpp"

using namespace ldp;

TEST(NoiseSchedule, SingleStepProduct) {
    // T=1, beta 0.5: alpha_bar = 0.5, alpha = sigma = sqrt(0.5)
    const NoiseSchedule s = build_linear_schedule(1, 0.5, 0.5);
    ASSERT_EQ(s.num_steps, 1);
    EXPECT_NEAR(s.alpha_bar[0], 0.5, 1e-12);
    EXPECT_NEAR(s.alpha_t[0], 0.7071067811865476, 1e-12);
    EXPECT_NEAR(s.sigma_t[0], 0.7071067811865476, 1e-12);
}

TEST(NoiseSchedule, TwoStepCumulativeProduct) {
    const NoiseSchedule s = build_linear_schedule(2, 0.1, 0.2);
    EXPECT_NEAR(s.betas[0], 0.1, 1e-12);
    EXPECT_NEAR(s.betas[1], 0.2, 1e-12);
    EXPECT_NEAR(s.alpha_bar[0], 0.9, 1e-12);
    EXPECT_NEAR(s.alpha_bar[1], 0.72, 1e-12);
    EXPECT_NEAR(s.alpha_t[1], 0.848528137423857, 1e-12);
    EXPECT_NEAR(s.sigma_t[1], 0.5291502622129181, 1e-12);
}

TEST(NoiseSchedule, VariancePreservingIdentity) {
    for (const NoiseSchedule& s :
         {default_schedule(), build_linear_schedule(50, 0.001, 0.3), build_linear_schedule(1, 0.9, 0.9)}) {
        for (int t = 0; t < s.num_steps; ++t) {
            const double a = s.alpha_t[static_cast<size_t>(t)];
            const double g = s.sigma_t[static_cast<size_t>(t)];
            EXPECT_NEAR(a * a + g * g, 1.0, 1e-6);
        }
    }
}

TEST(NoiseSchedule, MonotoneArrays) {
    const NoiseSchedule s = default_schedule();
    for (int t = 1; t < s.num_steps; ++t) {
        EXPECT_LT(s.alpha_bar[static_cast<size_t>(t)], s.alpha_bar[static_cast<size_t>(t - 1)]);
        EXPECT_GT(s.sigma_t[static_cast<size_t>(t)], s.sigma_t[static_cast<size_t>(t - 1)]);
        EXPECT_GT(s.betas[static_cast<size_t>(t)], 0.0);
        EXPECT_LT(s.betas[static_cast<size_t>(t)], 1.0);
    }
}

TEST(NoiseSchedule, RejectsBadBounds) {
    EXPECT_THROW(build_linear_schedule(0, 0.1, 0.2), ConfigError);
    EXPECT_THROW(build_linear_schedule(10, 0.0, 0.2), ConfigError);
    EXPECT_THROW(build_linear_schedule(10, 0.3, 0.2), ConfigError);
    EXPECT_THROW(build_linear_schedule(10, 0.3, 1.0), ConfigError);
}

TEST(TimestepSampling, DegenerateRange) {
    Rng rng(1);
    for (int i = 0; i < 10; ++i) EXPECT_EQ(sample_timestep(rng, {5, 5}), 5);
}

TEST(TimestepSampling, DeterministicGivenSeed) {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) {
        EXPECT_EQ(sample_timestep(a, {0, 999}), sample_timestep(b, {0, 999}));
    }
}

TEST(TimestepSampling, UniformMean) {
    Rng rng(7);
    double sum    = 0.0;
    const int n   = 100000;
    int lo = 999, hi = 0;
    for (int i = 0; i < n; ++i) {
        const int t = sample_timestep(rng, {0, 999});
        sum += t;
        lo = std::min(lo, t);
        hi = std::max(hi, t);
    }
    EXPECT_NEAR(sum / n, 499.5, 5.0);
    EXPECT_GE(lo, 0);
    EXPECT_LE(hi, 999);
}

TEST(TimestepSampling, RangeValidation) {
    const NoiseSchedule s = build_linear_schedule(100, 0.001, 0.02);
    EXPECT_NO_THROW(validate_range({0, 99}, s));
    EXPECT_THROW(validate_range({-1, 50}, s), ConfigError);
    EXPECT_THROW(validate_range({60, 50}, s), ConfigError);
    EXPECT_THROW(validate_range({0, 100}, s), ConfigError);
}

TEST(Perturb, ZeroNoiseAndZeroLatent) {
    const NoiseSchedule s = default_schedule();
    Rng rng(3);
    const Tensor v    = Tensor::randn({4, 6, 6}, rng);
    const Tensor zero = Tensor::zeros({4, 6, 6});
    const int t       = 300;

    const Tensor z_clean = perturb(v, zero, t, s);
    const Tensor z_noise = perturb(zero, v, t, s);
    for (int64_t i = 0; i < v.size(); ++i) {
        EXPECT_DOUBLE_EQ(z_clean[i], s.alpha_t[t] * v[i]);
        EXPECT_DOUBLE_EQ(z_noise[i], s.sigma_t[t] * v[i]);
    }
}

TEST(Perturb, ScalarHandValue) {
    // alpha_bar = 0.25 -> alpha 0.5, sigma sqrt(0.75); v=1, eps=1
    const NoiseSchedule s = build_linear_schedule(1, 0.75, 0.75);
    Tensor v({1, 1, 1}), eps({1, 1, 1});
    v[0]   = 1.0;
    eps[0] = 1.0;
    EXPECT_NEAR(perturb(v, eps, 0, s)[0], 1.3660254037844386, 1e-12);
}

TEST(Perturb, ShapeMismatchRejected) {
    const NoiseSchedule s = default_schedule();
    EXPECT_THROW(perturb(Tensor::zeros({4, 8, 8}), Tensor::zeros({4, 8, 4}), 10, s), ArgumentError);
    EXPECT_THROW(perturb(Tensor::zeros({4, 8, 8}), Tensor::zeros({4, 8, 8}), 1000, s), ArgumentError);
}

TEST(Perturb, LinearInLatentAndNoise) {
    const NoiseSchedule s = default_schedule();
    Rng rng(11);
    for (int round = 0; round < 20; ++round) {
        const Tensor v1 = Tensor::randn({2, 4, 4}, rng);
        const Tensor v2 = Tensor::randn({2, 4, 4}, rng);
        const Tensor e  = Tensor::randn({2, 4, 4}, rng);
        const double a = rng.normal(), b = rng.normal();
        const int t = sample_timestep(rng, {0, 999});

        const Tensor zero = Tensor::zeros({2, 4, 4});
        const Tensor lhs  = perturb(v1 * a + v2 * b, e, t, s);
        Tensor rhs        = perturb(v1, zero, t, s) * a + perturb(v2, zero, t, s) * b +
                     perturb(zero, e, t, s);
        EXPECT_LE(max_abs(lhs - rhs), 1e-12);
    }
}

TEST(Perturb, UnitVarianceInExpectation) {
    // v standardized to (0,1) stats, eps ~ N(0,1): Var(z) = alpha^2 + sigma^2 = 1
    const NoiseSchedule s = default_schedule();
    Rng rng(13);
    double sum = 0.0, sum_sq = 0.0;
    int64_t n = 0;
    for (int round = 0; round < 150; ++round) {
        const int t = sample_timestep(rng, {20, 980});
        Tensor v    = Tensor::randn({1, 16, 16}, rng);
        double mu = 0.0;
        for (int64_t i = 0; i < v.size(); ++i) mu += v[i];
        mu /= static_cast<double>(v.size());
        double var = 0.0;
        for (int64_t i = 0; i < v.size(); ++i) var += (v[i] - mu) * (v[i] - mu);
        var /= static_cast<double>(v.size());
        for (int64_t i = 0; i < v.size(); ++i) v[i] = (v[i] - mu) / std::sqrt(var);

        const Tensor eps = Tensor::randn({1, 16, 16}, rng);
        const Tensor z   = perturb(v, eps, t, s);
        for (int64_t i = 0; i < z.size(); ++i) {
            sum += z[i];
            sum_sq += z[i] * z[i];
            ++n;
        }
    }
    const double mean_z = sum / static_cast<double>(n);
    const double var_z  = sum_sq / static_cast<double>(n) - mean_z * mean_z;
    // 3 sigma of the variance estimator ~ 3*sqrt(2/n)
    EXPECT_NEAR(var_z, 1.0, 3.0 * std::sqrt(2.0 / static_cast<double>(n)));
}
