// Filter core: prediction, measurement model, closed-form gain and
// contraction. Expected values were computed independently with
// high-precision arithmetic and frozen here.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "tagest/estimator.hpp"
#include "tagest/rng.hpp"

using namespace tagest;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("prediction carries the estimate and inflates the variance",
          "[estimator]") {
    EstimatorState st;
    st.k = 3;
    st.z_hat_post = 100.0;
    st.p_post = 1.0;
    TuningParams tp;

    const FramePrediction pred = predict(st, tp);
    CHECK(pred.k == 4);
    CHECK(pred.z_hat_prior == 100.0);
    CHECK_THAT(pred.p_prior, WithinRel(1.1, 1e-15));
    CHECK(pred.frame_size == 100);
}

TEST_CASE("frame size rounds half away from zero with a floor of one slot",
          "[estimator]") {
    TuningParams tp;
    EstimatorState st;

    st.z_hat_post = 97.5;
    CHECK(predict(st, tp).frame_size == 98);
    st.z_hat_post = 97.4999;
    CHECK(predict(st, tp).frame_size == 97);
    st.z_hat_post = 1.0;
    CHECK(predict(st, tp).frame_size == 1);

    // Independent rounding oracle: floor(x + 0.5) for positive x.
    Xoshiro rng(42);
    for (int i = 0; i < 1000; ++i) {
        st.z_hat_post = 1.0 + rng.uniform01() * 1e6;
        const auto expected = static_cast<std::int64_t>(
            std::floor(st.z_hat_post + 0.5));
        CHECK(predict(st, tp).frame_size == std::max<std::int64_t>(1, expected));
    }
}

TEST_CASE("idle probability, exponential and exact occupancy forms",
          "[estimator]") {
    CHECK_THAT(idle_probability(100.0, 100),
               WithinRel(0.36787944117144232, 1e-15));
    CHECK_THAT(idle_probability_exact(100.0, 100),
               WithinRel(0.3660323412732295, 1e-13));

    const double gap = std::abs(idle_probability_exact(100.0, 100) -
                                idle_probability(100.0, 100));
    CHECK_THAT(gap, WithinRel(0.0018470998982128167, 1e-10));
    CHECK(gap < 0.002);

    CHECK(idle_probability_exact(0.0, 5) == 1.0);
    CHECK(idle_probability_exact(3.0, 1) == 0.0);
    CHECK(idle_probability(0.0, 5) == 1.0);
}

TEST_CASE("approximation gap shrinks as frames grow", "[estimator]") {
    double prev = 1.0;
    for (std::int64_t l : {1000, 10000, 100000}) {
        const double z = static_cast<double>(l);
        const double gap =
            std::abs(idle_probability_exact(z, l) - idle_probability(z, l));
        CHECK(gap < 1e-3);
        CHECK(gap < prev);
        prev = gap;
    }
}

TEST_CASE("measurement jacobian", "[estimator]") {
    CHECK_THAT(measurement_jacobian(100.0),
               WithinRel(-0.0036787944117144232, 1e-14));
    CHECK_THAT(measurement_jacobian(1e5),
               WithinRel(-3.6787944117144232e-6, 1e-14));

    Xoshiro rng(7);
    for (int i = 0; i < 1000; ++i) {
        const double zh = 1.0 + rng.uniform01() * 1e9;
        CHECK(measurement_jacobian(zh) < 0.0);
    }
}

TEST_CASE("idle variance profile and measurement noise", "[estimator]") {
    CHECK(idle_variance_coeff(0.0) == 0.0);
    CHECK_THAT(idle_variance_coeff(1.0), WithinRel(0.097208874698216938, 1e-14));
    CHECK_THAT(measurement_noise_variance(100.0, 100),
               WithinRel(9.7208874698216938e-4, 1e-14));
    CHECK_THAT(measurement_noise_variance(1000.0, 1000),
               WithinRel(9.7208874698216938e-5, 1e-14));
}

TEST_CASE("variance profile peak", "[estimator]") {
    const VarianceProfilePeak peak = lambda_max();

    // Independent oracle: golden-section maximization of the profile itself
    // (the library bisects the derivative instead).
    double a = 1.0, b = 2.0;
    const double gr = 0.61803398874989485;
    while (b - a > 1e-13) {
        const double c = b - gr * (b - a);
        const double d = a + gr * (b - a);
        if (idle_variance_coeff(c) > idle_variance_coeff(d)) b = d;
        else a = c;
    }
    const double rho_gold = 0.5 * (a + b);

    CHECK(peak.rho_star > 1.0);
    CHECK(peak.rho_star < 2.0);
    CHECK_THAT(peak.rho_star, WithinAbs(rho_gold, 1e-8));
    CHECK(std::abs(2.0 * peak.rho_star + 1.0 - std::exp(peak.rho_star)) < 1e-9);

    CHECK_THAT(peak.rho_star, WithinAbs(1.2564312086261697, 1e-9));
    CHECK_THAT(peak.lambda_star, WithinAbs(0.10181609439726844, 1e-11));
    CHECK(peak.lambda_star < std::exp(-2.0));

    // The peak dominates the profile over a wide grid.
    for (int i = 1; i <= 2000; ++i)
        CHECK(idle_variance_coeff(0.005 * i) <= peak.lambda_star + 1e-15);
}

TEST_CASE("injected noise and gain examples", "[estimator]") {
    const double c = measurement_jacobian(100.0);
    const double r = compute_r(0.25, 1.0, c);
    CHECK_THAT(r, WithinRel(3.3833820809153173e-6, 1e-13));
    CHECK_THAT(kalman_gain(1.0, c, r), WithinRel(-217.46254627672362, 1e-12));

    CHECK_THAT(kalman_gain(1.0, 1.0, 1.0), WithinRel(0.5, 1e-15));

    const double c5 = measurement_jacobian(1e5);
    CHECK_THAT(kalman_gain(1.0, c5, compute_r(10.0, 1.0, c5)),
               WithinRel(-24711.65298599132, 1e-12));
}

TEST_CASE("gain closed form and variance contraction over random states",
          "[estimator]") {
    Xoshiro rng(0xABCDu);
    for (int i = 0; i < 10000; ++i) {
        const double p = std::exp(rng.uniform01() * 13.8 - 6.9);   // 1e-3..1e3
        const double phi = std::exp(rng.uniform01() * 9.2 - 4.6);  // 1e-2..1e2
        const double zh = std::exp(rng.uniform01() * 20.7);        // 1..1e9
        const double c = measurement_jacobian(zh);
        const double r = compute_r(phi, p, c);
        const double k = kalman_gain(p, c, r);

        REQUIRE_THAT(k, WithinRel(1.0 / ((1.0 + phi) * c), 1e-12));

        FramePrediction pred;
        pred.z_hat_prior = zh;
        pred.p_prior = p;
        pred.frame_size = std::max<std::int64_t>(1, std::llround(zh));
        const auto [post, rec] = correct(pred, rng.uniform01(), phi);
        REQUIRE_THAT(post.p_post, WithinRel(p * phi / (1.0 + phi), 1e-12));
    }
}

TEST_CASE("gain magnitude shrinks as phi grows", "[estimator]") {
    const double c = measurement_jacobian(5000.0);
    double prev = std::numeric_limits<double>::infinity();
    for (double phi : {0.1, 0.25, 1.0, 4.0, 10.0, 40.0}) {
        const double k = std::abs(kalman_gain(2.0, c, compute_r(phi, 2.0, c)));
        CHECK(k < prev);
        prev = k;
    }
}

TEST_CASE("correction example chain", "[estimator]") {
    FramePrediction pred;
    pred.k = 1;
    pred.z_hat_prior = 100.0;
    pred.p_prior = 1.0;
    pred.frame_size = 100;
    const double y = std::exp(-1.0) + 0.01;

    const auto [post, rec] = correct(pred, y, 0.25);
    CHECK_THAT(rec.innovation, WithinAbs(0.01, 1e-15));
    CHECK_THAT(rec.kalman_gain, WithinRel(-217.46254627672362, 1e-12));
    CHECK_THAT(post.z_hat_post, WithinRel(97.825374537232764, 1e-12));
    CHECK_THAT(post.p_post, WithinRel(0.2, 1e-13));
    CHECK(post.k == 1);
}

TEST_CASE("innovation is evaluated at the issued integer frame size",
          "[estimator]") {
    EstimatorState st;
    st.z_hat_post = 97.5;
    const FramePrediction pred = predict(st, TuningParams{});
    REQUIRE(pred.frame_size == 98);

    const auto [post, rec] = correct(pred, 0.5, 0.25);
    CHECK_THAT(rec.innovation, WithinRel(0.5 - std::exp(-97.5 / 98.0), 1e-14));
}

TEST_CASE("correction clamps the estimate at one tag", "[estimator]") {
    FramePrediction pred;
    pred.z_hat_prior = 2.0;
    pred.p_prior = 1.0;
    pred.frame_size = 2;
    const auto [post, rec] = correct(pred, 1.0, 0.25);
    CHECK(post.z_hat_post == 1.0);
    CHECK(post.p_post > 0.0);

    Xoshiro rng(99);
    for (int i = 0; i < 5000; ++i) {
        FramePrediction p;
        p.z_hat_prior = 1.0 + rng.uniform01() * 1e5;
        p.p_prior = 0.01 + rng.uniform01() * 10.0;
        p.frame_size = std::max<std::int64_t>(1, std::llround(p.z_hat_prior));
        const auto [s, r] =
            correct(p, rng.uniform01(), 0.05 + rng.uniform01() * 20.0);
        REQUIRE(s.z_hat_post >= 1.0);
        REQUIRE(s.p_post > 0.0);
    }
}

TEST_CASE("filter state stays well formed along a trajectory", "[estimator]") {
    TuningParams tp;
    EstimatorState st;
    st.z_hat_post = 500.0;
    st.p_post = 1.0;
    Xoshiro rng(123);
    for (int k = 1; k <= 200; ++k) {
        const FramePrediction pred = predict(st, tp);
        REQUIRE(pred.p_prior > st.p_post);
        const double phi = (k % 2) ? tp.phi_lo : tp.phi_hi;
        std::tie(st, std::ignore) = correct(pred, rng.uniform01(), phi);
        REQUIRE(st.z_hat_post >= 1.0);
        REQUIRE(st.p_post > 0.0);
        REQUIRE_THAT(st.p_post,
                     WithinRel(pred.p_prior * phi / (1.0 + phi), 1e-12));
    }
}
