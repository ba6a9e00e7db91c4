#pragma once

// Scalar extended Kalman filter for RFID tag population estimation over
// framed slotted ALOHA.
//
// The reader observes the fraction of idle slots in each frame. For z tags
// answering in a frame of L slots the idle probability of one slot is
// (1 - 1/L)^z; the filter linearizes the exponential approximation
// exp(-z/L) around the prior estimate. Measurement noise is not fixed:
// the filter injects pseudo-noise R proportional to the prior variance,
// which makes the gain and the variance contraction closed-form.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>

namespace tagest {

inline constexpr double euler_e = 2.718281828459045235360287471353;

struct EstimatorState {
    std::int64_t k = 0;        // frame index of the last completed correction
    double z_hat_post = 1.0;   // posterior population estimate, >= 1
    double p_post = 1.0;       // posterior pseudo-covariance, > 0
};

struct FramePrediction {
    std::int64_t k = 0;          // frame this prediction was issued for
    double z_hat_prior = 1.0;    // prior estimate (population assumed static)
    double p_prior = 0.0;        // prior pseudo-covariance, > 0
    std::int64_t frame_size = 1; // slots broadcast for this frame, >= 1
};

struct TuningParams {
    double q = 0.1;              // per-frame process pseudo-noise
    double phi_lo = 0.25;        // aggressive gain regime (warmup, post-change)
    double phi_hi = 10.0;        // smoothing regime (steady state)
    std::int64_t j_warmup = 3;   // frames driven at phi_lo unconditionally
};

struct CorrectionRecord {
    double innovation = 0.0;     // y - predicted idle frequency
    double kalman_gain = 0.0;
    double jacobian = 0.0;       // dp/dz at the prior estimate
    double r_k = 0.0;            // injected measurement pseudo-noise
    double phi_used = 0.0;
};

// Idle probability of a single slot, exponential form used by the filter.
inline double idle_probability(double z, std::int64_t frame_size) {
    return std::exp(-z / static_cast<double>(frame_size));
}

// Exact occupancy form (1 - 1/L)^z. Reference for approximation-gap tests.
inline double idle_probability_exact(double z, std::int64_t frame_size) {
    if (z == 0.0) return 1.0;
    return std::exp(z * std::log1p(-1.0 / static_cast<double>(frame_size)));
}

// d/dz of exp(-z/L) evaluated at z = z_hat with L matched to z_hat, which
// collapses to -1/(e * z_hat). Strictly negative for finite estimates.
inline double measurement_jacobian(double z_hat_prior) {
    return -1.0 / (euler_e * z_hat_prior);
}

// Per-slot variance profile of the idle frequency at load factor rho = z/L.
// Variance of the measured frequency is this value divided by L.
inline double idle_variance_coeff(double rho) {
    return std::exp(-rho) - (1.0 + rho) * std::exp(-2.0 * rho);
}

// Variance of the idle-frequency measurement for z tags in L slots.
inline double measurement_noise_variance(double z, std::int64_t frame_size) {
    const double l = static_cast<double>(frame_size);
    return idle_variance_coeff(z / l) / l;
}

struct VarianceProfilePeak {
    double rho_star = 0.0;
    double lambda_star = 0.0;
};

// Maximizer of the variance profile. The derivative root satisfies
// 2*rho + 1 = exp(rho) on (1, 2); bisection to |interval| < 1e-10.
inline VarianceProfilePeak lambda_max() {
    double lo = 1.0, hi = 2.0;
    while (hi - lo > 1e-10) {
        const double mid = 0.5 * (lo + hi);
        const double g = 2.0 * mid + 1.0 - std::exp(mid);
        if (g > 0.0) lo = mid; else hi = mid;
    }
    const double rho = 0.5 * (lo + hi);
    return {rho, idle_variance_coeff(rho)};
}

// Injected measurement pseudo-noise R = phi * P * C^2.
inline double compute_r(double phi, double p_prior, double jacobian) {
    return phi * p_prior * jacobian * jacobian;
}

inline double kalman_gain(double p_prior, double jacobian, double r) {
    return p_prior * jacobian / (p_prior * jacobian * jacobian + r);
}

// Time update. The population model is static between corrections, so the
// estimate carries over and only the pseudo-covariance grows. The next
// frame size is the prior estimate rounded half away from zero, floored
// at one slot.
inline FramePrediction predict(const EstimatorState& state,
                               const TuningParams& params) {
    FramePrediction pred;
    pred.k = state.k + 1;
    pred.z_hat_prior = state.z_hat_post;
    pred.p_prior = state.p_post + params.q;
    pred.frame_size = std::max<std::int64_t>(1, std::llround(pred.z_hat_prior));
    return pred;
}

// Measurement update against the observed idle frequency y in [0, 1].
// The predicted measurement is evaluated at the issued integer frame size.
// With R = phi*P*C^2 the gain is 1/((1+phi)*C) and the covariance contracts
// by exactly phi/(1+phi); the estimate is floored at one tag.
inline std::pair<EstimatorState, CorrectionRecord>
correct(const FramePrediction& pred, double y, double phi) {
    const double v = y - idle_probability(pred.z_hat_prior, pred.frame_size);
    const double c = measurement_jacobian(pred.z_hat_prior);
    const double r = compute_r(phi, pred.p_prior, c);
    const double gain = kalman_gain(pred.p_prior, c, r);

    EstimatorState next;
    next.k = pred.k;
    next.z_hat_post = std::max(1.0, pred.z_hat_prior + gain * v);
    next.p_post = pred.p_prior * (1.0 - gain * c);
    return {next, CorrectionRecord{v, gain, c, r, phi}};
}

}  // namespace tagest
