#pragma once

// Two-sided CUSUM change detection on normalized innovations.
//
// In steady state the filter innovation, scaled by its predicted standard
// deviation, behaves like a standard normal. A population change shifts its
// mean, which the two one-sided cumulative sums pick up. A detection resets
// both sums and switches the filter to its aggressive gain regime for the
// frame that triggered it.

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "tagest/estimator.hpp"

namespace tagest {

struct CusumState {
    double g_plus = 0.0;   // >= 0 between detections
    double g_minus = 0.0;  // <= 0 between detections
};

struct CusumConfig {
    double theta = 4.0;    // detection threshold, > 0
    double upsilon = 0.5;  // drift guard subtracted from each excursion
};

// Threshold and drift for a normalized statistic with spread sigma_star.
// theta = 4*sigma_star, upsilon = 0.5*sigma_star (zero-mean statistic).
inline CusumConfig default_cusum_config(double sigma_star = 1.0) {
    return {4.0 * sigma_star, 0.5 * sigma_star};
}

// Innovation divided by its predicted standard deviation
// sqrt((P_prior + Q_prev) * C^2 + Var[u]). The radicand is positive for any
// valid filter state; a non-positive value signals corruption upstream.
inline double normalized_innovation(double innovation, double p_prior,
                                    double q_prev, double jacobian,
                                    double var_u) {
    const double radicand = (p_prior + q_prev) * jacobian * jacobian + var_u;
    if (!(radicand > 0.0))
        throw std::domain_error("normalized_innovation: non-positive variance");
    return innovation / std::sqrt(radicand);
}

struct CusumOutcome {
    CusumState state;   // post-update sums; zeroed when changed is true
    bool changed = false;
    int side = 0;       // +1 the positive sum fired, -1 the negative, 0 none
};

// One accumulate-and-test step. The updated sums are tested against the
// threshold; on detection both are reset so successive changes are detected
// from a clean slate.
inline CusumOutcome cusum_step(const CusumState& state, double phi_norm,
                               const CusumConfig& cfg) {
    CusumOutcome out;
    out.state.g_plus = std::max(0.0, state.g_plus + phi_norm - cfg.upsilon);
    out.state.g_minus = std::min(0.0, state.g_minus + phi_norm + cfg.upsilon);

    const double over_plus = out.state.g_plus - cfg.theta;
    const double over_minus = -out.state.g_minus - cfg.theta;
    if (over_plus > 0.0 || over_minus > 0.0) {
        out.changed = true;
        out.side = (over_plus >= over_minus) ? +1 : -1;
        out.state.g_plus = 0.0;
        out.state.g_minus = 0.0;
    }
    return out;
}

// Gain-regime schedule: phi_lo while the filter is warming up or when a
// change was flagged for this frame, phi_hi otherwise.
inline double phi_select(std::int64_t k, std::int64_t j_warmup, bool delta,
                         const TuningParams& params) {
    if (k <= j_warmup || delta) return params.phi_lo;
    return params.phi_hi;
}

}  // namespace tagest
