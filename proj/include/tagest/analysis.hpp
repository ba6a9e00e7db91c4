#pragma once

// Stability diagnostics for the population filter.
//
// The estimation error admits a three-region drift analysis: far out the
// correction pulls the error inward, in a middle band it contracts
// geometrically, and near zero measurement noise dominates. The thresholds
// scale with sqrt(estimate / phi); tracking a moving population doubles
// them. These helpers classify per-frame errors, compute the drift and
// noise envelopes, and bound the pseudo-covariance trajectory.

#include <cmath>
#include <cstdint>
#include <limits>

namespace tagest {

struct StabilityParams {
    double varsigma = 0.5;  // linearization slack in (0, 1)
    double m_const = 2.0;   // region-2 spread constant, > 1
    double epsilon0 = 0.0;  // optional initial-error bound, 0 when unused
};

enum class ErrorRegion { r1, r2, r3 };

inline const char* region_name(ErrorRegion r) {
    switch (r) {
        case ErrorRegion::r1: return "R1";
        case ErrorRegion::r2: return "R2";
        default: return "R3";
    }
}

struct RegionReport {
    ErrorRegion region = ErrorRegion::r3;
    double t_lo = 0.0;        // region-3 / region-2 boundary
    double t_hi = 0.0;        // region-2 / region-1 boundary
    double error_abs = 0.0;
    double error_rel = 0.0;   // error_abs / prior estimate
    bool out_of_envelope = false;  // error beyond the linearization envelope
};

// Gain-regime floor that keeps the linearized correction a contraction:
// phi >= 1 / (4 * (1 + varsigma)). Boundary inclusive.
inline bool check_phi_condition(double phi, double varsigma) {
    return phi >= 1.0 / (4.0 * (1.0 + varsigma));
}

// Linearization envelope: errors up to varsigma/(1+2*varsigma) of the prior
// estimate keep the exponential measurement within the analyzed slack.
inline double epsilon_k(double varsigma, double z_hat_prior) {
    return varsigma / (1.0 + 2.0 * varsigma) * z_hat_prior;
}

namespace detail {

// Shared radical so the static and dynamic thresholds and the dynamic
// envelope agree bit-for-bit wherever the formulas coincide.
inline double region_radical(double scale, double z_hat_prior, double phi,
                             double varsigma) {
    return std::sqrt(scale * z_hat_prior / (phi * (1.0 - varsigma)));
}

inline RegionReport classify(double error_abs, double z_hat_prior, double phi,
                             const StabilityParams& sp, double scale) {
    RegionReport rep;
    rep.t_lo = region_radical(scale, z_hat_prior, phi, sp.varsigma);
    rep.t_hi = region_radical(scale * sp.m_const / (sp.m_const - 1.0),
                              z_hat_prior, phi, sp.varsigma);
    rep.error_abs = error_abs;
    rep.error_rel = error_abs / z_hat_prior;
    if (error_abs >= rep.t_hi)
        rep.region = ErrorRegion::r1;
    else if (error_abs >= rep.t_lo)
        rep.region = ErrorRegion::r2;
    else
        rep.region = ErrorRegion::r3;
    rep.out_of_envelope = error_abs > epsilon_k(sp.varsigma, z_hat_prior);
    return rep;
}

}  // namespace detail

// Region classification for a static population.
inline RegionReport classify_region_static(double error_abs,
                                           double z_hat_prior, double phi,
                                           const StabilityParams& sp) {
    return detail::classify(error_abs, z_hat_prior, phi, sp, 1.0);
}

// Region classification while tracking a moving population. Same shape with
// both thresholds doubled (scale factor 4 under the radical).
inline RegionReport classify_region_dynamic(double error_abs,
                                            double z_hat_prior, double phi,
                                            const StabilityParams& sp) {
    return detail::classify(error_abs, z_hat_prior, phi, sp, 4.0);
}

struct DynamicBounds {
    double lambda_k = 0.0;   // admissible mean per-frame population drift
    double sigma_k = 0.0;    // admissible mean-square per-frame change
    double eps_tilde = 0.0;  // tracking error envelope
};

// Envelope a moving population must respect for the filter to keep tracking:
// mean drift up to lambda_k, mean-square change up to sigma_k, with errors
// confined to eps_tilde. eps_tilde equals the dynamic region-1 threshold by
// construction.
inline DynamicBounds dynamic_bounds(double z_hat_prior, double phi,
                                    const StabilityParams& sp) {
    DynamicBounds b;
    b.eps_tilde = detail::region_radical(4.0 * sp.m_const / (sp.m_const - 1.0),
                                         z_hat_prior, phi, sp.varsigma);
    b.sigma_k = z_hat_prior / ((1.0 + phi) * (1.0 + phi));
    b.lambda_k = phi * (1.0 - sp.varsigma) * b.eps_tilde /
                 (3.0 * (1.0 + phi) *
                  (2.0 * phi + sp.varsigma / (1.0 + 3.0 * sp.varsigma)));
    return b;
}

struct PseudoCovBounds {
    double p_lo = 0.0;
    double p_hi = 0.0;
};

// Deterministic envelope of the prior pseudo-covariance at frame k >= 1:
// the initial mass decays geometrically at the smoothing-regime rate while
// the injected process noise accumulates to its fixed point.
inline PseudoCovBounds pseudo_cov_bounds(double p00, double q0, double q_bar,
                                         double phi_bar, double q_prev,
                                         std::int64_t k) {
    PseudoCovBounds b;
    b.p_lo = q_prev;
    b.p_hi = (p00 + q0) *
                 std::pow(1.0 - 1.0 / (1.0 + phi_bar),
                          static_cast<double>(k - 1)) +
             q_bar * phi_bar + q_prev;
    return b;
}

// |z - z_hat| / z against the prior estimate. A zero true population has no
// relative error; the quiet-NaN sentinel marks those frames in traces.
inline double relative_error(std::int64_t z_true, double z_hat_prior) {
    if (z_true == 0) return std::numeric_limits<double>::quiet_NaN();
    const double z = static_cast<double>(z_true);
    return std::abs(z - z_hat_prior) / z;
}

}  // namespace tagest
