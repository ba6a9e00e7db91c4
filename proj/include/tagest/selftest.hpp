#pragma once

// Fast invariant checks behind the CLI selftest subcommand. Each check is
// independent and prints one line; the return value is the failure count.
// Runtime stays under a couple of seconds so the selftest is usable as a
// smoke test on target hardware.

#include <cmath>
#include <cstdint>
#include <ostream>
#include <sstream>
#include <string>

#include "tagest/analysis.hpp"
#include "tagest/config.hpp"
#include "tagest/cusum.hpp"
#include "tagest/estimator.hpp"
#include "tagest/rng.hpp"
#include "tagest/runner.hpp"

namespace tagest {

namespace detail {

inline bool st_check(std::ostream& os, const char* name, bool ok,
                     const std::string& detail_msg = "") {
    os << (ok ? "ok   " : "FAIL ") << name;
    if (!ok && !detail_msg.empty()) os << ": " << detail_msg;
    os << '\n';
    return ok;
}

}  // namespace detail

inline int run_selftest(std::ostream& os) {
    int failures = 0;
    const auto check = [&](const char* name, bool ok,
                           const std::string& msg = "") {
        if (!detail::st_check(os, name, ok, msg)) ++failures;
    };

    // Gain and contraction closed forms over random states.
    {
        Xoshiro rng(0x7357u);
        bool ok = true;
        for (int i = 0; i < 10000 && ok; ++i) {
            const double p = std::exp(rng.uniform01() * 13.8 - 6.9);
            const double phi = std::exp(rng.uniform01() * 9.2 - 4.6);
            const double zh = std::exp(rng.uniform01() * 20.7);
            const double c = measurement_jacobian(zh);
            const double r = compute_r(phi, p, c);
            const double k = kalman_gain(p, c, r);
            const double k_closed = 1.0 / ((1.0 + phi) * c);
            const double contraction = p * (1.0 - k * c);
            const double contraction_closed = p * phi / (1.0 + phi);
            ok = std::abs(k - k_closed) <= 1e-12 * std::abs(k_closed) &&
                 std::abs(contraction - contraction_closed) <=
                     1e-12 * contraction_closed;
        }
        check("gain and variance contraction closed forms", ok);
    }

    // Variance profile peak and its bound.
    {
        const VarianceProfilePeak peak = lambda_max();
        bool ok = peak.rho_star > 1.0 && peak.rho_star < 2.0 &&
                  std::abs(2.0 * peak.rho_star + 1.0 - std::exp(peak.rho_star)) <
                      1e-9 &&
                  peak.lambda_star < std::exp(-2.0);
        for (int i = 1; i <= 1000 && ok; ++i)
            ok = idle_variance_coeff(0.01 * i) <= peak.lambda_star + 1e-15;
        check("variance profile peak bounds the grid", ok);
    }

    // Detector sign confinement and reset on detection.
    {
        Xoshiro rng(0xC0DEu);
        CusumState cs;
        const CusumConfig cfg = default_cusum_config();
        bool ok = true;
        for (int i = 0; i < 20000 && ok; ++i) {
            const CusumOutcome out = cusum_step(cs, rng.normal(), cfg);
            ok = out.state.g_plus >= 0.0 && out.state.g_minus <= 0.0;
            if (out.changed)
                ok = ok && out.state.g_plus == 0.0 && out.state.g_minus == 0.0;
            cs = out.state;
        }
        check("detector sums stay sign-confined and reset on detection", ok);
    }

    // Reruns are byte-identical; empty-schedule dynamic equals static.
    {
        ExperimentConfig cfg;
        cfg.mode = RunMode::static_population;
        cfg.z0 = 1000;
        cfg.z_hat0 = 500.0;
        cfg.k_max = 30;
        cfg.seeds = 1;
        cfg.master_seed = 99;
        validate_config(cfg);

        std::ostringstream a, b;
        write_trace_csv(a, run_static(cfg, 0).trace);
        write_trace_csv(b, run_static(cfg, 0).trace);

        ExperimentConfig dyn = cfg;
        dyn.mode = RunMode::dynamic_population;
        std::ostringstream c;
        write_trace_csv(c, run_dynamic(dyn, 0).trace);

        check("rerun reproduces the trace byte for byte", a.str() == b.str());
        check("empty-schedule dynamic run equals static run",
              a.str() == c.str());

        // Warmup frames must run in the aggressive regime.
        bool warm = true;
        const RunOutput out = run_static(cfg, 0);
        for (const TraceRow& row : out.trace)
            if (row.k <= cfg.filter.j_warmup && row.phi != cfg.filter.phi_lo)
                warm = false;
        check("warmup frames use phi_lo", warm);
    }

    // Frame sizes follow the rounded prior and never drop below one slot.
    {
        EstimatorState st;
        st.z_hat_post = 97.5;
        st.p_post = 0.2;
        const FramePrediction pred = predict(st, TuningParams{});
        EstimatorState tiny;
        tiny.z_hat_post = 1.0;
        const FramePrediction pred_tiny = predict(tiny, TuningParams{});
        check("frame size rounds half away from zero with a floor of one",
              pred.frame_size == 98 && pred_tiny.frame_size == 1);
    }

    return failures;
}

}  // namespace tagest
