// Minimal library walkthrough: estimate a static population of 10000 tags
// from a 50% under-estimate and print the per-frame trace to stdout.

#include <cstdio>

#include "tagest/tagest.hpp"

int main() {
    tagest::ExperimentConfig cfg;
    cfg.mode = tagest::RunMode::static_population;
    cfg.z0 = 10000;
    cfg.z_hat0 = 5000.0;
    cfg.k_max = 10;
    cfg.seeds = 1;
    cfg.master_seed = 7;
    tagest::validate_config(cfg);

    const tagest::RunOutput out = tagest::run_static(cfg, 0);
    std::printf("%4s %8s %12s %12s %8s %8s\n", "k", "z_true", "z_hat_prior",
                "z_hat_post", "rel_err", "delta");
    for (const tagest::TraceRow& row : out.trace)
        std::printf("%4lld %8lld %12.1f %12.1f %8.4f %8d\n",
                    static_cast<long long>(row.k),
                    static_cast<long long>(row.z_true), row.z_hat_prior,
                    row.z_hat_post, row.rel_err, row.delta);
    std::printf("converged at frame %lld, airtime %.0f ms\n",
                static_cast<long long>(out.summary.convergence_frame),
                out.summary.total_time_ms);
    return 0;
}
