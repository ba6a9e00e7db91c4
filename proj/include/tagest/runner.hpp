#pragma once

// Closed-loop experiment runner and trace emission.
//
// One loop serves both modes: predict, issue the frame, simulate, measure,
// run the change test, pick the gain regime, correct, record, then evolve
// the ground truth. Static mode is the degenerate case of an empty
// schedule; given the same master seed it produces byte-identical traces
// to dynamic mode with no events. The change test also covers startup:
// a large initial error looks like a change and keeps the filter in its
// aggressive regime until the transient dies out.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tagest/analysis.hpp"
#include "tagest/config.hpp"
#include "tagest/cusum.hpp"
#include "tagest/estimator.hpp"
#include "tagest/rng.hpp"
#include "tagest/sim.hpp"

namespace tagest {

struct TraceRow {
    std::int64_t k = 0;
    std::int64_t z_true = 0;
    double z_hat_prior = 0.0;
    double z_hat_post = 0.0;
    std::int64_t frame_size = 0;
    std::int64_t idle_count = 0;
    double y = 0.0;
    double v = 0.0;
    double kalman_gain = 0.0;
    double jacobian = 0.0;
    double r_k = 0.0;
    double phi = 0.0;
    double p_prior = 0.0;
    double p_post = 0.0;
    double phi_norm = 0.0;  // 0 during warmup frames (test not executed)
    double g_plus = 0.0;    // post-update sums; zeroed on a detection row
    double g_minus = 0.0;
    int delta = 0;
    double rel_err = 0.0;   // NaN sentinel when z_true is 0
    ErrorRegion region = ErrorRegion::r3;
    double duration_ms = 0.0;
    int cusum_side = 0;     // internal: which sum fired; not serialized
};

using Trace = std::vector<TraceRow>;

struct Detection {
    std::int64_t frame = 0;
    int direction = 0;  // +1 population increased, -1 decreased
};

struct EventDelay {
    std::int64_t event_frame = 0;
    std::int64_t delay = -1;  // frames from event to detection; -1 if missed
};

struct RunSummary {
    std::int64_t seed_index = 0;
    std::int64_t convergence_frame = -1;  // -1: never reached the threshold
    double steady_error_mean =
        std::numeric_limits<double>::quiet_NaN();  // NaN when not converged
    std::vector<Detection> detections;
    std::int64_t false_alarms = 0;
    std::vector<EventDelay> detection_delays;
    double total_time_ms = 0.0;
};

struct RunOutput {
    Trace trace;
    RunSummary summary;
};

// Post-run statistics. Convergence is the first frame whose prior relative
// error drops below the threshold; the steady error averages from there on.
// A detection counts as a false alarm when no schedule event was active
// within the alarm window before it. Delays are reported for steps and
// ramps (walks have no single onset to measure from).
inline RunSummary summarize(const Trace& trace, const ExperimentConfig& cfg) {
    RunSummary s;
    for (const TraceRow& row : trace) {
        s.total_time_ms += row.duration_ms;
        if (s.convergence_frame < 0 && row.rel_err < cfg.convergence_threshold)
            s.convergence_frame = row.k;
        if (row.delta)
            s.detections.push_back({row.k, row.cusum_side == -1 ? +1 : -1});
    }

    if (s.convergence_frame >= 0) {
        double sum = 0.0;
        std::int64_t n = 0;
        for (const TraceRow& row : trace) {
            if (row.k < s.convergence_frame || std::isnan(row.rel_err)) continue;
            sum += row.rel_err;
            ++n;
        }
        if (n > 0) s.steady_error_mean = sum / static_cast<double>(n);
    }

    const std::int64_t w = cfg.alarm_window;
    for (const Detection& d : s.detections) {
        bool attributed = false;
        for (const ScheduleEvent& ev : cfg.schedule.events)
            if (d.frame >= ev.frame && d.frame <= ev.end_frame + w) {
                attributed = true;
                break;
            }
        if (!attributed) ++s.false_alarms;
    }

    for (const ScheduleEvent& ev : cfg.schedule.events) {
        if (ev.kind == EventKind::random_walk) continue;
        EventDelay ed;
        ed.event_frame = ev.frame;
        for (const Detection& d : s.detections)
            if (d.frame >= ev.frame && d.frame <= ev.frame + w) {
                ed.delay = d.frame - ev.frame;
                break;
            }
        s.detection_delays.push_back(ed);
    }
    return s;
}

// One full closed-loop run for one seed. Deterministic given
// (config, master_seed, seed_index); every frame draws from its own child
// generator, the schedule from a separate stream.
inline RunOutput run_one(const ExperimentConfig& cfg, std::int64_t seed_index) {
    const std::uint64_t run_seed = derive_seed(
        cfg.master_seed, stream_run, static_cast<std::uint64_t>(seed_index));
    Xoshiro sched_rng(derive_seed(run_seed, stream_schedule, 0));

    EstimatorState st;
    st.k = 0;
    st.z_hat_post = cfg.resolved_z_hat0();
    st.p_post = cfg.p00;

    CusumState cs;
    ScheduleState sched_state(cfg.schedule);
    std::int64_t z_true = cfg.z0;
    const double q_prev = cfg.filter.q;  // process noise is constant per frame
    const bool region_static = cfg.schedule.events.empty();

    Trace trace;
    trace.reserve(static_cast<std::size_t>(cfg.k_max));

    for (std::int64_t k = 1; k <= cfg.k_max; ++k) {
        const FramePrediction pred = predict(st, cfg.filter);

        const std::uint64_t frame_seed =
            derive_seed(run_seed, stream_frame, static_cast<std::uint64_t>(k));
        const FrameResult frame =
            cfg.backend == SimBackend::exact
                ? run_frame(z_true, pred.frame_size, frame_seed)
                : run_frame_gaussian(z_true, pred.frame_size, frame_seed);

        const double y = frame.idle_frequency;
        const double v =
            y - idle_probability(pred.z_hat_prior, pred.frame_size);

        // Change test after warmup; a detection already lowers phi for the
        // correction of this same frame.
        double phi_norm = 0.0;
        bool delta = false;
        int side = 0;
        if (k > cfg.filter.j_warmup) {
            const double var_u =
                measurement_noise_variance(pred.z_hat_prior, pred.frame_size);
            phi_norm = normalized_innovation(
                v, pred.p_prior, q_prev, measurement_jacobian(pred.z_hat_prior),
                var_u);
            const CusumOutcome out = cusum_step(cs, phi_norm, cfg.cusum);
            cs = out.state;
            delta = out.changed;
            side = out.side;
        }
        const double phi = phi_select(k, cfg.filter.j_warmup, delta, cfg.filter);

        const auto [post, rec] = correct(pred, y, phi);

        const double e_abs =
            std::abs(static_cast<double>(z_true) - pred.z_hat_prior);
        const RegionReport region =
            region_static
                ? classify_region_static(e_abs, pred.z_hat_prior, phi,
                                         cfg.diagnostics)
                : classify_region_dynamic(e_abs, pred.z_hat_prior, phi,
                                          cfg.diagnostics);

        TraceRow row;
        row.k = k;
        row.z_true = z_true;
        row.z_hat_prior = pred.z_hat_prior;
        row.z_hat_post = post.z_hat_post;
        row.frame_size = pred.frame_size;
        row.idle_count = frame.idle_count;
        row.y = y;
        row.v = rec.innovation;
        row.kalman_gain = rec.kalman_gain;
        row.jacobian = rec.jacobian;
        row.r_k = rec.r_k;
        row.phi = rec.phi_used;
        row.p_prior = pred.p_prior;
        row.p_post = post.p_post;
        row.phi_norm = phi_norm;
        row.g_plus = cs.g_plus;
        row.g_minus = cs.g_minus;
        row.delta = delta ? 1 : 0;
        row.rel_err = relative_error(z_true, pred.z_hat_prior);
        row.region = region.region;
        row.duration_ms = frame.duration_ms;
        row.cusum_side = side;
        trace.push_back(row);

        st = post;
        z_true = evolve_population(cfg.schedule, sched_state, k, z_true,
                                   post.z_hat_post, sched_rng)
                     .z_next;
    }

    RunOutput out;
    out.summary = summarize(trace, cfg);
    out.summary.seed_index = seed_index;
    out.trace = std::move(trace);
    return out;
}

inline RunOutput run_static(const ExperimentConfig& cfg,
                            std::int64_t seed_index = 0) {
    if (cfg.mode != RunMode::static_population)
        throw ConfigError("run_static needs mode=static");
    return run_one(cfg, seed_index);
}

inline RunOutput run_dynamic(const ExperimentConfig& cfg,
                             std::int64_t seed_index = 0) {
    if (cfg.mode != RunMode::dynamic_population)
        throw ConfigError("run_dynamic needs mode=dynamic");
    return run_one(cfg, seed_index);
}

// All seeds, in order. Seeds are independent work units; order does not
// affect any result because every run derives its own generator tree.
inline std::vector<RunOutput> run_all(const ExperimentConfig& cfg) {
    std::vector<RunOutput> runs;
    runs.reserve(static_cast<std::size_t>(cfg.seeds));
    for (std::int64_t i = 0; i < cfg.seeds; ++i)
        runs.push_back(run_one(cfg, i));
    return runs;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline constexpr const char* trace_csv_header =
    "k,z_true,z_hat_prior,z_hat_post,L,N_idle,y,v,K,C,R,phi,P_prior,P_post,"
    "Phi,g_plus,g_minus,delta,rel_err,region,duration_ms";

// 17 significant digits: doubles round-trip exactly, so a stored trace can
// be compared or replayed without drift.
inline std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline void write_trace_csv(std::ostream& os, const Trace& trace) {
    os << trace_csv_header << '\n';
    for (const TraceRow& r : trace) {
        os << r.k << ',' << r.z_true << ',' << format_double(r.z_hat_prior)
           << ',' << format_double(r.z_hat_post) << ',' << r.frame_size << ','
           << r.idle_count << ',' << format_double(r.y) << ','
           << format_double(r.v) << ',' << format_double(r.kalman_gain) << ','
           << format_double(r.jacobian) << ',' << format_double(r.r_k) << ','
           << format_double(r.phi) << ',' << format_double(r.p_prior) << ','
           << format_double(r.p_post) << ',' << format_double(r.phi_norm)
           << ',' << format_double(r.g_plus) << ','
           << format_double(r.g_minus) << ',' << r.delta << ','
           << format_double(r.rel_err) << ',' << region_name(r.region) << ','
           << format_double(r.duration_ms) << '\n';
    }
}

// Same fields and order as the CSV columns, one JSON object per line.
// NaN has no JSON spelling; the sentinel becomes null.
inline void write_trace_jsonl(std::ostream& os, const Trace& trace) {
    const auto num = [](double x) {
        return std::isnan(x) ? std::string("null") : format_double(x);
    };
    for (const TraceRow& r : trace) {
        os << "{\"k\":" << r.k << ",\"z_true\":" << r.z_true
           << ",\"z_hat_prior\":" << num(r.z_hat_prior)
           << ",\"z_hat_post\":" << num(r.z_hat_post)
           << ",\"L\":" << r.frame_size << ",\"N_idle\":" << r.idle_count
           << ",\"y\":" << num(r.y) << ",\"v\":" << num(r.v)
           << ",\"K\":" << num(r.kalman_gain) << ",\"C\":" << num(r.jacobian)
           << ",\"R\":" << num(r.r_k) << ",\"phi\":" << num(r.phi)
           << ",\"P_prior\":" << num(r.p_prior)
           << ",\"P_post\":" << num(r.p_post) << ",\"Phi\":" << num(r.phi_norm)
           << ",\"g_plus\":" << num(r.g_plus)
           << ",\"g_minus\":" << num(r.g_minus) << ",\"delta\":" << r.delta
           << ",\"rel_err\":" << num(r.rel_err) << ",\"region\":\""
           << region_name(r.region) << "\",\"duration_ms\":"
           << num(r.duration_ms) << "}\n";
    }
}

namespace detail {

inline std::string join_detections(const std::vector<Detection>& ds) {
    std::string out;
    for (const Detection& d : ds) {
        if (!out.empty()) out += ';';
        out += std::to_string(d.frame);
        out += d.direction > 0 ? ":+1" : ":-1";
    }
    return out;
}

inline std::string join_delays(const std::vector<EventDelay>& ds) {
    std::string out;
    for (const EventDelay& d : ds) {
        if (!out.empty()) out += ';';
        out += std::to_string(d.event_frame);
        out += ':';
        out += std::to_string(d.delay);
    }
    return out;
}

}  // namespace detail

inline void write_summary_csv(std::ostream& os,
                              const std::vector<RunSummary>& summaries) {
    os << "seed,convergence_frame,steady_error_mean,false_alarms,detections,"
          "detection_delays,total_time_ms\n";
    for (const RunSummary& s : summaries) {
        os << s.seed_index << ',' << s.convergence_frame << ','
           << format_double(s.steady_error_mean) << ',' << s.false_alarms
           << ',' << detail::join_detections(s.detections) << ','
           << detail::join_delays(s.detection_delays) << ','
           << format_double(s.total_time_ms) << '\n';
    }
}

inline void write_summary_jsonl(std::ostream& os,
                                const std::vector<RunSummary>& summaries) {
    for (const RunSummary& s : summaries) {
        os << "{\"seed\":" << s.seed_index
           << ",\"convergence_frame\":" << s.convergence_frame
           << ",\"steady_error_mean\":"
           << (std::isnan(s.steady_error_mean)
                   ? std::string("null")
                   : format_double(s.steady_error_mean))
           << ",\"false_alarms\":" << s.false_alarms << ",\"detections\":[";
        for (std::size_t i = 0; i < s.detections.size(); ++i) {
            if (i) os << ',';
            os << "{\"frame\":" << s.detections[i].frame
               << ",\"direction\":" << s.detections[i].direction << '}';
        }
        os << "],\"detection_delays\":[";
        for (std::size_t i = 0; i < s.detection_delays.size(); ++i) {
            if (i) os << ',';
            os << "{\"event_frame\":" << s.detection_delays[i].event_frame
               << ",\"delay\":" << s.detection_delays[i].delay << '}';
        }
        os << "],\"total_time_ms\":" << format_double(s.total_time_ms)
           << "}\n";
    }
}

// Writes one trace file per seed plus one summary file into out_dir,
// creating it if needed. Files are written in binary mode so the bytes are
// identical across platforms and reruns.
inline void emit(const std::string& out_dir,
                 const std::vector<RunOutput>& runs, TraceFormat format) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec)
        throw std::runtime_error("cannot create output directory: " + out_dir);

    const char* ext = format == TraceFormat::csv ? "csv" : "jsonl";
    for (const RunOutput& run : runs) {
        char name[48];
        std::snprintf(name, sizeof name, "trace_seed%03lld.%s",
                      static_cast<long long>(run.summary.seed_index), ext);
        const fs::path path = fs::path(out_dir) / name;
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw std::runtime_error("cannot open for writing: " +
                                     path.string());
        if (format == TraceFormat::csv)
            write_trace_csv(out, run.trace);
        else
            write_trace_jsonl(out, run.trace);
        out.flush();
        if (!out)
            throw std::runtime_error("write failed: " + path.string());
    }

    std::vector<RunSummary> summaries;
    summaries.reserve(runs.size());
    for (const RunOutput& run : runs) summaries.push_back(run.summary);
    const fs::path spath =
        fs::path(out_dir) / (std::string("summary.") + ext);
    std::ofstream sout(spath, std::ios::binary);
    if (!sout)
        throw std::runtime_error("cannot open for writing: " + spath.string());
    if (format == TraceFormat::csv)
        write_summary_csv(sout, summaries);
    else
        write_summary_jsonl(sout, summaries);
    sout.flush();
    if (!sout) throw std::runtime_error("write failed: " + spath.string());
}

}  // namespace tagest
