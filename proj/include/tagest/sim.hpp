#pragma once

// Slot-level framed ALOHA simulator and ground-truth population schedule.
//
// The exact backend drops each tag into a uniformly random slot and counts
// the slots left idle, which is the exact occupancy distribution. The
// gaussian backend replaces the idle count with a normal draw matched to
// the exact mean and variance; it exists for large-population sweeps and
// falls back to the exact path when either dimension is small.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "tagest/rng.hpp"

namespace tagest {

inline constexpr double slot_duration_ms = 0.4;

inline double frame_duration_ms(std::int64_t frame_size) {
    return slot_duration_ms * static_cast<double>(frame_size);
}

struct FrameResult {
    std::int64_t frame_size = 0;
    std::int64_t idle_count = 0;      // slots no tag answered in
    std::int64_t occupied_count = 0;  // slots with at least one answer
    double idle_frequency = 0.0;      // idle_count / frame_size
    double duration_ms = 0.0;
    std::uint64_t frame_seed = 0;     // seed the frame was generated from
};

// Exact backend: z_true independent uniform slot choices over frame_size
// slots. idle_count + occupied_count == frame_size always.
inline FrameResult run_frame(std::int64_t z_true, std::int64_t frame_size,
                             Xoshiro& rng) {
    std::vector<std::uint8_t> hit(static_cast<std::size_t>(frame_size), 0);
    std::int64_t occupied = 0;
    const auto bound = static_cast<std::uint64_t>(frame_size);
    for (std::int64_t t = 0; t < z_true; ++t) {
        const auto s = rng.uniform_below(bound);
        occupied += (hit[s] == 0);
        hit[s] = 1;
    }
    FrameResult res;
    res.frame_size = frame_size;
    res.occupied_count = occupied;
    res.idle_count = frame_size - occupied;
    res.idle_frequency =
        static_cast<double>(res.idle_count) / static_cast<double>(frame_size);
    res.duration_ms = frame_duration_ms(frame_size);
    return res;
}

inline FrameResult run_frame(std::int64_t z_true, std::int64_t frame_size,
                             std::uint64_t frame_seed) {
    Xoshiro rng(frame_seed);
    FrameResult res = run_frame(z_true, frame_size, rng);
    res.frame_seed = frame_seed;
    return res;
}

// Exact first and second moments of the idle count for z tags in L slots.
struct IdleCountMoments {
    double mean = 0.0;
    double variance = 0.0;
};

inline IdleCountMoments idle_count_moments(std::int64_t z_true,
                                           std::int64_t frame_size) {
    const double l = static_cast<double>(frame_size);
    const double z = static_cast<double>(z_true);
    // (1 - a/L)^z via log1p to stay accurate for large L.
    const auto pw = [&](double a) {
        if (z == 0.0) return 1.0;
        if (a >= l) return 0.0;
        return std::exp(z * std::log1p(-a / l));
    };
    const double p1 = pw(1.0);
    const double p2 = pw(2.0);
    IdleCountMoments m;
    m.mean = l * p1;
    m.variance = l * (l - 1.0) * p2 + l * p1 - l * l * p1 * p1;
    return m;
}

// Gaussian backend: the idle count is a rounded normal draw with the exact
// moments, clamped to [0, frame_size]. Requires both z_true and frame_size
// at or above 100; below that the exact backend runs instead.
inline FrameResult run_frame_gaussian(std::int64_t z_true,
                                      std::int64_t frame_size, Xoshiro& rng) {
    if (z_true < 100 || frame_size < 100)
        return run_frame(z_true, frame_size, rng);
    const IdleCountMoments m = idle_count_moments(z_true, frame_size);
    const double draw = rng.normal(m.mean, std::sqrt(std::max(0.0, m.variance)));
    const std::int64_t idle =
        std::clamp<std::int64_t>(std::llround(draw), 0, frame_size);
    FrameResult res;
    res.frame_size = frame_size;
    res.idle_count = idle;
    res.occupied_count = frame_size - idle;
    res.idle_frequency =
        static_cast<double>(idle) / static_cast<double>(frame_size);
    res.duration_ms = frame_duration_ms(frame_size);
    return res;
}

inline FrameResult run_frame_gaussian(std::int64_t z_true,
                                      std::int64_t frame_size,
                                      std::uint64_t frame_seed) {
    Xoshiro rng(frame_seed);
    FrameResult res = run_frame_gaussian(z_true, frame_size, rng);
    res.frame_seed = frame_seed;
    return res;
}

// ---------------------------------------------------------------------------
// Ground-truth population schedule
// ---------------------------------------------------------------------------

enum class EventKind { step, ramp, random_walk };

// How an event magnitude is resolved when the event first becomes active:
//   absolute          the coefficient itself
//   sqrt_base         coefficient * sqrt(true population at that frame)
//   fraction_of_base  coefficient * true population at that frame
enum class MagnitudeUnit { absolute, sqrt_base, fraction_of_base };

struct ScheduleEvent {
    EventKind kind = EventKind::step;
    std::int64_t frame = 1;      // first frame the event acts on, >= 1
    std::int64_t end_frame = 1;  // inclusive; equals frame for steps
    double magnitude = 0.0;      // step/ramp: signed total; walk: per-frame sigma
    MagnitudeUnit unit = MagnitudeUnit::absolute;
};

struct PopulationSchedule {
    std::int64_t initial = 0;  // z at frame 1, >= 0
    std::vector<ScheduleEvent> events;
};

// Per-run schedule bookkeeping: magnitudes resolved on first activation and
// the ramp total already applied, so ramp rounding never loses a tag.
struct ScheduleState {
    std::vector<double> resolved;
    std::vector<std::int64_t> emitted;

    explicit ScheduleState(const PopulationSchedule& sched)
        : resolved(sched.events.size(),
                   std::numeric_limits<double>::quiet_NaN()),
          emitted(sched.events.size(), 0) {}
};

struct PopulationChange {
    std::int64_t delta = 0;   // applied change, after the floor at zero
    std::int64_t z_next = 0;  // population entering the next frame
};

// Applies every event active at frame k to the population that held during
// frame k. Steps land in full on their frame; ramps spread their resolved
// total over the span with cumulative rounding; walks add one rounded
// normal draw per active frame. The result never goes below zero; when the
// floor binds, delta is the truncated change actually applied. The running
// estimate is accepted for signature parity but plays no role: ground truth
// must not depend on filter state.
inline PopulationChange evolve_population(const PopulationSchedule& sched,
                                          ScheduleState& state,
                                          std::int64_t k, std::int64_t z_current,
                                          double /*z_hat_context*/,
                                          Xoshiro& rng) {
    std::int64_t w = 0;
    for (std::size_t i = 0; i < sched.events.size(); ++i) {
        const ScheduleEvent& ev = sched.events[i];
        if (k < ev.frame || k > ev.end_frame) continue;
        if (std::isnan(state.resolved[i])) {
            const double base = static_cast<double>(z_current);
            switch (ev.unit) {
                case MagnitudeUnit::absolute:
                    state.resolved[i] = ev.magnitude;
                    break;
                case MagnitudeUnit::sqrt_base:
                    state.resolved[i] = ev.magnitude * std::sqrt(base);
                    break;
                case MagnitudeUnit::fraction_of_base:
                    state.resolved[i] = ev.magnitude * base;
                    break;
            }
        }
        switch (ev.kind) {
            case EventKind::step:
                w += std::llround(state.resolved[i]);
                break;
            case EventKind::ramp: {
                const auto span = static_cast<double>(ev.end_frame - ev.frame + 1);
                const auto done = static_cast<double>(k - ev.frame + 1);
                const std::int64_t cum =
                    std::llround(state.resolved[i] * done / span);
                w += cum - state.emitted[i];
                state.emitted[i] = cum;
                break;
            }
            case EventKind::random_walk:
                w += std::llround(rng.normal(0.0, state.resolved[i]));
                break;
        }
    }
    std::int64_t z_next = z_current + w;
    if (z_next < 0) z_next = 0;
    return {z_next - z_current, z_next};
}

}  // namespace tagest
