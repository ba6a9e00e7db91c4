#pragma once

// Experiment configuration: flat key=value files with dotted keys.
//
// Grammar (one setting per line, '#' starts a comment):
//
//   mode=static|dynamic
//   z0=10000
//   z_hat0=5000                 exactly one of z_hat0 /
//   initial_rel_error=0.5       initial_rel_error; z_hat0 = z0*(1 - value)
//   p00=1
//   k_max=10
//   seeds=100
//   master_seed=1
//   filter.q=0.1
//   filter.j_warmup=3
//   filter.phi_lo=0.25
//   filter.phi_hi=10
//   cusum.theta=4
//   cusum.upsilon=0.5
//   sim.backend=exact|gaussian
//   summary.convergence_threshold=0.05
//   summary.alarm_window=10
//   diag.varsigma=0.5
//   diag.m_const=2
//   diag.epsilon0=0
//   schedule.event.N=SPEC       N = 1, 2, ... in any order
//
// Event SPEC forms:
//   step:FRAME:MAG        one-shot change applied during FRAME
//   ramp:START:END:MAG    MAG spread linearly over [START, END]
//   walk:START:END:SIGMA  per-frame rounded normal steps of spread SIGMA
//
// MAG and SIGMA are numbers with an optional unit suffix: none for an
// absolute count, "zhat" for a multiple of the population when the event
// starts, "sqrt" for a multiple of its square root.

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tagest/analysis.hpp"
#include "tagest/cusum.hpp"
#include "tagest/estimator.hpp"
#include "tagest/sim.hpp"

namespace tagest {

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class RunMode { static_population, dynamic_population };
enum class SimBackend { exact, gaussian };
enum class TraceFormat { csv, jsonl };

struct ExperimentConfig {
    RunMode mode = RunMode::static_population;
    std::int64_t z0 = 0;
    std::optional<double> z_hat0;
    std::optional<double> initial_rel_error;
    double p00 = 1.0;
    TuningParams filter;
    CusumConfig cusum;
    std::int64_t k_max = 10;
    std::int64_t seeds = 100;
    std::uint64_t master_seed = 1;
    SimBackend backend = SimBackend::exact;
    StabilityParams diagnostics;
    double convergence_threshold = 0.05;
    std::int64_t alarm_window = 10;
    PopulationSchedule schedule;

    // Initial estimate after resolving the alternative spellings.
    double resolved_z_hat0() const {
        if (z_hat0) return *z_hat0;
        return static_cast<double>(z0) * (1.0 - *initial_rel_error);
    }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
    return s;
}

[[noreturn]] inline void fail(int line, const std::string& what) {
    throw ConfigError("config line " + std::to_string(line) + ": " + what);
}

inline double parse_number(std::string_view v, int line) {
    std::string s(v);
    std::size_t pos = 0;
    double out = 0.0;
    try {
        out = std::stod(s, &pos);
    } catch (const std::exception&) {
        fail(line, "expected a number, got '" + s + "'");
    }
    if (pos != s.size()) fail(line, "trailing characters in number '" + s + "'");
    return out;
}

inline std::int64_t parse_int(std::string_view v, int line) {
    std::string s(v);
    std::size_t pos = 0;
    std::int64_t out = 0;
    try {
        out = std::stoll(s, &pos);
    } catch (const std::exception&) {
        fail(line, "expected an integer, got '" + s + "'");
    }
    if (pos != s.size()) fail(line, "trailing characters in integer '" + s + "'");
    return out;
}

// Number with optional unit suffix for event magnitudes.
inline void parse_magnitude(std::string_view v, int line, double& coeff,
                            MagnitudeUnit& unit) {
    std::string s(v);
    std::size_t pos = 0;
    try {
        coeff = std::stod(s, &pos);
    } catch (const std::exception&) {
        fail(line, "expected a magnitude, got '" + s + "'");
    }
    const std::string suffix = s.substr(pos);
    if (suffix.empty())
        unit = MagnitudeUnit::absolute;
    else if (suffix == "zhat")
        unit = MagnitudeUnit::fraction_of_base;
    else if (suffix == "sqrt")
        unit = MagnitudeUnit::sqrt_base;
    else
        fail(line, "unknown magnitude unit '" + suffix + "'");
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const std::size_t at = s.find(sep, start);
        if (at == std::string_view::npos) {
            parts.push_back(s.substr(start));
            return parts;
        }
        parts.push_back(s.substr(start, at - start));
        start = at + 1;
    }
}

inline ScheduleEvent parse_event(std::string_view spec, int line) {
    const auto parts = split(spec, ':');
    ScheduleEvent ev;
    if (parts.empty()) fail(line, "empty event spec");
    const std::string_view kind = parts[0];
    if (kind == "step") {
        if (parts.size() != 3) fail(line, "step takes FRAME:MAG");
        ev.kind = EventKind::step;
        ev.frame = parse_int(parts[1], line);
        ev.end_frame = ev.frame;
        parse_magnitude(parts[2], line, ev.magnitude, ev.unit);
    } else if (kind == "ramp" || kind == "walk") {
        if (parts.size() != 4)
            fail(line, std::string(kind) + " takes START:END:MAG");
        ev.kind = (kind == "ramp") ? EventKind::ramp : EventKind::random_walk;
        ev.frame = parse_int(parts[1], line);
        ev.end_frame = parse_int(parts[2], line);
        parse_magnitude(parts[3], line, ev.magnitude, ev.unit);
    } else {
        fail(line, "unknown event kind '" + std::string(kind) + "'");
    }
    return ev;
}

}  // namespace detail

// Structural schedule checks shared by the parser and programmatic callers.
inline void validate_schedule(const PopulationSchedule& sched) {
    std::vector<std::pair<std::int64_t, std::int64_t>> ramps;
    for (const ScheduleEvent& ev : sched.events) {
        if (ev.frame < 1)
            throw ConfigError("schedule event starts before frame 1");
        if (ev.end_frame < ev.frame)
            throw ConfigError("schedule event ends before it starts");
        if (ev.kind == EventKind::random_walk && ev.magnitude < 0.0)
            throw ConfigError("random walk spread must be non-negative");
        if (ev.kind == EventKind::ramp)
            ramps.emplace_back(ev.frame, ev.end_frame);
    }
    for (std::size_t i = 0; i < ramps.size(); ++i)
        for (std::size_t j = i + 1; j < ramps.size(); ++j)
            if (ramps[i].first <= ramps[j].second &&
                ramps[j].first <= ramps[i].second)
                throw ConfigError("overlapping ramps in schedule");
}

// Semantic validation; throws ConfigError on the first violation.
inline void validate_config(const ExperimentConfig& cfg) {
    if (cfg.z0 < 0) throw ConfigError("z0 must be non-negative");
    if (cfg.z_hat0 && cfg.initial_rel_error)
        throw ConfigError("give z_hat0 or initial_rel_error, not both");
    if (!cfg.z_hat0 && !cfg.initial_rel_error)
        throw ConfigError("one of z_hat0 / initial_rel_error is required");
    if (!(cfg.resolved_z_hat0() >= 1.0))
        throw ConfigError("initial estimate must be at least 1");
    if (!(cfg.p00 > 0.0)) throw ConfigError("p00 must be positive");
    if (!(cfg.filter.q > 0.0)) throw ConfigError("filter.q must be positive");
    if (!(cfg.filter.phi_lo > 0.0))
        throw ConfigError("filter.phi_lo must be positive");
    if (cfg.filter.phi_hi < cfg.filter.phi_lo)
        throw ConfigError("filter.phi_hi must be at least filter.phi_lo");
    if (cfg.filter.j_warmup < 0)
        throw ConfigError("filter.j_warmup must be non-negative");
    if (!(cfg.cusum.theta > 0.0)) throw ConfigError("cusum.theta must be positive");
    if (cfg.cusum.upsilon < 0.0)
        throw ConfigError("cusum.upsilon must be non-negative");
    if (cfg.k_max < 1) throw ConfigError("k_max must be at least 1");
    if (cfg.seeds < 1) throw ConfigError("seeds must be at least 1");
    if (!(cfg.convergence_threshold > 0.0))
        throw ConfigError("summary.convergence_threshold must be positive");
    if (cfg.alarm_window < 0)
        throw ConfigError("summary.alarm_window must be non-negative");
    if (!(cfg.diagnostics.varsigma > 0.0 && cfg.diagnostics.varsigma < 1.0))
        throw ConfigError("diag.varsigma must lie in (0, 1)");
    if (!(cfg.diagnostics.m_const > 1.0))
        throw ConfigError("diag.m_const must exceed 1");
    if (cfg.mode == RunMode::static_population && !cfg.schedule.events.empty())
        throw ConfigError("static mode does not take schedule events");
    validate_schedule(cfg.schedule);
}

// Parses config text. Unknown keys are errors: a typo that silently fell
// back to a default would invalidate an experiment.
inline ExperimentConfig parse_config(std::string_view text) {
    ExperimentConfig cfg;
    std::map<std::int64_t, ScheduleEvent> events;
    bool saw_z0 = false;

    int line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t nl = text.find('\n', start);
        std::string_view line = (nl == std::string_view::npos)
                                    ? text.substr(start)
                                    : text.substr(start, nl - start);
        start = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
        ++line_no;

        const std::size_t hash = line.find('#');
        if (hash != std::string_view::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;

        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos)
            detail::fail(line_no, "expected key=value");
        const std::string key{detail::trim(line.substr(0, eq))};
        const std::string_view value = detail::trim(line.substr(eq + 1));
        if (key.empty()) detail::fail(line_no, "empty key");
        if (value.empty()) detail::fail(line_no, "empty value for '" + key + "'");

        if (key == "mode") {
            if (value == "static")
                cfg.mode = RunMode::static_population;
            else if (value == "dynamic")
                cfg.mode = RunMode::dynamic_population;
            else
                detail::fail(line_no, "mode must be static or dynamic");
        } else if (key == "z0") {
            cfg.z0 = detail::parse_int(value, line_no);
            saw_z0 = true;
        } else if (key == "z_hat0") {
            cfg.z_hat0 = detail::parse_number(value, line_no);
        } else if (key == "initial_rel_error") {
            cfg.initial_rel_error = detail::parse_number(value, line_no);
        } else if (key == "p00") {
            cfg.p00 = detail::parse_number(value, line_no);
        } else if (key == "k_max") {
            cfg.k_max = detail::parse_int(value, line_no);
        } else if (key == "seeds") {
            cfg.seeds = detail::parse_int(value, line_no);
        } else if (key == "master_seed") {
            cfg.master_seed =
                static_cast<std::uint64_t>(detail::parse_int(value, line_no));
        } else if (key == "filter.q") {
            cfg.filter.q = detail::parse_number(value, line_no);
        } else if (key == "filter.j_warmup") {
            cfg.filter.j_warmup = detail::parse_int(value, line_no);
        } else if (key == "filter.phi_lo") {
            cfg.filter.phi_lo = detail::parse_number(value, line_no);
        } else if (key == "filter.phi_hi") {
            cfg.filter.phi_hi = detail::parse_number(value, line_no);
        } else if (key == "cusum.theta") {
            cfg.cusum.theta = detail::parse_number(value, line_no);
        } else if (key == "cusum.upsilon") {
            cfg.cusum.upsilon = detail::parse_number(value, line_no);
        } else if (key == "sim.backend") {
            if (value == "exact")
                cfg.backend = SimBackend::exact;
            else if (value == "gaussian")
                cfg.backend = SimBackend::gaussian;
            else
                detail::fail(line_no, "sim.backend must be exact or gaussian");
        } else if (key == "summary.convergence_threshold") {
            cfg.convergence_threshold = detail::parse_number(value, line_no);
        } else if (key == "summary.alarm_window") {
            cfg.alarm_window = detail::parse_int(value, line_no);
        } else if (key == "diag.varsigma") {
            cfg.diagnostics.varsigma = detail::parse_number(value, line_no);
        } else if (key == "diag.m_const") {
            cfg.diagnostics.m_const = detail::parse_number(value, line_no);
        } else if (key == "diag.epsilon0") {
            cfg.diagnostics.epsilon0 = detail::parse_number(value, line_no);
        } else if (key.rfind("schedule.event.", 0) == 0) {
            const std::string idx = key.substr(15);
            std::int64_t n = 0;
            try {
                std::size_t pos = 0;
                n = std::stoll(idx, &pos);
                if (pos != idx.size() || n < 1) throw std::invalid_argument("");
            } catch (const std::exception&) {
                detail::fail(line_no, "bad event index in '" + key + "'");
            }
            if (events.count(n))
                detail::fail(line_no, "duplicate schedule event " + idx);
            events[n] = detail::parse_event(value, line_no);
        } else {
            detail::fail(line_no, "unknown key '" + key + "'");
        }
    }

    if (!saw_z0) throw ConfigError("config: z0 is required");
    cfg.schedule.initial = cfg.z0;
    for (auto& [n, ev] : events) cfg.schedule.events.push_back(ev);

    validate_config(cfg);
    return cfg;
}

inline ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

// ---------------------------------------------------------------------------
// Shipped scenario catalog
// ---------------------------------------------------------------------------

struct ScenarioEntry {
    const char* name;
    const char* description;
    const char* text;
};

// Built into the binary so `run` and `scenarios --dump` work from any
// directory; the scenarios/ directory in the repository carries the same
// text for browsing.
inline const std::vector<ScenarioEntry>& builtin_scenarios() {
    static const std::vector<ScenarioEntry> table = {
        {"static-s1-e02",
         "static 10k tags, initial estimate 20% low, 10 frames",
         "mode=static\nz0=10000\ninitial_rel_error=0.2\nk_max=10\nseeds=100\n"
         "master_seed=1\n"},
        {"static-s1-e05",
         "static 10k tags, initial estimate 50% low, 10 frames",
         "mode=static\nz0=10000\ninitial_rel_error=0.5\nk_max=10\nseeds=100\n"
         "master_seed=1\n"},
        {"static-s1-e09",
         "static 10k tags, initial estimate 90% low, 10 frames",
         "mode=static\nz0=10000\ninitial_rel_error=0.9\nk_max=10\nseeds=100\n"
         "master_seed=1\n"},
        {"static-s2-e02",
         "static 100k tags, initial estimate 20% low, 10 frames",
         "mode=static\nz0=100000\ninitial_rel_error=0.2\nk_max=10\nseeds=100\n"
         "master_seed=1\n"},
        {"static-s2-e05",
         "static 100k tags, initial estimate 50% low, 10 frames",
         "mode=static\nz0=100000\ninitial_rel_error=0.5\nk_max=10\nseeds=100\n"
         "master_seed=1\n"},
        {"static-s2-e09",
         "static 100k tags, initial estimate 90% low, 10 frames",
         "mode=static\nz0=100000\ninitial_rel_error=0.9\nk_max=10\nseeds=100\n"
         "master_seed=1\n"},
        {"dynamic-s1-step",
         "10k tags, +40% step during frame 50, 100 frames",
         "mode=dynamic\nz0=10000\ninitial_rel_error=0.5\nk_max=100\nseeds=100\n"
         "master_seed=1\nschedule.event.1=step:50:+0.4zhat\n"},
        {"dynamic-s1-walk",
         "10k tags, random walk of spread sqrt(z) per frame, 200 frames",
         "mode=dynamic\nz0=10000\ninitial_rel_error=0.5\nk_max=200\nseeds=100\n"
         "master_seed=1\nschedule.event.1=walk:1:200:1sqrt\n"},
        {"dynamic-s2-step",
         "100k tags, -50% step during frame 50, 100 frames",
         "mode=dynamic\nz0=100000\ninitial_rel_error=0.5\nk_max=100\nseeds=100\n"
         "master_seed=1\nschedule.event.1=step:50:-0.5zhat\n"},
        {"dynamic-s2-walk",
         "100k tags, random walk of spread sqrt(z) per frame, 200 frames",
         "mode=dynamic\nz0=100000\ninitial_rel_error=0.5\nk_max=200\nseeds=100\n"
         "master_seed=1\nschedule.event.1=walk:1:200:1sqrt\n"},
    };
    return table;
}

inline const ScenarioEntry* find_scenario(std::string_view name) {
    for (const ScenarioEntry& s : builtin_scenarios())
        if (name == s.name) return &s;
    return nullptr;
}

}  // namespace tagest
