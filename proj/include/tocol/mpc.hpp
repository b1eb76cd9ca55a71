#pragma once

#include "tocol/trajectory.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tocol {

struct MpcConfig {
    int N0 = 15;
    int N_min = 4;
    double dt_min = 1e-3;
    double dt_max = kInf;
    ControlParam param = ControlParam::constant;
    CollocationForm form = CollocationForm::compressed;
    double convergence_radius = 0.02;
    int max_steps = 200;
    bool warm_start = true;
    /// After entering the convergence ball, keep stepping until the dt clamp
    /// is active or this many further steps have been logged.
    int settle_steps = 10;
    SolverConfig solver;
    PropagatorConfig propagator;

    void validate() const {
        if (N_min < 1 || N0 < N_min) throw std::invalid_argument("mpc: need 1 <= N_min <= N0");
        if (!(dt_min >= 0.0) || !(dt_min <= dt_max)) throw std::invalid_argument("mpc: need 0 <= dt_min <= dt_max");
        if (!(convergence_radius > 0.0)) throw std::invalid_argument("mpc: convergence radius must be positive");
        if (max_steps < 1 || settle_steps < 0) throw std::invalid_argument("mpc: step caps must be positive");
        solver.validate();
        propagator.validate();
    }
};

/// Solver failure inside a closed-loop step.
class MpcStepError : public std::runtime_error {
public:
    MpcStepError(const std::string& what, SolverResult result)
        : std::runtime_error(what), result_(std::move(result)) {}

    const SolverResult& result() const noexcept { return result_; }

private:
    SolverResult result_;
};

/// First partition of the current solution, applied on [t_n, t_n + duration).
struct AppliedSegment {
    double duration = 0.0;
    ControlSignal signal;
};

struct MpcStep {
    Solution solution;
    AppliedSegment applied;
};

namespace detail {

inline OcpSpec step_spec(const OcpSpec& tmpl, const Vector& state, int N, const MpcConfig& cfg) {
    OcpSpec spec = tmpl;
    spec.x_start = state;
    spec.N = N;
    spec.dt_min = cfg.dt_min;
    spec.dt_max = cfg.dt_max;
    spec.param = cfg.param;
    spec.form = cfg.form;
    spec.validate();
    return spec;
}

// Drops the first partition of the previous solution and reuses the rest.
inline Vector shifted_guess(const OcpSpec& spec, const Solution& prev) {
    const DecisionLayout l = layout_variables(spec);
    const DecisionLayout& pl = prev.layout;
    const Vector& pz = prev.z();
    Vector z(l.n_z);
    z[DecisionLayout::dt_offset] = std::clamp(pz[DecisionLayout::dt_offset], spec.dt_min, spec.dt_max);
    const int shift = pl.N - l.N;  // 1 while shrinking, 0 at the floor
    for (int k = 0; k <= l.N; ++k) z.segment(l.state_offset(k), l.p) = pz.segment(pl.state_offset(k + shift), l.p);
    if (l.state_midpoints) {
        for (int k = 0; k < l.N; ++k) z.segment(l.mid_state_offset(k), l.p) = pz.segment(pl.mid_state_offset(k + shift), l.p);
    }
    const int slots_per_partition = has_midpoint_controls(l.param) ? 2 : 1;
    for (int j = 0; j < l.control_count(); ++j) {
        z.segment(l.control_base() + l.q * j, l.q) =
            pz.segment(pl.control_base() + l.q * (j + slots_per_partition * shift), l.q);
    }
    z.segment(l.state_offset(0), l.p) = spec.x_start;
    return z;
}

inline bool compatible(const Solution& prev, const OcpSpec& spec) {
    return prev.spec.param == spec.param && prev.spec.form == spec.form && prev.layout.p == spec.model.p &&
           (prev.spec.N == spec.N || prev.spec.N == spec.N + 1);
}

}  // namespace detail

/// Solves the minimum-time problem from `state` with horizon N.
///
/// `tmpl` supplies the model, target and bounds; grid settings come from cfg.
/// With a compatible previous solution and warm starting enabled, the
/// previous grid is shifted by one partition and used as the initial guess;
/// a cold start is tried if the warm-started solve fails.
inline MpcStep mpc_step(const OcpSpec& tmpl, const Vector& state, int N, const MpcConfig& cfg,
                        const Solution* prev = nullptr) {
    if (N < cfg.N_min) throw std::invalid_argument("mpc_step: horizon below N_min");
    if (!state.allFinite()) throw std::invalid_argument("mpc_step: state is not finite");
    const OcpSpec spec = detail::step_spec(tmpl, state, N, cfg);
    std::optional<Vector> z0;
    if (cfg.warm_start && prev && detail::compatible(*prev, spec)) z0 = detail::shifted_guess(spec, *prev);

    Solution sol = solve_ocp(spec, cfg.solver, z0);
    if (z0 && !sol.solver.usable(cfg.solver.constraint_tol)) sol = solve_ocp(spec, cfg.solver);
    if (!sol.solver.usable(cfg.solver.constraint_tol)) {
        throw MpcStepError("mpc_step: solver returned " + std::string(to_string(sol.solver.status)), sol.solver);
    }
    MpcStep step;
    step.applied.duration = sol.dt_star;
    step.applied.signal = control_signal(sol);
    step.solution = std::move(sol);
    return step;
}

enum class ClosedLoopStatus { converged, horizon_floor_reached, infeasible, step_cap };

inline std::string_view to_string(ClosedLoopStatus s) {
    switch (s) {
        case ClosedLoopStatus::converged: return "converged";
        case ClosedLoopStatus::horizon_floor_reached: return "horizon-floor-reached";
        case ClosedLoopStatus::infeasible: return "infeasible";
        case ClosedLoopStatus::step_cap: return "step-cap";
    }
    return "?";
}

struct StepRecord {
    int n = 0;
    double t = 0.0;
    Vector x;
    int N = 0;
    double dt_star = 0.0;
    double t_f_star = 0.0;
    SolverStatus solver_status = SolverStatus::optimal;
    double wall_time = 0.0;  // seconds
    Vector predicted_next;   // open-loop state prediction at t + dt_star
};

struct ClosedLoopLog {
    std::vector<StepRecord> steps;
    ClosedLoopStatus status = ClosedLoopStatus::step_cap;
    int N_min = 1;
    double dt_min = 0.0;
    std::string message;
};

inline bool dt_clamped(double dt, double dt_min) { return dt <= dt_min * (1.0 + 1e-6) + 1e-12; }

/// Shrinking-horizon loop: solve, apply the first partition to `plant`,
/// shrink N by one down to N_min, repeat.
inline ClosedLoopLog run_closed_loop(const OcpSpec& tmpl, const Vector& x0, const SystemModel& plant,
                                     const MpcConfig& cfg) {
    cfg.validate();
    if (plant.p != tmpl.model.p || plant.q != tmpl.model.q) {
        throw std::invalid_argument("run_closed_loop: plant and model dimensions differ");
    }
    ClosedLoopLog log;
    log.N_min = cfg.N_min;
    log.dt_min = cfg.dt_min;

    Vector x = x0;
    double t = 0.0;
    int N = cfg.N0;
    std::optional<Solution> prev;
    int entered_at = -1;
    int floor_clamped_outside = 0;
    for (int n = 0; n < cfg.max_steps; ++n) {
        const auto start = std::chrono::steady_clock::now();
        MpcStep step;
        try {
            step = mpc_step(tmpl, x, N, cfg, prev ? &*prev : nullptr);
        } catch (const MpcStepError& e) {
            log.status = ClosedLoopStatus::infeasible;
            log.message = "step " + std::to_string(n) + ": " + e.what();
            return log;
        }
        StepRecord rec;
        rec.n = n;
        rec.t = t;
        rec.x = x;
        rec.N = N;
        rec.dt_star = step.solution.dt_star;
        rec.t_f_star = step.solution.t_f_star;
        rec.solver_status = step.solution.solver.status;
        rec.predicted_next = step.solution.state(step.applied.duration);
        rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        log.steps.push_back(rec);

        const bool inside = tmpl.target.distance(x) <= cfg.convergence_radius;
        const bool clamped = dt_clamped(rec.dt_star, cfg.dt_min);
        if (inside) {
            if (entered_at < 0) entered_at = n;
            if (clamped || n - entered_at >= cfg.settle_steps) {
                log.status = ClosedLoopStatus::converged;
                return log;
            }
        } else {
            entered_at = -1;
            floor_clamped_outside = (N == cfg.N_min && clamped) ? floor_clamped_outside + 1 : 0;
            if (floor_clamped_outside > cfg.settle_steps) {
                log.status = ClosedLoopStatus::horizon_floor_reached;
                return log;
            }
        }
        if (step.applied.duration <= 0.0) {
            log.status = ClosedLoopStatus::horizon_floor_reached;
            log.message = "zero-length step outside the convergence ball";
            return log;
        }
        try {
            x = propagate(plant, x, step.applied.signal, step.applied.duration, cfg.propagator).terminal();
        } catch (const PropagationError& e) {
            log.status = ClosedLoopStatus::infeasible;
            log.message = std::string("plant propagation failed: ") + e.what();
            return log;
        }
        t += step.applied.duration;
        N = std::max(N - 1, cfg.N_min);
        prev = std::move(step.solution);
    }
    log.status = ClosedLoopStatus::step_cap;
    return log;
}

// ---------------------------------------------------------------------------
// Closed-loop diagnostics

struct OptimalityEntry {
    int n;
    double deviation;  // |t_f*_{n+1} - (t_f*_n - dt*_n)|
    bool pass;
};

struct OptimalityReport {
    std::vector<OptimalityEntry> entries;
    double worst = 0.0;
    bool all_pass = true;
};

/// Checks  t_f*_{n+1} = t_f*_n - dt*_n  on every step taken with N_n > N_min.
inline OptimalityReport check_optimality_principle(const ClosedLoopLog& log, double tol) {
    OptimalityReport rep;
    for (std::size_t i = 0; i + 1 < log.steps.size(); ++i) {
        const StepRecord& cur = log.steps[i];
        if (cur.N <= log.N_min) continue;
        const double dev = std::abs(log.steps[i + 1].t_f_star - (cur.t_f_star - cur.dt_star));
        const bool pass = dev <= tol;
        rep.entries.push_back({cur.n, dev, pass});
        rep.worst = std::max(rep.worst, dev);
        rep.all_pass = rep.all_pass && pass;
    }
    return rep;
}

enum class LyapunovPhase { shrinking, floor, clamped };

inline std::string_view to_string(LyapunovPhase p) {
    switch (p) {
        case LyapunovPhase::shrinking: return "shrinking";
        case LyapunovPhase::floor: return "floor";
        case LyapunovPhase::clamped: return "clamped";
    }
    return "?";
}

struct LyapunovEntry {
    int n;
    LyapunovPhase phase;
    double value;       // V_n = t_f*_n
    double decrease;    // V_n - V_{n+1}; NaN on the last step
    double dt_star;
    bool pass;
};

struct LyapunovReport {
    std::vector<LyapunovEntry> entries;
    bool dt_floor_respected = true;
    bool all_pass = true;
};

/// Uses the optimal cost V = t_f* as Lyapunov candidate.
///
/// shrinking (N_n > N_min): V_{n+1} <= V_n - dt*_n + tol.
/// floor     (N_n = N_min, dt above its bound): V non-increasing.
/// clamped   (N_n = N_min, dt at its bound): V_n = N_min * dt_min.
inline LyapunovReport lyapunov_decrease_report(const ClosedLoopLog& log, double tol) {
    LyapunovReport rep;
    for (std::size_t i = 0; i < log.steps.size(); ++i) {
        const StepRecord& cur = log.steps[i];
        const bool has_next = i + 1 < log.steps.size();
        const double next_v = has_next ? log.steps[i + 1].t_f_star : std::nan("");
        LyapunovEntry e{cur.n, LyapunovPhase::shrinking, cur.t_f_star, cur.t_f_star - next_v, cur.dt_star, true};
        if (cur.dt_star < log.dt_min * (1.0 - 1e-9) - 1e-15) rep.dt_floor_respected = false;
        if (cur.N > log.N_min) {
            e.pass = !has_next || next_v <= cur.t_f_star - cur.dt_star + tol;
        } else if (!dt_clamped(cur.dt_star, log.dt_min)) {
            e.phase = LyapunovPhase::floor;
            e.pass = !has_next || next_v <= cur.t_f_star + tol;
        } else {
            e.phase = LyapunovPhase::clamped;
            e.pass = std::abs(cur.t_f_star - log.N_min * log.dt_min) <= tol;
        }
        rep.all_pass = rep.all_pass && e.pass;
        rep.entries.push_back(e);
    }
    rep.all_pass = rep.all_pass && rep.dt_floor_respected;
    return rep;
}

struct CostSample {
    Vector x_start;
    double distance = 0.0;
    double t_f_star = 0.0;
    SolverStatus status = SolverStatus::optimal;
    bool feasible = false;
};

struct CostBoundData {
    std::vector<CostSample> samples;
    int infeasible_count = 0;
};

/// Solves the template problem (with dt_min = 0) from each start state and
/// records (distance to target, t_f*) pairs.
inline CostBoundData cost_bound_sampling(const OcpSpec& tmpl, const std::vector<Vector>& starts,
                                         const SolverConfig& cfg = {}) {
    if (tmpl.dt_min != 0.0) throw std::invalid_argument("cost_bound_sampling: requires dt_min = 0");
    CostBoundData data;
    for (const Vector& xs : starts) {
        OcpSpec spec = tmpl;
        spec.x_start = xs;
        CostSample s;
        s.x_start = xs;
        s.distance = spec.target.distance(xs);
        try {
            const Solution sol = solve_ocp(spec, cfg);
            s.t_f_star = sol.t_f_star;
            s.status = sol.solver.status;
            s.feasible = sol.solver.usable(cfg.constraint_tol);
        } catch (const std::invalid_argument&) {
            s.feasible = false;
            s.status = SolverStatus::infeasible;
        }
        if (!s.feasible) ++data.infeasible_count;
        data.samples.push_back(s);
    }
    return data;
}

}  // namespace tocol
