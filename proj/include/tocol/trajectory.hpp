#pragma once

#include "tocol/solver.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tocol {

namespace detail {

struct GridPosition {
    int k;       // partition index
    double tau;  // offset inside the partition, in [0, dt]
};

// Right-continuous lookup on the grid t_k = k * dt; t_f maps to the end of the
// last partition.
inline GridPosition locate(double t, double dt, int n) {
    if (dt <= 0.0) return {0, 0.0};
    int k = static_cast<int>(std::floor(t / dt));
    if (k > 0 && k * dt > t) --k;
    if (k + 1 < n && (k + 1) * dt <= t) ++k;
    k = std::clamp(k, 0, n - 1);
    return {k, std::clamp(t - k * dt, 0.0, dt)};
}

inline void check_time(double t, double t_f) {
    const double slack = 1e-12 * std::max(1.0, t_f);
    if (!(t >= -slack && t <= t_f + slack)) {
        throw std::out_of_range("time " + std::to_string(t) + " outside [0, " + std::to_string(t_f) + "]");
    }
}

}  // namespace detail

/// Continuous control reconstructed from the optimized grid values.
struct ControlSpline {
    ControlParam variant = ControlParam::constant;
    double dt = 0.0;
    int N = 0;
    // Per partition: control at the start, the midpoint and the end.
    std::vector<Vector> start;
    std::vector<Vector> mid;
    std::vector<Vector> end;

    double final_time() const { return N * dt; }

    Vector operator()(double t) const {
        const auto [k, tau] = detail::locate(t, dt, N);
        const Vector& a = start[k];
        const Vector& m = mid[k];
        const Vector& b = end[k];
        if (dt <= 0.0) return a;
        switch (variant) {
            case ControlParam::quadratic: {
                const Vector beta1 = -(3.0 * a - 4.0 * m + b) / dt;
                const Vector beta2 = 2.0 * (a - 2.0 * m + b) / (dt * dt);
                return a + beta1 * tau + beta2 * tau * tau;
            }
            case ControlParam::linear: {
                const double half = 0.5 * dt;
                if (tau <= half) return a + (m - a) * (tau / half);
                return m + (b - m) * ((tau - half) / half);
            }
            case ControlParam::mean: return a + (b - a) * (tau / dt);
            case ControlParam::constant: return a;
        }
        return a;
    }

    /// Instants where the spline may lose smoothness.
    std::vector<double> breakpoints() const {
        std::vector<double> bp;
        for (int k = 0; k <= N; ++k) bp.push_back(k * dt);
        if (variant == ControlParam::linear) {
            for (int k = 0; k < N; ++k) bp.push_back((k + 0.5) * dt);
        }
        std::sort(bp.begin(), bp.end());
        return bp;
    }
};

/// Piecewise cubic Hermite state trajectory with tangents f(x_k, u_k).
struct StateSpline {
    double dt = 0.0;
    int N = 0;
    std::vector<Vector> x;        // grid states, N + 1
    std::vector<Vector> x_mid;    // midpoint states (decision variable or interpolant), N
    std::vector<Vector> f_start;  // f(x_k, u_k) per partition
    std::vector<Vector> f_end;    // f(x_{k+1}, u_{k+1}) per partition

    Vector operator()(double t) const {
        const auto [k, tau] = detail::locate(t, dt, N);
        if (dt <= 0.0) return x[0];
        const double s = tau / dt;
        const double s2 = s * s;
        const double s3 = s2 * s;
        return (2 * s3 - 3 * s2 + 1) * x[k] + (s3 - 2 * s2 + s) * dt * f_start[k] + (-2 * s3 + 3 * s2) * x[k + 1] +
               (s3 - s2) * dt * f_end[k];
    }

    Vector derivative(double t) const {
        const auto [k, tau] = detail::locate(t, dt, N);
        if (dt <= 0.0) return f_start.empty() ? Vector::Zero(x[0].size()) : f_start[0];
        const double s = tau / dt;
        const double s2 = s * s;
        return ((6 * s2 - 6 * s) * x[k] + (6 * s - 6 * s2) * x[k + 1]) / dt + (3 * s2 - 4 * s + 1) * f_start[k] +
               (3 * s2 - 2 * s) * f_end[k];
    }
};

struct Solution {
    double t_f_star = 0.0;
    double dt_star = 0.0;
    ControlSpline control;
    StateSpline state;
    SolverResult solver;
    OcpSpec spec;
    DecisionLayout layout;

    const Vector& z() const { return solver.z_opt; }
};

/// Builds the continuous-time solution from a solved decision vector.
inline Solution make_solution(const OcpSpec& spec, SolverResult result) {
    Solution sol;
    sol.spec = spec;
    sol.layout = layout_variables(spec);
    check_layout(sol.layout, result.z_opt);
    const DecisionLayout& l = sol.layout;
    const Vector& z = result.z_opt;
    sol.dt_star = z[DecisionLayout::dt_offset];
    sol.t_f_star = spec.N * sol.dt_star;

    sol.control.variant = spec.param;
    sol.control.dt = sol.dt_star;
    sol.control.N = spec.N;
    sol.state.dt = sol.dt_star;
    sol.state.N = spec.N;
    for (int k = 0; k <= spec.N; ++k) sol.state.x.push_back(z.segment(l.state_offset(k), l.p));
    for (int k = 0; k < spec.N; ++k) {
        const PartitionView v = partition_view(l, z, k);
        sol.control.start.push_back(v.u_k);
        sol.control.mid.push_back(v.u_mid);
        sol.control.end.push_back(v.u_k1);
        sol.state.f_start.push_back(eval_dynamics(spec.model, v.x_k, v.u_k));
        sol.state.f_end.push_back(eval_dynamics(spec.model, v.x_k1, v.u_k1));
        sol.state.x_mid.push_back(midpoint_state(spec.model, v));
    }
    sol.solver = std::move(result);
    return sol;
}

inline constexpr int kDtFloorAttempts = 4;
inline constexpr double kDtFloorGrowth = 4.0;

/// Transcribes and solves; z0 defaults to initial_guess(spec).
///
/// At dt = 0 the controls drop out of every defect, so the feasibility phase
/// can stall there. If the plain solve is not usable, the program is solved
/// again with a temporary lower bound on dt (growing geometrically) and the
/// result seeds a final solve of the original program.
inline Solution solve_ocp(OcpSpec spec, const SolverConfig& cfg = {}, const std::optional<Vector>& z0 = std::nullopt) {
    spec.validate();
    const Vector start = z0 ? *z0 : initial_guess(spec);
    SolverResult res = solve(assemble_nlp(spec), start, cfg);
    if (res.usable(cfg.constraint_tol) || start.size() != layout_variables(spec).n_z) {
        return make_solution(spec, std::move(res));
    }
    double floor = std::max({start[DecisionLayout::dt_offset], spec.dt_min, kDtGuessFloor});
    for (int attempt = 0; attempt < kDtFloorAttempts && floor <= spec.dt_max; ++attempt, floor *= kDtFloorGrowth) {
        OcpSpec floored = spec;
        floored.dt_min = floor;
        Vector guess = start;
        guess[DecisionLayout::dt_offset] = floor;
        const SolverResult stage = solve(assemble_nlp(floored), guess, cfg);
        if (!stage.usable(cfg.constraint_tol)) continue;
        SolverResult polished = solve(assemble_nlp(spec), stage.z_opt, cfg);
        if (polished.usable(cfg.constraint_tol)) {
            polished.iterations += stage.iterations;
            polished.function_evals += stage.function_evals;
            return make_solution(spec, std::move(polished));
        }
    }
    return make_solution(spec, std::move(res));
}

inline Vector eval_control(const Solution& sol, double t) {
    detail::check_time(t, sol.t_f_star);
    return sol.control(std::clamp(t, 0.0, sol.t_f_star));
}

inline Vector eval_state(const Solution& sol, double t) {
    detail::check_time(t, sol.t_f_star);
    return sol.state(std::clamp(t, 0.0, sol.t_f_star));
}

/// The optimized control as an input signal for propagate().
inline ControlSignal control_signal(const Solution& sol) {
    ControlSignal sig;
    sig.eval = [ctrl = sol.control, tf = sol.t_f_star](double t) { return ctrl(std::clamp(t, 0.0, tf)); };
    sig.breakpoints = sol.control.breakpoints();
    return sig;
}

// ---------------------------------------------------------------------------
// Evaluation metrics

struct ErrorProfile {
    std::vector<double> t;
    std::vector<double> pointwise;  // |x_spline(t) - phi(t)|_2
    std::vector<double> integral;   // running trapezoidal integral of `pointwise`
    double terminal_mismatch = 0.0;

    double final_error() const { return integral.empty() ? 0.0 : integral.back(); }
};

/// Re-integrates the model under the optimized control and compares the
/// result against the collocation state spline.
inline ErrorProfile dynamics_error(const Solution& sol, const PropagatorConfig& cfg = {}, int n_samples = 1001) {
    if (n_samples < 2) throw std::invalid_argument("dynamics_error: need at least two samples");
    ErrorProfile prof;
    const double tf = sol.t_f_star;
    if (tf <= 0.0) {
        prof.t = {0.0};
        prof.pointwise = {0.0};
        prof.integral = {0.0};
        return prof;
    }
    std::vector<double> times(n_samples);
    for (int i = 0; i < n_samples; ++i) times[i] = tf * i / (n_samples - 1);
    times.back() = tf;
    const SampledTrajectory traj = propagate(sol.spec.model, sol.spec.x_start, control_signal(sol), tf, cfg, times);

    prof.t = times;
    double acc = 0.0;
    for (int i = 0; i < n_samples; ++i) {
        const double e = (sol.state(times[i]) - traj.at_outputs[i]).norm();
        if (i > 0) acc += 0.5 * (e + prof.pointwise.back()) * (times[i] - times[i - 1]);
        prof.pointwise.push_back(e);
        prof.integral.push_back(acc);
    }
    prof.terminal_mismatch = prof.pointwise.back();
    return prof;
}

/// One box or path constraint, as seen by dense sampling.
struct ConstraintViolation {
    std::string name;
    double max_violation = 0.0;  // positive part
    double argmax_t = 0.0;
};

/// Dense samples of the solution with every constraint value (positive = violated).
struct SampleTable {
    std::vector<double> t;
    std::vector<Vector> x;
    std::vector<Vector> u;
    std::vector<std::string> constraint_names;
    std::vector<Vector> constraint_values;
};

inline constexpr int kDefaultSamplesPerPartition = 50;

inline SampleTable sample_solution(const Solution& sol, int per_partition = kDefaultSamplesPerPartition) {
    if (per_partition < 1) throw std::invalid_argument("sample_solution: per_partition must be >= 1");
    const OcpSpec& spec = sol.spec;
    SampleTable tab;
    for (int i = 0; i < spec.model.p; ++i) {
        if (std::isfinite(spec.x_lower[i])) tab.constraint_names.push_back("x" + std::to_string(i + 1) + "_lower");
        if (std::isfinite(spec.x_upper[i])) tab.constraint_names.push_back("x" + std::to_string(i + 1) + "_upper");
    }
    for (int j = 0; j < spec.model.q; ++j) {
        tab.constraint_names.push_back("u" + std::to_string(j + 1) + "_lower");
        tab.constraint_names.push_back("u" + std::to_string(j + 1) + "_upper");
    }
    for (int j = 0; j < spec.n_path; ++j) tab.constraint_names.push_back("g" + std::to_string(j + 1));

    auto push = [&](double t) {
        const Vector x = sol.state(t);
        const Vector u = sol.control(t);
        Vector c(static_cast<Eigen::Index>(tab.constraint_names.size()));
        int r = 0;
        for (int i = 0; i < spec.model.p; ++i) {
            if (std::isfinite(spec.x_lower[i])) c[r++] = spec.x_lower[i] - x[i];
            if (std::isfinite(spec.x_upper[i])) c[r++] = x[i] - spec.x_upper[i];
        }
        for (int j = 0; j < spec.model.q; ++j) {
            c[r++] = spec.u_lower[j] - u[j];
            c[r++] = u[j] - spec.u_upper[j];
        }
        if (spec.n_path > 0) c.tail(spec.n_path) = spec.path_ineq(x);
        tab.t.push_back(t);
        tab.x.push_back(x);
        tab.u.push_back(u);
        tab.constraint_values.push_back(c);
    };

    if (sol.t_f_star <= 0.0) {
        push(0.0);
        return tab;
    }
    for (int k = 0; k < spec.N; ++k) {
        for (int j = 0; j < per_partition; ++j) push(sol.dt_star * (k + static_cast<double>(j) / per_partition));
    }
    push(sol.t_f_star);
    return tab;
}

/// Maximum positive violation of every box and path constraint between grid points.
inline std::vector<ConstraintViolation> violation_profile(const Solution& sol,
                                                          int per_partition = kDefaultSamplesPerPartition) {
    if (per_partition < 10) throw std::invalid_argument("violation_profile: need at least 10 samples per partition");
    const SampleTable tab = sample_solution(sol, per_partition);
    std::vector<ConstraintViolation> out;
    for (std::size_t c = 0; c < tab.constraint_names.size(); ++c) {
        ConstraintViolation v{tab.constraint_names[c], 0.0, 0.0};
        for (std::size_t i = 0; i < tab.t.size(); ++i) {
            const double val = tab.constraint_values[i][static_cast<Eigen::Index>(c)];
            if (val > v.max_violation) {
                v.max_violation = val;
                v.argmax_t = tab.t[i];
            }
        }
        out.push_back(v);
    }
    return out;
}

inline double max_violation(const std::vector<ConstraintViolation>& profile) {
    double m = 0.0;
    for (const auto& v : profile) m = std::max(m, v.max_violation);
    return m;
}

inline const ConstraintViolation& find_violation(const std::vector<ConstraintViolation>& profile,
                                                 const std::string& name) {
    for (const auto& v : profile) {
        if (v.name == name) return v;
    }
    throw std::out_of_range("no constraint named " + name);
}

/// Sum of |u(t_{i+1}) - u(t_i)| over dense samples, per control channel.
inline Vector total_variation(const Solution& sol, int per_partition = kDefaultSamplesPerPartition) {
    const SampleTable tab = sample_solution(sol, per_partition);
    Vector tv = Vector::Zero(sol.spec.model.q);
    for (std::size_t i = 1; i < tab.u.size(); ++i) tv += (tab.u[i] - tab.u[i - 1]).cwiseAbs();
    return tv;
}

}  // namespace tocol
