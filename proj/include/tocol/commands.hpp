#pragma once

#include "tocol/io.hpp"
#include "tocol/scenario.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <vector>

namespace tocol::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 1;
inline constexpr int kExitNotOptimal = 2;

struct Options {
    fs::path out_dir = ".";
    std::uint64_t seed = 0;
    bool quiet = false;
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

inline Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json vector_json(const Vector& v) {
    Json arr = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(number_or_null(v[i]));
    return arr;
}

inline void save_json(const fs::path& path, const Json& j) { io::write_atomic(path, j.dump(2) + "\n"); }

inline void write_solution_csv(const Solution& sol, const fs::path& path) {
    const SampleTable tab = sample_solution(sol);
    std::vector<std::string> header{"t"};
    for (auto& n : io::indexed_names("x", sol.spec.model.p)) header.push_back(n);
    for (auto& n : io::indexed_names("u", sol.spec.model.q)) header.push_back(n);
    for (auto& n : tab.constraint_names) header.push_back("viol_" + n);
    io::CsvWriter csv(header);
    for (std::size_t i = 0; i < tab.t.size(); ++i) {
        std::vector<std::string> row{io::format_number(tab.t[i])};
        io::append_numbers(row, tab.x[i]);
        io::append_numbers(row, tab.u[i]);
        io::append_numbers(row, tab.constraint_values[i].cwiseMax(0.0));
        csv.row(row);
    }
    csv.save(path);
}

inline void write_grid_csv(const Solution& sol, const fs::path& path) {
    std::vector<std::string> header{"k", "t"};
    for (auto& n : io::indexed_names("x", sol.spec.model.p)) header.push_back(n);
    for (auto& n : io::indexed_names("u", sol.spec.model.q)) header.push_back(n);
    io::CsvWriter csv(header);
    for (int k = 0; k <= sol.spec.N; ++k) {
        const double t = k * sol.dt_star;
        std::vector<std::string> row{std::to_string(k), io::format_number(t)};
        io::append_numbers(row, sol.state.x[static_cast<std::size_t>(k)]);
        io::append_numbers(row, sol.control(t));
        csv.row(row);
    }
    csv.save(path);
}

inline void write_violations_csv(const std::vector<ConstraintViolation>& prof, const fs::path& path) {
    io::CsvWriter csv({"constraint", "max_violation", "argmax_t"});
    for (const auto& v : prof) csv.row({v.name, io::format_number(v.max_violation), io::format_number(v.argmax_t)});
    csv.save(path);
}

inline void write_error_csv(const ErrorProfile& err, const fs::path& path) {
    io::CsvWriter csv({"t", "pointwise_error", "integral_error"});
    for (std::size_t i = 0; i < err.t.size(); ++i) {
        csv.row({io::format_number(err.t[i]), io::format_number(err.pointwise[i]), io::format_number(err.integral[i])});
    }
    csv.save(path);
}

inline Json solver_json(const SolverResult& r) {
    return {{"status", std::string(to_string(r.status))},
            {"iterations", r.iterations},
            {"outer_iterations", r.outer_iterations},
            {"function_evals", r.function_evals},
            {"kkt_residual", number_or_null(r.kkt_residual)},
            {"constraint_violation", number_or_null(r.constraint_violation)}};
}

}  // namespace detail

/// Solves one scenario and writes solution, grid, violation, error and summary files.
inline int cmd_solve(const fs::path& scenario_path, const Options& opt, std::ostream& log = std::cerr) {
    Scenario sc;
    OcpSpec spec;
    try {
        sc = load_scenario(scenario_path);
        spec = sc.build_spec();
    } catch (const ScenarioError& e) {
        log << "error: " << e.what() << '\n';
        return kExitInputError;
    }
    const auto start = std::chrono::steady_clock::now();
    const Solution sol = solve_ocp(spec, sc.solver);
    const double wall = detail::seconds_since(start);
    const DecisionLayout layout = layout_variables(spec);
    const NlpProblem nlp = assemble_nlp(spec);

    Json summary;
    summary["command"] = "solve";
    summary["t_f_star"] = sol.t_f_star;
    summary["dt_star"] = sol.dt_star;
    summary["solver"] = detail::solver_json(sol.solver);
    summary["n_z"] = layout.n_z;
    summary["m_eq"] = nlp.m_eq;
    summary["m_ineq"] = nlp.m_ineq;
    summary["wall_time_s"] = wall;
    summary["terminal_state"] = detail::vector_json(sol.state.x.back());

    const fs::path& out = opt.out_dir;
    detail::write_grid_csv(sol, out / "grid.csv");
    if (sol.solver.usable(sc.solver.constraint_tol)) {
        const auto prof = violation_profile(sol);
        summary["max_intersample_violation"] = max_violation(prof);
        summary["total_variation"] = detail::vector_json(total_variation(sol));
        detail::write_solution_csv(sol, out / "solution.csv");
        detail::write_violations_csv(prof, out / "violations.csv");
        try {
            const ErrorProfile err = dynamics_error(sol);
            summary["dynamics_error"] = {{"integral", err.final_error()}, {"terminal_mismatch", err.terminal_mismatch}};
            detail::write_error_csv(err, out / "dynamics_error.csv");
        } catch (const PropagationError& e) {
            summary["dynamics_error"] = {{"failure", e.what()}, {"last_valid_time", e.last_valid_time()}};
        }
    }
    summary["scenario"] = to_json(sc);
    detail::save_json(out / "summary.json", summary);

    if (!opt.quiet) {
        log << "status " << to_string(sol.solver.status) << "  t_f* = " << io::format_number(sol.t_f_star)
            << "  iterations " << sol.solver.iterations << '\n';
    }
    return sol.solver.status == SolverStatus::optimal ? kExitOk : kExitNotOptimal;
}

inline void write_closed_loop_csv(const ClosedLoopLog& log, int p, const fs::path& path) {
    std::vector<std::string> header{"n", "t_n"};
    for (auto& n : io::indexed_names("x", p)) header.push_back(n);
    for (const char* c : {"N_n", "dt_star", "t_f_star", "status", "wall_time_s"}) header.emplace_back(c);
    for (auto& n : io::indexed_names("x_pred_next", p)) header.push_back(n);
    io::CsvWriter csv(header);
    for (const StepRecord& r : log.steps) {
        std::vector<std::string> row{std::to_string(r.n), io::format_number(r.t)};
        io::append_numbers(row, r.x);
        row.push_back(std::to_string(r.N));
        row.push_back(io::format_number(r.dt_star));
        row.push_back(io::format_number(r.t_f_star));
        row.emplace_back(to_string(r.solver_status));
        row.push_back(io::format_number(r.wall_time));
        io::append_numbers(row, r.predicted_next);
        csv.row(row);
    }
    csv.save(path);
}

/// Runs the shrinking-horizon loop and writes the log plus both stability reports.
inline int cmd_mpc(const fs::path& scenario_path, const Options& opt, std::ostream& log = std::cerr) {
    Scenario sc;
    OcpSpec spec;
    SystemModel plant;
    try {
        sc = load_scenario(scenario_path);
        spec = sc.build_spec();
        if (!sc.mpc) throw ScenarioError("scenario has no \"mpc\" block");
        plant = sc.build_plant();
    } catch (const ScenarioError& e) {
        log << "error: " << e.what() << '\n';
        return kExitInputError;
    }
    const MpcConfig& cfg = sc.mpc->config;
    const ClosedLoopLog cl = run_closed_loop(spec, sc.x_start, plant, cfg);
    const double tol = 1e-3;
    const OptimalityReport opt_rep = check_optimality_principle(cl, tol);
    const LyapunovReport lyap = lyapunov_decrease_report(cl, tol);

    const fs::path& out = opt.out_dir;
    write_closed_loop_csv(cl, spec.model.p, out / "closed_loop.csv");
    {
        io::CsvWriter csv({"n", "deviation", "pass"});
        for (const auto& e : opt_rep.entries) csv.row({std::to_string(e.n), io::format_number(e.deviation), e.pass ? "1" : "0"});
        csv.save(out / "optimality.csv");
    }
    {
        io::CsvWriter csv({"n", "phase", "V", "decrease", "dt_star", "pass"});
        for (const auto& e : lyap.entries) {
            csv.row({std::to_string(e.n), std::string(to_string(e.phase)), io::format_number(e.value),
                     io::format_number(e.decrease), io::format_number(e.dt_star), e.pass ? "1" : "0"});
        }
        csv.save(out / "lyapunov.csv");
    }
    Json summary;
    summary["command"] = "mpc";
    summary["status"] = std::string(to_string(cl.status));
    summary["message"] = cl.message;
    summary["steps"] = cl.steps.size();
    if (!cl.steps.empty()) {
        const StepRecord& last = cl.steps.back();
        summary["final_time"] = last.t;
        summary["final_state"] = detail::vector_json(last.x);
        summary["final_distance"] = spec.target.distance(last.x);
    }
    summary["optimality_principle"] = {{"tolerance", tol}, {"worst_deviation", opt_rep.worst}, {"all_pass", opt_rep.all_pass}};
    summary["lyapunov"] = {{"tolerance", tol}, {"dt_floor_respected", lyap.dt_floor_respected}, {"all_pass", lyap.all_pass}};
    summary["scenario"] = to_json(sc);
    detail::save_json(out / "summary.json", summary);

    if (!opt.quiet) {
        log << "closed loop " << to_string(cl.status) << " after " << cl.steps.size() << " steps";
        if (!cl.message.empty()) log << " (" << cl.message << ")";
        log << '\n';
    }
    return cl.status == ClosedLoopStatus::converged ? kExitOk : kExitNotOptimal;
}

/// Solves the scenario under every control parameterization and both forms.
inline int cmd_compare(const fs::path& scenario_path, const Options& opt, std::ostream& log = std::cerr) {
    Scenario sc;
    OcpSpec base;
    try {
        sc = load_scenario(scenario_path);
        base = sc.build_spec();
    } catch (const ScenarioError& e) {
        log << "error: " << e.what() << '\n';
        return kExitInputError;
    }
    std::vector<std::string> header{"param", "form", "status", "t_f_star", "n_z", "m_eq", "m_ineq", "iterations",
                                    "wall_time_s", "max_intersample_violation"};
    for (auto& n : io::indexed_names("tv_u", base.model.q)) header.push_back(n);
    io::CsvWriter csv(header);
    bool all_ok = true;
    for (ControlParam param : {ControlParam::quadratic, ControlParam::linear, ControlParam::mean, ControlParam::constant}) {
        for (CollocationForm form : {CollocationForm::compressed, CollocationForm::uncompressed}) {
            OcpSpec spec = base;
            spec.param = param;
            spec.form = form;
            const NlpProblem nlp = assemble_nlp(spec);
            std::vector<std::string> row{std::string(to_string(param)), std::string(to_string(form))};
            try {
                const auto start = std::chrono::steady_clock::now();
                const Solution sol = solve_ocp(spec, sc.solver);
                const double wall = detail::seconds_since(start);
                const bool ok = sol.solver.usable(sc.solver.constraint_tol);
                all_ok = all_ok && sol.solver.status == SolverStatus::optimal;
                row.emplace_back(to_string(sol.solver.status));
                row.push_back(io::format_number(sol.t_f_star));
                row.push_back(std::to_string(nlp.n_z));
                row.push_back(std::to_string(nlp.m_eq));
                row.push_back(std::to_string(nlp.m_ineq));
                row.push_back(std::to_string(sol.solver.iterations));
                row.push_back(io::format_number(wall));
                row.push_back(ok ? io::format_number(max_violation(violation_profile(sol))) : "nan");
                if (ok) {
                    io::append_numbers(row, total_variation(sol));
                } else {
                    for (int j = 0; j < base.model.q; ++j) row.emplace_back("nan");
                }
                if (!opt.quiet) {
                    log << to_string(param) << '/' << to_string(form) << ": " << to_string(sol.solver.status)
                        << "  t_f* = " << io::format_number(sol.t_f_star) << '\n';
                }
            } catch (const std::exception& e) {
                all_ok = false;
                row.emplace_back("error");
                row.emplace_back("nan");
                row.push_back(std::to_string(nlp.n_z));
                row.push_back(std::to_string(nlp.m_eq));
                row.push_back(std::to_string(nlp.m_ineq));
                for (int j = 0; j < 3 + base.model.q; ++j) row.emplace_back("nan");
                if (!opt.quiet) log << to_string(param) << '/' << to_string(form) << ": error: " << e.what() << '\n';
            }
            csv.row(row);
        }
    }
    csv.save(opt.out_dir / "compare.csv");
    return all_ok ? kExitOk : kExitNotOptimal;
}

/// Samples start states uniformly in the scenario's sampling box (plus the
/// target itself) and records distance/cost pairs with dt_min = 0.
inline int cmd_bounds(const fs::path& scenario_path, const Options& opt, std::ostream& log = std::cerr) {
    Scenario sc;
    OcpSpec spec;
    try {
        sc = load_scenario(scenario_path);
        spec = sc.build_spec();
        if (!sc.sampling) throw ScenarioError("scenario has no \"sampling\" block");
    } catch (const ScenarioError& e) {
        log << "error: " << e.what() << '\n';
        return kExitInputError;
    }
    spec.dt_min = 0.0;
    std::mt19937_64 rng(opt.seed);
    std::vector<Vector> starts;
    Vector at_target = sc.x_start;
    for (int i = 0; i < spec.target.size(); ++i) {
        if (spec.target.components[i]) at_target[i] = *spec.target.components[i];
    }
    starts.push_back(at_target);
    const SamplingBlock& box = *sc.sampling;
    for (int s = 0; s < box.count; ++s) {
        Vector x(box.lower.size());
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            x[i] = std::uniform_real_distribution<double>(box.lower[i], box.upper[i])(rng);
        }
        starts.push_back(x);
    }
    const CostBoundData data = cost_bound_sampling(spec, starts, sc.solver);

    std::vector<std::string> header;
    for (auto& n : io::indexed_names("x", spec.model.p)) header.push_back(n);
    for (const char* c : {"distance", "t_f_star", "status", "feasible"}) header.emplace_back(c);
    io::CsvWriter csv(header);
    for (const CostSample& s : data.samples) {
        std::vector<std::string> row;
        io::append_numbers(row, s.x_start);
        row.push_back(io::format_number(s.distance));
        row.push_back(io::format_number(s.t_f_star));
        row.emplace_back(to_string(s.status));
        row.emplace_back(s.feasible ? "1" : "0");
        csv.row(row);
    }
    csv.save(opt.out_dir / "bounds.csv");
    Json summary;
    summary["command"] = "bounds";
    summary["seed"] = opt.seed;
    summary["samples"] = data.samples.size();
    summary["infeasible"] = data.infeasible_count;
    summary["scenario"] = to_json(sc);
    detail::save_json(opt.out_dir / "summary.json", summary);
    if (!opt.quiet) log << data.samples.size() << " samples, " << data.infeasible_count << " infeasible\n";
    return kExitOk;
}

}  // namespace tocol::cli
