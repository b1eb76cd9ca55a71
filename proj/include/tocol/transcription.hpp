#pragma once

#include "tocol/systems.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tocol {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Rule resolving the control values used at partition midpoints and ends.
enum class ControlParam { quadratic, linear, mean, constant };

enum class CollocationForm { compressed, uncompressed };

inline std::string_view to_string(ControlParam p) {
    switch (p) {
        case ControlParam::quadratic: return "quadratic";
        case ControlParam::linear: return "linear";
        case ControlParam::mean: return "mean";
        case ControlParam::constant: return "constant";
    }
    return "?";
}

inline std::string_view to_string(CollocationForm f) {
    return f == CollocationForm::compressed ? "compressed" : "uncompressed";
}

inline ControlParam parse_control_param(std::string_view s) {
    if (s == "quadratic") return ControlParam::quadratic;
    if (s == "linear") return ControlParam::linear;
    if (s == "mean") return ControlParam::mean;
    if (s == "constant") return ControlParam::constant;
    throw std::invalid_argument("unknown control parameterization '" + std::string(s) + "'");
}

inline CollocationForm parse_collocation_form(std::string_view s) {
    if (s == "compressed") return CollocationForm::compressed;
    if (s == "uncompressed") return CollocationForm::uncompressed;
    throw std::invalid_argument("unknown collocation form '" + std::string(s) + "'");
}

/// Midpoint controls are free parameters only for the quadratic and linear splines.
inline bool has_midpoint_controls(ControlParam p) {
    return p == ControlParam::quadratic || p == ControlParam::linear;
}

/// Axis-aligned terminal set: each state component is either pinned or free.
struct TargetSpec {
    std::vector<std::optional<double>> components;

    static TargetSpec all_fixed(const Vector& x) {
        TargetSpec t;
        for (Eigen::Index i = 0; i < x.size(); ++i) t.components.emplace_back(x[i]);
        return t;
    }

    int size() const { return static_cast<int>(components.size()); }

    int fixed_count() const {
        return static_cast<int>(std::count_if(components.begin(), components.end(), [](auto& c) { return c.has_value(); }));
    }

    /// Euclidean distance over the fixed components.
    double distance(const Vector& x) const {
        double acc = 0.0;
        for (int i = 0; i < size(); ++i) {
            if (components[i]) acc += (x[i] - *components[i]) * (x[i] - *components[i]);
        }
        return std::sqrt(acc);
    }
};

/// Full data of the minimum-time collocation program.
struct OcpSpec {
    SystemModel model;
    Vector x_start;
    TargetSpec target;
    Vector x_lower;  // may contain -inf
    Vector x_upper;  // may contain +inf
    Vector u_lower;
    Vector u_upper;
    /// Optional g(x) <= 0, evaluated at every state point k = 0.5, 1, ..., N.
    std::function<Vector(const Vector&)> path_ineq;
    int n_path = 0;
    int N = 10;
    double dt_min = 0.0;
    double dt_max = kInf;
    ControlParam param = ControlParam::constant;
    CollocationForm form = CollocationForm::compressed;
    /// Initial-guess heuristic: assumed transition time per unit of target distance.
    double time_per_distance = 1.0;

    /// Fills unset bounds with +-inf and checks consistency.
    void validate() {
        const int p = model.p;
        const int q = model.q;
        if (p < 1 || q < 1 || !model.f) throw std::invalid_argument("ocp: model is incomplete");
        if (x_start.size() != p) throw std::invalid_argument("ocp: x_start has wrong dimension");
        if (target.size() != p) throw std::invalid_argument("ocp: target has wrong dimension");
        if (target.fixed_count() == 0) throw std::invalid_argument("ocp: target must fix at least one component");
        if (x_lower.size() == 0) x_lower = Vector::Constant(p, -kInf);
        if (x_upper.size() == 0) x_upper = Vector::Constant(p, kInf);
        if (x_lower.size() != p || x_upper.size() != p) throw std::invalid_argument("ocp: state bounds have wrong dimension");
        if (u_lower.size() != q || u_upper.size() != q) throw std::invalid_argument("ocp: control bounds have wrong dimension");
        for (int j = 0; j < q; ++j) {
            if (!std::isfinite(u_lower[j]) || !std::isfinite(u_upper[j]) || !(u_lower[j] < u_upper[j])) {
                throw std::invalid_argument("ocp: control bounds must be finite with lower < upper");
            }
        }
        for (int i = 0; i < p; ++i) {
            if (!(x_lower[i] <= x_upper[i])) throw std::invalid_argument("ocp: state lower bound exceeds upper bound");
            if (x_start[i] < x_lower[i] || x_start[i] > x_upper[i]) {
                throw std::invalid_argument("ocp: x_start violates the state bounds");
            }
            if (target.components[i] && (*target.components[i] < x_lower[i] || *target.components[i] > x_upper[i])) {
                throw std::invalid_argument("ocp: fixed target component outside the state bounds");
            }
        }
        if (N < 1) throw std::invalid_argument("ocp: N must be >= 1");
        if (!(dt_min >= 0.0) || !(dt_min <= dt_max)) throw std::invalid_argument("ocp: need 0 <= dt_min <= dt_max");
        if (path_ineq && n_path < 1) throw std::invalid_argument("ocp: path_ineq given without n_path");
        if (!path_ineq) n_path = 0;
        if (!(time_per_distance > 0.0)) throw std::invalid_argument("ocp: time_per_distance must be positive");
    }
};

/// Offsets of every decision variable in the flat vector [dt | states | controls].
///
/// States and controls are stored in increasing time order; when midpoints
/// are present they are interleaved (x_0, x_0.5, x_1, ...).
struct DecisionLayout {
    int p = 0;
    int q = 0;
    int N = 0;
    bool state_midpoints = false;
    ControlParam param = ControlParam::constant;
    int n_z = 0;

    static constexpr int dt_offset = 0;

    int state_count() const { return state_midpoints ? 2 * N + 1 : N + 1; }

    int control_count() const {
        switch (param) {
            case ControlParam::quadratic:
            case ControlParam::linear: return 2 * N + 1;
            case ControlParam::mean: return N + 1;
            case ControlParam::constant: return N;
        }
        return 0;
    }

    int state_offset(int k) const { return 1 + p * (state_midpoints ? 2 * k : k); }

    int mid_state_offset(int k) const {
        if (!state_midpoints) throw std::logic_error("layout: no midpoint state variables in compressed form");
        return 1 + p * (2 * k + 1);
    }

    int control_base() const { return 1 + p * state_count(); }

    int control_offset(int k) const {
        if (param == ControlParam::constant && k >= N) throw std::out_of_range("layout: constant controls end at N-1");
        return control_base() + q * (has_midpoint_controls(param) ? 2 * k : k);
    }

    int mid_control_offset(int k) const {
        if (!has_midpoint_controls(param)) throw std::logic_error("layout: no midpoint control variables");
        return control_base() + q * (2 * k + 1);
    }
};

inline DecisionLayout layout_variables(const OcpSpec& spec) {
    DecisionLayout l;
    l.p = spec.model.p;
    l.q = spec.model.q;
    l.N = spec.N;
    l.state_midpoints = spec.form == CollocationForm::uncompressed;
    l.param = spec.param;
    l.n_z = 1 + l.p * l.state_count() + l.q * l.control_count();
    return l;
}

/// Simpson increment  (dt/6) (f(x_k,u_k) + 4 f(x_mid,u_mid) + f(x_k1,u_k1)).
inline Vector simpson_quadrature(const SystemModel& model, const Vector& x_k, const Vector& u_k, const Vector& x_mid,
                                 const Vector& u_mid, const Vector& x_k1, const Vector& u_k1, double dt) {
    return (dt / 6.0) *
           (eval_dynamics(model, x_k, u_k) + 4.0 * eval_dynamics(model, x_mid, u_mid) + eval_dynamics(model, x_k1, u_k1));
}

/// Midpoint of the quadratic state interpolant through both partition ends.
inline Vector hermite_midpoint(const SystemModel& model, const Vector& x_k, const Vector& u_k, const Vector& x_k1,
                               const Vector& u_k1, double dt) {
    return 0.5 * (x_k + x_k1) + (dt / 8.0) * (eval_dynamics(model, x_k, u_k) - eval_dynamics(model, x_k1, u_k1));
}

/// Read-only view of one partition of a decision vector.
struct PartitionView {
    double dt;
    Vector x_k;
    Vector x_k1;
    Vector x_mid;  // decision variable; empty in compressed form
    Vector u_k;
    Vector u_mid;  // placeholder value for the midpoint control
    Vector u_k1;   // placeholder value for the end control
};

inline PartitionView partition_view(const DecisionLayout& l, const Vector& z, int k) {
    PartitionView v;
    v.dt = z[DecisionLayout::dt_offset];
    v.x_k = z.segment(l.state_offset(k), l.p);
    v.x_k1 = z.segment(l.state_offset(k + 1), l.p);
    if (l.state_midpoints) v.x_mid = z.segment(l.mid_state_offset(k), l.p);
    v.u_k = z.segment(l.control_offset(k), l.q);
    switch (l.param) {
        case ControlParam::quadratic:
        case ControlParam::linear:
            v.u_mid = z.segment(l.mid_control_offset(k), l.q);
            v.u_k1 = z.segment(l.control_offset(k + 1), l.q);
            break;
        case ControlParam::mean:
            v.u_k1 = z.segment(l.control_offset(k + 1), l.q);
            v.u_mid = 0.5 * (v.u_k + v.u_k1);
            break;
        case ControlParam::constant:
            v.u_mid = v.u_k;
            v.u_k1 = v.u_k;
            break;
    }
    return v;
}

/// State at the middle of partition k: the decision variable when uncompressed,
/// the Hermite interpolant otherwise.
inline Vector midpoint_state(const SystemModel& model, const PartitionView& v) {
    if (v.x_mid.size() > 0) return v.x_mid;
    return hermite_midpoint(model, v.x_k, v.u_k, v.x_k1, v.u_k1, v.dt);
}

inline void check_layout(const DecisionLayout& l, const Vector& z) {
    if (z.size() != l.n_z) {
        throw std::invalid_argument("decision vector has length " + std::to_string(z.size()) + ", layout expects " +
                                    std::to_string(l.n_z));
    }
}

/// Collocation residuals, one block per partition. Each block holds the
/// Simpson defect x_{k+1} - x_k - xi and, in uncompressed form, the midpoint
/// consistency residual.
inline Vector collocation_defects(const OcpSpec& spec, const DecisionLayout& l, const Vector& z) {
    check_layout(l, z);
    const int p = l.p;
    const int block = l.state_midpoints ? 2 * p : p;
    Vector d(block * l.N);
    for (int k = 0; k < l.N; ++k) {
        const PartitionView v = partition_view(l, z, k);
        const Vector f_k = eval_dynamics(spec.model, v.x_k, v.u_k);
        const Vector f_k1 = eval_dynamics(spec.model, v.x_k1, v.u_k1);
        const Vector hermite = 0.5 * (v.x_k + v.x_k1) + (v.dt / 8.0) * (f_k - f_k1);
        const Vector& x_mid = l.state_midpoints ? v.x_mid : hermite;
        const Vector f_mid = eval_dynamics(spec.model, x_mid, v.u_mid);
        d.segment(block * k, p) = v.x_k1 - v.x_k - (v.dt / 6.0) * (f_k + 4.0 * f_mid + f_k1);
        if (l.state_midpoints) d.segment(block * k + p, p) = v.x_mid - hermite;
    }
    return d;
}

inline Vector collocation_defects(const OcpSpec& spec, const Vector& z) {
    return collocation_defects(spec, layout_variables(spec), z);
}

using SparsityPattern = std::vector<std::pair<int, int>>;

/// Transcribed nonlinear program:  min cost(z)  s.t.  eq(z) = 0,  ineq(z) <= 0,  lower <= z <= upper.
struct NlpProblem {
    int n_z = 0;
    int m_eq = 0;
    int m_ineq = 0;
    std::function<double(const Vector&)> cost;
    std::function<Vector(const Vector&)> eq_con;
    std::function<Vector(const Vector&)> ineq_con;
    Vector lower;
    Vector upper;
    /// Structural nonzeros of the stacked constraint Jacobian [d eq/dz ; d ineq/dz].
    SparsityPattern jac_sparsity;
    /// Columns the cost depends on.
    std::vector<int> cost_sparsity;
};

namespace detail {

struct InequalityRow {
    enum class Kind { mid_lower, mid_upper, path_mid, path_grid } kind;
    int k;          // partition (midpoint rows) or grid index (path_grid)
    int component;  // state component or path-constraint index
};

inline std::vector<InequalityRow> inequality_rows(const OcpSpec& spec) {
    std::vector<InequalityRow> rows;
    const bool compressed = spec.form == CollocationForm::compressed;
    for (int k = 0; k < spec.N; ++k) {
        if (compressed) {
            for (int i = 0; i < spec.model.p; ++i) {
                if (std::isfinite(spec.x_lower[i])) rows.push_back({InequalityRow::Kind::mid_lower, k, i});
                if (std::isfinite(spec.x_upper[i])) rows.push_back({InequalityRow::Kind::mid_upper, k, i});
            }
        }
        for (int j = 0; j < spec.n_path; ++j) rows.push_back({InequalityRow::Kind::path_mid, k, j});
        for (int j = 0; j < spec.n_path; ++j) rows.push_back({InequalityRow::Kind::path_grid, k + 1, j});
    }
    return rows;
}

inline std::vector<int> control_columns(const DecisionLayout& l, int k, bool include_mid) {
    std::vector<int> cols;
    auto add = [&](int off) {
        for (int j = 0; j < l.q; ++j) cols.push_back(off + j);
    };
    add(l.control_offset(k));
    switch (l.param) {
        case ControlParam::quadratic:
        case ControlParam::linear:
            if (include_mid) add(l.mid_control_offset(k));
            add(l.control_offset(k + 1));
            break;
        case ControlParam::mean: add(l.control_offset(k + 1)); break;
        case ControlParam::constant: break;
    }
    return cols;
}

// Columns of the Hermite midpoint interpolant of partition k.
inline std::vector<int> hermite_columns(const DecisionLayout& l, int k) {
    std::vector<int> cols{DecisionLayout::dt_offset};
    for (int i = 0; i < l.p; ++i) cols.push_back(l.state_offset(k) + i);
    for (int i = 0; i < l.p; ++i) cols.push_back(l.state_offset(k + 1) + i);
    for (int c : control_columns(l, k, false)) cols.push_back(c);
    return cols;
}

}  // namespace detail

/// Structural Jacobian pattern of the stacked constraints, rows ordered as in
/// assemble_nlp: defects, terminal equalities, then inequalities.
inline SparsityPattern sparsity_pattern(const OcpSpec& spec) {
    const DecisionLayout l = layout_variables(spec);
    const int p = l.p;
    SparsityPattern pat;
    int row = 0;
    for (int k = 0; k < l.N; ++k) {
        std::vector<int> cols = detail::hermite_columns(l, k);
        if (has_midpoint_controls(l.param)) {
            for (int j = 0; j < l.q; ++j) cols.push_back(l.mid_control_offset(k) + j);
        }
        if (l.state_midpoints) {
            for (int i = 0; i < p; ++i) cols.push_back(l.mid_state_offset(k) + i);
        }
        std::sort(cols.begin(), cols.end());
        for (int i = 0; i < p; ++i, ++row) {
            for (int c : cols) pat.emplace_back(row, c);
        }
        if (l.state_midpoints) {
            std::vector<int> mid_cols = detail::hermite_columns(l, k);
            for (int i = 0; i < p; ++i) mid_cols.push_back(l.mid_state_offset(k) + i);
            std::sort(mid_cols.begin(), mid_cols.end());
            for (int i = 0; i < p; ++i, ++row) {
                for (int c : mid_cols) pat.emplace_back(row, c);
            }
        }
    }
    for (int i = 0; i < p; ++i) {
        if (spec.target.components[i]) pat.emplace_back(row++, l.state_offset(l.N) + i);
    }
    for (const auto& r : detail::inequality_rows(spec)) {
        using Kind = detail::InequalityRow::Kind;
        std::vector<int> cols;
        if (r.kind == Kind::path_grid) {
            for (int i = 0; i < p; ++i) cols.push_back(l.state_offset(r.k) + i);
        } else if (l.state_midpoints) {
            for (int i = 0; i < p; ++i) cols.push_back(l.mid_state_offset(r.k) + i);
        } else {
            cols = detail::hermite_columns(l, r.k);
        }
        std::sort(cols.begin(), cols.end());
        for (int c : cols) pat.emplace_back(row, c);
        ++row;
    }
    return pat;
}

/// Builds the minimum-time program  min N*dt  for a validated spec.
inline NlpProblem assemble_nlp(const OcpSpec& spec) {
    const DecisionLayout l = layout_variables(spec);
    const int p = l.p;
    const int q = l.q;
    NlpProblem nlp;
    nlp.n_z = l.n_z;

    std::vector<int> fixed;
    for (int i = 0; i < p; ++i) {
        if (spec.target.components[i]) fixed.push_back(i);
    }
    const int block = l.state_midpoints ? 2 * p : p;
    nlp.m_eq = block * l.N + static_cast<int>(fixed.size());
    const auto ineq_rows = detail::inequality_rows(spec);
    nlp.m_ineq = static_cast<int>(ineq_rows.size());

    const double horizon = spec.N;
    nlp.cost = [horizon](const Vector& z) { return horizon * z[DecisionLayout::dt_offset]; };
    nlp.cost_sparsity = {DecisionLayout::dt_offset};

    nlp.eq_con = [spec, l, fixed, m = nlp.m_eq](const Vector& z) {
        Vector c(m);
        const Vector d = collocation_defects(spec, l, z);
        c.head(d.size()) = d;
        const int base = l.state_offset(l.N);
        for (std::size_t j = 0; j < fixed.size(); ++j) {
            c[d.size() + static_cast<Eigen::Index>(j)] = z[base + fixed[j]] - *spec.target.components[fixed[j]];
        }
        return c;
    };

    nlp.ineq_con = [spec, l, ineq_rows](const Vector& z) {
        check_layout(l, z);
        using Kind = detail::InequalityRow::Kind;
        Vector c(static_cast<Eigen::Index>(ineq_rows.size()));
        int cached_k = -1;
        Vector x_mid;
        Vector g_mid;
        Vector g_grid;
        int grid_k = -1;
        for (std::size_t r = 0; r < ineq_rows.size(); ++r) {
            const auto& row = ineq_rows[r];
            if (row.kind != Kind::path_grid && row.k != cached_k) {
                x_mid = midpoint_state(spec.model, partition_view(l, z, row.k));
                if (spec.n_path > 0) g_mid = spec.path_ineq(x_mid);
                cached_k = row.k;
            }
            switch (row.kind) {
                case Kind::mid_lower: c[r] = spec.x_lower[row.component] - x_mid[row.component]; break;
                case Kind::mid_upper: c[r] = x_mid[row.component] - spec.x_upper[row.component]; break;
                case Kind::path_mid: c[r] = g_mid[row.component]; break;
                case Kind::path_grid:
                    if (row.k != grid_k) {
                        g_grid = spec.path_ineq(z.segment(l.state_offset(row.k), l.p));
                        grid_k = row.k;
                    }
                    c[r] = g_grid[row.component];
                    break;
            }
        }
        return c;
    };

    nlp.lower = Vector::Constant(l.n_z, -kInf);
    nlp.upper = Vector::Constant(l.n_z, kInf);
    nlp.lower[DecisionLayout::dt_offset] = spec.dt_min;
    nlp.upper[DecisionLayout::dt_offset] = spec.dt_max;
    nlp.lower.segment(l.state_offset(0), p) = spec.x_start;
    nlp.upper.segment(l.state_offset(0), p) = spec.x_start;
    for (int k = 1; k <= l.N; ++k) {
        nlp.lower.segment(l.state_offset(k), p) = spec.x_lower;
        nlp.upper.segment(l.state_offset(k), p) = spec.x_upper;
    }
    if (l.state_midpoints) {
        for (int k = 0; k < l.N; ++k) {
            nlp.lower.segment(l.mid_state_offset(k), p) = spec.x_lower;
            nlp.upper.segment(l.mid_state_offset(k), p) = spec.x_upper;
        }
    }
    for (int j = 0; j < l.control_count(); ++j) {
        nlp.lower.segment(l.control_base() + q * j, q) = spec.u_lower;
        nlp.upper.segment(l.control_base() + q * j, q) = spec.u_upper;
    }

    nlp.jac_sparsity = sparsity_pattern(spec);
    return nlp;
}

inline constexpr double kDtGuessFloor = 1e-3;

/// Straight-line state guess towards the target, mid-box controls.
inline Vector initial_guess(const OcpSpec& spec) {
    const DecisionLayout l = layout_variables(spec);
    const int p = l.p;
    Vector z = Vector::Zero(l.n_z);

    Vector x_end = spec.x_start;
    for (int i = 0; i < p; ++i) {
        if (spec.target.components[i]) x_end[i] = *spec.target.components[i];
    }
    const double dist = spec.target.distance(spec.x_start);
    const double t_guess = spec.time_per_distance * dist;
    const double floor = spec.dt_min > 0.0 ? spec.dt_min : kDtGuessFloor;
    z[DecisionLayout::dt_offset] = std::clamp(std::max(t_guess / spec.N, floor), spec.dt_min, spec.dt_max);

    auto lerp = [&](double s) -> Vector {
        Vector x = spec.x_start + s * (x_end - spec.x_start);
        return x.cwiseMax(spec.x_lower).cwiseMin(spec.x_upper);
    };
    for (int k = 0; k <= l.N; ++k) z.segment(l.state_offset(k), p) = lerp(static_cast<double>(k) / l.N);
    z.segment(l.state_offset(0), p) = spec.x_start;
    if (l.state_midpoints) {
        for (int k = 0; k < l.N; ++k) z.segment(l.mid_state_offset(k), p) = lerp((k + 0.5) / l.N);
    }
    const Vector u_mid = 0.5 * (spec.u_lower + spec.u_upper);
    for (int j = 0; j < l.control_count(); ++j) z.segment(l.control_base() + l.q * j, l.q) = u_mid;
    return z;
}

}  // namespace tocol
