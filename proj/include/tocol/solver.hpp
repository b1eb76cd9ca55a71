#pragma once

#include "tocol/transcription.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace tocol {

struct SolverConfig {
    double kkt_tol = 1e-6;
    double constraint_tol = 1e-6;
    int max_outer_iters = 50;
    int max_inner_iters = 200;
    double penalty_init = 10.0;
    double penalty_growth = 10.0;
    double fd_step = 1e-7;  // relative: h_i = fd_step * (1 + |z_i|)
    double penalty_max = 1e10;

    void validate() const {
        if (!(kkt_tol > 0) || !(constraint_tol > 0) || max_outer_iters < 1 || max_inner_iters < 1 ||
            !(penalty_init > 0) || !(penalty_growth > 1) || !(fd_step > 0) || !(penalty_max >= penalty_init)) {
            throw std::invalid_argument("solver config: tolerances and counters must be positive, penalty_growth > 1");
        }
    }
};

enum class SolverStatus { optimal, max_iters, infeasible, numerical_failure };

inline std::string_view to_string(SolverStatus s) {
    switch (s) {
        case SolverStatus::optimal: return "optimal";
        case SolverStatus::max_iters: return "max_iters";
        case SolverStatus::infeasible: return "infeasible";
        case SolverStatus::numerical_failure: return "numerical_failure";
    }
    return "?";
}

/// Diagnostics of one augmented-Lagrangian outer iteration.
struct OuterRecord {
    double violation;
    double penalty;
    double kkt;
    int inner_iterations;
};

struct SolverResult {
    Vector z_opt;
    Vector lambda_eq;
    Vector mu_ineq;
    SolverStatus status = SolverStatus::numerical_failure;
    double kkt_residual = kInf;
    double constraint_violation = kInf;
    int iterations = 0;  // inner iterations summed over all outer iterations
    int outer_iterations = 0;
    long function_evals = 0;
    std::vector<OuterRecord> history;
    /// Every accepted inner iterate, recorded only when requested.
    std::vector<Vector> trace;

    /// Optimal, or stopped on an iteration cap at a point that satisfies the constraints.
    bool usable(double constraint_tol) const {
        return status == SolverStatus::optimal ||
               (status == SolverStatus::max_iters && constraint_violation <= constraint_tol);
    }
};

using SparseMatrix = Eigen::SparseMatrix<double>;

// ---------------------------------------------------------------------------
// Sparse finite differences

/// Columns grouped so that no two columns in a group share a nonzero row.
struct ColumnGroups {
    std::vector<std::vector<int>> groups;
    std::vector<std::vector<int>> rows_of_col;
    int n_rows = 0;
    int n_cols = 0;
};

/// Greedy distance-1 colouring of the column intersection graph.
inline ColumnGroups color_columns(const SparsityPattern& pattern, int n_rows, int n_cols) {
    ColumnGroups cg;
    cg.n_rows = n_rows;
    cg.n_cols = n_cols;
    cg.rows_of_col.assign(n_cols, {});
    std::vector<std::vector<int>> cols_of_row(n_rows);
    for (auto [r, c] : pattern) {
        if (r < 0 || r >= n_rows || c < 0 || c >= n_cols) throw std::out_of_range("sparsity pattern entry out of range");
        cg.rows_of_col[c].push_back(r);
        cols_of_row[r].push_back(c);
    }
    for (auto& rows : cg.rows_of_col) {
        std::sort(rows.begin(), rows.end());
        rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    }
    for (auto& cols : cols_of_row) {
        std::sort(cols.begin(), cols.end());
        cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
    }

    std::vector<int> color(n_cols, -1);
    std::vector<int> stamp;
    for (int c = 0; c < n_cols; ++c) {
        if (cg.rows_of_col[c].empty()) continue;
        for (int r : cg.rows_of_col[c]) {
            for (int other : cols_of_row[r]) {
                if (color[other] >= 0) {
                    if (static_cast<int>(stamp.size()) <= color[other]) stamp.resize(color[other] + 1, -1);
                    stamp[color[other]] = c;
                }
            }
        }
        int chosen = 0;
        while (chosen < static_cast<int>(stamp.size()) && stamp[chosen] == c) ++chosen;
        color[c] = chosen;
        if (static_cast<int>(cg.groups.size()) <= chosen) cg.groups.resize(chosen + 1);
        cg.groups[chosen].push_back(c);
    }
    return cg;
}

namespace detail {

inline double fd_increment(double z, double lower, double upper, double rel_step) {
    const double h = rel_step * (1.0 + std::abs(z));
    if (z + h > upper && z - h >= lower) return -h;
    return h;
}

}  // namespace detail

/// Forward-difference Jacobian of `fn` at z, one evaluation per column group.
template <typename Fn>
SparseMatrix fd_jacobian(Fn&& fn, const Vector& z, const Vector& f0, const ColumnGroups& cg, double rel_step,
                         const Vector* lower = nullptr, const Vector* upper = nullptr, long* evals = nullptr) {
    std::vector<Eigen::Triplet<double>> trips;
    Vector probe = z;
    Vector steps(z.size());
    for (const auto& group : cg.groups) {
        for (int c : group) {
            const double lo = lower ? (*lower)[c] : -kInf;
            const double hi = upper ? (*upper)[c] : kInf;
            steps[c] = detail::fd_increment(z[c], lo, hi, rel_step);
            probe[c] = z[c] + steps[c];
        }
        const Vector f1 = fn(probe);
        if (evals) ++*evals;
        for (int c : group) {
            const double h = probe[c] - z[c];
            for (int r : cg.rows_of_col[c]) trips.emplace_back(r, c, (f1[r] - f0[r]) / h);
            probe[c] = z[c];
        }
    }
    SparseMatrix jac(cg.n_rows, cg.n_cols);
    jac.setFromTriplets(trips.begin(), trips.end());
    return jac;
}

/// Stacked constraints [eq; ineq]; non-finite output when the model rejects z.
inline Vector stacked_constraints(const NlpProblem& nlp, const Vector& z) {
    Vector c(nlp.m_eq + nlp.m_ineq);
    try {
        if (nlp.m_eq > 0) c.head(nlp.m_eq) = nlp.eq_con(z);
        if (nlp.m_ineq > 0) c.tail(nlp.m_ineq) = nlp.ineq_con(z);
    } catch (const std::domain_error&) {
        c.setConstant(std::numeric_limits<double>::quiet_NaN());
    }
    return c;
}

inline SparseMatrix fd_jacobian(const NlpProblem& nlp, const Vector& z, const SparsityPattern& pattern,
                                double rel_step = 1e-7) {
    const ColumnGroups cg = color_columns(pattern, nlp.m_eq + nlp.m_ineq, nlp.n_z);
    const Vector c0 = stacked_constraints(nlp, z);
    return fd_jacobian([&](const Vector& x) { return stacked_constraints(nlp, x); }, z, c0, cg, rel_step, &nlp.lower,
                       &nlp.upper);
}

namespace detail {

inline double safe_cost(const NlpProblem& nlp, const Vector& z) {
    try {
        return nlp.cost(z);
    } catch (const std::domain_error&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

inline Vector fd_gradient(const NlpProblem& nlp, const Vector& z, double f0, double rel_step, long* evals) {
    Vector g = Vector::Zero(z.size());
    Vector probe = z;
    for (int c : nlp.cost_sparsity) {
        const double h = fd_increment(z[c], nlp.lower[c], nlp.upper[c], rel_step);
        probe[c] = z[c] + h;
        g[c] = (safe_cost(nlp, probe) - f0) / (probe[c] - z[c]);
        probe[c] = z[c];
        if (evals) ++*evals;
    }
    return g;
}

inline double kkt_from_parts(const NlpProblem& nlp, const Vector& z, const Vector& grad_f, const SparseMatrix& jac,
                             const Vector& c, const Vector& lambda_eq, const Vector& mu_ineq) {
    Vector mult(nlp.m_eq + nlp.m_ineq);
    mult << lambda_eq, mu_ineq;
    const Vector grad_l = grad_f + jac.transpose() * mult;
    const Vector projected = (z - grad_l).cwiseMax(nlp.lower).cwiseMin(nlp.upper);
    double r = (z - projected).lpNorm<Eigen::Infinity>();
    for (int i = 0; i < nlp.m_eq; ++i) r = std::max(r, std::abs(c[i]));
    for (int i = 0; i < nlp.m_ineq; ++i) {
        const double ci = c[nlp.m_eq + i];
        const double mi = mu_ineq[i];
        r = std::max({r, ci, -mi, std::abs(mi * ci)});
    }
    return r;
}

inline double violation(const NlpProblem& nlp, const Vector& c) {
    double v = 0.0;
    for (int i = 0; i < nlp.m_eq; ++i) v = std::max(v, std::abs(c[i]));
    for (int i = 0; i < nlp.m_ineq; ++i) v = std::max(v, c[nlp.m_eq + i]);
    return v;
}

}  // namespace detail

namespace detail {

// Central differences, one-sided where the symmetric step would leave the box.
template <typename Fn>
SparseMatrix central_jacobian(Fn&& fn, const Vector& z, const ColumnGroups& cg, double rel_step, const Vector& lower,
                              const Vector& upper) {
    std::vector<Eigen::Triplet<double>> trips;
    Vector plus = z;
    Vector minus = z;
    for (const auto& group : cg.groups) {
        for (int c : group) {
            const double h = rel_step * (1.0 + std::abs(z[c]));
            plus[c] = std::min(z[c] + h, upper[c]);
            minus[c] = std::max(z[c] - h, lower[c]);
        }
        const Vector fp = fn(plus);
        const Vector fm = fn(minus);
        for (int c : group) {
            const double width = plus[c] - minus[c];
            if (width > 0.0) {
                for (int r : cg.rows_of_col[c]) trips.emplace_back(r, c, (fp[r] - fm[r]) / width);
            }
            plus[c] = minus[c] = z[c];
        }
    }
    SparseMatrix jac(cg.n_rows, cg.n_cols);
    jac.setFromTriplets(trips.begin(), trips.end());
    return jac;
}

}  // namespace detail

/// Infinity norm of projected Lagrangian stationarity, complementarity and
/// primal infeasibility. Inequalities follow the convention ineq(z) <= 0.
/// Derivatives are central differences.
inline double kkt_residual(const NlpProblem& nlp, const Vector& z, const Vector& lambda_eq, const Vector& mu_ineq,
                           double rel_step = 1e-6) {
    if (lambda_eq.size() != nlp.m_eq || mu_ineq.size() != nlp.m_ineq) {
        throw std::invalid_argument("kkt_residual: multiplier sizes do not match the constraint counts");
    }
    const ColumnGroups cost_cols = color_columns([&] {
        SparsityPattern pat;
        for (int c : nlp.cost_sparsity) pat.emplace_back(0, c);
        return pat;
    }(), 1, nlp.n_z);
    auto cost_vec = [&](const Vector& x) { return Vector::Constant(1, detail::safe_cost(nlp, x)); };
    const SparseMatrix grad_row = detail::central_jacobian(cost_vec, z, cost_cols, rel_step, nlp.lower, nlp.upper);
    const Vector grad = Matrix(grad_row).transpose().col(0);
    const ColumnGroups cg = color_columns(nlp.jac_sparsity, nlp.m_eq + nlp.m_ineq, nlp.n_z);
    const SparseMatrix jac = detail::central_jacobian([&](const Vector& x) { return stacked_constraints(nlp, x); }, z,
                                                      cg, rel_step, nlp.lower, nlp.upper);
    const Vector c = stacked_constraints(nlp, z);
    return detail::kkt_from_parts(nlp, z, grad, jac, c, lambda_eq, mu_ineq);
}

// ---------------------------------------------------------------------------
// Augmented Lagrangian

namespace detail {

// Works on w = [z; s] with inequality slacks s >= 0, so that every
// constraint becomes h(w) = c(z) + [0; s] = 0.
class AugmentedLagrangian {
public:
    AugmentedLagrangian(const NlpProblem& nlp, const SolverConfig& cfg, bool record_trace)
        : nlp_(nlp),
          cfg_(cfg),
          record_trace_(record_trace),
          n_(nlp.n_z),
          mi_(nlp.m_ineq),
          m_(nlp.m_eq + nlp.m_ineq),
          groups_(color_columns(nlp.jac_sparsity, m_, n_)) {
        lower_.resize(n_ + mi_);
        upper_.resize(n_ + mi_);
        lower_ << nlp.lower, Vector::Zero(mi_);
        upper_ << nlp.upper, Vector::Constant(mi_, kInf);
    }

    SolverResult run(const Vector& z0) {
        SolverResult res;
        if (z0.size() != n_) throw std::invalid_argument("solve: initial guess has wrong length");
        if (nlp_.lower.size() != n_ || nlp_.upper.size() != n_) throw std::invalid_argument("solve: bounds have wrong length");

        Vector z = z0.cwiseMax(nlp_.lower).cwiseMin(nlp_.upper);
        Point pt;
        pt.w.resize(n_ + mi_);
        pt.w.head(n_) = z;
        pt.c = stacked_constraints(nlp_, z);
        pt.f = safe_cost(nlp_, z);
        ++evals_;
        if (!std::isfinite(pt.f) || !pt.c.allFinite()) {
            res.z_opt = z;
            res.status = SolverStatus::numerical_failure;
            res.function_evals = evals_;
            return res;
        }
        if (mi_ > 0) pt.w.tail(mi_) = (-pt.c.tail(mi_)).cwiseMax(0.0);

        lambda_ = Vector::Zero(m_);
        bfgs_ = Matrix::Identity(n_, n_);

        // Objective scaled to unit gradient norm at the start point.
        differentiate(pt);
        obj_scale_ = 1.0 / std::max(1.0, pt.grad_f.lpNorm<Eigen::Infinity>());

        // Feasibility phase: min 0.5 |h|^2 over the box, cost ignored.
        objective_weight_ = 0.0;
        rho_ = 1.0;
        bfgs_ = 1e-6 * Matrix::Identity(n_, n_);
        const int feas_iters = minimize(pt, 0.1 * cfg_.constraint_tol, res, cfg_.constraint_tol);
        res.iterations += feas_iters;
        objective_weight_ = 1.0;
        bfgs_ = Matrix::Identity(n_, n_);
        differentiate(pt);
        lambda_ = least_squares_multipliers(pt);

        rho_ = cfg_.penalty_init;
        double omega = 1.0 / rho_;
        double eta = 1.0 / std::pow(rho_, 0.1);
        const double omega_floor = 0.1 * cfg_.kkt_tol;
        const double eta_floor = 0.1 * cfg_.constraint_tol;

        // Least-violating accepted iterate; restart point when the penalty
        // iteration stalls at a spurious stationary point of the merit.
        Point anchor = pt;
        Vector anchor_lambda = lambda_;
        double anchor_violation = violation(nlp_, pt.c);
        double last_violation = kInf;

        double prev_violation = kInf;
        double violation_at_growth = kInf;
        int stalled_growths = 0;
        double best_score = kInf;
        res.status = SolverStatus::max_iters;

        for (int outer = 0; outer < cfg_.max_outer_iters; ++outer) {
            differentiate(pt);
            const int inner = minimize(pt, omega, res);
            res.iterations += inner;
            ++res.outer_iterations;

            const Vector h = residual(pt);
            const Vector mult = lambda_ + rho_ * h;
            const Vector lam_eq = mult.head(nlp_.m_eq) / obj_scale_;
            const Vector mu = mult.tail(mi_).cwiseMax(0.0) / obj_scale_;
            const double viol = violation(nlp_, pt.c);
            const double kkt = kkt_from_parts(nlp_, pt.w.head(n_), pt.grad_f, pt.jac, pt.c, lam_eq, mu);
            res.history.push_back({viol, rho_, kkt, inner});

            const double score = std::max(viol / cfg_.constraint_tol, kkt / cfg_.kkt_tol);
            if (score <= best_score) {
                best_score = score;
                res.z_opt = pt.w.head(n_);
                res.lambda_eq = lam_eq;
                res.mu_ineq = mu;
                res.kkt_residual = kkt;
                res.constraint_violation = viol;
            }
            if (viol <= cfg_.constraint_tol && kkt <= cfg_.kkt_tol) {
                res.status = SolverStatus::optimal;
                break;
            }

            const bool accept = viol <= std::max(eta, cfg_.constraint_tol) &&
                                (viol <= prev_violation || viol <= cfg_.constraint_tol);
            if (accept) {
                lambda_ = mult;
                eta = std::max(eta / std::pow(rho_, 0.9), eta_floor);
                omega = std::max(omega / rho_, omega_floor);
                prev_violation = viol;
                if (viol <= anchor_violation) {
                    anchor = pt;
                    anchor_lambda = lambda_;
                    anchor_violation = viol;
                }
            } else {
                if (viol > anchor_violation && viol > 0.5 * last_violation) {
                    pt = anchor;
                    lambda_ = anchor_lambda;
                    bfgs_ = Matrix::Identity(n_, n_);
                    prev_violation = kInf;
                }
                if (rho_ >= cfg_.penalty_max) {
                    res.status = SolverStatus::infeasible;
                    break;
                }
                stalled_growths = viol > 0.9 * violation_at_growth ? stalled_growths + 1 : 0;
                violation_at_growth = viol;
                if (stalled_growths >= 3 && rho_ >= 1e6) {
                    res.status = SolverStatus::infeasible;
                    break;
                }
                rho_ = std::min(rho_ * cfg_.penalty_growth, cfg_.penalty_max);
                eta = std::max(1.0 / std::pow(rho_, 0.1), eta_floor);
                omega = std::max(1.0 / rho_, omega_floor);
                prev_violation = std::min(prev_violation, viol);
            }
            last_violation = viol;
        }
        res.function_evals = evals_;
        return res;
    }

private:
    struct Point {
        Vector w;
        double f = 0.0;
        Vector c;
        Vector grad_f;
        SparseMatrix jac;
    };

    Vector residual(const Point& pt) const {
        Vector h = pt.c;
        if (mi_ > 0) h.tail(mi_) += pt.w.tail(mi_);
        return h;
    }

    double merit(const Point& pt) const {
        const Vector h = residual(pt);
        return objective_weight_ * obj_scale_ * pt.f + lambda_.dot(h) + 0.5 * rho_ * h.squaredNorm();
    }

    void evaluate(Point& pt) {
        const Vector z = pt.w.head(n_);
        pt.f = safe_cost(nlp_, z);
        pt.c = stacked_constraints(nlp_, z);
        ++evals_;
    }

    void differentiate(Point& pt) {
        const Vector z = pt.w.head(n_);
        pt.grad_f = fd_gradient(nlp_, z, pt.f, cfg_.fd_step, &evals_);
        pt.jac = fd_jacobian([&](const Vector& x) { return stacked_constraints(nlp_, x); }, z, pt.c, groups_,
                             cfg_.fd_step, &nlp_.lower, &nlp_.upper, &evals_);
    }

    Vector merit_gradient(const Point& pt) const {
        const Vector mult = lambda_ + rho_ * residual(pt);
        Vector g(n_ + mi_);
        g.head(n_) = objective_weight_ * obj_scale_ * pt.grad_f + pt.jac.transpose() * mult;
        if (mi_ > 0) g.tail(mi_) = mult.tail(mi_);
        return g;
    }

    Vector project(const Vector& w) const { return w.cwiseMax(lower_).cwiseMin(upper_); }

    // Approximately minimizes the merit function over the box; returns the
    // number of accepted steps.
    // number of accepted steps. Stops early once |h| <= stop_violation.
    int minimize(Point& pt, double tol, SolverResult& res, double stop_violation = -1.0) {
        const int dim = n_ + mi_;
        Vector g = merit_gradient(pt);
        for (int it = 0; it < cfg_.max_inner_iters; ++it) {
            const double pg = (pt.w - project(pt.w - g)).lpNorm<Eigen::Infinity>();
            if (pg <= tol) return it;
            if (residual(pt).lpNorm<Eigen::Infinity>() <= stop_violation) return it;

            // Model Hessian  blockdiag(B, 0) + rho * Jw^T Jw  with  Jw = [J_c, (0; I)].
            Matrix jw = Matrix::Zero(m_, dim);
            jw.leftCols(n_) = Matrix(pt.jac);
            for (int i = 0; i < mi_; ++i) jw(nlp_.m_eq + i, n_ + i) = 1.0;
            Matrix hess = rho_ * (jw.transpose() * jw);
            hess.topLeftCorner(n_, n_) += bfgs_;

            const double eps = std::min(1e-3, pg);
            std::vector<int> free;
            std::vector<char> is_free(dim, 0);
            for (int i = 0; i < dim; ++i) {
                const bool fixed = lower_[i] == upper_[i];
                const bool at_lower = pt.w[i] - lower_[i] <= eps && g[i] > 0.0;
                const bool at_upper = upper_[i] - pt.w[i] <= eps && g[i] < 0.0;
                if (!fixed && !at_lower && !at_upper) {
                    free.push_back(i);
                    is_free[i] = 1;
                }
            }

            Vector dir = Vector::Zero(dim);
            for (int i = 0; i < dim; ++i) {
                if (!is_free[i] && lower_[i] != upper_[i]) dir[i] = -g[i] / std::max(hess(i, i), 1e-12);
            }
            if (!free.empty()) {
                const int nf = static_cast<int>(free.size());
                Matrix hf(nf, nf);
                Vector gf(nf);
                for (int a = 0; a < nf; ++a) {
                    gf[a] = g[free[a]];
                    for (int b = 0; b < nf; ++b) hf(a, b) = hess(free[a], free[b]);
                }
                const double shift = 1e-10 * std::max(1.0, hf.diagonal().cwiseAbs().maxCoeff());
                hf.diagonal().array() += shift;
                Eigen::LLT<Matrix> llt(hf);
                Vector df;
                if (llt.info() == Eigen::Success) {
                    df = -llt.solve(gf);
                } else {
                    df = -gf;
                }
                for (int a = 0; a < nf; ++a) dir[free[a]] = df[a];
            }

            Point trial;
            if (!line_search(pt, g, dir, trial)) {
                // Fall back to the projected gradient path.
                const Vector steepest = -g / std::max(1.0, hess.diagonal().maxCoeff());
                if (!line_search(pt, g, steepest, trial)) return it;
            }

            differentiate(trial);
            update_bfgs(pt, trial);
            pt = std::move(trial);
            g = merit_gradient(pt);
            if (record_trace_) res.trace.push_back(pt.w.head(n_));
        }
        return cfg_.max_inner_iters;
    }

    // argmin |grad f + J^T lambda| over the variables away from their bounds.
    Vector least_squares_multipliers(const Point& pt) const {
        const Vector g = merit_gradient(pt);  // lambda = 0 here, so this is grad f (and 0 for slacks)
        std::vector<int> free;
        for (int i = 0; i < n_; ++i) {
            const bool at_bound = pt.w[i] <= lower_[i] || pt.w[i] >= upper_[i];
            if (!at_bound) free.push_back(i);
        }
        if (free.empty() || m_ == 0) return Vector::Zero(m_);
        const Matrix jd(pt.jac);
        Matrix jf(m_, static_cast<Eigen::Index>(free.size()));
        Vector gf(static_cast<Eigen::Index>(free.size()));
        for (std::size_t a = 0; a < free.size(); ++a) {
            jf.col(a) = jd.col(free[a]);
            gf[a] = g[free[a]];
        }
        Matrix normal = jf * jf.transpose();
        normal.diagonal().array() += 1e-8 * std::max(1.0, normal.diagonal().maxCoeff());
        Vector lam = normal.ldlt().solve(-(jf * gf));
        for (int i = 0; i < mi_; ++i) lam[nlp_.m_eq + i] = std::max(0.0, lam[nlp_.m_eq + i]);
        if (!lam.allFinite()) return Vector::Zero(m_);
        return lam;
    }

    bool line_search(const Point& pt, const Vector& g, const Vector& dir, Point& trial) {
        const double phi0 = merit(pt);
        double alpha = 1.0;
        for (int k = 0; k < 40; ++k, alpha *= 0.5) {
            trial.w = project(pt.w + alpha * dir);
            const Vector step = trial.w - pt.w;
            const double slope = g.dot(step);
            if (!(slope < 0.0)) {
                if (step.lpNorm<Eigen::Infinity>() == 0.0) return false;
                continue;
            }
            evaluate(trial);
            if (!std::isfinite(trial.f) || !trial.c.allFinite()) continue;
            if (merit(trial) <= phi0 + 1e-4 * slope) return true;
        }
        return false;
    }

    // Damped BFGS on the Lagrangian part of the merit Hessian.
    void update_bfgs(const Point& old_pt, const Point& new_pt) {
        const Vector mult = lambda_ + rho_ * residual(new_pt);
        const Vector s = new_pt.w.head(n_) - old_pt.w.head(n_);
        const Vector y = objective_weight_ * obj_scale_ * (new_pt.grad_f - old_pt.grad_f) +
                         (new_pt.jac.transpose() * mult - old_pt.jac.transpose() * mult);
        const Vector bs = bfgs_ * s;
        const double sbs = s.dot(bs);
        if (!(sbs > 1e-16)) return;
        double sy = s.dot(y);
        Vector r = y;
        if (sy < 0.2 * sbs) {
            const double theta = 0.8 * sbs / (sbs - sy);
            r = theta * y + (1.0 - theta) * bs;
            sy = s.dot(r);
        }
        if (!(sy > 1e-16) || !r.allFinite()) return;
        bfgs_ += -(bs * bs.transpose()) / sbs + (r * r.transpose()) / sy;
    }

    const NlpProblem& nlp_;
    const SolverConfig& cfg_;
    bool record_trace_;
    int n_;
    int mi_;
    int m_;
    ColumnGroups groups_;
    Vector lower_;
    Vector upper_;
    Vector lambda_;
    double rho_ = 0.0;
    double objective_weight_ = 1.0;
    double obj_scale_ = 1.0;
    Matrix bfgs_;
    long evals_ = 0;
};

}  // namespace detail

/// Solves the program from z0 (clipped into the variable box first).
///
/// Equality and inequality constraints go through an augmented Lagrangian;
/// variable bounds are enforced by projection, so every iterate is box-feasible.
inline SolverResult solve(const NlpProblem& nlp, const Vector& z0, const SolverConfig& cfg = {},
                          bool record_trace = false) {
    cfg.validate();
    detail::AugmentedLagrangian al(nlp, cfg, record_trace);
    return al.run(z0);
}

}  // namespace tocol
