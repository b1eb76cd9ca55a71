#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tocol {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Continuous-time, time-invariant system  x' = f(x, u).
///
/// Instances are immutable after construction; the callables must be pure.
struct SystemModel {
    using Field = std::function<Vector(const Vector&, const Vector&)>;
    using Partial = std::function<Matrix(const Vector&, const Vector&)>;

    std::string name;
    int p = 0;  // state dimension
    int q = 0;  // control dimension
    Field f;
    Partial jac_x;  // optional
    Partial jac_u;  // optional
};

/// Raised when the integrator cannot continue; carries the last time that
/// was reached with a finite state.
class PropagationError : public std::runtime_error {
public:
    PropagationError(const std::string& what, double last_valid_time)
        : std::runtime_error(what), last_valid_time_(last_valid_time) {}

    double last_valid_time() const noexcept { return last_valid_time_; }

private:
    double last_valid_time_;
};

inline Vector eval_dynamics(const SystemModel& model, const Vector& x, const Vector& u) {
    if (x.size() != model.p || u.size() != model.q) {
        throw std::invalid_argument(model.name + ": expected state of size " + std::to_string(model.p) +
                                    " and control of size " + std::to_string(model.q) + ", got " +
                                    std::to_string(x.size()) + " and " + std::to_string(u.size()));
    }
    Vector dx = model.f(x, u);
    if (dx.size() != model.p) {
        throw std::logic_error(model.name + ": vector field returned wrong dimension");
    }
    return dx;
}

namespace detail {

inline Matrix central_difference(const std::function<Vector(const Vector&)>& g, const Vector& at, int rows) {
    Matrix jac(rows, at.size());
    Vector probe = at;
    for (Eigen::Index j = 0; j < at.size(); ++j) {
        const double h = 1e-6 * (1.0 + std::abs(at[j]));
        probe[j] = at[j] + h;
        const Vector fp = g(probe);
        probe[j] = at[j] - h;
        const Vector fm = g(probe);
        probe[j] = at[j];
        jac.col(j) = (fp - fm) / (2.0 * h);
    }
    return jac;
}

}  // namespace detail

/// df/dx, analytic when the model provides it, central differences otherwise.
inline Matrix state_jacobian(const SystemModel& model, const Vector& x, const Vector& u) {
    if (model.jac_x) return model.jac_x(x, u);
    return detail::central_difference([&](const Vector& xx) { return eval_dynamics(model, xx, u); }, x, model.p);
}

inline Matrix control_jacobian(const SystemModel& model, const Vector& x, const Vector& u) {
    if (model.jac_u) return model.jac_u(x, u);
    return detail::central_difference([&](const Vector& uu) { return eval_dynamics(model, x, uu); }, u, model.p);
}

/// Van der Pol oscillator with unit mass and adjustable damping coefficient.
inline SystemModel make_vdp(double damping = 1.0) {
    SystemModel m;
    m.name = "vdp";
    m.p = 2;
    m.q = 1;
    m.f = [damping](const Vector& x, const Vector& u) {
        Vector dx(2);
        dx << x[1], damping * (1.0 - x[0] * x[0]) * x[1] - x[0] + u[0];
        return dx;
    };
    m.jac_x = [damping](const Vector& x, const Vector&) {
        Matrix j(2, 2);
        j << 0.0, 1.0, -2.0 * damping * x[0] * x[1] - 1.0, damping * (1.0 - x[0] * x[0]);
        return j;
    };
    m.jac_u = [](const Vector&, const Vector&) {
        Matrix j(2, 1);
        j << 0.0, 1.0;
        return j;
    };
    return m;
}

inline constexpr double kRocketMinMass = 1e-12;

/// Free-space rocket, state (position, velocity, mass).
inline SystemModel make_rocket(double drag = 0.02, double fuel_rate = 0.01) {
    SystemModel m;
    m.name = "rocket";
    m.p = 3;
    m.q = 1;
    m.f = [drag, fuel_rate](const Vector& x, const Vector& u) {
        if (!(x[2] > kRocketMinMass)) throw std::domain_error("rocket: mass must be positive");
        Vector dx(3);
        dx << x[1], (u[0] - drag * x[1] * x[1]) / x[2], -fuel_rate * u[0] * u[0];
        return dx;
    };
    m.jac_x = [drag](const Vector& x, const Vector& u) {
        if (!(x[2] > kRocketMinMass)) throw std::domain_error("rocket: mass must be positive");
        const double mass = x[2];
        Matrix j = Matrix::Zero(3, 3);
        j(0, 1) = 1.0;
        j(1, 1) = -2.0 * drag * x[1] / mass;
        j(1, 2) = -(u[0] - drag * x[1] * x[1]) / (mass * mass);
        return j;
    };
    m.jac_u = [fuel_rate](const Vector& x, const Vector& u) {
        if (!(x[2] > kRocketMinMass)) throw std::domain_error("rocket: mass must be positive");
        Matrix j(3, 1);
        j << 0.0, 1.0 / x[2], -2.0 * fuel_rate * u[0];
        return j;
    };
    return m;
}

inline SystemModel make_double_integrator() {
    SystemModel m;
    m.name = "double_integrator";
    m.p = 2;
    m.q = 1;
    m.f = [](const Vector& x, const Vector& u) {
        Vector dx(2);
        dx << x[1], u[0];
        return dx;
    };
    m.jac_x = [](const Vector&, const Vector&) {
        Matrix j(2, 2);
        j << 0.0, 1.0, 0.0, 0.0;
        return j;
    };
    m.jac_u = [](const Vector&, const Vector&) {
        Matrix j(2, 1);
        j << 0.0, 1.0;
        return j;
    };
    return m;
}

/// x' = A x + B u
inline SystemModel make_linear(Matrix a, Matrix b, std::string name = "linear") {
    if (a.rows() != a.cols() || b.rows() != a.rows() || b.cols() < 1) {
        throw std::invalid_argument("linear system: A must be square and B must have matching rows");
    }
    SystemModel m;
    m.name = std::move(name);
    m.p = static_cast<int>(a.rows());
    m.q = static_cast<int>(b.cols());
    m.f = [a, b](const Vector& x, const Vector& u) -> Vector { return a * x + b * u; };
    m.jac_x = [a](const Vector&, const Vector&) -> Matrix { return a; };
    m.jac_u = [b](const Vector&, const Vector&) -> Matrix { return b; };
    return m;
}

// ---------------------------------------------------------------------------
// Propagation

enum class PropagatorMethod { rk4_fixed, rk45_adaptive };

struct PropagatorConfig {
    PropagatorMethod method = PropagatorMethod::rk45_adaptive;
    double abs_tol = 1e-9;
    double rel_tol = 1e-9;
    int max_steps = 200000;
    double fixed_step = 1e-2;  // rk4_fixed only

    void validate() const {
        if (!(abs_tol > 0.0) || !(rel_tol > 0.0)) throw std::invalid_argument("propagator tolerances must be positive");
        if (max_steps < 1) throw std::invalid_argument("propagator max_steps must be >= 1");
        if (method == PropagatorMethod::rk4_fixed && !(fixed_step > 0.0)) {
            throw std::invalid_argument("rk4 step must be positive");
        }
    }
};

/// Time-dependent control input. Breakpoints mark instants where the signal
/// may be discontinuous; the integrator never steps across them, and inside
/// [a, b) the signal is sampled strictly left of b.
struct ControlSignal {
    std::function<Vector(double)> eval;
    std::vector<double> breakpoints;

    static ControlSignal constant(Vector u) {
        return {[u = std::move(u)](double) { return u; }, {}};
    }
};

struct SampledTrajectory {
    std::vector<double> t;
    std::vector<Vector> x;
    std::vector<Vector> at_outputs;  // one per requested output time, same order

    const Vector& terminal() const { return x.back(); }
};

namespace detail {

struct Segment {
    double a;
    double b;
};

inline Vector rhs(const SystemModel& model, const ControlSignal& u, const Vector& x, double t, double seg_end, double seg_begin) {
    const double tu = t >= seg_end ? std::nextafter(seg_end, seg_begin) : t;
    Vector dx;
    try {
        dx = eval_dynamics(model, x, u.eval(tu));
    } catch (const std::domain_error& e) {
        throw PropagationError(std::string("model domain error: ") + e.what(), t);
    }
    if (!dx.allFinite()) throw PropagationError("non-finite state derivative", t);
    return dx;
}

// Classical RK4 over one segment with a fixed number of substeps.
inline Vector rk4_segment(const SystemModel& model, const ControlSignal& u, Vector x, Segment seg, double h_target,
                          int& steps, int max_steps, SampledTrajectory* out) {
    const double len = seg.b - seg.a;
    if (len <= 0.0) return x;
    const int n = std::max(1, static_cast<int>(std::ceil(len / h_target - 1e-9)));
    const double h = len / n;
    for (int i = 0; i < n; ++i) {
        if (++steps > max_steps) throw PropagationError("step limit exceeded", seg.a + i * h);
        const double t = seg.a + i * h;
        const double t_half = t + 0.5 * h;
        const double t_next = i + 1 == n ? seg.b : t + h;
        const Vector k1 = rhs(model, u, x, t, seg.b, seg.a);
        const Vector k2 = rhs(model, u, x + 0.5 * h * k1, t_half, seg.b, seg.a);
        const Vector k3 = rhs(model, u, x + 0.5 * h * k2, t_half, seg.b, seg.a);
        const Vector k4 = rhs(model, u, x + h * k3, t_next, seg.b, seg.a);
        Vector next = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!next.allFinite()) throw PropagationError("non-finite state", t);
        x = std::move(next);
        if (out) {
            out->t.push_back(t_next);
            out->x.push_back(x);
        }
    }
    return x;
}

// Dormand-Prince 5(4) with local extrapolation.
inline Vector rk45_segment(const SystemModel& model, const ControlSignal& u, Vector x, Segment seg, double& h,
                           const PropagatorConfig& cfg, int& steps, SampledTrajectory* out) {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;

    double t = seg.a;
    if (seg.b <= seg.a) return x;
    Vector k1 = rhs(model, u, x, t, seg.b, seg.a);
    while (t < seg.b) {
        if (++steps > cfg.max_steps) throw PropagationError("step limit exceeded", t);
        const bool last = t + h >= seg.b;
        const double hs = last ? seg.b - t : h;
        const Vector k2 = rhs(model, u, x + hs * a21 * k1, t + c2 * hs, seg.b, seg.a);
        const Vector k3 = rhs(model, u, x + hs * (a31 * k1 + a32 * k2), t + c3 * hs, seg.b, seg.a);
        const Vector k4 = rhs(model, u, x + hs * (a41 * k1 + a42 * k2 + a43 * k3), t + c4 * hs, seg.b, seg.a);
        const Vector k5 =
            rhs(model, u, x + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4), t + c5 * hs, seg.b, seg.a);
        const double t_new = last ? seg.b : t + hs;
        const Vector k6 =
            rhs(model, u, x + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5), t_new, seg.b, seg.a);
        const Vector x_new = x + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        const Vector k7 = rhs(model, u, x_new, t_new, seg.b, seg.a);
        const Vector err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

        double norm = 0.0;
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            const double scale = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(x[i]), std::abs(x_new[i]));
            norm = std::max(norm, std::abs(err[i]) / scale);
        }
        if (!std::isfinite(norm)) throw PropagationError("non-finite error estimate", t);

        if (norm <= 1.0) {
            t = t_new;
            x = x_new;
            k1 = k7;
            if (out) {
                out->t.push_back(t);
                out->x.push_back(x);
            }
            const double grow = norm == 0.0 ? 5.0 : std::min(5.0, 0.9 * std::pow(norm, -0.2));
            if (!last) h = hs * grow;
        } else {
            h = hs * std::max(0.2, 0.9 * std::pow(norm, -0.2));
        }
        if (h < 1e-14 * std::max(1.0, std::abs(t))) throw PropagationError("step size underflow", t);
    }
    return x;
}

}  // namespace detail

/// Integrates x' = f(x, u(t)) on [0, horizon] from x0.
///
/// The returned trajectory holds every accepted step; `at_outputs` holds the
/// state at each of `output_times` (which must lie in [0, horizon]).
inline SampledTrajectory propagate(const SystemModel& model, const Vector& x0, const ControlSignal& u, double horizon,
                                   const PropagatorConfig& cfg = {}, std::span<const double> output_times = {}) {
    cfg.validate();
    if (!(horizon >= 0.0)) throw std::invalid_argument("propagate: horizon must be non-negative");
    if (x0.size() != model.p) throw std::invalid_argument("propagate: initial state has wrong dimension");
    for (double t : output_times) {
        if (t < 0.0 || t > horizon) throw std::invalid_argument("propagate: output time outside horizon");
    }

    std::vector<double> stops;
    stops.reserve(u.breakpoints.size() + output_times.size() + 2);
    stops.push_back(0.0);
    stops.push_back(horizon);
    for (double b : u.breakpoints) {
        if (b > 0.0 && b < horizon) stops.push_back(b);
    }
    stops.insert(stops.end(), output_times.begin(), output_times.end());
    std::sort(stops.begin(), stops.end());
    stops.erase(std::unique(stops.begin(), stops.end()), stops.end());

    std::vector<std::size_t> order(output_times.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return output_times[a] < output_times[b]; });

    SampledTrajectory out;
    out.t.push_back(0.0);
    out.x.push_back(x0);
    out.at_outputs.resize(output_times.size());

    std::size_t next_out = 0;
    auto emit = [&](double t, const Vector& x) {
        while (next_out < order.size() && output_times[order[next_out]] == t) {
            out.at_outputs[order[next_out]] = x;
            ++next_out;
        }
    };

    Vector x = x0;
    emit(0.0, x);
    int steps = 0;
    double h = horizon > 0.0 ? std::min(1e-2, horizon) : 1e-2;
    for (std::size_t i = 0; i + 1 < stops.size(); ++i) {
        const detail::Segment seg{stops[i], stops[i + 1]};
        if (cfg.method == PropagatorMethod::rk4_fixed) {
            x = detail::rk4_segment(model, u, std::move(x), seg, cfg.fixed_step, steps, cfg.max_steps, &out);
        } else {
            x = detail::rk45_segment(model, u, std::move(x), seg, h, cfg, steps, &out);
        }
        emit(seg.b, x);
    }
    return out;
}

}  // namespace tocol
