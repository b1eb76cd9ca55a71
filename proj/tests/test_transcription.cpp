#include "tocol/transcription.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>
#include <vector>

using namespace tocol;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

const ControlParam kParams[] = {ControlParam::quadratic, ControlParam::linear, ControlParam::mean,
                                ControlParam::constant};
const CollocationForm kForms[] = {CollocationForm::compressed, CollocationForm::uncompressed};

SystemModel integrator_1d() {
    Matrix a = Matrix::Zero(1, 1);
    Matrix b = Matrix::Ones(1, 1);
    return make_linear(a, b, "integrator");
}

SystemModel constant_field() {
    SystemModel m;
    m.name = "unit_drift";
    m.p = 1;
    m.q = 1;
    m.f = [](const Vector&, const Vector&) { return Vector::Ones(1); };
    return m;
}

SystemModel zero_field(int p) {
    SystemModel m;
    m.name = "zero";
    m.p = p;
    m.q = 1;
    m.f = [p](const Vector&, const Vector&) { return Vector::Zero(p); };
    return m;
}

OcpSpec vdp_spec(int N, ControlParam param, CollocationForm form) {
    OcpSpec s;
    s.model = make_vdp();
    s.x_start = vec({0, 0});
    s.target.components = {0.8, 0.0};
    s.u_lower = vec({-1});
    s.u_upper = vec({1});
    s.N = N;
    s.param = param;
    s.form = form;
    s.validate();
    return s;
}

OcpSpec rocket_spec(int N, ControlParam param, CollocationForm form) {
    OcpSpec s;
    s.model = make_rocket();
    s.x_start = vec({0, 0, 1});
    s.target.components = {10.0, 0.0, std::nullopt};
    s.x_lower = vec({-kInf, -0.5, 0.0});
    s.x_upper = vec({kInf, 1.7, kInf});
    s.u_lower = vec({-1});
    s.u_upper = vec({1});
    s.N = N;
    s.param = param;
    s.form = form;
    s.validate();
    return s;
}

// Double-integrator rest-to-rest arc over distance d: u = +1 then -1, switch at sqrt(d).
struct BangArc {
    double d;
    double ts() const { return std::sqrt(d); }
    double u(double t) const { return t < ts() ? 1.0 : -1.0; }
    Vector x(double t) const {
        const double s = ts();
        if (t <= s) return vec({0.5 * t * t, t});
        const double r = t - s;
        return vec({0.5 * s * s + s * r - 0.5 * r * r, s - r});
    }
};

// Samples the exact arc onto the grid; N must be even so the switch lies on a grid point.
Vector sample_arc(const OcpSpec& spec, const BangArc& arc) {
    const DecisionLayout l = layout_variables(spec);
    const double dt = 2 * arc.ts() / spec.N;
    Vector z(l.n_z);
    z[0] = dt;
    for (int k = 0; k <= spec.N; ++k) z.segment(l.state_offset(k), 2) = arc.x(k * dt);
    if (l.state_midpoints) {
        for (int k = 0; k < spec.N; ++k) z.segment(l.mid_state_offset(k), 2) = arc.x((k + 0.5) * dt);
    }
    for (int k = 0; k < spec.N; ++k) z[l.control_offset(k)] = arc.u((k + 0.5) * dt);
    return z;
}

Vector stacked(const NlpProblem& nlp, const Vector& z) {
    Vector c(nlp.m_eq + nlp.m_ineq);
    c.head(nlp.m_eq) = nlp.eq_con(z);
    if (nlp.m_ineq > 0) c.tail(nlp.m_ineq) = nlp.ineq_con(z);
    return c;
}

}  // namespace

TEST(Layout, CountsMatchIndexSets) {
    EXPECT_EQ(layout_variables(vdp_spec(15, ControlParam::constant, CollocationForm::compressed)).n_z, 48);
    EXPECT_EQ(layout_variables(vdp_spec(15, ControlParam::quadratic, CollocationForm::compressed)).n_z, 64);
    EXPECT_EQ(layout_variables(rocket_spec(10, ControlParam::mean, CollocationForm::uncompressed)).n_z, 75);
}

TEST(Layout, OffsetsAreDisjointAndCoverTheVector) {
    for (int N : {1, 2, 7}) {
        for (ControlParam param : kParams) {
            for (CollocationForm form : kForms) {
                for (const OcpSpec& spec : {vdp_spec(N, param, form), rocket_spec(N, param, form)}) {
                    const DecisionLayout l = layout_variables(spec);
                    std::vector<int> hits(l.n_z, 0);
                    auto mark = [&](int off, int len) {
                        for (int i = 0; i < len; ++i) ++hits.at(off + i);
                    };
                    mark(DecisionLayout::dt_offset, 1);
                    for (int k = 0; k <= N; ++k) mark(l.state_offset(k), l.p);
                    if (l.state_midpoints) {
                        for (int k = 0; k < N; ++k) mark(l.mid_state_offset(k), l.p);
                    }
                    const int last_control = param == ControlParam::constant ? N - 1 : N;
                    for (int k = 0; k <= last_control; ++k) mark(l.control_offset(k), l.q);
                    if (has_midpoint_controls(param)) {
                        for (int k = 0; k < N; ++k) mark(l.mid_control_offset(k), l.q);
                    }
                    for (int h : hits) EXPECT_EQ(h, 1);
                    const int states = form == CollocationForm::uncompressed ? 2 * N + 1 : N + 1;
                    const int controls = has_midpoint_controls(param) ? 2 * N + 1
                                         : param == ControlParam::mean ? N + 1
                                                                       : N;
                    EXPECT_EQ(l.n_z, 1 + l.p * states + l.q * controls);
                }
            }
        }
    }
}

TEST(Layout, UncompressedAddsExactlyPTimesN) {
    for (ControlParam param : kParams) {
        for (int N : {3, 10, 15}) {
            const int c = layout_variables(rocket_spec(N, param, CollocationForm::compressed)).n_z;
            const int u = layout_variables(rocket_spec(N, param, CollocationForm::uncompressed)).n_z;
            EXPECT_EQ(u - c, 3 * N);
        }
    }
}

TEST(Simpson, ZeroFieldGivesZeroIncrement) {
    const Vector x = vec({1, 2});
    const Vector u = vec({0.3});
    EXPECT_EQ(simpson_quadrature(zero_field(2), x, u, x, u, x, u, 0.7), Vector::Zero(2));
}

TEST(Simpson, ExactForQuadraticIntegrand) {
    // x' = u with u(t) = t^2 on [0, 1].
    const SystemModel m = integrator_1d();
    const Vector xi = simpson_quadrature(m, vec({0}), vec({0}), vec({0}), vec({0.25}), vec({0}), vec({1}), 1.0);
    EXPECT_NEAR(xi[0], 1.0 / 3.0, 1e-15);
}

TEST(Simpson, ExactForEveryPolynomialUpToDegreeTwo) {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> d(-3, 3);
    const SystemModel m = integrator_1d();
    for (int trial = 0; trial < 200; ++trial) {
        const double a = d(rng), b = d(rng), c = d(rng), t0 = d(rng);
        const double h = std::abs(d(rng)) + 0.01;
        auto poly = [&](double t) { return a + b * t + c * t * t; };
        auto antiderivative = [&](double t) { return a * t + b * t * t / 2 + c * t * t * t / 3; };
        const Vector zero = vec({0});
        const Vector xi = simpson_quadrature(m, zero, vec({poly(t0)}), zero, vec({poly(t0 + h / 2)}), zero,
                                             vec({poly(t0 + h)}), h);
        const double exact = antiderivative(t0 + h) - antiderivative(t0);
        EXPECT_NEAR(xi[0], exact, 1e-12 * std::max(1.0, std::abs(exact)));
    }
}

TEST(Simpson, DoubleIntegratorExactArc) {
    const Vector xi = simpson_quadrature(make_double_integrator(), vec({0, 0}), vec({1}), vec({0.5, 1}), vec({1}),
                                         vec({2, 2}), vec({1}), 2.0);
    EXPECT_NEAR(xi[0], 2.0, 1e-15);
    EXPECT_NEAR(xi[1], 2.0, 1e-15);
}

TEST(HermiteMidpoint, ZeroFieldGivesMean) {
    const Vector m = hermite_midpoint(zero_field(2), vec({1, -1}), vec({0}), vec({3, 5}), vec({0}), 0.4);
    EXPECT_EQ(m, vec({2, 2}));
}

TEST(HermiteMidpoint, ConstantFieldTermsCancel) {
    EXPECT_NEAR(hermite_midpoint(constant_field(), vec({0}), vec({0}), vec({1}), vec({0}), 1.0)[0], 0.5, 1e-15);
}

TEST(HermiteMidpoint, ReproducesQuadraticArc) {
    const Vector m = hermite_midpoint(make_double_integrator(), vec({0, 0}), vec({1}), vec({0.5, 1}), vec({1}), 1.0);
    EXPECT_NEAR(m[0], 0.125, 1e-15);
    EXPECT_NEAR(m[1], 0.5, 1e-15);
}

TEST(HermiteMidpoint, ExactOnRandomQuadraticArcs) {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> d(-2, 2);
    const SystemModel di = make_double_integrator();
    for (int trial = 0; trial < 100; ++trial) {
        const double p0 = d(rng), v0 = d(rng), a = d(rng), h = std::abs(d(rng)) + 0.05;
        auto x = [&](double t) { return vec({p0 + v0 * t + 0.5 * a * t * t, v0 + a * t}); };
        const Vector m = hermite_midpoint(di, x(0), vec({a}), x(h), vec({a}), h);
        EXPECT_LE((m - x(h / 2)).norm(), 1e-12);
    }
}

TEST(Defects, SteadyStateGivesZero) {
    for (ControlParam param : kParams) {
        for (CollocationForm form : kForms) {
            const OcpSpec spec = vdp_spec(6, param, form);
            Vector z = Vector::Zero(layout_variables(spec).n_z);
            z[0] = 0.37;
            EXPECT_EQ(collocation_defects(spec, z).cwiseAbs().maxCoeff(), 0.0);
        }
    }
}

TEST(Defects, ExactBangArcOnGrid) {
    for (CollocationForm form : kForms) {
        for (double d : {0.25, 1.0, 4.0}) {
            OcpSpec spec;
            spec.model = make_double_integrator();
            spec.x_start = vec({0, 0});
            spec.target.components = {d, 0.0};
            spec.u_lower = vec({-1});
            spec.u_upper = vec({1});
            spec.N = 10;
            spec.form = form;
            spec.validate();
            const Vector def = collocation_defects(spec, sample_arc(spec, BangArc{d}));
            EXPECT_LE(def.cwiseAbs().maxCoeff(), 1e-12) << "d = " << d;
            EXPECT_EQ(def.size(), (form == CollocationForm::compressed ? 2 : 4) * 10);
        }
    }
}

TEST(Defects, PerturbingAStateTouchesOnlyAdjacentBlocks) {
    for (ControlParam param : kParams) {
        const OcpSpec spec = vdp_spec(8, param, CollocationForm::compressed);
        const DecisionLayout l = layout_variables(spec);
        std::mt19937 rng(9);
        std::uniform_real_distribution<double> d(-1, 1);
        Vector z(l.n_z);
        for (auto& v : z) v = d(rng);
        z[0] = 0.2;
        const Vector base = collocation_defects(spec, z);
        for (int k = 1; k < 8; ++k) {
            Vector zp = z;
            zp[l.state_offset(k) + 1] += 1e-3;
            const Vector diff = collocation_defects(spec, zp) - base;
            for (int blk = 0; blk < 8; ++blk) {
                const double change = diff.segment(2 * blk, 2).cwiseAbs().maxCoeff();
                if (blk == k - 1 || blk == k) {
                    EXPECT_GT(change, 0.0) << "k=" << k << " block " << blk;
                } else {
                    EXPECT_EQ(change, 0.0) << "k=" << k << " block " << blk;
                }
            }
        }
    }
}

TEST(Defects, PlaceholderDegeneracy) {
    // With u_k = u_{k+0.5} = u_{k+1} every parameterization gives the same defects.
    std::mt19937 rng(13);
    std::uniform_real_distribution<double> d(-1, 1);
    for (CollocationForm form : kForms) {
        const int N = 5;
        std::vector<double> u(N);
        for (auto& v : u) v = 0.3;
        Vector states(2 * (2 * N + 1));
        for (auto& v : states) v = d(rng);
        std::vector<Vector> defects;
        for (ControlParam param : kParams) {
            const OcpSpec spec = vdp_spec(N, param, form);
            const DecisionLayout l = layout_variables(spec);
            Vector z(l.n_z);
            z[0] = 0.15;
            for (int k = 0; k <= N; ++k) z.segment(l.state_offset(k), 2) = states.segment(2 * k, 2);
            if (l.state_midpoints) {
                for (int k = 0; k < N; ++k) z.segment(l.mid_state_offset(k), 2) = states.segment(2 * (N + 1 + k), 2);
            }
            z.tail(l.control_count()).setConstant(0.3);
            defects.push_back(collocation_defects(spec, z));
        }
        for (std::size_t i = 1; i < defects.size(); ++i) EXPECT_LE((defects[i] - defects[0]).cwiseAbs().maxCoeff(), 1e-15);
    }
}

TEST(Defects, LayoutMismatchIsInvalidArgument) {
    const OcpSpec spec = vdp_spec(4, ControlParam::constant, CollocationForm::compressed);
    EXPECT_THROW(collocation_defects(spec, Vector::Zero(5)), std::invalid_argument);
}

TEST(AssembleNlp, VanDerPolCounts) {
    const NlpProblem nlp = assemble_nlp(vdp_spec(15, ControlParam::constant, CollocationForm::compressed));
    EXPECT_EQ(nlp.m_eq, 32);
    EXPECT_EQ(nlp.m_ineq, 0);
    EXPECT_EQ(nlp.n_z, 48);
}

TEST(AssembleNlp, RocketHasTwoTerminalEqualities) {
    for (CollocationForm form : kForms) {
        const OcpSpec spec = rocket_spec(10, ControlParam::mean, form);
        const NlpProblem nlp = assemble_nlp(spec);
        const int defects = (form == CollocationForm::compressed ? 3 : 6) * 10;
        EXPECT_EQ(nlp.m_eq - defects, 2);
        // compressed: v lower/upper and m lower at every midpoint
        EXPECT_EQ(nlp.m_ineq, form == CollocationForm::compressed ? 3 * 10 : 0);
    }
}

TEST(AssembleNlp, CostIsHorizonTimesInterval) {
    const OcpSpec spec = vdp_spec(15, ControlParam::quadratic, CollocationForm::compressed);
    const NlpProblem nlp = assemble_nlp(spec);
    Vector z = initial_guess(spec);
    z[0] = 0.0731;
    EXPECT_DOUBLE_EQ(nlp.cost(z), 15 * 0.0731);
    EXPECT_EQ(nlp.cost_sparsity, std::vector<int>{0});
}

TEST(AssembleNlp, BoundsPinStartAndBoxStates) {
    const OcpSpec spec = rocket_spec(4, ControlParam::quadratic, CollocationForm::uncompressed);
    const NlpProblem nlp = assemble_nlp(spec);
    const DecisionLayout l = layout_variables(spec);
    EXPECT_EQ(nlp.lower[0], 0.0);
    EXPECT_EQ(nlp.upper[0], kInf);
    EXPECT_EQ(nlp.lower.segment(l.state_offset(0), 3), spec.x_start);
    EXPECT_EQ(nlp.upper.segment(l.state_offset(0), 3), spec.x_start);
    for (int k = 1; k <= 4; ++k) {
        EXPECT_EQ(nlp.lower[l.state_offset(k) + 1], -0.5);
        EXPECT_EQ(nlp.upper[l.state_offset(k) + 1], 1.7);
        EXPECT_EQ(nlp.lower[l.mid_state_offset(k - 1) + 2], 0.0);
    }
    for (int j = 0; j < l.control_count(); ++j) {
        EXPECT_EQ(nlp.lower[l.control_base() + j], -1.0);
        EXPECT_EQ(nlp.upper[l.control_base() + j], 1.0);
    }
}

TEST(AssembleNlp, DegenerateIntervalBox) {
    OcpSpec spec = vdp_spec(5, ControlParam::constant, CollocationForm::compressed);
    spec.dt_min = spec.dt_max = 0.3;
    const NlpProblem nlp = assemble_nlp(spec);
    EXPECT_EQ(nlp.lower[0], 0.3);
    EXPECT_EQ(nlp.upper[0], 0.3);
    EXPECT_EQ(initial_guess(spec)[0], 0.3);
}

TEST(AssembleNlp, CompressedMidpointRowsUseHermiteInterpolant) {
    OcpSpec spec = vdp_spec(3, ControlParam::constant, CollocationForm::compressed);
    spec.x_lower = vec({-kInf, -0.7});
    spec.x_upper = vec({kInf, 0.7});
    spec.validate();
    const NlpProblem nlp = assemble_nlp(spec);
    ASSERT_EQ(nlp.m_ineq, 6);
    const DecisionLayout l = layout_variables(spec);
    Vector z = initial_guess(spec);
    z[0] = 0.4;
    const Vector g = nlp.ineq_con(z);
    for (int k = 0; k < 3; ++k) {
        const PartitionView v = partition_view(l, z, k);
        const Vector mid = hermite_midpoint(spec.model, v.x_k, v.u_k, v.x_k1, v.u_k1, v.dt);
        EXPECT_NEAR(g[2 * k], -0.7 - mid[1], 1e-15);
        EXPECT_NEAR(g[2 * k + 1], mid[1] - 0.7, 1e-15);
    }
}

TEST(Sparsity, SmallConstantCompressedRow) {
    OcpSpec spec;
    spec.model = integrator_1d();
    spec.x_start = vec({0});
    spec.target.components = {1.0};
    spec.u_lower = vec({-1});
    spec.u_upper = vec({1});
    spec.N = 2;
    spec.validate();
    const DecisionLayout l = layout_variables(spec);
    std::set<int> row0;
    for (auto [r, c] : sparsity_pattern(spec)) {
        if (r == 0) row0.insert(c);
    }
    EXPECT_EQ(row0, (std::set<int>{0, l.state_offset(0), l.state_offset(1), l.control_offset(0)}));
}

TEST(Sparsity, MeanCouplesNextControl) {
    const OcpSpec spec = vdp_spec(4, ControlParam::mean, CollocationForm::compressed);
    const DecisionLayout l = layout_variables(spec);
    for (int k = 0; k < 4; ++k) {
        std::set<int> cols;
        for (auto [r, c] : sparsity_pattern(spec)) {
            if (r == 2 * k) cols.insert(c);
        }
        EXPECT_TRUE(cols.count(l.control_offset(k)));
        EXPECT_TRUE(cols.count(l.control_offset(k + 1)));
    }
}

TEST(Sparsity, IntervalColumnIsDenseOverDefects) {
    for (ControlParam param : kParams) {
        for (CollocationForm form : kForms) {
            const OcpSpec spec = vdp_spec(6, param, form);
            const int rows = (form == CollocationForm::compressed ? 2 : 4) * 6;
            std::set<int> with_dt;
            for (auto [r, c] : sparsity_pattern(spec)) {
                if (c == 0 && r < rows) with_dt.insert(r);
            }
            EXPECT_EQ(static_cast<int>(with_dt.size()), rows);
        }
    }
}

TEST(Sparsity, PatternIsCompleteAgainstDenseDifferences) {
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> d(-1, 1);
    auto check = [&](const OcpSpec& spec) {
        const NlpProblem nlp = assemble_nlp(spec);
        const int m = nlp.m_eq + nlp.m_ineq;
        std::set<std::pair<int, int>> declared(nlp.jac_sparsity.begin(), nlp.jac_sparsity.end());
        EXPECT_EQ(declared.size(), nlp.jac_sparsity.size()) << "duplicate entries";
        for (int trial = 0; trial < 5; ++trial) {
            Vector z(nlp.n_z);
            for (auto& v : z) v = d(rng);
            z[0] = 0.05 + 0.2 * std::abs(d(rng));
            if (spec.model.name == "rocket") {
                const DecisionLayout l = layout_variables(spec);
                for (int k = 0; k < l.state_count(); ++k) z[1 + 3 * k + 2] = 1.0 + 0.3 * std::abs(d(rng));
            }
            for (int j = 0; j < nlp.n_z; ++j) {
                const double h = 1e-6;
                Vector zp = z, zm = z;
                zp[j] += h;
                zm[j] -= h;
                const Vector col = (stacked(nlp, zp) - stacked(nlp, zm)) / (2 * h);
                for (int i = 0; i < m; ++i) {
                    if (std::abs(col[i]) > 1e-8) EXPECT_TRUE(declared.count({i, j})) << "row " << i << " col " << j;
                }
            }
        }
    };
    for (ControlParam param : kParams) {
        for (CollocationForm form : kForms) {
            check(vdp_spec(4, param, form));
            check(rocket_spec(3, param, form));
            OcpSpec constrained = vdp_spec(3, param, form);
            constrained.x_lower = vec({-kInf, -0.7});
            constrained.x_upper = vec({2.0, 0.7});
            constrained.path_ineq = [](const Vector& x) { return vec({x[0] * x[0] + x[1] * x[1] - 4.0}); };
            constrained.n_path = 1;
            constrained.validate();
            check(constrained);
        }
    }
}

TEST(InitialGuess, StartEqualsTarget) {
    OcpSpec spec = vdp_spec(5, ControlParam::constant, CollocationForm::compressed);
    spec.x_start = vec({0.8, 0.0});
    const DecisionLayout l = layout_variables(spec);
    Vector z = initial_guess(spec);
    EXPECT_EQ(z[0], kDtGuessFloor);
    for (int k = 0; k <= 5; ++k) EXPECT_EQ(z.segment(l.state_offset(k), 2), spec.x_start);
    spec.dt_min = 0.02;
    EXPECT_EQ(initial_guess(spec)[0], 0.02);
}

TEST(InitialGuess, LinearStateInterpolationAndMidBoxControls) {
    const OcpSpec spec = vdp_spec(4, ControlParam::quadratic, CollocationForm::uncompressed);
    const DecisionLayout l = layout_variables(spec);
    const Vector z = initial_guess(spec);
    for (int k = 0; k <= 4; ++k) EXPECT_NEAR(z[l.state_offset(k)], 0.2 * k, 1e-15);
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(z[l.mid_state_offset(k)], 0.2 * (k + 0.5), 1e-15);
    EXPECT_EQ(z.tail(l.control_count()), Vector::Zero(l.control_count()));
    EXPECT_NEAR(z[0], 0.8 / 4, 1e-15);
}

TEST(InitialGuess, FreeComponentsHoldStartValue) {
    const OcpSpec spec = rocket_spec(5, ControlParam::constant, CollocationForm::compressed);
    const DecisionLayout l = layout_variables(spec);
    const Vector z = initial_guess(spec);
    for (int k = 0; k <= 5; ++k) EXPECT_EQ(z[l.state_offset(k) + 2], 1.0);
}

TEST(OcpSpec, ValidationRejectsBadInput) {
    auto expect_invalid = [](auto mutate) {
        OcpSpec s = vdp_spec(5, ControlParam::constant, CollocationForm::compressed);
        mutate(s);
        EXPECT_THROW(s.validate(), std::invalid_argument);
    };
    expect_invalid([](OcpSpec& s) { s.N = 0; });
    expect_invalid([](OcpSpec& s) { s.dt_min = 0.5, s.dt_max = 0.1; });
    expect_invalid([](OcpSpec& s) { s.dt_min = -0.1; });
    expect_invalid([](OcpSpec& s) { s.u_lower = vec({1}); });
    expect_invalid([](OcpSpec& s) { s.u_upper = vec({kInf}); });
    expect_invalid([](OcpSpec& s) { s.target.components = {std::nullopt, std::nullopt}; });
    expect_invalid([](OcpSpec& s) { s.target.components = {0.8}; });
    expect_invalid([](OcpSpec& s) { s.x_start = vec({0, 0, 0}); });
    expect_invalid([](OcpSpec& s) {
        s.x_lower = vec({-1, -0.5});
        s.x_upper = vec({0.5, 0.5});  // target x1 = 0.8 outside
    });
    expect_invalid([](OcpSpec& s) {
        s.x_lower = vec({0.1, -1});
        s.x_upper = vec({1, 1});  // start outside
    });
}

TEST(Parsing, ParametersAndForms) {
    for (ControlParam p : kParams) EXPECT_EQ(parse_control_param(to_string(p)), p);
    for (CollocationForm f : kForms) EXPECT_EQ(parse_collocation_form(to_string(f)), f);
    EXPECT_THROW(parse_control_param("cubic"), std::invalid_argument);
    EXPECT_THROW(parse_collocation_form("dense"), std::invalid_argument);
}
