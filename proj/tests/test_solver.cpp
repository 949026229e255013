#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "nehari/solver.hpp"
#include "support.hpp"

using namespace nehari;
using nehari::testing::random_connected_graph;
using nehari::testing::random_vector;

namespace {

struct Fixture {
    WeightedGraph graph;
    FormMatrices forms;
    Nonlinearity nl;
    SolverConfig cfg;

    Fixture(WeightedGraph g, int kappa, double lambda, double p = 4.0)
        : graph(std::move(g)), forms(assemble(graph)), nl(power_nonlinearity(p, std::vector<double>(graph.size(), 1.0)))
    {
        cfg.kappa = kappa;
        cfg.lambda = lambda;
    }

    Problem problem() const { return Problem{graph, forms, nl}; }
    SpectralData spectrum() const
    {
        return cfg.kappa == -1 ? eigensolve(forms, graph.size()) : spectral_window(forms, cfg.lambda);
    }
};

/// Independent residual: M^{-1}(A - lambda M)u - kappa u^3 for p = 4, g = 1.
Vector cubic_residual(const Fixture& fx, const Vector& u)
{
    const Vector au = fx.forms.A * u;
    return au.cwiseQuotient(fx.forms.mass) - fx.cfg.lambda * u - fx.cfg.kappa * u.cwiseProduct(u).cwiseProduct(u);
}

Matrix cubic_jacobian(const Fixture& fx, const Vector& u)
{
    Matrix jac = fx.forms.mass.cwiseInverse().asDiagonal() * fx.forms.dense_A();
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        jac(i, i) -= fx.cfg.lambda + 3.0 * fx.cfg.kappa * u[i] * u[i];
    }
    return jac;
}

/// Levenberg-Marquardt on the residual; returns the end point.
Vector levenberg_marquardt(const Fixture& fx, Vector u)
{
    double mu = 1e-3;
    for (int it = 0; it < 500; ++it) {
        const Vector r = cubic_residual(fx, u);
        if (r.norm() < 1e-14) {
            break;
        }
        const Matrix jac = cubic_jacobian(fx, u);
        const Matrix n = jac.transpose() * jac;
        const Vector step =
            (n + mu * Matrix::Identity(u.size(), u.size())).ldlt().solve(-jac.transpose() * r);
        const Vector trial = u + step;
        if (cubic_residual(fx, trial).norm() < r.norm()) {
            u = trial;
            mu = std::max(mu / 3.0, 1e-15);
        } else {
            mu *= 4.0;
        }
    }
    return u;
}

double single_vertex_level(double lambda)
{
    return 0.25 * (1.0 - lambda) * (1.0 - lambda);
}

}  // namespace

TEST(Energy, SingleVertexClosedForm)
{
    Fixture fx(path_graph(1), 1, 0.0);
    for (double a : {-2.0, -1.0, 0.0, 0.3, 1.0, 1.7}) {
        Vector u(1);
        u << a;
        EXPECT_NEAR(J(fx.problem(), fx.cfg, u), a * a / 2.0 - a * a * a * a / 4.0, 1e-15);
    }
    EXPECT_DOUBLE_EQ(J(fx.problem(), fx.cfg, Vector::Ones(1)), 0.25);
    EXPECT_EQ(grad_J(fx.problem(), fx.cfg, Vector::Ones(1))[0], 0.0);
    EXPECT_EQ(grad_J(fx.problem(), fx.cfg, Vector::Zero(1))[0], 0.0);
}

TEST(Energy, KappaFlipEvenAndZero)
{
    std::mt19937_64 rng(1);
    Fixture plus(random_connected_graph(12, 2, 5), 1, 1.3);
    SolverConfig minus = plus.cfg;
    minus.kappa = -1;
    EXPECT_EQ(J(plus.problem(), plus.cfg, Vector::Zero(12)), 0.0);
    for (int i = 0; i < 100; ++i) {
        const Vector u = random_vector(12, rng);
        const double jp = J(plus.problem(), plus.cfg, u);
        EXPECT_GE(J(plus.problem(), minus, u), jp);
        EXPECT_NEAR(J(plus.problem(), plus.cfg, Vector(-u)), jp, 1e-13 * (1.0 + std::abs(jp)));
    }
}

TEST(Energy, GradientMatchesCentralDifferences)
{
    const double eps = 1e-5;
    std::mt19937_64 rng(7);
    const std::vector<WeightedGraph> graphs{path_graph(3), random_connected_graph(20, 17, 12),
                                            example_line_graph(4, 12)};
    for (const auto& g : graphs) {
        for (int kappa : {1, -1}) {
            Fixture fx(g, kappa, 1.7, 3.5);
            const Problem pb = fx.problem();
            for (int i = 0; i < 50; ++i) {
                const Vector u = random_vector(g.size(), rng);
                const Vector h = random_vector(g.size(), rng);
                const double fd = (J(pb, fx.cfg, Vector(u + eps * h)) - J(pb, fx.cfg, Vector(u - eps * h))) / (2.0 * eps);
                const double an = grad_J_pairing(pb, fx.cfg, u, h);
                EXPECT_LE(std::abs(fd - an), 1e-6 * std::max(std::abs(an), 1.0));
                EXPECT_NEAR(an, inner_m(g, grad_J(pb, fx.cfg, u), h), 1e-12 * (1.0 + std::abs(an)) * 10);
            }
        }
    }
}

TEST(Energy, GradientIsTheEquationResidual)
{
    std::mt19937_64 rng(5);
    Fixture fx(random_connected_graph(15, 8, 7), -1, 2.2);
    for (int i = 0; i < 20; ++i) {
        const Vector u = random_vector(15, rng);
        EXPECT_LE((grad_J(fx.problem(), fx.cfg, u) - cubic_residual(fx, u)).norm(), 1e-12 * (1.0 + u.squaredNorm()) * 10);
    }
}

TEST(Config, Validation)
{
    SolverConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    cfg.kappa = 2;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = SolverConfig{};
    cfg.n_starts = 0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = SolverConfig{};
    cfg.tol_grad = -1.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Splitting, FocusingAndDefocusingSubspaces)
{
    Fixture fx(path_graph(3), 1, 1.5);
    const SpectralData sd = eigensolve(fx.forms, 3);
    const NehariSplitting plus = nehari_splitting(sd, fx.cfg);
    EXPECT_EQ(plus.f_indices, std::vector<std::size_t>{0});
    EXPECT_EQ(plus.complement_indices, (std::vector<std::size_t>{1, 2}));

    SolverConfig minus = fx.cfg;
    minus.kappa = -1;
    const NehariSplitting neg = nehari_splitting(sd, minus);
    EXPECT_EQ(neg.f_indices, (std::vector<std::size_t>{1, 2}));
    EXPECT_EQ(neg.complement_indices, std::vector<std::size_t>{0});
    EXPECT_FALSE(neg.complement_has_remainder);
}

TEST(Inner, SingleVertexRayMaximum)
{
    Fixture fx(path_graph(1), 1, 0.5);
    const SpectralData sd = fx.spectrum();
    const InnerResult r = inner_maximize(fx.problem(), fx.cfg, sd, nehari_splitting(sd, fx.cfg), Vector::Ones(1));
    EXPECT_NEAR(std::abs(r.u[0]), std::sqrt(0.5), 1e-12);
    EXPECT_NEAR(r.value, single_vertex_level(0.5), 1e-14);
    EXPECT_TRUE(r.converged);
}

TEST(Inner, TwoVertexSymmetricDirection)
{
    Fixture fx(path_graph(2), 1, 0.0);
    const SpectralData sd = fx.spectrum();
    const InnerResult r = inner_maximize(fx.problem(), fx.cfg, sd, nehari_splitting(sd, fx.cfg), Vector::Ones(2));
    EXPECT_NEAR(r.u[0], 1.0, 1e-12);
    EXPECT_NEAR(r.u[1], 1.0, 1e-12);
    EXPECT_NEAR(r.value, 0.5, 1e-14);
    EXPECT_LE(r.nehari_ray, 1e-9);
    EXPECT_LE(r.nehari_f, 1e-9);
}

TEST(Inner, MaximizerDominatesRandomPointsOfTheHalfSpace)
{
    std::mt19937_64 rng(3);
    for (int kappa : {1, -1}) {
        Fixture fx(random_connected_graph(10, 21, 5), kappa, 0.0);
        const SpectralData full = eigensolve(fx.forms, 10);
        fx.cfg.lambda = 0.5 * (full.value(3) + full.value(4));
        const NehariSplitting ns = nehari_splitting(full, fx.cfg);
        const Problem pb = fx.problem();
        for (int trial = 0; trial < 5; ++trial) {
            const Vector w = random_vector(10, rng);
            const InnerResult r = inner_maximize(pb, fx.cfg, full, ns, w);
            ASSERT_TRUE(r.converged);
            EXPECT_LE(r.nehari_ray, 1e-9 * std::max(1.0, r.u.squaredNorm()));
            EXPECT_LE(r.nehari_f, 1e-9 * std::max(1.0, r.u.squaredNorm()));
            EXPECT_TRUE(r.second_order_ok);
            for (int s = 0; s < 200; ++s) {
                Vector v = Vector::Zero(10);
                for (std::size_t j : ns.f_indices) {
                    v += std::normal_distribution<double>(0.0, 1.0)(rng) * full.vector(j);
                }
                const double t = std::uniform_real_distribution<double>(0.0, 3.0)(rng);
                EXPECT_LE(kappa * J(pb, fx.cfg, Vector(t * r.w_hat + v)), r.value + 1e-10 * std::abs(r.value));
            }
        }
    }
}

TEST(Inner, DirectionInsideFThrows)
{
    Fixture fx(path_graph(3), 1, 1.5);
    const SpectralData sd = eigensolve(fx.forms, 3);
    EXPECT_THROW(inner_maximize(fx.problem(), fx.cfg, sd, nehari_splitting(sd, fx.cfg), sd.vector(0)), SolverError);
}

TEST(GroundState, SingleVertexAcrossLambda)
{
    for (double lambda : {0.0, 0.5, 0.9, 0.99}) {
        Fixture fx(path_graph(1), 1, lambda);
        const GroundStateResult r = ground_state(fx.problem(), fx.cfg, fx.spectrum());
        ASSERT_TRUE(r.nontrivial());
        EXPECT_NEAR(std::abs(r.u[0]), std::sqrt(1.0 - lambda), 1e-8);
        EXPECT_NEAR(r.level, single_vertex_level(lambda), 1e-9);
        EXPECT_NEAR(r.energy, r.level, 1e-15);
        EXPECT_NEAR(r.delta, 1.0 - lambda, 1e-12);
    }
}

TEST(GroundState, TwoVertexBeatsEveryEnumeratedCriticalPoint)
{
    Fixture fx(path_graph(2), 1, 0.0);
    const Problem pb = fx.problem();

    // Enumerate critical points on a grid of Newton starts.
    std::vector<Vector> roots;
    for (int i = -20; i <= 20; ++i) {
        for (int j = -20; j <= 20; ++j) {
            Vector u(2);
            u << 0.15 * i, 0.15 * j;
            for (int it = 0; it < 200; ++it) {
                const Vector r = cubic_residual(fx, u);
                if (r.norm() < 1e-13) {
                    break;
                }
                const Matrix jac = cubic_jacobian(fx, u);
                Eigen::FullPivLU<Matrix> lu(jac);
                if (!lu.isInvertible()) {
                    break;
                }
                u -= lu.solve(r);
                if (u.norm() > 1e3) {
                    break;
                }
            }
            if (cubic_residual(fx, u).norm() > 1e-9) {
                continue;
            }
            bool seen = false;
            for (const auto& r : roots) {
                seen = seen || (r - u).norm() < 1e-4;
            }
            if (!seen) {
                roots.push_back(u);
            }
        }
    }
    double best = kInfinity;
    std::size_t nontrivial = 0;
    for (const auto& r : roots) {
        if (r.norm() > 1e-6) {
            ++nontrivial;
            best = std::min(best, J(pb, fx.cfg, r));
        }
    }
    ASSERT_GE(nontrivial, 4u);
    EXPECT_NEAR(best, 0.5, 1e-9);

    const GroundStateResult gs = ground_state(pb, fx.cfg, fx.spectrum());
    ASSERT_TRUE(gs.nontrivial());
    EXPECT_NEAR(gs.level, best, 1e-9);
    // The Hessian is singular at (1, 1), so u itself is only determined to ~1e-6.
    EXPECT_NEAR(std::abs(gs.u[0]), 1.0, 1e-5);
    EXPECT_NEAR(std::abs(gs.u[1]), 1.0, 1e-5);
}

TEST(GroundState, DefocusingPathThreeMatchesIndependentMinimization)
{
    Fixture fx(path_graph(3), -1, 1.5);
    const Problem pb = fx.problem();
    const GroundStateResult gs = ground_state(pb, fx.cfg, fx.spectrum());
    ASSERT_TRUE(gs.nontrivial());
    EXPECT_GT(gs.level, 0.0);
    EXPECT_LE(gs.residual_grad, fx.cfg.tol_grad);
    EXPECT_LE(gs.nehari_ray, 1e-9);
    EXPECT_LE(gs.nehari_f, 1e-9);

    std::mt19937_64 rng(64);
    double best = kInfinity;
    for (int s = 0; s < 64; ++s) {
        const Vector u = levenberg_marquardt(fx, random_vector(3, rng, 1.5));
        if (cubic_residual(fx, u).norm() < 1e-10 && u.norm() > 1e-3) {
            best = std::min(best, -J(pb, fx.cfg, u));
        }
    }
    ASSERT_LT(best, kInfinity);
    EXPECT_NEAR(gs.level, best, 1e-9);
    EXPECT_NEAR(gs.level, 0.1875, 1e-10);
    for (Eigen::Index i = 0; i < 3; ++i) {
        EXPECT_NEAR(std::abs(gs.u[i]), std::sqrt(0.5), 1e-8);
    }
}

TEST(GroundState, LevelBelowEveryInnerMaximum)
{
    std::mt19937_64 rng(12);
    for (int kappa : {1, -1}) {
        Fixture fx(random_connected_graph(12, 33, 6), kappa, 0.0);
        const SpectralData full = eigensolve(fx.forms, 12);
        fx.cfg.lambda = 0.5 * (full.value(2) + full.value(3));
        const Problem pb = fx.problem();
        const GroundStateResult gs = ground_state(pb, fx.cfg, full);
        ASSERT_TRUE(gs.nontrivial());
        EXPECT_LE(gs.residual_grad, fx.cfg.tol_grad);
        EXPECT_LE(gs.minimax_gap, 1e-8 * gs.level);
        const NehariSplitting ns = nehari_splitting(full, fx.cfg);
        for (int i = 0; i < 30; ++i) {
            const InnerResult r = inner_maximize(pb, fx.cfg, full, ns, random_vector(12, rng));
            EXPECT_GE(r.value, gs.level * (1.0 - 1e-9));
        }
        EXPECT_NO_THROW(check_critical_value_bounds(gs, pb));
    }
}

TEST(GroundState, DeterministicAcrossThreadCounts)
{
    Fixture fx(random_connected_graph(14, 5, 6), 1, 0.0);
    const SpectralData sd = eigensolve(fx.forms, 14);
    fx.cfg.lambda = 0.5 * (sd.value(1) + sd.value(2));
    fx.cfg.seed = 9;
    const GroundStateResult one = ground_state(fx.problem(), fx.cfg, sd);
    fx.cfg.threads = 4;
    const GroundStateResult four = ground_state(fx.problem(), fx.cfg, sd);
    EXPECT_EQ(one.u, four.u);
    EXPECT_EQ(one.level, four.level);
}

TEST(GroundState, DefocusingBelowSpectrumHasNoNontrivialState)
{
    Fixture fx(path_graph(3), -1, 0.5);
    const GroundStateResult r = ground_state(fx.problem(), fx.cfg, fx.spectrum());
    EXPECT_EQ(r.status, "no_nontrivial");
    EXPECT_FALSE(r.nontrivial());
}

TEST(NoSolution, PathThreeAndRandomGraphCollapse)
{
    const std::vector<WeightedGraph> graphs{path_graph(3), random_connected_graph(15, 77, 10)};
    for (const auto& g : graphs) {
        Fixture fx(g, -1, 0.5);
        const SpectralData sd = eigensolve(fx.forms, g.size());
        for (double lambda : {0.5, sd.value(0)}) {
            fx.cfg.lambda = lambda;
            const NoSolutionReport rep = verify_no_solution(fx.problem(), fx.cfg, sd, 1000);
            EXPECT_TRUE(rep.certified());
            EXPECT_EQ(rep.runs.size(), 8u);
            EXPECT_EQ(rep.samples, 1000u);
            EXPECT_EQ(rep.positive_samples, 1000u);
            for (const auto& run : rep.runs) {
                EXPECT_LT(run.final_norm_E, 1e-6);
            }
        }
    }
}

TEST(CriticalValue, SingleVertexSaturatesAndZeroIsSkipped)
{
    Fixture fx(path_graph(1), 1, 0.0);
    const Problem pb = fx.problem();
    const GroundStateResult gs = ground_state(pb, fx.cfg, fx.spectrum());
    const CriticalValueReport rep = check_critical_value_bounds(gs, pb);
    EXPECT_NEAR(rep.C1, 4.0, 1e-15);
    EXPECT_NEAR(rep.lp_power, 1.0, 1e-9);
    EXPECT_NEAR(rep.C1 * rep.level, 1.0, 1e-9);
    EXPECT_TRUE(rep.bound_lp_ok);

    GroundStateResult zero = gs;
    zero.status = "no_nontrivial";
    zero.u = Vector::Zero(1);
    const CriticalValueReport skipped = check_critical_value_bounds(zero, pb);
    EXPECT_TRUE(skipped.skipped);
    EXPECT_FALSE(skipped.note.empty());

    GroundStateResult forged = gs;
    forged.u *= 2.0;
    EXPECT_THROW(check_critical_value_bounds(forged, pb), SolverError);
}
