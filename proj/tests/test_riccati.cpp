#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>

#include "semidec/harness.hpp"
#include "semidec/riccati.hpp"

using namespace semidec;

namespace {

// Test-local stable-subspace oracle, independent of the library solver: build
// the Hamiltonian matrix explicitly, take the eigenvectors with negative real
// part, and form P = Y X^-1.
Eigen::MatrixXd oracle_riccati(const Eigen::MatrixXd& a, const Eigen::MatrixXd& g,
                               const Eigen::MatrixXd& q) {
    const int n = static_cast<int>(a.rows());
    Eigen::MatrixXd h(2 * n, 2 * n);
    h << a, -g, -q, -a.transpose();
    Eigen::EigenSolver<Eigen::MatrixXd> es(h);
    Eigen::MatrixXcd basis(2 * n, n);
    int count = 0;
    for (int i = 0; i < 2 * n; ++i)
        if (es.eigenvalues()(i).real() < 0.0) basis.col(count++) = es.eigenvectors().col(i);
    REQUIRE(count == n);
    Eigen::MatrixXcd x = basis.topRows(n);
    Eigen::MatrixXcd y = basis.bottomRows(n);
    Eigen::MatrixXd p = (y * x.inverse()).real();
    return 0.5 * (p + p.transpose());
}

ParametricLqr heat_problem() {
    ParametricLqr lqr;
    lqr.n_z = lqr.n_u = lqr.n_y = 1;
    lqr.a = [](double lambda) { return Eigen::MatrixXd::Constant(1, 1, -1.0 / lambda); };
    lqr.b = [](double) { return Eigen::MatrixXd::Constant(1, 1, 1.0); };
    lqr.c = [](double) { return Eigen::MatrixXd::Constant(1, 1, 1.0); };
    lqr.s = [](double) { return Eigen::MatrixXd::Constant(1, 1, 1.0); };
    lqr.interval = SpectralInterval(0.0, 1.0);
    return lqr;
}

double heat_p_exact(double lambda) { return lambda / (1.0 + std::sqrt(1.0 + lambda * lambda)); }
double beam_k1_exact(double lambda) { return 1.0 / (1.0 + std::sqrt(1.0 + lambda)); }
double beam_k2_exact(double lambda) { return std::sqrt(2.0 * beam_k1_exact(lambda)); }

} // namespace

TEST_CASE("are_pointwise scalar closed forms") {
    ParametricLqr lqr = heat_problem();
    auto sol = are_pointwise(lqr, 1.0);
    CHECK(sol.p(0, 0) == doctest::Approx(std::sqrt(2.0) - 1.0).epsilon(1e-10));
    CHECK(sol.residual_norm <= 1e-12);

    ParametricLqr integrator = heat_problem();
    integrator.a = [](double) { return Eigen::MatrixXd::Zero(1, 1); };
    auto sol2 = are_pointwise(integrator, 0.5);
    CHECK(sol2.p(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("are_pointwise matches the stable-subspace oracle on a 2-mode boundary problem") {
    ExampleParams params;
    params.modes = 2;
    params.mesh = 10;
    ExampleProblem prob = build_example(ExampleId::Heat2DBoundary, params);
    const double lambda = 0.5;
    auto sol = are_pointwise(prob.lqr, lambda);

    Eigen::MatrixXd a = prob.lqr.a(lambda);
    Eigen::MatrixXd b = prob.lqr.b(lambda);
    Eigen::MatrixXd g = b * b.transpose();
    Eigen::MatrixXd q = Eigen::MatrixXd::Identity(2, 2);
    Eigen::MatrixXd expected = oracle_riccati(a, g, q);
    CHECK((sol.p - expected).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("are_pointwise enforces symmetry, positivity, residual and stability") {
    ExampleParams params;
    params.modes = 3;
    params.mesh = 10;
    ExampleProblem prob = build_example(ExampleId::Heat2DBoundary, params);
    for (double lambda : {0.02, 0.1, 0.35, 0.7, 1.0}) {
        auto sol = are_pointwise(prob.lqr, lambda);
        CHECK((sol.p - sol.p.transpose()).norm() <= 1e-10);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sol.p);
        CHECK(es.eigenvalues().minCoeff() >= -1e-10);
        CHECK(sol.residual_norm <= 1e-12);
        Eigen::MatrixXd b = prob.lqr.b(lambda);
        Eigen::EigenSolver<Eigen::MatrixXd> cl(prob.lqr.a(lambda) -
                                               b * b.transpose() * sol.p);
        CHECK(cl.eigenvalues().real().maxCoeff() < 0.0);
    }
}

TEST_CASE("gain_pointwise") {
    ParametricLqr heat = heat_problem();
    auto sol = are_pointwise(heat, 0.4);
    CHECK(gain_pointwise(heat, sol)(0, 0) == doctest::Approx(sol.p(0, 0)).epsilon(1e-14));

    ExampleProblem beam = build_example(ExampleId::Beam1D, {.mesh = 10});
    auto beam_sol = are_pointwise(beam.lqr, 1.0);
    Eigen::MatrixXd q = gain_pointwise(beam.lqr, beam_sol);
    CHECK(q(0, 0) == doctest::Approx(std::sqrt(2.0) - 1.0).epsilon(1e-10));
    CHECK(q(0, 1) == doctest::Approx(std::sqrt(2.0 * (std::sqrt(2.0) - 1.0))).epsilon(1e-10));

    ExampleParams one_mode;
    one_mode.modes = 1;
    one_mode.mesh = 10;
    ExampleProblem heat2d = build_example(ExampleId::Heat2DBoundary, one_mode);
    auto sol2d = are_pointwise(heat2d.lqr, 1.0);
    CHECK(gain_pointwise(heat2d.lqr, sol2d)(0, 0) ==
          doctest::Approx(std::sqrt(2.0) / M_PI * sol2d.p(0, 0)).epsilon(1e-12));

    ParametricLqr bad = heat_problem();
    bad.s = [](double) { return Eigen::MatrixXd::Zero(1, 1); };
    CHECK_THROWS_AS(are_pointwise(bad, 1.0), InvalidArgument);
}

TEST_CASE("first semi-implicit iterate from zero is lambda/2") {
    // One step from zero solves 2 p^1 = lambda weakly; on (0,1] that is
    // 1/4 + (1/4) x in the Legendre variable.
    GalerkinOptions one;
    one.eps = {1e30}; // accept the first step
    auto first = galerkin_semi_implicit(WeakForm::HeatScalar, SpectralInterval(0.0, 1.0), {10},
                                        {}, one);
    REQUIRE(first.iterations == 1);
    const Eigen::VectorXd& c = first.components[0].coeffs();
    CHECK(c(0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(c(1) == doctest::Approx(0.25).epsilon(1e-12));
    for (int k = 2; k < c.size(); ++k) CHECK(std::abs(c(k)) < 1e-12);
}

TEST_CASE("warm initial data converges in one step") {
    auto converged = galerkin_semi_implicit(WeakForm::HeatScalar, SpectralInterval(0.0, 1.0),
                                            {10});
    auto warm = galerkin_semi_implicit(WeakForm::HeatScalar, SpectralInterval(0.0, 1.0), {10},
                                       {converged.components[0]});
    CHECK(warm.iterations <= 2);
    CHECK(l2_relative_error(warm.components[0], heat_p_exact) <= 1e-5);
}

TEST_CASE("exhausted iteration budget carries the trace") {
    GalerkinOptions opts;
    opts.max_iter = 3;
    try {
        galerkin_semi_implicit(WeakForm::HeatScalar, SpectralInterval(0.0, 1.0), {10}, {}, opts);
        FAIL("expected ConvergenceFailure");
    } catch (const ConvergenceFailure& e) {
        REQUIRE(e.traces.size() == 1);
        CHECK(e.traces[0].size() == 3);
    }
}

TEST_CASE("semi-implicit scheme converges to the closed forms") {
    auto heat = galerkin_semi_implicit(WeakForm::HeatScalar, SpectralInterval(0.0, 1.0), {10});
    CHECK(l2_relative_error(heat.components[0], heat_p_exact) <= 1e-5);

    auto beam = galerkin_semi_implicit(WeakForm::BeamCoupled, SpectralInterval(0.0, 1.0),
                                       {10, 10});
    CHECK(l2_relative_error(beam.components[0], beam_k1_exact) <= 1e-8);
    CHECK(l2_relative_error(beam.components[1], beam_k2_exact) <= 1e-8);
}

TEST_CASE("iteration traces decay at the documented exponential rates") {
    auto heat = galerkin_semi_implicit(WeakForm::HeatScalar, SpectralInterval(0.0, 1.0), {10});
    const double rate = fit_decay_rate(heat.step_norms[0]);
    CHECK(rate > -2.3);
    CHECK(rate < -1.3);

    auto beam = galerkin_semi_implicit(WeakForm::BeamCoupled, SpectralInterval(0.0, 1.0),
                                       {10, 10});
    for (int i = 0; i < 2; ++i) {
        const double r = fit_decay_rate(beam.step_norms[i]);
        CHECK(r > -2.4);
        CHECK(r < -1.3);
    }
}

TEST_CASE("fit_decay_rate") {
    CHECK(fit_decay_rate({1.0, std::exp(-1.0), std::exp(-2.0), std::exp(-3.0)}) ==
          doctest::Approx(-1.0).epsilon(1e-10));
    CHECK_THROWS_AS(fit_decay_rate({1.0, 0.5, -0.1, 0.2}), InvalidArgument);
    CHECK_THROWS_AS(fit_decay_rate({1.0, 0.5, 0.2}), InvalidArgument);
}

TEST_CASE("Galerkin output agrees with the pointwise solver at quadrature nodes") {
    // High degrees push the polynomial truncation error below the solver
    // tolerances, so the two routes must agree to 10x the larger tolerance.
    SpectralInterval iv(0.0, 1.0);
    auto heat = galerkin_semi_implicit(WeakForm::HeatScalar, iv, {24});
    ParametricLqr lqr = heat_problem();
    LglRule rule = lgl_rule(2 * 24 + 2);
    for (int q = 1; q + 1 < rule.n; q += 5) {
        const double lambda = iv.from_unit(rule.nodes(q));
        auto sol = are_pointwise(lqr, lambda);
        CHECK(std::abs(heat.components[0].eval(lambda) - sol.p(0, 0)) < 1e-11);
    }

    auto beam = galerkin_semi_implicit(WeakForm::BeamCoupled, iv, {20, 20});
    ExampleProblem prob = build_example(ExampleId::Beam1D, {.mesh = 10});
    LglRule rule2 = lgl_rule(2 * 20 + 2);
    for (int q = 1; q + 1 < rule2.n; q += 5) {
        const double lambda = iv.from_unit(rule2.nodes(q));
        auto sol = are_pointwise(prob.lqr, lambda);
        Eigen::MatrixXd g = gain_pointwise(prob.lqr, sol);
        CHECK(std::abs(beam.components[0].eval(lambda) - g(0, 0) / std::sqrt(lambda)) < 1e-11);
        CHECK(std::abs(beam.components[1].eval(lambda) - g(0, 1)) < 1e-11);
    }
}

TEST_CASE("generalized solve with identity maps coincides with the plain one") {
    ParametricLqr plain = heat_problem();
    ParametricLqr general = heat_problem();
    general.iso = IsoFunctions{[](double) { return 1.0; }, [](double) { return 1.0; },
                               [](double) { return 1.0; }};
    for (double lambda : {0.1, 0.3, 0.55, 0.8, 1.0}) {
        auto a = are_pointwise(plain, lambda);
        auto b = are_pointwise(general, lambda);
        CHECK(std::abs(a.p(0, 0) - b.p(0, 0)) < 1e-12);
    }
}

TEST_CASE("unbounded-control instantiation hits its closed form on a log grid") {
    ExampleProblem prob = build_example(ExampleId::Heat1DUnboundedB, {.mesh = 10});
    for (int k = 0; k < 50; ++k) {
        const double lambda = std::pow(10.0, -2.0 + 2.0 * k / 49.0);
        auto sol = are_pointwise(prob.lqr, lambda);
        const double expected = (1.0 + std::sqrt(1.0 + lambda)) / lambda;
        CHECK(std::abs(sol.p(0, 0) - expected) < 1e-10);
    }
}
