#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include "semidec/harness.hpp"
#include "semidec/rational.hpp"
#include "semidec/riccati.hpp"

using namespace semidec;

namespace {

using cd = std::complex<double>;

// Plain power-sum evaluation, kept separate from the library's Horner path.
cd naive_eval(const Eigen::VectorXd& num, const Eigen::VectorXd& den, cd x) {
    cd n(0, 0), d(0, 0);
    for (int k = 0; k < num.size(); ++k) n += num(k) * std::pow(x, k);
    for (int k = 0; k < den.size(); ++k) d += den(k) * std::pow(x, k);
    return n / d;
}

Eigen::VectorXd logspace(double lo_exp, double hi_exp, int count) {
    Eigen::VectorXd out(count);
    for (int k = 0; k < count; ++k)
        out(k) = std::pow(10.0, lo_exp + (hi_exp - lo_exp) * k / (count - 1.0));
    return out;
}

} // namespace

TEST_CASE("fit_polynomial converts Legendre coefficients to monomials") {
    SpectralInterval iv(0.0, 1.0);
    // lambda/2 on (0,1] is 1/4 + (1/4) P_1(x(lambda)).
    Eigen::VectorXd c(2);
    c << 0.25, 0.25;
    RationalMatrixFunction r = fit_polynomial(SpectralFunction(iv, c));
    REQUIRE(r.entry().num.size() == 2);
    CHECK(r.entry().num(0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(r.entry().num(1) == doctest::Approx(0.5).epsilon(1e-14));
    REQUIRE(r.entry().den.size() == 1);
    CHECK(r.entry().den(0) == doctest::Approx(1.0));

    RationalMatrixFunction k =
        fit_polynomial(SpectralFunction(iv, Eigen::VectorXd::Constant(1, 3.0)));
    CHECK(k.entry().num(0) == doctest::Approx(3.0));

    CHECK_THROWS_AS(fit_polynomial(SpectralFunction(iv, Eigen::VectorXd::Ones(32))),
                    ConditioningError);
}

TEST_CASE("monomial conversion of the converged heat gain matches Legendre evaluation") {
    auto res = galerkin_semi_implicit(WeakForm::HeatScalar, SpectralInterval(0.0, 1.0), {10});
    const SpectralFunction& p = res.components[0];
    RationalMatrixFunction r = fit_polynomial(p);
    for (int g = 0; g < 200; ++g) {
        const double lambda = g / 199.0;
        CHECK(std::abs(r.eval(cd(lambda, 0.0)).real() - p.eval(lambda)) < 1e-9);
    }
}

TEST_CASE("fit_polynomial on samples recovers polynomial data") {
    Eigen::VectorXd nodes = Eigen::VectorXd::LinSpaced(30, 0.0, 1.0);
    Eigen::VectorXd vals(30);
    for (int k = 0; k < 30; ++k) vals(k) = 1.0 - 2.0 * nodes(k) + 0.5 * std::pow(nodes(k), 3);
    RationalMatrixFunction r = fit_polynomial(SampleSet::scalar(nodes, vals), 3);
    CHECK(r.entry().num(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.entry().num(1) == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(std::abs(r.entry().num(2)) < 1e-12);
    CHECK(r.entry().num(3) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK_THROWS_AS(fit_polynomial(SampleSet::scalar(nodes, vals), 31), ConditioningError);
}

TEST_CASE("fit_rational_ls recovers exact rational targets") {
    Eigen::VectorXd nodes = Eigen::VectorXd::LinSpaced(25, 0.05, 1.0);
    Eigen::VectorXd square(25);
    for (int k = 0; k < 25; ++k) square(k) = nodes(k) * nodes(k);
    RationalFit quad = fit_rational_ls(SampleSet::scalar(nodes, square), {2, 0});
    for (int k = 0; k < 25; ++k)
        CHECK(std::abs(quad.fn.eval(cd(nodes(k), 0)).real() - square(k)) <= 1e-12);

    Eigen::VectorXd lognodes = logspace(-2.0, 0.0, 50);
    Eigen::VectorXd vals(50);
    for (int k = 0; k < 50; ++k) vals(k) = 1.0 / (lognodes(k) + 0.1);
    RationalFit inv = fit_rational_ls(SampleSet::scalar(lognodes, vals), {0, 1});
    // normalized denominator: num = 10, den = 1 + 10 lambda
    CHECK(inv.fn.entry().num(0) == doctest::Approx(10.0).epsilon(1e-10));
    CHECK(inv.fn.entry().den(0) == doctest::Approx(1.0));
    CHECK(inv.fn.entry().den(1) == doctest::Approx(10.0).epsilon(1e-10));
    for (int k = 0; k < 50; ++k)
        CHECK(std::abs(inv.fn.eval(cd(lognodes(k), 0)).real() - vals(k)) <= 1e-12);
}

TEST_CASE("fit_rational_ls rejects under-determined and ambiguous systems") {
    Eigen::VectorXd nodes = Eigen::VectorXd::LinSpaced(5, 0.1, 1.0);
    Eigen::VectorXd vals = nodes;
    CHECK_THROWS_AS(fit_rational_ls(SampleSet::scalar(nodes, vals), {2, 1}), InvalidArgument);

    // x^2 fitted with degrees (3,1): any common linear factor solves the
    // linearized equations, so the nullspace has dimension 2.
    Eigen::VectorXd many = Eigen::VectorXd::LinSpaced(40, 0.05, 1.0);
    Eigen::VectorXd squares(40);
    for (int k = 0; k < 40; ++k) squares(k) = many(k) * many(k);
    CHECK_THROWS_AS(fit_rational_ls(SampleSet::scalar(many, squares), {3, 1}), AmbiguousFit);
}

TEST_CASE("fit_rational_ls refuses a denominator root inside the sample hull") {
    // Target with a genuine pole at 0.5 interior to the sampled interval.
    std::vector<double> xs, ys;
    for (int k = 0; k < 60; ++k) {
        const double x = 0.1 + 0.8 * k / 59.0;
        if (std::abs(x - 0.5) < 0.02) continue;
        xs.push_back(x);
        ys.push_back(1.0 / (x - 0.5));
    }
    Eigen::VectorXd nodes = Eigen::Map<Eigen::VectorXd>(xs.data(), xs.size());
    Eigen::VectorXd vals = Eigen::Map<Eigen::VectorXd>(ys.data(), ys.size());
    CHECK_THROWS_AS(fit_rational_ls(SampleSet::scalar(nodes, vals), {0, 1}), PoleInInterval);
}

TEST_CASE("eval at complex arguments") {
    RationalMatrixFunction id = RationalMatrixFunction::scalar(
        (Eigen::VectorXd(2) << 0.0, 1.0).finished(), Eigen::VectorXd::Ones(1));
    CHECK(std::abs(id.eval(cd(0.0, 1.0)) - cd(0.0, 1.0)) < 1e-15);

    RationalMatrixFunction two = RationalMatrixFunction::scalar(
        Eigen::VectorXd::Constant(1, 2.0), Eigen::VectorXd::Ones(1));
    CHECK(std::abs(two.eval(cd(-3.0, 7.0)) - cd(2.0, 0.0)) < 1e-15);

    std::mt19937 rng(42);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Eigen::VectorXd num(6), den(3);
    for (int k = 0; k < 6; ++k) num(k) = dist(rng);
    den << 1.0, dist(rng), dist(rng);
    RationalMatrixFunction r = RationalMatrixFunction::scalar(num, den);
    for (int t = 0; t < 20; ++t) {
        cd x(2.0 * dist(rng), 2.0 * dist(rng));
        cd expected = naive_eval(num, den, x);
        CHECK(std::abs(r.eval(x) - expected) <= 1e-11 * std::max(1.0, std::abs(expected)));
    }
}

TEST_CASE("eval reports a pole hit") {
    RationalMatrixFunction r = RationalMatrixFunction::scalar(
        Eigen::VectorXd::Ones(1), (Eigen::VectorXd(2) << -0.5, 1.0).finished());
    CHECK_THROWS_AS(r.eval(cd(0.5, 0.0)), PoleEvaluation);
}

TEST_CASE("poles") {
    RationalMatrixFunction r1 = RationalMatrixFunction::scalar(
        Eigen::VectorXd::Ones(1), (Eigen::VectorXd(2) << -0.5, 1.0).finished());
    auto p1 = r1.poles();
    REQUIRE(p1.size() == 1);
    CHECK(std::abs(p1[0] - cd(0.5, 0.0)) < 1e-12);

    RationalMatrixFunction r2 = RationalMatrixFunction::scalar(
        Eigen::VectorXd::Ones(1), (Eigen::VectorXd(3) << 1.0, 0.0, 1.0).finished());
    auto p2 = r2.poles();
    REQUIRE(p2.size() == 2);
    std::sort(p2.begin(), p2.end(), [](cd a, cd b) { return a.imag() < b.imag(); });
    CHECK(std::abs(p2[0] - cd(0.0, -1.0)) < 1e-12);
    CHECK(std::abs(p2[1] - cd(0.0, 1.0)) < 1e-12);

    RationalMatrixFunction poly = RationalMatrixFunction::scalar(
        (Eigen::VectorXd(3) << 1.0, 2.0, 3.0).finished(), Eigen::VectorXd::Ones(1));
    CHECK(poly.poles().empty());
}

TEST_CASE("fitted poles recover the target's poles") {
    Eigen::VectorXd nodes = Eigen::VectorXd::LinSpaced(60, 0.05, 1.0);
    Eigen::VectorXd vals(60);
    for (int k = 0; k < 60; ++k) vals(k) = 1.0 / ((nodes(k) + 0.2) * (nodes(k) + 0.3));
    RationalFit fit = fit_rational_ls(SampleSet::scalar(nodes, vals), {0, 2});
    auto roots = fit.fn.poles();
    REQUIRE(roots.size() == 2);
    std::sort(roots.begin(), roots.end(), [](cd a, cd b) { return a.real() < b.real(); });
    CHECK(std::abs(roots[0] - cd(-0.3, 0.0)) < 1e-8);
    CHECK(std::abs(roots[1] - cd(-0.2, 0.0)) < 1e-8);
}

TEST_CASE("sup_error") {
    RationalMatrixFunction r = RationalMatrixFunction::scalar(
        (Eigen::VectorXd(3) << 0.3, -1.0, 2.0).finished(), Eigen::VectorXd::Ones(1));
    SpectralInterval iv(0.0, 1.0);
    auto exact = [&](double x) { return 0.3 - x + 2.0 * x * x; };
    CHECK(sup_error(exact, r, iv, 500) <= 1e-13);
    auto shifted = [&](double x) { return exact(x) + 0.01; };
    CHECK(sup_error(shifted, r, iv, 500) == doctest::Approx(0.01).epsilon(1e-10));
    CHECK_THROWS_AS(sup_error(exact, r, iv, 50), InvalidArgument);

    auto res = galerkin_semi_implicit(WeakForm::HeatScalar, SpectralInterval(0.0, 1.0), {10});
    RationalMatrixFunction pn = fit_polynomial(res.components[0]);
    auto p_exact = [](double x) { return x / (1.0 + std::sqrt(1.0 + x * x)); };
    CHECK(sup_error(p_exact, pn, SpectralInterval(0.0, 1.0), 1000) <= 1e-4);
}

TEST_CASE("common scaling of numerator and denominator leaves values unchanged") {
    Eigen::VectorXd nodes = Eigen::VectorXd::LinSpaced(50, 0.05, 1.0);
    Eigen::VectorXd vals(50);
    for (int k = 0; k < 50; ++k) vals(k) = std::sqrt(1.0 + nodes(k));
    RationalFit fit = fit_rational_ls(SampleSet::scalar(nodes, vals), {3, 2});
    const RationalEntry& e = fit.fn.entry();
    RationalMatrixFunction scaled =
        RationalMatrixFunction::scalar(17.25 * e.num, 17.25 * e.den);
    for (int k = 0; k < 50; ++k) {
        cd a = fit.fn.eval(cd(nodes(k), 0.0));
        cd b = scaled.eval(cd(nodes(k), 0.0));
        CHECK(std::abs(a - b) <= 1e-12 * std::abs(a));
    }
}

TEST_CASE("fit residual does not grow when the sample count grows") {
    auto k1 = reference_gain(ExampleId::Heat2DBoundary, 4)[0];
    std::vector<double> residuals;
    for (int count : {40, 70, 100}) {
        Eigen::VectorXd nodes = logspace(-2.0, 0.0, count);
        Eigen::VectorXd vals(count);
        for (int k = 0; k < count; ++k) vals(k) = k1(nodes(k));
        RationalFit fit = fit_rational_ls(SampleSet::scalar(nodes, vals), {19, 3});
        residuals.push_back(fit.residual[0]);
    }
    // Non-increase within 10% slack, floored at machine noise where the
    // ordering carries no signal.
    CHECK(residuals[1] <= std::max(residuals[0] * 1.1, 1e-13));
    CHECK(residuals[2] <= std::max(residuals[1] * 1.1, 1e-13));
}

TEST_CASE("json round trip is exact") {
    Eigen::VectorXd nodes = Eigen::VectorXd::LinSpaced(40, 0.05, 1.0);
    std::vector<Eigen::MatrixXd> vals;
    for (int k = 0; k < 40; ++k) {
        Eigen::MatrixXd v(1, 2);
        v << std::exp(nodes(k)), 1.0 / (nodes(k) + 2.0);
        vals.push_back(v);
    }
    RationalFit fit = fit_rational_ls(SampleSet(nodes, vals), {{{3, 1}, {0, 1}}});
    RationalMatrixFunction back = RationalMatrixFunction::from_json(fit.fn.to_json());
    REQUIRE(back.rows() == 1);
    REQUIRE(back.cols() == 2);
    for (int j = 0; j < 2; ++j) {
        CHECK(back.entry(0, j).num == fit.fn.entry(0, j).num);
        CHECK(back.entry(0, j).den == fit.fn.entry(0, j).den);
    }
    CHECK(back.to_json() == fit.fn.to_json());
}
