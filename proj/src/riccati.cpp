#include "semidec/riccati.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <complex>
#include <sstream>

namespace semidec {

namespace {

// G and the residual of the equation actually being solved at this point.
struct PointData {
    Eigen::MatrixXd a, g, q; // residual form a^T p + p a - p g p + q
    // Evaluates the generalized-form residual when iso is present, else the plain one.
    std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)> residual;
};

PointData make_point_data(const ParametricLqr& spec, double lambda) {
    PointData d;
    Eigen::MatrixXd a = spec.a(lambda);
    Eigen::MatrixXd b = spec.b(lambda);
    Eigen::MatrixXd c = spec.c(lambda);
    Eigen::MatrixXd s = spec.s(lambda);
    if (!a.allFinite() || !b.allFinite() || !c.allFinite() || !s.allFinite())
        throw EvaluationError("are_pointwise: non-finite symbol value");

    if ((s - s.transpose()).norm() > 1e-12 * std::max(1.0, s.norm()))
        throw InvalidArgument("are_pointwise: s(lambda) is not symmetric");
    Eigen::LLT<Eigen::MatrixXd> s_fact(s);
    if (s_fact.info() != Eigen::Success)
        throw InvalidArgument("are_pointwise: s(lambda) is not positive definite");
    Eigen::MatrixXd g = b * s_fact.solve(b.transpose());
    Eigen::MatrixXd q = c.transpose() * c;

    d.a = a;
    d.q = q;
    if (spec.iso) {
        const double pv = spec.iso->phi_V(lambda);
        const double pvp = spec.iso->phi_Vp(lambda);
        const double pz = spec.iso->phi_Z(lambda);
        if (pv == 0.0 || pvp == 0.0 || pz == 0.0)
            throw InvalidArgument("are_pointwise: singular scalar map");
        d.g = (pv / pvp) * g;
        d.residual = [a, g, q, pv, pvp](const Eigen::MatrixXd& p) {
            // phi_Vp a^T p phi_Vp^-1 phi_V + phi_V p a
            //   - phi_V p g p phi_Vp^-1 phi_V + phi_Z q phi_Z^-1 phi_V
            return pvp * a.transpose() * p * (pv / pvp) + pv * p * a -
                   pv * (p * g * p) * (pv / pvp) + q * pv;
        };
    } else {
        d.g = g;
        d.residual = [a, g, q](const Eigen::MatrixXd& p) {
            return a.transpose() * p + p * a - p * g * p + q;
        };
    }
    return d;
}

// vec(A^T X + X A) = (I (x) A^T + A^T (x) I) vec(X); n stays tiny here.
Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& a, const Eigen::MatrixXd& rhs) {
    const int n = static_cast<int>(a.rows());
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n * n, n * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int l = 0; l < n; ++l) {
                k(i + j * n, l + j * n) += a(l, i); // A^T X term
                k(i + j * n, i + l * n) += a(l, j); // X A term
            }
    Eigen::VectorXd vec_rhs = Eigen::Map<const Eigen::VectorXd>(rhs.data(), n * n);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(k);
    if (!lu.isInvertible()) throw SolverFailure("lyapunov solve: singular closed-loop operator");
    Eigen::VectorXd x = lu.solve(vec_rhs);
    return Eigen::Map<Eigen::MatrixXd>(x.data(), n, n);
}

void check_solution(const Eigen::MatrixXd& a, const Eigen::MatrixXd& g, const Eigen::MatrixXd& p,
                    double lambda) {
    const int n = static_cast<int>(p.rows());
    if ((p - p.transpose()).norm() > 1e-10) {
        std::ostringstream msg;
        msg << "are_pointwise: non-symmetric solution at lambda = " << lambda;
        throw SolverFailure(msg.str());
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (p + p.transpose()));
    if (es.eigenvalues().minCoeff() < -1e-10) {
        std::ostringstream msg;
        msg << "are_pointwise: indefinite solution at lambda = " << lambda;
        throw SolverFailure(msg.str());
    }
    Eigen::EigenSolver<Eigen::MatrixXd> cl(a - g * p);
    for (int i = 0; i < n; ++i)
        if (cl.eigenvalues()(i).real() >= 0.0) {
            std::ostringstream msg;
            msg << "are_pointwise: closed loop not stable at lambda = " << lambda;
            throw SolverFailure(msg.str());
        }
}

} // namespace

Eigen::MatrixXd solve_are_hamiltonian(const Eigen::MatrixXd& a, const Eigen::MatrixXd& g,
                                      const Eigen::MatrixXd& q) {
    const int n = static_cast<int>(a.rows());
    Eigen::MatrixXd h(2 * n, 2 * n);
    h.topLeftCorner(n, n) = a;
    h.topRightCorner(n, n) = -g;
    h.bottomLeftCorner(n, n) = -q;
    h.bottomRightCorner(n, n) = -a.transpose();

    Eigen::EigenSolver<Eigen::MatrixXd> es(h);
    if (es.info() != Eigen::Success) throw SolverFailure("hamiltonian eigensolve failed");

    Eigen::MatrixXcd basis(2 * n, n);
    int count = 0;
    for (int i = 0; i < 2 * n; ++i) {
        if (es.eigenvalues()(i).real() < 0.0) {
            if (count == n) throw SolverFailure("hamiltonian: too many stable eigenvalues");
            basis.col(count++) = es.eigenvectors().col(i);
        }
    }
    if (count != n) throw SolverFailure("hamiltonian: no stabilizing solution found");

    Eigen::MatrixXcd x = basis.topRows(n);
    Eigen::MatrixXcd y = basis.bottomRows(n);
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(x);
    if (!lu.isInvertible())
        throw SolverFailure("hamiltonian: stable subspace not a graph over the state space");
    Eigen::MatrixXd p = (y * lu.inverse()).real();
    return 0.5 * (p + p.transpose());
}

ArePointSolution are_pointwise(const ParametricLqr& spec, double lambda, double tol,
                               const Eigen::MatrixXd* warm_start) {
    PointData d = make_point_data(spec, lambda);

    Eigen::MatrixXd p;
    if (warm_start && warm_start->rows() == d.a.rows()) {
        p = *warm_start;
    } else {
        p = solve_are_hamiltonian(d.a, d.g, d.q);
    }

    double res = d.residual(p).norm();
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 60 && res > tol; ++it) {
        // Newton step: (A - G P)^T D + D (A - G P) = -R(P) in the plain variables.
        Eigen::MatrixXd plain = d.a.transpose() * p + p * d.a - p * d.g * p + d.q;
        Eigen::MatrixXd delta = solve_lyapunov(d.a - d.g * p, -plain);
        p += delta;
        p = 0.5 * (p + p.transpose());
        prev = res;
        res = d.residual(p).norm();
        if (res > tol && res >= 0.5 * prev && it > 4) {
            // A failed warm start still has the Hamiltonian route available.
            if (warm_start) return are_pointwise(spec, lambda, tol, nullptr);
            std::ostringstream msg;
            msg << "are_pointwise: residual stagnation at lambda = " << lambda
                << " (residual " << res << ")";
            throw ConvergenceFailure(msg.str());
        }
    }
    if (res > tol) {
        if (warm_start) return are_pointwise(spec, lambda, tol, nullptr);
        std::ostringstream msg;
        msg << "are_pointwise: residual " << res << " above tolerance at lambda = " << lambda;
        throw ConvergenceFailure(msg.str());
    }
    check_solution(d.a, d.g, p, lambda);

    ArePointSolution sol;
    sol.lambda = lambda;
    sol.p = p;
    sol.residual_norm = res;
    return sol;
}

Eigen::MatrixXd gain_pointwise(const ParametricLqr& spec, const ArePointSolution& sol) {
    Eigen::MatrixXd b = spec.b(sol.lambda);
    if (spec.iso) {
        const double pv = spec.iso->phi_V(sol.lambda);
        const double pvp = spec.iso->phi_Vp(sol.lambda);
        return b.transpose() * (pv / (pvp * pvp)) * sol.p;
    }
    Eigen::MatrixXd s = spec.s(sol.lambda);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(s);
    if (!lu.isInvertible()) throw InvalidArgument("gain_pointwise: singular s(lambda)");
    return lu.solve(b.transpose() * sol.p);
}

namespace {

struct GalerkinBasis {
    LglRule rule;
    Eigen::VectorXd lambdas;        // quadrature nodes mapped to the interval
    Eigen::VectorXd scaled_weights; // (len/2) * w_q
    Eigen::MatrixXd b;              // b(k, q) = P_k(x_q)
};

GalerkinBasis make_basis(SpectralInterval interval, int max_degree, int quad_nodes) {
    GalerkinBasis gb;
    int nq = quad_nodes > 0 ? quad_nodes : 2 * max_degree + 2;
    if (nq < 2 * max_degree + 2) nq = 2 * max_degree + 2;
    gb.rule = lgl_rule(nq);
    gb.lambdas.resize(nq);
    gb.scaled_weights.resize(nq);
    gb.b.resize(max_degree + 1, nq);
    for (int q = 0; q < nq; ++q) {
        gb.lambdas(q) = interval.from_unit(gb.rule.nodes(q));
        gb.scaled_weights(q) = 0.5 * interval.length() * gb.rule.weights(q);
        for (int k = 0; k <= max_degree; ++k) gb.b(k, q) = legendre_eval(k, gb.rule.nodes(q));
    }
    return gb;
}

// Solves: find u in P_N with integral u * factor * eta = integral rhs * eta for all eta in P_N.
Eigen::VectorXd weighted_galerkin_solve(const GalerkinBasis& gb, int degree,
                                        const Eigen::VectorXd& factor_at_nodes,
                                        const Eigen::VectorXd& rhs_at_nodes) {
    const int n = degree + 1;
    const int nq = static_cast<int>(gb.lambdas.size());
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    for (int q = 0; q < nq; ++q) {
        const double wq = gb.scaled_weights(q);
        for (int j = 0; j < n; ++j) {
            const double bj = gb.b(j, q);
            rhs(j) += wq * bj * rhs_at_nodes(q);
            for (int k = 0; k < n; ++k) m(j, k) += wq * bj * factor_at_nodes(q) * gb.b(k, q);
        }
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
    if (!lu.isInvertible()) throw AssemblyFailure("galerkin step: singular system matrix");
    return lu.solve(rhs);
}

Eigen::VectorXd eval_coeffs_at_nodes(const GalerkinBasis& gb, const Eigen::VectorXd& coeffs) {
    return gb.b.topRows(coeffs.size()).transpose() * coeffs;
}

double step_l2_norm(SpectralInterval interval, const Eigen::VectorXd& delta) {
    double acc = 0.0;
    for (int k = 0; k < delta.size(); ++k) acc += delta(k) * delta(k) * 2.0 / (2.0 * k + 1.0);
    return std::sqrt(0.5 * interval.length() * acc);
}

} // namespace

GalerkinResult galerkin_semi_implicit(WeakForm form, SpectralInterval interval,
                                      const std::vector<int>& degrees,
                                      const std::vector<SpectralFunction>& init,
                                      const GalerkinOptions& opts) {
    const size_t ncomp = (form == WeakForm::HeatScalar) ? 1 : 2;
    if (degrees.size() != ncomp)
        throw InvalidArgument("galerkin_semi_implicit: wrong number of degrees");
    if (!init.empty() && init.size() != ncomp)
        throw InvalidArgument("galerkin_semi_implicit: wrong number of initial components");

    std::vector<double> eps = opts.eps;
    if (eps.empty()) eps.assign(ncomp, 1e-12);
    if (eps.size() != ncomp)
        throw InvalidArgument("galerkin_semi_implicit: wrong number of thresholds");

    int max_degree = 0;
    for (int d : degrees) max_degree = std::max(max_degree, d);
    GalerkinBasis gb = make_basis(interval, max_degree, opts.quad_nodes);
    const int nq = static_cast<int>(gb.lambdas.size());

    std::vector<Eigen::VectorXd> coeffs(ncomp);
    for (size_t i = 0; i < ncomp; ++i) {
        coeffs[i] = Eigen::VectorXd::Zero(degrees[i] + 1);
        if (!init.empty()) {
            const Eigen::VectorXd& c0 = init[i].coeffs();
            coeffs[i].head(std::min<Eigen::Index>(c0.size(), coeffs[i].size())) =
                c0.head(std::min<Eigen::Index>(c0.size(), coeffs[i].size()));
        }
    }

    GalerkinResult out;
    out.step_norms.resize(ncomp);

    for (int m = 0; m < opts.max_iter; ++m) {
        bool done = true;
        if (form == WeakForm::HeatScalar) {
            Eigen::VectorXd pm = eval_coeffs_at_nodes(gb, coeffs[0]);
            Eigen::VectorXd factor = (gb.lambdas.array() * pm.array() + 2.0).matrix();
            Eigen::VectorXd next = weighted_galerkin_solve(gb, degrees[0], factor, gb.lambdas);
            double step = step_l2_norm(interval, next - coeffs[0]);
            out.step_norms[0].push_back(step);
            coeffs[0] = next;
            done = step <= eps[0];
        } else {
            Eigen::VectorXd k1m = eval_coeffs_at_nodes(gb, coeffs[0]);
            Eigen::VectorXd k2m = eval_coeffs_at_nodes(gb, coeffs[1]);
            Eigen::VectorXd factor1 = (gb.lambdas.array() * k1m.array() + 2.0).matrix();
            Eigen::VectorXd next1 = weighted_galerkin_solve(gb, degrees[0], factor1,
                                                            Eigen::VectorXd::Ones(nq));
            // The second update consumes the fresh first component.
            Eigen::VectorXd k1p = eval_coeffs_at_nodes(gb, next1);
            Eigen::VectorXd factor2 = (k2m.array() + 1.0).matrix();
            Eigen::VectorXd rhs2 = (2.0 * k1p.array() + k2m.array()).matrix();
            Eigen::VectorXd next2 = weighted_galerkin_solve(gb, degrees[1], factor2, rhs2);

            double step1 = step_l2_norm(interval, next1 - coeffs[0]);
            double step2 = step_l2_norm(interval, next2 - coeffs[1]);
            out.step_norms[0].push_back(step1);
            out.step_norms[1].push_back(step2);
            coeffs[0] = next1;
            coeffs[1] = next2;
            done = step1 <= eps[0] && step2 <= eps[1];
        }
        if (done) {
            out.iterations = m + 1;
            for (size_t i = 0; i < ncomp; ++i)
                out.components.emplace_back(interval, coeffs[i]);
            return out;
        }
    }
    throw ConvergenceFailure("galerkin_semi_implicit: max_iter exceeded", out.step_norms);
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("fit_slope: need >= 2 points");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double denom = n * sxx - sx * sx;
    if (denom == 0.0) throw InvalidArgument("fit_slope: degenerate abscissae");
    return (n * sxy - sx * sy) / denom;
}

double fit_decay_rate(const std::vector<double>& trace) {
    if (trace.size() < 4) throw InvalidArgument("fit_decay_rate: need >= 4 entries");
    std::vector<double> x(trace.size()), y(trace.size());
    for (size_t i = 0; i < trace.size(); ++i) {
        if (!(trace[i] > 0.0)) throw InvalidArgument("fit_decay_rate: nonpositive entry");
        x[i] = static_cast<double>(i);
        y[i] = std::log(trace[i]);
    }
    return fit_slope(x, y);
}

} // namespace semidec
