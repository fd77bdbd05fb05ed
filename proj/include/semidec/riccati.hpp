#ifndef SEMIDEC_RICCATI_HPP
#define SEMIDEC_RICCATI_HPP

#include <Eigen/Core>
#include <functional>
#include <optional>
#include <vector>

#include "semidec/spectral.hpp"

namespace semidec {

/// Scalar change-of-space maps for the unbounded-control variant; each is a
/// function of the reference operator, evaluated at a spectral point.
struct IsoFunctions {
    std::function<double(double)> phi_V;
    std::function<double(double)> phi_Vp; // dual-space map
    std::function<double(double)> phi_Z;
};

/// Matrix-valued symbol functions of the parametric LQR problem. s(lambda)
/// must be symmetric positive definite on the interval; all callables must be
/// finite on its interior.
struct ParametricLqr {
    int n_z = 1;
    int n_u = 1;
    int n_y = 1;
    std::function<Eigen::MatrixXd(double)> a;
    std::function<Eigen::MatrixXd(double)> b;
    std::function<Eigen::MatrixXd(double)> c;
    std::function<Eigen::MatrixXd(double)> s;
    SpectralInterval interval{0.0, 1.0};
    std::optional<IsoFunctions> iso;
};

struct ArePointSolution {
    double lambda = 0.0;
    Eigen::MatrixXd p;
    double residual_norm = 0.0;
};

/// Stabilizing solution of A^T P + P A - P G P + Q = 0 from the stable
/// invariant subspace of the Hamiltonian matrix [[A, -G], [-Q, -A^T]].
Eigen::MatrixXd solve_are_hamiltonian(const Eigen::MatrixXd& a, const Eigen::MatrixXd& g,
                                      const Eigen::MatrixXd& q);

/// Pointwise Riccati solve at a spectral point: Hamiltonian initialization (or
/// the supplied warm start) refined by Newton steps with Lyapunov linear
/// solves. With iso present the generalized equation is solved instead; the
/// scalar maps commute, so it reduces to a standard solve with a rescaled
/// control weight while the residual is evaluated on the generalized form.
ArePointSolution are_pointwise(const ParametricLqr& spec, double lambda, double tol = 1e-12,
                               const Eigen::MatrixXd* warm_start = nullptr);

/// Gain symbol at a solved point: s^-1 b^T p, or the dual-weighted form
/// b^T phi_Vp^-1 phi_V p phi_Vp^-1 when iso is present.
Eigen::MatrixXd gain_pointwise(const ParametricLqr& spec, const ArePointSolution& sol);

/// The two built-in weak formulations handled by the semi-implicit scheme.
enum class WeakForm {
    HeatScalar,  // find p with integral (lambda p^2 + 2 p - lambda) eta = 0
    BeamCoupled, // find (k1, k2) with lambda k1^2 + 2 k1 - 1 = 0, 2 k1 - k2^2 = 0 weakly
};

struct GalerkinOptions {
    std::vector<double> eps;   // per-component stop thresholds; default 1e-12
    int max_iter = 200;
    int quad_nodes = -1;       // default 2*max(degree)+2
};

struct GalerkinResult {
    std::vector<SpectralFunction> components;
    std::vector<std::vector<double>> step_norms; // per component, ||x^{m+1} - x^m||_L2
    int iterations = 0;
};

/// Semi-implicit Galerkin iteration in the Legendre basis; assembles each
/// linearized system with an LGL rule that integrates the trilinear terms
/// exactly and stops when every component step is below its threshold.
GalerkinResult galerkin_semi_implicit(WeakForm form, SpectralInterval interval,
                                      const std::vector<int>& degrees,
                                      const std::vector<SpectralFunction>& init = {},
                                      const GalerkinOptions& opts = {});

/// Least-squares slope of log(value) against index; needs >= 4 positive entries.
double fit_decay_rate(const std::vector<double>& trace);

/// Least-squares slope of y against x.
double fit_slope(const std::vector<double>& x, const std::vector<double>& y);

} // namespace semidec

#endif
