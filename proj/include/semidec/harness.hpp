#ifndef SEMIDEC_HARNESS_HPP
#define SEMIDEC_HARNESS_HPP

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "semidec/contour.hpp"
#include "semidec/operators.hpp"
#include "semidec/rational.hpp"
#include "semidec/riccati.hpp"

namespace semidec {

enum class ExampleId { Heat1D, Heat1DUnboundedB, Beam1D, Heat2DBoundary };

std::string example_name(ExampleId id);
ExampleId parse_example(const std::string& name);

struct ExampleParams {
    int mesh = 100;           // grid cells of the discrete operator
    int modes = 4;            // mode count J (Heat2DBoundary only), <= 8
    double length = -1.0;     // domain length; default pi (heat) / 4.73 (beam)
    double truncation = 1e-2; // low-frequency cut of the fitted interval (Heat2DBoundary)
};

/// A fully wired benchmark problem: symbols, spectral interval, discrete
/// operator, and the realized gain row with every change-of-space factor that
/// is a function of the operator already folded in.
struct ExampleProblem {
    ExampleId id = ExampleId::Heat1D;
    ExampleParams params;
    ParametricLqr lqr;
    BandedOperator op;
    /// Interval used for contour validation; for Heat2DBoundary the fitted
    /// (truncated) interval, elsewhere the full spectral interval.
    SpectralInterval realization_interval{0.0, 1.0};
    std::function<Eigen::RowVectorXd(double)> gain_symbol; // pointwise solve at lambda
};

ExampleProblem build_example(ExampleId id, const ExampleParams& params = {});

/// Closed-form (or pointwise-solve-backed, for Heat2DBoundary) references for
/// each realized gain component.
std::vector<std::function<double(double)>> reference_gain(ExampleId id, int modes = 4);

/// Heat benchmark reference control on continuum sine modes:
/// u(t, x) = -sum_i w_i e^{-(1/lambda_i + g(lambda_i)) t} g(lambda_i) phi_i(x).
Eigen::VectorXd modal_reference_control(const std::function<double(double)>& gain,
                                        const Eigen::VectorXd& w0_modal, double t,
                                        const Eigen::VectorXd& x_grid, double length = M_PI);
Eigen::VectorXd modal_reference_control(const SpectralFunction& gain,
                                        const Eigen::VectorXd& w0_modal, double t,
                                        const Eigen::VectorXd& x_grid, double length = M_PI);

struct RealizationConfig {
    int degree = 10;                                // Galerkin degree per component
    std::vector<std::pair<int, int>> fit_degrees;   // per-mode rational degrees (Heat2DBoundary)
    Contour contour = Contour::circle(5.0);
    int quad_points = 11;                           // contour nodes M
    int time_steps = 200;                           // composite-trapezoid steps on (0, T)
    int state_modes = 12;                           // modal band of the test initial state
    bool reference_on_realization_modes = false;    // self-comparison sanity mode
    int jobs = 1;                                   // fan-out degree for independent curves
};

struct StudyResult {
    std::string example;
    std::string study;
    std::map<std::string, std::string> config;
    struct Table {
        std::string name;
        std::vector<std::string> columns;
        std::vector<std::vector<double>> rows;
    };
    std::vector<Table> tables;
    std::map<std::string, double> rates;

    std::string to_json() const;
    static StudyResult from_json(const std::string& text);
    std::string table_csv(const Table& table) const; // appends the example-id column
};

/// Builds the realized gain of an example: Galerkin polynomial(s) for the heat
/// and beam benchmarks, per-mode rational fits on the truncated log grid for
/// the boundary-control benchmark.
RationalMatrixFunction realized_gain(const ExampleProblem& prob, const RealizationConfig& cfg);

/// Time-integrated relative error between the banded realization of the gain
/// and the modal reference control, one row per mesh, with the fitted h-order.
StudyResult spatial_error_study(ExampleId id, const ExampleParams& base,
                                const RealizationConfig& cfg, const std::vector<int>& mesh_list,
                                double horizon);

/// E(M) tables, one per circle radius, against the closed-form gain.
StudyResult quadrature_error_study(ExampleId id, const ExampleParams& base,
                                   const RealizationConfig& cfg, const std::vector<double>& radii,
                                   const std::vector<int>& m_list);

/// Per-mode rational fit of the boundary-control gain with fit errors on the
/// reporting grid 10^(-2 + n/100), n = 0..200.
struct BoundaryGainFit {
    RationalMatrixFunction fn;
    std::vector<double> fit_error;       // discrete l2, per mode
    std::vector<double> fit_residual;    // smallest/largest singular value, per mode
    Eigen::VectorXd report_grid;
};
BoundaryGainFit fit_boundary_gain(const ExampleProblem& prob,
                                  const std::vector<std::pair<int, int>>& degrees,
                                  int fit_nodes = 100);

/// E_j(M) of the boundary-control benchmark on the reporting grid.
StudyResult boundary_quadrature_study(const ExampleProblem& prob, const BoundaryGainFit& fit,
                                      const Contour& contour, const std::vector<int>& m_list);

/// Energy traces ||z_k||^2 of the implicit-Euler heat loop driven by the
/// realized feedback, for n_states seeded random initial states.
std::vector<std::vector<double>> closed_loop_energy(const ExampleProblem& prob,
                                                    const RationalMatrixFunction& gain,
                                                    const RealizationConfig& cfg, double dt,
                                                    double horizon, int n_states, unsigned seed);

/// Integrates dv/dt = v_yy + u on the control boundary by implicit Euler on
/// the Dirichlet stencil; u has one row per time level (including t=0).
Eigen::MatrixXd boundary_control_recover(const Eigen::MatrixXd& u, const Eigen::VectorXd& v0,
                                         double dt, double length = M_PI);

struct LocalityReport {
    int declared_width = 0;
    int observed_width = 0;
    Eigen::VectorXi node_volume; // distinct neighbors read per node and sweep
    double achieved_residual = 0.0;
};

/// Structural audit of the stationary iterative realization: every per-sweep
/// update of node j may read only nodes within the declared bandwidth.
LocalityReport locality_audit(const BandedOperator& op, const Contour& contour,
                              const TrapezoidRule& rule, int sweeps = 200, double damping = 0.5);

/// Converged coefficients of the degree-1 gain polynomial of the heat
/// benchmark, in the monomial basis.
std::pair<double, double> linear_gain_coefficients();

/// (sum |a-b|^2)^1/2 / (sum |b|^2)^1/2 on matching grids.
double discrete_l2_relative_error(const Eigen::VectorXd& approx, const Eigen::VectorXd& exact);

} // namespace semidec

#endif
