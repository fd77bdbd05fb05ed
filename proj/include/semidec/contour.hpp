#ifndef SEMIDEC_CONTOUR_HPP
#define SEMIDEC_CONTOUR_HPP

#include <Eigen/Core>
#include <complex>
#include <memory>
#include <vector>

#include "semidec/operators.hpp"
#include "semidec/rational.hpp"
#include "semidec/spectral.hpp"

namespace semidec {

/// Closed integration contour: a circle R e^{i theta} or an ellipse
/// (R1/2)(1 + cos theta) + i R2 sin theta centered at R1/2.
struct Contour {
    enum class Kind { Circle, Ellipse };
    Kind kind = Kind::Circle;
    double r = 1.0;  // circle radius
    double r1 = 1.0; // ellipse major axis (real direction)
    double r2 = 1.0; // ellipse minor axis (imaginary direction)

    static Contour circle(double radius);
    static Contour ellipse(double r1, double r2);

    std::complex<double> point(double theta) const;
    std::complex<double> derivative(double theta) const;
};

/// Uniform trapezoid rule on [0, 2pi): theta_l = 2pi (l-1)/M, weights 2pi/M.
struct TrapezoidRule {
    int m = 0;
    Eigen::VectorXd thetas;
    Eigen::VectorXd weights;
};

TrapezoidRule trapezoid_rule(int m);

/// Margins of the enclosure check: how far the spectral interval sits inside
/// the curve and how far every pole sits outside.
struct ContourReport {
    double spectrum_margin = 0.0;
    double pole_margin = std::numeric_limits<double>::infinity();
};

/// Winding-number check that [lo, hi] lies strictly inside the contour and
/// every pole strictly outside. Throws SpectrumNotEnclosed / PoleEnclosed with
/// the offending point.
ContourReport validate_contour(const Contour& contour, SpectralInterval interval,
                               const std::vector<std::complex<double>>& poles);

enum class SolverMode { Direct, Jacobi };

struct RealizeOptions {
    SolverMode mode = SolverMode::Direct;
    double jacobi_damping = 0.5;
    int jacobi_max_sweeps = 200000;
    double jacobi_tol = 1e-12;
};

struct RealizationResult {
    Eigen::MatrixXd output;             // dim x r.rows()
    std::vector<double> node_residuals; // one per quadrature node
    ContourReport report;
};

/// Quadrature of the Cauchy integral on the discrete operator: per node the
/// real block system is solved once per matrix entry and the first components
/// are accumulated in fixed ascending node order. Shifted factorizations are
/// cached, so one Realizer serves many states.
class Realizer {
public:
    Realizer(const BandedOperator& op, SpectralInterval interval, Contour contour,
             TrapezoidRule rule, RealizeOptions opts = {});

    /// z_cols holds one column per input component (r.cols() of them).
    RealizationResult apply(const RationalMatrixFunction& r, const Eigen::MatrixXd& z_cols) const;

    const ContourReport& validate(const std::vector<std::complex<double>>& poles) const;

private:
    const BandedOperator* op_;
    SpectralInterval interval_;
    Contour contour_;
    TrapezoidRule rule_;
    RealizeOptions opts_;
    std::vector<std::unique_ptr<ShiftedBlockSystem>> systems_;
    mutable ContourReport report_;
    mutable bool validated_ = false;
};

RealizationResult realize(const RationalMatrixFunction& r, const Contour& contour,
                          const TrapezoidRule& rule, const BandedOperator& op,
                          SpectralInterval interval, const Eigen::MatrixXd& z_cols,
                          RealizeOptions opts = {});

/// Same quadrature collapsed to a scalar argument:
/// (1/2pi) sum_l w_l Re[-i xi'(theta_l) r(xi_l) / (xi_l - lambda)].
double scalar_cauchy(const RationalMatrixFunction& r, const Contour& contour,
                     const TrapezoidRule& rule, double lambda, int i = 0, int j = 0);

struct ErrorCurvePoint {
    int m = 0;
    double err_l2 = 0.0; // function-space relative L2 error on the interval
    double err_op = 0.0; // spectral sup error over the operator eigenvalues, relative
};

/// E(M) for each M in m_list, measured both in L2(I_sigma) against `exact` and
/// as the relative sup over the operator spectrum (via the modal oracle).
std::vector<ErrorCurvePoint> realization_error_curve(const RationalMatrixFunction& r,
                                                     const std::function<double(double)>& exact,
                                                     const Contour& contour,
                                                     const BandedOperator& op,
                                                     SpectralInterval interval,
                                                     const std::vector<int>& m_list);

} // namespace semidec

#endif
