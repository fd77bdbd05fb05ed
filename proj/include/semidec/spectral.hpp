#ifndef SEMIDEC_SPECTRAL_HPP
#define SEMIDEC_SPECTRAL_HPP

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "semidec/errors.hpp"

namespace semidec {

/// Real interval (sigma_min, sigma_max) enclosing the spectrum of the reference
/// operator. Endpooint openness is a quadrature policy, not a stored property:
/// rules place nodes at the closed hull and callers must only hand in integrands
/// that are finite there.
struct SpectralInterval {
    double lo;
    double hi;

    SpectralInterval(double lo_, double hi_) : lo(lo_), hi(hi_) {
        if (!(lo < hi)) throw InvalidArgument("SpectralInterval: need lo < hi");
    }

    double length() const { return hi - lo; }
    /// Affine map onto [-1, 1].
    double to_unit(double lambda) const { return (2.0 * lambda - lo - hi) / (hi - lo); }
    double from_unit(double x) const { return 0.5 * ((hi - lo) * x + lo + hi); }
};

/// Legendre-Gauss-Lobatto rule on [-1, 1]: endpoints plus the roots of P'_{n-1},
/// exact for polynomials of degree <= 2n-3.
struct LglRule {
    int n = 0;
    Eigen::VectorXd nodes;
    Eigen::VectorXd weights;
};

/// Value of the k-th Legendre polynomial by the three-term recurrence.
double legendre_eval(int k, double x);

/// First derivative of the k-th Legendre polynomial.
double legendre_deriv(int k, double x);

LglRule lgl_rule(int n);

/// Polynomial in the Legendre basis over a spectral interval; optionally
/// matrix-valued with one coefficient vector per entry (row-major).
class SpectralFunction {
public:
    SpectralFunction(SpectralInterval interval, Eigen::VectorXd coeffs);
    SpectralFunction(SpectralInterval interval, int rows, int cols,
                     std::vector<Eigen::VectorXd> entry_coeffs);

    const SpectralInterval& interval() const { return interval_; }
    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool is_scalar() const { return rows_ == 1 && cols_ == 1; }
    int degree() const { return static_cast<int>(entries_[0].size()) - 1; }

    const Eigen::VectorXd& coeffs(int i = 0, int j = 0) const { return entries_[idx(i, j)]; }

    double eval(double lambda) const;
    double eval_entry(int i, int j, double lambda) const;
    Eigen::MatrixXd eval_matrix(double lambda) const;

    /// L2(I_sigma) norm from the coefficients (Legendre orthogonality).
    double l2_norm() const;

private:
    int idx(int i, int j) const { return i * cols_ + j; }

    SpectralInterval interval_;
    int rows_, cols_;
    std::vector<Eigen::VectorXd> entries_;
};

/// Discrete L2-orthogonal projection onto degree-N polynomials, sampled with an
/// LGL rule of quad_nodes points (>= N+2; default exactly N+2).
SpectralFunction project(const std::function<double(double)>& f, SpectralInterval interval,
                         int degree, int quad_nodes = -1);

/// ||f - g|| / ||g|| in L2(interval), quadrature with >= 64 LGL nodes.
double l2_relative_error(const std::function<double(double)>& f,
                         const std::function<double(double)>& g, SpectralInterval interval,
                         int quad_nodes = 64);
double l2_relative_error(const SpectralFunction& f, const std::function<double(double)>& g,
                         int quad_nodes = 64);

/// L2(interval) norm of a callable.
double l2_norm(const std::function<double(double)>& f, SpectralInterval interval,
               int quad_nodes = 64);

} // namespace semidec

#endif
