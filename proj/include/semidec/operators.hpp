#ifndef SEMIDEC_OPERATORS_HPP
#define SEMIDEC_OPERATORS_HPP

#include <Eigen/Core>
#include <complex>
#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

#include "semidec/errors.hpp"

namespace semidec {

/// Square banded matrix in LAPACK band storage (diagonals as rows of ab_,
/// entry (i,j) at ab_(kl+ku+i-j, j)) with an in-place dgbtrf/dgbtrs LU.
class BandedMatrix {
public:
    BandedMatrix(int n, int kl, int ku);

    int size() const { return n_; }
    int lower_bandwidth() const { return kl_; }
    int upper_bandwidth() const { return ku_; }

    void set(int i, int j, double value);
    double get(int i, int j) const;

    Eigen::VectorXd multiply(const Eigen::VectorXd& x) const;
    Eigen::MatrixXd dense() const;

    void factorize();
    bool factorized() const { return factorized_; }
    /// Solves A x = rhs with the stored LU (factorizes on first use).
    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

private:
    int n_, kl_, ku_;
    Eigen::MatrixXd ab_;         // unfactored bands
    mutable Eigen::MatrixXd lu_; // dgbtrf output (kl extra rows for pivoting)
    mutable std::vector<int> ipiv_;
    mutable bool factorized_ = false;
};

enum class OperatorRole { Laplacian1D, Biharmonic1D, Custom };

/// Grid-based discrete operator A_h; the spectral argument of all function
/// realizations is Lambda_h = A_h^-1 when inverse_defines_lambda is set (the
/// built-in constructors) and A_h itself otherwise.
class BandedOperator {
public:
    BandedOperator(BandedMatrix a, double h, OperatorRole role, bool inverse_defines_lambda,
                   int declared_bandwidth);

    int dim() const { return a_->size(); }
    double grid_spacing() const { return h_; }
    OperatorRole role() const { return role_; }
    bool inverse_defines_lambda() const { return inverse_; }
    /// Claimed communication width; the built-ins match their storage bands.
    int bandwidth() const { return declared_bandwidth_; }
    const BandedMatrix& matrix() const { return *a_; }

    Eigen::VectorXd apply_a(const Eigen::VectorXd& z) const { return a_->multiply(z); }
    Eigen::VectorXd apply_lambda(const Eigen::VectorXd& z) const;

private:
    std::shared_ptr<BandedMatrix> a_; // shared so operators stay cheap to copy
    double h_;
    OperatorRole role_;
    bool inverse_;
    int declared_bandwidth_;
};

/// (N-1)x(N-1) second-difference matrix with Dirichlet ends eliminated,
/// h = length / n_cells.
BandedOperator laplacian_1d_dirichlet(int n_cells, double length);

/// Fourth-difference matrix of the clamped beam: five-point interior rows and
/// the one-sided second-order boundary rows (2 h^3, -h^3/2 scaled by 1/h^4).
/// The boundary rows break symmetry; spectral treatment is two-sided.
BandedOperator biharmonic_1d_clamped(int n_cells, double length);

/// Wraps an arbitrary square matrix; pattern is stored as-is, so audits can
/// compare the actual structure against the claimed bandwidth.
BandedOperator custom_operator(const Eigen::MatrixXd& dense, int declared_bandwidth,
                               bool inverse_defines_lambda, double h = 1.0);

/// Full spectral decomposition of Lambda_h, eigenvalues ascending. For the
/// non-symmetric biharmonic rows the inverse eigenvector matrix replaces the
/// transpose and a residual check replaces orthonormality.
struct ModalData {
    Eigen::VectorXd lambda;
    Eigen::MatrixXd phi;     // columns are right eigenvectors
    Eigen::MatrixXd phi_inv; // phi^T in the symmetric case
    bool symmetric = true;

    Eigen::VectorXd coefficients(const Eigen::VectorXd& z) const { return phi_inv * z; }
};

ModalData eigendecompose(const BandedOperator& op);

/// f(Lambda_h) z through the modal decomposition: sum f(lambda_k) z_k phi_k.
Eigen::VectorXd apply_function_spectral(const std::function<double(double)>& f,
                                        const ModalData& modal, const Eigen::VectorXd& z);
Eigen::VectorXd apply_function_spectral(const std::function<double(double)>& f,
                                        const BandedOperator& op, const Eigen::VectorXd& z);

/// Factored real block form of (xi - Lambda_h) v = g, multiplied through by
/// A_h so every solve stays banded:
///   [xi1 A - I, -xi2 A; xi2 A, xi1 A - I] [v1; v2] = [A g1; A g2]
/// with the two component vectors interleaved.
class ShiftedBlockSystem {
public:
    ShiftedBlockSystem(const BandedOperator& op, std::complex<double> xi);

    struct Solution {
        Eigen::VectorXd v1, v2;
        double residual = 0.0; // relative residual of the un-multiplied system
    };
    Solution solve(const Eigen::VectorXd& g1, const Eigen::VectorXd& g2) const;

    int block_lower_bandwidth() const { return block_->lower_bandwidth(); }
    int block_upper_bandwidth() const { return block_->upper_bandwidth(); }

    /// One damped-Jacobi pass on the interleaved system; exposed so the
    /// locality audit can inspect exactly what a sweep reads.
    Eigen::VectorXd jacobi_sweep(const Eigen::VectorXd& x, const Eigen::VectorXd& rhs,
                                 double damping) const;
    Solution solve_jacobi(const Eigen::VectorXd& g1, const Eigen::VectorXd& g2, double damping,
                          int max_sweeps, double tol) const;
    const BandedMatrix& block_matrix() const { return *block_; }

private:
    Eigen::VectorXd residual_norms(const Eigen::VectorXd& v1, const Eigen::VectorXd& v2,
                                   const Eigen::VectorXd& g1, const Eigen::VectorXd& g2) const;

    const BandedOperator* op_;
    std::complex<double> xi_;
    std::unique_ptr<BandedMatrix> block_;
};

/// One-shot convenience over ShiftedBlockSystem.
std::pair<Eigen::VectorXd, Eigen::VectorXd> shifted_block_solve(const BandedOperator& op,
                                                                std::complex<double> xi,
                                                                const Eigen::VectorXd& rhs_re,
                                                                const Eigen::VectorXd& rhs_im);

/// Plain "row col value" triplets (0-based) of A_h.
void write_coordinate_triplets(const BandedOperator& op, std::ostream& out);

} // namespace semidec

#endif
