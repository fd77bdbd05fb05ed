#ifndef SEMIDEC_RATIONAL_HPP
#define SEMIDEC_RATIONAL_HPP

#include <Eigen/Core>
#include <complex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "semidec/spectral.hpp"

namespace semidec {

/// Monomial numerator/denominator coefficients of one matrix entry, ascending
/// powers. The denominator is normalized (constant term 1 when nonzero, else
/// leading term 1) and must stay root-free on the interval the entry was
/// fitted on.
struct RationalEntry {
    Eigen::VectorXd num;
    Eigen::VectorXd den;
};

class RationalMatrixFunction {
public:
    RationalMatrixFunction(int rows, int cols, std::vector<RationalEntry> entries);
    static RationalMatrixFunction scalar(Eigen::VectorXd num, Eigen::VectorXd den);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool is_scalar() const { return rows_ == 1 && cols_ == 1; }
    const RationalEntry& entry(int i = 0, int j = 0) const { return entries_[i * cols_ + j]; }
    int num_degree(int i = 0, int j = 0) const;
    int den_degree(int i = 0, int j = 0) const;

    std::complex<double> eval(std::complex<double> xi, int i = 0, int j = 0) const;
    Eigen::MatrixXcd eval_matrix(std::complex<double> xi) const;

    /// Denominator roots of one entry via companion-matrix eigenvalues; empty
    /// for a constant denominator.
    std::vector<std::complex<double>> poles(int i = 0, int j = 0) const;
    /// Union over all entries.
    std::vector<std::complex<double>> all_poles() const;

    std::string to_json() const;
    static RationalMatrixFunction from_json(const std::string& text);

private:
    int rows_, cols_;
    std::vector<RationalEntry> entries_;
};

/// Sample values of a matrix symbol on strictly increasing spectral nodes.
struct SampleSet {
    Eigen::VectorXd lambdas;
    std::vector<Eigen::MatrixXd> values;

    SampleSet(Eigen::VectorXd lambdas, std::vector<Eigen::MatrixXd> values);
    static SampleSet scalar(const Eigen::VectorXd& lambdas, const Eigen::VectorXd& values);
    int rows() const { return static_cast<int>(values.empty() ? 0 : values[0].rows()); }
    int cols() const { return static_cast<int>(values.empty() ? 0 : values[0].cols()); }
};

struct RationalFit {
    RationalMatrixFunction fn;
    /// Per entry, smallest singular value of the linearized system over the largest.
    std::vector<double> residual;
};

/// Legendre-to-monomial conversion; the result has constant denominator 1.
/// Degrees above 30 are refused (monomial conversion conditioning).
RationalMatrixFunction fit_polynomial(const SpectralFunction& f);
/// Least-squares polynomial fit of samples (degree-N numerator, denominator 1).
RationalMatrixFunction fit_polynomial(const SampleSet& samples, int degree);

/// Entrywise linearized least-squares rational fit: the coefficient vector is
/// the right singular vector of the smallest singular value of
/// [V_num | -diag(values) V_den]. Rejects a nullspace of dimension > 1 and any
/// denominator root inside pole_free_on (default: the sample hull).
RationalFit fit_rational_ls(const SampleSet& samples,
                            const std::vector<std::pair<int, int>>& degrees,
                            const std::optional<SpectralInterval>& pole_free_on = {});
RationalFit fit_rational_ls(const SampleSet& samples, std::pair<int, int> degrees,
                            const std::optional<SpectralInterval>& pole_free_on = {});

/// Max entrywise |f - r| over a uniform grid (>= 100 points) of the interval.
double sup_error(const std::function<Eigen::MatrixXd(double)>& f, const RationalMatrixFunction& r,
                 SpectralInterval interval, int grid_size);
double sup_error(const std::function<double(double)>& f, const RationalMatrixFunction& r,
                 SpectralInterval interval, int grid_size);

} // namespace semidec

#endif
