#include "semidec/rational.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <sstream>

extern "C" {
int dgesvd_(const char* jobu, const char* jobvt, const int* m, const int* n, double* a,
            const int* lda, double* s, double* u, const int* ldu, double* vt, const int* ldvt,
            double* work, const int* lwork, int* info);
}

namespace semidec {

namespace {

std::complex<double> horner(const Eigen::VectorXd& coeffs, std::complex<double> x) {
    std::complex<double> acc(0.0, 0.0);
    for (int k = static_cast<int>(coeffs.size()) - 1; k >= 0; --k) acc = acc * x + coeffs(k);
    return acc;
}

Eigen::VectorXd trim_leading_zeros(const Eigen::VectorXd& c) {
    int deg = static_cast<int>(c.size()) - 1;
    const double scale = c.cwiseAbs().maxCoeff();
    while (deg > 0 && std::abs(c(deg)) <= 1e-14 * scale) --deg;
    return c.head(deg + 1);
}

void normalize_denominator(RationalEntry& e) {
    double pivot = e.den(0);
    if (std::abs(pivot) <= 1e-14 * e.den.cwiseAbs().maxCoeff())
        pivot = e.den(e.den.size() - 1);
    if (pivot == 0.0) throw NumericFailure("rational fit: denominator identically zero");
    e.num /= pivot;
    e.den /= pivot;
}

std::vector<std::complex<double>> polynomial_roots(const Eigen::VectorXd& coeffs) {
    Eigen::VectorXd c = trim_leading_zeros(coeffs);
    const int deg = static_cast<int>(c.size()) - 1;
    if (deg == 0) return {};
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(deg, deg);
    for (int k = 1; k < deg; ++k) companion(k, k - 1) = 1.0;
    for (int k = 0; k < deg; ++k) companion(k, deg - 1) = -c(k) / c(deg);
    Eigen::EigenSolver<Eigen::MatrixXd> es(companion);
    if (es.info() != Eigen::Success)
        throw NumericFailure("polynomial roots: companion eigensolve failed");
    std::vector<std::complex<double>> roots(deg);
    for (int k = 0; k < deg; ++k) roots[k] = es.eigenvalues()(k);
    return roots;
}

// Cancellation measure of p at x: |p(x)| relative to the absolute-coefficient
// envelope; machine-level values mean x is (numerically) a root.
double relative_magnitude(const Eigen::VectorXd& p, std::complex<double> x) {
    std::complex<double> val(0.0, 0.0);
    double envelope = 0.0;
    double power = 1.0;
    std::complex<double> xk(1.0, 0.0);
    for (int k = 0; k < p.size(); ++k) {
        val += p(k) * xk;
        envelope += std::abs(p(k)) * power;
        xk *= x;
        power *= std::abs(x);
    }
    return envelope == 0.0 ? 0.0 : std::abs(val) / envelope;
}

} // namespace

RationalMatrixFunction::RationalMatrixFunction(int rows, int cols,
                                               std::vector<RationalEntry> entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries)) {
    if (rows_ < 1 || cols_ < 1 || entries_.size() != static_cast<size_t>(rows_ * cols_))
        throw InvalidArgument("RationalMatrixFunction: entry count does not match shape");
    for (const auto& e : entries_) {
        if (e.num.size() == 0 || e.den.size() == 0)
            throw InvalidArgument("RationalMatrixFunction: empty coefficients");
        if (e.den.cwiseAbs().maxCoeff() == 0.0)
            throw InvalidArgument("RationalMatrixFunction: zero denominator");
    }
}

RationalMatrixFunction RationalMatrixFunction::scalar(Eigen::VectorXd num, Eigen::VectorXd den) {
    std::vector<RationalEntry> e(1);
    e[0].num = std::move(num);
    e[0].den = std::move(den);
    return RationalMatrixFunction(1, 1, std::move(e));
}

int RationalMatrixFunction::num_degree(int i, int j) const {
    return static_cast<int>(entry(i, j).num.size()) - 1;
}

int RationalMatrixFunction::den_degree(int i, int j) const {
    return static_cast<int>(trim_leading_zeros(entry(i, j).den).size()) - 1;
}

std::complex<double> RationalMatrixFunction::eval(std::complex<double> xi, int i, int j) const {
    const RationalEntry& e = entry(i, j);
    std::complex<double> den = horner(e.den, xi);
    if (std::abs(den) < 1e-300) {
        std::ostringstream msg;
        msg << "rational eval: denominator vanishes at (" << xi.real() << ", " << xi.imag()
            << ")";
        throw PoleEvaluation(msg.str());
    }
    return horner(e.num, xi) / den;
}

Eigen::MatrixXcd RationalMatrixFunction::eval_matrix(std::complex<double> xi) const {
    Eigen::MatrixXcd out(rows_, cols_);
    for (int i = 0; i < rows_; ++i)
        for (int j = 0; j < cols_; ++j) out(i, j) = eval(xi, i, j);
    return out;
}

std::vector<std::complex<double>> RationalMatrixFunction::poles(int i, int j) const {
    std::vector<std::complex<double>> roots = polynomial_roots(entry(i, j).den);
    const double scale = entry(i, j).den.cwiseAbs().maxCoeff();
    for (const auto& rho : roots)
        if (std::abs(horner(entry(i, j).den, rho)) > 1e-8 * scale)
            throw NumericFailure("poles: root fails the residual check");
    return roots;
}

std::vector<std::complex<double>> RationalMatrixFunction::all_poles() const {
    std::vector<std::complex<double>> out;
    for (int i = 0; i < rows_; ++i)
        for (int j = 0; j < cols_; ++j) {
            auto p = poles(i, j);
            out.insert(out.end(), p.begin(), p.end());
        }
    return out;
}

std::string RationalMatrixFunction::to_json() const {
    nlohmann::json j;
    j["shape"] = {rows_, cols_};
    j["entries"] = nlohmann::json::array();
    for (const auto& e : entries_) {
        nlohmann::json je;
        je["num"] = std::vector<double>(e.num.data(), e.num.data() + e.num.size());
        je["den"] = std::vector<double>(e.den.data(), e.den.data() + e.den.size());
        j["entries"].push_back(je);
    }
    return j.dump(2);
}

RationalMatrixFunction RationalMatrixFunction::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    const int rows = j.at("shape").at(0).get<int>();
    const int cols = j.at("shape").at(1).get<int>();
    std::vector<RationalEntry> entries;
    for (const auto& je : j.at("entries")) {
        RationalEntry e;
        auto num = je.at("num").get<std::vector<double>>();
        auto den = je.at("den").get<std::vector<double>>();
        e.num = Eigen::Map<Eigen::VectorXd>(num.data(), num.size());
        e.den = Eigen::Map<Eigen::VectorXd>(den.data(), den.size());
        entries.push_back(std::move(e));
    }
    return RationalMatrixFunction(rows, cols, std::move(entries));
}

SampleSet::SampleSet(Eigen::VectorXd lambdas_, std::vector<Eigen::MatrixXd> values_)
    : lambdas(std::move(lambdas_)), values(std::move(values_)) {
    if (lambdas.size() != static_cast<Eigen::Index>(values.size()))
        throw InvalidArgument("SampleSet: node/value count mismatch");
    for (int i = 1; i < lambdas.size(); ++i)
        if (!(lambdas(i) > lambdas(i - 1)))
            throw InvalidArgument("SampleSet: nodes not strictly increasing");
    for (const auto& v : values)
        if (!v.allFinite()) throw InvalidArgument("SampleSet: non-finite value");
}

SampleSet SampleSet::scalar(const Eigen::VectorXd& lambdas, const Eigen::VectorXd& values) {
    std::vector<Eigen::MatrixXd> v;
    v.reserve(values.size());
    for (int i = 0; i < values.size(); ++i)
        v.push_back(Eigen::MatrixXd::Constant(1, 1, values(i)));
    return SampleSet(lambdas, std::move(v));
}

namespace {

Eigen::VectorXd legendre_to_monomial(const Eigen::VectorXd& coeffs,
                                     const SpectralInterval& interval) {
    const int degree = static_cast<int>(coeffs.size()) - 1;
    if (degree > 30)
        throw ConditioningError("fit_polynomial: monomial conversion refused above degree 30");
    // Monomial representations of P_k composed with the affine map, by the
    // recurrence (k+1) P_{k+1} = (2k+1) x P_k - k P_{k-1} with x affine in lambda.
    const double alpha = 2.0 / interval.length();
    const double beta = -(interval.lo + interval.hi) / interval.length();
    Eigen::VectorXd pkm1 = Eigen::VectorXd::Zero(degree + 1);
    Eigen::VectorXd pk = Eigen::VectorXd::Zero(degree + 1);
    pkm1(0) = 1.0;
    if (degree >= 1) {
        pk(0) = beta;
        pk(1) = alpha;
    }
    Eigen::VectorXd out = Eigen::VectorXd::Zero(degree + 1);
    out += coeffs(0) * pkm1;
    if (degree >= 1) out += coeffs(1) * pk;
    for (int k = 1; k < degree; ++k) {
        Eigen::VectorXd next = Eigen::VectorXd::Zero(degree + 1);
        // (2k+1) * (alpha*lambda + beta) * P_k
        next.tail(degree) += (2.0 * k + 1.0) * alpha * pk.head(degree);
        next += (2.0 * k + 1.0) * beta * pk;
        next -= static_cast<double>(k) * pkm1;
        next /= (k + 1.0);
        pkm1 = pk;
        pk = next;
        out += coeffs(k + 1) * pk;
    }
    return out;
}

void check_pole_free(const RationalEntry& e, double lo, double hi) {
    if (trim_leading_zeros(e.den).size() == 1) return;
    for (const auto& rho : polynomial_roots(e.den)) {
        if (std::abs(rho.imag()) <= 1e-8 * (1.0 + std::abs(rho.real())) && rho.real() >= lo &&
            rho.real() <= hi) {
            std::ostringstream msg;
            msg << "rational fit: denominator root at lambda = " << rho.real()
                << " inside [" << lo << ", " << hi << "]";
            throw PoleInInterval(msg.str());
        }
    }
    const int grid = 1000;
    Eigen::VectorXd mags(grid);
    for (int i = 0; i < grid; ++i) {
        const double lambda = lo + (hi - lo) * i / (grid - 1.0);
        mags(i) = std::abs(horner(e.den, std::complex<double>(lambda, 0.0)));
    }
    const double max_mag = mags.maxCoeff();
    for (int i = 0; i < grid; ++i)
        if (mags(i) <= 1e-8 * max_mag) {
            std::ostringstream msg;
            msg << "rational fit: denominator vanishes near lambda = "
                << lo + (hi - lo) * i / (grid - 1.0);
            throw PoleInInterval(msg.str());
        }
}

// Synthetic division by the monic factor (x - rho); the remainder is dropped.
Eigen::VectorXd deflate_real_root(const Eigen::VectorXd& p, double rho) {
    const int deg = static_cast<int>(p.size()) - 1;
    Eigen::VectorXd q = Eigen::VectorXd::Zero(deg);
    double carry = p(deg);
    for (int k = deg - 1; k >= 0; --k) {
        q(k) = carry;
        carry = p(k) + rho * carry;
    }
    return q;
}

// Division by x^2 - 2 re(rho) x + |rho|^2 for a conjugate root pair.
Eigen::VectorXd deflate_conjugate_pair(const Eigen::VectorXd& p, std::complex<double> rho) {
    const double b = -2.0 * rho.real();
    const double c = std::norm(rho);
    const int deg = static_cast<int>(p.size()) - 1;
    if (deg < 2) return Eigen::VectorXd::Zero(1);
    Eigen::VectorXd q = Eigen::VectorXd::Zero(deg - 1);
    Eigen::VectorXd rem = p;
    for (int k = deg; k >= 2; --k) {
        const double f = rem(k);
        q(k - 2) = f;
        rem(k - 1) -= b * f;
        rem(k - 2) -= c * f;
    }
    return q;
}

// Singular values and (optionally) right singular vectors via LAPACK.
void svd_lapack(Eigen::MatrixXd a, Eigen::VectorXd& sigma, Eigen::MatrixXd* vt) {
    const int m = static_cast<int>(a.rows());
    const int n = static_cast<int>(a.cols());
    sigma.resize(std::min(m, n));
    if (vt) vt->resize(n, n);
    const char jobu = 'N';
    const char jobvt = vt ? 'A' : 'N';
    int info = 0;
    int lwork = -1;
    double work_query = 0.0;
    dgesvd_(&jobu, &jobvt, &m, &n, a.data(), &m, sigma.data(), nullptr, &m,
            vt ? vt->data() : nullptr, &n, &work_query, &lwork, &info);
    lwork = static_cast<int>(work_query);
    std::vector<double> work(lwork);
    dgesvd_(&jobu, &jobvt, &m, &n, a.data(), &m, sigma.data(), nullptr, &m,
            vt ? vt->data() : nullptr, &n, work.data(), &lwork, &info);
    if (info != 0) throw NumericFailure("dgesvd failed");
}

// Exact rank deficiency is invisible in the monomial frame at these degrees,
// so the rank test runs on the equivalent Legendre-basis system.
bool rank_deficient_beyond_scale(const Eigen::VectorXd& lambdas, const Eigen::VectorXd& values,
                                 int nn, int nd) {
    const int samples = static_cast<int>(lambdas.size());
    const int unknowns = nn + nd + 2;
    SpectralInterval hull(lambdas(0), lambdas(samples - 1));
    Eigen::MatrixXd sys(samples, unknowns);
    for (int r = 0; r < samples; ++r) {
        const double x = hull.to_unit(lambdas(r));
        for (int m = 0; m <= nn; ++m) sys(r, m) = legendre_eval(m, x);
        for (int m = 0; m <= nd; ++m) sys(r, nn + 1 + m) = -values(r) * legendre_eval(m, x);
    }
    Eigen::VectorXd sv;
    svd_lapack(std::move(sys), sv, nullptr);
    return unknowns >= 2 && sv(unknowns - 2) <= 3e-16 * sv(0);
}

RationalEntry fit_rational_entry(const Eigen::VectorXd& lambdas, const Eigen::VectorXd& values,
                                 int nn, int nd, double* residual_out,
                                 const SpectralInterval* pole_free_on) {
    const int samples = static_cast<int>(lambdas.size());
    const int unknowns = nn + nd + 2;
    if (samples <= unknowns)
        throw InvalidArgument("fit_rational_ls: system not over-determined");
    if (rank_deficient_beyond_scale(lambdas, values, nn, nd))
        throw AmbiguousFit("fit_rational_ls: nullspace dimension exceeds 1");

    Eigen::MatrixXd sys(samples, unknowns);
    for (int r = 0; r < samples; ++r) {
        double power = 1.0;
        for (int m = 0; m <= nn; ++m) {
            sys(r, m) = power;
            power *= lambdas(r);
        }
        power = 1.0;
        for (int m = 0; m <= nd; ++m) {
            sys(r, nn + 1 + m) = -values(r) * power;
            power *= lambdas(r);
        }
    }
    Eigen::VectorXd sv;
    Eigen::MatrixXd vt;
    svd_lapack(std::move(sys), sv, &vt);
    if (residual_out) *residual_out = sv(unknowns - 1) / sv(0);

    Eigen::VectorXd coeffs = vt.row(unknowns - 1);
    RationalEntry e;
    e.num = coeffs.head(nn + 1);
    e.den = coeffs.tail(nd + 1);

    // Spurious doublets (a numerator root shadowing a denominator root) come
    // out of the numerically degenerate trailing subspace; divide them out
    // whenever doing so leaves the sample error unchanged.
    auto sample_error = [&](const RationalEntry& cand) {
        double worst = 0.0;
        for (int r = 0; r < samples; ++r) {
            const std::complex<double> den = horner(cand.den, {lambdas(r), 0.0});
            if (std::abs(den) == 0.0) return std::numeric_limits<double>::infinity();
            const double val = (horner(cand.num, {lambdas(r), 0.0}) / den).real();
            worst = std::max(worst, std::abs(val - values(r)) / (1.0 + std::abs(values(r))));
        }
        return worst;
    };
    const double base_error = sample_error(e);
    for (bool removed = true; removed;) {
        removed = false;
        for (const auto& rho : polynomial_roots(e.den)) {
            if (rho.imag() < -1e-12) continue; // pair handled at its upper member
            if (relative_magnitude(e.num, rho) > 1e-3) continue;
            RationalEntry cand = e;
            if (std::abs(rho.imag()) <= 1e-12 * (1.0 + std::abs(rho.real()))) {
                cand.num = deflate_real_root(cand.num, rho.real());
                cand.den = deflate_real_root(cand.den, rho.real());
            } else {
                if (cand.num.size() < 3 || cand.den.size() < 3) continue;
                cand.num = deflate_conjugate_pair(cand.num, rho);
                cand.den = deflate_conjugate_pair(cand.den, rho);
            }
            if (sample_error(cand) > std::max(10.0 * base_error, 1e-13)) continue;
            e = cand;
            removed = true;
            break;
        }
    }
    // pad back to the requested coefficient lengths
    Eigen::VectorXd num = Eigen::VectorXd::Zero(nn + 1);
    Eigen::VectorXd den = Eigen::VectorXd::Zero(nd + 1);
    num.head(e.num.size()) = e.num;
    den.head(e.den.size()) = e.den;
    e.num = num;
    e.den = den;

    normalize_denominator(e);
    if (pole_free_on)
        check_pole_free(e, pole_free_on->lo, pole_free_on->hi);
    else
        check_pole_free(e, lambdas(0), lambdas(samples - 1));
    return e;
}

} // namespace

RationalMatrixFunction fit_polynomial(const SpectralFunction& f) {
    std::vector<RationalEntry> entries;
    for (int i = 0; i < f.rows(); ++i)
        for (int j = 0; j < f.cols(); ++j) {
            RationalEntry e;
            e.num = legendre_to_monomial(f.coeffs(i, j), f.interval());
            e.den = Eigen::VectorXd::Ones(1);
            entries.push_back(std::move(e));
        }
    return RationalMatrixFunction(f.rows(), f.cols(), std::move(entries));
}

RationalMatrixFunction fit_polynomial(const SampleSet& samples, int degree) {
    if (degree < 0) throw InvalidArgument("fit_polynomial: negative degree");
    if (degree > 30)
        throw ConditioningError("fit_polynomial: refused above degree 30");
    const int n = static_cast<int>(samples.lambdas.size());
    if (n < degree + 2) throw InvalidArgument("fit_polynomial: not enough samples");

    Eigen::MatrixXd vand(n, degree + 1);
    for (int r = 0; r < n; ++r) {
        double power = 1.0;
        for (int m = 0; m <= degree; ++m) {
            vand(r, m) = power;
            power *= samples.lambdas(r);
        }
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(vand, Eigen::ComputeThinU | Eigen::ComputeThinV);
    std::vector<RationalEntry> entries;
    for (int i = 0; i < samples.rows(); ++i)
        for (int j = 0; j < samples.cols(); ++j) {
            Eigen::VectorXd rhs(n);
            for (int r = 0; r < n; ++r) rhs(r) = samples.values[r](i, j);
            RationalEntry e;
            e.num = svd.solve(rhs);
            e.den = Eigen::VectorXd::Ones(1);
            entries.push_back(std::move(e));
        }
    return RationalMatrixFunction(samples.rows(), samples.cols(), std::move(entries));
}

RationalFit fit_rational_ls(const SampleSet& samples,
                            const std::vector<std::pair<int, int>>& degrees,
                            const std::optional<SpectralInterval>& pole_free_on) {
    const int rows = samples.rows();
    const int cols = samples.cols();
    if (degrees.size() != static_cast<size_t>(rows * cols))
        throw InvalidArgument("fit_rational_ls: one degree pair per entry required");

    std::vector<RationalEntry> entries;
    std::vector<double> residuals;
    const int n = static_cast<int>(samples.lambdas.size());
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
            Eigen::VectorXd vals(n);
            for (int r = 0; r < n; ++r) vals(r) = samples.values[r](i, j);
            const auto [nn, nd] = degrees[i * cols + j];
            double res = 0.0;
            entries.push_back(fit_rational_entry(samples.lambdas, vals, nn, nd, &res,
                                                 pole_free_on ? &*pole_free_on : nullptr));
            residuals.push_back(res);
        }
    return RationalFit{RationalMatrixFunction(rows, cols, std::move(entries)),
                       std::move(residuals)};
}

RationalFit fit_rational_ls(const SampleSet& samples, std::pair<int, int> degrees,
                            const std::optional<SpectralInterval>& pole_free_on) {
    std::vector<std::pair<int, int>> all(samples.rows() * samples.cols(), degrees);
    return fit_rational_ls(samples, all, pole_free_on);
}

double sup_error(const std::function<Eigen::MatrixXd(double)>& f, const RationalMatrixFunction& r,
                 SpectralInterval interval, int grid_size) {
    if (grid_size < 100) throw InvalidArgument("sup_error: need grid_size >= 100");
    double worst = 0.0;
    for (int g = 0; g < grid_size; ++g) {
        const double lambda = interval.lo + interval.length() * g / (grid_size - 1.0);
        Eigen::MatrixXd fv = f(lambda);
        for (int i = 0; i < r.rows(); ++i)
            for (int j = 0; j < r.cols(); ++j) {
                const double rv = r.eval(std::complex<double>(lambda, 0.0), i, j).real();
                worst = std::max(worst, std::abs(fv(i, j) - rv));
            }
    }
    return worst;
}

double sup_error(const std::function<double(double)>& f, const RationalMatrixFunction& r,
                 SpectralInterval interval, int grid_size) {
    return sup_error(
        [&](double lambda) { return Eigen::MatrixXd::Constant(1, 1, f(lambda)).eval(); }, r,
        interval, grid_size);
}

} // namespace semidec
