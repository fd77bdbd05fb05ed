#include "semidec/contour.hpp"

#include <cmath>
#include <sstream>

namespace semidec {

Contour Contour::circle(double radius) {
    if (radius <= 0.0) throw InvalidArgument("Contour::circle: need R > 0");
    Contour c;
    c.kind = Kind::Circle;
    c.r = radius;
    return c;
}

Contour Contour::ellipse(double r1, double r2) {
    if (r1 <= 0.0 || r2 <= 0.0) throw InvalidArgument("Contour::ellipse: need R1, R2 > 0");
    Contour c;
    c.kind = Kind::Ellipse;
    c.r1 = r1;
    c.r2 = r2;
    return c;
}

std::complex<double> Contour::point(double theta) const {
    if (kind == Kind::Circle) return std::polar(r, theta);
    return {0.5 * r1 * (1.0 + std::cos(theta)), r2 * std::sin(theta)};
}

std::complex<double> Contour::derivative(double theta) const {
    if (kind == Kind::Circle) return std::complex<double>(0.0, 1.0) * std::polar(r, theta);
    return {-0.5 * r1 * std::sin(theta), r2 * std::cos(theta)};
}

TrapezoidRule trapezoid_rule(int m) {
    if (m < 1) throw InvalidArgument("trapezoid_rule: need m >= 1");
    TrapezoidRule rule;
    rule.m = m;
    rule.thetas.resize(m);
    rule.weights.resize(m);
    for (int l = 0; l < m; ++l) {
        rule.thetas(l) = 2.0 * M_PI * l / m;
        rule.weights(l) = 2.0 * M_PI / m;
    }
    return rule;
}

namespace {

constexpr int kCurveSamples = 4096;

// Winding number of the discretized curve around z, plus the distance from z
// to the polygon; winding ~1 and positive distance means strictly inside.
struct PointCheck {
    int winding;
    double distance;
};

PointCheck check_point(const Contour& contour, std::complex<double> z) {
    double angle = 0.0;
    double dist = std::numeric_limits<double>::infinity();
    std::complex<double> prev = contour.point(0.0) - z;
    for (int k = 1; k <= kCurveSamples; ++k) {
        const double theta = 2.0 * M_PI * k / kCurveSamples;
        std::complex<double> cur = contour.point(theta) - z;
        angle += std::arg(cur / prev);
        // distance to the segment [prev, cur] shifted by z
        std::complex<double> d = cur - prev;
        double t = 0.0;
        const double dd = std::norm(d);
        if (dd > 0.0) t = std::clamp(-(prev.real() * d.real() + prev.imag() * d.imag()) / dd, 0.0, 1.0);
        dist = std::min(dist, std::abs(prev + t * d));
        prev = cur;
    }
    PointCheck out;
    out.winding = static_cast<int>(std::lround(angle / (2.0 * M_PI)));
    out.distance = dist;
    return out;
}

} // namespace

ContourReport validate_contour(const Contour& contour, SpectralInterval interval,
                               const std::vector<std::complex<double>>& poles) {
    ContourReport report;
    report.spectrum_margin = std::numeric_limits<double>::infinity();

    const int grid = 256;
    for (int g = 0; g < grid; ++g) {
        const double lambda = interval.lo + interval.length() * g / (grid - 1.0);
        PointCheck pc = check_point(contour, {lambda, 0.0});
        if (pc.winding != 1 || pc.distance <= 0.0) {
            std::ostringstream msg;
            msg << "validate_contour: spectrum point lambda = " << lambda
                << " is not strictly inside the contour";
            throw SpectrumNotEnclosed(msg.str());
        }
        report.spectrum_margin = std::min(report.spectrum_margin, pc.distance);
    }
    for (const auto& rho : poles) {
        PointCheck pc = check_point(contour, rho);
        if (pc.winding != 0) {
            std::ostringstream msg;
            msg << "validate_contour: pole (" << rho.real() << ", " << rho.imag()
                << ") lies inside the contour";
            throw PoleEnclosed(msg.str());
        }
        report.pole_margin = std::min(report.pole_margin, pc.distance);
    }
    return report;
}

Realizer::Realizer(const BandedOperator& op, SpectralInterval interval, Contour contour,
                   TrapezoidRule rule, RealizeOptions opts)
    : op_(&op), interval_(interval), contour_(contour), rule_(std::move(rule)), opts_(opts) {
    systems_.reserve(rule_.m);
    for (int l = 0; l < rule_.m; ++l) {
        try {
            systems_.push_back(
                std::make_unique<ShiftedBlockSystem>(op, contour_.point(rule_.thetas(l))));
        } catch (const ShiftSingular& e) {
            std::ostringstream msg;
            msg << "node " << l + 1 << ": " << e.what();
            throw ShiftSingular(msg.str());
        }
    }
}

const ContourReport& Realizer::validate(const std::vector<std::complex<double>>& poles) const {
    report_ = validate_contour(contour_, interval_, poles);
    validated_ = true;
    return report_;
}

RealizationResult Realizer::apply(const RationalMatrixFunction& r,
                                  const Eigen::MatrixXd& z_cols) const {
    const int n = op_->dim();
    if (z_cols.rows() != n || z_cols.cols() != r.cols())
        throw InvalidArgument("Realizer::apply: state shape does not match the symbol");
    if (!validated_) validate(r.all_poles());

    RealizationResult result;
    result.report = report_;
    result.output = Eigen::MatrixXd::Zero(n, r.rows());
    result.node_residuals.assign(rule_.m, 0.0);

    for (int l = 0; l < rule_.m; ++l) {
        const double theta = rule_.thetas(l);
        const std::complex<double> xi = contour_.point(theta);
        const std::complex<double> minus_i_dxi =
            std::complex<double>(0.0, -1.0) * contour_.derivative(theta);
        double worst = 0.0;
        for (int i = 0; i < r.rows(); ++i)
            for (int j = 0; j < r.cols(); ++j) {
                const std::complex<double> w = minus_i_dxi * r.eval(xi, i, j);
                Eigen::VectorXd g1 = w.real() * z_cols.col(j);
                Eigen::VectorXd g2 = w.imag() * z_cols.col(j);
                ShiftedBlockSystem::Solution sol;
                try {
                    sol = (opts_.mode == SolverMode::Direct)
                              ? systems_[l]->solve(g1, g2)
                              : systems_[l]->solve_jacobi(g1, g2, opts_.jacobi_damping,
                                                          opts_.jacobi_max_sweeps,
                                                          opts_.jacobi_tol);
                } catch (const ShiftSingular& e) {
                    std::ostringstream msg;
                    msg << "node " << l + 1 << ": " << e.what();
                    throw ShiftSingular(msg.str());
                }
                if (opts_.mode == SolverMode::Jacobi && sol.residual > 1e-10)
                    throw ConvergenceFailure("Realizer: jacobi mode did not reach tolerance");
                worst = std::max(worst, sol.residual);
                result.output.col(i) += (rule_.weights(l) / (2.0 * M_PI)) * sol.v1;
            }
        result.node_residuals[l] = worst;
    }
    return result;
}

RealizationResult realize(const RationalMatrixFunction& r, const Contour& contour,
                          const TrapezoidRule& rule, const BandedOperator& op,
                          SpectralInterval interval, const Eigen::MatrixXd& z_cols,
                          RealizeOptions opts) {
    Realizer realizer(op, interval, contour, rule, opts);
    realizer.validate(r.all_poles());
    return realizer.apply(r, z_cols);
}

double scalar_cauchy(const RationalMatrixFunction& r, const Contour& contour,
                     const TrapezoidRule& rule, double lambda, int i, int j) {
    double acc = 0.0;
    for (int l = 0; l < rule.m; ++l) {
        const double theta = rule.thetas(l);
        const std::complex<double> xi = contour.point(theta);
        const std::complex<double> value = std::complex<double>(0.0, -1.0) *
                                           contour.derivative(theta) * r.eval(xi, i, j) /
                                           (xi - lambda);
        acc += rule.weights(l) * value.real();
    }
    return acc / (2.0 * M_PI);
}

std::vector<ErrorCurvePoint> realization_error_curve(const RationalMatrixFunction& r,
                                                     const std::function<double(double)>& exact,
                                                     const Contour& contour,
                                                     const BandedOperator& op,
                                                     SpectralInterval interval,
                                                     const std::vector<int>& m_list) {
    ModalData modal = eigendecompose(op);
    std::vector<ErrorCurvePoint> out;
    out.reserve(m_list.size());
    for (int m : m_list) {
        TrapezoidRule rule = trapezoid_rule(m);
        ErrorCurvePoint pt;
        pt.m = m;
        pt.err_l2 = l2_relative_error(
            [&](double lambda) { return scalar_cauchy(r, contour, rule, lambda); }, exact,
            interval, 128);
        double sup_num = 0.0, sup_den = 0.0;
        for (int k = 0; k < modal.lambda.size(); ++k) {
            const double lam = modal.lambda(k);
            const double ev = exact(lam);
            sup_num = std::max(sup_num, std::abs(scalar_cauchy(r, contour, rule, lam) - ev));
            sup_den = std::max(sup_den, std::abs(ev));
        }
        if (sup_den == 0.0) throw DegenerateNorm("realization_error_curve: zero reference");
        pt.err_op = sup_num / sup_den;
        out.push_back(pt);
    }
    return out;
}

} // namespace semidec
