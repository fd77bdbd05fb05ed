#include "semidec/spectral.hpp"

#include <cmath>
#include <sstream>

namespace semidec {

double legendre_eval(int k, double x) {
    if (k < 0) throw InvalidArgument("legendre_eval: negative degree");
    if (k == 0) return 1.0;
    if (k == 1) return x;
    double pm1 = 1.0, p = x;
    for (int j = 1; j < k; ++j) {
        double pn = ((2.0 * j + 1.0) * x * p - j * pm1) / (j + 1.0);
        pm1 = p;
        p = pn;
    }
    return p;
}

double legendre_deriv(int k, double x) {
    if (k < 0) throw InvalidArgument("legendre_deriv: negative degree");
    if (k == 0) return 0.0;
    // (1-x^2) P'_k = k (P_{k-1} - x P_k); at x = +-1 use P'_k(+-1) = (+-1)^{k-1} k(k+1)/2.
    if (std::abs(std::abs(x) - 1.0) < 1e-14) {
        double sign = (x > 0.0) ? 1.0 : ((k - 1) % 2 == 0 ? 1.0 : -1.0);
        return sign * 0.5 * k * (k + 1.0);
    }
    return k * (legendre_eval(k - 1, x) - x * legendre_eval(k, x)) / (1.0 - x * x);
}

LglRule lgl_rule(int n) {
    if (n < 2) throw InvalidArgument("lgl_rule: need n >= 2");
    LglRule rule;
    rule.n = n;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    rule.nodes(0) = -1.0;
    rule.nodes(n - 1) = 1.0;

    const int m = n - 1; // interior nodes are the roots of P'_m
    for (int i = 1; i < n - 1; ++i) {
        // Chebyshev-Gauss-Lobatto initial guess, then Newton on P'_m.
        double x = -std::cos(M_PI * i / m);
        for (int it = 0; it < 100; ++it) {
            double f = legendre_deriv(m, x);
            // P''_m from the Legendre ODE (1-x^2) y'' - 2x y' + m(m+1) y = 0.
            double fp = (2.0 * x * f - m * (m + 1.0) * legendre_eval(m, x)) / (1.0 - x * x);
            double dx = f / fp;
            x -= dx;
            if (std::abs(dx) < 1e-14) break;
        }
        rule.nodes(i) = x;
    }
    for (int i = 0; i < n; ++i) {
        double p = legendre_eval(m, rule.nodes(i));
        rule.weights(i) = 2.0 / (n * m * p * p);
    }
    return rule;
}

SpectralFunction::SpectralFunction(SpectralInterval interval, Eigen::VectorXd coeffs)
    : interval_(interval), rows_(1), cols_(1) {
    if (coeffs.size() == 0) throw InvalidArgument("SpectralFunction: empty coefficients");
    entries_.push_back(std::move(coeffs));
}

SpectralFunction::SpectralFunction(SpectralInterval interval, int rows, int cols,
                                   std::vector<Eigen::VectorXd> entry_coeffs)
    : interval_(interval), rows_(rows), cols_(cols), entries_(std::move(entry_coeffs)) {
    if (rows_ < 1 || cols_ < 1 || entries_.size() != static_cast<size_t>(rows_ * cols_))
        throw InvalidArgument("SpectralFunction: entry count does not match shape");
    for (const auto& c : entries_)
        if (c.size() != entries_[0].size())
            throw InvalidArgument("SpectralFunction: ragged entry coefficients");
}

double SpectralFunction::eval_entry(int i, int j, double lambda) const {
    const Eigen::VectorXd& c = entries_[idx(i, j)];
    const double x = interval_.to_unit(lambda);
    double acc = 0.0;
    for (int k = 0; k < c.size(); ++k) acc += c(k) * legendre_eval(k, x);
    return acc;
}

double SpectralFunction::eval(double lambda) const { return eval_entry(0, 0, lambda); }

Eigen::MatrixXd SpectralFunction::eval_matrix(double lambda) const {
    Eigen::MatrixXd out(rows_, cols_);
    for (int i = 0; i < rows_; ++i)
        for (int j = 0; j < cols_; ++j) out(i, j) = eval_entry(i, j, lambda);
    return out;
}

double SpectralFunction::l2_norm() const {
    // ||sum c_k P_k(x(lambda))||^2 = (len/2) sum c_k^2 * 2/(2k+1)
    double acc = 0.0;
    for (const auto& c : entries_)
        for (int k = 0; k < c.size(); ++k) acc += c(k) * c(k) * 2.0 / (2.0 * k + 1.0);
    return std::sqrt(0.5 * interval_.length() * acc);
}

SpectralFunction project(const std::function<double(double)>& f, SpectralInterval interval,
                         int degree, int quad_nodes) {
    if (degree < 0) throw InvalidArgument("project: negative degree");
    int nq = quad_nodes > 0 ? quad_nodes : degree + 2;
    if (nq < degree + 2) nq = degree + 2;
    LglRule rule = lgl_rule(nq);

    Eigen::VectorXd samples(nq);
    for (int q = 0; q < nq; ++q) {
        const double lambda = interval.from_unit(rule.nodes(q));
        samples(q) = f(lambda);
        if (!std::isfinite(samples(q))) {
            std::ostringstream msg;
            msg << "project: non-finite sample at lambda = " << lambda;
            throw EvaluationError(msg.str());
        }
    }
    Eigen::VectorXd coeffs(degree + 1);
    for (int k = 0; k <= degree; ++k) {
        double acc = 0.0;
        for (int q = 0; q < nq; ++q)
            acc += rule.weights(q) * samples(q) * legendre_eval(k, rule.nodes(q));
        coeffs(k) = acc * (2.0 * k + 1.0) / 2.0;
    }
    return SpectralFunction(interval, std::move(coeffs));
}

double l2_norm(const std::function<double(double)>& f, SpectralInterval interval,
               int quad_nodes) {
    if (quad_nodes < 2) throw InvalidArgument("l2_norm: need >= 2 quadrature nodes");
    LglRule rule = lgl_rule(quad_nodes);
    double acc = 0.0;
    for (int q = 0; q < quad_nodes; ++q) {
        const double v = f(interval.from_unit(rule.nodes(q)));
        acc += rule.weights(q) * v * v;
    }
    return std::sqrt(0.5 * interval.length() * acc);
}

double l2_relative_error(const std::function<double(double)>& f,
                         const std::function<double(double)>& g, SpectralInterval interval,
                         int quad_nodes) {
    if (quad_nodes < 64) quad_nodes = 64;
    const double ng = l2_norm(g, interval, quad_nodes);
    if (ng == 0.0) throw DegenerateNorm("l2_relative_error: reference has zero norm");
    auto diff = [&](double lambda) { return f(lambda) - g(lambda); };
    return l2_norm(diff, interval, quad_nodes) / ng;
}

double l2_relative_error(const SpectralFunction& f, const std::function<double(double)>& g,
                         int quad_nodes) {
    return l2_relative_error([&](double lambda) { return f.eval(lambda); }, g, f.interval(),
                             quad_nodes);
}

} // namespace semidec
