#include "semidec/harness.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <random>
#include <set>
#include <sstream>
#include <thread>
#include <unsupported/Eigen/MatrixFunctions>

#include "semidec/io.hpp"

namespace semidec {

std::string example_name(ExampleId id) {
    switch (id) {
        case ExampleId::Heat1D: return "heat1d";
        case ExampleId::Heat1DUnboundedB: return "heat1d-unbounded";
        case ExampleId::Beam1D: return "beam";
        case ExampleId::Heat2DBoundary: return "heat2d";
    }
    throw InvalidArgument("example_name: unknown id");
}

ExampleId parse_example(const std::string& name) {
    if (name == "heat1d") return ExampleId::Heat1D;
    if (name == "heat1d-unbounded") return ExampleId::Heat1DUnboundedB;
    if (name == "beam") return ExampleId::Beam1D;
    if (name == "heat2d") return ExampleId::Heat2DBoundary;
    throw ConfigError("unknown example '" + name + "'");
}

namespace {

Eigen::MatrixXd scalar_matrix(double v) { return Eigen::MatrixXd::Constant(1, 1, v); }

// Stable forms of the closed-form gains; all extend continuously to 0.
double heat_gain_exact(double lambda) { return lambda / (1.0 + std::sqrt(1.0 + lambda * lambda)); }
double beam_k1_exact(double lambda) { return 1.0 / (1.0 + std::sqrt(1.0 + lambda)); }
double beam_k2_exact(double lambda) { return std::sqrt(2.0 * beam_k1_exact(lambda)); }
double unbounded_p_exact(double lambda) { return (1.0 + std::sqrt(1.0 + lambda)) / lambda; }

} // namespace

ExampleProblem build_example(ExampleId id, const ExampleParams& params) {
    ExampleParams p = params;
    if (p.mesh < 4) throw ConfigError("build_example: mesh too small");
    if (p.length <= 0.0) p.length = (id == ExampleId::Beam1D) ? 4.73 : M_PI;

    switch (id) {
        case ExampleId::Heat1D: {
            ExampleProblem prob{id, p, ParametricLqr{}, laplacian_1d_dirichlet(p.mesh, p.length),
                                SpectralInterval(0.0, 1.0), {}};
            prob.lqr.n_z = prob.lqr.n_u = prob.lqr.n_y = 1;
            prob.lqr.a = [](double lambda) { return scalar_matrix(-1.0 / lambda); };
            prob.lqr.b = [](double) { return scalar_matrix(1.0); };
            prob.lqr.c = [](double) { return scalar_matrix(1.0); };
            prob.lqr.s = [](double) { return scalar_matrix(1.0); };
            prob.lqr.interval = SpectralInterval(0.0, 1.0);
            ParametricLqr lqr = prob.lqr;
            prob.gain_symbol = [lqr](double lambda) -> Eigen::RowVectorXd {
                auto sol = are_pointwise(lqr, lambda);
                return gain_pointwise(lqr, sol);
            };
            return prob;
        }
        case ExampleId::Heat1DUnboundedB: {
            ExampleProblem prob{id, p, ParametricLqr{}, laplacian_1d_dirichlet(p.mesh, p.length),
                                SpectralInterval(0.0, 1.0), {}};
            prob.lqr.n_z = prob.lqr.n_u = prob.lqr.n_y = 1;
            auto one = [](double) { return scalar_matrix(1.0); };
            prob.lqr.a = one;
            prob.lqr.b = one;
            prob.lqr.c = one;
            prob.lqr.s = one;
            prob.lqr.interval = SpectralInterval(0.0, 1.0);
            prob.lqr.iso = IsoFunctions{[](double lambda) { return lambda; },
                                        [](double) { return 1.0; },
                                        [](double lambda) { return std::sqrt(lambda); }};
            ParametricLqr lqr = prob.lqr;
            prob.gain_symbol = [lqr](double lambda) -> Eigen::RowVectorXd {
                auto sol = are_pointwise(lqr, lambda);
                return gain_pointwise(lqr, sol);
            };
            return prob;
        }
        case ExampleId::Beam1D: {
            if (p.mesh < 6) throw ConfigError("build_example: beam mesh too small");
            ExampleProblem prob{id, p, ParametricLqr{}, biharmonic_1d_clamped(p.mesh, p.length),
                                SpectralInterval(0.0, 1.0), {}};
            prob.lqr.n_z = 2;
            prob.lqr.n_u = 1;
            prob.lqr.n_y = 1;
            prob.lqr.a = [](double lambda) {
                const double mu = 1.0 / std::sqrt(lambda);
                Eigen::MatrixXd a(2, 2);
                a << 0.0, mu, -mu, 0.0;
                return a;
            };
            prob.lqr.b = [](double) {
                Eigen::MatrixXd b(2, 1);
                b << 0.0, 1.0;
                return b;
            };
            prob.lqr.c = [](double) {
                Eigen::MatrixXd c(1, 2);
                c << 1.0, 0.0;
                return c;
            };
            prob.lqr.s = [](double) { return scalar_matrix(1.0); };
            prob.lqr.interval = SpectralInterval(0.0, 1.0);
            ParametricLqr lqr = prob.lqr;
            // The state map is diag(lambda^1/2, 1), so the realized row is
            // [q1 lambda^-1/2, q2].
            prob.gain_symbol = [lqr](double lambda) -> Eigen::RowVectorXd {
                auto sol = are_pointwise(lqr, lambda);
                Eigen::MatrixXd q = gain_pointwise(lqr, sol);
                Eigen::RowVectorXd k(2);
                k << q(0, 0) / std::sqrt(lambda), q(0, 1);
                return k;
            };
            return prob;
        }
        case ExampleId::Heat2DBoundary: {
            if (p.modes < 1 || p.modes > 8) throw ConfigError("build_example: need 1 <= modes <= 8");
            if (!(p.truncation > 0.0 && p.truncation < 1.0))
                throw ConfigError("build_example: truncation must lie in (0, 1)");
            ExampleProblem prob{id, p, ParametricLqr{}, laplacian_1d_dirichlet(p.mesh, p.length),
                                SpectralInterval(p.truncation, 1.0), {}};
            const int j_modes = p.modes;
            prob.lqr.n_z = j_modes;
            prob.lqr.n_u = 1;
            prob.lqr.n_y = j_modes;
            prob.lqr.a = [j_modes](double lambda) {
                Eigen::MatrixXd a = Eigen::MatrixXd::Zero(j_modes, j_modes);
                for (int j = 1; j <= j_modes; ++j)
                    a(j - 1, j - 1) = -(j * j * M_PI * M_PI + 1.0 / lambda);
                return a;
            };
            prob.lqr.b = [j_modes](double) {
                Eigen::MatrixXd b(j_modes, 1);
                for (int j = 1; j <= j_modes; ++j) b(j - 1, 0) = std::sqrt(2.0) / (M_PI * j);
                return b;
            };
            prob.lqr.c = [j_modes](double) {
                return Eigen::MatrixXd::Identity(j_modes, j_modes).eval();
            };
            prob.lqr.s = [](double) { return scalar_matrix(1.0); };
            prob.lqr.interval = SpectralInterval(0.0, 1.0);
            ParametricLqr lqr = prob.lqr;
            prob.gain_symbol = [lqr](double lambda) -> Eigen::RowVectorXd {
                auto sol = are_pointwise(lqr, lambda);
                return gain_pointwise(lqr, sol);
            };
            return prob;
        }
    }
    throw InvalidArgument("build_example: unknown id");
}

std::vector<std::function<double(double)>> reference_gain(ExampleId id, int modes) {
    switch (id) {
        case ExampleId::Heat1D:
            return {[](double lambda) { return heat_gain_exact(lambda); }};
        case ExampleId::Beam1D:
            return {[](double lambda) { return beam_k1_exact(lambda); },
                    [](double lambda) { return beam_k2_exact(lambda); }};
        case ExampleId::Heat1DUnboundedB:
            return {[](double lambda) { return unbounded_p_exact(lambda); }};
        case ExampleId::Heat2DBoundary: {
            ExampleParams p;
            p.modes = modes;
            p.mesh = 10; // the operator plays no part in the pointwise reference
            ExampleProblem prob = build_example(id, p);
            std::vector<std::function<double(double)>> out;
            for (int j = 0; j < modes; ++j)
                out.push_back([prob, j](double lambda) { return prob.gain_symbol(lambda)(j); });
            return out;
        }
    }
    throw InvalidArgument("reference_gain: unknown id");
}

Eigen::VectorXd modal_reference_control(const std::function<double(double)>& gain,
                                        const Eigen::VectorXd& w0_modal, double t,
                                        const Eigen::VectorXd& x_grid, double length) {
    Eigen::VectorXd u = Eigen::VectorXd::Zero(x_grid.size());
    for (int i = 1; i <= w0_modal.size(); ++i) {
        const double freq = i * M_PI / length;
        const double lambda = 1.0 / (freq * freq);
        const double g = gain(lambda);
        const double amp = -w0_modal(i - 1) * std::exp(-(1.0 / lambda + g) * t) * g;
        for (int l = 0; l < x_grid.size(); ++l)
            u(l) += amp * std::sqrt(2.0 / length) * std::sin(freq * x_grid(l));
    }
    return u;
}

Eigen::VectorXd modal_reference_control(const SpectralFunction& gain,
                                        const Eigen::VectorXd& w0_modal, double t,
                                        const Eigen::VectorXd& x_grid, double length) {
    return modal_reference_control([&](double lambda) { return gain.eval(lambda); }, w0_modal, t,
                                   x_grid, length);
}

std::string StudyResult::to_json() const {
    nlohmann::json j;
    j["example"] = example;
    j["study"] = study;
    j["config"] = config;
    j["rates"] = rates;
    j["tables"] = nlohmann::json::array();
    for (const auto& t : tables) {
        nlohmann::json jt;
        jt["name"] = t.name;
        jt["columns"] = t.columns;
        jt["rows"] = t.rows;
        j["tables"].push_back(jt);
    }
    return j.dump(2);
}

StudyResult StudyResult::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    StudyResult out;
    out.example = j.at("example").get<std::string>();
    out.study = j.at("study").get<std::string>();
    out.config = j.at("config").get<std::map<std::string, std::string>>();
    out.rates = j.at("rates").get<std::map<std::string, double>>();
    for (const auto& jt : j.at("tables")) {
        Table t;
        t.name = jt.at("name").get<std::string>();
        t.columns = jt.at("columns").get<std::vector<std::string>>();
        t.rows = jt.at("rows").get<std::vector<std::vector<double>>>();
        out.tables.push_back(std::move(t));
    }
    return out;
}

std::string StudyResult::table_csv(const Table& table) const {
    std::ostringstream out;
    for (const auto& c : table.columns) out << c << ",";
    out << "example\n";
    for (const auto& row : table.rows) {
        for (double v : row) out << format_double(v) << ",";
        out << example << "\n";
    }
    return out.str();
}

RationalMatrixFunction realized_gain(const ExampleProblem& prob, const RealizationConfig& cfg) {
    switch (prob.id) {
        case ExampleId::Heat1D: {
            auto res = galerkin_semi_implicit(WeakForm::HeatScalar, prob.lqr.interval,
                                              {cfg.degree});
            return fit_polynomial(res.components[0]);
        }
        case ExampleId::Beam1D: {
            auto res = galerkin_semi_implicit(WeakForm::BeamCoupled, prob.lqr.interval,
                                              {cfg.degree, cfg.degree});
            std::vector<RationalEntry> entries;
            for (int i = 0; i < 2; ++i) {
                RationalMatrixFunction e = fit_polynomial(res.components[i]);
                entries.push_back(e.entry());
            }
            return RationalMatrixFunction(1, 2, std::move(entries));
        }
        case ExampleId::Heat2DBoundary: {
            std::vector<std::pair<int, int>> degrees = cfg.fit_degrees;
            if (degrees.empty())
                degrees = {{19, 3}, {18, 3}, {17, 1}, {20, 2}};
            if (static_cast<int>(degrees.size()) != prob.params.modes)
                throw ConfigError("realized_gain: need one degree pair per mode");
            return fit_boundary_gain(prob, degrees).fn;
        }
        case ExampleId::Heat1DUnboundedB:
            throw ConfigError("realized_gain: no realization study is defined for this example");
    }
    throw InvalidArgument("realized_gain: unknown id");
}

namespace {

struct TimeGrid {
    int steps;
    double dt;
    double weight(int k) const { return (k == 0 || k == steps) ? 0.5 * dt : dt; }
};

// Per-mode evolution snapshots of a modal closed loop: coeffs(k, i) holds the
// coefficient row vector of mode i at time level k.
struct ModalEvolution {
    Eigen::VectorXd lambda;                // per mode
    std::vector<Eigen::MatrixXd> history;  // per time level: modes x state-dim
};

double time_quotient(const TimeGrid& grid, const std::vector<double>& diff_norm,
                     const std::vector<double>& ref_norm) {
    double num = 0.0, den = 0.0;
    for (int k = 0; k <= grid.steps; ++k) {
        num += grid.weight(k) * diff_norm[k];
        den += grid.weight(k) * ref_norm[k];
    }
    if (den == 0.0) throw DegenerateNorm("spatial study: zero reference control");
    return num / den;
}

// One mesh of the heat benchmark: realized control against the modal series.
double heat_spatial_quotient(const ExampleParams& base, const RealizationConfig& cfg,
                             const RationalMatrixFunction& r, int mesh, double horizon) {
    const double length = base.length <= 0 ? M_PI : base.length;
    BandedOperator op = laplacian_1d_dirichlet(mesh, length);
    const int n = op.dim();
    TrapezoidRule rule = trapezoid_rule(cfg.quad_points);
    Realizer realizer(op, SpectralInterval(0.0, 1.0), cfg.contour, rule);

    const int modes = std::min(cfg.state_modes, n);
    Eigen::VectorXd lambda(modes), g(modes), w0(modes);
    Eigen::MatrixXd phi(n, modes);
    if (cfg.reference_on_realization_modes) {
        ModalData modal = eigendecompose(op);
        for (int i = 0; i < modes; ++i) {
            // highest lambda = lowest frequency
            const int k = n - 1 - i;
            lambda(i) = modal.lambda(k);
            phi.col(i) = modal.phi.col(k);
        }
    } else {
        for (int i = 1; i <= modes; ++i) {
            const double freq = i * M_PI / length;
            lambda(i - 1) = 1.0 / (freq * freq);
            for (int l = 0; l < n; ++l)
                phi(l, i - 1) = std::sqrt(2.0 / length) * std::sin(freq * (l + 1) * length / mesh);
        }
    }
    for (int i = 0; i < modes; ++i) {
        g(i) = scalar_cauchy(r, cfg.contour, rule, lambda(i));
        w0(i) = 1.0 / ((i + 1.0) * (i + 1.0));
    }

    TimeGrid grid{std::max(cfg.time_steps, 200), 0.0};
    grid.dt = horizon / grid.steps;
    std::vector<double> diff_norm(grid.steps + 1), ref_norm(grid.steps + 1);
    for (int k = 0; k <= grid.steps; ++k) {
        const double t = k * grid.dt;
        Eigen::VectorXd coeff(modes), ucoeff(modes);
        for (int i = 0; i < modes; ++i) {
            coeff(i) = w0(i) * std::exp(-(1.0 / lambda(i) + g(i)) * t);
            ucoeff(i) = -g(i) * coeff(i);
        }
        Eigen::VectorXd state = phi * coeff;
        Eigen::VectorXd u_ref = phi * ucoeff;
        Eigen::VectorXd u_h = -realizer.apply(r, state).output.col(0);
        diff_norm[k] = (u_h - u_ref).norm();
        ref_norm[k] = u_ref.norm();
    }
    return time_quotient(grid, diff_norm, ref_norm);
}

double beam_spatial_quotient(const ExampleParams& base, const RealizationConfig& cfg,
                             const RationalMatrixFunction& r, int mesh, double horizon) {
    const double length = base.length <= 0 ? 4.73 : base.length;
    BandedOperator op = biharmonic_1d_clamped(mesh, length);
    const int n = op.dim();
    TrapezoidRule rule = trapezoid_rule(cfg.quad_points);
    Realizer realizer(op, SpectralInterval(0.0, 1.0), cfg.contour, rule);

    // Reference modes: the same grid in sanity mode, else a 4x finer one whose
    // nodes contain the coarse nodes.
    const int refine = cfg.reference_on_realization_modes ? 1 : 4;
    BandedOperator op_ref = cfg.reference_on_realization_modes
                                ? op
                                : biharmonic_1d_clamped(refine * mesh, length);
    ModalData modal = eigendecompose(op_ref);
    const int n_ref = op_ref.dim();
    const int modes = std::min(cfg.state_modes, n_ref);

    Eigen::VectorXd lambda(modes), g1(modes), g2(modes);
    Eigen::MatrixXd phi_ref(n_ref, modes);
    for (int i = 0; i < modes; ++i) {
        const int k = n_ref - 1 - i;
        lambda(i) = modal.lambda(k);
        phi_ref.col(i) = modal.phi.col(k) / modal.phi.col(k).cwiseAbs().maxCoeff();
        g1(i) = scalar_cauchy(r, cfg.contour, rule, lambda(i), 0, 0);
        g2(i) = scalar_cauchy(r, cfg.contour, rule, lambda(i), 0, 1);
    }
    Eigen::MatrixXd phi_coarse(n, modes);
    for (int l = 0; l < n; ++l) phi_coarse.row(l) = phi_ref.row(refine * (l + 1) - 1);

    TimeGrid grid{std::max(cfg.time_steps, 200), 0.0};
    grid.dt = horizon / grid.steps;

    // Per-mode second-order closed loop, advanced by one matrix exponential.
    std::vector<Eigen::Matrix2d> stepper(modes);
    for (int i = 0; i < modes; ++i) {
        Eigen::Matrix2d m;
        m << 0.0, 1.0, -(1.0 / lambda(i) + g1(i)), -g2(i);
        stepper[i] = (grid.dt * m).exp();
    }
    Eigen::MatrixXd z(2, modes); // rows: displacement / velocity coefficients
    for (int i = 0; i < modes; ++i) {
        z(0, i) = 1.0 / ((i + 1.0) * (i + 1.0));
        z(1, i) = 0.0;
    }

    std::vector<double> diff_norm(grid.steps + 1), ref_norm(grid.steps + 1);
    for (int k = 0; k <= grid.steps; ++k) {
        Eigen::VectorXd ucoeff(modes);
        for (int i = 0; i < modes; ++i) ucoeff(i) = -(g1(i) * z(0, i) + g2(i) * z(1, i));
        Eigen::VectorXd u_ref = phi_coarse * ucoeff;
        Eigen::MatrixXd state(n, 2);
        state.col(0) = phi_coarse * z.row(0).transpose();
        state.col(1) = phi_coarse * z.row(1).transpose();
        Eigen::VectorXd u_h = -realizer.apply(r, state).output.col(0);
        diff_norm[k] = (u_h - u_ref).norm();
        ref_norm[k] = u_ref.norm();
        for (int i = 0; i < modes; ++i) z.col(i) = stepper[i] * z.col(i);
    }
    return time_quotient(grid, diff_norm, ref_norm);
}

double heat2d_spatial_quotient(const ExampleProblem& base_prob, const RealizationConfig& cfg,
                               const RationalMatrixFunction& r, int mesh, double horizon) {
    const int j_modes = base_prob.params.modes;
    const double length = M_PI;
    BandedOperator op = laplacian_1d_dirichlet(mesh, length);
    const int n = op.dim();
    TrapezoidRule rule = trapezoid_rule(cfg.quad_points);
    Realizer realizer(op, base_prob.realization_interval, cfg.contour, rule);

    const int modes = std::min(cfg.state_modes, n);
    Eigen::VectorXd lambda(modes);
    Eigen::MatrixXd phi(n, modes);
    for (int i = 1; i <= modes; ++i) {
        lambda(i - 1) = 1.0 / (i * i);
        for (int l = 0; l < n; ++l)
            phi(l, i - 1) = std::sqrt(2.0 / length) * std::sin(i * (l + 1) * length / mesh);
    }
    // Quadrature-realized gain rows drive both the evolution and the outputs,
    // so the comparison isolates the spatial discretization.
    Eigen::MatrixXd gains(modes, j_modes);
    for (int i = 0; i < modes; ++i)
        for (int j = 0; j < j_modes; ++j)
            gains(i, j) = scalar_cauchy(r, cfg.contour, rule, lambda(i), 0, j);

    TimeGrid grid{std::max(cfg.time_steps, 200), 0.0};
    grid.dt = horizon / grid.steps;
    std::vector<Eigen::MatrixXd> stepper(modes);
    Eigen::MatrixXd b = base_prob.lqr.b(1.0);
    for (int i = 0; i < modes; ++i) {
        Eigen::MatrixXd m = base_prob.lqr.a(lambda(i)) - b * gains.row(i);
        stepper[i] = (grid.dt * m).exp();
    }
    Eigen::MatrixXd z(modes, j_modes);
    for (int i = 0; i < modes; ++i)
        for (int j = 0; j < j_modes; ++j) z(i, j) = 1.0 / ((i + 1.0) * (i + 1.0) * (j + 1.0));

    std::vector<double> diff_norm(grid.steps + 1), ref_norm(grid.steps + 1);
    for (int k = 0; k <= grid.steps; ++k) {
        Eigen::VectorXd ucoeff(modes);
        for (int i = 0; i < modes; ++i) ucoeff(i) = -gains.row(i).dot(z.row(i));
        Eigen::VectorXd u_ref = phi * ucoeff;
        Eigen::MatrixXd state = phi * z; // one column per state component
        Eigen::VectorXd u_h = -realizer.apply(r, state).output.col(0);
        diff_norm[k] = (u_h - u_ref).norm();
        ref_norm[k] = u_ref.norm();
        for (int i = 0; i < modes; ++i) z.row(i) = (stepper[i] * z.row(i).transpose()).transpose();
    }
    return time_quotient(grid, diff_norm, ref_norm);
}

} // namespace

StudyResult spatial_error_study(ExampleId id, const ExampleParams& base,
                                const RealizationConfig& cfg, const std::vector<int>& mesh_list,
                                double horizon) {
    if (mesh_list.empty()) throw ConfigError("spatial_error_study: empty mesh list");
    ExampleProblem prob = build_example(id, [&] {
        ExampleParams p = base;
        p.mesh = mesh_list[0];
        return p;
    }());
    RationalMatrixFunction r = realized_gain(prob, cfg);

    StudyResult result;
    result.example = example_name(id);
    result.study = "spatial";
    result.config["degree"] = std::to_string(cfg.degree);
    result.config["M"] = std::to_string(cfg.quad_points);
    result.config["T"] = format_double(horizon);
    result.config["time_steps"] = std::to_string(std::max(cfg.time_steps, 200));
    result.config["contour"] = cfg.contour.kind == Contour::Kind::Circle
                                   ? "circle R=" + format_double(cfg.contour.r)
                                   : "ellipse R1=" + format_double(cfg.contour.r1) +
                                         " R2=" + format_double(cfg.contour.r2);

    StudyResult::Table table;
    table.name = "spatial-error";
    table.columns = {"h", "error"};
    std::vector<double> log_h, log_e;
    for (int mesh : mesh_list) {
        double quotient = 0.0;
        const double length = base.length > 0 ? base.length
                                              : (id == ExampleId::Beam1D ? 4.73 : M_PI);
        switch (id) {
            case ExampleId::Heat1D:
                quotient = heat_spatial_quotient(base, cfg, r, mesh, horizon);
                break;
            case ExampleId::Beam1D:
                quotient = beam_spatial_quotient(base, cfg, r, mesh, horizon);
                break;
            case ExampleId::Heat2DBoundary:
                quotient = heat2d_spatial_quotient(prob, cfg, r, mesh, horizon);
                break;
            default:
                throw ConfigError("spatial_error_study: unsupported example");
        }
        const double h = length / mesh;
        table.rows.push_back({h, quotient});
        log_h.push_back(std::log(h));
        log_e.push_back(std::log(quotient));
    }
    if (table.rows.size() >= 2) result.rates["order"] = fit_slope(log_h, log_e);
    result.tables.push_back(std::move(table));
    result.config["meshes"] = [&] {
        std::ostringstream s;
        for (size_t i = 0; i < mesh_list.size(); ++i) s << (i ? "," : "") << mesh_list[i];
        return s.str();
    }();
    return result;
}

StudyResult quadrature_error_study(ExampleId id, const ExampleParams& base,
                                   const RealizationConfig& cfg, const std::vector<double>& radii,
                                   const std::vector<int>& m_list) {
    ExampleProblem prob = build_example(id, base);
    RationalMatrixFunction r = realized_gain(prob, cfg);
    std::vector<std::function<double(double)>> exact = reference_gain(id, base.modes);

    StudyResult result;
    result.example = example_name(id);
    result.study = "quadrature";
    result.config["degree"] = std::to_string(cfg.degree);
    result.config["mesh"] = std::to_string(base.mesh);
    {
        std::ostringstream rs, ms;
        for (size_t i = 0; i < radii.size(); ++i) rs << (i ? "," : "") << format_double(radii[i]);
        for (size_t i = 0; i < m_list.size(); ++i) ms << (i ? "," : "") << m_list[i];
        result.config["R"] = rs.str();
        result.config["M"] = ms.str();
    }

    const int components = r.rows() * r.cols();
    GalerkinResult galerkin = galerkin_semi_implicit(
        id == ExampleId::Beam1D ? WeakForm::BeamCoupled : WeakForm::HeatScalar,
        prob.lqr.interval, std::vector<int>(components, cfg.degree));
    for (int comp = 0; comp < components; ++comp)
        result.rates["polynomial_error_" + std::to_string(comp + 1)] =
            l2_relative_error(galerkin.components[comp], exact[comp]);

    std::vector<std::vector<std::vector<ErrorCurvePoint>>> curves(
        radii.size(), std::vector<std::vector<ErrorCurvePoint>>(components));
    auto run_radius = [&](size_t ri) {
        Contour contour = Contour::circle(radii[ri]);
        for (int comp = 0; comp < components; ++comp) {
            RationalMatrixFunction entry =
                RationalMatrixFunction(1, 1, {r.entry(0, comp)});
            curves[ri][comp] = realization_error_curve(entry, exact[comp], contour, prob.op,
                                                       prob.lqr.interval, m_list);
        }
    };
    if (cfg.jobs > 1 && radii.size() > 1) {
        std::vector<std::thread> pool;
        for (size_t ri = 0; ri < radii.size(); ++ri) pool.emplace_back(run_radius, ri);
        for (auto& t : pool) t.join();
    } else {
        for (size_t ri = 0; ri < radii.size(); ++ri) run_radius(ri);
    }

    for (size_t ri = 0; ri < radii.size(); ++ri)
        for (int comp = 0; comp < components; ++comp) {
            StudyResult::Table table;
            table.name = "E-vs-M R=" + format_double(radii[ri]) +
                         (components > 1 ? " k" + std::to_string(comp + 1) : "");
            table.columns = {"M", "E", "E_op", "R"};
            double best = std::numeric_limits<double>::infinity();
            size_t best_at = 0;
            for (size_t k = 0; k < curves[ri][comp].size(); ++k) {
                const auto& pt = curves[ri][comp][k];
                table.rows.push_back({static_cast<double>(pt.m), pt.err_l2, pt.err_op, radii[ri]});
                if (pt.err_l2 < best) {
                    best = pt.err_l2;
                    best_at = k;
                }
            }
            // slope of the genuinely decaying branch; plateau points carry no rate
            std::vector<double> xs, ys;
            for (size_t k = 0; k <= best_at; ++k) {
                if (k < best_at && curves[ri][comp][k].err_l2 <= 3.0 * best) continue;
                xs.push_back(static_cast<double>(curves[ri][comp][k].m));
                ys.push_back(std::log(curves[ri][comp][k].err_l2));
            }
            const std::string suffix = format_double(radii[ri]) +
                                       (components > 1 ? "_k" + std::to_string(comp + 1) : "");
            if (xs.size() >= 2) result.rates["slope_R=" + suffix] = fit_slope(xs, ys);
            result.rates["min_E_R=" + suffix] = best;
            result.tables.push_back(std::move(table));
        }
    return result;
}

BoundaryGainFit fit_boundary_gain(const ExampleProblem& prob,
                                  const std::vector<std::pair<int, int>>& degrees,
                                  int fit_nodes) {
    if (prob.id != ExampleId::Heat2DBoundary)
        throw ConfigError("fit_boundary_gain: boundary-control example required");
    const int j_modes = prob.params.modes;
    if (static_cast<int>(degrees.size()) != j_modes)
        throw ConfigError("fit_boundary_gain: one degree pair per mode required");

    // Log-equispaced fit nodes spanning [truncation, 1].
    const double lo_exp = std::log10(prob.params.truncation);
    Eigen::VectorXd nodes(fit_nodes);
    for (int k = 0; k < fit_nodes; ++k)
        nodes(k) = std::pow(10.0, lo_exp * (1.0 - k / (fit_nodes - 1.0)));

    std::vector<Eigen::MatrixXd> values;
    values.reserve(fit_nodes);
    Eigen::MatrixXd warm;
    for (int k = 0; k < fit_nodes; ++k) {
        auto sol = are_pointwise(prob.lqr, nodes(k), 1e-12, warm.size() ? &warm : nullptr);
        warm = sol.p;
        values.push_back(gain_pointwise(prob.lqr, sol));
    }
    SampleSet samples(nodes, std::move(values));
    // poles must clear the whole spectral interval, not just the fitted part
    RationalFit fit = fit_rational_ls(samples, degrees, SpectralInterval(0.0, 1.0));

    BoundaryGainFit out{std::move(fit.fn), {}, std::move(fit.residual), Eigen::VectorXd(201)};
    for (int n = 0; n <= 200; ++n) out.report_grid(n) = std::pow(10.0, -2.0 + n / 100.0);

    Eigen::MatrixXd exact(201, j_modes);
    warm.resize(0, 0);
    for (int n = 0; n <= 200; ++n) {
        auto sol = are_pointwise(prob.lqr, out.report_grid(n), 1e-12, warm.size() ? &warm : nullptr);
        warm = sol.p;
        exact.row(n) = gain_pointwise(prob.lqr, sol).row(0);
    }
    for (int j = 0; j < j_modes; ++j) {
        Eigen::VectorXd approx(201);
        for (int n = 0; n <= 200; ++n)
            approx(n) = out.fn.eval(std::complex<double>(out.report_grid(n), 0.0), 0, j).real();
        out.fit_error.push_back(discrete_l2_relative_error(approx, exact.col(j)));
    }
    return out;
}

StudyResult boundary_quadrature_study(const ExampleProblem& prob, const BoundaryGainFit& fit,
                                      const Contour& contour, const std::vector<int>& m_list) {
    const int j_modes = prob.params.modes;
    StudyResult result;
    result.example = example_name(prob.id);
    result.study = "quadrature";
    result.config["R1"] = format_double(contour.r1);
    result.config["R2"] = format_double(contour.r2);
    result.config["truncation"] = format_double(prob.params.truncation);
    {
        std::ostringstream ms;
        for (size_t i = 0; i < m_list.size(); ++i) ms << (i ? "," : "") << m_list[i];
        result.config["M"] = ms.str();
    }

    Eigen::MatrixXd exact(fit.report_grid.size(), j_modes);
    Eigen::MatrixXd warm;
    for (int n = 0; n < fit.report_grid.size(); ++n) {
        auto sol = are_pointwise(prob.lqr, fit.report_grid(n), 1e-12,
                                 warm.size() ? &warm : nullptr);
        warm = sol.p;
        exact.row(n) = gain_pointwise(prob.lqr, sol).row(0);
    }

    for (int j = 0; j < j_modes; ++j) {
        StudyResult::Table table;
        table.name = "E-vs-M mode " + std::to_string(j + 1);
        table.columns = {"M", "E", "R1", "R2"};
        for (int m : m_list) {
            TrapezoidRule rule = trapezoid_rule(m);
            Eigen::VectorXd approx(fit.report_grid.size());
            for (int n = 0; n < fit.report_grid.size(); ++n)
                approx(n) = scalar_cauchy(fit.fn, contour, rule, fit.report_grid(n), 0, j);
            table.rows.push_back({static_cast<double>(m),
                                  discrete_l2_relative_error(approx, exact.col(j)), contour.r1,
                                  contour.r2});
        }
        result.tables.push_back(std::move(table));
    }
    return result;
}

std::vector<std::vector<double>> closed_loop_energy(const ExampleProblem& prob,
                                                    const RationalMatrixFunction& gain,
                                                    const RealizationConfig& cfg, double dt,
                                                    double horizon, int n_states, unsigned seed) {
    if (prob.id != ExampleId::Heat1D)
        throw ConfigError("closed_loop_energy: heat benchmark only");
    const int n = prob.op.dim();
    TrapezoidRule rule = trapezoid_rule(cfg.quad_points);
    Realizer realizer(prob.op, prob.realization_interval, cfg.contour, rule);

    // Implicit Euler in the diffusion, explicit in the realized feedback.
    BandedMatrix stepper(n, 1, 1);
    for (int i = 0; i < n; ++i) {
        stepper.set(i, i, 1.0 + dt * prob.op.matrix().get(i, i));
        if (i > 0) stepper.set(i, i - 1, dt * prob.op.matrix().get(i, i - 1));
        if (i + 1 < n) stepper.set(i, i + 1, dt * prob.op.matrix().get(i, i + 1));
    }
    stepper.factorize();

    std::mt19937 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    const int steps = static_cast<int>(std::llround(horizon / dt));
    std::vector<std::vector<double>> energies;
    for (int s = 0; s < n_states; ++s) {
        Eigen::VectorXd z(n);
        for (int i = 0; i < n; ++i) z(i) = dist(rng);
        z /= z.norm();
        std::vector<double> trace{z.squaredNorm()};
        for (int k = 0; k < steps; ++k) {
            Eigen::VectorXd u = -realizer.apply(gain, z).output.col(0);
            z = stepper.solve(z + dt * u);
            trace.push_back(z.squaredNorm());
        }
        energies.push_back(std::move(trace));
    }
    return energies;
}

Eigen::MatrixXd boundary_control_recover(const Eigen::MatrixXd& u, const Eigen::VectorXd& v0,
                                         double dt, double length) {
    if (dt <= 0.0) throw ConfigError("boundary_control_recover: time step must be positive");
    const int n = static_cast<int>(v0.size());
    if (u.cols() != n) throw ConfigError("boundary_control_recover: grid mismatch");
    BandedOperator lap = laplacian_1d_dirichlet(n + 1, length);

    BandedMatrix stepper(n, 1, 1);
    for (int i = 0; i < n; ++i) {
        stepper.set(i, i, 1.0 + dt * lap.matrix().get(i, i));
        if (i > 0) stepper.set(i, i - 1, dt * lap.matrix().get(i, i - 1));
        if (i + 1 < n) stepper.set(i, i + 1, dt * lap.matrix().get(i, i + 1));
    }
    stepper.factorize();

    Eigen::MatrixXd v(u.rows(), n);
    v.row(0) = v0.transpose();
    for (int k = 1; k < u.rows(); ++k) {
        Eigen::VectorXd rhs = v.row(k - 1).transpose() + dt * u.row(k).transpose();
        v.row(k) = stepper.solve(rhs).transpose();
    }
    return v;
}

LocalityReport locality_audit(const BandedOperator& op, const Contour& contour,
                              const TrapezoidRule& rule, int sweeps, double damping) {
    LocalityReport report;
    report.declared_width = op.bandwidth();
    const int n = op.dim();
    std::vector<std::set<int>> reads(n);

    std::vector<std::unique_ptr<ShiftedBlockSystem>> systems;
    for (int l = 0; l < rule.m; ++l) {
        systems.push_back(std::make_unique<ShiftedBlockSystem>(op, contour.point(rule.thetas(l))));
        const BandedMatrix& block = systems.back()->block_matrix();
        for (int bi = 0; bi < block.size(); ++bi) {
            const int i = bi / 2;
            const int j0 = std::max(0, bi - block.lower_bandwidth());
            const int j1 = std::min(block.size() - 1, bi + block.upper_bandwidth());
            for (int bj = j0; bj <= j1; ++bj) {
                if (block.get(bi, bj) == 0.0) continue;
                const int j = bj / 2;
                if (i == j) continue;
                if (std::abs(i - j) > report.declared_width) {
                    std::ostringstream msg;
                    msg << "locality_audit: update of node " << i << " reads node " << j
                        << " (block entry " << bi << "," << bj << ") beyond width "
                        << report.declared_width;
                    throw StructuralFailure(msg.str());
                }
                reads[i].insert(j);
                report.observed_width = std::max(report.observed_width, std::abs(i - j));
            }
        }
    }
    report.node_volume.resize(n);
    for (int i = 0; i < n; ++i) report.node_volume(i) = static_cast<int>(reads[i].size());

    // Run the sweeps so the audit reflects an actual iterative realization.
    Eigen::VectorXd z = Eigen::VectorXd::Ones(n) / std::sqrt(static_cast<double>(n));
    auto sol = systems[0]->solve_jacobi(z, Eigen::VectorXd::Zero(n), damping, sweeps, 1e-13);
    report.achieved_residual = sol.residual;
    return report;
}

std::pair<double, double> linear_gain_coefficients() {
    auto res = galerkin_semi_implicit(WeakForm::HeatScalar, SpectralInterval(0.0, 1.0), {1});
    RationalMatrixFunction r = fit_polynomial(res.components[0]);
    return {r.entry().num(0), r.entry().num(1)};
}

double discrete_l2_relative_error(const Eigen::VectorXd& approx, const Eigen::VectorXd& exact) {
    if (approx.size() != exact.size())
        throw InvalidArgument("discrete_l2_relative_error: size mismatch");
    const double den = exact.norm();
    if (den == 0.0) throw DegenerateNorm("discrete_l2_relative_error: zero reference");
    return (approx - exact).norm() / den;
}

} // namespace semidec
