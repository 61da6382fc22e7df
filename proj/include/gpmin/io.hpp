#pragma once

// JSON and CSV serialization of configurations and results.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "gpmin/asymptotics.hpp"
#include "gpmin/errors.hpp"
#include "gpmin/kernels.hpp"
#include "gpmin/mc_harness.hpp"
#include "gpmin/measure_solver.hpp"

namespace gpmin {

using Json = nlohmann::json;

class ConfigError : public Error {
public:
    using Error::Error;
};

namespace detail {

// JSON has no NaN/inf: they are written as null and read back as `missing`
inline Json number(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

inline double number_or(const Json &j, double missing) { return j.is_null() ? missing : j.get<double>(); }

inline Json vector_json(const Eigen::VectorXd &v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

inline Eigen::VectorXd vector_from(const Json &j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Json matrix_json(const Eigen::MatrixXd &m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<double> r(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index j = 0; j < m.cols(); ++j) { r[static_cast<std::size_t>(j)] = m(i, j); }
        rows.push_back(r);
    }
    return rows;
}

inline Eigen::MatrixXd matrix_from(const Json &j) {
    const auto n = static_cast<Eigen::Index>(j.size());
    const auto c = n == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j.at(0).size());
    Eigen::MatrixXd m(n, c);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index q = 0; q < c; ++q) {
            m(i, q) = j.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(q)).get<double>();
        }
    }
    return m;
}

// field access with a dotted path in the error message
template <class T>
T field(const Json &obj, const std::string &key, const std::string &path, std::optional<T> fallback = std::nullopt) {
    if (!obj.is_object()) { throw ConfigError("field '" + path + "': expected an object"); }
    const auto it = obj.find(key);
    if (it == obj.end()) {
        if (fallback) { return *fallback; }
        throw ConfigError("field '" + path + "." + key + "': required");
    }
    try {
        return it->template get<T>();
    } catch (const Json::exception &e) {
        throw ConfigError("field '" + path + "." + key + "': " + e.what());
    }
}

}  // namespace detail

// ---- kernels ----------------------------------------------------------------

inline Json stationary_to_json(const StationaryKernel &k) {
    return std::visit(
        [](const auto &impl) -> Json {
            using T = std::decay_t<decltype(impl)>;
            if constexpr (std::is_same_v<T, GaussianKernel>) {
                return {{"family", "gaussian"}, {"scale", impl.scale}};
            } else if constexpr (std::is_same_v<T, SincKernel>) {
                return {{"family", "sinc"}, {"scale", impl.scale}};
            } else {
                return {{"family", "spectral"}, {"nodes", impl.nodes}, {"weights", impl.weights}};
            }
        },
        k);
}

inline Json kernel_to_json(const Kernel &kernel) {
    if (const auto *c = std::get_if<CompositeKernel>(&kernel.variant())) {
        return {{"family", "composite"},
                {"polynomial", c->polynomial},
                {"base", stationary_to_json(c->base)},
                {"functional", c->functional == ResidualFunctional::EvalAtZero ? "eval-at-zero" : "integral-unit"}};
    }
    return stationary_to_json(*kernel.stationary_part());
}

/// {"family": "gaussian"|"sinc", "scale": s}, {"family": "spectral", "nodes": [...], "weights": [...]},
/// {"family": "composite", "polynomial": [...], "base": {...}, "functional": "eval-at-zero"|"integral-unit"}
/// or {"family": "composite", "preset": "singleton"|"flat", "base": {...}}.
inline Kernel kernel_from_json(const Json &j, const std::string &path = "kernel") {
    const auto family = detail::field<std::string>(j, "family", path);
    try {
        if (family == "gaussian") { return Kernel::gaussian(detail::field<double>(j, "scale", path, 1.0)); }
        if (family == "sinc") { return Kernel::sinc(detail::field<double>(j, "scale", path, 1.0)); }
        if (family == "spectral") {
            return Kernel::spectral(detail::field<std::vector<double>>(j, "nodes", path),
                                    detail::field<std::vector<double>>(j, "weights", path));
        }
    } catch (const InvalidArgument &e) {
        throw ConfigError("field '" + path + "': " + e.what());
    }
    if (family != "composite") { throw ConfigError("field '" + path + ".family': unknown family '" + family + "'"); }
    const Kernel base = j.contains("base") ? kernel_from_json(j.at("base"), path + ".base") : Kernel::gaussian();
    if (base.is_composite()) { throw ConfigError("field '" + path + ".base': must be a stationary kernel"); }
    if (j.contains("preset")) {
        const auto preset = detail::field<std::string>(j, "preset", path);
        if (preset == "singleton") { return Kernel::singleton_example(base); }
        if (preset == "flat") { return Kernel::flat_example(base); }
        throw ConfigError("field '" + path + ".preset': unknown preset '" + preset + "'");
    }
    const auto fn = detail::field<std::string>(j, "functional", path);
    ResidualFunctional functional{};
    if (fn == "eval-at-zero") {
        functional = ResidualFunctional::EvalAtZero;
    } else if (fn == "integral-unit") {
        functional = ResidualFunctional::IntegralUnit;
    } else {
        throw ConfigError("field '" + path + ".functional': unknown functional '" + fn + "'");
    }
    try {
        return Kernel::composite(detail::field<std::vector<double>>(j, "polynomial", path), base, functional);
    } catch (const InvalidArgument &e) {
        throw ConfigError("field '" + path + "': " + e.what());
    }
}

// ---- run configuration ------------------------------------------------------

struct VerifyConfig {
    std::vector<double> u{3.0, 4.0, 5.0};
    long n = 1000000;
    int grid_m = 201;
    std::uint64_t seed = 12345;
};

/// One self-describing run: kernel, interval and per-command overrides.
struct RunConfig {
    Json kernel_spec = {{"family", "gaussian"}, {"scale", 1.0}};
    double a = 0.0;
    Json b = 1.0;  // number, or "c1" / "c2" for the breakpoints of the kernel
    SolverOptions solver;
    AsymptoticOptions asymptotics;
    VerifyConfig verify;
    std::string out = ".";

    [[nodiscard]] Kernel kernel() const { return kernel_from_json(kernel_spec); }

    [[nodiscard]] Interval interval() const {
        if (b.is_number()) { return Interval(a, b.get<double>()); }
        const auto s = b.get<std::string>();
        const Kernel k = kernel();
        if (!k.is_stationary()) { throw ConfigError("field 'interval.b': breakpoints need a stationary kernel"); }
        return Interval(a, a + breakpoint_solve(k, s == "c1" ? Breakpoint::C1 : Breakpoint::C2));
    }
};

inline Json config_to_json(const RunConfig &c) {
    return {{"kernel", c.kernel_spec},
            {"interval", {{"a", c.a}, {"b", c.b}}},
            {"solver",
             {{"grid_n", c.solver.grid_n},
              {"verify_grid_n", c.solver.verify_grid_n},
              {"kkt_tolerance", c.solver.kkt_tolerance},
              {"gap_tolerance", c.solver.gap_tolerance},
              {"newton_tolerance", c.solver.newton_tolerance}}},
            {"asymptotics", {{"mc_n", c.asymptotics.mc_n}, {"seed", c.asymptotics.seed}, {"deriv_tol", c.asymptotics.deriv_tol}}},
            {"verify", {{"u", c.verify.u}, {"n", c.verify.n}, {"grid_m", c.verify.grid_m}, {"seed", c.verify.seed}}},
            {"out", c.out}};
}

inline RunConfig config_from_json(const Json &j) {
    using detail::field;
    if (!j.is_object()) { throw ConfigError("configuration must be a JSON object"); }
    RunConfig c;
    if (j.contains("kernel")) {
        c.kernel_spec = j.at("kernel");
        (void)kernel_from_json(c.kernel_spec);
    }
    if (j.contains("interval")) {
        const Json &iv = j.at("interval");
        c.a = field<double>(iv, "a", "interval", 0.0);
        c.b = iv.contains("b") ? iv.at("b") : Json(1.0);
        if (c.b.is_string()) {
            const auto s = c.b.get<std::string>();
            if (s != "c1" && s != "c2") { throw ConfigError("field 'interval.b': expected a number, \"c1\" or \"c2\""); }
        } else if (!c.b.is_number()) {
            throw ConfigError("field 'interval.b': expected a number, \"c1\" or \"c2\"");
        } else if (!(std::isfinite(c.a) && c.a <= c.b.get<double>())) {
            throw ConfigError("field 'interval': need finite a <= b");
        }
    }
    if (j.contains("solver")) {
        const Json &s = j.at("solver");
        c.solver.grid_n = field<int>(s, "grid_n", "solver", c.solver.grid_n);
        c.solver.verify_grid_n = field<int>(s, "verify_grid_n", "solver", c.solver.verify_grid_n);
        c.solver.kkt_tolerance = field<double>(s, "kkt_tolerance", "solver", c.solver.kkt_tolerance);
        c.solver.gap_tolerance = field<double>(s, "gap_tolerance", "solver", c.solver.gap_tolerance);
        c.solver.newton_tolerance = field<double>(s, "newton_tolerance", "solver", c.solver.newton_tolerance);
        if (c.solver.grid_n < 2) { throw ConfigError("field 'solver.grid_n': must be >= 2"); }
    }
    if (j.contains("asymptotics")) {
        const Json &s = j.at("asymptotics");
        c.asymptotics.mc_n = field<long>(s, "mc_n", "asymptotics", c.asymptotics.mc_n);
        c.asymptotics.seed = field<std::uint64_t>(s, "seed", "asymptotics", c.asymptotics.seed);
        c.asymptotics.deriv_tol = field<double>(s, "deriv_tol", "asymptotics", c.asymptotics.deriv_tol);
    }
    if (j.contains("verify")) {
        const Json &s = j.at("verify");
        c.verify.u = field<std::vector<double>>(s, "u", "verify", c.verify.u);
        c.verify.n = field<long>(s, "n", "verify", c.verify.n);
        c.verify.grid_m = field<int>(s, "grid_m", "verify", c.verify.grid_m);
        c.verify.seed = field<std::uint64_t>(s, "seed", "verify", c.verify.seed);
        if (c.verify.n <= 0) { throw ConfigError("field 'verify.n': must be positive"); }
        if (c.verify.grid_m < 2) { throw ConfigError("field 'verify.grid_m': must be >= 2"); }
    }
    c.out = field<std::string>(j, "out", "", c.out);
    return c;
}

/// Parse a configuration file; syntax errors report the line number.
inline RunConfig load_config(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) { throw ConfigError("cannot open config file '" + path + "'"); }
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::parse_error &e) {
        const auto upto = std::min(text.size(), static_cast<std::size_t>(e.byte));
        const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
        throw ConfigError(path + ":" + std::to_string(line) + ": " + e.what());
    }
    return config_from_json(j);
}

// ---- solutions and reports --------------------------------------------------

inline Json solution_to_json(const OptimalSolution &s) {
    return {{"interval", {{"a", s.interval.a}, {"b", s.interval.b}}},
            {"atoms", s.measure.atoms},
            {"weights", s.measure.weights},
            {"v_star", detail::number(s.v_star)},
            {"kkt_min", detail::number(s.kkt_min)},
            {"kkt_grid_n", s.kkt_grid_n},
            {"newton_residual", detail::number(s.newton_residual)},
            {"newton_iterations", s.newton_iterations},
            {"converged", s.converged},
            {"degenerate_flat", s.degenerate_flat},
            {"message", s.message},
            {"sigma", detail::matrix_json(s.sigma)},
            {"theta", detail::vector_json(s.theta)}};
}

inline OptimalSolution solution_from_json(const Json &j) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    OptimalSolution s;
    s.interval = Interval(j.at("interval").at("a").get<double>(), j.at("interval").at("b").get<double>());
    s.measure.atoms = j.at("atoms").get<std::vector<double>>();
    s.measure.weights = j.at("weights").get<std::vector<double>>();
    s.v_star = detail::number_or(j.at("v_star"), nan);
    s.kkt_min = detail::number_or(j.at("kkt_min"), nan);
    s.kkt_grid_n = j.at("kkt_grid_n").get<int>();
    s.newton_residual = detail::number_or(j.at("newton_residual"), nan);
    s.newton_iterations = j.at("newton_iterations").get<int>();
    s.converged = j.at("converged").get<bool>();
    s.degenerate_flat = j.at("degenerate_flat").get<bool>();
    s.message = j.at("message").get<std::string>();
    s.sigma = detail::matrix_from(j.at("sigma"));
    s.theta = detail::vector_from(j.at("theta"));
    return s;
}

namespace detail {

inline EssentialKind essential_kind_from(const std::string &s) {
    if (s == "interior-support") { return EssentialKind::InteriorSupport; }
    if (s == "endpoint-support") { return EssentialKind::EndpointSupport; }
    if (s == "essential-nonsupport") { return EssentialKind::EssentialNonSupport; }
    throw InvalidArgument("unknown essential point kind '" + s + "'");
}

inline ComponentKind component_kind_from(const std::string &s) {
    if (s == "interior-slope") { return ComponentKind::InteriorSlope; }
    if (s == "left-slope") { return ComponentKind::LeftSlope; }
    if (s == "right-slope") { return ComponentKind::RightSlope; }
    if (s == "level") { return ComponentKind::Level; }
    throw InvalidArgument("unknown residual component kind '" + s + "'");
}

}  // namespace detail

inline Json report_to_json(const AsymptoticReport &r) {
    Json essential = Json::array();
    for (const auto &p : r.essential.points) {
        essential.push_back({{"t", p.t},
                             {"kind", to_string(p.kind)},
                             {"support_index", p.support_index},
                             {"mu", p.mu},
                             {"d1", p.d1},
                             {"d2", p.d2},
                             {"flat_slope", p.flat_slope},
                             {"flat_curvature", p.flat_curvature},
                             {"order", p.order}});
    }
    Json components = Json::array();
    for (const auto &c : r.field.components) {
        components.push_back(
            {{"kind", to_string(c.kind)}, {"t", c.t}, {"order", c.order}, {"lambda", detail::number(c.lambda)}});
    }
    Json out = {{"interval", {{"a", r.interval.a}, {"b", r.interval.b}}},
                {"k", r.k},
                {"support", r.support},
                {"weights", r.weights},
                {"theta", detail::vector_json(r.theta)},
                {"sigma", detail::matrix_json(r.sigma)},
                {"v_star", r.v_star},
                {"det_sigma", r.det_sigma},
                {"c", r.c_const},
                {"nondegenerate", r.nondegenerate},
                {"expected_w",
                 {{"mean", r.expected_w.mean},
                  {"ci_half_width", r.expected_w.ci_half_width},
                  {"samples", r.expected_w.samples},
                  {"closed_form", r.expected_w.closed_form}}},
                {"essential_set",
                 {{"points", essential},
                  {"support_size", r.essential.support_size},
                  {"suspicious_multiplicity", r.essential.suspicious_multiplicity}}},
                {"residual_field", {{"components", components}, {"covariance", detail::matrix_json(r.field.covariance)}}}};
    out["leading_constant"] = r.nondegenerate ? Json(r.leading_constant()) : Json(nullptr);
    return out;
}

inline AsymptoticReport report_from_json(const Json &j) {
    AsymptoticReport r;
    r.interval = Interval(j.at("interval").at("a").get<double>(), j.at("interval").at("b").get<double>());
    r.k = j.at("k").get<int>();
    r.support = j.at("support").get<std::vector<double>>();
    r.weights = j.at("weights").get<std::vector<double>>();
    r.theta = detail::vector_from(j.at("theta"));
    r.sigma = detail::matrix_from(j.at("sigma"));
    r.v_star = j.at("v_star").get<double>();
    r.det_sigma = j.at("det_sigma").get<double>();
    r.c_const = j.at("c").get<double>();
    r.nondegenerate = j.at("nondegenerate").get<bool>();
    const Json &ew = j.at("expected_w");
    r.expected_w = {ew.at("mean").get<double>(), ew.at("ci_half_width").get<double>(), ew.at("samples").get<long>(),
                    ew.at("closed_form").get<bool>()};
    const Json &es = j.at("essential_set");
    for (const Json &p : es.at("points")) {
        r.essential.points.push_back({p.at("t").get<double>(), detail::essential_kind_from(p.at("kind").get<std::string>()),
                                      p.at("support_index").get<int>(), p.at("mu").get<double>(),
                                      p.at("d1").get<double>(), p.at("d2").get<double>(), p.at("flat_slope").get<bool>(),
                                      p.at("flat_curvature").get<bool>(), p.at("order").get<int>()});
    }
    r.essential.support_size = es.at("support_size").get<std::size_t>();
    r.essential.suspicious_multiplicity = es.at("suspicious_multiplicity").get<bool>();
    const Json &rf = j.at("residual_field");
    for (const Json &c : rf.at("components")) {
        r.field.components.push_back({detail::component_kind_from(c.at("kind").get<std::string>()), c.at("t").get<double>(),
                                      c.at("order").get<int>(),
                                      detail::number_or(c.at("lambda"), std::numeric_limits<double>::infinity())});
    }
    r.field.covariance = detail::matrix_from(rf.at("covariance"));
    return r;
}

inline Json mc_report_to_json(const MCReport &r) {
    Json atoms = Json::array();
    for (const auto &a : r.atom_overshoot) { atoms.push_back({{"mean", a.mean}, {"ks", a.ks}}); }
    return {{"u", r.u},
            {"n", r.n},
            {"seed", r.seed},
            {"grid_m", r.grid_m},
            {"jitter", r.jitter},
            {"p_hat", r.p_hat},
            {"ci", {r.ci_lo, r.ci_hi}},
            {"formula_value", detail::number(r.formula_value)},
            {"ratio", detail::number(r.ratio)},
            {"ess", r.ess},
            {"accepted", r.accepted},
            {"overshoot", {{"mean", r.overshoot.mean}, {"ks", r.overshoot.ks}}},
            {"argmin_hist",
             {{"atoms", r.argmin.atoms}, {"frequencies", r.argmin.frequencies}, {"off_atom", r.argmin.off_atom}}},
            {"atom_overshoot", atoms},
            {"max_atom_correlation", r.max_atom_correlation},
            {"warnings", {{"low_ess", r.warning.low_ess}, {"low_accepted", r.warning.low_accepted}}}};
}

inline MCReport mc_report_from_json(const Json &j) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    MCReport r;
    r.u = j.at("u").get<double>();
    r.n = j.at("n").get<long>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.grid_m = j.at("grid_m").get<int>();
    r.jitter = j.at("jitter").get<double>();
    r.p_hat = j.at("p_hat").get<double>();
    r.ci_lo = j.at("ci").at(0).get<double>();
    r.ci_hi = j.at("ci").at(1).get<double>();
    r.formula_value = detail::number_or(j.at("formula_value"), nan);
    r.ratio = detail::number_or(j.at("ratio"), nan);
    r.ess = j.at("ess").get<double>();
    r.accepted = j.at("accepted").get<long>();
    r.overshoot = {j.at("overshoot").at("mean").get<double>(), j.at("overshoot").at("ks").get<double>()};
    const Json &h = j.at("argmin_hist");
    r.argmin = {h.at("atoms").get<std::vector<double>>(), h.at("frequencies").get<std::vector<double>>(),
                h.at("off_atom").get<double>()};
    for (const Json &a : j.at("atom_overshoot")) {
        r.atom_overshoot.push_back({a.at("mean").get<double>(), a.at("ks").get<double>()});
    }
    r.max_atom_correlation = j.at("max_atom_correlation").get<double>();
    r.warning = {j.at("warnings").at("low_ess").get<bool>(), j.at("warnings").at("low_accepted").get<bool>()};
    return r;
}

// ---- CSV --------------------------------------------------------------------

/// Shortest decimal representation that reads back to the same double.
inline std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

inline std::string csv_field(const std::string &s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) { return s; }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') { out += '"'; }
        out += c;
    }
    return out + '"';
}

/// RFC 4180 table with LF line endings.
inline void write_csv(std::ostream &os, const std::vector<std::string> &header,
                      const std::vector<std::vector<double>> &rows) {
    for (std::size_t i = 0; i < header.size(); ++i) { os << (i ? "," : "") << csv_field(header[i]); }
    os << '\n';
    for (const auto &row : rows) {
        detail::require(row.size() == header.size(), "csv row width does not match the header");
        for (std::size_t i = 0; i < row.size(); ++i) { os << (i ? "," : "") << format_double(row[i]); }
        os << '\n';
    }
}

/// (t, mu(t)) on n equispaced points of the interval.
inline std::vector<std::vector<double>> mu_table(const MuFunction &mu, const Interval &iv, int n = 2001) {
    std::vector<std::vector<double>> rows;
    for (double t : uniform_grid(iv, n)) { rows.push_back({t, mu(t, 0)}); }
    return rows;
}

/// (overshoot, argmin location, normalized weight) per accepted path.
inline std::vector<std::vector<double>> ensemble_table(const ConditionalEnsemble &ens, const PathGrid &grid) {
    std::vector<std::vector<double>> rows;
    rows.reserve(ens.samples.size());
    for (std::size_t i = 0; i < ens.samples.size(); ++i) {
        rows.push_back({ens.samples[i].overshoot, grid.points[ens.samples[i].argmin], ens.weights[i]});
    }
    return rows;
}

/// Weighted fluctuation mean with a +-2 standard error band per grid point.
inline std::vector<std::vector<double>> fluctuation_table(const ConditionalEnsemble &ens, const PathGrid &grid) {
    std::vector<std::vector<double>> rows;
    const double n_eff = std::max(ens.ess, 1.0);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto q = static_cast<Eigen::Index>(i);
        const double se = std::sqrt(ens.fluctuation_var(q) / n_eff);
        const double m = ens.fluctuation_mean(q);
        rows.push_back({grid.points[i], m, m - 2.0 * se, m + 2.0 * se});
    }
    return rows;
}

}  // namespace gpmin
