// Command-line driver: solve | asym | verify | mu-plot | breakpoints

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gpmin/asymptotics.hpp"
#include "gpmin/io.hpp"
#include "gpmin/mc_harness.hpp"
#include "gpmin/measure_solver.hpp"

namespace fs = std::filesystem;
using namespace gpmin;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitFlat = 2;
constexpr int kExitWarning = 3;

struct Flags {
    std::string config;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<long> n;
    std::optional<int> grid_n;
    std::vector<double> u;
    bool strict = false;
    bool csv = false;
    std::string family = "gaussian";
};

RunConfig load(const Flags &f) {
    RunConfig c = f.config.empty() ? RunConfig{} : load_config(f.config);
    if (f.out) { c.out = *f.out; }
    if (f.seed) {
        c.asymptotics.seed = *f.seed;
        c.verify.seed = *f.seed;
    }
    if (f.n) {
        if (*f.n <= 0) { throw ConfigError("--n must be positive"); }
        c.verify.n = *f.n;
    }
    if (f.grid_n) {
        if (*f.grid_n < 2) { throw ConfigError("--grid-n must be >= 2"); }
        c.solver.grid_n = *f.grid_n;
        c.verify.grid_m = *f.grid_n;
    }
    if (!f.u.empty()) { c.verify.u = f.u; }
    return c;
}

void write_json(const RunConfig &c, const std::string &name, const Json &j) {
    fs::create_directories(c.out);
    std::ofstream os(fs::path(c.out) / name, std::ios::binary);
    os << j.dump(2) << '\n';
}

void print_solution(const OptimalSolution &s) {
    std::cout << std::setprecision(12);
    std::cout << "interval  [" << s.interval.a << ", " << s.interval.b << "]\n";
    std::cout << "atoms    ";
    for (double t : s.measure.atoms) { std::cout << ' ' << t; }
    std::cout << "\nweights  ";
    for (double w : s.measure.weights) { std::cout << ' ' << w; }
    std::cout << "\nV*        " << s.v_star << "\nkkt_min   " << s.kkt_min << '\n';
    if (!s.message.empty()) { std::cout << s.message << '\n'; }
}

int cmd_solve(const Flags &f) {
    const RunConfig c = load(f);
    const OptimalSolution s = solve(c.kernel(), c.interval(), c.solver);
    write_json(c, "solution.json", solution_to_json(s));
    print_solution(s);
    if (s.degenerate_flat) { return kExitFlat; }
    return s.converged ? kExitOk : kExitError;
}

int cmd_asym(const Flags &f) {
    const RunConfig c = load(f);
    const Kernel k = c.kernel();
    const OptimalSolution s = solve(k, c.interval(), c.solver);
    if (s.degenerate_flat) {
        std::cout << s.message << '\n';
        return kExitFlat;
    }
    if (!s.converged) { throw ConvergenceError("solver did not converge: " + s.message); }
    const AsymptoticReport r = analyze(k, s, c.asymptotics);
    write_json(c, "report.json", report_to_json(r));
    std::cout << std::setprecision(12);
    std::cout << "k         " << r.k << "\nV*        " << r.v_star << "\nE(W)      " << r.expected_w.mean;
    if (!r.expected_w.closed_form) { std::cout << " +- " << r.expected_w.ci_half_width; }
    std::cout << "\nE        ";
    for (double t : r.essential.locations()) { std::cout << ' ' << t; }
    std::cout << '\n';
    if (!r.nondegenerate) {
        std::cout << "degenerate: P = o(u^-" << r.k << " exp(-u^2/2V*))\n";
        return kExitOk;
    }
    std::cout << "constant  " << r.leading_constant() << "\n\n     u  tail\n";
    for (double u : c.verify.u) {
        if (u <= 0.0) { continue; }
        std::cout << std::setw(6) << u << "  " << r.tail(u).value << '\n';
    }
    return kExitOk;
}

int cmd_verify(const Flags &f) {
    const RunConfig c = load(f);
    const Kernel k = c.kernel();
    const Interval iv = c.interval();
    const OptimalSolution s = solve(k, iv, c.solver);
    if (s.degenerate_flat) {
        std::cout << s.message << '\n';
        return kExitFlat;
    }
    if (!s.converged) { throw ConvergenceError("solver did not converge: " + s.message); }
    const AsymptoticReport r = analyze(k, s, c.asymptotics);
    if (!r.nondegenerate) { throw DegenerateConfiguration("verification needs a nondegenerate configuration"); }
    const PathGrid grid = PathGrid::build(k, iv, c.verify.grid_m, r.essential.locations());
    MCOptions mo;
    mo.n = c.verify.n;
    mo.seed = c.verify.seed;
    Json all = Json::array();
    bool warned = false;
    std::cout << std::setprecision(6);
    std::cout << "     u         p_hat            ci_lo            ci_hi          formula     ratio         ess\n";
    for (double u : c.verify.u) {
        const MCReport m = is_estimate(k, grid, r, u, mo);
        all.push_back(mc_report_to_json(m));
        warned = warned || m.warning.low_ess;
        std::cout << std::setw(6) << u << std::setw(14) << m.p_hat << std::setw(17) << m.ci_lo << std::setw(17)
                  << m.ci_hi << std::setw(17) << m.formula_value << std::setw(10) << m.ratio << std::setw(12) << m.ess
                  << (m.warning.low_ess ? "  low-ess" : "") << '\n';
        if (f.csv) {
            const ConditionalEnsemble ens = conditional_samples(k, grid, r, u, mo);
            fs::create_directories(c.out);
            const std::string tag = format_double(u);
            std::ofstream a(fs::path(c.out) / ("samples_u" + tag + ".csv"), std::ios::binary);
            write_csv(a, {"overshoot", "argmin", "weight"}, ensemble_table(ens, grid));
            std::ofstream b(fs::path(c.out) / ("fluctuation_u" + tag + ".csv"), std::ios::binary);
            write_csv(b, {"t", "mean", "lo", "hi"}, fluctuation_table(ens, grid));
        }
    }
    write_json(c, "verify.json", all);
    if (warned) {
        std::cerr << "warning: effective sample size below 100\n";
        if (f.strict) { return kExitWarning; }
    }
    return kExitOk;
}

int cmd_mu_plot(const Flags &f) {
    const RunConfig c = load(f);
    const Kernel k = c.kernel();
    const Interval iv = c.interval();
    const OptimalSolution s = solve(k, iv, c.solver);
    if (s.degenerate_flat) {
        std::cout << s.message << '\n';
        return kExitFlat;
    }
    const MuFunction mu(k, s);
    fs::create_directories(c.out);
    const fs::path path = fs::path(c.out) / "mu.csv";
    std::ofstream os(path, std::ios::binary);
    write_csv(os, {"t", "mu"}, mu_table(mu, iv));
    std::cout << path.string() << '\n';
    return kExitOk;
}

int cmd_breakpoints(const Flags &f) {
    Kernel k = Kernel::gaussian();
    if (f.family == "sinc") {
        k = Kernel::sinc();
    } else if (f.family != "gaussian") {
        throw ConfigError("--family must be gaussian or sinc");
    }
    std::cout << std::setprecision(15) << "c1 " << breakpoint_solve(k, Breakpoint::C1) << "\nc2 "
              << breakpoint_solve(k, Breakpoint::C2) << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Tail asymptotics of the minimum of a smooth Gaussian process"};
    app.require_subcommand(1);
    Flags f;
    app.add_option("--config", f.config, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("--out", f.out, "output directory");
    app.add_option("--seed", f.seed, "master seed for all sampling");
    app.add_option("--n", f.n, "Monte Carlo sample count for verify");
    app.add_option("--grid-n", f.grid_n, "solver grid size and verification path grid size");
    app.add_option("--u", f.u, "levels u, comma separated")->delimiter(',');
    app.add_flag("--strict", f.strict, "nonzero exit on low effective sample size");

    auto *solve_cmd = app.add_subcommand("solve", "optimal measure");
    auto *asym_cmd = app.add_subcommand("asym", "tail asymptotics");
    auto *verify_cmd = app.add_subcommand("verify", "importance-sampling check of the tail");
    verify_cmd->add_flag("--csv", f.csv, "also write per-sample and fluctuation CSV files");
    auto *mu_cmd = app.add_subcommand("mu-plot", "CSV of mu on 2001 points");
    auto *bp_cmd = app.add_subcommand("breakpoints", "support-size transition lengths");
    bp_cmd->add_option("--family", f.family, "gaussian or sinc");
    for (auto *sub : {solve_cmd, asym_cmd, verify_cmd, mu_cmd, bp_cmd}) { sub->fallthrough(); }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        return app.exit(e) == 0 ? kExitOk : kExitError;
    }
    try {
        if (solve_cmd->parsed()) { return cmd_solve(f); }
        if (asym_cmd->parsed()) { return cmd_asym(f); }
        if (verify_cmd->parsed()) { return cmd_verify(f); }
        if (mu_cmd->parsed()) { return cmd_mu_plot(f); }
        return cmd_breakpoints(f);
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
}
