#pragma once

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "assumptions.hpp"
#include "config.hpp"
#include "continuum.hpp"
#include "discrete.hpp"
#include "eigen_fixedpoint.hpp"
#include "eigen_operator.hpp"
#include "flow.hpp"
#include "pde.hpp"

namespace plasmid::cli {

enum ExitCode : int { Ok = 0, SolverFailure = 1, ConfigFailure = 2 };

inline std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string short_fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", x);
    return buf;
}

// Comma-separated, LF line ends, a hash comment line, then the header.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::string& hash, const std::vector<std::string>& columns)
        : out_(path, std::ios::binary | std::ios::trunc), width_(columns.size()) {
        if (!out_) fail(ErrorKind::ConfigError, "cannot write " + path.string());
        out_ << "# config_hash=" << hash << '\n';
        write(columns);
    }
    void row(const std::vector<double>& v) {
        std::vector<std::string> s;
        s.reserve(v.size());
        for (double x : v) s.push_back(fmt(x));
        write(s);
    }
    void row(const std::vector<std::string>& v) { write(v); }

private:
    void write(const std::vector<std::string>& v) {
        if (v.size() != width_) fail(ErrorKind::GridMismatch, "csv row has the wrong width");
        for (std::size_t i = 0; i < v.size(); ++i) out_ << (i ? "," : "") << v[i];
        out_ << '\n';
    }
    std::ofstream out_;
    std::size_t width_;
};

struct Context {
    RunConfig cfg;
    std::string hash;
    std::filesystem::path out;
    std::ostream& log;
    std::ostream& err;

    std::filesystem::path file(const std::string& name) const { return out / name; }
};

// Sample points on (lo, z0), clustered toward both ends.
inline std::vector<double> sample_points(double lo, double z0, std::size_t n) {
    std::vector<double> z(n);
    const double pi = std::acos(-1.0);
    for (std::size_t k = 0; k < n; ++k)
        z[k] = lo + (z0 - lo) * 0.5 * (1.0 - std::cos(pi * (static_cast<double>(k) + 0.5) / static_cast<double>(n)));
    return z;
}

// Closed form for Phi = 1, constant beta and mu, b = b0 z (z0 - z):
// U proportional to z^-a (z0 - z)^(a - 1) with a = 2 beta / b0.
struct ExactUniform {
    double a = 0.0, z0 = 1.0, mass = 1.0;

    double raw(double z) const { return z > 0.0 && z < z0 ? std::pow(z, -a) * std::pow(z0 - z, a - 1.0) : 0.0; }
    double scaled(double z) const { return raw(z) / mass; }
};

inline std::optional<ExactUniform> exact_uniform(const ModelParameters& p, double lower) {
    if (!p.kernel().phi().is_uniform() || !p.beta().is_constant() || !p.mu().is_constant() || !p.b().is_logistic())
        return std::nullopt;
    ExactUniform e;
    e.z0 = p.z0();
    e.a = 2.0 * p.beta().constant_value() / p.b().logistic_data().b0;
    // s = (z0 - z)^a removes the endpoint factor
    const double a = e.a, z0 = e.z0;
    auto f = [a, z0](double s) { return std::pow(z0 - std::pow(s, 1.0 / a), -a) / a; };
    e.mass = integrate_adaptive(f, 0.0, std::pow(z0 - lower, a), 1e-12, 30);
    return e;
}

inline void write_phi_panel(const Context& c, const std::string& name) {
    std::vector<std::string> cols{"xi"};
    for (const auto& k : c.cfg.kernels) cols.push_back("phi_" + k.name);
    CsvWriter w(c.file(name), c.hash, cols);
    for (int i = 0; i <= 200; ++i) {
        const double xi = i / 200.0;
        std::vector<double> r{xi};
        for (const auto& k : c.cfg.kernels) r.push_back(k.phi(xi));
        w.row(r);
    }
}

// ---------------------------------------------------------------- validate

inline int cmd_validate(const Context& c) {
    bool hard = false, warn = false;
    CsvWriter w(c.file("validate.csv"), c.hash, {"kernel", "assumption", "check", "passed", "hard", "measured", "detail"});
    for (const auto& k : c.cfg.kernels) {
        const ModelParameters p = c.cfg.params_for(k);
        const ValidationReport rep = validate(p);
        for (const auto& ch : rep.checks) {
            c.log << k.name << "  " << ch.assumption << "  " << (ch.passed ? "PASS" : (ch.hard ? "FAIL" : "NOTE")) << "  "
                  << ch.name << "  measured=" << fmt(ch.measured) << (ch.detail.empty() ? "" : "  (" + ch.detail + ")") << '\n';
            w.row(std::vector<std::string>{k.name, ch.assumption, ch.name, ch.passed ? "1" : "0", ch.hard ? "1" : "0",
                                           fmt(ch.measured), ch.detail});
        }
        hard = hard || rep.hard_failure();
        const FlowMap flow(p.b(), p.z0());
        const A5Report a5 = check_a5(p, flow);
        c.log << k.name << "  A5  " << to_string(a5.verdict) << "  flow_form=" << fmt(a5.value_flow_form)
              << "  cov_form=" << fmt(a5.value_cov_form) << "  " << a5.note << '\n';
        w.row(std::vector<std::string>{k.name, "A5", "double integral finite", a5.verdict == A5Verdict::Finite ? "1" : "0", "0",
                                       fmt(a5.value_flow_form), to_string(a5.verdict)});
        if (a5.verdict == A5Verdict::LikelyDivergent) {
            warn = true;
            c.err << "warning: " << k.name << ": A5 likely divergent, results may not be meaningful\n";
        }
    }
    c.log << (hard ? "validate: hard failure\n" : warn ? "validate: ok with warnings\n" : "validate: ok\n");
    return hard ? SolverFailure : Ok;
}

// ---------------------------------------------------------------- eigen

inline void write_curves(const Context& c, const std::string& name, const std::vector<std::pair<std::string, Profile>>& curves,
                         const std::optional<ExactUniform>& exact) {
    const double lo = c.cfg.output.normalization_lower;
    const auto z = sample_points(lo, c.cfg.params.z0(), c.cfg.output.samples);
    std::vector<std::string> cols{"z"};
    for (const auto& cu : curves) cols.push_back("U_" + cu.first);
    if (exact) cols.push_back("exact_scaled");
    CsvWriter w(c.file(name), c.hash, cols);
    for (double x : z) {
        std::vector<double> r{x};
        for (const auto& cu : curves) r.push_back(cu.second(x));
        if (exact) r.push_back(exact->scaled(x));
        w.row(r);
    }
}

inline int cmd_eigen_fixedpoint(const Context& c) {
    const RunConfig& cfg = c.cfg;
    std::vector<std::pair<std::string, Profile>> curves;
    std::optional<ExactUniform> exact_any;
    CsvWriter sum(c.file("eigen_fixedpoint_summary.csv"), c.hash,
                  {"kernel", "lambda", "alpha", "steps", "reached_m", "stalled", "unconverged_intervals", "bottom",
                   "residual_v", "l1_vs_exact"});
    for (const auto& k : cfg.kernels) {
        const ModelParameters p = cfg.params_for(k);
        const FixedPointResult r = solve_fixedpoint(p, cfg.fixedpoint);
        const auto exact = exact_uniform(p, cfg.fixedpoint.normalization_lower);
        const auto z = sample_points(cfg.output.normalization_lower, p.z0(), cfg.output.samples);
        std::vector<std::string> cols{"z", "U", "g", "v"};
        if (exact) cols.insert(cols.end(), {"exact_raw", "exact_scaled"});
        CsvWriter w(c.file("eigen_fixedpoint_" + k.name + ".csv"), c.hash, cols);
        for (double x : z) {
            const bool inside = x >= r.solution.bottom() && x < p.z0();
            std::vector<double> row{x, r.solution.U(x), inside ? r.solution.g(x) : 0.0, inside ? r.solution.v(x) : 0.0};
            if (exact) row.insert(row.end(), {exact->raw(x), exact->scaled(x)});
            w.row(row);
        }
        double l1 = std::nan("");
        if (exact) {
            const ExactUniform e = *exact;
            l1 = relative_l1(r.profile(), Profile::function([e](double x) { return e.scaled(x); }), cfg.compare.lo,
                             cfg.compare.hi);
            exact_any = exact;
        }
        c.log << k.name << ": lambda=" << fmt(r.lambda) << " alpha=" << fmt(r.alpha) << " steps=" << r.steps
              << (r.reached_m ? "" : " (did not reach m)") << (exact ? " l1_vs_exact=" + fmt(l1) : "") << '\n';
        if (r.stalled) c.err << "warning: " << k.name << ": step size stalled before m\n";
        if (r.unconverged_intervals) c.err << "warning: " << k.name << ": " << r.unconverged_intervals << " intervals hit the iteration cap\n";
        sum.row(std::vector<std::string>{k.name, fmt(r.lambda), fmt(r.alpha), std::to_string(r.steps), r.reached_m ? "1" : "0",
                                         r.stalled ? "1" : "0", std::to_string(r.unconverged_intervals),
                                         fmt(r.solution.bottom()), fmt(r.residual.max_relative_v), fmt(l1)});
        curves.emplace_back(k.name, r.profile());
    }
    write_curves(c, "eigen_fixedpoint_curves.csv", curves, exact_any);
    write_phi_panel(c, "phi_panel.csv");
    return Ok;
}

inline EigenPair run_operator(const RunConfig& cfg, const ModelParameters& p) { return solve_operator(p, cfg.op); }

inline int cmd_eigen_operator(const Context& c) {
    const RunConfig& cfg = c.cfg;
    std::vector<std::pair<std::string, Profile>> curves;
    std::optional<ExactUniform> exact_any;
    CsvWriter sum(c.file("eigen_operator_summary.csv"), c.hash,
                  {"kernel", "lambda", "closure_residual", "in_eigenvalue_bounds", "bound_lower", "bound_upper", "l1_vs_exact"});
    for (const auto& k : cfg.kernels) {
        const ModelParameters p = cfg.params_for(k);
        const EigenPair e = run_operator(cfg, p);
        const auto exact = exact_uniform(p, cfg.op.normalization_lower);
        std::vector<std::string> cols{"z_lo", "z_hi", "z", "U"};
        if (exact) cols.insert(cols.end(), {"exact_raw", "exact_scaled"});
        CsvWriter w(c.file("eigen_operator_" + k.name + ".csv"), c.hash, cols);
        for (std::size_t i = 0; i < e.U.size(); ++i) {
            const double zm = 0.5 * (e.edges[i] + e.edges[i + 1]);
            std::vector<double> row{e.edges[i], e.edges[i + 1], zm, e.U[i]};
            if (exact) row.insert(row.end(), {exact->raw(zm), exact->scaled(zm)});
            w.row(row);
        }
        CsvWriter wp(c.file("eigen_operator_" + k.name + "_psi.csv"), c.hash, {"z", "Psi"});
        for (std::size_t i = 0; i < e.Psi.size() && i < e.edges.size(); ++i) wp.row(std::vector<double>{e.edges[i], e.Psi[i]});
        double l1 = std::nan("");
        if (exact) {
            const ExactUniform x = *exact;
            l1 = relative_l1(e.profile(), Profile::function([x](double z) { return x.scaled(z); }), cfg.compare.lo, cfg.compare.hi);
            exact_any = exact;
        }
        c.log << k.name << ": lambda=" << fmt(e.lambda) << " closure_residual=" << fmt(e.closure_residual)
              << (e.in_eigenvalue_bounds ? "" : " (outside eigenvalue bounds)") << (exact ? " l1_vs_exact=" + fmt(l1) : "") << '\n';
        if (!e.in_eigenvalue_bounds) c.err << "warning: " << k.name << ": lambda outside the eigenvalue bounds\n";
        sum.row(std::vector<std::string>{k.name, fmt(e.lambda), fmt(e.closure_residual), e.in_eigenvalue_bounds ? "1" : "0",
                                         fmt(p.lambda_lower()), fmt(p.lambda_upper()), fmt(l1)});
        curves.emplace_back(k.name, e.profile());
    }
    write_curves(c, "eigen_operator_curves.csv", curves, exact_any);
    write_phi_panel(c, "phi_panel.csv");
    return Ok;
}

// ---------------------------------------------------------------- simulate

inline std::function<double(double)> unit_mass_initial(const InitialData& d, double z0) {
    const double mass = integrate_adaptive([&](double x) { return d(x, z0); }, 0.0, z0, 1e-12, 30);
    if (!(mass > 0.0)) fail(ErrorKind::ConfigError, "initial data has no mass");
    return [d, z0, mass](double x) { return d(x, z0) / mass; };
}

struct PdeOutcome {
    PdeTrajectory traj;
    std::optional<LongtimeEstimate> estimate;
    std::string estimate_error;
};

inline PdeOutcome run_pde_model(const RunConfig& cfg, const ModelParameters& p) {
    const PdeSolver solver(p, graded_grid(p.z0(), cfg.pde.cells, p.m()));
    PdeOutcome o;
    o.traj = run_pde(solver, solver.project(unit_mass_initial(cfg.pde.initial, p.z0())), cfg.pde.t_end,
                     PdeRunOptions{0.0, cfg.pde.stride, true});
    try {
        o.estimate = longtime_eigen_estimate(o.traj, cfg.pde.window, cfg.output.normalization_lower, cfg.pde.variance_tol);
    } catch (const Error& e) {
        o.estimate_error = e.what();
    }
    return o;
}

inline int cmd_simulate_pde(const Context& c) {
    const RunConfig& cfg = c.cfg;
    CsvWriter sum(c.file("pde_summary.csv"), c.hash, {"kernel", "t_end", "steps", "lambda_estimate", "slope_variance"});
    for (const auto& k : cfg.kernels) {
        const ModelParameters p = cfg.params_for(k);
        const PdeOutcome o = run_pde_model(cfg, p);
        const PdeTrajectory& tr = o.traj;
        {
            CsvWriter w(c.file("pde_" + k.name + "_trajectory.csv"), c.hash, {"t", "log_mass", "v0"});
            for (std::size_t i = 0; i < tr.t.size(); ++i) w.row(std::vector<double>{tr.t[i], tr.log_mass[i], tr.v0[i]});
        }
        {
            const double scale = std::exp(tr.final_state.log_scale);
            std::vector<std::string> cols{"z_lo", "z_hi", "z", "u"};
            if (o.estimate) cols.push_back("U");
            CsvWriter w(c.file("pde_" + k.name + "_profile.csv"), c.hash, cols);
            for (std::size_t i = 0; i < tr.grid.cells(); ++i) {
                std::vector<double> row{tr.grid.edges[i], tr.grid.edges[i + 1], tr.grid.mid(i), tr.final_state.u[i] * scale};
                if (o.estimate) row.push_back(o.estimate->normalized_u[i]);
                w.row(row);
            }
        }
        if (cfg.pde.stride) {
            CsvWriter w(c.file("pde_" + k.name + "_snapshots.csv"), c.hash, {"t", "z_lo", "z_hi", "u"});
            for (std::size_t s = 0; s < tr.snapshots.size(); ++s)
                for (std::size_t i = 0; i < tr.grid.cells(); ++i)
                    w.row(std::vector<double>{tr.snapshot_t[s], tr.grid.edges[i], tr.grid.edges[i + 1], tr.snapshots[s][i]});
        }
        const std::size_t steps = tr.t.size() - 1;
        if (o.estimate) {
            c.log << k.name << ": lambda_estimate=" << fmt(o.estimate->lambda) << " steps=" << steps << '\n';
            sum.row(std::vector<std::string>{k.name, fmt(cfg.pde.t_end), std::to_string(steps), fmt(o.estimate->lambda),
                                             fmt(o.estimate->slope_variance)});
        } else {
            c.log << k.name << ": steps=" << steps << " lambda_estimate=n/a (" << o.estimate_error << ")\n";
            sum.row(std::vector<std::string>{k.name, fmt(cfg.pde.t_end), std::to_string(steps), "nan", "nan"});
        }
    }
    return Ok;
}

struct RefinementLevel {
    std::size_t n;
    double h, error, ratio;
    DiscreteState final_state;
};

// Discrete runs at h = cutoff / n against a fine PDE reference, same initial data.
inline std::vector<RefinementLevel> discrete_refinement(const RunConfig& cfg, const ModelParameters& model) {
    const double cutoff = cfg.discrete.cutoff;
    const ModelParameters p = model.with_kernel(SegregationKernel(model.kernel().phi(), cutoff, model.z0(), model.kernel().allow_oracle_kernel()));
    const auto u0 = unit_mass_initial(cfg.discrete.initial, p.z0());
    const PdeSolver solver(p, graded_grid(p.z0(), cfg.discrete.reference_cells, cutoff));
    const PdeState ref = run_pde(solver, solver.project(u0), cfg.discrete.t_end).final_state;
    const Grid fine = uniform_grid(p.z0(), 20000);
    std::vector<double> uf(fine.cells());
    for (std::size_t i = 0; i < uf.size(); ++i) uf[i] = u0(fine.mid(i));
    std::vector<RefinementLevel> out;
    for (double nd : cfg.discrete.n) {
        const auto n = static_cast<std::size_t>(nd);
        const double h = cutoff / nd;
        const DiscreteModel dm(p, h, n);
        DiscreteRun run = run_discrete(dm, dm.initial(project_to_bins(fine, uf, h, dm.N())), cfg.discrete.t_end);
        const double err = continuum_limit_error(run.final_state, ref, solver.grid());
        const double ratio = out.empty() ? std::nan("") : out.back().error / err;
        out.push_back({n, h, err, ratio, std::move(run.final_state)});
    }
    return out;
}

inline int cmd_simulate_discrete(const Context& c) {
    const RunConfig& cfg = c.cfg;
    CsvWriter sum(c.file("discrete_refinement.csv"), c.hash, {"kernel", "n", "h", "l1_error", "ratio"});
    for (const auto& k : cfg.kernels) {
        const auto levels = discrete_refinement(cfg, cfg.params_for(k));
        for (const auto& L : levels) {
            CsvWriter w(c.file("discrete_" + k.name + "_n" + std::to_string(L.n) + ".csv"), c.hash, {"i", "z", "count", "density"});
            for (std::size_t i = 0; i < L.final_state.c.size(); ++i)
                w.row(std::vector<double>{static_cast<double>(i), static_cast<double>(i) * L.h, L.final_state.c[i], L.final_state.c[i] / L.h});
            sum.row(std::vector<std::string>{k.name, std::to_string(L.n), fmt(L.h), fmt(L.error), fmt(L.ratio)});
            c.log << k.name << ": n=" << L.n << " h=" << fmt(L.h) << " error=" << fmt(L.error)
                  << (std::isnan(L.ratio) ? "" : " ratio=" + fmt(L.ratio)) << '\n';
        }
    }
    return Ok;
}

// ---------------------------------------------------------------- compare

struct ComparisonRow {
    std::string kernel, quantity, a, b;
    double value, tolerance;
    bool passed() const { return std::isfinite(value) && value <= tolerance; }
};

inline std::vector<ComparisonRow> compare_rows(const RunConfig& cfg, const RunConfig* other, std::ostream& log) {
    std::vector<ComparisonRow> rows;
    const double lo = cfg.compare.lo, hi = cfg.compare.hi;
    for (const auto& k : cfg.kernels) {
        const ModelParameters p = cfg.params_for(k);
        const EigenPair op = run_operator(cfg, p);
        const Profile opU = op.profile();
        log << k.name << ": operator lambda=" << fmt(op.lambda) << '\n';

        const PdeOutcome pde = run_pde_model(cfg, p);
        if (pde.estimate) {
            log << k.name << ": pde lambda=" << fmt(pde.estimate->lambda) << '\n';
            rows.push_back({k.name, "|dlambda|", "pde", "operator", std::abs(pde.estimate->lambda - op.lambda), cfg.compare.lambda_tol});
            rows.push_back({k.name, "relL1(U)", "pde", "operator", relative_l1(pde.estimate->profile, opU, lo, hi), cfg.compare.profile_tol});
        } else {
            log << k.name << ": pde estimate unavailable: " << pde.estimate_error << '\n';
            rows.push_back({k.name, "|dlambda|", "pde", "operator", std::nan(""), cfg.compare.lambda_tol});
        }

        try {
            const FixedPointResult fp = solve_fixedpoint(p, cfg.fixedpoint);
            log << k.name << ": fixedpoint lambda=" << fmt(fp.lambda) << '\n';
            rows.push_back({k.name, "|dlambda|", "fixedpoint", "operator", std::abs(fp.lambda - op.lambda), cfg.compare.lambda_tol});
            rows.push_back({k.name, "relL1(U)", "fixedpoint", "operator", relative_l1(fp.profile(), opU, lo, hi), cfg.compare.profile_tol});
            if (const auto ex = exact_uniform(p, cfg.fixedpoint.normalization_lower)) {
                const ExactUniform e = *ex;
                const Profile ref = Profile::function([e](double z) { return e.scaled(z); });
                rows.push_back({k.name, "relL1(U)", "fixedpoint", "exact", relative_l1(fp.profile(), ref, lo, hi), cfg.compare.profile_tol});
                rows.push_back({k.name, "relL1(U)", "operator", "exact", relative_l1(opU, ref, lo, hi), cfg.compare.profile_tol});
            }
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::RegimeError) throw;
            log << k.name << ": fixedpoint skipped: " << e.what() << '\n';
        }

        if (other) {
            for (const auto& k2 : other->kernels) {
                if (k2.name != k.name) continue;
                const EigenPair op2 = run_operator(*other, other->params_for(k2));
                rows.push_back({k.name, "|dlambda|", "operator", "operator(B)", std::abs(op.lambda - op2.lambda), cfg.compare.lambda_tol});
                rows.push_back({k.name, "relL1(U)", "operator", "operator(B)", relative_l1(opU, op2.profile(), lo, hi), cfg.compare.profile_tol});
            }
        }
    }
    if (cfg.compare.discrete) {
        const auto levels = discrete_refinement(cfg, cfg.params_for(cfg.kernels.front()));
        for (const auto& L : levels) {
            if (std::isnan(L.ratio)) continue;
            const double dev = L.ratio < cfg.compare.ratio_lo ? cfg.compare.ratio_lo - L.ratio
                             : L.ratio > cfg.compare.ratio_hi ? L.ratio - cfg.compare.ratio_hi : 0.0;
            rows.push_back({cfg.kernels.front().name, "ratio_outside[" + short_fmt(cfg.compare.ratio_lo) + "," + short_fmt(cfg.compare.ratio_hi) + "]",
                            "discrete n=" + std::to_string(L.n), "pde", dev, 0.0});
            log << "discrete: n=" << L.n << " error ratio=" << fmt(L.ratio) << '\n';
        }
    }
    return rows;
}

inline int cmd_compare(const Context& c, const RunConfig* other, bool strict) {
    const auto rows = compare_rows(c.cfg, other, c.log);
    CsvWriter w(c.file("compare.csv"), c.hash, {"kernel", "quantity", "a", "b", "value", "tolerance", "pass"});
    bool all = true;
    for (const auto& r : rows) {
        w.row(std::vector<std::string>{r.kernel, r.quantity, r.a, r.b, fmt(r.value), fmt(r.tolerance), r.passed() ? "PASS" : "FAIL"});
        c.log << (r.passed() ? "PASS  " : "FAIL  ") << r.kernel << "  " << r.quantity << "  " << r.a << " vs " << r.b
              << "  value=" << fmt(r.value) << "  tol=" << fmt(r.tolerance) << '\n';
        all = all && r.passed();
    }
    c.log << (all ? "compare: all within tolerance\n" : "compare: some comparisons exceed tolerance\n");
    return strict && !all ? SolverFailure : Ok;
}

// ---------------------------------------------------------------- dispatch

inline int run(int argc, const char* const* argv, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"plasmid-spectra: growth-fragmentation eigenproblems for plasmid content"};
    app.require_subcommand(1, 1);
    std::string config, out = "", preset, against;
    bool strict = false;
    const std::vector<std::string> names{"validate", "simulate-discrete", "simulate-pde", "eigen-fixedpoint", "eigen-operator", "compare"};
    std::map<std::string, CLI::App*> subs;
    for (const auto& n : names) {
        auto* s = app.add_subcommand(n);
        s->add_option("--config", config, "JSON run configuration");
        s->add_option("--out", out, "output directory (overrides output.dir)");
        s->add_option("--preset", preset, "built-in parameter set")->check(CLI::IsMember({"fig1"}));
        subs[n] = s;
    }
    subs["compare"]->add_option("--against", against, "second configuration to compare operator results with");
    subs["compare"]->add_flag("--strict", strict, "exit 1 when any comparison exceeds its tolerance");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, log, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, log, err);
        return ConfigFailure;
    }

    try {
        RunConfig cfg = load_config(config, preset);
        std::filesystem::path dir = out.empty() ? std::filesystem::path(cfg.output.dir) : std::filesystem::path(out);
        std::filesystem::create_directories(dir);
        const std::string hash = config_hash(cfg.canonical);
        Context c{std::move(cfg), hash, dir, log, err};
        const std::string cmd = app.get_subcommands().front()->get_name();
        if (cmd == "validate") return cmd_validate(c);
        if (cmd == "eigen-fixedpoint") return cmd_eigen_fixedpoint(c);
        if (cmd == "eigen-operator") return cmd_eigen_operator(c);
        if (cmd == "simulate-pde") return cmd_simulate_pde(c);
        if (cmd == "simulate-discrete") return cmd_simulate_discrete(c);
        std::optional<RunConfig> other;
        if (!against.empty()) other = load_config(against, "");
        return cmd_compare(c, other ? &*other : nullptr, strict);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return e.kind() == ErrorKind::ConfigError || e.kind() == ErrorKind::DomainError ? ConfigFailure : SolverFailure;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return ConfigFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return SolverFailure;
    }
}

}  // namespace plasmid::cli
