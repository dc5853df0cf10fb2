#include "qdsim/run.hpp"

#include "qdsim/errors.hpp"
#include "qdsim/optimizer.hpp"
#include "qdsim/validation.hpp"
#include "util.hpp"

#include "json.hpp"

#include <chrono>
#include <cmath>

namespace qdsim {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json curve_json(const ExchangeCurve& c) {
    json j;
    j["fingerprint"] = c.fingerprint;
    j["v"] = c.v;
    j["J_ueV"] = c.j;
    j["warnings"] = c.warnings;
    return j;
}

json flattop_json(const ExchangeCurve& c) {
    try {
        Flattop f = find_flattop(c);
        return {{"v_star", f.v_star}, {"J_star_ueV", f.j_star}, {"curvature", f.curvature}};
    } catch (const NoFlattopError& e) {
        return {{"absent", e.what()}};
    }
}

json fit_json(const ExchangeCurve& c) {
    try {
        ExponentialFit f = fit_exponential(c);
        json j;
        j["rate"] = f.rate;
        j["prefactor_ueV"] = f.prefactor;
        j["decay_length"] = f.decay_length ? json(*f.decay_length) : json(nullptr);
        j["r_squared"] = f.r_squared ? json(*f.r_squared) : json(nullptr);
        return j;
    } catch (const FitError& e) {
        return {{"absent", e.what()}};
    }
}

json report_json(const SusceptibilityReport& r, const std::vector<double>& thresholds) {
    json j;
    j["v0"] = r.v0;
    j["J0_ueV"] = r.j0;
    j["omega_pointwise"] = r.omega_pointwise;
    j["delta"] = r.delta;
    j["rms_relative_error"] = r.rms_relative_error;
    j["omega_effective"] = r.omega_effective;
    j["fault_tolerant_1e-4"] = r.fault_tolerant_1e4;
    j["fault_tolerant_1e-3"] = r.fault_tolerant_1e3;
    j["swap_time_ns"] = r.swap_time_ns;
    json v = json::array();
    for (double t : thresholds) {
        auto m = fault_tolerance_margin(r.rms_relative_error, t);
        v.push_back({{"threshold", t}, {"pass", m.pass}, {"margin", m.margin}});
    }
    j["verdicts"] = v;
    return j;
}

std::string trace_csv(const std::vector<DesignParameter>& params, const std::vector<TraceEntry>& trace) {
    std::string o = "eval";
    for (const auto& p : params) o += ",param_" + p.name;
    o += ",omega_eff,J_star_ueV,feasible\n";
    for (std::size_t i = 0; i < trace.size(); ++i) {
        o += std::to_string(i);
        for (double x : trace[i].parameters) o += "," + util::fmt17(x);
        o += "," + util::fmt17(trace[i].omega_effective) + "," + util::fmt17(trace[i].j_star) + "," +
             (trace[i].feasible ? "1" : "0") + "\n";
    }
    return o;
}

json trace_json(const std::vector<TraceEntry>& trace) {
    json a = json::array();
    for (const auto& t : trace)
        a.push_back({{"parameters", t.parameters}, {"omega_effective", t.omega_effective},
                     {"J_star_ueV", t.j_star}, {"feasible", t.feasible}});
    return a;
}

constexpr const char* kPlotReadme =
    "Plot data\n"
    "\n"
    "curve.csv  columns v, J_ueV\n"
    "  v      normalized control voltage; 0 is the off configuration, 1 the on\n"
    "         configuration. Plunger gate k sits at off_k + v (on_k - off_k).\n"
    "  J_ueV  singlet-triplet splitting E_T - E_S in micro-electronvolts.\n"
    "\n"
    "omega.csv  columns v, omega\n"
    "  omega  |v/J dJ/dv|, the dimensionless voltage susceptibility, from a local\n"
    "         quadratic fit of ln J through the five nearest samples (of J itself\n"
    "         when one of them is not positive). Only interior samples with\n"
    "         positive J appear.\n"
    "\n"
    "All numbers carry 17 significant digits. A log axis for J shows the\n"
    "exponential (straight line) or flat-topped (interior maximum) character.\n";

struct Sink {
    fs::path dir;
    std::vector<fs::path> files;
    void put(const std::string& name, const std::string& content) {
        fs::path p = dir / name;
        util::write_file_atomic(p, content);
        files.push_back(p);
    }
};

ExchangeCurve refined_curve(const RunSpec& spec, int threads) {
    const auto& a = spec.analysis;
    ExchangeCurve c = sweep_exchange(spec.layout, linear_v_grid(a.v_min, a.v_max, a.v_points), spec.solver, threads);
    try {
        (void)find_flattop(c);
    } catch (const NoFlattopError&) {
        return c;
    }
    double step = (a.v_max - a.v_min) / (a.v_points - 1) / 4.0;
    std::vector<double> extra = refinement_points(c, 7, step);
    if (extra.empty()) return c;
    return merge_curves(c, sweep_exchange(spec.layout, extra, spec.solver, threads));
}

}  // namespace

std::string curve_csv(const ExchangeCurve& c) {
    std::string o = "v,J_ueV\n";
    for (std::size_t i = 0; i < c.size(); ++i) o += util::fmt17(c.v[i]) + "," + util::fmt17(c.j[i]) + "\n";
    return o;
}

std::string omega_csv(const ExchangeCurve& c) {
    std::string o = "v,omega\n";
    if (c.size() < 5) return o;
    for (std::size_t i = 1; i + 1 < c.size(); ++i) {
        if (!(c.j[i] > 0.0)) continue;
        try {
            o += util::fmt17(c.v[i]) + "," + util::fmt17(susceptibility(c, c.v[i])) + "\n";
        } catch (const DomainError&) {
        }
    }
    return o;
}

std::vector<fs::path> emit_plot_data(const ExchangeCurve& curve, const fs::path& dir) {
    if (curve.size() == 0) throw InputError("no curve to plot: the report holds no sweep points");
    curve.validate(1);
    fs::create_directories(dir);
    Sink s{dir, {}};
    s.put("curve.csv", curve_csv(curve));
    s.put("omega.csv", omega_csv(curve));
    s.put("README", kPlotReadme);
    return s.files;
}

RunReport run(const RunSpec& spec) {
    spec.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const int threads = util::resolve_threads(spec.threads);
    const fs::path dir = spec.output;
    fs::create_directories(dir);
    Sink sink{dir, {}};

    RunReport rep;
    rep.command = spec.command;
    rep.spec_fingerprint = spec_fingerprint(spec);
    json payload;

    switch (spec.command) {
        case Command::sweep: {
            const auto& a = spec.analysis;
            ExchangeCurve c = sweep_exchange(spec.layout, linear_v_grid(a.v_min, a.v_max, a.v_points), spec.solver, threads);
            payload["curve"] = curve_json(c);
            payload["exponential_fit"] = fit_json(c);
            payload["flattop"] = flattop_json(c);
            for (auto& f : emit_plot_data(c, dir)) sink.files.push_back(f);
            break;
        }
        case Command::analyze: {
            ExchangeCurve c = refined_curve(spec, threads);
            double v0;
            std::string how;
            if (spec.analysis.operating_point) {
                v0 = *spec.analysis.operating_point;
                how = "configured";
            } else {
                try {
                    v0 = find_flattop(c).v_star;
                    how = "flat top";
                } catch (const NoFlattopError&) {
                    // monotone response: largest interior coupling
                    std::size_t best = 1;
                    for (std::size_t i = 1; i + 1 < c.size(); ++i)
                        if (c.j[i] > c.j[best]) best = i;
                    v0 = c.v[best];
                    how = "largest interior J (no flat top)";
                }
            }
            SusceptibilityReport r = analyze_point(c, v0, spec.analysis.delta);
            payload["operating_point_source"] = how;
            payload["susceptibility"] = report_json(r, spec.analysis.thresholds);
            payload["flattop"] = flattop_json(c);
            payload["exponential_fit"] = fit_json(c);
            payload["curve"] = curve_json(c);
            {
                auto [nx, ny] = grid_shape(spec.layout.domain, spec.solver.grid_spacing);
                PotentialGrid g = assemble_potential(spec.layout, ControlPoint(v0), nx, ny);
                std::string csv = "n,J_ueV,singlet_meV,triplet_meV\n";
                json arr = json::array();
                for (const auto& row : basis_convergence(g, spec.layout.material, spec.solver)) {
                    csv += std::to_string(row.n) + "," + util::fmt17(row.j_uev) + "," + util::fmt17(row.singlet) +
                           "," + util::fmt17(row.triplet) + "\n";
                    arr.push_back({{"n", row.n}, {"J_ueV", row.j_uev}, {"singlet_meV", row.singlet},
                                   {"triplet_meV", row.triplet}});
                }
                sink.put("basis_convergence.csv", csv);
                payload["basis_convergence"] = arr;
            }
            for (auto& f : emit_plot_data(c, dir)) sink.files.push_back(f);
            break;
        }
        case Command::optimize: {
            DesignProblem p{spec.layout, spec.optimize.parameters, spec.optimize.j_min, spec.optimize.budget,
                            spec.analysis.delta, spec.solver, threads};
            try {
                DesignResult r = optimize_design(p);
                sink.put("trace.csv", trace_csv(p.parameters, r.trace));
                json best;
                for (std::size_t k = 0; k < p.parameters.size(); ++k)
                    best[p.parameters[k].name] = r.best_parameters[k];
                payload["best_parameters"] = best;
                payload["best_omega_effective"] = r.best_omega_effective;
                payload["best_J_star_ueV"] = r.best_j_star;
                payload["initial_omega_effective"] = num(r.trace.front().feasible ? r.trace.front().omega_effective : NAN);
                payload["termination"] = r.termination;
                payload["evaluations"] = r.trace.size();
                payload["trace"] = trace_json(r.trace);
            } catch (const InfeasibleDesignError& e) {
                sink.put("trace.csv", trace_csv(p.parameters, e.trace()));
                throw;
            }
            break;
        }
        case Command::validate: {
            auto rows = validation::run_suite();
            std::string csv = "check,value,reference,tolerance,pass,detail\n";
            json arr = json::array();
            bool all = true;
            for (const auto& r : rows) {
                std::string detail = r.detail;
                for (char& ch : detail)
                    if (ch == ',' || ch == '\n') ch = ';';
                csv += r.name + "," + util::fmt17(r.value) + "," + util::fmt17(r.reference) + "," +
                       util::fmt17(r.tolerance) + "," + (r.pass ? "pass" : "FAIL") + "," + detail + "\n";
                arr.push_back({{"check", r.name}, {"value", num(r.value)}, {"reference", num(r.reference)},
                               {"tolerance", r.tolerance}, {"pass", r.pass}, {"detail", r.detail}});
                all = all && r.pass;
            }
            sink.put("validation.csv", csv);
            payload["checks"] = arr;
            payload["all_pass"] = all;
            rep.exit_status = all ? 0 : 1;
            break;
        }
        case Command::export_potential: {
            auto [nx, ny] = grid_shape(spec.layout.domain, spec.solver.grid_spacing);
            PotentialGrid g = assemble_potential(spec.layout, ControlPoint(spec.export_settings.v), nx, ny);
            sink.put("potential.txt", format_potential_text(g));
            payload["v"] = spec.export_settings.v;
            payload["nx"] = nx;
            payload["ny"] = ny;
            payload["spacing_nm"] = g.spacing;
            payload["min_meV"] = g.values.minCoeff();
            payload["max_meV"] = g.values.maxCoeff();
            if (spec.export_settings.orbitals > 0) {
                DiscretizedHamiltonian h = build_hamiltonian(g, spec.layout.material);
                EigenOptions eo;
                eo.tol = spec.solver.eig_tol;
                OrbitalSet o = lowest_eigenpairs(h, spec.export_settings.orbitals, eo);
                json e = json::array();
                for (int i = 0; i < o.count(); ++i) {
                    sink.put("orbital_" + std::to_string(i) + ".txt", format_orbital_text(o, i));
                    e.push_back(o.energies[i]);
                }
                payload["orbital_energies_meV"] = e;
                payload["warnings"] = h.warnings;
            }
            break;
        }
    }

    rep.payload_json = payload.dump(2);
    rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json doc;
    doc["tool"] = kToolName;
    doc["version"] = kToolVersion;
    doc["command"] = std::string(to_string(spec.command));
    doc["spec_fingerprint"] = rep.spec_fingerprint;
    doc["spec"] = serialize(spec);
    doc["wall_time_s"] = rep.wall_time_s;
    doc["payload_sha256"] = util::sha256_hex(rep.payload_json);
    doc["payload"] = payload;
    sink.put("report.json", doc.dump(2) + "\n");
    rep.files = sink.files;
    return rep;
}

int exit_code_for(const std::exception_ptr& e) {
    try {
        std::rethrow_exception(e);
    } catch (const ParseError&) {
        return 2;
    } catch (const ConfigError&) {
        return 2;
    } catch (const ConvergenceError&) {
        return 3;
    } catch (const PartialSweepError&) {
        return 3;
    } catch (const InfeasibleError&) {
        return 4;
    } catch (const ResourceError&) {
        return 5;
    } catch (...) {
        return 1;
    }
}

}  // namespace qdsim
