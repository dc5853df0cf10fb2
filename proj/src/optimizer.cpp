#include "qdsim/optimizer.hpp"

#include "util.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace qdsim {

bool is_design_parameter(std::string_view n) {
    return n == "channel_voltage" || n == "plunger_swing" || n == "channel_width";
}

std::string_view design_parameter_unit(std::string_view n) {
    if (n == "channel_width") return "nm";
    if (n == "channel_voltage" || n == "plunger_swing") return "mV";
    throw InputError("unknown design parameter '" + std::string(n) + "'");
}

DeviceLayout apply_design(const DeviceLayout& base, const std::vector<DesignParameter>& params,
                          const std::vector<double>& values) {
    if (params.size() != values.size()) throw InputError("design value count does not match parameters");
    DeviceLayout L = base;
    for (std::size_t p = 0; p < params.size(); ++p) {
        const std::string& n = params[p].name;
        const double x = values[p];
        if (n == "channel_voltage") {
            for (auto& g : L.gates)
                if (g.role == GateRole::channel) g.voltage_off = g.voltage_on = x;
        } else if (n == "plunger_swing") {
            if (x < 0.0) throw InputError("plunger swing must be non-negative");
            for (auto& g : L.gates) {
                if (g.role != GateRole::plunger) continue;
                double d = g.voltage_off - g.voltage_on;
                if (d != 0.0) g.voltage_off = g.voltage_on + std::copysign(x, d);
            }
        } else if (n == "channel_width") {
            if (!(x > 0.0)) throw InputError("channel width must be positive");
            for (auto& g : L.gates) {
                if (g.role != GateRole::channel) continue;
                Rect& r = g.footprint;
                if (r.width() <= r.height()) {
                    double c = 0.5 * (r.x_min + r.x_max);
                    r.x_min = c - 0.5 * x;
                    r.x_max = c + 0.5 * x;
                } else {
                    double c = 0.5 * (r.y_min + r.y_max);
                    r.y_min = c - 0.5 * x;
                    r.y_max = c + 0.5 * x;
                }
            }
        } else {
            throw InputError("unknown design parameter '" + n + "'");
        }
    }
    return L;
}

void DesignProblem::validate() const {
    if (parameters.empty()) throw InputError("design problem has no free parameters");
    for (const auto& p : parameters) {
        if (!is_design_parameter(p.name)) throw InputError("unknown design parameter '" + p.name + "'");
        if (!std::isfinite(p.lower) || !std::isfinite(p.upper) || !(p.lower < p.upper))
            throw InputError("bounds of '" + p.name + "' must be finite with lower < upper");
    }
    if (!(j_min > 0.0)) throw InputError("J_min must be positive");
    if (budget < static_cast<int>(parameters.size()) + 2)
        throw InputError("budget must be at least dimension + 2");
    if (!(delta > 0.0 && delta < 0.5)) throw InputError("delta must lie in (0, 0.5)");
}

DesignEvaluation evaluate_design(const std::vector<double>& values, const DesignProblem& problem) {
    for (std::size_t p = 0; p < values.size(); ++p)
        if (values[p] < problem.parameters[p].lower || values[p] > problem.parameters[p].upper)
            throw InputError("design value for '" + problem.parameters[p].name + "' outside its bounds");
    const DeviceLayout layout = apply_design(problem.base, problem.parameters, values);
    const double vmax = 1.0 + kControlOvershoot;
    const std::vector<double> coarse_v = linear_v_grid(0.0, vmax, 11);
    ExchangeCurve coarse = sweep_exchange(layout, coarse_v, problem.solver, problem.threads);

    DesignEvaluation ev;
    try {
        (void)find_flattop(coarse);
    } catch (const NoFlattopError& e) {
        ev.note = e.what();
        return ev;
    }
    std::vector<double> extra = refinement_points(coarse, 7, vmax / 10.0 / 4.0);
    ExchangeCurve curve = coarse;
    if (!extra.empty()) curve = merge_curves(coarse, sweep_exchange(layout, extra, problem.solver, problem.threads));
    try {
        Flattop f = find_flattop(curve);
        ev.has_flattop = true;
        ev.j_star = f.j_star;
        ev.omega_effective = rms_coupling_error(curve, f.v_star, problem.delta) / problem.delta;
        ev.feasible = ev.j_star >= problem.j_min;
        if (!ev.feasible) ev.note = "J* below J_min";
    } catch (const DomainError& e) {
        ev = DesignEvaluation{};
        ev.note = e.what();
    }
    return ev;
}

namespace {

struct Vertex {
    std::vector<double> u;
    double f = 0.0;
};

double diameter(const std::vector<Vertex>& s) {
    double d = 0.0;
    for (std::size_t a = 0; a < s.size(); ++a)
        for (std::size_t b = a + 1; b < s.size(); ++b) {
            double q = 0.0;
            for (std::size_t k = 0; k < s[a].u.size(); ++k) q += (s[a].u[k] - s[b].u[k]) * (s[a].u[k] - s[b].u[k]);
            d = std::max(d, std::sqrt(q));
        }
    return d;
}

struct BudgetSpent {};

}  // namespace

DesignResult optimize_design(const DesignProblem& problem, const DesignEvaluator& evaluator) {
    problem.validate();
    const std::size_t dim = problem.parameters.size();
    DesignEvaluator eval = evaluator ? evaluator : [&problem](const std::vector<double>& x) {
        return evaluate_design(x, problem);
    };

    DesignResult res;
    std::map<std::vector<double>, double> memo;
    auto to_phys = [&](const std::vector<double>& u) {
        std::vector<double> x(dim);
        for (std::size_t k = 0; k < dim; ++k) {
            const auto& p = problem.parameters[k];
            x[k] = p.lower + u[k] * (p.upper - p.lower);
        }
        return x;
    };
    auto score = [&](std::vector<double>& u) {
        for (double& c : u) c = std::clamp(c, 0.0, 1.0);
        if (auto it = memo.find(u); it != memo.end()) return it->second;
        if (static_cast<int>(res.trace.size()) >= problem.budget) throw BudgetSpent{};
        std::vector<double> x = to_phys(u);
        DesignEvaluation e = eval(x);
        res.trace.push_back({x, e.omega_effective, e.j_star, e.feasible});
        double f;
        if (!e.has_flattop)
            f = 1e6;
        else
            f = e.omega_effective + 1e3 * std::max(0.0, (problem.j_min - e.j_star) / problem.j_min);
        memo.emplace(u, f);
        return f;
    };

    res.termination = "budget";
    try {
        std::vector<Vertex> s(dim + 1);
        for (std::size_t i = 0; i <= dim; ++i) {
            s[i].u.assign(dim, 0.5);
            if (i > 0) s[i].u[i - 1] += 0.25;
            s[i].f = score(s[i].u);
        }
        auto order = [&] {
            std::stable_sort(s.begin(), s.end(), [](const Vertex& a, const Vertex& b) { return a.f < b.f; });
        };
        // clamping can park vertices on the box faces; cap the loop in case
        // every candidate is a cache hit
        for (long iter = 0; iter < 1000L * problem.budget; ++iter) {
            order();
            if (diameter(s) < 1e-3) {
                res.termination = "converged";
                break;
            }
            std::vector<double> c(dim, 0.0);
            for (std::size_t i = 0; i < dim; ++i)
                for (std::size_t k = 0; k < dim; ++k) c[k] += s[i].u[k] / dim;
            auto along = [&](double t) {
                std::vector<double> p(dim);
                for (std::size_t k = 0; k < dim; ++k) p[k] = c[k] + t * (s[dim].u[k] - c[k]);
                return p;
            };
            std::vector<double> r = along(-1.0);
            double fr = score(r);
            if (fr < s[0].f) {
                std::vector<double> e = along(-2.0);
                double fe = score(e);
                if (fe < fr) s[dim] = {e, fe};
                else s[dim] = {r, fr};
                continue;
            }
            if (fr < s[dim - 1].f) {
                s[dim] = {r, fr};
                continue;
            }
            bool outside = fr < s[dim].f;
            std::vector<double> k = along(outside ? -0.5 : 0.5);
            double fk = score(k);
            if (fk < (outside ? fr : s[dim].f)) {
                s[dim] = {k, fk};
                continue;
            }
            for (std::size_t i = 1; i <= dim; ++i) {
                for (std::size_t q = 0; q < dim; ++q) s[i].u[q] = s[0].u[q] + 0.5 * (s[i].u[q] - s[0].u[q]);
                s[i].f = score(s[i].u);
            }
        }
    } catch (const BudgetSpent&) {
    }

    const TraceEntry* best = nullptr;
    for (const auto& t : res.trace)
        if (t.feasible && (!best || t.omega_effective < best->omega_effective)) best = &t;
    if (!best)
        throw InfeasibleDesignError("no feasible design among " + std::to_string(res.trace.size()) +
                                        " evaluations (J_min = " + util::fmt17(problem.j_min) + " ueV)",
                                    res.trace);
    res.best_parameters = best->parameters;
    res.best_omega_effective = best->omega_effective;
    res.best_j_star = best->j_star;
    return res;
}

}  // namespace qdsim
