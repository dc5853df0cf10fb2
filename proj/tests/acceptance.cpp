// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qdsim/analysis.hpp"
#include "qdsim/device.hpp"
#include "qdsim/errors.hpp"
#include "qdsim/optimizer.hpp"
#include "qdsim/two_electron.hpp"
#include "qdsim/validation.hpp"

using namespace qdsim;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& what, double seconds) {
    std::printf("criterion %2d: %s  %s  (%.1f s)\n", id, pass ? "PASS" : "FAIL", what.c_str(), seconds);
    std::fflush(stdout);
    if (!pass) ++failures;
}

// runs body, which fills in the detail text and returns the verdict
void criterion(int id, const std::function<bool(std::string&)>& body) {
    auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
        ok = body(detail);
    } catch (const std::exception& e) {
        detail += " exception: " + std::string(e.what());
        ok = false;
    }
    double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(id, ok, detail, s);
}

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExchangeCurve refined(const DeviceLayout& layout, const SolverSettings& st, const ExchangeCurve& coarse) {
    std::vector<double> extra = refinement_points(coarse, 7, 0.11 / 4.0);
    if (extra.empty()) return coarse;
    return merge_curves(coarse, sweep_exchange(layout, extra, st));
}

// Two short vertical rails with a plunger pair above and below each dot, the
// same topology as the channel reference with every dimension and voltage drawn.
DeviceLayout random_channel_layout(std::mt19937_64& rng) {
    auto u = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
    DeviceLayout L;
    L.domain = {-160.0, 160.0, -160.0, 160.0};
    double c = u(38.0, 55.0), w = u(24.0, 36.0), half = u(45.0, 65.0), rail = u(22.0, 38.0);
    double gap = u(8.0, 15.0), pl_w = u(40.0, 70.0), pl_h = u(40.0, 60.0);
    double attract = u(25.0, 50.0), repel = u(-120.0, -60.0), on = u(-40.0, -15.0);
    for (int s : {-1, 1}) {
        double x = c * s;
        std::string side = s < 0 ? "left" : "right";
        L.gates.push_back({side + "_rail", {x - w / 2, x + w / 2, -half, half}, rail, rail, GateRole::channel});
    }
    for (int s : {-1, 1}) {
        double x = c * s;
        std::string side = s < 0 ? "left" : "right";
        Rect top{x - pl_w / 2, x + pl_w / 2, half + gap, half + gap + pl_h};
        Rect bottom{x - pl_w / 2, x + pl_w / 2, -half - gap - pl_h, -half - gap};
        L.gates.push_back({side + "_top", top, s < 0 ? attract : repel, on, GateRole::plunger});
        L.gates.push_back({side + "_bottom", bottom, s < 0 ? repel : attract, on, GateRole::plunger});
    }
    return L;
}

// One horizontal rail, a pulsed center gate and two end barriers.
DeviceLayout random_barrier_layout(std::mt19937_64& rng) {
    auto u = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
    DeviceLayout L;
    L.domain = {-200.0, 200.0, -120.0, 120.0};
    double rail_w = u(24.0, 36.0), rail_v = u(22.0, 38.0);
    double cw = u(24.0, 40.0), ch = u(45.0, 75.0), c_off = u(-60.0, -40.0), c_on = u(-20.0, 0.0);
    double end_in = u(95.0, 115.0), end_w = u(40.0, 70.0), end_v = u(-50.0, -30.0);
    L.gates.push_back({"rail", {-150.0, 150.0, -rail_w / 2, rail_w / 2}, rail_v, rail_v, GateRole::channel});
    L.gates.push_back({"center", {-cw / 2, cw / 2, -ch, ch}, c_off, c_on, GateRole::plunger});
    L.gates.push_back({"left_end", {-end_in - end_w, -end_in, -45.0, 45.0}, end_v, end_v, GateRole::barrier});
    L.gates.push_back({"right_end", {end_in, end_in + end_w, -45.0, 45.0}, end_v, end_v, GateRole::barrier});
    return L;
}

}  // namespace

int main() {
    const SolverSettings st;
    const std::vector<double> coarse_v = linear_v_grid(0.0, 1.1, 11);
    const double singlet_slack = -1e-4;  // ueV

    ExchangeCurve barrier, channel, channel_fine;
    Flattop top;
    bool have_top = false;

    criterion(1, [&](std::string& d) {
        barrier = sweep_exchange(barrier_reference_layout(), coarse_v, st);
        std::vector<double> x, j;
        for (std::size_t i = 0; i < barrier.size(); ++i)
            if (barrier.v[i] >= 0.5 - 1e-9 && barrier.v[i] <= 1.0 + 1e-9) {
                x.push_back(barrier.v[i]);
                j.push_back(barrier.j[i]);
            }
        ExponentialFit f = fit_exponential(x, j);
        double r2 = f.r_squared.value_or(0.0);
        double lo = INFINITY, hi = -INFINITY;
        for (double v : x) {
            double om = susceptibility(barrier, v);
            lo = std::min(lo, om);
            hi = std::max(hi, om);
        }
        d = "barrier sweep: r^2 over v in [0.5, 1] = " + fmt("%.5f", r2) + ", Omega in [" + fmt("%.2f", lo) + ", " +
            fmt("%.2f", hi) + "] (need r^2 > 0.99, Omega in [2, 20])";
        return r2 > 0.99 && lo >= 2.0 && hi <= 20.0;
    });

    criterion(2, [&](std::string& d) {
        channel = sweep_exchange(channel_reference_layout(), coarse_v, st);
        channel_fine = refined(channel_reference_layout(), st, channel);
        top = find_flattop(channel_fine);
        have_top = true;
        double om = susceptibility(channel_fine, top.v_star);
        double ratio = std::abs(channel.j.front()) / top.j_star;
        d = "channel flat top at v* = " + fmt("%.4f", top.v_star) + ", J* = " + fmt("%.4e", top.j_star) +
            " ueV, Omega(v*) = " + fmt("%.2e", om) + ", |J(0)|/J* = " + fmt("%.2e", ratio) +
            " (need interior max, Omega < 0.1, ratio < 1e-3)";
        bool interior = top.v_star > channel_fine.v.front() && top.v_star < channel_fine.v.back();
        return interior && om < 0.1 && ratio < 1e-3;
    });

    criterion(3, [&](std::string& d) {
        if (!have_top || barrier.size() == 0) {
            d = "needs criteria 1 and 2";
            return false;
        }
        double eff = analyze_point(channel_fine, top.v_star, 0.01).omega_effective;
        // barrier sample whose J is closest to J* on a log scale, interior only
        std::size_t best = 1;
        double dist = INFINITY;
        for (std::size_t i = 1; i + 1 < barrier.size(); ++i) {
            if (barrier.j[i] <= 0.0) continue;
            double q = std::abs(std::log(barrier.j[i] / top.j_star));
            if (q < dist) {
                dist = q;
                best = i;
            }
        }
        double om = susceptibility(barrier, barrier.v[best]);
        double factor = om / eff;
        d = "barrier Omega = " + fmt("%.3f", om) + " at J = " + fmt("%.3e", barrier.j[best]) +
            " ueV vs flat-top omega_eff = " + fmt("%.3e", eff) + ": factor " + fmt("%.0f", factor) +
            " (floor 50, target 100)";
        return factor >= 50.0;
    });

    criterion(4, [&](std::string& d) {
        if (!have_top) {
            d = "needs criterion 2";
            return false;
        }
        std::vector<double> r;
        for (double delta : {0.005, 0.01, 0.02})
            r.push_back(rms_coupling_error(channel_fine, top.v_star, delta) / (delta * delta));
        double mean = (r[0] + r[1] + r[2]) / 3.0;
        double spread = 0.0;
        for (double q : r) spread = std::max(spread, std::abs(q / mean - 1.0));
        d = "rms/delta^2 = " + fmt("%.4f", r[0]) + ", " + fmt("%.4f", r[1]) + ", " + fmt("%.4f", r[2]) +
            " (max deviation " + fmt("%.2f", 100 * spread) + "%, need <= 10%)";
        return spread <= 0.10;
    });

    criterion(5, [&](std::string& d) {
        double t = swap_time(0.4);
        d = "swap_time(0.4 ueV) = " + fmt("%.4f", t) + " ns (need [4.9, 5.4])";
        return t >= 4.9 && t <= 5.4;
    });

    criterion(6, [&](std::string& d) {
        ThresholdVerdict a = fault_tolerance_margin(5e-4, 1e-4);
        ThresholdVerdict b = fault_tolerance_margin(5e-4, 1e-3);
        d = "5e-4 vs 1e-4: " + std::string(a.pass ? "pass" : "fail") + " margin " + fmt("%.17g", a.margin) +
            "; vs 1e-3: " + std::string(b.pass ? "pass" : "fail") + " margin " + fmt("%.17g", b.margin);
        return !a.pass && a.margin == 5.0 && b.pass && b.margin == 0.5;
    });

    criterion(7, [&](std::string& d) {
        PotentialGrid g = validation::oracle_double_well();
        MaterialParams m;
        double exact = brute_force_two_electron(g, m).j_uev;
        double ci = exchange_splitting(g, m, 8, st).j_uev;
        SolverSettings free = st;
        free.interaction_scale = 0.0;
        BruteForceOptions bf_free;
        bf_free.interaction_scale = 0.0;
        double ci0 = exchange_splitting(g, m, 8, free).j_uev;
        double exact0 = brute_force_two_electron(g, m, bf_free).j_uev;
        double e = rel(ci, exact), e0 = rel(ci0, exact0);
        d = std::to_string(g.nx) + "x" + std::to_string(g.ny) + " grid: CI(N=8) J = " + fmt("%.5f", ci) +
            " ueV vs exact " + fmt("%.5f", exact) + " (" + fmt("%.2f", 100 * e) + "%, need < 5%); " +
            "non-interacting difference " + fmt("%.1e", e0) + " (need < 1e-8)";
        return g.nx <= 32 && g.ny <= 32 && e < 0.05 && e0 < 1e-8;
    });

    criterion(8, [&](std::string& d) {
        double worst = 0.0;
        for (auto [t, u] : {std::pair{0.1, 5.0}, std::pair{1.0, 0.5}, std::pair{1e-4, 10.0}, std::pair{0.3, 1.0}})
            worst = std::max(worst, rel(hubbard_exchange_two_site(t, u), hubbard_exchange_closed_form(t, u)));
        PotentialGrid g = validation::tight_binding_well();
        MaterialParams m;
        validation::TightBinding tb = validation::tight_binding_parameters(g, m);
        double hub = hubbard_exchange_closed_form(tb.t, tb.u) * 1e3;
        double ci = exchange_splitting(g, m, 8, st).j_uev;
        double e = rel(ci, hub);
        d = "two-site vs closed form " + fmt("%.1e", worst) + " (need 1e-10); grid CI " + fmt("%.4e", ci) +
            " ueV vs Hubbard " + fmt("%.4e", hub) + " (t = " + fmt("%.4e", tb.t) + ", U = " + fmt("%.3f", tb.u) +
            " meV): " + fmt("%.1f", 100 * e) + "% (need < 10%)";
        return worst <= 1e-10 && e < 0.10;
    });

    criterion(9, [&](std::string& d) {
        MaterialParams m;
        OrbitalSet o = lowest_eigenpairs(build_hamiltonian(validation::harmonic_reference_well(), m), 3);
        const double ref[3] = {3.0, 6.0, 6.0};
        double worst = 0.0;
        for (int i = 0; i < 3; ++i) worst = std::max(worst, rel(o.energies[i], ref[i]));
        double p = validation::grid_convergence_order();
        d = "harmonic levels " + fmt("%.4f", o.energies[0]) + ", " + fmt("%.4f", o.energies[1]) + ", " +
            fmt("%.4f", o.energies[2]) + " meV (max error " + fmt("%.3f", 100 * worst) +
            "%, need 0.5%); convergence order " + fmt("%.3f", p) + " (need [1.7, 2.3])";
        return worst < 5e-3 && p >= 1.7 && p <= 2.3;
    });

    criterion(10, [&](std::string& d) {
        double lowest = INFINITY;
        int points = 0;
        auto take = [&](const ExchangeCurve& c) {
            for (double j : c.j) lowest = std::min(lowest, j);
            points += static_cast<int>(c.size());
        };
        if (barrier.size() == 0) barrier = sweep_exchange(barrier_reference_layout(), coarse_v, st);
        if (channel.size() == 0) channel = sweep_exchange(channel_reference_layout(), coarse_v, st);
        take(barrier);
        take(channel);
        if (channel_fine.size()) take(channel_fine);
        std::mt19937_64 rng(20261017);
        const std::vector<double> probe{0.0, 0.5, 1.0};
        int layouts = 0, worst_layout = -1;
        double lowest_random = INFINITY;
        for (int k = 0; k < 100; ++k) {
            DeviceLayout L = k % 2 == 0 ? random_channel_layout(rng) : random_barrier_layout(rng);
            L.validate();
            ExchangeCurve c = sweep_exchange(L, probe, st);
            take(c);
            for (double j : c.j)
                if (j < lowest_random) {
                    lowest_random = j;
                    worst_layout = k;
                }
            ++layouts;
        }
        d = std::to_string(points) + " points over both references and " + std::to_string(layouts) +
            " random layouts: min J = " + fmt("%.3e", lowest) + " ueV (random min " + fmt("%.3e", lowest_random) +
            " at layout " + std::to_string(worst_layout) + "; need >= -1e-4)";
        return lowest >= singlet_slack;
    });

    criterion(11, [&](std::string& d) {
        fs::path root = fs::temp_directory_path() / "qdsim_acceptance_det";
        fs::remove_all(root);
        std::string cfg = std::string(QDSIM_CONFIG_DIR) + "/barrier_sweep.yaml";
        int codes[2];
        for (int i = 0; i < 2; ++i) {
            std::string cmd = std::string(QDSIM_SIM_BINARY) + " sweep --config " + cfg + " --out " +
                              (root / std::to_string(i)).string() + " > /dev/null 2>&1";
            int s = std::system(cmd.c_str());
            codes[i] = WIFEXITED(s) ? WEXITSTATUS(s) : -1;
        }
        std::string a = slurp(root / "0" / "curve.csv"), b = slurp(root / "1" / "curve.csv");
        bool same = !a.empty() && a == b;
        d = "two sweep runs: exit " + std::to_string(codes[0]) + "/" + std::to_string(codes[1]) + ", curve.csv " +
            std::to_string(a.size()) + " bytes, " + (same ? "identical" : "different");
        fs::remove_all(root);
        return codes[0] == 0 && codes[1] == 0 && same;
    });

    criterion(12, [&](std::string& d) {
        DesignProblem p;
        p.base = channel_reference_layout();
        p.parameters = {{"channel_voltage", 20.0, 40.0}};
        p.budget = 40;
        p.j_min = 1e-3;
        p.solver = st;
        DesignResult r = optimize_design(p);
        const TraceEntry* first = nullptr;
        bool monotone = true, consistent = true;
        double incumbent = INFINITY;
        for (const auto& t : r.trace) {
            if (t.feasible != (t.j_star >= p.j_min)) consistent = false;
            if (t.feasible) {
                if (!first) first = &t;
                double next = std::min(incumbent, t.omega_effective);
                if (next > incumbent) monotone = false;
                incumbent = next;
            }
        }
        // the reported best is reproduced by a fresh evaluation
        DesignEvaluation again = evaluate_design(r.best_parameters, p);
        consistent = consistent && again.feasible && again.omega_effective == r.best_omega_effective;
        double initial = first ? first->omega_effective : NAN;
        d = std::to_string(r.trace.size()) + " evaluations (" + r.termination + "): omega_eff " + fmt("%.4e", initial) +
            " -> " + fmt("%.4e", r.best_omega_effective) + " at channel voltage " +
            fmt("%.3f", r.best_parameters[0]) + " mV, J* = " + fmt("%.3e", r.best_j_star) + " ueV; incumbent " +
            (monotone ? "monotone" : "NOT monotone") + ", feasibility " + (consistent ? "consistent" : "INCONSISTENT");
        return first && r.best_omega_effective <= initial && monotone && consistent &&
               incumbent == r.best_omega_effective;
    });

    std::printf("%s: %d of 12 criteria failed\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
