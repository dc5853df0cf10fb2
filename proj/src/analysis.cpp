#include "qdsim/analysis.hpp"

#include "qdsim/errors.hpp"
#include "qdsim/units.hpp"
#include "util.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qdsim {

void ExchangeCurve::validate(std::size_t min_points) const {
    if (v.size() != j.size()) throw InputError("curve has mismatched v and J columns");
    if (v.size() < min_points)
        throw DomainError("curve has " + std::to_string(v.size()) + " points, need " + std::to_string(min_points));
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i]) || !std::isfinite(j[i])) throw InputError("curve has non-finite samples");
        if (i && !(v[i] > v[i - 1])) throw InputError("curve v values must increase strictly");
    }
}

std::string device_fingerprint(const DeviceLayout& layout, const SolverSettings& s) {
    using util::fmt17;
    std::string t = "domain " + fmt17(layout.domain.x_min) + " " + fmt17(layout.domain.x_max) + " " +
                    fmt17(layout.domain.y_min) + " " + fmt17(layout.domain.y_max) + "\n";
    const auto& m = layout.material;
    t += "material " + fmt17(m.effective_mass) + " " + fmt17(m.relative_permittivity) + " " +
         fmt17(m.dot_depth) + " " + fmt17(m.softening_length) + "\n";
    t += "offset " + fmt17(layout.background_offset) + "\n";
    for (const auto& g : layout.gates)
        t += "gate " + g.name + " " + std::string(to_string(g.role)) + " " + fmt17(g.footprint.x_min) + " " +
             fmt17(g.footprint.x_max) + " " + fmt17(g.footprint.y_min) + " " + fmt17(g.footprint.y_max) + " " +
             fmt17(g.voltage_off) + " " + fmt17(g.voltage_on) + "\n";
    t += "solver " + fmt17(s.grid_spacing) + " " + std::to_string(s.basis_size) + " " +
         std::string(to_string(s.basis)) + " " + fmt17(s.eig_tol) + " " + std::to_string(s.hf_max_iter) + " " +
         fmt17(s.hf_mix) + " " + fmt17(s.interaction_scale) + "\n";
    return util::sha256_hex(t);
}

std::vector<double> linear_v_grid(double v_min, double v_max, int points) {
    if (points < 2) throw InputError("a v grid needs at least two points");
    if (!(v_max > v_min)) throw InputError("v grid needs v_max > v_min");
    std::vector<double> v(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) v[static_cast<std::size_t>(i)] = v_min + (v_max - v_min) * i / (points - 1);
    v.back() = v_max;
    return v;
}

ExchangeCurve sweep_exchange(const DeviceLayout& layout, const std::vector<double>& v_values,
                             const SolverSettings& settings, int threads) {
    layout.validate();
    settings.validate();
    for (std::size_t i = 0; i < v_values.size(); ++i) {
        ControlPoint check(v_values[i]);
        if (i && !(v_values[i] > v_values[i - 1])) throw InputError("sweep voltages must increase strictly");
    }
    const auto [nx, ny] = grid_shape(layout.domain, settings.grid_spacing);
    ExchangeCurve c;
    c.v = v_values;
    c.j.assign(v_values.size(), 0.0);
    c.fingerprint = device_fingerprint(layout, settings);
    std::vector<std::vector<std::string>> warn(v_values.size());
    auto errs = util::parallel_for(v_values.size(), threads, [&](std::size_t i) {
        PotentialGrid g = assemble_potential(layout, ControlPoint(v_values[i]), nx, ny);
        TwoElectronSpectrum s = exchange_splitting(g, layout.material, settings.basis_size, settings);
        c.j[i] = s.j_uev;
        warn[i] = std::move(s.warnings);
    });
    std::vector<double> failed;
    std::string why;
    for (std::size_t i = 0; i < errs.size(); ++i) {
        if (!errs[i]) continue;
        failed.push_back(v_values[i]);
        try {
            std::rethrow_exception(errs[i]);
        } catch (const std::exception& e) {
            if (why.empty()) why = e.what();
        }
    }
    if (!failed.empty()) {
        std::string list;
        for (double f : failed) list += (list.empty() ? "" : ", ") + util::fmt17(f);
        throw PartialSweepError("exchange solve failed at v = " + list + " (" + why + ")", failed);
    }
    for (auto& w : warn)
        for (auto& s : w)
            if (std::find(c.warnings.begin(), c.warnings.end(), s) == c.warnings.end()) c.warnings.push_back(s);
    return c;
}

namespace {

// indices of the `count` samples nearest x, ascending
std::vector<std::size_t> nearest(const std::vector<double>& v, double x, std::size_t count) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return std::abs(v[a] - x) < std::abs(v[b] - x); });
    idx.resize(std::min(count, idx.size()));
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace

double susceptibility(const ExchangeCurve& curve, double v0) {
    curve.validate(5);
    if (!(v0 > curve.v.front() && v0 < curve.v.back()))
        throw DomainError("susceptibility needs v0 inside (" + util::fmt17(curve.v.front()) + ", " +
                          util::fmt17(curve.v.back()) + ")");
    auto idx = nearest(curve.v, v0, 5);
    // fit ln J when every sample is positive: a quadratic in J itself cannot
    // follow a curve that grows tenfold per sample
    bool positive = true;
    for (std::size_t i : idx) positive = positive && curve.j[i] > 0.0;
    Eigen::MatrixXd a(5, 3);
    Eigen::VectorXd y(5);
    for (int r = 0; r < 5; ++r) {
        const std::size_t i = idx[static_cast<std::size_t>(r)];
        double dv = curve.v[i] - v0;
        a(r, 0) = 1.0;
        a(r, 1) = dv;
        a(r, 2) = dv * dv;
        y[r] = positive ? std::log(curve.j[i]) : curve.j[i];
    }
    Eigen::Vector3d c = a.colPivHouseholderQr().solve(y);
    if (positive) return std::abs(v0 * c[1]);
    if (!(c[0] > 0.0)) throw DomainError("susceptibility undefined where J <= 0 (v0 = " + util::fmt17(v0) + ")");
    return std::abs(v0 * c[1] / c[0]);
}

double interpolate_cubic(const ExchangeCurve& curve, double x) {
    const auto& v = curve.v;
    const std::size_t n = v.size();
    if (n < 4) throw DomainError("cubic interpolation needs four samples");
    std::size_t hi = static_cast<std::size_t>(std::upper_bound(v.begin(), v.end(), x) - v.begin());
    hi = std::clamp<std::size_t>(hi, 1, n - 1);
    std::size_t lo = hi - 1;
    std::size_t s = lo >= 1 ? lo - 1 : 0;
    s = std::min(s, n - 4);
    double out = 0.0;
    for (std::size_t a = s; a < s + 4; ++a) {
        double w = 1.0;
        for (std::size_t b = s; b < s + 4; ++b)
            if (b != a) w *= (x - v[b]) / (v[a] - v[b]);
        out += w * curve.j[a];
    }
    return out;
}

double rms_coupling_error(const ExchangeCurve& curve, double v0, double delta) {
    curve.validate(4);
    if (!(delta >= 0.0) || !std::isfinite(delta)) throw InputError("delta must be non-negative");
    if (delta == 0.0) return 0.0;
    const double lo = v0 * (1.0 - delta), hi = v0 * (1.0 + delta);
    const double a = std::min(lo, hi), b = std::max(lo, hi);
    if (a < curve.v.front() || b > curve.v.back())
        throw DomainError("voltage window [" + util::fmt17(a) + ", " + util::fmt17(b) + "] leaves the curve");
    constexpr int nodes = 41;
    const double step = (b - a) / (nodes - 1);
    std::vector<double> f(nodes), w(nodes);
    for (int i = 0; i < nodes; ++i) {
        f[static_cast<std::size_t>(i)] = interpolate_cubic(curve, a + i * step);
        w[static_cast<std::size_t>(i)] = (i == 0 || i == nodes - 1) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    }
    const double norm = 3.0 * (nodes - 1);  // sum of Simpson weights
    double mean = 0.0;
    for (int i = 0; i < nodes; ++i) mean += w[static_cast<std::size_t>(i)] * f[static_cast<std::size_t>(i)];
    mean /= norm;
    if (!(mean > 0.0)) throw DomainError("mean coupling over the window is not positive");
    double var = 0.0;
    for (int i = 0; i < nodes; ++i) {
        double d = f[static_cast<std::size_t>(i)] - mean;
        var += w[static_cast<std::size_t>(i)] * d * d;
    }
    var /= norm;
    return std::sqrt(std::max(var, 0.0)) / mean;
}

ThresholdVerdict fault_tolerance_margin(double err, double threshold) {
    if (!(threshold > 0.0)) throw InputError("threshold must be positive");
    if (!(err >= 0.0)) throw InputError("error must be non-negative");
    return {err < threshold, err / threshold};
}

Flattop find_flattop(const ExchangeCurve& curve) {
    curve.validate(3);
    const auto& v = curve.v;
    const auto& j = curve.j;
    std::size_t k = static_cast<std::size_t>(std::max_element(j.begin(), j.end()) - j.begin());
    if (k == 0 || k + 1 == v.size())
        throw NoFlattopError("J is largest at the sweep endpoint v = " + util::fmt17(v[k]) + "; no flat top");
    // Newton form through three points
    const double x0 = v[k - 1], x1 = v[k], x2 = v[k + 1];
    const double d01 = (j[k] - j[k - 1]) / (x1 - x0);
    const double d12 = (j[k + 1] - j[k]) / (x2 - x1);
    const double c2 = (d12 - d01) / (x2 - x0);
    const double c1 = d01 - c2 * (x0 + x1);
    const double c0 = j[k - 1] - c1 * x0 - c2 * x0 * x0;
    if (!(c2 < 0.0)) throw NoFlattopError("samples around the maximum are not concave");
    Flattop f;
    f.v_star = -c1 / (2.0 * c2);
    f.j_star = c0 + c1 * f.v_star + c2 * f.v_star * f.v_star;
    if (!(f.j_star > 0.0)) throw NoFlattopError("peak coupling is not positive");
    f.curvature = -c2 * f.v_star * f.v_star / f.j_star;
    return f;
}

double swap_time(double j_uev) {
    if (!(j_uev > 0.0) || !std::isfinite(j_uev)) throw DomainError("swap time undefined for J <= 0");
    const double j_ev = j_uev * 1e-6;
    return units::kPlanckEvS / (2.0 * j_ev) * 1e9;
}

ExponentialFit fit_exponential(const std::vector<double>& x, const std::vector<double>& j) {
    if (x.size() != j.size()) throw FitError("x and J columns differ in length");
    const std::size_t n = x.size();
    if (n < 3) throw FitError("exponential fit needs at least 3 points, got " + std::to_string(n));
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(j[i] > 0.0)) throw FitError("exponential fit needs J > 0 (J = " + util::fmt17(j[i]) + ")");
        y[i] = std::log(j[i]);
    }
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    const bool flat = std::all_of(y.begin(), y.end(), [&](double q) { return q == y[0]; });
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw FitError("exponential fit needs distinct x values");
    ExponentialFit f;
    f.rate = flat ? 0.0 : sxy / sxx;
    f.prefactor = flat ? j[0] : std::exp(my - f.rate * mx);
    if (f.rate != 0.0) f.decay_length = 1.0 / std::abs(f.rate);
    if (!flat && syy > 0.0) {
        double sse = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double r = y[i] - (my + f.rate * (x[i] - mx));
            sse += r * r;
        }
        f.r_squared = 1.0 - sse / syy;
    }
    return f;
}

ExponentialFit fit_exponential(const ExchangeCurve& curve) { return fit_exponential(curve.v, curve.j); }

SusceptibilityReport analyze_point(const ExchangeCurve& curve, double v0, double delta) {
    SusceptibilityReport r;
    r.v0 = v0;
    r.j0 = interpolate_cubic(curve, v0);
    r.omega_pointwise = susceptibility(curve, v0);
    r.delta = delta;
    r.rms_relative_error = rms_coupling_error(curve, v0, delta);
    r.omega_effective = delta > 0.0 ? r.rms_relative_error / delta : 0.0;
    auto t4 = fault_tolerance_margin(r.rms_relative_error, 1e-4);
    auto t3 = fault_tolerance_margin(r.rms_relative_error, 1e-3);
    r.fault_tolerant_1e4 = t4.pass;
    r.fault_tolerant_1e3 = t3.pass;
    r.margin_1e4 = t4.margin;
    r.margin_1e3 = t3.margin;
    r.swap_time_ns = swap_time(r.j0);
    return r;
}

std::vector<double> refinement_points(const ExchangeCurve& coarse, int count, double step) {
    coarse.validate(3);
    double center;
    try {
        center = find_flattop(coarse).v_star;
    } catch (const NoFlattopError&) {
        center = coarse.v[static_cast<std::size_t>(
            std::max_element(coarse.j.begin(), coarse.j.end()) - coarse.j.begin())];
    }
    const double vmax = 1.0 + kControlOvershoot;
    double first = center - step * (count - 1) / 2.0;
    first = std::clamp(first, 0.0, std::max(0.0, vmax - step * (count - 1)));
    std::vector<double> out;
    for (int i = 0; i < count; ++i) {
        double v = std::min(first + step * i, vmax);
        bool dup = std::any_of(coarse.v.begin(), coarse.v.end(), [&](double q) { return std::abs(q - v) < 1e-9; });
        if (!dup) out.push_back(v);
    }
    return out;
}

ExchangeCurve merge_curves(const ExchangeCurve& a, const ExchangeCurve& b) {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < a.size(); ++i) pts.emplace_back(a.v[i], a.j[i]);
    for (std::size_t i = 0; i < b.size(); ++i) pts.emplace_back(b.v[i], b.j[i]);
    std::sort(pts.begin(), pts.end());
    ExchangeCurve c;
    c.fingerprint = a.fingerprint;
    c.warnings = a.warnings;
    for (const auto& w : b.warnings)
        if (std::find(c.warnings.begin(), c.warnings.end(), w) == c.warnings.end()) c.warnings.push_back(w);
    for (const auto& [v, j] : pts) {
        if (!c.v.empty() && std::abs(v - c.v.back()) < 1e-12) continue;
        c.v.push_back(v);
        c.j.push_back(j);
    }
    return c;
}

}  // namespace qdsim
