#pragma once

#include "qdsim/device.hpp"
#include "qdsim/two_electron.hpp"

#include <optional>
#include <string>
#include <vector>

namespace qdsim {

/// J (ueV) sampled at strictly increasing normalized control voltages.
struct ExchangeCurve {
    std::vector<double> v;
    std::vector<double> j;  // ueV
    std::string fingerprint;
    std::vector<std::string> warnings;

    std::size_t size() const { return v.size(); }
    /// Ordering and finiteness; `min_points` samples required.
    void validate(std::size_t min_points = 2) const;
};

/// Content hash of a layout plus solver settings.
std::string device_fingerprint(const DeviceLayout& layout, const SolverSettings& settings);

/// Evenly spaced control voltages, both ends included.
std::vector<double> linear_v_grid(double v_min, double v_max, int points);

/// One exchange solve per control voltage, run on up to `threads` workers.
/// Failing points raise PartialSweepError naming them.
ExchangeCurve sweep_exchange(const DeviceLayout& layout, const std::vector<double>& v_values,
                             const SolverSettings& settings, int threads = 1);

/// |v/J dJ/dv| from a least-squares quadratic through the five samples
/// nearest v0, fitted to ln J when those samples are all positive and to J
/// otherwise. With V = v * swing this is the voltage-referenced Omega.
double susceptibility(const ExchangeCurve& curve, double v0);

/// Local cubic through the four samples around v.
double interpolate_cubic(const ExchangeCurve& curve, double v);

/// std/mean of J for v uniform on [v0(1-delta), v0(1+delta)] (Simpson, 41 nodes).
double rms_coupling_error(const ExchangeCurve& curve, double v0, double delta);

struct ThresholdVerdict {
    bool pass = false;
    double margin = 0.0;  // error / threshold
};

ThresholdVerdict fault_tolerance_margin(double rms_relative_error, double threshold);

struct Flattop {
    double v_star = 0.0;
    double j_star = 0.0;      // ueV
    double curvature = 0.0;   // a in J ~ J*(1 - a ((v - v*)/v*)^2)
};

/// Quadratic vertex through the discrete maximum and its neighbours.
Flattop find_flattop(const ExchangeCurve& curve);

/// h / (2J), nanoseconds for J in ueV.
double swap_time(double j_uev);

struct ExponentialFit {
    double rate = 0.0;       // b in ln J = ln A + b x
    double prefactor = 0.0;  // A
    std::optional<double> decay_length;  // 1/|b|, absent for b == 0
    std::optional<double> r_squared;     // absent when ln J is constant
};

ExponentialFit fit_exponential(const std::vector<double>& x, const std::vector<double>& j);
ExponentialFit fit_exponential(const ExchangeCurve& curve);

struct SusceptibilityReport {
    double v0 = 0.0;
    double j0 = 0.0;  // ueV
    double omega_pointwise = 0.0;
    double delta = 0.0;
    double rms_relative_error = 0.0;
    double omega_effective = 0.0;
    bool fault_tolerant_1e4 = false;
    bool fault_tolerant_1e3 = false;
    double margin_1e4 = 0.0;
    double margin_1e3 = 0.0;
    double swap_time_ns = 0.0;
};

SusceptibilityReport analyze_point(const ExchangeCurve& curve, double v0, double delta);

/// Up to `count` extra control voltages spaced `step` apart, centered on the
/// quadratic estimate of the peak, clipped to [0, 1 + overshoot] and skipping
/// voltages already sampled.
std::vector<double> refinement_points(const ExchangeCurve& coarse, int count, double step);

/// Merges two sweeps of the same device into one ordered curve.
ExchangeCurve merge_curves(const ExchangeCurve& a, const ExchangeCurve& b);

}  // namespace qdsim
