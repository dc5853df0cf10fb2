#pragma once

#include "qdsim/analysis.hpp"
#include "qdsim/device.hpp"
#include "qdsim/errors.hpp"
#include "qdsim/two_electron.hpp"

#include <functional>
#include <string>
#include <vector>

namespace qdsim {

/// Named knob of the layout template:
///   channel_voltage  mV, voltage of every channel gate
///   plunger_swing    mV, |on - off| of every plunger (on voltage kept)
///   channel_width    nm, narrow dimension of every channel gate (center kept)
struct DesignParameter {
    std::string name;
    double lower = 0.0;
    double upper = 0.0;
    bool operator==(const DesignParameter&) const = default;
};

bool is_design_parameter(std::string_view name);
std::string_view design_parameter_unit(std::string_view name);

DeviceLayout apply_design(const DeviceLayout& base, const std::vector<DesignParameter>& params,
                          const std::vector<double>& values);

struct DesignEvaluation {
    double omega_effective = 0.0;
    double j_star = 0.0;  // ueV; 0 when no flat top was found
    bool has_flattop = false;
    bool feasible = false;
    std::string note;
};

struct DesignProblem {
    DeviceLayout base;
    std::vector<DesignParameter> parameters;
    double j_min = 1e-3;  // ueV
    int budget = 40;
    double delta = 0.01;
    SolverSettings solver;
    int threads = 1;

    void validate() const;
};

/// Coarse 11-point sweep on [0, 1.1], 7 refinement points around the peak at
/// a quarter of the coarse spacing, then the flat-top RMS error at v*.
DesignEvaluation evaluate_design(const std::vector<double>& values, const DesignProblem& problem);

struct TraceEntry {
    std::vector<double> parameters;
    double omega_effective = 0.0;
    double j_star = 0.0;
    bool feasible = false;
};

struct DesignResult {
    std::vector<double> best_parameters;
    double best_omega_effective = 0.0;
    double best_j_star = 0.0;
    std::vector<TraceEntry> trace;
    std::string termination;  // "budget" or "converged"
};

class InfeasibleDesignError : public InfeasibleError {
public:
    InfeasibleDesignError(const std::string& what, std::vector<TraceEntry> trace)
        : InfeasibleError(what), trace_(std::move(trace)) {}
    const std::vector<TraceEntry>& trace() const { return trace_; }

private:
    std::vector<TraceEntry> trace_;
};

using DesignEvaluator = std::function<DesignEvaluation(const std::vector<double>&)>;

/// Nelder-Mead on bound-normalized coordinates starting at the box midpoint.
/// Infeasible points score omega + 1e3 * relative shortfall of J*, or 1e6 when
/// no flat top exists.
DesignResult optimize_design(const DesignProblem& problem, const DesignEvaluator& evaluator = {});

}  // namespace qdsim
