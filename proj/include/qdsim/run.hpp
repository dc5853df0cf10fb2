#pragma once

#include "qdsim/analysis.hpp"
#include "qdsim/config.hpp"

#include <exception>
#include <filesystem>
#include <string>
#include <vector>

namespace qdsim {

inline constexpr const char* kToolName = "qdsim";
inline constexpr const char* kToolVersion = "1.0.0";

struct RunReport {
    Command command = Command::sweep;
    std::string spec_fingerprint;
    std::string payload_json;  // deterministic part of the report
    double wall_time_s = 0.0;
    int exit_status = 0;       // nonzero only for a failed validation table
    std::vector<std::filesystem::path> files;
};

/// Executes the command, writing every file atomically under spec.output.
RunReport run(const RunSpec& spec);

/// curve.csv, omega.csv and a README describing the columns.
std::vector<std::filesystem::path> emit_plot_data(const ExchangeCurve& curve, const std::filesystem::path& dir);

std::string curve_csv(const ExchangeCurve& curve);
/// Pointwise susceptibility at the interior samples with J > 0.
std::string omega_csv(const ExchangeCurve& curve);

/// 2 parse/config, 3 convergence, 4 infeasible, 5 resource, 1 anything else.
int exit_code_for(const std::exception_ptr& e);

}  // namespace qdsim
