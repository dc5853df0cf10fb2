#pragma once

#include "qdsim/device.hpp"
#include "qdsim/optimizer.hpp"
#include "qdsim/two_electron.hpp"

#include <optional>
#include <string>
#include <vector>

namespace qdsim {

enum class Command { sweep, analyze, optimize, validate, export_potential };

std::string_view to_string(Command c);
Command command_from_string(std::string_view s);

struct AnalysisSettings {
    double delta = 0.01;
    std::vector<double> thresholds{1e-4, 1e-3};
    double v_min = 0.0;
    double v_max = 1.1;
    int v_points = 11;
    std::optional<double> operating_point;  // empty: flat top if there is one
    bool operator==(const AnalysisSettings&) const = default;
};

struct OptimizeSettings {
    std::vector<DesignParameter> parameters{{"channel_voltage", 20.0, 40.0}};
    double j_min = 1e-3;  // ueV
    int budget = 40;
    bool operator==(const OptimizeSettings&) const = default;
};

struct ExportSettings {
    double v = 0.0;
    int orbitals = 0;
    bool operator==(const ExportSettings&) const = default;
};

struct RunSpec {
    Command command = Command::sweep;
    std::string device_name;  // built-in name, empty for an inline layout
    DeviceLayout layout;
    SolverSettings solver;
    AnalysisSettings analysis;
    OptimizeSettings optimize;
    ExportSettings export_settings;
    std::string output = "out";
    int threads = 0;  // 0: environment or 1

    void validate() const;
    bool operator==(const RunSpec&) const = default;
};

/// Strict YAML reader: unknown keys, unitless physical quantities and
/// out-of-range values raise ParseError with the offending line and key.
RunSpec parse_config(const std::string& text);

/// Canonical YAML text; parse_config(serialize(s)) == s.
std::string serialize(const RunSpec& spec);

/// SHA-256 of the canonical text with output directory and thread count
/// blanked, so relocating a run does not change it.
std::string spec_fingerprint(const RunSpec& spec);

}  // namespace qdsim
