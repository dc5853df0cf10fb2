#pragma once

#include <Eigen/Core>

#include <array>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qdsim {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

/// Axis-aligned rectangle in nm.
struct Rect {
    double x_min = 0.0;
    double x_max = 0.0;
    double y_min = 0.0;
    double y_max = 0.0;

    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    bool valid() const { return x_min < x_max && y_min < y_max; }
    bool overlaps(const Rect& o) const {
        return x_min < o.x_max && o.x_min < x_max && y_min < o.y_max && o.y_min < y_max;
    }
    bool operator==(const Rect&) const = default;
};

struct MaterialParams {
    double effective_mass = 0.19;         // units of m_e
    double relative_permittivity = 11.9;
    double dot_depth = 40.0;              // nm, gate plane to electron plane
    double softening_length = 6.0;        // nm, Coulomb regularization

    /// Throws InputError on non-physical values.
    void validate() const;
    /// hbar^2/(2 m*) in meV nm^2.
    double kinetic_prefactor() const;
    bool operator==(const MaterialParams&) const = default;
};

enum class GateRole { plunger, channel, barrier };

std::string_view to_string(GateRole role);
GateRole gate_role_from_string(std::string_view name);

struct GateElement {
    std::string name;
    Rect footprint;
    double voltage_off = 0.0;  // mV
    double voltage_on = 0.0;   // mV
    GateRole role = GateRole::plunger;

    void validate() const;
    bool operator==(const GateElement&) const = default;
};

struct DeviceLayout {
    std::vector<GateElement> gates;
    MaterialParams material;
    Rect domain;
    double background_offset = 0.0;  // mV

    void validate() const;
    bool operator==(const DeviceLayout&) const = default;
};

/// Largest admissible overshoot of the normalized control beyond the on state.
inline constexpr double kControlOvershoot = 0.1;

/// Normalized control voltage: 0 is the off configuration, 1 the on configuration.
class ControlPoint {
public:
    explicit ControlPoint(double v);
    double v() const { return v_; }

private:
    double v_;
};

enum class GridProvenance { gate_model, biquadratic_model, file };

std::string_view to_string(GridProvenance p);

/// Potential energy in meV sampled on a uniform node grid that includes the
/// domain boundary. values(i, j) sits at (x0 + i*spacing, y0 + j*spacing).
struct PotentialGrid {
    int nx = 0;
    int ny = 0;
    double spacing = 0.0;
    double x0 = 0.0;
    double y0 = 0.0;
    Eigen::MatrixXd values;  // nx rows, ny columns
    GridProvenance provenance = GridProvenance::gate_model;

    double x(int i) const { return x0 + i * spacing; }
    double y(int j) const { return y0 + j * spacing; }
    void validate() const;
};

/// Pinned-surface potential energy (meV) of one rectangular gate at voltage
/// `applied_voltage` (mV), evaluated at `point` in a plane `depth` nm below
/// the gate plane.
double gate_potential(const GateElement& gate, double applied_voltage, Point2 point, double depth);

/// Applied voltage per gate at control point `control`; plungers move affinely
/// between their off and on voltages, all other roles stay at voltage_off.
std::vector<std::pair<const GateElement*, double>> interpolate_controls(
    const DeviceLayout& layout, const ControlPoint& control);

/// Superposes every gate contribution plus the background offset on an
/// nx-by-ny node grid spanning the layout domain. Square cells are required.
PotentialGrid assemble_potential(const DeviceLayout& layout, const ControlPoint& control, int nx,
                                 int ny);

/// Node counts for a given spacing; the domain must be an integer number of
/// cells in both directions.
std::pair<int, int> grid_shape(const Rect& domain, double spacing);

/// Quartic double well V = (m w^2/2) (s (x^2 - a^2)^2 / (4 a^2) + y^2) with
/// hbar w = confinement_energy, 2a = separation and s = barrier_scale.
/// separation == 0 gives the merged harmonic well.
PotentialGrid model_double_well(double separation, double confinement_energy, double barrier_scale,
                                int nx, int ny, const Rect& domain, double effective_mass);

/// Plain-text matrix: header "# nx ny spacing_nm" with the numbers filled in,
/// then nx lines of ny space-separated values.
std::string format_potential_text(const PotentialGrid& grid);
PotentialGrid parse_potential_text(const std::string& text, double x0 = 0.0, double y0 = 0.0);

/// Bistable two-channel layout: two accumulation rails 90 nm apart and four
/// end plungers that slide the electrons past each other.
DeviceLayout channel_reference_layout();

/// Conventional pair: one accumulation rail, fixed outer confinement gates
/// and a pulsed center gate that lowers the inter-dot barrier.
DeviceLayout barrier_reference_layout();

/// Looks up "channel-reference" or "barrier-reference"; ConfigError otherwise.
DeviceLayout builtin_layout(std::string_view name);
bool is_builtin_layout(std::string_view name);

}  // namespace qdsim
