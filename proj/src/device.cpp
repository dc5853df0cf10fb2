#include "qdsim/device.hpp"

#include "qdsim/errors.hpp"
#include "qdsim/units.hpp"
#include "util.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace qdsim {

namespace {

bool finite(double v) { return std::isfinite(v); }

double corner_term(double u, double w, double d) {
    return std::atan(u * w / (d * std::sqrt(u * u + w * w + d * d)));
}

}  // namespace

void MaterialParams::validate() const {
    if (!(effective_mass > 0.0) || !finite(effective_mass))
        throw InputError("effective_mass must be positive");
    if (!(relative_permittivity >= 1.0) || !finite(relative_permittivity))
        throw InputError("relative_permittivity must be >= 1");
    if (!(dot_depth > 0.0) || !finite(dot_depth)) throw InputError("dot_depth must be positive");
    if (!(softening_length > 0.0) || !finite(softening_length))
        throw InputError("softening_length must be positive");
}

double MaterialParams::kinetic_prefactor() const {
    return units::kHbar2Over2Me / effective_mass;
}

std::string_view to_string(GateRole role) {
    switch (role) {
        case GateRole::plunger: return "plunger";
        case GateRole::channel: return "channel";
        case GateRole::barrier: return "barrier";
    }
    return "?";
}

GateRole gate_role_from_string(std::string_view name) {
    if (name == "plunger") return GateRole::plunger;
    if (name == "channel") return GateRole::channel;
    if (name == "barrier") return GateRole::barrier;
    throw InputError("unknown gate role '" + std::string(name) + "'");
}

void GateElement::validate() const {
    const Rect& r = footprint;
    if (!finite(r.x_min) || !finite(r.x_max) || !finite(r.y_min) || !finite(r.y_max))
        throw InputError("gate '" + name + "': non-finite footprint");
    if (!r.valid()) throw InputError("gate '" + name + "': footprint needs min < max on both axes");
    if (!finite(voltage_off) || !finite(voltage_on))
        throw InputError("gate '" + name + "': non-finite voltage");
    if (role == GateRole::channel && voltage_off != voltage_on)
        throw InputError("channel gate '" + name + "' must hold one voltage (off == on)");
}

void DeviceLayout::validate() const {
    material.validate();
    if (!domain.valid()) throw InputError("layout domain is empty");
    if (!finite(background_offset)) throw InputError("non-finite background offset");
    for (const auto& g : gates) {
        g.validate();
        const Rect& r = g.footprint;
        // projections onto both axes must meet the domain
        bool x_meets = r.x_min <= domain.x_max && r.x_max >= domain.x_min;
        bool y_meets = r.y_min <= domain.y_max && r.y_max >= domain.y_min;
        if (!x_meets || !y_meets)
            throw InputError("gate '" + g.name + "' lies entirely outside the domain");
    }
}

ControlPoint::ControlPoint(double v) : v_(v) {
    if (!finite(v) || v < 0.0 || v > 1.0 + kControlOvershoot)
        throw InputError("control voltage v=" + util::fmt17(v) + " outside [0, 1.1]");
}

std::string_view to_string(GridProvenance p) {
    switch (p) {
        case GridProvenance::gate_model: return "gate-model";
        case GridProvenance::biquadratic_model: return "biquadratic-model";
        case GridProvenance::file: return "file";
    }
    return "?";
}

void PotentialGrid::validate() const {
    if (nx < 3 || ny < 3) throw ConfigError("potential grid needs at least 3x3 nodes");
    if (!(spacing > 0.0) || !finite(spacing)) throw ConfigError("grid spacing must be positive");
    if (values.rows() != nx || values.cols() != ny)
        throw ConfigError("potential grid values do not match nx, ny");
    if (!values.allFinite()) throw InputError("potential grid has non-finite values");
}

double gate_potential(const GateElement& gate, double applied_voltage, Point2 p, double depth) {
    if (!finite(p.x) || !finite(p.y) || !finite(applied_voltage) || !finite(depth))
        throw InputError("gate_potential: non-finite input");
    if (!(depth > 0.0)) throw InputError("gate_potential: depth must be positive");
    const Rect& r = gate.footprint;
    double s = corner_term(p.x - r.x_min, p.y - r.y_min, depth) +
               corner_term(p.x - r.x_min, r.y_max - p.y, depth) +
               corner_term(r.x_max - p.x, p.y - r.y_min, depth) +
               corner_term(r.x_max - p.x, r.y_max - p.y, depth);
    double phi = applied_voltage / (2.0 * std::numbers::pi) * s;
    return -phi;
}

std::vector<std::pair<const GateElement*, double>> interpolate_controls(
    const DeviceLayout& layout, const ControlPoint& control) {
    std::vector<std::pair<const GateElement*, double>> out;
    out.reserve(layout.gates.size());
    const double v = control.v();
    for (const auto& g : layout.gates) {
        double volt = g.role == GateRole::plunger
                          ? g.voltage_off + v * (g.voltage_on - g.voltage_off)
                          : g.voltage_off;
        out.emplace_back(&g, volt);
    }
    return out;
}

std::pair<int, int> grid_shape(const Rect& domain, double spacing) {
    if (!(spacing > 0.0) || !finite(spacing)) throw ConfigError("grid spacing must be positive");
    if (!domain.valid()) throw ConfigError("domain is empty");
    double cx = domain.width() / spacing;
    double cy = domain.height() / spacing;
    long ix = std::lround(cx);
    long iy = std::lround(cy);
    if (std::abs(cx - ix) > 1e-9 * std::max(1.0, cx) || std::abs(cy - iy) > 1e-9 * std::max(1.0, cy))
        throw ConfigError("domain " + util::fmt17(domain.width()) + " x " +
                          util::fmt17(domain.height()) + " nm is not a whole number of " +
                          util::fmt17(spacing) + " nm cells");
    return {static_cast<int>(ix) + 1, static_cast<int>(iy) + 1};
}

namespace {

double square_spacing(const Rect& domain, int nx, int ny) {
    if (nx < 16 || ny < 16) throw ConfigError("grid needs at least 16 nodes per axis");
    if (!domain.valid()) throw ConfigError("domain is empty");
    double hx = domain.width() / (nx - 1);
    double hy = domain.height() / (ny - 1);
    if (std::abs(hx - hy) > 1e-12 * std::max(hx, hy))
        throw ConfigError("grid " + std::to_string(nx) + "x" + std::to_string(ny) +
                          " does not give square cells over the domain");
    return hx;
}

}  // namespace

PotentialGrid assemble_potential(const DeviceLayout& layout, const ControlPoint& control, int nx,
                                 int ny) {
    layout.validate();
    PotentialGrid g;
    g.nx = nx;
    g.ny = ny;
    g.spacing = square_spacing(layout.domain, nx, ny);
    g.x0 = layout.domain.x_min;
    g.y0 = layout.domain.y_min;
    g.provenance = GridProvenance::gate_model;
    g.values = Eigen::MatrixXd::Constant(nx, ny, -layout.background_offset);
    const double d = layout.material.dot_depth;
    for (const auto& [gate, volt] : interpolate_controls(layout, control)) {
        if (volt == 0.0) continue;
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                g.values(i, j) += gate_potential(*gate, volt, {g.x(i), g.y(j)}, d);
    }
    return g;
}

PotentialGrid model_double_well(double separation, double confinement_energy,
                                double barrier_scale, int nx, int ny, const Rect& domain,
                                double effective_mass) {
    if (!(separation >= 0.0) || !finite(separation))
        throw InputError("separation must be non-negative");
    if (!(confinement_energy > 0.0) || !finite(confinement_energy))
        throw InputError("confinement energy must be positive");
    if (!(barrier_scale >= 0.0) || !finite(barrier_scale))
        throw InputError("barrier scale must be non-negative");
    if (!(effective_mass > 0.0)) throw InputError("effective_mass must be positive");

    PotentialGrid g;
    g.nx = nx;
    g.ny = ny;
    g.spacing = square_spacing(domain, nx, ny);
    g.x0 = domain.x_min;
    g.y0 = domain.y_min;
    g.provenance = GridProvenance::biquadratic_model;
    g.values.resize(nx, ny);

    // m w^2 / 2 = (hbar w)^2 / (4 hbar^2/2m)
    const double k = confinement_energy * confinement_energy /
                     (4.0 * units::kHbar2Over2Me / effective_mass);
    const double a = 0.5 * separation;
    for (int j = 0; j < ny; ++j) {
        double y = g.y(j);
        for (int i = 0; i < nx; ++i) {
            double x = g.x(i);
            double xpart;
            if (a == 0.0) {
                xpart = x * x;
            } else {
                double q = x * x - a * a;
                xpart = barrier_scale * q * q / (4.0 * a * a);
            }
            g.values(i, j) = k * (xpart + y * y);
        }
    }
    return g;
}

std::string format_potential_text(const PotentialGrid& grid) {
    std::string out = "# " + std::to_string(grid.nx) + " " + std::to_string(grid.ny) + " " +
                      util::fmt17(grid.spacing) + "\n";
    for (int i = 0; i < grid.nx; ++i) {
        for (int j = 0; j < grid.ny; ++j) {
            if (j) out += ' ';
            out += util::fmt17(grid.values(i, j));
        }
        out += '\n';
    }
    return out;
}

PotentialGrid parse_potential_text(const std::string& text, double x0, double y0) {
    std::istringstream in(text);
    std::string line;
    PotentialGrid g;
    g.provenance = GridProvenance::file;
    g.x0 = x0;
    g.y0 = y0;
    if (!std::getline(in, line) || line.empty() || line[0] != '#')
        throw InputError("potential file: missing '# nx ny spacing' header");
    {
        std::istringstream hs(line.substr(1));
        if (!(hs >> g.nx >> g.ny >> g.spacing))
            throw InputError("potential file: malformed header '" + line + "'");
    }
    if (g.nx < 3 || g.ny < 3 || !(g.spacing > 0.0))
        throw InputError("potential file: bad grid dimensions in header");
    g.values.resize(g.nx, g.ny);
    for (int i = 0; i < g.nx; ++i) {
        if (!std::getline(in, line))
            throw InputError("potential file: expected " + std::to_string(g.nx) + " rows, got " +
                             std::to_string(i));
        std::istringstream ls(line);
        for (int j = 0; j < g.ny; ++j) {
            std::string tok;
            if (!(ls >> tok))
                throw InputError("potential file: row " + std::to_string(i + 1) + " is short");
            g.values(i, j) = util::parse_double(tok);
        }
        std::string extra;
        if (ls >> extra)
            throw InputError("potential file: row " + std::to_string(i + 1) + " is long");
    }
    g.validate();
    return g;
}

namespace {

GateElement gate(std::string name, Rect r, double off, double on, GateRole role) {
    return GateElement{std::move(name), r, off, on, role};
}

}  // namespace

DeviceLayout channel_reference_layout() {
    // Rails 30 nm wide with centers 90 nm apart; each dot has an upper and a
    // lower plunger. At v=0 the left electron is pulled up and the right one
    // down, at v=1 both sit level and face each other across the gap.
    DeviceLayout L;
    L.domain = {-160.0, 160.0, -160.0, 160.0};
    const double rail_v = 30.0;
    const double attract = 40.0, repel = -100.0, on = -30.0;
    for (int s : {-1, 1}) {
        double c = 45.0 * s;
        std::string side = s < 0 ? "left" : "right";
        L.gates.push_back(gate(side + "_rail", {c - 15.0, c + 15.0, -60.0, 60.0}, rail_v, rail_v,
                               GateRole::channel));
    }
    for (int s : {-1, 1}) {
        double c = 45.0 * s;
        std::string side = s < 0 ? "left" : "right";
        Rect top{c - 30.0, c + 30.0, 70.0, 130.0};
        Rect bottom{c - 30.0, c + 30.0, -130.0, -70.0};
        double top_off = s < 0 ? attract : repel;
        double bottom_off = s < 0 ? repel : attract;
        L.gates.push_back(gate(side + "_top", top, top_off, on, GateRole::plunger));
        L.gates.push_back(gate(side + "_bottom", bottom, bottom_off, on, GateRole::plunger));
    }
    return L;
}

DeviceLayout barrier_reference_layout() {
    DeviceLayout L;
    L.domain = {-200.0, 200.0, -120.0, 120.0};
    L.gates.push_back(gate("rail", {-150.0, 150.0, -15.0, 15.0}, 30.0, 30.0, GateRole::channel));
    // pulsed: raising it lowers the inter-dot barrier
    L.gates.push_back(gate("center", {-15.0, 15.0, -60.0, 60.0}, -50.0, -10.0, GateRole::plunger));
    L.gates.push_back(gate("left_end", {-165.0, -105.0, -45.0, 45.0}, -40.0, -40.0, GateRole::barrier));
    L.gates.push_back(gate("right_end", {105.0, 165.0, -45.0, 45.0}, -40.0, -40.0, GateRole::barrier));
    return L;
}

bool is_builtin_layout(std::string_view name) {
    return name == "channel-reference" || name == "barrier-reference";
}

DeviceLayout builtin_layout(std::string_view name) {
    if (name == "channel-reference") return channel_reference_layout();
    if (name == "barrier-reference") return barrier_reference_layout();
    throw ConfigError("no built-in layout named '" + std::string(name) + "'");
}

}  // namespace qdsim
