#include "qdsim/config.hpp"

#include "qdsim/errors.hpp"
#include "util.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>

namespace qdsim {

std::string_view to_string(Command c) {
    switch (c) {
        case Command::sweep: return "sweep";
        case Command::analyze: return "analyze";
        case Command::optimize: return "optimize";
        case Command::validate: return "validate";
        case Command::export_potential: return "export-potential";
    }
    return "?";
}

Command command_from_string(std::string_view s) {
    for (Command c : {Command::sweep, Command::analyze, Command::optimize, Command::validate,
                      Command::export_potential})
        if (to_string(c) == s) return c;
    throw ConfigError("unknown command '" + std::string(s) + "'");
}

namespace {

enum class Dim { length, voltage, energy_ueV };

struct UnitDef {
    const char* name;
    Dim dim;
    double factor;  // to nm, mV or ueV
};

constexpr UnitDef kUnits[] = {
    {"nm", Dim::length, 1.0},      {"um", Dim::length, 1e3},       {"mV", Dim::voltage, 1.0},
    {"V", Dim::voltage, 1e3},      {"uV", Dim::voltage, 1e-3},     {"ueV", Dim::energy_ueV, 1.0},
    {"meV", Dim::energy_ueV, 1e3}, {"eV", Dim::energy_ueV, 1e6},
};

const char* dim_hint(Dim d) {
    switch (d) {
        case Dim::length: return "nm";
        case Dim::voltage: return "mV";
        case Dim::energy_ueV: return "ueV";
    }
    return "";
}

int line_of(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : 0; }

[[noreturn]] void fail(const YAML::Node& n, const std::string& key, const std::string& what) {
    throw ParseError(what, line_of(n), key);
}

// Mapping reader that refuses keys nobody asked for.
class Section {
public:
    Section(const YAML::Node& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.IsMap()) fail(node_, path_, "expected a mapping");
        for (auto it = node_.begin(); it != node_.end(); ++it) {
            std::string k = it->first.as<std::string>();
            if (!seen_.insert(k).second) fail(it->first, key(k), "duplicate key");
        }
    }

    void allow(std::initializer_list<const char*> keys) const {
        for (auto it = node_.begin(); it != node_.end(); ++it) {
            std::string k = it->first.as<std::string>();
            if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; }))
                fail(it->first, key(k), "unknown key");
        }
    }

    bool has(const char* k) const { return seen_.count(k) > 0; }
    YAML::Node get(const char* k) const { return node_[k]; }
    std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
    const YAML::Node& node() const { return node_; }

    std::string text(const char* k) const {
        YAML::Node n = node_[k];
        if (!n.IsScalar()) fail(n, key(k), "expected a scalar");
        return n.Scalar();
    }

    double number(const char* k) const {
        YAML::Node n = node_[k];
        std::string s = text(k);
        try {
            double v = util::parse_double(s);
            if (!std::isfinite(v)) fail(n, key(k), "value must be finite");
            return v;
        } catch (const InputError&) {
            // a unit where none belongs is still a parse failure
            fail(n, key(k), "expected a plain number, got '" + s + "'");
        }
    }

    int integer(const char* k) const {
        YAML::Node n = node_[k];
        std::string s = text(k);
        int v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size()) fail(n, key(k), "expected an integer, got '" + s + "'");
        return v;
    }

    double quantity(const char* k, Dim d) const {
        YAML::Node n = node_[k];
        std::string s = text(k);
        const char* b = s.data();
        const char* e = b + s.size();
        while (b < e && std::isspace(static_cast<unsigned char>(*b))) ++b;
        if (b < e && *b == '+') ++b;
        double v = 0.0;
        auto [p, ec] = std::from_chars(b, e, v);
        if (ec != std::errc()) fail(n, key(k), "expected '<number> " + std::string(dim_hint(d)) + "', got '" + s + "'");
        std::string unit(p, e);
        unit.erase(0, unit.find_first_not_of(" \t"));
        unit.erase(unit.find_last_not_of(" \t") + 1);
        if (unit.empty()) fail(n, key(k), "missing unit (write e.g. '" + s + " " + dim_hint(d) + "')");
        for (const auto& u : kUnits)
            if (unit == u.name) {
                if (u.dim != d) fail(n, key(k), "unit '" + unit + "' has the wrong dimension, expected " + dim_hint(d));
                if (!std::isfinite(v)) fail(n, key(k), "value must be finite");
                return v * u.factor;
            }
        fail(n, key(k), "unknown unit '" + unit + "'");
    }

private:
    YAML::Node node_;
    std::string path_;
    std::set<std::string> seen_;
};

void require(bool ok, const Section& s, const char* k, const std::string& what) {
    if (!ok) fail(s.get(k), s.key(k), what);
}

Rect read_rect(const Section& parent, const char* k) {
    Section s(parent.get(k), parent.key(k));
    s.allow({"x_min", "x_max", "y_min", "y_max"});
    for (const char* c : {"x_min", "x_max", "y_min", "y_max"})
        if (!s.has(c)) fail(s.node(), s.key(c), "missing key");
    Rect r{s.quantity("x_min", Dim::length), s.quantity("x_max", Dim::length), s.quantity("y_min", Dim::length),
           s.quantity("y_max", Dim::length)};
    if (!r.valid()) fail(parent.get(k), parent.key(k), "rectangle needs x_min < x_max and y_min < y_max");
    return r;
}

bool valid_name(const std::string& n) {
    return !n.empty() && std::all_of(n.begin(), n.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
    });
}

DeviceLayout read_layout(const YAML::Node& node) {
    Section s(node, "device");
    s.allow({"domain", "background_offset", "material", "gates"});
    if (!s.has("domain")) fail(node, "device.domain", "missing key");
    DeviceLayout L;
    L.domain = read_rect(s, "domain");
    if (s.has("background_offset")) L.background_offset = s.quantity("background_offset", Dim::voltage);
    if (s.has("material")) {
        Section m(s.get("material"), "device.material");
        m.allow({"effective_mass", "relative_permittivity", "dot_depth", "softening_length"});
        if (m.has("effective_mass")) L.material.effective_mass = m.number("effective_mass");
        if (m.has("relative_permittivity")) L.material.relative_permittivity = m.number("relative_permittivity");
        if (m.has("dot_depth")) L.material.dot_depth = m.quantity("dot_depth", Dim::length);
        if (m.has("softening_length")) L.material.softening_length = m.quantity("softening_length", Dim::length);
        require(L.material.effective_mass > 0.0, m, "effective_mass", "must be positive");
        require(L.material.relative_permittivity >= 1.0, m, "relative_permittivity", "must be >= 1");
        require(L.material.dot_depth > 0.0, m, "dot_depth", "must be positive");
        require(L.material.softening_length > 0.0, m, "softening_length", "must be positive");
    }
    if (s.has("gates")) {
        YAML::Node gs = s.get("gates");
        if (!gs.IsSequence()) fail(gs, "device.gates", "expected a list");
        std::set<std::string> names;
        for (std::size_t i = 0; i < gs.size(); ++i) {
            Section g(gs[i], "device.gates[" + std::to_string(i) + "]");
            g.allow({"name", "role", "footprint", "voltage", "voltage_off", "voltage_on"});
            GateElement e;
            if (!g.has("name")) fail(gs[i], g.key("name"), "missing key");
            e.name = g.text("name");
            if (!valid_name(e.name)) fail(g.get("name"), g.key("name"), "names use letters, digits, '_' and '-'");
            if (!names.insert(e.name).second) fail(g.get("name"), g.key("name"), "duplicate gate name");
            if (!g.has("role")) fail(gs[i], g.key("role"), "missing key");
            try {
                e.role = gate_role_from_string(g.text("role"));
            } catch (const InputError&) {
                fail(g.get("role"), g.key("role"), "role must be plunger, channel or barrier");
            }
            if (!g.has("footprint")) fail(gs[i], g.key("footprint"), "missing key");
            e.footprint = read_rect(g, "footprint");
            if (g.has("voltage")) {
                if (g.has("voltage_off") || g.has("voltage_on"))
                    fail(g.get("voltage"), g.key("voltage"), "give either voltage or voltage_off/voltage_on");
                e.voltage_off = e.voltage_on = g.quantity("voltage", Dim::voltage);
            } else {
                if (!g.has("voltage_off")) fail(gs[i], g.key("voltage_off"), "missing key");
                e.voltage_off = g.quantity("voltage_off", Dim::voltage);
                e.voltage_on = g.has("voltage_on") ? g.quantity("voltage_on", Dim::voltage) : e.voltage_off;
            }
            if (e.role == GateRole::channel && e.voltage_on != e.voltage_off)
                fail(gs[i], g.key("voltage_on"), "channel gates hold a fixed voltage");
            L.gates.push_back(std::move(e));
        }
    }
    try {
        L.validate();
    } catch (const InputError& e) {
        fail(node, "device", e.what());
    }
    return L;
}

}  // namespace

RunSpec parse_config(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ParseError(e.msg, e.mark.line >= 0 ? e.mark.line + 1 : 0, "");
    }
    if (!root || root.IsNull()) throw ParseError("empty configuration", 0, "");
    Section top(root, "");
    top.allow({"command", "device", "solver", "analysis", "optimize", "export", "output", "threads"});

    RunSpec spec;
    if (top.has("command")) {
        try {
            spec.command = command_from_string(top.text("command"));
        } catch (const ConfigError&) {
            fail(top.get("command"), "command", "unknown command '" + top.text("command") + "'");
        }
    }
    if (!top.has("device")) throw ParseError("missing key", 0, "device");
    YAML::Node dev = top.get("device");
    if (dev.IsScalar()) {
        spec.device_name = dev.Scalar();
        if (!is_builtin_layout(spec.device_name))
            fail(dev, "device", "no built-in device '" + spec.device_name +
                                    "' (have channel-reference, barrier-reference)");
        spec.layout = builtin_layout(spec.device_name);
    } else {
        spec.layout = read_layout(dev);
    }

    if (top.has("solver")) {
        Section s(top.get("solver"), "solver");
        s.allow({"grid_spacing", "basis_size", "basis", "eig_tol", "hf_max_iter", "hf_mix", "interaction_scale"});
        SolverSettings& o = spec.solver;
        if (s.has("grid_spacing")) o.grid_spacing = s.quantity("grid_spacing", Dim::length);
        require(o.grid_spacing > 0.0 && o.grid_spacing <= 50.0, s, "grid_spacing", "must lie in (0, 50] nm");
        if (s.has("basis_size")) o.basis_size = s.integer("basis_size");
        require(o.basis_size >= 2 && o.basis_size <= 40, s, "basis_size", "must lie in [2, 40]");
        if (s.has("basis")) {
            std::string b = s.text("basis");
            if (b == "localized") o.basis = CIBasis::localized;
            else if (b == "molecular") o.basis = CIBasis::molecular;
            else fail(s.get("basis"), s.key("basis"), "basis must be localized or molecular");
        }
        if (s.has("eig_tol")) o.eig_tol = s.number("eig_tol");
        require(o.eig_tol > 0.0 && o.eig_tol < 1e-3, s, "eig_tol", "must lie in (0, 1e-3)");
        if (s.has("hf_max_iter")) o.hf_max_iter = s.integer("hf_max_iter");
        require(o.hf_max_iter >= 1 && o.hf_max_iter <= 100000, s, "hf_max_iter", "must lie in [1, 100000]");
        if (s.has("hf_mix")) o.hf_mix = s.number("hf_mix");
        require(o.hf_mix > 0.0 && o.hf_mix <= 1.0, s, "hf_mix", "must lie in (0, 1]");
        if (s.has("interaction_scale")) o.interaction_scale = s.number("interaction_scale");
        require(o.interaction_scale >= 0.0, s, "interaction_scale", "must be non-negative");
    }
    try {
        (void)grid_shape(spec.layout.domain, spec.solver.grid_spacing);
    } catch (const ConfigError& e) {
        throw ParseError(e.what(), top.has("solver") ? line_of(top.get("solver")) : 0, "solver.grid_spacing");
    }

    if (top.has("analysis")) {
        Section s(top.get("analysis"), "analysis");
        s.allow({"delta", "thresholds", "v_min", "v_max", "v_points", "operating_point"});
        AnalysisSettings& a = spec.analysis;
        if (s.has("delta")) a.delta = s.number("delta");
        require(a.delta >= 0.0 && a.delta < 0.5, s, "delta", "must lie in [0, 0.5)");
        if (s.has("thresholds")) {
            YAML::Node t = s.get("thresholds");
            if (!t.IsSequence() || t.size() == 0) fail(t, "analysis.thresholds", "expected a non-empty list");
            a.thresholds.clear();
            for (std::size_t i = 0; i < t.size(); ++i) {
                double v = 0.0;
                try {
                    v = util::parse_double(t[i].as<std::string>());
                } catch (const std::exception&) {
                    fail(t[i], "analysis.thresholds", "expected numbers");
                }
                if (!(v > 0.0)) fail(t[i], "analysis.thresholds", "thresholds must be positive");
                a.thresholds.push_back(v);
            }
        }
        if (s.has("v_min")) a.v_min = s.number("v_min");
        if (s.has("v_max")) a.v_max = s.number("v_max");
        require(a.v_min >= 0.0 && a.v_min < a.v_max, s, s.has("v_min") ? "v_min" : "v_max", "need 0 <= v_min < v_max");
        require(a.v_max <= 1.0 + kControlOvershoot, s, "v_max", "must not exceed 1.1");
        if (s.has("v_points")) a.v_points = s.integer("v_points");
        require(a.v_points >= 5 && a.v_points <= 401, s, "v_points", "must lie in [5, 401]");
        if (s.has("operating_point")) {
            if (s.text("operating_point") != "auto") {
                double v = s.number("operating_point");
                require(v > a.v_min && v < a.v_max, s, "operating_point", "must lie strictly inside the v range");
                a.operating_point = v;
            }
        }
    }

    if (top.has("optimize")) {
        Section s(top.get("optimize"), "optimize");
        s.allow({"budget", "j_min", "parameters"});
        OptimizeSettings& o = spec.optimize;
        if (s.has("j_min")) o.j_min = s.quantity("j_min", Dim::energy_ueV);
        require(o.j_min > 0.0, s, "j_min", "must be positive");
        if (s.has("parameters")) {
            YAML::Node ps = s.get("parameters");
            if (!ps.IsSequence() || ps.size() == 0) fail(ps, "optimize.parameters", "expected a non-empty list");
            o.parameters.clear();
            std::set<std::string> seen;
            for (std::size_t i = 0; i < ps.size(); ++i) {
                Section p(ps[i], "optimize.parameters[" + std::to_string(i) + "]");
                p.allow({"name", "lower", "upper"});
                for (const char* k : {"name", "lower", "upper"})
                    if (!p.has(k)) fail(ps[i], p.key(k), "missing key");
                DesignParameter d;
                d.name = p.text("name");
                if (!is_design_parameter(d.name))
                    fail(p.get("name"), p.key("name"), "unknown parameter (channel_voltage, plunger_swing, channel_width)");
                if (!seen.insert(d.name).second) fail(p.get("name"), p.key("name"), "parameter listed twice");
                Dim dim = design_parameter_unit(d.name) == "nm" ? Dim::length : Dim::voltage;
                d.lower = p.quantity("lower", dim);
                d.upper = p.quantity("upper", dim);
                require(d.lower < d.upper, p, "upper", "need lower < upper");
                if (d.name != "channel_voltage") require(d.lower >= 0.0, p, "lower", "must be non-negative");
                o.parameters.push_back(d);
            }
        }
        if (s.has("budget")) o.budget = s.integer("budget");
        require(o.budget >= static_cast<int>(o.parameters.size()) + 2 && o.budget <= 10000, s,
                s.has("budget") ? "budget" : "parameters", "budget must lie in [dimension + 2, 10000]");
    }

    if (top.has("export")) {
        Section s(top.get("export"), "export");
        s.allow({"v", "orbitals"});
        if (s.has("v")) spec.export_settings.v = s.number("v");
        require(spec.export_settings.v >= 0.0 && spec.export_settings.v <= 1.0 + kControlOvershoot, s, "v",
                "must lie in [0, 1.1]");
        if (s.has("orbitals")) spec.export_settings.orbitals = s.integer("orbitals");
        require(spec.export_settings.orbitals >= 0 && spec.export_settings.orbitals <= 40, s, "orbitals",
                "must lie in [0, 40]");
    }
    if (top.has("output")) {
        spec.output = top.text("output");
        if (spec.output.empty()) fail(top.get("output"), "output", "must not be empty");
    }
    if (top.has("threads")) {
        spec.threads = top.integer("threads");
        require(spec.threads >= 0 && spec.threads <= 1024, top, "threads", "must lie in [0, 1024]");
    }
    return spec;
}

void RunSpec::validate() const {
    layout.validate();
    solver.validate();
    (void)grid_shape(layout.domain, solver.grid_spacing);
    if (!device_name.empty() && !is_builtin_layout(device_name)) throw ConfigError("unknown built-in device");
    if (!(analysis.delta >= 0.0 && analysis.delta < 0.5)) throw ConfigError("delta must lie in [0, 0.5)");
    if (!(analysis.v_min >= 0.0 && analysis.v_min < analysis.v_max && analysis.v_max <= 1.0 + kControlOvershoot))
        throw ConfigError("v range must satisfy 0 <= v_min < v_max <= 1.1");
    if (analysis.v_points < 5) throw ConfigError("at least five sweep points");
    for (double t : analysis.thresholds)
        if (!(t > 0.0)) throw ConfigError("thresholds must be positive");
    if (command == Command::optimize) {
        DesignProblem p{layout, optimize.parameters, optimize.j_min, optimize.budget, analysis.delta, solver, 1};
        try {
            p.validate();
        } catch (const InputError& e) {
            throw ConfigError(e.what());
        }
    }
    if (threads < 0) throw ConfigError("threads must be non-negative");
}

namespace {

std::string q(double v, const char* unit) { return "\"" + util::fmt17(v) + " " + unit + "\""; }

std::string rect_yaml(const Rect& r) {
    return "{x_min: " + q(r.x_min, "nm") + ", x_max: " + q(r.x_max, "nm") + ", y_min: " + q(r.y_min, "nm") +
           ", y_max: " + q(r.y_max, "nm") + "}";
}

}  // namespace

std::string serialize(const RunSpec& s) {
    using util::fmt17;
    std::string o;
    o += "command: " + std::string(to_string(s.command)) + "\n";
    if (!s.device_name.empty()) {
        o += "device: " + s.device_name + "\n";
    } else {
        const DeviceLayout& L = s.layout;
        o += "device:\n";
        o += "  domain: " + rect_yaml(L.domain) + "\n";
        o += "  background_offset: " + q(L.background_offset, "mV") + "\n";
        o += "  material:\n";
        o += "    effective_mass: " + fmt17(L.material.effective_mass) + "\n";
        o += "    relative_permittivity: " + fmt17(L.material.relative_permittivity) + "\n";
        o += "    dot_depth: " + q(L.material.dot_depth, "nm") + "\n";
        o += "    softening_length: " + q(L.material.softening_length, "nm") + "\n";
        o += "  gates:\n";
        if (L.gates.empty()) o.replace(o.size() - 1, 1, " []\n");
        for (const auto& g : L.gates) {
            o += "    - name: " + g.name + "\n";
            o += "      role: " + std::string(to_string(g.role)) + "\n";
            o += "      footprint: " + rect_yaml(g.footprint) + "\n";
            o += "      voltage_off: " + q(g.voltage_off, "mV") + "\n";
            o += "      voltage_on: " + q(g.voltage_on, "mV") + "\n";
        }
    }
    const SolverSettings& v = s.solver;
    o += "solver:\n";
    o += "  grid_spacing: " + q(v.grid_spacing, "nm") + "\n";
    o += "  basis_size: " + std::to_string(v.basis_size) + "\n";
    o += "  basis: " + std::string(to_string(v.basis)) + "\n";
    o += "  eig_tol: " + fmt17(v.eig_tol) + "\n";
    o += "  hf_max_iter: " + std::to_string(v.hf_max_iter) + "\n";
    o += "  hf_mix: " + fmt17(v.hf_mix) + "\n";
    o += "  interaction_scale: " + fmt17(v.interaction_scale) + "\n";
    const AnalysisSettings& a = s.analysis;
    o += "analysis:\n";
    o += "  delta: " + fmt17(a.delta) + "\n";
    o += "  thresholds: [";
    for (std::size_t i = 0; i < a.thresholds.size(); ++i) o += (i ? ", " : "") + fmt17(a.thresholds[i]);
    o += "]\n";
    o += "  v_min: " + fmt17(a.v_min) + "\n";
    o += "  v_max: " + fmt17(a.v_max) + "\n";
    o += "  v_points: " + std::to_string(a.v_points) + "\n";
    o += "  operating_point: " + (a.operating_point ? fmt17(*a.operating_point) : std::string("auto")) + "\n";
    o += "optimize:\n";
    o += "  budget: " + std::to_string(s.optimize.budget) + "\n";
    o += "  j_min: " + q(s.optimize.j_min, "ueV") + "\n";
    o += "  parameters:\n";
    for (const auto& p : s.optimize.parameters) {
        std::string u(design_parameter_unit(p.name));
        o += "    - {name: " + p.name + ", lower: " + q(p.lower, u.c_str()) + ", upper: " + q(p.upper, u.c_str()) + "}\n";
    }
    o += "export:\n";
    o += "  v: " + fmt17(s.export_settings.v) + "\n";
    o += "  orbitals: " + std::to_string(s.export_settings.orbitals) + "\n";
    o += "output: \"" + s.output + "\"\n";
    o += "threads: " + std::to_string(s.threads) + "\n";
    return o;
}

std::string spec_fingerprint(const RunSpec& spec) {
    RunSpec c = spec;
    c.output = "-";
    c.threads = 0;
    return util::sha256_hex(serialize(c));
}

}  // namespace qdsim
