#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "qdsim/config.hpp"
#include "qdsim/errors.hpp"

using namespace qdsim;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ParseError parse_failure(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ParseError& e) {
        return e;
    }
    FAIL("config parsed but should not have: " << text);
    return ParseError("", 0, "");
}

int run_sim(const std::string& args) {
    std::string cmd = std::string(QDSIM_SIM_BINARY) + " " + args + " > /dev/null 2>&1";
    int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

const char* kCustom = R"(command: sweep
device:
  domain: {x_min: -100 nm, x_max: 100 nm, y_min: -80 nm, y_max: 80 nm}
  gates:
    - name: rail
      role: channel
      footprint: {x_min: -80 nm, x_max: 80 nm, y_min: -15 nm, y_max: 15 nm}
      voltage: 30 mV
    - name: mid
      role: plunger
      footprint: {x_min: -15 nm, x_max: 15 nm, y_min: -60 nm, y_max: 60 nm}
      voltage_off: -20 mV
      voltage_on: 0.01 V
analysis:
  v_points: 5
)";

}  // namespace

TEST_CASE("minimal config is fully defaulted") {
    RunSpec s = parse_config("device: channel-reference\n");
    CHECK(s.command == Command::sweep);
    CHECK(s.device_name == "channel-reference");
    CHECK(s.layout == channel_reference_layout());
    CHECK(s.solver == SolverSettings{});
    CHECK(s.analysis == AnalysisSettings{});
    CHECK(s.optimize == OptimizeSettings{});
    CHECK(s.output == "out");
    CHECK(s.threads == 0);
    CHECK_NOTHROW(s.validate());
}

TEST_CASE("units are converted") {
    RunSpec s = parse_config(kCustom);
    CHECK(s.device_name.empty());
    REQUIRE(s.layout.gates.size() == 2);
    CHECK(s.layout.gates[1].voltage_on == doctest::Approx(10.0));
    CHECK(s.layout.gates[0].role == GateRole::channel);
    RunSpec t = parse_config("device: barrier-reference\nsolver: {grid_spacing: 0.01 um}\noptimize: {j_min: 2 meV}\n");
    CHECK(t.solver.grid_spacing == doctest::Approx(10.0));
    CHECK(t.optimize.j_min == doctest::Approx(2000.0));
}

TEST_CASE("unitless voltage is rejected with line and key") {
    std::string text = R"(device:
  domain: {x_min: -100 nm, x_max: 100 nm, y_min: -80 nm, y_max: 80 nm}
  gates:
    - name: g
      role: plunger
      footprint: {x_min: -10 nm, x_max: 10 nm, y_min: -10 nm, y_max: 10 nm}
      voltage: 100
)";
    ParseError e = parse_failure(text);
    CHECK(std::string(e.what()).find("missing unit") != std::string::npos);
    CHECK(e.line() == 7);
    CHECK(e.key().find("voltage") != std::string::npos);
}

TEST_CASE("strict parsing rejects bad documents") {
    for (const char* bad : {
             "device: channel-reference\ncolour: blue\n",                 // unknown key
             "device: channel-reference\nsolver: {grid_size: 5 nm}\n",    // unknown nested key
             "device: nowhere\n",                                         // unknown built-in
             "command: plot\ndevice: channel-reference\n",                // unknown command
             "command: sweep\n",                                          // no device
             "device: channel-reference\nsolver: {grid_spacing: 10 mV}\n",  // wrong dimension
             "device: channel-reference\nsolver: {grid_spacing: 7 nm}\n",   // cells do not tile
             "device: channel-reference\nsolver: {basis_size: 1}\n",
             "device: channel-reference\nanalysis: {v_max: 1.5}\n",
             "device: channel-reference\nanalysis: {v_points: 3}\n",
             "device: channel-reference\nanalysis: {delta: abc}\n",
             "device: channel-reference\nanalysis: {delta: 0.01 mV}\n",
             "device: channel-reference\noptimize: {budget: 2}\n",
             "device: channel-reference\noptimize: {parameters: [{name: depth, lower: 1 nm, upper: 2 nm}]}\n",
             "device: channel-reference\noptimize: {parameters: [{name: channel_voltage, lower: 40 mV, upper: 20 mV}]}\n",
             "device: channel-reference\nthreads: -1\n",
             "device: channel-reference\ndevice: barrier-reference\n",   // duplicate key
             "device: [unclosed\n",
             "",
         }) {
        CAPTURE(bad);
        CHECK_THROWS_AS(parse_config(bad), ParseError);
    }
}

TEST_CASE("channel gates cannot swing") {
    std::string text = kCustom;
    text.replace(text.find("voltage: 30 mV"), 14, "voltage_off: 30 mV\n      voltage_on: 20 mV");
    CHECK_THROWS_AS(parse_config(text), ParseError);
}

TEST_CASE("serialize round trip") {
    for (const std::string& text : {std::string(kCustom), std::string("device: channel-reference\ncommand: optimize\n"),
                                    std::string("device: barrier-reference\nanalysis: {operating_point: 0.7}\n")}) {
        RunSpec a = parse_config(text);
        std::string once = serialize(a);
        RunSpec b = parse_config(once);
        CHECK(a == b);
        CHECK(serialize(b) == once);
        CHECK(spec_fingerprint(a) == spec_fingerprint(b));
    }
}

TEST_CASE("fingerprint ignores output location and threads only") {
    RunSpec a = parse_config("device: channel-reference\noutput: here\nthreads: 2\n");
    RunSpec b = parse_config("device: channel-reference\noutput: there\nthreads: 4\n");
    RunSpec c = parse_config("device: channel-reference\nsolver: {basis_size: 6}\n");
    CHECK(spec_fingerprint(a) == spec_fingerprint(b));
    CHECK(spec_fingerprint(a) != spec_fingerprint(c));
    CHECK(spec_fingerprint(a).size() == 64);
}

TEST_CASE("every shipped example config parses") {
    int seen = 0;
    for (const auto& e : fs::directory_iterator(QDSIM_CONFIG_DIR)) {
        if (e.path().extension() != ".yaml") continue;
        CAPTURE(e.path().string());
        CHECK_NOTHROW(parse_config(slurp(e.path())).validate());
        ++seen;
    }
    CHECK(seen >= 5);
}

TEST_CASE("command line exit codes for bad input") {
    fs::path dir = fs::temp_directory_path() / "qdsim_cli_neg";
    fs::create_directories(dir);
    auto write = [&](const char* name, const std::string& text) {
        std::ofstream(dir / name) << text;
        return (dir / name).string();
    };
    std::string unitless = write("unitless.yaml", "device:\n  domain: {x_min: -100, x_max: 100 nm, y_min: -80 nm, y_max: 80 nm}\n");
    std::string unknown = write("unknown.yaml", "device: channel-reference\nfoo: 1\n");
    std::string good = write("good.yaml", "device: channel-reference\n");
    CHECK(run_sim("sweep --config " + unitless) == 2);
    CHECK(run_sim("sweep --config " + unknown) == 2);
    CHECK(run_sim("sweep --config " + (dir / "missing.yaml").string()) == 2);
    CHECK(run_sim("frobnicate --config " + good) == 2);
    CHECK(run_sim("sweep") == 2);
    CHECK(run_sim("sweep --config " + good + " --v-points 2") == 2);
    CHECK(run_sim("sweep --config " + good + " --delta -1") == 2);
    CHECK(run_sim("sweep --config " + good + " --threads x") == 2);
    fs::remove_all(dir);
}
