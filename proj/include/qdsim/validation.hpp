#pragma once

#include "qdsim/coulomb.hpp"
#include "qdsim/device.hpp"
#include "qdsim/two_electron.hpp"

#include <string>
#include <vector>

namespace qdsim::validation {

/// Adaptive quadrature of the pinned-surface boundary integral
/// phi = (V d / 2 pi) \int_gate dx' dy' / (|r - r'|^2 + d^2)^{3/2}; returns -phi.
double gate_potential_quadrature(const GateElement& gate, double voltage, Point2 point, double depth);

/// Closed-form lowest k eigenvalues of the 5-point stencil in an mx x my box.
std::vector<double> box_spectrum(int mx, int my, double hopping, int k);

/// Normalized Gaussians psi = exp(-|r - c|^2 / (2 w^2)) / (sqrt(pi) w) at
/// (-separation/2, 0) and (+separation/2, 0) sampled on a grid.
OrbitalSet gaussian_pair(double width, double separation, double spacing, const Rect& domain);

/// (00|11) of the Gaussian pair by one-dimensional radial quadrature.
double gaussian_pair_coulomb(double width, double separation, const CoulombKernel& kernel);

/// Quartic double well on a 26 x 26 node grid (24 x 24 interior), the
/// regression grid for the exact two-electron comparison.
PotentialGrid oracle_double_well(double effective_mass = 0.19);

/// Deep, well separated quartic double well where two-site tight binding holds.
PotentialGrid tight_binding_well(double effective_mass = 0.19);

/// Merged harmonic well, hbar w = 3 meV, 161 x 161 nodes over 240 nm.
PotentialGrid harmonic_reference_well(int nodes = 161, double effective_mass = 0.19);

struct TightBinding {
    double t = 0.0;  // meV, half the tunnel splitting
    double u = 0.0;  // meV, on-site Coulomb energy of a dot orbital
};

/// t from the two lowest levels, U from (psi0 + psi1)/sqrt2.
TightBinding tight_binding_parameters(const PotentialGrid& grid, const MaterialParams& material);

/// log2 of successive ground-state error ratios for the harmonic well at
/// 41, 81 and 161 nodes.
double grid_convergence_order(double effective_mass = 0.19);

struct Row {
    std::string name;
    double value = 0.0;
    double reference = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    std::string detail;
};

/// Oracle table shared by `sim validate` and the test suite.
std::vector<Row> run_suite();

}  // namespace qdsim::validation
