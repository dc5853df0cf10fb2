#pragma once

#include "qdsim/device.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <string>
#include <vector>

namespace qdsim {

/// -(hbar^2/2m*) * 5-point Laplacian + diag(V) on the interior nodes of a
/// PotentialGrid; boundary nodes carry the Dirichlet condition psi = 0.
/// Interior node (i, j), 1 <= i <= nx-2, is stored at (i-1) + (nx-2)*(j-1).
struct DiscretizedHamiltonian {
    int nx = 0;  // full grid, boundary included
    int ny = 0;
    double spacing = 0.0;
    double x0 = 0.0;
    double y0 = 0.0;
    double kinetic = 0.0;       // hbar^2/(2m*), meV nm^2
    Eigen::VectorXd potential;  // interior diagonal, meV
    Eigen::SparseMatrix<double> matrix;
    std::vector<std::string> warnings;

    int mx() const { return nx - 2; }
    int my() const { return ny - 2; }
    int size() const { return mx() * my(); }
    double hopping() const { return kinetic / (spacing * spacing); }
};

DiscretizedHamiltonian build_hamiltonian(const PotentialGrid& grid, const MaterialParams& material);

/// Same operator with `extra` (interior, meV) added to the diagonal.
DiscretizedHamiltonian with_added_potential(const DiscretizedHamiltonian& h,
                                            const Eigen::VectorXd& extra);

/// Lowest eigenpairs. Wavefunctions are stored on interior nodes with
/// sum |psi|^2 spacing^2 = 1.
struct OrbitalSet {
    int nx = 0;
    int ny = 0;
    double spacing = 0.0;
    double x0 = 0.0;
    double y0 = 0.0;
    Eigen::VectorXd energies;      // meV, ascending
    Eigen::MatrixXd wavefunctions;  // interior nodes x count

    int count() const { return static_cast<int>(energies.size()); }
    /// Orbital i on the full node grid (zeros on the boundary), nx x ny.
    Eigen::MatrixXd on_grid(int i) const;
};

struct EigenOptions {
    double tol = 1e-10;
    long max_applications = 100000;
};

/// Block shift-and-invert Krylov iteration. The start block is a fixed set of
/// box eigenmodes unless `start` (interior rows) is supplied. Residuals satisfy
/// |H x - E x| <= tol * max(|E|, 1) for unit-norm x.
OrbitalSet lowest_eigenpairs(const DiscretizedHamiltonian& h, int k, const EigenOptions& opts = {},
                             const Eigen::MatrixXd* start = nullptr);

/// max_ij |<psi_i|psi_j> - delta_ij|
double check_orthonormality(const OrbitalSet& orbitals);

/// "# orbital i energy_meV E" header then the nx x ny node matrix.
std::string format_orbital_text(const OrbitalSet& orbitals, int i);

}  // namespace qdsim
