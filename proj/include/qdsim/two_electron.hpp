#pragma once

#include "qdsim/coulomb.hpp"
#include "qdsim/device.hpp"
#include "qdsim/eigensolver.hpp"

#include <Eigen/Core>

#include <string>
#include <utility>
#include <vector>

namespace qdsim {

enum class SpinSector { singlet, triplet };

/// Spatially symmetric (singlet, a <= b) or antisymmetric (triplet, a < b)
/// normalized pair functions and the Hamiltonian in that basis.
struct CISector {
    SpinSector sector = SpinSector::singlet;
    std::vector<std::pair<int, int>> basis;
    Eigen::MatrixXd hamiltonian;  // meV
};

struct TwoElectronSpectrum {
    Eigen::VectorXd singlet;  // meV ascending
    Eigen::VectorXd triplet;
    double j_uev = 0.0;       // (E_T0 - E_S0) in ueV
    std::vector<std::string> warnings;
};

/// Negative J down to this value is accepted as round-off.
inline constexpr double kSingletSlackUeV = 1e-4;

/// one_body(a, b) = <psi_a|h|psi_b>; diagonal for eigenorbitals.
std::pair<CISector, CISector> build_ci_sectors(const Eigen::MatrixXd& one_body,
                                               const CoulombTensor& coulomb);
std::pair<CISector, CISector> build_ci_sectors(const OrbitalSet& orbitals,
                                               const CoulombTensor& coulomb);

/// Dense symmetric eigenvalues, ascending.
Eigen::VectorXd diagonalize_ci(const CISector& sector);

struct HartreeFockOptions {
    int max_iter = 200;
    double mix = 0.5;     // weight of the new density per step
    double tol = 1e-8;    // meV, change of the two mean-field ground energies
    EigenOptions eig;
};

struct HartreeFockResult {
    OrbitalSet orbitals;  // orthonormal, energies of the averaged mean-field operator
    int iterations = 0;
    double energy_a = 0.0;  // mean-field ground energies of the two electrons
    double energy_b = 0.0;
};

/// Dot-localized mean-field basis. Seeds are (psi0 +- psi1)/sqrt2 of the input
/// set; each electron is relaxed in V plus the Hartree potential of the other
/// one's density. The returned basis spans the lowest n states of both
/// mean-field operators (n = orbitals.count()), rotated to eigenvectors of the
/// operator with the averaged Hartree term.
HartreeFockResult hartree_fock_refine(const DiscretizedHamiltonian& h, const OrbitalSet& orbitals,
                                      const HartreeEngine& engine, const HartreeFockOptions& opts = {});

enum class CIBasis { localized, molecular };

std::string_view to_string(CIBasis b);

struct SolverSettings {
    double grid_spacing = 10.0;  // nm
    int basis_size = 12;
    CIBasis basis = CIBasis::localized;
    double eig_tol = 1e-10;
    int hf_max_iter = 200;
    double hf_mix = 0.5;
    double interaction_scale = 1.0;

    void validate() const;
    bool operator==(const SolverSettings&) const = default;
};

TwoElectronSpectrum spectrum_from(const Eigen::MatrixXd& one_body, const CoulombTensor& coulomb);

/// Full pipeline for one potential: orbitals, optional mean-field basis,
/// Coulomb tensor, both CI sectors, J. On grids up to 4096 interior nodes the
/// singlet sector also gets |Psi_T| of the CI triplet ground state (its part
/// outside the configuration span), which keeps the truncated CI from ordering
/// the triplet below the singlet.
TwoElectronSpectrum exchange_splitting(const PotentialGrid& grid, const MaterialParams& material,
                                       int n, const SolverSettings& settings = {});

struct BasisConvergenceRow {
    int n = 0;
    double j_uev = 0.0;
    double singlet = 0.0;  // meV
    double triplet = 0.0;  // meV
};

/// exchange_splitting repeated for each basis size, a diagnostic of CI truncation.
std::vector<BasisConvergenceRow> basis_convergence(const PotentialGrid& grid, const MaterialParams& material,
                                                   const SolverSettings& settings,
                                                   const std::vector<int>& sizes = {4, 6, 8, 10, 12});

struct BruteForceOptions {
    double interaction_scale = 1.0;
    int states = 1;                      // eigenvalues reported per sector
    std::size_t memory_budget = 1u << 30;  // bytes
    int max_steps = 4000;
    double tol = 1e-12;
};

/// Exact two-particle ground states on the product grid, no basis
/// truncation. Intended for coarse grids (<= 1024 interior nodes).
TwoElectronSpectrum brute_force_two_electron(const PotentialGrid& grid,
                                             const MaterialParams& material,
                                             const BruteForceOptions& opts = {});

/// Closed-form two-site Hubbard exchange (U/2)(sqrt(1 + 16 t^2/U^2) - 1).
double hubbard_exchange_closed_form(double t, double u);
/// Same quantity from diagonalizing the two-site Hamiltonian numerically.
double hubbard_exchange_two_site(double t, double u);

}  // namespace qdsim
