#include "doctest.h"

#include <cmath>
#include <map>
#include <random>

#include "qdsim/device.hpp"
#include "qdsim/errors.hpp"
#include "qdsim/two_electron.hpp"
#include "qdsim/validation.hpp"

using namespace qdsim;

namespace {

struct Setup {
    PotentialGrid grid;
    DiscretizedHamiltonian h;
    OrbitalSet orbitals;
};

Setup oracle_setup(int n) {
    Setup s;
    s.grid = validation::oracle_double_well();
    s.h = build_hamiltonian(s.grid, MaterialParams{});
    s.orbitals = lowest_eigenpairs(s.h, n);
    return s;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST_CASE("sector sizes") {
    Setup s = oracle_setup(8);
    CoulombTensor c = build_coulomb_tensor(s.orbitals, CoulombKernel::from_material(MaterialParams{}));
    auto [sing, trip] = build_ci_sectors(s.orbitals, c);
    CHECK(sing.basis.size() == 36);
    CHECK(trip.basis.size() == 28);
    CHECK(sing.sector == SpinSector::singlet);
    CHECK(trip.sector == SpinSector::triplet);
    CHECK((sing.hamiltonian - sing.hamiltonian.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((trip.hamiltonian - trip.hamiltonian.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK_THROWS_AS(build_ci_sectors(Eigen::MatrixXd::Zero(3, 3), c), ConfigError);
}

TEST_CASE("non-interacting two orbitals give J = E1 - E0") {
    Setup s = oracle_setup(2);
    CoulombTensor zero(2);
    auto [sing, trip] = build_ci_sectors(s.orbitals, zero);
    Eigen::VectorXd es = diagonalize_ci(sing), et = diagonalize_ci(trip);
    CHECK(es[0] == doctest::Approx(2 * s.orbitals.energies[0]).epsilon(1e-13));
    CHECK(et[0] == doctest::Approx(s.orbitals.energies[0] + s.orbitals.energies[1]).epsilon(1e-13));

    SolverSettings st;
    st.interaction_scale = 0.0;
    for (CIBasis b : {CIBasis::molecular, CIBasis::localized}) {
        st.basis = b;
        double j = exchange_splitting(s.grid, MaterialParams{}, 2, st).j_uev;
        CHECK(rel(j, (s.orbitals.energies[1] - s.orbitals.energies[0]) * 1e3) < 1e-9);
    }
}

TEST_CASE("two-orbital matrices match hand assembly") {
    Setup s = oracle_setup(2);
    CoulombTensor c = build_coulomb_tensor(s.orbitals, CoulombKernel::from_material(MaterialParams{}));
    auto [sing, trip] = build_ci_sectors(s.orbitals, c);
    const double e0 = s.orbitals.energies[0], e1 = s.orbitals.energies[1];
    const double r2 = std::sqrt(2.0);
    std::map<std::pair<int, int>, int> at;
    for (std::size_t i = 0; i < sing.basis.size(); ++i) at[sing.basis[i]] = static_cast<int>(i);
    REQUIRE(at.size() == 3);
    const int a = at[{0, 0}], m = at[{0, 1}], b = at[{1, 1}];
    const auto& H = sing.hamiltonian;
    CHECK(H(a, a) == doctest::Approx(2 * e0 + c(0, 0, 0, 0)).epsilon(1e-12));
    CHECK(H(b, b) == doctest::Approx(2 * e1 + c(1, 1, 1, 1)).epsilon(1e-12));
    CHECK(H(m, m) == doctest::Approx(e0 + e1 + c(0, 1, 0, 1) + c(0, 1, 1, 0)).epsilon(1e-12));
    CHECK(H(a, b) == doctest::Approx(c(0, 0, 1, 1)).epsilon(1e-12));
    CHECK(H(m, a) == doctest::Approx(r2 * c(0, 1, 0, 0)).epsilon(1e-10));
    CHECK(H(m, b) == doctest::Approx(r2 * c(0, 1, 1, 1)).epsilon(1e-10));
    REQUIRE(trip.hamiltonian.rows() == 1);
    CHECK(trip.hamiltonian(0, 0) == doctest::Approx(e0 + e1 + c(0, 1, 0, 1) - c(0, 1, 1, 0)).epsilon(1e-12));
}

TEST_CASE("dense sector diagonalization") {
    CISector one;
    one.hamiltonian = Eigen::MatrixXd::Constant(1, 1, 4.25);
    CHECK(diagonalize_ci(one)[0] == 4.25);
    CISector d;
    d.hamiltonian = Eigen::Vector3d(3.0, -1.0, 2.0).asDiagonal();
    Eigen::VectorXd e = diagonalize_ci(d);
    CHECK(e[0] == -1.0);
    CHECK(e[1] == 2.0);
    CHECK(e[2] == 3.0);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd r(10, 10);
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j <= i; ++j) r(i, j) = r(j, i) = nd(rng);
    CISector rs;
    rs.hamiltonian = r;
    Eigen::VectorXd er = diagonalize_ci(rs);
    CHECK(std::abs(er.sum() - r.trace()) <= 1e-10 * r.cwiseAbs().maxCoeff() * 10);
    for (int i = 1; i < 10; ++i) CHECK(er[i] >= er[i - 1]);
}

TEST_CASE("CI agrees with the exact product-grid solution") {
    PotentialGrid g = validation::oracle_double_well();
    MaterialParams m;
    double exact = brute_force_two_electron(g, m).j_uev;
    SolverSettings s;
    for (int n : {8, 10}) CHECK(rel(exchange_splitting(g, m, n, s).j_uev, exact) < 0.05);
    // merged single well
    PotentialGrid merged = model_double_well(0.0, 10.0, 2.0, 26, 26, {-40, 40, -40, 40}, m.effective_mass);
    double exact_merged = brute_force_two_electron(merged, m).j_uev;
    CHECK(rel(exchange_splitting(merged, m, 6, s).j_uev, exact_merged) < 0.05);
}

TEST_CASE("far separated wells: mean-field basis tracks the exact J") {
    PotentialGrid g = validation::tight_binding_well();
    MaterialParams m;
    double exact = brute_force_two_electron(g, m).j_uev;
    double j = exchange_splitting(g, m, 8, SolverSettings{}).j_uev;
    CHECK(j > 0.0);
    CHECK(rel(j, exact) < 0.05);
}

TEST_CASE("molecular basis energies never rise with N") {
    PotentialGrid g = validation::oracle_double_well();
    SolverSettings s;
    s.basis = CIBasis::molecular;
    double prev_s = INFINITY, prev_t = INFINITY;
    for (int n : {4, 6, 8, 10}) {
        TwoElectronSpectrum sp = exchange_splitting(g, MaterialParams{}, n, s);
        CHECK(sp.singlet[0] <= prev_s + 1e-10);
        CHECK(sp.triplet[0] <= prev_t + 1e-10);
        prev_s = sp.singlet[0];
        prev_t = sp.triplet[0];
    }
}

TEST_CASE("rotating within a degenerate level leaves J unchanged") {
    PotentialGrid g = validation::harmonic_reference_well(41);
    MaterialParams m;
    DiscretizedHamiltonian h = build_hamiltonian(g, m);
    OrbitalSet o = lowest_eigenpairs(h, 6);
    REQUIRE(std::abs(o.energies[1] - o.energies[2]) < 1e-9);
    CoulombKernel k = CoulombKernel::from_material(m);
    TwoElectronSpectrum a = spectrum_from(o.energies.asDiagonal(), build_coulomb_tensor(o, k));
    OrbitalSet r = o;
    const double th = 0.61;
    r.wavefunctions.col(1) = std::cos(th) * o.wavefunctions.col(1) + std::sin(th) * o.wavefunctions.col(2);
    r.wavefunctions.col(2) = -std::sin(th) * o.wavefunctions.col(1) + std::cos(th) * o.wavefunctions.col(2);
    TwoElectronSpectrum b = spectrum_from(r.energies.asDiagonal(), build_coulomb_tensor(r, k));
    CHECK(rel(b.j_uev, a.j_uev) < 1e-8);
}

TEST_CASE("mean-field refinement") {
    Setup s = oracle_setup(6);
    MaterialParams m;
    SUBCASE("zero interaction is a fixed point after one step") {
        HartreeEngine e(s.h.mx(), s.h.my(), s.h.spacing, CoulombKernel::from_material(m, 0.0));
        HartreeFockResult r = hartree_fock_refine(s.h, s.orbitals, e);
        CHECK(r.iterations == 1);
        for (int i = 0; i < 6; ++i) CHECK(r.orbitals.energies[i] == doctest::Approx(s.orbitals.energies[i]).epsilon(1e-9));
        Eigen::MatrixXd overlap = r.orbitals.wavefunctions.transpose() * s.orbitals.wavefunctions * s.h.spacing * s.h.spacing;
        for (int i = 0; i < 6; ++i) CHECK(std::abs(overlap(i, i)) == doctest::Approx(1.0).epsilon(1e-8));
    }
    SUBCASE("refined output re-entered does not move") {
        HartreeEngine e(s.h.mx(), s.h.my(), s.h.spacing, CoulombKernel::from_material(m));
        HartreeFockResult a = hartree_fock_refine(s.h, s.orbitals, e);
        HartreeFockResult b = hartree_fock_refine(s.h, a.orbitals, e);
        CHECK(std::abs(a.energy_a - b.energy_a) < 1e-8);
        CHECK(std::abs(a.energy_b - b.energy_b) < 1e-8);
        CHECK(check_orthonormality(a.orbitals) < 1e-8);
        for (int i = 1; i < 6; ++i) CHECK(a.orbitals.energies[i] >= a.orbitals.energies[i - 1]);
    }
    SUBCASE("iteration cap raises a convergence error") {
        HartreeEngine e(s.h.mx(), s.h.my(), s.h.spacing, CoulombKernel::from_material(m));
        HartreeFockOptions o;
        o.max_iter = 2;
        CHECK_THROWS_AS(hartree_fock_refine(s.h, s.orbitals, e, o), ConvergenceError);
        o.mix = 0.0;
        CHECK_THROWS_AS(hartree_fock_refine(s.h, s.orbitals, e, o), InputError);
    }
}

TEST_CASE("Hubbard two-site calibration") {
    double closed = hubbard_exchange_closed_form(0.1, 5.0);
    CHECK(closed * 1e3 == doctest::Approx(7.987).epsilon(1e-4));
    for (auto [t, u] : {std::pair{0.1, 5.0}, std::pair{1.0, 0.5}, std::pair{1e-4, 10.0}, std::pair{0.3, 1.0}})
        CHECK(rel(hubbard_exchange_two_site(t, u), hubbard_exchange_closed_form(t, u)) < 1e-10);
    CHECK_THROWS_AS(hubbard_exchange_closed_form(0.1, 0.0), DomainError);
}

TEST_CASE("grid CI in the tight-binding regime matches 4t^2/U physics") {
    PotentialGrid g = validation::tight_binding_well();
    MaterialParams m;
    validation::TightBinding tb = validation::tight_binding_parameters(g, m);
    double hub = hubbard_exchange_closed_form(tb.t, tb.u) * 1e3;
    double ci = exchange_splitting(g, m, 8, SolverSettings{}).j_uev;
    CHECK(rel(ci, hub) < 0.10);
}

TEST_CASE("brute force oracle") {
    PotentialGrid g = validation::oracle_double_well();
    MaterialParams m;
    DiscretizedHamiltonian h = build_hamiltonian(g, m);
    OrbitalSet o = lowest_eigenpairs(h, 2);
    BruteForceOptions zero;
    zero.interaction_scale = 0.0;
    double j0 = brute_force_two_electron(g, m, zero).j_uev;
    CHECK(rel(j0, (o.energies[1] - o.energies[0]) * 1e3) < 1e-8);
    BruteForceOptions tiny;
    tiny.interaction_scale = 1e-4;
    CHECK(rel(brute_force_two_electron(g, m, tiny).j_uev, j0) < 1e-2);
    TwoElectronSpectrum full = brute_force_two_electron(g, m);
    CHECK(full.j_uev >= -kSingletSlackUeV);

    PotentialGrid big = validation::harmonic_reference_well(41);  // 39 x 39 interior
    CHECK_THROWS_AS(brute_force_two_electron(big, m), ResourceError);
    BruteForceOptions small;
    small.memory_budget = 1024;
    CHECK_THROWS_AS(brute_force_two_electron(g, m, small), ResourceError);
}

TEST_CASE("exchange splitting checks its inputs and reports a singlet ground state") {
    PotentialGrid g = validation::oracle_double_well();
    CHECK_THROWS_AS(exchange_splitting(g, MaterialParams{}, 1), InputError);
    TwoElectronSpectrum s = exchange_splitting(g, MaterialParams{}, 6);
    CHECK(s.j_uev == doctest::Approx((s.triplet[0] - s.singlet[0]) * 1e3).epsilon(1e-12));
    CHECK(s.j_uev >= -kSingletSlackUeV);
    auto rows = basis_convergence(g, MaterialParams{}, SolverSettings{}, {4, 6});
    REQUIRE(rows.size() == 2);
    CHECK(rows[1].j_uev == s.j_uev);
}

TEST_CASE("weakly coupled dots keep the singlet below the triplet") {
    // J is about 5e-4 ueV here, far below the CI correlation error of the
    // singlet energy; plain truncated CI puts the triplet lowest
    DeviceLayout L;
    L.domain = {-200, 200, -120, 120};
    L.gates = {{"rail", {-150, 150, -12.1, 12.1}, 23.3, 23.3, GateRole::channel},
               {"center", {-16.2, 16.2, -72.9, 72.9}, -42.2, -7.3, GateRole::plunger},
               {"left_end", {-142.2, -95.5, -45, 45}, -33.8, -33.8, GateRole::barrier},
               {"right_end", {95.5, 142.2, -45, 45}, -33.8, -33.8, GateRole::barrier}};
    auto [nx, ny] = grid_shape(L.domain, 10.0);
    PotentialGrid g = assemble_potential(L, ControlPoint(0.5), nx, ny);
    TwoElectronSpectrum exact = brute_force_two_electron(g, L.material);
    CHECK(exact.j_uev > 0.0);
    for (int n : {8, 12}) {
        CAPTURE(n);
        TwoElectronSpectrum s = exchange_splitting(g, L.material, n, SolverSettings{});
        CHECK(s.j_uev >= -1e-4);
        // still variational in both sectors
        CHECK(s.singlet[0] >= exact.singlet[0] - 1e-9);
        CHECK(s.triplet[0] >= exact.triplet[0] - 1e-9);
        CHECK(s.singlet.size() == n * (n + 1) / 2 + 1);
    }
}
