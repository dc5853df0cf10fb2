#include "qdsim/two_electron.hpp"

#include "qdsim/errors.hpp"
#include "util.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdlib>
#include <vector>

namespace qdsim {

namespace {

CISector make_sector(SpinSector which, const Eigen::MatrixXd& h1, const CoulombTensor& c) {
    const int n = c.size();
    const double sgn = which == SpinSector::singlet ? 1.0 : -1.0;
    CISector s;
    s.sector = which;
    for (int a = 0; a < n; ++a)
        for (int b = a; b < n; ++b)
            if (which == SpinSector::singlet || a < b) s.basis.emplace_back(a, b);
    const auto m = static_cast<Eigen::Index>(s.basis.size());
    s.hamiltonian.resize(m, m);
    auto d = [](int x, int y) { return x == y ? 1.0 : 0.0; };
    for (Eigen::Index p = 0; p < m; ++p) {
        auto [a, b] = s.basis[static_cast<std::size_t>(p)];
        double nab = 2.0 * (1.0 + sgn * d(a, b));
        for (Eigen::Index q = 0; q <= p; ++q) {
            auto [cc, dd] = s.basis[static_cast<std::size_t>(q)];
            double ncd = 2.0 * (1.0 + sgn * d(cc, dd));
            double one = h1(a, cc) * d(b, dd) + h1(b, dd) * d(a, cc) + sgn * h1(a, dd) * d(b, cc) +
                         sgn * h1(b, cc) * d(a, dd);
            double two = c(a, b, cc, dd) + sgn * c(a, b, dd, cc);
            double v = 2.0 * (two + one) / std::sqrt(nab * ncd);
            s.hamiltonian(p, q) = v;
            s.hamiltonian(q, p) = v;
        }
    }
    return s;
}

// first clearly nonzero entry positive
void fix_sign(Eigen::Ref<Eigen::VectorXd> col) {
    double big = col.cwiseAbs().maxCoeff();
    for (Eigen::Index r = 0; r < col.size(); ++r)
        if (std::abs(col[r]) > 1e-6 * big) {
            if (col[r] < 0.0) col = -col;
            return;
        }
}


// Largest product grid (interior nodes) for the triplet-modulus singlet state.
constexpr int kBoundNodes = 4096;

// The two-particle grid operator H1 x 1 + 1 x H1 + W has no positive
// off-diagonal element, so the modulus |Psi_T| of the triplet ground state is a
// symmetric state with energy at or below E_T. Its part outside the span of the
// singlet configurations is added as one more singlet basis state, which keeps
// a truncated CI from placing the triplet below the singlet. Couplings are
// evaluated on the product grid with the kernel sampled node to node.
Eigen::VectorXd singlet_with_triplet_modulus(const DiscretizedHamiltonian& h, const CoulombKernel& kernel,
                                             const Eigen::MatrixXd& xs, const CISector& singlet,
                                             const CISector& triplet, const Eigen::VectorXd& plain) {
    const int n = static_cast<int>(xs.cols());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> te(triplet.hamiltonian);
    if (te.info() != Eigen::Success) throw ConvergenceError("CI diagonalization failed", 0.0);
    const Eigen::VectorXd t0 = te.eigenvectors().col(0);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t k = 0; k < triplet.basis.size(); ++k) {
        auto [p, q] = triplet.basis[k];
        a(p, q) += t0[static_cast<Eigen::Index>(k)] / std::sqrt(2.0);
        a(q, p) -= t0[static_cast<Eigen::Index>(k)] / std::sqrt(2.0);
    }
    Eigen::MatrixXd g = (xs * a * xs.transpose()).cwiseAbs();
    // x M x^T is the projection of g onto the singlet configurations
    Eigen::MatrixXd m = xs.transpose() * g * xs;
    g.noalias() -= xs * m * xs.transpose();
    const double norm = g.norm();
    if (norm * norm < 1e-8) return plain;  // already inside the span
    g /= norm;

    const int mx = h.mx(), my = h.my();
    std::vector<double> table(static_cast<std::size_t>(mx) * my);
    for (int dj = 0; dj < my; ++dj)
        for (int di = 0; di < mx; ++di) {
            double dx = di * h.spacing, dy = dj * h.spacing;
            table[static_cast<std::size_t>(di + mx * dj)] = kernel(dx * dx + dy * dy);
        }
    Eigen::MatrixXd y = h.matrix * g;
    Eigen::MatrixXd hg = y + y.transpose();
    y.resize(0, 0);
    const Eigen::Index size = g.rows();
    for (Eigen::Index q = 0; q < size; ++q) {
        const int iq = static_cast<int>(q % mx), jq = static_cast<int>(q / mx);
        for (int jp = 0; jp < my; ++jp) {
            const double* row = &table[static_cast<std::size_t>(mx * std::abs(jp - jq))];
            const Eigen::Index base = static_cast<Eigen::Index>(mx) * jp;
            for (int ip = 0; ip < mx; ++ip) hg(base + ip, q) += row[std::abs(ip - iq)] * g(base + ip, q);
        }
    }
    const double hgg = (g.array() * hg.array()).sum();
    Eigen::MatrixXd c = xs.transpose() * hg * xs;
    const auto p = static_cast<Eigen::Index>(singlet.basis.size());
    Eigen::MatrixXd big(p + 1, p + 1);
    big.topLeftCorner(p, p) = singlet.hamiltonian;
    for (Eigen::Index k = 0; k < p; ++k) {
        auto [u, v] = singlet.basis[static_cast<std::size_t>(k)];
        double d = u == v ? c(u, u) : std::sqrt(0.5) * (c(u, v) + c(v, u));
        big(k, p) = d;
        big(p, k) = d;
    }
    big(p, p) = hgg;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(big, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw ConvergenceError("CI diagonalization failed", 0.0);
    return es.eigenvalues();
}

}  // namespace

std::pair<CISector, CISector> build_ci_sectors(const Eigen::MatrixXd& one_body,
                                               const CoulombTensor& coulomb) {
    const int n = coulomb.size();
    if (n < 2) throw ConfigError("CI needs at least two orbitals");
    if (one_body.rows() != n || one_body.cols() != n)
        throw ConfigError("one-body matrix is " + std::to_string(one_body.rows()) + "x" +
                          std::to_string(one_body.cols()) + " but the Coulomb tensor has " +
                          std::to_string(n) + " orbitals");
    Eigen::MatrixXd h1 = 0.5 * (one_body + one_body.transpose());
    return {make_sector(SpinSector::singlet, h1, coulomb), make_sector(SpinSector::triplet, h1, coulomb)};
}

std::pair<CISector, CISector> build_ci_sectors(const OrbitalSet& orbitals, const CoulombTensor& coulomb) {
    if (orbitals.count() != coulomb.size())
        throw ConfigError("orbital count " + std::to_string(orbitals.count()) +
                          " differs from Coulomb tensor size " + std::to_string(coulomb.size()));
    return build_ci_sectors(Eigen::MatrixXd(orbitals.energies.asDiagonal()), coulomb);
}

Eigen::VectorXd diagonalize_ci(const CISector& sector) {
    if (sector.hamiltonian.rows() == 0) return {};
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sector.hamiltonian, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw ConvergenceError("CI diagonalization failed", 0.0);
    return es.eigenvalues();
}

TwoElectronSpectrum spectrum_from(const Eigen::MatrixXd& one_body, const CoulombTensor& coulomb) {
    auto [s, t] = build_ci_sectors(one_body, coulomb);
    TwoElectronSpectrum out;
    out.singlet = diagonalize_ci(s);
    out.triplet = diagonalize_ci(t);
    out.j_uev = (out.triplet[0] - out.singlet[0]) * 1e3;
    return out;
}

HartreeFockResult hartree_fock_refine(const DiscretizedHamiltonian& h, const OrbitalSet& orbitals,
                                      const HartreeEngine& engine, const HartreeFockOptions& opts) {
    const int n = orbitals.count();
    if (n < 2) throw ConfigError("mean-field basis needs at least two input orbitals");
    if (!(opts.mix > 0.0 && opts.mix <= 1.0)) throw InputError("mixing weight must lie in (0, 1]");
    if (opts.max_iter < 1) throw InputError("max_iter must be positive");
    const double hs = orbitals.spacing;
    const Eigen::MatrixXd x = orbitals.wavefunctions * hs;  // unit Euclidean columns

    Eigen::VectorXd a = (x.col(0) + x.col(1)) / std::sqrt(2.0);
    Eigen::VectorXd b = (x.col(0) - x.col(1)) / std::sqrt(2.0);
    const double inv_h2 = 1.0 / (hs * hs);
    Eigen::VectorXd rho_a = a.cwiseAbs2() * inv_h2;
    Eigen::VectorXd rho_b = b.cwiseAbs2() * inv_h2;
    Eigen::MatrixXd start_a = a, start_b = b;

    double prev_a = orbitals.energies[0], prev_b = orbitals.energies[0];
    HartreeFockResult res;
    bool done = false;
    for (int it = 1; it <= opts.max_iter; ++it) {
        DiscretizedHamiltonian fa = with_added_potential(h, engine.potential(rho_b));
        DiscretizedHamiltonian fb = with_added_potential(h, engine.potential(rho_a));
        OrbitalSet ga = lowest_eigenpairs(fa, 1, opts.eig, &start_a);
        OrbitalSet gb = lowest_eigenpairs(fb, 1, opts.eig, &start_b);
        double ea = ga.energies[0], eb = gb.energies[0];
        Eigen::VectorXd xa = ga.wavefunctions.col(0) * hs;
        Eigen::VectorXd xb = gb.wavefunctions.col(0) * hs;
        start_a = xa;
        start_b = xb;
        res.iterations = it;
        res.energy_a = ea;
        res.energy_b = eb;
        if (std::abs(ea - prev_a) < opts.tol && std::abs(eb - prev_b) < opts.tol) {
            done = true;
            break;
        }
        rho_a = (1.0 - opts.mix) * rho_a + opts.mix * xa.cwiseAbs2() * inv_h2;
        rho_b = (1.0 - opts.mix) * rho_b + opts.mix * xb.cwiseAbs2() * inv_h2;
        prev_a = ea;
        prev_b = eb;
    }
    if (!done)
        throw ConvergenceError("mean-field iteration did not settle in " + std::to_string(opts.max_iter) +
                                   " steps; try a smaller mix than " + util::fmt17(opts.mix),
                               std::max(std::abs(res.energy_a - prev_a), std::abs(res.energy_b - prev_b)));

    const Eigen::VectorXd phi_a = engine.potential(rho_a);
    const Eigen::VectorXd phi_b = engine.potential(rho_b);
    OrbitalSet sa = lowest_eigenpairs(with_added_potential(h, phi_b), n, opts.eig, &start_a);
    OrbitalSet sb = lowest_eigenpairs(with_added_potential(h, phi_a), n, opts.eig, &start_b);

    // interleave the two dots' levels and keep linearly independent ones
    const Eigen::Index m = x.rows();
    Eigen::MatrixXd q(m, n);
    int kept = 0;
    for (int c = 0; c < 2 * n && kept < n; ++c) {
        const OrbitalSet& src = (c % 2 == 0) ? sa : sb;
        Eigen::VectorXd v = src.wavefunctions.col(c / 2) * hs;
        for (int pass = 0; pass < 2; ++pass)
            for (int r = 0; r < kept; ++r) v -= q.col(r).dot(v) * q.col(r);
        double nv = v.norm();
        if (nv < 1e-3) continue;
        q.col(kept++) = v / nv;
    }
    if (kept < n)
        throw ConvergenceError("mean-field levels span only " + std::to_string(kept) + " of " +
                                   std::to_string(n) + " requested orbitals",
                               0.0);

    Eigen::MatrixXd fq = h.matrix * q;
    fq += (0.5 * (phi_a + phi_b)).asDiagonal() * q;
    Eigen::MatrixXd f = q.transpose() * fq;
    f = 0.5 * (f + f.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(f);
    Eigen::MatrixXd rot = q * es.eigenvectors();
    for (int c = 0; c < n; ++c) fix_sign(rot.col(c));

    res.orbitals = orbitals;
    res.orbitals.energies = es.eigenvalues();
    res.orbitals.wavefunctions = rot / hs;
    return res;
}

std::string_view to_string(CIBasis b) {
    return b == CIBasis::localized ? "localized" : "molecular";
}

void SolverSettings::validate() const {
    if (!(grid_spacing > 0.0) || !std::isfinite(grid_spacing)) throw InputError("grid spacing must be positive");
    if (basis_size < 2 || basis_size > 40) throw InputError("basis size must lie in [2, 40]");
    if (!(eig_tol > 0.0 && eig_tol < 1e-3)) throw InputError("eigensolver tolerance must lie in (0, 1e-3)");
    if (hf_max_iter < 1) throw InputError("mean-field iteration cap must be positive");
    if (!(hf_mix > 0.0 && hf_mix <= 1.0)) throw InputError("mean-field mix must lie in (0, 1]");
    if (!(interaction_scale >= 0.0) || !std::isfinite(interaction_scale))
        throw InputError("interaction scale must be non-negative");
}

TwoElectronSpectrum exchange_splitting(const PotentialGrid& grid, const MaterialParams& material, int n,
                                       const SolverSettings& settings) {
    settings.validate();
    if (n < 2) throw InputError("exchange needs at least two orbitals");
    DiscretizedHamiltonian h = build_hamiltonian(grid, material);
    const CoulombKernel kernel = CoulombKernel::from_material(material, settings.interaction_scale);
    HartreeEngine engine(h.mx(), h.my(), h.spacing, kernel);
    EigenOptions eo;
    eo.tol = settings.eig_tol;
    OrbitalSet basis = lowest_eigenpairs(h, n, eo);
    if (settings.basis == CIBasis::localized) {
        HartreeFockOptions ho;
        ho.max_iter = settings.hf_max_iter;
        ho.mix = settings.hf_mix;
        ho.eig = eo;
        basis = hartree_fock_refine(h, basis, engine, ho).orbitals;
    }
    const Eigen::MatrixXd xs = basis.wavefunctions * basis.spacing;
    Eigen::MatrixXd one = xs.transpose() * (h.matrix * xs);
    CoulombTensor c = build_coulomb_tensor(basis, engine);
    TwoElectronSpectrum out = spectrum_from(one, c);
    out.warnings = h.warnings;
    if (h.size() <= kBoundNodes) {
        auto [s, t] = build_ci_sectors(one, c);
        out.singlet = singlet_with_triplet_modulus(h, kernel, xs, s, t, out.singlet);
        out.j_uev = (out.triplet[0] - out.singlet[0]) * 1e3;
    } else {
        out.warnings.push_back("grid has " + std::to_string(h.size()) + " interior nodes, more than " +
                               std::to_string(kBoundNodes) + "; singlet ordering bound not applied");
    }
    return out;
}

std::vector<BasisConvergenceRow> basis_convergence(const PotentialGrid& grid, const MaterialParams& material,
                                                   const SolverSettings& settings, const std::vector<int>& sizes) {
    std::vector<BasisConvergenceRow> rows;
    for (int n : sizes) {
        TwoElectronSpectrum s = exchange_splitting(grid, material, n, settings);
        rows.push_back({n, s.j_uev, s.singlet[0], s.triplet[0]});
    }
    return rows;
}

double hubbard_exchange_closed_form(double t, double u) {
    if (!(u > 0.0)) throw DomainError("Hubbard U must be positive");
    double x = 16.0 * t * t / (u * u);
    // (U/2)(sqrt(1+x) - 1) without the cancellation
    return 0.5 * u * x / (std::sqrt(1.0 + x) + 1.0);
}

double hubbard_exchange_two_site(double t, double u) {
    // singlet sector basis: (1,1) singlet, |20>, |02>; triplet (1,1) sits at 0
    Eigen::Matrix3d m;
    const double c = -std::sqrt(2.0) * t;
    m << 0.0, c, c, c, u, 0.0, c, 0.0, u;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(m, Eigen::EigenvaluesOnly);
    return 0.0 - es.eigenvalues()[0];
}

}  // namespace qdsim
