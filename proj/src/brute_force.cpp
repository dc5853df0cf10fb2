#include "qdsim/errors.hpp"
#include "qdsim/two_electron.hpp"
#include "util.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace qdsim {

namespace {

// Lowest Ritz values of a plain (non-reorthogonalized) Lanczos run. Spurious
// copies of converged values are merged.
Eigen::VectorXd lanczos_lowest(const std::function<void(const Eigen::MatrixXd&, Eigen::MatrixXd&)>& apply,
                               const std::function<void(Eigen::MatrixXd&)>& project, Eigen::MatrixXd v,
                               int states, int max_steps, double tol) {
    project(v);
    double nv = v.norm();
    if (nv == 0.0) throw InputError("Lanczos start vector vanishes in its sector");
    v /= nv;
    Eigen::MatrixXd prev = Eigen::MatrixXd::Zero(v.rows(), v.cols());
    Eigen::MatrixXd w(v.rows(), v.cols());
    std::vector<double> alpha, beta;
    Eigen::VectorXd last;
    int stable = 0;
    for (int step = 0; step < max_steps; ++step) {
        apply(v, w);
        project(w);
        double a = (w.array() * v.array()).sum();
        alpha.push_back(a);
        w -= a * v;
        if (!beta.empty()) w -= beta.back() * prev;
        double b = w.norm();
        bool breakdown = b < 1e-14 * std::max(1.0, std::abs(a));
        bool check = breakdown || (step + 1) % 10 == 0 || step + 1 == max_steps;
        if (check) {
            const auto m = static_cast<Eigen::Index>(alpha.size());
            Eigen::VectorXd d = Eigen::Map<Eigen::VectorXd>(alpha.data(), m);
            Eigen::VectorXd e = m > 1 ? Eigen::VectorXd(Eigen::Map<Eigen::VectorXd>(beta.data(), m - 1))
                                      : Eigen::VectorXd();
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
            es.computeFromTridiagonal(d, e, Eigen::EigenvaluesOnly);
            std::vector<double> vals;
            for (Eigen::Index i = 0; i < m && static_cast<int>(vals.size()) < states; ++i) {
                double x = es.eigenvalues()[i];
                if (!vals.empty() && std::abs(x - vals.back()) < 1e-9 * std::max(1.0, std::abs(x))) continue;
                vals.push_back(x);
            }
            Eigen::VectorXd cur = Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
            if (last.size() == cur.size() && cur.size() == states &&
                ((cur - last).cwiseAbs().array() <= tol * cur.cwiseAbs().array().max(1.0)).all()) {
                if (++stable >= 2) return cur;
            } else {
                stable = 0;
            }
            last = cur;
            if (breakdown) {
                if (cur.size() < states) throw ConvergenceError("Krylov space exhausted before enough states", 0.0);
                return cur;
            }
        }
        beta.push_back(b);
        prev.swap(v);
        v = w / b;
    }
    throw ConvergenceError("two-particle Lanczos did not settle in " + std::to_string(max_steps) + " steps",
                           last.size() ? last[0] : 0.0);
}

}  // namespace

TwoElectronSpectrum brute_force_two_electron(const PotentialGrid& grid, const MaterialParams& material,
                                             const BruteForceOptions& opts) {
    DiscretizedHamiltonian h = build_hamiltonian(grid, material);
    const auto m = static_cast<std::size_t>(h.size());
    if (m > 1024)
        throw ResourceError("product grid of " + std::to_string(m) + "^2 nodes is too large for the exact "
                            "two-electron solve; use at most 1024 interior nodes");
    const std::size_t bytes = m * m * sizeof(double) * 6;
    if (bytes > opts.memory_budget)
        throw ResourceError("exact two-electron solve needs " + std::to_string(bytes >> 20) +
                            " MiB, budget is " + std::to_string(opts.memory_budget >> 20) +
                            " MiB; use a coarser grid");
    if (opts.states < 1) throw InputError("at least one state per sector");

    const CoulombKernel kernel = CoulombKernel::from_material(material, opts.interaction_scale);
    const int mx = h.mx();
    const auto n = static_cast<Eigen::Index>(m);
    Eigen::MatrixXd w(n, n);
    for (Eigen::Index p = 0; p < n; ++p) {
        double xp = static_cast<double>(p % mx), yp = static_cast<double>(p / mx);
        for (Eigen::Index q = 0; q < n; ++q) {
            double dx = (xp - static_cast<double>(q % mx)) * h.spacing;
            double dy = (yp - static_cast<double>(q / mx)) * h.spacing;
            w(p, q) = kernel(dx * dx + dy * dy);
        }
    }
    const Eigen::SparseMatrix<double>& h1 = h.matrix;
    auto apply = [&](const Eigen::MatrixXd& p, Eigen::MatrixXd& out) {
        out.noalias() = h1 * p;
        out.noalias() += p * h1;
        out.array() += w.array() * p.array();
    };

    EigenOptions eo;
    OrbitalSet orb = lowest_eigenpairs(h, std::min(2, h.size()), eo);
    const Eigen::VectorXd a = orb.wavefunctions.col(0);
    const Eigen::VectorXd b = orb.wavefunctions.col(std::min(1, orb.count() - 1));

    TwoElectronSpectrum out;
    out.warnings = h.warnings;
    {
        auto sym = [](Eigen::MatrixXd& p) { p = 0.5 * (p + p.transpose()).eval(); };
        out.singlet = lanczos_lowest(apply, sym, a * a.transpose(), opts.states, opts.max_steps, opts.tol);
    }
    {
        auto anti = [](Eigen::MatrixXd& p) { p = 0.5 * (p - p.transpose()).eval(); };
        out.triplet = lanczos_lowest(apply, anti, a * b.transpose() - b * a.transpose(), opts.states,
                                     opts.max_steps, opts.tol);
    }
    out.j_uev = (out.triplet[0] - out.singlet[0]) * 1e3;
    return out;
}

}  // namespace qdsim
