#include "qdsim/eigensolver.hpp"

#include "qdsim/errors.hpp"
#include "util.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace qdsim {

namespace {

Eigen::SparseMatrix<double> assemble(int mx, int my, double t, const Eigen::VectorXd& v) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(mx) * my * 5);
    for (int j = 0; j < my; ++j) {
        for (int i = 0; i < mx; ++i) {
            int p = i + mx * j;
            trip.emplace_back(p, p, 4.0 * t + v[p]);
            if (i > 0) trip.emplace_back(p, p - 1, -t);
            if (i + 1 < mx) trip.emplace_back(p, p + 1, -t);
            if (j > 0) trip.emplace_back(p, p - mx, -t);
            if (j + 1 < my) trip.emplace_back(p, p + mx, -t);
        }
    }
    Eigen::SparseMatrix<double> m(mx * my, mx * my);
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
}

// Orthonormalizes the columns of b (SVQB), dropping directions whose Gram
// eigenvalue falls below drop * largest.
Eigen::MatrixXd svqb(const Eigen::MatrixXd& b, double drop) {
    Eigen::VectorXd d = b.colwise().norm().transpose();
    for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = d[i] > 0.0 ? 1.0 / d[i] : 0.0;
    Eigen::MatrixXd bs = b * d.asDiagonal();
    Eigen::MatrixXd s = bs.transpose() * bs;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
    const Eigen::VectorXd& w = es.eigenvalues();
    double top = w.maxCoeff();
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = w.size() - 1; i >= 0; --i)
        if (w[i] > drop * top) keep.push_back(i);
    Eigen::MatrixXd t(b.cols(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c)
        t.col(static_cast<Eigen::Index>(c)) = es.eigenvectors().col(keep[c]) / std::sqrt(w[keep[c]]);
    return bs * t;
}

Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& b) {
    Eigen::MatrixXd q = svqb(b, 1e-13);
    return svqb(q, 1e-10);
}

Eigen::MatrixXd box_modes(int mx, int my, int p) {
    struct Mode {
        double e;
        int a, b;
    };
    std::vector<Mode> modes;
    int lim = static_cast<int>(std::ceil(std::sqrt(4.0 * p))) + 2;
    for (int a = 1; a <= std::min(lim, mx); ++a)
        for (int b = 1; b <= std::min(lim, my); ++b) {
            double sa = std::sin(a * std::numbers::pi / (2.0 * (mx + 1)));
            double sb = std::sin(b * std::numbers::pi / (2.0 * (my + 1)));
            modes.push_back({sa * sa + sb * sb, a, b});
        }
    std::sort(modes.begin(), modes.end(), [](const Mode& l, const Mode& r) {
        if (l.e != r.e) return l.e < r.e;
        if (l.a != r.a) return l.a < r.a;
        return l.b < r.b;
    });
    Eigen::MatrixXd x(mx * my, p);
    for (int c = 0; c < p; ++c) {
        const Mode& m = modes[static_cast<std::size_t>(c)];
        for (int j = 0; j < my; ++j)
            for (int i = 0; i < mx; ++i)
                x(i + mx * j, c) = std::sin(m.a * std::numbers::pi * (i + 1) / (mx + 1)) *
                                   std::sin(m.b * std::numbers::pi * (j + 1) / (my + 1));
    }
    return x;
}

void canonicalize(Eigen::VectorXd& energies, Eigen::MatrixXd& vecs) {
    const Eigen::Index k = vecs.cols();
    for (Eigen::Index c = 0; c < k; ++c) {
        auto col = vecs.col(c);
        double big = col.cwiseAbs().maxCoeff();
        for (Eigen::Index r = 0; r < col.size(); ++r) {
            if (std::abs(col[r]) > 1e-6 * big) {
                if (col[r] < 0.0) col = -col;
                break;
            }
        }
    }
    // degenerate clusters: order by grid values
    auto less = [&](Eigen::Index a, Eigen::Index b) {
        double scale = std::max(vecs.col(a).cwiseAbs().maxCoeff(), vecs.col(b).cwiseAbs().maxCoeff());
        for (Eigen::Index r = 0; r < vecs.rows(); ++r) {
            double d = vecs(r, a) - vecs(r, b);
            if (std::abs(d) > 1e-9 * scale) return d < 0.0;
        }
        return false;
    };
    Eigen::Index start = 0;
    while (start < k) {
        Eigen::Index end = start + 1;
        while (end < k && energies[end] - energies[end - 1] <=
                              1e-9 * std::max(1.0, std::abs(energies[end])))
            ++end;
        if (end - start > 1) {
            std::vector<Eigen::Index> idx(static_cast<std::size_t>(end - start));
            std::iota(idx.begin(), idx.end(), start);
            std::stable_sort(idx.begin(), idx.end(), less);
            Eigen::MatrixXd block(vecs.rows(), end - start);
            Eigen::VectorXd eblock(end - start);
            for (std::size_t c = 0; c < idx.size(); ++c) {
                block.col(static_cast<Eigen::Index>(c)) = vecs.col(idx[c]);
                eblock[static_cast<Eigen::Index>(c)] = energies[idx[c]];
            }
            vecs.middleCols(start, end - start) = block;
            energies.segment(start, end - start) = eblock;
        }
        start = end;
    }
}

OrbitalSet package(const DiscretizedHamiltonian& h, Eigen::VectorXd e, Eigen::MatrixXd x) {
    canonicalize(e, x);
    OrbitalSet o;
    o.nx = h.nx;
    o.ny = h.ny;
    o.spacing = h.spacing;
    o.x0 = h.x0;
    o.y0 = h.y0;
    o.energies = std::move(e);
    o.wavefunctions = x / h.spacing;
    return o;
}

}  // namespace

DiscretizedHamiltonian build_hamiltonian(const PotentialGrid& grid, const MaterialParams& material) {
    grid.validate();
    material.validate();
    if (grid.nx < 3 || grid.ny < 3) throw ConfigError("grid has no interior nodes");
    DiscretizedHamiltonian h;
    h.nx = grid.nx;
    h.ny = grid.ny;
    h.spacing = grid.spacing;
    h.x0 = grid.x0;
    h.y0 = grid.y0;
    h.kinetic = material.kinetic_prefactor();
    const int mx = h.mx(), my = h.my();
    h.potential.resize(mx * my);
    for (int j = 0; j < my; ++j)
        for (int i = 0; i < mx; ++i) h.potential[i + mx * j] = grid.values(i + 1, j + 1);
    h.matrix = assemble(mx, my, h.hopping(), h.potential);

    double dv = 0.0;
    for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i) {
            if (i + 1 < grid.nx) dv = std::max(dv, std::abs(grid.values(i + 1, j) - grid.values(i, j)));
            if (j + 1 < grid.ny) dv = std::max(dv, std::abs(grid.values(i, j + 1) - grid.values(i, j)));
        }
    if (h.hopping() < dv)
        h.warnings.push_back("grid spacing " + util::fmt17(h.spacing) +
                             " nm is coarse: hopping " + util::fmt17(h.hopping()) +
                             " meV < potential step " + util::fmt17(dv) + " meV per cell");
    return h;
}

DiscretizedHamiltonian with_added_potential(const DiscretizedHamiltonian& h,
                                            const Eigen::VectorXd& extra) {
    if (extra.size() != h.size()) throw ConfigError("added potential has the wrong size");
    DiscretizedHamiltonian out = h;
    out.potential += extra;
    for (int p = 0; p < h.size(); ++p) out.matrix.coeffRef(p, p) += extra[p];
    return out;
}

OrbitalSet lowest_eigenpairs(const DiscretizedHamiltonian& h, int k, const EigenOptions& opts,
                             const Eigen::MatrixXd* start) {
    const int n = h.size();
    if (k < 1 || k > n) throw InputError("requested " + std::to_string(k) + " eigenpairs of a " +
                                         std::to_string(n) + "-node problem");
    if (!(opts.tol > 0.0)) throw InputError("eigensolver tolerance must be positive");

    const int p = std::min(n, 2 * k + 4);
    if (3 * p >= n || n <= 64) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(h.matrix));
        return package(h, es.eigenvalues().head(k), es.eigenvectors().leftCols(k));
    }

    // shift below the spectrum: H - sigma >= (minV - sigma) + lowest box mode > 0
    const double t = h.hopping();
    const double sx = std::sin(std::numbers::pi / (2.0 * (h.mx() + 1)));
    const double sy = std::sin(std::numbers::pi / (2.0 * (h.my() + 1)));
    const double box0 = 4.0 * t * (sx * sx + sy * sy);
    double sigma = h.potential.minCoeff() + 0.99 * box0;

    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
    auto factor = [&](double s) {
        Eigen::SparseMatrix<double> shifted = h.matrix;
        for (int i = 0; i < n; ++i) shifted.coeffRef(i, i) -= s;
        ldlt.compute(shifted);
        if (ldlt.info() != Eigen::Success) throw ConvergenceError("shifted Hamiltonian factorization failed", 0.0);
    };
    factor(sigma);
    bool reshifted = false;

    Eigen::MatrixXd x;
    if (start && start->rows() == n && start->cols() > 0) {
        x.resize(n, p);
        int c = static_cast<int>(std::min<Eigen::Index>(start->cols(), p));
        x.leftCols(c) = start->leftCols(c);
        if (c < p) x.rightCols(p - c) = box_modes(h.mx(), h.my(), p - c);
    } else {
        x = box_modes(h.mx(), h.my(), p);
    }
    x = orthonormalize(x);

    // Rayleigh-Ritz on the starting block, then expand with shift-inverted residuals;
    // expanding with T*x instead stalls once T*x is nearly parallel to x
    Eigen::MatrixXd basis = x;
    Eigen::MatrixXd hb = h.matrix * basis;
    long applications = basis.cols();
    double worst = 0.0;
    Eigen::VectorXd theta;
    Eigen::MatrixXd ritz, hx;
    while (true) {
        Eigen::MatrixXd g = basis.transpose() * hb;
        g = 0.5 * (g + g.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
        const Eigen::Index keep = std::min<Eigen::Index>(p, basis.cols());
        if (keep < k) throw ConvergenceError("eigensolver subspace collapsed", 0.0);
        theta = es.eigenvalues().head(keep);
        ritz = basis * es.eigenvectors().leftCols(keep);
        hx = hb * es.eigenvectors().leftCols(keep);
        Eigen::MatrixXd res = hx - ritz * theta.asDiagonal();

        worst = 0.0;
        for (int c = 0; c < k; ++c)
            worst = std::max(worst, res.col(c).norm() / std::max(1.0, std::abs(theta[c])));
        if (worst <= opts.tol) break;
        if (applications >= opts.max_applications)
            throw ConvergenceError("eigensolver stopped after " + std::to_string(applications) +
                                       " matrix applications; relative residual " +
                                       util::fmt17(worst),
                                   worst);
        if (!reshifted && applications > keep) {
            // move the pole up to just below the lowest Ritz value
            const double spread = theta[keep - 1] - theta[0];
            const double s2 = theta[0] - 0.1 * spread;
            if (s2 > sigma) {
                sigma = s2;
                factor(sigma);
            }
            reshifted = true;
        }
        const Eigen::Index q = keep;
        basis.resize(n, 3 * q);
        basis.leftCols(q) = ritz;
        basis.middleCols(q, q) = ldlt.solve(res);
        basis.rightCols(q) = ldlt.solve(Eigen::MatrixXd(basis.middleCols(q, q)));
        basis = orthonormalize(basis);
        hb = h.matrix * basis;
        applications += 5 * q;
    }
    return package(h, theta.head(k), ritz.leftCols(k));
}

double check_orthonormality(const OrbitalSet& o) {
    const double w = o.spacing * o.spacing;
    Eigen::MatrixXd s = o.wavefunctions.transpose() * o.wavefunctions * w;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < s.rows(); ++i)
        for (Eigen::Index j = 0; j < s.cols(); ++j)
            worst = std::max(worst, std::abs(s(i, j) - (i == j ? 1.0 : 0.0)));
    return worst;
}

Eigen::MatrixXd OrbitalSet::on_grid(int i) const {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(nx, ny);
    const int mx = nx - 2;
    for (int j = 0; j < ny - 2; ++j)
        for (int a = 0; a < mx; ++a) g(a + 1, j + 1) = wavefunctions(a + mx * j, i);
    return g;
}

std::string format_orbital_text(const OrbitalSet& o, int i) {
    if (i < 0 || i >= o.count()) throw InputError("orbital index out of range");
    Eigen::MatrixXd g = o.on_grid(i);
    std::string out = "# orbital " + std::to_string(i) + " energy_meV " + util::fmt17(o.energies[i]) + "\n";
    for (int a = 0; a < o.nx; ++a) {
        for (int b = 0; b < o.ny; ++b) {
            if (b) out += ' ';
            out += util::fmt17(g(a, b));
        }
        out += '\n';
    }
    return out;
}

}  // namespace qdsim
