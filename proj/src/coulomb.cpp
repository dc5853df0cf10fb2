#include "qdsim/coulomb.hpp"

#include "qdsim/errors.hpp"
#include "qdsim/units.hpp"
#include "util.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <fstream>

namespace qdsim {

namespace {

// FFTW's planner is not re-entrant.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

int fft_size(int at_least) {
    for (int n = at_least;; ++n) {
        int r = n;
        for (int f : {2, 3, 5, 7})
            while (r % f == 0) r /= f;
        if (r == 1) return n;
    }
}

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};
using RealBuf = std::unique_ptr<double[], FftwFree>;
using CplxBuf = std::unique_ptr<fftw_complex[], FftwFree>;

RealBuf real_buf(std::size_t n) { return RealBuf(fftw_alloc_real(n)); }
CplxBuf cplx_buf(std::size_t n) { return CplxBuf(fftw_alloc_complex(n)); }

}  // namespace

CoulombKernel CoulombKernel::from_material(const MaterialParams& m, double scale) {
    m.validate();
    return {units::kCoulombMeVNm / m.relative_permittivity * scale, m.softening_length};
}

double CoulombKernel::operator()(double r2) const {
    return strength / std::sqrt(r2 + softening * softening);
}

struct HartreeEngine::Plans {
    fftw_plan forward = nullptr;
    fftw_plan backward = nullptr;
    CplxBuf kernel_hat;
    ~Plans() {
        std::lock_guard lock(planner_mutex());
        if (forward) fftw_destroy_plan(forward);
        if (backward) fftw_destroy_plan(backward);
    }
};

HartreeEngine::HartreeEngine(int mx, int my, double spacing, const CoulombKernel& kernel)
    : mx_(mx), my_(my), px_(fft_size(2 * mx - 1)), py_(fft_size(2 * my - 1)), spacing_(spacing),
      kernel_(kernel), plans_(std::make_unique<Plans>()) {
    if (mx < 1 || my < 1 || !(spacing > 0.0)) throw ConfigError("bad Hartree grid");
    if (!(kernel.softening > 0.0)) throw InputError("softening length must be positive");
    // layout: x fastest. FFTW is row-major, so dims are (py, px).
    const std::size_t nr = static_cast<std::size_t>(px_) * py_;
    const std::size_t nc = static_cast<std::size_t>(px_ / 2 + 1) * py_;
    RealBuf r = real_buf(nr);
    CplxBuf c = cplx_buf(nc);
    {
        std::lock_guard lock(planner_mutex());
        plans_->forward = fftw_plan_dft_r2c_2d(py_, px_, r.get(), c.get(), FFTW_ESTIMATE);
        plans_->backward = fftw_plan_dft_c2r_2d(py_, px_, c.get(), r.get(), FFTW_ESTIMATE);
    }
    if (!plans_->forward || !plans_->backward) throw ResourceError("FFT planning failed");

    std::memset(r.get(), 0, nr * sizeof(double));
    for (int dy = -(my - 1); dy <= my - 1; ++dy) {
        int yy = dy < 0 ? dy + py_ : dy;
        for (int dx = -(mx - 1); dx <= mx - 1; ++dx) {
            int xx = dx < 0 ? dx + px_ : dx;
            double r2 = (double(dx) * dx + double(dy) * dy) * spacing * spacing;
            r[static_cast<std::size_t>(yy) * px_ + xx] = kernel(r2);
        }
    }
    plans_->kernel_hat = cplx_buf(nc);
    fftw_execute_dft_r2c(plans_->forward, r.get(), plans_->kernel_hat.get());
}

HartreeEngine::~HartreeEngine() = default;

Eigen::VectorXd HartreeEngine::potential(const Eigen::VectorXd& rho) const {
    if (rho.size() != static_cast<Eigen::Index>(mx_) * my_) throw ConfigError("density size mismatch");
    const std::size_t nr = static_cast<std::size_t>(px_) * py_;
    const std::size_t nc = static_cast<std::size_t>(px_ / 2 + 1) * py_;
    RealBuf r = real_buf(nr);
    CplxBuf c = cplx_buf(nc);
    std::memset(r.get(), 0, nr * sizeof(double));
    for (int j = 0; j < my_; ++j)
        for (int i = 0; i < mx_; ++i) r[static_cast<std::size_t>(j) * px_ + i] = rho[i + mx_ * j];
    fftw_execute_dft_r2c(plans_->forward, r.get(), c.get());
    const fftw_complex* kh = plans_->kernel_hat.get();
    for (std::size_t q = 0; q < nc; ++q) {
        double re = c[q][0] * kh[q][0] - c[q][1] * kh[q][1];
        double im = c[q][0] * kh[q][1] + c[q][1] * kh[q][0];
        c[q][0] = re;
        c[q][1] = im;
    }
    fftw_execute_dft_c2r(plans_->backward, c.get(), r.get());
    const double scale = spacing_ * spacing_ / static_cast<double>(nr);
    Eigen::VectorXd out(rho.size());
    for (int j = 0; j < my_; ++j)
        for (int i = 0; i < mx_; ++i) out[i + mx_ * j] = r[static_cast<std::size_t>(j) * px_ + i] * scale;
    return out;
}

double CoulombTensor::symmetry_error() const {
    double worst = 0.0;
    for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j)
            for (int k = 0; k < n_; ++k)
                for (int l = 0; l < n_; ++l) {
                    double v = (*this)(i, j, k, l);
                    for (double w : {(*this)(k, j, i, l), (*this)(i, l, k, j), (*this)(k, l, i, j),
                                     (*this)(j, i, l, k), (*this)(l, i, j, k), (*this)(j, k, l, i),
                                     (*this)(l, k, j, i)})
                        worst = std::max(worst, std::abs(v - w));
                }
    return worst;
}

double coulomb_element(const OrbitalSet& o, int i, int j, int k, int l, const CoulombKernel& kernel) {
    const int n = o.count();
    for (int q : {i, j, k, l})
        if (q < 0 || q >= n) throw InputError("orbital index out of range");
    const int mx = o.nx - 2, my = o.ny - 2;
    const double h = o.spacing;
    Eigen::VectorXd r1 = o.wavefunctions.col(i).cwiseProduct(o.wavefunctions.col(k));
    Eigen::VectorXd r2 = o.wavefunctions.col(j).cwiseProduct(o.wavefunctions.col(l));
    double total = 0.0;
    for (int b = 0; b < my; ++b)
        for (int a = 0; a < mx; ++a) {
            double ra = r1[a + mx * b];
            if (ra == 0.0) continue;
            double inner = 0.0;
            for (int d = 0; d < my; ++d) {
                double dy = (d - b) * h;
                for (int c = 0; c < mx; ++c) {
                    double dx = (c - a) * h;
                    inner += kernel(dx * dx + dy * dy) * r2[c + mx * d];
                }
            }
            total += ra * inner;
        }
    return total * h * h * h * h;
}

double coulomb_element(const OrbitalSet& o, int i, int j, int k, int l, const MaterialParams& m) {
    return coulomb_element(o, i, j, k, l, CoulombKernel::from_material(m));
}

CoulombTensor build_coulomb_tensor(const OrbitalSet& o, const HartreeEngine& engine) {
    const int n = o.count();
    const int pairs = n * (n + 1) / 2;
    const Eigen::Index m = o.wavefunctions.rows();
    auto pid = [n](int a, int b) {
        if (a > b) std::swap(a, b);
        return a * n - a * (a - 1) / 2 + (b - a);
    };
    Eigen::MatrixXd rho(m, pairs), phi(m, pairs);
    for (int a = 0; a < n; ++a)
        for (int b = a; b < n; ++b) {
            int p = pid(a, b);
            rho.col(p) = o.wavefunctions.col(a).cwiseProduct(o.wavefunctions.col(b));
            phi.col(p) = engine.potential(rho.col(p));
        }
    const double h2 = o.spacing * o.spacing;
    Eigen::MatrixXd g = h2 * (rho.transpose() * phi);
    g = 0.5 * (g + g.transpose()).eval();
    CoulombTensor t(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l) t.at(i, j, k, l) = g(pid(i, k), pid(j, l));
    return t;
}

CoulombTensor build_coulomb_tensor(const OrbitalSet& o, const CoulombKernel& kernel) {
    HartreeEngine engine(o.nx - 2, o.ny - 2, o.spacing, kernel);
    return build_coulomb_tensor(o, engine);
}

std::string coulomb_cache_key(const OrbitalSet& o, const CoulombKernel& kernel) {
    std::string blob;
    auto put = [&blob](const void* p, std::size_t n) { blob.append(static_cast<const char*>(p), n); };
    int dims[3] = {o.nx, o.ny, o.count()};
    put(dims, sizeof dims);
    double scal[4] = {o.spacing, kernel.strength, kernel.softening, 0.0};
    put(scal, sizeof scal);
    put(o.wavefunctions.data(), static_cast<std::size_t>(o.wavefunctions.size()) * sizeof(double));
    return util::sha256_hex(blob);
}

CoulombTensor CoulombCache::get(const OrbitalSet& o, const CoulombKernel& kernel) {
    const std::string key = coulomb_cache_key(o, kernel);
    {
        std::lock_guard lock(mu_);
        if (auto it = mem_.find(key); it != mem_.end()) return it->second;
    }
    const int n = o.count();
    const std::size_t len = static_cast<std::size_t>(n) * n * n * n;
    if (!dir_.empty()) {
        std::ifstream in(dir_ / (key + ".ctensor"), std::ios::binary);
        if (in) {
            CoulombTensor t(n);
            std::vector<double> buf(len);
            in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(len * sizeof(double)));
            if (in.gcount() == static_cast<std::streamsize>(len * sizeof(double))) {
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j)
                        for (int k = 0; k < n; ++k)
                            for (int l = 0; l < n; ++l)
                                t.at(i, j, k, l) = buf[((static_cast<std::size_t>(i) * n + j) * n + k) * n + l];
                std::lock_guard lock(mu_);
                return mem_.emplace(key, std::move(t)).first->second;
            }
        }
    }
    CoulombTensor t = build_coulomb_tensor(o, kernel);
    if (!dir_.empty()) {
        std::filesystem::create_directories(dir_);
        const auto& d = t.data();
        util::write_file_atomic(dir_ / (key + ".ctensor"),
                                std::string_view(reinterpret_cast<const char*>(d.data()), d.size() * sizeof(double)));
    }
    std::lock_guard lock(mu_);
    ++computed_;
    return mem_.emplace(key, std::move(t)).first->second;
}

}  // namespace qdsim
