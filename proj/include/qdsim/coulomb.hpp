#pragma once

#include "qdsim/device.hpp"
#include "qdsim/eigensolver.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace qdsim {

/// K(r) = strength / sqrt(r^2 + softening^2), strength = e^2/(4 pi eps0 eps_r) * scale.
struct CoulombKernel {
    double strength = 0.0;   // meV nm
    double softening = 0.0;  // nm

    static CoulombKernel from_material(const MaterialParams& m, double scale = 1.0);
    double operator()(double r2) const;  // argument is r^2
};

/// Hartree potential h^2 sum_r' K(r - r') rho(r') on the interior nodes of a
/// grid, evaluated as a zero-padded FFT convolution (identical to the direct
/// sum up to round-off). Thread-safe once constructed.
class HartreeEngine {
public:
    HartreeEngine(int mx, int my, double spacing, const CoulombKernel& kernel);
    ~HartreeEngine();
    HartreeEngine(const HartreeEngine&) = delete;
    HartreeEngine& operator=(const HartreeEngine&) = delete;

    /// rho: interior nodes, index i + mx*j.
    Eigen::VectorXd potential(const Eigen::VectorXd& rho) const;
    const CoulombKernel& kernel() const { return kernel_; }

private:
    struct Plans;
    int mx_, my_, px_, py_;
    double spacing_;
    CoulombKernel kernel_;
    std::unique_ptr<Plans> plans_;
};

/// (ij|kl) = double integral psi_i(1) psi_j(2) K psi_k(1) psi_l(2), meV.
class CoulombTensor {
public:
    CoulombTensor() = default;
    explicit CoulombTensor(int n) : n_(n), data_(static_cast<std::size_t>(n) * n * n * n, 0.0) {}

    int size() const { return n_; }
    double operator()(int i, int j, int k, int l) const { return data_[index(i, j, k, l)]; }
    double& at(int i, int j, int k, int l) { return data_[index(i, j, k, l)]; }
    const std::vector<double>& data() const { return data_; }
    /// largest violation of the eight real-orbital index symmetries
    double symmetry_error() const;

private:
    std::size_t index(int i, int j, int k, int l) const {
        return ((static_cast<std::size_t>(i) * n_ + j) * n_ + k) * n_ + l;
    }
    int n_ = 0;
    std::vector<double> data_;
};

/// One element by the direct double sum over grid nodes.
double coulomb_element(const OrbitalSet& orbitals, int i, int j, int k, int l,
                       const CoulombKernel& kernel);
double coulomb_element(const OrbitalSet& orbitals, int i, int j, int k, int l,
                       const MaterialParams& material);

/// Full tensor from FFT pair potentials; all permutations filled exactly.
CoulombTensor build_coulomb_tensor(const OrbitalSet& orbitals, const HartreeEngine& engine);
CoulombTensor build_coulomb_tensor(const OrbitalSet& orbitals, const CoulombKernel& kernel);

/// Content hash of an orbital set and kernel, the key of CoulombCache.
std::string coulomb_cache_key(const OrbitalSet& orbitals, const CoulombKernel& kernel);

/// Memoizes tensors by content hash; with a directory, entries are also
/// stored on disk as "<key>.ctensor".
class CoulombCache {
public:
    explicit CoulombCache(std::filesystem::path dir = {}) : dir_(std::move(dir)) {}
    CoulombTensor get(const OrbitalSet& orbitals, const CoulombKernel& kernel);
    std::size_t computed() const { return computed_; }

private:
    std::filesystem::path dir_;
    std::mutex mu_;
    std::map<std::string, CoulombTensor> mem_;
    std::size_t computed_ = 0;
};

}  // namespace qdsim
