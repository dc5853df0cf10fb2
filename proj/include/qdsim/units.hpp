#pragma once

// Internal unit system: lengths in nm, energies in meV, voltages in mV,
// exchange couplings reported in ueV. With the electron charge set to one,
// a potential of 1 mV is a potential energy of -1 meV.

namespace qdsim::units {

/// hbar^2 / (2 m_e) in meV nm^2.
inline constexpr double kHbar2Over2Me = 38.0998212;

/// e^2 / (4 pi eps0) in meV nm.
inline constexpr double kCoulombMeVNm = 1439.96448;

/// Planck constant in eV s.
inline constexpr double kPlanckEvS = 4.135667696e-15;

inline constexpr double kMeVPerUeV = 1e-3;
inline constexpr double kUeVPerMeV = 1e3;

}  // namespace qdsim::units
