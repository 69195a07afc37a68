#pragma once

#include <vector>

namespace eot {

// Log-domain Schrödinger potentials. The induced coupling is
//   pi_ij = exp(log_phi_i + log_density_ij + log_psi_j) * P_ij,
// i.e. the density dpi/dR factorizes as exp(log_phi (+) log_psi).
// The pair is unique up to one additive constant moved between the sides.
struct Potentials {
  std::vector<double> log_phi;
  std::vector<double> log_psi;
};

}  // namespace eot
