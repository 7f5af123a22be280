#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hsdla/complex_matrix.hpp"

namespace hsdla {

/// Full input for one H/S construction: stacked A and B coefficient matrices,
/// per-atom T operators, and the diagonal norms U.
///
/// T^[BA] is never stored; it is the conjugate transpose of T_AB.
struct ProblemInstance {
  std::size_t n_atoms = 0;
  std::size_t n_l = 0;
  std::size_t n_g = 0;
  ComplexMatrix A;  // (n_atoms * n_l) x n_g, atom blocks stacked rowwise
  ComplexMatrix B;  // same shape
  std::vector<HermitianView> T_AA;       // n_l x n_l per atom
  std::vector<ComplexMatrix> T_AB;       // n_l x n_l per atom
  std::vector<HermitianView> T_BB;       // n_l x n_l per atom
  std::vector<std::vector<double>> U;    // real diagonal, length n_l per atom
  std::vector<bool> hpd_flags;           // T_AA[a] generated positive definite?
};

/// Deterministic synthetic instance. A, B entries uniform in [-1,1]^2 complex;
/// T_AA = M^H M + I for the first n_atoms - n_not_hpd atoms and M^H M - s I
/// (s >= lambda_max, so Cholesky fails) for the rest; T_BB symmetrized random;
/// U uniform in (0.5, 1.5).
ProblemInstance generate_problem(std::size_t n_atoms, std::size_t n_l,
                                 std::size_t n_g, std::uint64_t seed,
                                 std::size_t n_not_hpd);

// --- Binary problem file ("HSDL" magic, little-endian doubles) ---

void save_problem(const ProblemInstance& p, const std::string& path);
ProblemInstance load_problem(const std::string& path);

// --- Canonical problem-size presets ---

struct Preset {
  std::string name;
  std::size_t n_atoms, n_l, n_g;
};

const std::vector<Preset>& presets();

/// Look up a preset by name ("nacl-2.5", "auag-4.0", ...) and scale its dims
/// by f, rounding up. Returns nullopt for unknown names.
std::optional<Preset> find_preset(const std::string& name, double scale = 1.0);

}  // namespace hsdla
