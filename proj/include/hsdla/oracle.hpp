#pragma once

#include "hsdla/complex_matrix.hpp"
#include "hsdla/problem.hpp"

namespace hsdla::oracle {

/// Naive evaluation refuses N_G above this bound to keep runtimes in seconds.
constexpr std::size_t kMaxNg = 512;

/// S = sum_a A_a^H A_a + B_a^H U_a^H U_a B_a by naive per-atom loops.
HermitianView direct_S(const ProblemInstance& p);

/// H = sum_a A_a^H T^[AA] A_a + A_a^H T^[AB] B_a + B_a^H T^[BA] A_a
///         + B_a^H T^[BB] B_a, the ungrouped four-term sum, naive loops.
HermitianView direct_H(const ProblemInstance& p);

/// Same H via the grouped substitution Z_a = T^[BA] A_a + 1/2 T^[BB] B_a,
/// i.e. H = sum_a B_a^H Z_a + Z_a^H B_a + A_a^H T^[AA] A_a. Used to check the
/// algebraic identity the pipelines rely on.
HermitianView direct_H_grouped(const ProblemInstance& p);

}  // namespace hsdla::oracle
