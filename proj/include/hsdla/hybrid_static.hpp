#pragma once

#include "hsdla/device.hpp"
#include "hsdla/flop_ledger.hpp"

namespace hsdla::hybrid {

/// Static partition of a rank-k/2k update: principal submatrix C00 of order
/// n_g goes to the accelerators, C10 and C11 stay on the CPU.
struct StaticSplit {
  std::size_t n = 0;    // output order
  std::size_t n_g = 0;  // accelerator principal-submatrix order
  double m = 1.0;       // rate ratio accelerators / CPU
  std::size_t k = 0;    // inner dimension (kept for interface symmetry)
};

/// n_g from the balance formula n_g^2 = (m n^2 + 4 m) / (m + 1), rounded
/// half-up and clamped to [0, n]. k-independent after simplification.
std::size_t compute_split(std::size_t n, std::size_t k, double m);

StaticSplit make_split(std::size_t n, std::size_t k, double m);

/// Empirical alternative to a prescribed ratio: run both sides on a problem
/// of order n/8 and derive m from the modeled busy times.
double calibrate_split_ratio(device::DevicePool& pool, std::size_t n,
                             std::size_t k);

void her2k_static(cplx alpha, const ComplexMatrix& a, const ComplexMatrix& b,
                  double beta, HermitianView& c, const StaticSplit& split,
                  device::DevicePool& pool, FlopLedger* ledger = nullptr,
                  std::vector<std::string>* warnings = nullptr,
                  device::DispatchLog* log = nullptr);

void herk_static(double alpha, const ComplexMatrix& a, double beta,
                 HermitianView& c, const StaticSplit& split,
                 device::DevicePool& pool, FlopLedger* ledger = nullptr,
                 std::vector<std::string>* warnings = nullptr,
                 device::DispatchLog* log = nullptr);

void herkx_static(cplx alpha, const ComplexMatrix& a, const ComplexMatrix& b,
                  double beta, HermitianView& c, const StaticSplit& split,
                  device::DevicePool& pool, FlopLedger* ledger = nullptr,
                  std::vector<std::string>* warnings = nullptr,
                  device::DispatchLog* log = nullptr);

}  // namespace hsdla::hybrid
