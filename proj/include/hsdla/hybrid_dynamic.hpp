#pragma once

#include "hsdla/device.hpp"
#include "hsdla/flop_ledger.hpp"

namespace hsdla::hybrid {

/// Square tiling of one triangular or general update: the list of block ops
/// covering the output exactly once.
struct TilePlan {
  std::size_t block = 0;
  std::vector<device::BlockOp> ops;
};

/// Memory-driven block sizing. b is the largest candidate that fits
/// c_tiles = 4 packed tiles into the smallest device memory, satisfies every
/// device's block constraint, and does not exceed n. Unconstrained pools cap
/// at the default 128.
std::size_t choose_block_size(const std::vector<const device::Device*>& devices,
                              std::size_t n, std::size_t k);
std::size_t choose_block_size(device::DevicePool& pool, std::size_t n,
                              std::size_t k);

// Plans for the conjugate-transpose forms: A, B are k x n panels, C is n x n
// (lower triangle) or m x n for gemm. `col0`/`order` select a principal
// diagonal subblock of C (used by the static split); order 0 means all of C.
TilePlan plan_herk(double alpha, const ComplexMatrix& a, double beta,
                   HermitianView& c, std::size_t b, std::size_t col0 = 0,
                   std::size_t order = 0);
TilePlan plan_her2k(cplx alpha, const ComplexMatrix& a, const ComplexMatrix& b,
                    double beta, HermitianView& c, std::size_t blk,
                    std::size_t col0 = 0, std::size_t order = 0);
TilePlan plan_herkx(cplx alpha, const ComplexMatrix& a, const ComplexMatrix& b,
                    double beta, HermitianView& c, std::size_t blk,
                    std::size_t col0 = 0, std::size_t order = 0);
TilePlan plan_gemm(cplx alpha, const ComplexMatrix& a, const ComplexMatrix& b,
                   cplx beta, ComplexMatrix& c, std::size_t blk);

/// Round-robin dispatch over the accelerator queues with queue-full skipping;
/// the CPU executes an op itself when every accelerator queue is full (or no
/// accelerator exists). Blocks until all results are unpacked.
void dispatch(const TilePlan& plan, device::DevicePool& pool,
              device::DispatchLog* log = nullptr);

// Whole-kernel conveniences: size, plan, dispatch, and charge the closed-form
// ledger count (split-invariant).
void herk_dynamic(double alpha, const ComplexMatrix& a, double beta,
                  HermitianView& c, device::DevicePool& pool,
                  std::size_t block_override = 0, FlopLedger* ledger = nullptr,
                  device::DispatchLog* log = nullptr);
void her2k_dynamic(cplx alpha, const ComplexMatrix& a, const ComplexMatrix& b,
                   double beta, HermitianView& c, device::DevicePool& pool,
                   std::size_t block_override = 0, FlopLedger* ledger = nullptr,
                   device::DispatchLog* log = nullptr);
void herkx_dynamic(cplx alpha, const ComplexMatrix& a, const ComplexMatrix& b,
                   double beta, HermitianView& c, device::DevicePool& pool,
                   std::size_t block_override = 0, FlopLedger* ledger = nullptr,
                   device::DispatchLog* log = nullptr);
void gemm_dynamic(cplx alpha, const ComplexMatrix& a, const ComplexMatrix& b,
                  cplx beta, ComplexMatrix& c, device::DevicePool& pool,
                  std::size_t block_override = 0, FlopLedger* ledger = nullptr,
                  device::DispatchLog* log = nullptr);

}  // namespace hsdla::hybrid
