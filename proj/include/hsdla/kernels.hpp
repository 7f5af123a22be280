#pragma once

#include <functional>
#include <optional>
#include <span>

#include "hsdla/complex_matrix.hpp"
#include "hsdla/flop_ledger.hpp"

namespace hsdla::kernels {

enum class Trans { None, ConjTrans };
enum class Side { Left, Right };

enum class Variant { Reference, BlockedParallel };

struct KernelConfig {
  Variant variant = Variant::Reference;
  std::size_t block = 128;  // output-tile order for BlockedParallel
  int threads = 0;          // 0: HSDLA_THREADS env or hardware concurrency
};

/// Worker count resolved from config / HSDLA_THREADS / hardware.
int resolve_threads(const KernelConfig& cfg);

// All flop charges follow the fused complex model: 1 complex MAC = 8 real
// flops. Charges are per call, closed form, independent of alpha/beta.

/// C := alpha * op(A) * op(B) + beta * C. Ledger += 8 m n k.
void gemm(cplx alpha, const ComplexMatrix& a, Trans ta, const ComplexMatrix& b,
          Trans tb, cplx beta, ComplexMatrix& c, FlopLedger* ledger = nullptr,
          const KernelConfig& cfg = {});

/// Left side: C := alpha * A * B + beta * C with Hermitian A, reading only
/// A's lower triangle. Ledger += 8 n_A^2 cols(B).
void hemm(Side side, cplx alpha, const HermitianView& a, const ComplexMatrix& b,
          cplx beta, ComplexMatrix& c, FlopLedger* ledger = nullptr,
          const KernelConfig& cfg = {});

/// C := alpha * A^H A + beta * C (A is k x n); lower triangle only.
/// Ledger += 4 k n^2.
void herk(double alpha, const ComplexMatrix& a, double beta, HermitianView& c,
          FlopLedger* ledger = nullptr, const KernelConfig& cfg = {});

/// C := alpha * A^H B + conj(alpha) * B^H A + beta * C; lower triangle only.
/// Ledger += 8 k n^2.
void her2k(cplx alpha, const ComplexMatrix& a, const ComplexMatrix& b,
           double beta, HermitianView& c, FlopLedger* ledger = nullptr,
           const KernelConfig& cfg = {});

/// C := alpha * A^H B + beta * C writing the lower triangle only; the caller
/// guarantees the product is Hermitian. Ledger += 4 k n^2.
void herkx(cplx alpha, const ComplexMatrix& a, const ComplexMatrix& b,
           double beta, HermitianView& c, FlopLedger* ledger = nullptr,
           const KernelConfig& cfg = {});

/// In-place B := alpha * op(T) * B with lower-triangular T (left side).
/// Ledger += 4 n_T^2 cols(B).
void trmm(Side side, Trans trans, cplx alpha, const ComplexMatrix& t,
          ComplexMatrix& b, FlopLedger* ledger = nullptr,
          const KernelConfig& cfg = {});

struct PotrfResult {
  std::optional<ComplexMatrix> factor;  // lower triangular, C C^H = A
  std::size_t pivot = 0;                // failing pivot index when !ok()
  bool ok() const { return factor.has_value(); }
};

/// Cholesky factorization of the lower triangle of A. Non-positive-definite
/// input is a structured failure, not an error. Ledger += (4 n^3) / 3.
PotrfResult potrf(const HermitianView& a, FlopLedger* ledger = nullptr);

/// X[r][c] = u[r] * B[r][c] with a real per-row scale. Ledger += 2 rows cols.
void diag_scale(std::span<const double> u, const ComplexMatrix& b,
                ComplexMatrix& x, FlopLedger* ledger = nullptr);

// ---------------------------------------------------------------------------
// Pointer-level cores on column-major storage, shared with the device layer
// and the hybrid strategies. beta == 0 means the destination is not read.
// All "ctn" cores compute the conjugate-transpose-by-none product
// op(A)^H * op(B) with A (k x m) and B (k x n) panels.
namespace detail {

cplx dotc(std::size_t k, const cplx* a, const cplx* b);

void gemm_ctn(std::size_t m, std::size_t n, std::size_t k, cplx alpha,
              const cplx* a, std::size_t lda, const cplx* b, std::size_t ldb,
              cplx beta, cplx* c, std::size_t ldc);

void herk_ctn_lower(std::size_t n, std::size_t k, double alpha, const cplx* a,
                    std::size_t lda, double beta, cplx* c, std::size_t ldc);

void her2k_ctn_lower(std::size_t n, std::size_t k, cplx alpha, const cplx* a,
                     std::size_t lda, const cplx* b, std::size_t ldb,
                     double beta, cplx* c, std::size_t ldc);

void herkx_ctn_lower(std::size_t n, std::size_t k, cplx alpha, const cplx* a,
                     std::size_t lda, const cplx* b, std::size_t ldb,
                     double beta, cplx* c, std::size_t ldc);

/// Hermitian (lower-authoritative) times general: C := alpha * H * B + beta*C.
void hemm_left_lower(std::size_t n, std::size_t m, cplx alpha, const cplx* h,
                     std::size_t ldh, const cplx* b, std::size_t ldb, cplx beta,
                     cplx* c, std::size_t ldc);

/// Run fn(task) for task in [0, num_tasks) on up to `threads` workers.
/// Full barrier before return; first exception is rethrown.
void parallel_for(std::size_t num_tasks, int threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace detail

}  // namespace hsdla::kernels
