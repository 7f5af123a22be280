#include "hsdla/hybrid_dynamic.hpp"

#include <cmath>

namespace hsdla::hybrid {

using device::BlockOp;
using device::Device;
using device::DevicePool;
using device::DispatchLog;
using device::GemmTerm;
using device::OpKind;
using device::Region;

std::size_t choose_block_size(const std::vector<const Device*>& devices,
                              std::size_t n, std::size_t k) {
  (void)k;
  if (devices.empty()) throw ConfigError("choose_block_size: no devices");
  constexpr std::size_t kDefaultCap = 128;
  constexpr std::size_t kTiles = 4;  // two inputs, one output, one staging

  std::size_t b_mem = std::size_t(-1);
  bool constrained = false;
  for (const Device* d : devices) {
    const std::size_t mem = d->descriptor().memory_capacity;
    const std::size_t cap = static_cast<std::size_t>(
        std::sqrt(static_cast<double>(mem / (kTiles * sizeof(cplx)))));
    b_mem = std::min(b_mem, cap);
    constrained = constrained || !d->descriptor().block.none();
  }

  std::size_t upper = std::min(b_mem, n);
  if (!constrained) upper = std::min(upper, kDefaultCap);
  for (std::size_t b = upper; b >= 1; --b) {
    bool ok = true;
    for (const Device* d : devices) {
      const auto& c = d->descriptor().block;
      if (!c.none() && !c.accepts(b)) { ok = false; break; }
    }
    if (ok) return b;
  }
  throw ConfigError("choose_block_size: no feasible block size");
}

std::size_t choose_block_size(DevicePool& pool, std::size_t n, std::size_t k) {
  std::vector<const Device*> devices;
  for (std::size_t i = 0; i < pool.size(); ++i) devices.push_back(&pool.device(i));
  return choose_block_size(devices, n, k);
}

namespace {

// Shared triangular planner: herk passes b == a.
TilePlan plan_tri(OpKind kind, cplx alpha, const ComplexMatrix& a,
                  const ComplexMatrix& b, double beta, HermitianView& c,
                  std::size_t blk, std::size_t col0, std::size_t order) {
  const std::size_t k = a.rows();
  const std::size_t n = order == 0 ? c.order() - col0 : order;
  if (a.cols() != c.order() || b.cols() != c.order() || b.rows() != k ||
      col0 + n > c.order()) {
    throw DimensionError("tile plan: nonconforming dimensions");
  }
  if (blk < 1) throw DimensionError("tile plan: block must be >= 1");

  TilePlan plan;
  plan.block = blk;
  const std::size_t t = (n + blk - 1) / blk;
  int idx = 0;
  for (std::size_t tj = 0; tj < t; ++tj) {
    const std::size_t j0 = col0 + tj * blk;
    const std::size_t w = std::min(blk, col0 + n - j0);
    {
      BlockOp op;
      op.kind = kind;
      op.c = &c.matrix();
      op.cr = {j0, j0, w, w};
      op.beta = beta;
      op.k_chunk = blk;
      op.plan_index = idx++;
      op.terms.push_back({&a, {0, j0, k, w}, &b, {0, j0, k, w}, alpha});
      plan.ops.push_back(std::move(op));
    }
    for (std::size_t ti = tj + 1; ti < t; ++ti) {
      const std::size_t i0 = col0 + ti * blk;
      const std::size_t h = std::min(blk, col0 + n - i0);
      BlockOp op;
      op.kind = OpKind::Gemm;
      op.c = &c.matrix();
      op.cr = {i0, j0, h, w};
      op.beta_c = beta;
      op.k_chunk = blk;
      op.plan_index = idx++;
      switch (kind) {
        case OpKind::HerkTile:
          op.terms.push_back({&a, {0, i0, k, h}, &a, {0, j0, k, w}, alpha});
          break;
        case OpKind::Her2kTile:
          op.terms.push_back({&a, {0, i0, k, h}, &b, {0, j0, k, w}, alpha});
          op.terms.push_back({&b, {0, i0, k, h}, &a, {0, j0, k, w},
                              std::conj(alpha)});
          break;
        case OpKind::HerkxTile:
          op.terms.push_back({&a, {0, i0, k, h}, &b, {0, j0, k, w}, alpha});
          break;
        default:
          throw DimensionError("tile plan: bad kind");
      }
      plan.ops.push_back(std::move(op));
    }
  }
  return plan;
}

}  // namespace

TilePlan plan_herk(double alpha, const ComplexMatrix& a, double beta,
                   HermitianView& c, std::size_t b, std::size_t col0,
                   std::size_t order) {
  return plan_tri(OpKind::HerkTile, cplx(alpha), a, a, beta, c, b, col0, order);
}

TilePlan plan_her2k(cplx alpha, const ComplexMatrix& a, const ComplexMatrix& b,
                    double beta, HermitianView& c, std::size_t blk,
                    std::size_t col0, std::size_t order) {
  return plan_tri(OpKind::Her2kTile, alpha, a, b, beta, c, blk, col0, order);
}

TilePlan plan_herkx(cplx alpha, const ComplexMatrix& a, const ComplexMatrix& b,
                    double beta, HermitianView& c, std::size_t blk,
                    std::size_t col0, std::size_t order) {
  return plan_tri(OpKind::HerkxTile, alpha, a, b, beta, c, blk, col0, order);
}

TilePlan plan_gemm(cplx alpha, const ComplexMatrix& a, const ComplexMatrix& b,
                   cplx beta, ComplexMatrix& c, std::size_t blk) {
  const std::size_t k = a.rows();
  const std::size_t m = a.cols();
  const std::size_t n = b.cols();
  if (b.rows() != k || c.rows() != m || c.cols() != n) {
    throw DimensionError("plan_gemm: nonconforming dimensions");
  }
  if (blk < 1) throw DimensionError("plan_gemm: block must be >= 1");
  TilePlan plan;
  plan.block = blk;
  int idx = 0;
  for (std::size_t j0 = 0; j0 < n; j0 += blk) {
    const std::size_t w = std::min(blk, n - j0);
    for (std::size_t i0 = 0; i0 < m; i0 += blk) {
      const std::size_t h = std::min(blk, m - i0);
      BlockOp op;
      op.kind = OpKind::Gemm;
      op.c = &c;
      op.cr = {i0, j0, h, w};
      op.beta_c = beta;
      op.k_chunk = blk;
      op.plan_index = idx++;
      op.terms.push_back({&a, {0, i0, k, h}, &b, {0, j0, k, w}, alpha});
      plan.ops.push_back(std::move(op));
    }
  }
  return plan;
}

void dispatch(const TilePlan& plan, DevicePool& pool, DispatchLog* log) {
  std::vector<Device*> accels = pool.accelerators();
  Device& cpu = pool.cpu();
  pool.calibrated_cpu_rate();  // make sure the busy-time model is calibrated

  std::size_t rr = 0;
  for (const BlockOp& planned : plan.ops) {
    BlockOp op = planned;
    op.log = log;
    bool placed = false;
    if (!accels.empty()) {
      const std::size_t start = rr;
      std::size_t too_large = 0;
      for (std::size_t i = 0; i < accels.size(); ++i) {
        Device* dev = accels[(start + i) % accels.size()];
        const auto r = dev->enqueue(op);
        if (r == device::EnqueueResult::Accepted) {
          rr = start + i + 1;
          placed = true;
          break;
        }
        if (r == device::EnqueueResult::TooLarge) ++too_large;
      }
      if (!placed) rr = start + 1;
      (void)too_large;  // either way the CPU picks the op up below
    }
    if (!placed) cpu.execute_inline(op, pool.cpu_config());
  }
  pool.wait_all();
}

namespace {

std::size_t pick_block(DevicePool& pool, std::size_t n, std::size_t k,
                       std::size_t block_override) {
  if (block_override > 0) return block_override;
  return choose_block_size(pool, n, k);
}

}  // namespace

void herk_dynamic(double alpha, const ComplexMatrix& a, double beta,
                  HermitianView& c, DevicePool& pool, std::size_t block_override,
                  FlopLedger* ledger, DispatchLog* log) {
  const std::size_t n = a.cols(), k = a.rows();
  if (c.order() != n) throw DimensionError("herk_dynamic: dimensions");
  if (ledger) ledger->add("herk", 4ull * k * n * n);
  if (n == 0) return;
  dispatch(plan_herk(alpha, a, beta, c, pick_block(pool, n, k, block_override)),
           pool, log);
}

void her2k_dynamic(cplx alpha, const ComplexMatrix& a, const ComplexMatrix& b,
                   double beta, HermitianView& c, DevicePool& pool,
                   std::size_t block_override, FlopLedger* ledger,
                   DispatchLog* log) {
  const std::size_t n = a.cols(), k = a.rows();
  if (!a.same_shape(b) || c.order() != n) {
    throw DimensionError("her2k_dynamic: dimensions");
  }
  if (ledger) ledger->add("her2k", 8ull * k * n * n);
  if (n == 0) return;
  dispatch(plan_her2k(alpha, a, b, beta, c, pick_block(pool, n, k, block_override)),
           pool, log);
}

void herkx_dynamic(cplx alpha, const ComplexMatrix& a, const ComplexMatrix& b,
                   double beta, HermitianView& c, DevicePool& pool,
                   std::size_t block_override, FlopLedger* ledger,
                   DispatchLog* log) {
  const std::size_t n = a.cols(), k = a.rows();
  if (!a.same_shape(b) || c.order() != n) {
    throw DimensionError("herkx_dynamic: dimensions");
  }
  if (ledger) ledger->add("herkx", 4ull * k * n * n);
  if (n == 0) return;
  dispatch(plan_herkx(alpha, a, b, beta, c, pick_block(pool, n, k, block_override)),
           pool, log);
}

void gemm_dynamic(cplx alpha, const ComplexMatrix& a, const ComplexMatrix& b,
                  cplx beta, ComplexMatrix& c, DevicePool& pool,
                  std::size_t block_override, FlopLedger* ledger,
                  DispatchLog* log) {
  const std::size_t k = a.rows(), m = a.cols(), n = b.cols();
  if (b.rows() != k || c.rows() != m || c.cols() != n) {
    throw DimensionError("gemm_dynamic: dimensions");
  }
  if (ledger) ledger->add("gemm", 8ull * m * n * k);
  if (m == 0 || n == 0) return;
  dispatch(plan_gemm(alpha, a, b, beta, c,
                     pick_block(pool, std::max(m, n), k, block_override)),
           pool, log);
}

}  // namespace hsdla::hybrid
