#include "hsdla/hybrid_static.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "hsdla/hybrid_dynamic.hpp"

namespace hsdla::hybrid {

using device::BlockOp;
using device::Device;
using device::DevicePool;
using device::DispatchLog;
using device::OpKind;

std::size_t compute_split(std::size_t n, std::size_t k, double m) {
  (void)k;  // the closed form is k-independent after simplification
  if (n < 1 || m <= 0.0) throw ConfigError("compute_split: need n >= 1, m > 0");
  const double nn = static_cast<double>(n);
  const double ng = std::sqrt((m * nn * nn + 4.0 * m) / (m + 1.0));
  const double rounded = std::floor(ng + 0.5);  // ties round half-up
  return static_cast<std::size_t>(std::clamp(rounded, 0.0, nn));
}

StaticSplit make_split(std::size_t n, std::size_t k, double m) {
  return {n, compute_split(n, k, m), m, k};
}

namespace {

void warn(std::vector<std::string>* warnings, std::string msg) {
  if (warnings) warnings->push_back(std::move(msg));
}

// Snap n_g down to the strictest accelerator block-constraint multiple.
std::size_t snap_to_constraints(std::size_t n_g,
                                const std::vector<Device*>& accels) {
  for (const Device* d : accels) {
    const auto& c = d->descriptor().block;
    if (c.none() || n_g == 0) continue;
    std::size_t b = (n_g / c.divisor) * c.divisor;
    while (b > 0 && !c.accepts(b)) b -= c.divisor;
    n_g = b;
  }
  return n_g;
}

// Pre-computed assignment: each tile op goes to the accelerator with the
// least modeled load. Enqueue blocks (spin) on a full queue; the assignment
// itself is fixed up front.
void run_accel_side(const TilePlan& plan, std::vector<Device*>& accels,
                    Device& cpu, const kernels::KernelConfig& cpu_cfg,
                    DispatchLog* log) {
  std::vector<double> load(accels.size(), 0.0);
  std::vector<std::size_t> order(plan.ops.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return device::block_op_flops(plan.ops[x]) >
           device::block_op_flops(plan.ops[y]);
  });
  for (const std::size_t i : order) {
    BlockOp op = plan.ops[i];
    op.log = log;
    std::size_t best = 0;
    for (std::size_t d = 1; d < accels.size(); ++d) {
      if (load[d] < load[best]) best = d;
    }
    Device* dev = accels[best];
    load[best] += static_cast<double>(device::block_op_flops(op)) /
                  dev->descriptor().rate_factor;
    for (;;) {
      const auto r = dev->enqueue(op);
      if (r == device::EnqueueResult::Accepted) break;
      if (r == device::EnqueueResult::TooLarge) {
        cpu.execute_inline(op, cpu_cfg);  // should not happen with a sized plan
        break;
      }
      std::this_thread::yield();
    }
  }
}

struct SplitParts {
  std::size_t n_g = 0;
  std::vector<Device*> accels;
  std::size_t accel_block = 0;
};

SplitParts prepare(const StaticSplit& split, std::size_t n, std::size_t k,
                   DevicePool& pool, std::vector<std::string>* warnings) {
  SplitParts parts;
  parts.accels = pool.accelerators();
  parts.n_g = std::min(split.n_g, n);
  if (parts.accels.empty()) {
    if (parts.n_g > 0) {
      warn(warnings, "static split: no accelerator available, running on CPU");
    }
    parts.n_g = 0;
    return parts;
  }
  const std::size_t snapped = snap_to_constraints(parts.n_g, parts.accels);
  if (snapped != parts.n_g) {
    warn(warnings, "static split: n_g snapped from " +
                       std::to_string(parts.n_g) + " to " +
                       std::to_string(snapped) + " for block constraints");
    parts.n_g = snapped;
  }
  if (parts.n_g == 0) return parts;
  try {
    std::vector<const Device*> view(parts.accels.begin(), parts.accels.end());
    parts.accel_block = choose_block_size(view, parts.n_g, k);
  } catch (const ConfigError&) {
    warn(warnings, "static split: no feasible accelerator tile, running on CPU");
    parts.n_g = 0;
  }
  return parts;
}

// Fork-join with exactly two branches: one drives the accelerators, the
// caller's thread computes the CPU blocks.
void run_two_sided(const TilePlan& accel_plan, std::vector<Device*> accels,
                   const std::vector<BlockOp>& cpu_ops, DevicePool& pool,
                   DispatchLog* log) {
  pool.calibrated_cpu_rate();
  Device& cpu = pool.cpu();
  std::thread accel_branch;
  if (!accel_plan.ops.empty()) {
    accel_branch = std::thread([&] {
      run_accel_side(accel_plan, accels, cpu, pool.cpu_config(), log);
    });
  }
  for (const BlockOp& planned : cpu_ops) {
    BlockOp op = planned;
    op.log = log;
    cpu.execute_inline(op, pool.cpu_config());
  }
  if (accel_branch.joinable()) accel_branch.join();
  pool.wait_all();
}

}  // namespace

void her2k_static(cplx alpha, const ComplexMatrix& a, const ComplexMatrix& b,
                  double beta, HermitianView& c, const StaticSplit& split,
                  DevicePool& pool, FlopLedger* ledger,
                  std::vector<std::string>* warnings, DispatchLog* log) {
  const std::size_t n = a.cols(), k = a.rows();
  if (!a.same_shape(b) || c.order() != n || split.n != n) {
    throw DimensionError("her2k_static: nonconforming dimensions");
  }
  if (ledger) ledger->add("her2k", 8ull * k * n * n);
  if (n == 0) return;

  const SplitParts parts = prepare(split, n, k, pool, warnings);
  const std::size_t n_g = parts.n_g;
  const std::size_t n1 = n - n_g;

  TilePlan accel_plan;
  if (n_g > 0) {
    accel_plan = plan_her2k(alpha, a, b, beta, c, parts.accel_block, 0, n_g);
  }

  std::vector<BlockOp> cpu_ops;
  if (n1 > 0) {
    BlockOp c11;
    c11.kind = OpKind::Her2kTile;
    c11.c = &c.matrix();
    c11.cr = {n_g, n_g, n1, n1};
    c11.beta = beta;
    c11.terms.push_back({&a, {0, n_g, k, n1}, &b, {0, n_g, k, n1}, alpha});
    cpu_ops.push_back(std::move(c11));
    if (n_g > 0) {
      // C10 := alpha A1^H B0 + conj(alpha) B1^H A0 + beta C10 (two gemms)
      BlockOp c10;
      c10.kind = OpKind::Gemm;
      c10.c = &c.matrix();
      c10.cr = {n_g, 0, n1, n_g};
      c10.beta_c = beta;
      c10.terms.push_back({&a, {0, n_g, k, n1}, &b, {0, 0, k, n_g}, alpha});
      c10.terms.push_back({&b, {0, n_g, k, n1}, &a, {0, 0, k, n_g},
                           std::conj(alpha)});
      cpu_ops.push_back(std::move(c10));
    }
  }
  run_two_sided(accel_plan, parts.accels, cpu_ops, pool, log);
}

void herk_static(double alpha, const ComplexMatrix& a, double beta,
                 HermitianView& c, const StaticSplit& split, DevicePool& pool,
                 FlopLedger* ledger, std::vector<std::string>* warnings,
                 DispatchLog* log) {
  const std::size_t n = a.cols(), k = a.rows();
  if (c.order() != n || split.n != n) {
    throw DimensionError("herk_static: nonconforming dimensions");
  }
  if (ledger) ledger->add("herk", 4ull * k * n * n);
  if (n == 0) return;

  const SplitParts parts = prepare(split, n, k, pool, warnings);
  const std::size_t n_g = parts.n_g;
  const std::size_t n1 = n - n_g;

  TilePlan accel_plan;
  if (n_g > 0) accel_plan = plan_herk(alpha, a, beta, c, parts.accel_block, 0, n_g);

  std::vector<BlockOp> cpu_ops;
  if (n1 > 0) {
    BlockOp c11;
    c11.kind = OpKind::HerkTile;
    c11.c = &c.matrix();
    c11.cr = {n_g, n_g, n1, n1};
    c11.beta = beta;
    c11.terms.push_back({&a, {0, n_g, k, n1}, &a, {0, n_g, k, n1}, cplx(alpha)});
    cpu_ops.push_back(std::move(c11));
    if (n_g > 0) {
      BlockOp c10;
      c10.kind = OpKind::Gemm;
      c10.c = &c.matrix();
      c10.cr = {n_g, 0, n1, n_g};
      c10.beta_c = beta;
      c10.terms.push_back({&a, {0, n_g, k, n1}, &a, {0, 0, k, n_g}, cplx(alpha)});
      cpu_ops.push_back(std::move(c10));
    }
  }
  run_two_sided(accel_plan, parts.accels, cpu_ops, pool, log);
}

void herkx_static(cplx alpha, const ComplexMatrix& a, const ComplexMatrix& b,
                  double beta, HermitianView& c, const StaticSplit& split,
                  DevicePool& pool, FlopLedger* ledger,
                  std::vector<std::string>* warnings, DispatchLog* log) {
  const std::size_t n = a.cols(), k = a.rows();
  if (!a.same_shape(b) || c.order() != n || split.n != n) {
    throw DimensionError("herkx_static: nonconforming dimensions");
  }
  if (ledger) ledger->add("herkx", 4ull * k * n * n);
  if (n == 0) return;

  const SplitParts parts = prepare(split, n, k, pool, warnings);
  const std::size_t n_g = parts.n_g;
  const std::size_t n1 = n - n_g;

  TilePlan accel_plan;
  if (n_g > 0) {
    accel_plan = plan_herkx(alpha, a, b, beta, c, parts.accel_block, 0, n_g);
  }

  std::vector<BlockOp> cpu_ops;
  if (n1 > 0) {
    BlockOp c11;
    c11.kind = OpKind::HerkxTile;
    c11.c = &c.matrix();
    c11.cr = {n_g, n_g, n1, n1};
    c11.beta = beta;
    c11.terms.push_back({&a, {0, n_g, k, n1}, &b, {0, n_g, k, n1}, alpha});
    cpu_ops.push_back(std::move(c11));
    if (n_g > 0) {
      BlockOp c10;
      c10.kind = OpKind::Gemm;
      c10.c = &c.matrix();
      c10.cr = {n_g, 0, n1, n_g};
      c10.beta_c = beta;
      c10.terms.push_back({&a, {0, n_g, k, n1}, &b, {0, 0, k, n_g}, alpha});
      cpu_ops.push_back(std::move(c10));
    }
  }
  run_two_sided(accel_plan, parts.accels, cpu_ops, pool, log);
}

double calibrate_split_ratio(DevicePool& pool, std::size_t n, std::size_t k) {
  std::vector<Device*> accels = pool.accelerators();
  if (accels.empty()) return 1.0;
  const std::size_t probe = std::max<std::size_t>(n / 8, 16);
  const std::size_t kk = std::max<std::size_t>(std::min(k, probe), 8);

  ComplexMatrix a(kk, probe), b(kk, probe);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a.data()[i] = cplx(0.3 + 1e-3 * static_cast<double>(i % 101), 0.1);
    b.data()[i] = cplx(-0.2, 0.4 - 1e-3 * static_cast<double>(i % 103));
  }
  HermitianView c(probe);
  pool.calibrated_cpu_rate();

  Device& cpu = pool.cpu();
  const double cpu0 = cpu.busy_seconds();
  StaticSplit all_cpu{probe, 0, 1.0, kk};
  her2k_static(cplx(1.0), a, b, 0.0, c, all_cpu, pool);
  const double t_cpu = cpu.busy_seconds() - cpu0;

  auto accel_busy = [&accels] {
    double s = 0.0;
    for (const Device* d : accels) s += d->busy_seconds();
    return s;
  };
  const double acc0 = accel_busy();
  StaticSplit all_acc{probe, probe, 1.0, kk};
  her2k_static(cplx(1.0), a, b, 0.0, c, all_acc, pool);
  const double t_acc = accel_busy() - acc0;

  if (t_acc <= 0.0 || t_cpu <= 0.0) return 1.0;
  return t_cpu / t_acc;
}

}  // namespace hsdla::hybrid
