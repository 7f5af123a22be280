#include <doctest.h>

#include <algorithm>
#include <map>

#include "hsdla/hybrid_dynamic.hpp"
#include "hsdla/kernels.hpp"
#include "naive_ref.hpp"

using namespace hsdla;
using namespace hsdla::hybrid;
using hsdla::device::Device;
using hsdla::device::DevicePool;
using hsdla::device::DispatchLog;
using hsdla::device::parse_device_spec;

namespace {

std::vector<const Device*> device_view(DevicePool& pool) {
  std::vector<const Device*> v;
  for (std::size_t i = 0; i < pool.size(); ++i) v.push_back(&pool.device(i));
  return v;
}

}  // namespace

TEST_CASE("choose_block_size cases") {
  // unconstrained, plentiful memory -> default cap 128
  {
    DevicePool pool({parse_device_spec("sim:rate=1,mem=16G")});
    CHECK(choose_block_size(pool, 4096, 256) == 128);
  }
  // memory-bound: 4 tiles of b^2 complex doubles must fit
  {
    DevicePool pool({parse_device_spec("sim:rate=1,mem=640000")});
    // b_mem = floor(sqrt(640000 / 64)) = 100
    CHECK(choose_block_size(pool, 4096, 256) == 100);
  }
  // divisible-by-64-but-not-256, b_mem = 256: 256 rejected, 192 accepted
  {
    DevicePool pool({parse_device_spec("sim:rate=1,mem=4194304,block64not256")});
    CHECK(choose_block_size(pool, 4096, 256) == 192);
  }
  // small problem bounds the block
  {
    DevicePool pool({parse_device_spec("sim:rate=1,mem=16G")});
    CHECK(choose_block_size(pool, 64, 256) == 64);
  }
  // infeasible: constraint demands multiples of 64, memory allows < 64
  {
    DevicePool pool({parse_device_spec("sim:rate=1,mem=100000,block64not256")});
    // b_mem = floor(sqrt(100000/64)) = 39 < 64
    CHECK_THROWS_AS(choose_block_size(pool, 4096, 256), ConfigError);
  }
}

TEST_CASE("triangular plan covers the lower triangle exactly once") {
  const std::size_t n = 100, k = 16, blk = 32;  // t = 4 tiles per side
  const ComplexMatrix a = naive::random_matrix(k, n, 1);
  HermitianView c(n);
  const TilePlan plan = plan_herk(1.0, a, 0.0, c, blk);
  CHECK(plan.ops.size() == 4 * 5 / 2);  // t(t+1)/2

  // every lower-triangle element covered exactly once
  std::vector<int> cover(n * n, 0);
  for (const auto& op : plan.ops) {
    for (std::size_t j = 0; j < op.cr.cols; ++j) {
      for (std::size_t i = 0; i < op.cr.rows; ++i) {
        const std::size_t r = op.cr.row0 + i, cc = op.cr.col0 + j;
        if (op.kind == device::OpKind::HerkTile && r < cc) continue;
        cover[cc * n + r] += 1;
      }
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(cover[j * n + i] == (i >= j ? 1 : 0));
    }
  }

  CHECK(plan_herk(1.0, a, 0.0, c, 128).ops.size() == 1);
  CHECK(plan_herk(1.0, a, 0.0, c, 50).ops.size() == 3);
}

TEST_CASE("dynamic dispatch: exactly once, all device counts, all sizes") {
  for (std::size_t ndev : {std::size_t(0), std::size_t(1), std::size_t(2),
                           std::size_t(4)}) {
    for (std::size_t n : {std::size_t(63), std::size_t(64), std::size_t(100),
                          std::size_t(256)}) {
      const std::size_t k = 32;
      const ComplexMatrix a = naive::random_matrix(k, n, n);
      const ComplexMatrix b = naive::random_matrix(k, n, n + 1);

      std::vector<device::DeviceDescriptor> descs;
      for (std::size_t d = 0; d < ndev; ++d) {
        descs.push_back(parse_device_spec("sim:rate=1.5"));
      }
      DevicePool pool(std::move(descs));
      pool.set_calibrated_cpu_rate(1e9);

      HermitianView want(n), got(n);
      kernels::her2k(cplx(0.5, 0.5), a, b, 0.0, want);

      DispatchLog log;
      const std::size_t blk = 32;
      const TilePlan plan = plan_her2k(cplx(0.5, 0.5), a, b, 0.0, got, blk);
      {
        TilePlan logged = plan;
        for (auto& op : logged.ops) op.log = &log;
        dispatch(logged, pool, &log);
      }
      CHECK(naive::max_abs_diff_lower(got.matrix(), want.matrix()) < 1e-12);

      // dispatch-log multiset == plan multiset (by plan index and dest)
      const auto recs = log.snapshot();
      REQUIRE(recs.size() == plan.ops.size());
      std::map<int, int> seen;
      for (const auto& r : recs) seen[r.plan_index] += 1;
      for (const auto& op : plan.ops) {
        CHECK(seen[op.plan_index] == 1);
        const auto it = std::find_if(recs.begin(), recs.end(), [&](const auto& r) {
          return r.plan_index == op.plan_index;
        });
        REQUIRE(it != recs.end());
        CHECK(it->dest.row0 == op.cr.row0);
        CHECK(it->dest.col0 == op.cr.col0);
        CHECK(it->dest.rows == op.cr.rows);
        CHECK(it->dest.cols == op.cr.cols);
      }
    }
  }
}

TEST_CASE("starved accelerator: cpu takes the strict majority of tiles") {
  // one accelerator, queue depth 1, very slow -> its queue is full almost
  // always and the scheduler falls through to the cpu
  DevicePool pool({parse_device_spec("sim:rate=3e-4,queue=1")});
  pool.set_calibrated_cpu_rate(1e9);
  const std::size_t n = 256, k = 16;
  const ComplexMatrix a = naive::random_matrix(k, n, 1);
  HermitianView want(n), got(n);
  kernels::her2k(cplx(1.0), a, a, 0.0, want);

  DispatchLog log;
  her2k_dynamic(cplx(1.0), a, a, 0.0, got, pool, 32, nullptr, &log);
  CHECK(naive::max_abs_diff_lower(got.matrix(), want.matrix()) < 1e-12);

  const auto recs = log.snapshot();
  const int cpu_id = pool.cpu().id();
  std::size_t on_cpu = 0;
  for (const auto& r : recs) on_cpu += r.device_id == cpu_id ? 1 : 0;
  REQUIRE(recs.size() == 8 * 9 / 2);  // 36 tiles at block 32
  CHECK(on_cpu > recs.size() / 2);
  CHECK(on_cpu < recs.size());  // the accelerator still got at least one
}

TEST_CASE("dynamic results are device-count independent bitwise") {
  const std::size_t n = 96, k = 24;
  const ComplexMatrix a = naive::random_matrix(k, n, 2);
  const ComplexMatrix b = naive::random_matrix(k, n, 3);

  ComplexMatrix first;
  for (std::size_t ndev : {std::size_t(1), std::size_t(3)}) {
    std::vector<device::DeviceDescriptor> descs;
    for (std::size_t d = 0; d < ndev; ++d) {
      descs.push_back(parse_device_spec("sim:rate=1.5"));
    }
    DevicePool pool(std::move(descs));
    pool.set_calibrated_cpu_rate(1e9);
    HermitianView c(n);
    herkx_dynamic(cplx(0.25, 1.0), a, b, 0.0, c, pool, 32);
    if (first.size() == 0) {
      first = c.matrix();
    } else {
      CHECK(naive::max_abs_diff_lower(c.matrix(), first) == 0.0);
    }
  }
}

TEST_CASE("gemm_dynamic covers a rectangular output") {
  DevicePool pool({parse_device_spec("sim:rate=2")});
  pool.set_calibrated_cpu_rate(1e9);
  const ComplexMatrix a = naive::random_matrix(16, 40, 4);  // k x m panels
  const ComplexMatrix b = naive::random_matrix(16, 72, 5);
  ComplexMatrix want(40, 72), got(40, 72);
  naive::gemm(cplx(1.0), a, kernels::Trans::ConjTrans, b, kernels::Trans::None,
              cplx(0.0), want);
  FlopLedger ledger;
  gemm_dynamic(cplx(1.0), a, b, cplx(0.0), got, pool, 32, &ledger);
  CHECK(naive::max_abs_diff(got, want) < 1e-12);
  CHECK(ledger.count("gemm") == 8ull * 40 * 72 * 16);
}

TEST_CASE("choose_block_size considers every device in the pool") {
  DevicePool pool({parse_device_spec("sim:rate=1,mem=16G"),
                   parse_device_spec("sim:rate=1,mem=640000")});
  CHECK(choose_block_size(device_view(pool), 4096, 64) == 100);
}
