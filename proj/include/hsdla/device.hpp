#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "hsdla/complex_matrix.hpp"
#include "hsdla/kernels.hpp"

namespace hsdla::device {

enum class DeviceKind { Cpu, SimulatedAccelerator };

struct BlockConstraint {
  std::size_t divisor = 0;    // 0: unconstrained
  std::size_t forbidden = 0;  // 0: no forbidden multiple
  bool none() const { return divisor == 0; }
  bool accepts(std::size_t b) const {
    if (b == 0) return false;
    if (divisor != 0 && b % divisor != 0) return false;
    if (forbidden != 0 && b % forbidden == 0) return false;
    return true;
  }
};

struct DeviceDescriptor {
  DeviceKind kind = DeviceKind::Cpu;
  double rate_factor = 1.0;  // throughput multiple of one reference CPU worker
  std::size_t memory_capacity = std::size_t(1) << 62;
  std::size_t queue_depth = 4;
  BlockConstraint block;
  double transfer_cost = 0.0;  // simulated seconds per byte
  double latency = 0.0;        // fixed per-op seconds
  int threads = 0;             // cpu only; 0 = auto

  std::string summary() const;
};

/// Parse "cpu:threads=16" or "sim:rate=4,mem=6G,queue=4,block64not256,
/// xfer=5e-10,lat=1e-4". Throws ConfigError on malformed specs.
DeviceDescriptor parse_device_spec(const std::string& spec);

// ---------------------------------------------------------------------------

struct Region {
  std::size_t row0 = 0, col0 = 0, rows = 0, cols = 0;
};

enum class OpKind { Gemm, HerkTile, Her2kTile, HerkxTile, Hemm };
const char* op_kind_name(OpKind k);

/// One accumulation term alpha * A^H * B over k-major panels of the source
/// matrices. Herk-family ops use term 0 (a = A panel, b = B panel).
struct GemmTerm {
  const ComplexMatrix* a = nullptr;
  Region ar;
  const ComplexMatrix* b = nullptr;
  Region br;
  cplx alpha = 1.0;
};

class DispatchLog;

/// One schedulable unit: a destination tile plus the full accumulation chain
/// that produces it. Inner-dimension chunks stay on the executing device and
/// run in plan order, so the numeric result is independent of which device
/// runs the op.
struct BlockOp {
  OpKind kind = OpKind::Gemm;
  std::vector<GemmTerm> terms;
  ComplexMatrix* c = nullptr;
  Region cr;
  double beta = 0.0;   // herk-family (real)
  cplx beta_c = 0.0;   // gemm / hemm
  std::size_t k_chunk = 0;  // 0: single chunk over the whole inner dimension
  int plan_index = -1;
  DispatchLog* log = nullptr;
};

std::uint64_t block_op_flops(const BlockOp& op);
std::size_t block_op_packed_bytes(const BlockOp& op);

/// Contiguous column-major copy of a matrix region.
ComplexMatrix pack_block(const ComplexMatrix& m, const Region& r);
/// Exact inverse of pack_block.
void unpack_block(ComplexMatrix& dst, const Region& r, const ComplexMatrix& buf);

// ---------------------------------------------------------------------------

struct DispatchRecord {
  std::string op;
  Region dest;
  int device_id = -1;
  double t_start = 0.0, t_end = 0.0;
  int plan_index = -1;
};

class DispatchLog {
 public:
  DispatchLog();
  void append(DispatchRecord rec);
  std::vector<DispatchRecord> snapshot() const;
  void write(const std::string& path) const;
  double now() const;  // seconds since log creation

 private:
  mutable std::mutex mutex_;
  std::vector<DispatchRecord> records_;
  std::chrono::steady_clock::time_point epoch_;
};

enum class EnqueueResult { Accepted, QueueFull, TooLarge };

class DevicePool;

class Device {
 public:
  Device(DeviceDescriptor desc, int id);
  ~Device();
  Device(const Device&) = delete;
  Device& operator=(const Device&) = delete;

  const DeviceDescriptor& descriptor() const { return desc_; }
  int id() const { return id_; }

  /// Non-blocking admission. QueueFull means try again (or another device);
  /// TooLarge is permanent for this op on this device.
  EnqueueResult enqueue(BlockOp op);

  /// Synchronous execution on the caller's thread, unpacked (direct memory
  /// access). Used for the CPU's own share of the work.
  void execute_inline(const BlockOp& op, const kernels::KernelConfig& cfg);

  /// Accumulated modeled busy time.
  double busy_seconds() const;
  void add_busy(double seconds);
  /// Accumulated modeled flops executed by this device.
  std::uint64_t executed_flops() const;

  std::size_t resident_bytes() const;
  std::size_t peak_resident_bytes() const;
  std::size_t outstanding() const;

 private:
  friend class DevicePool;
  void worker_loop();
  void execute_packed(const BlockOp& op);
  double model_seconds(std::uint64_t flops, std::size_t bytes) const;

  DeviceDescriptor desc_;
  int id_;
  double calibrated_rate_ = 1e9;  // set by the pool before use

  mutable std::mutex mutex_;
  std::condition_variable cv_work_;
  std::condition_variable cv_done_;
  std::deque<std::pair<BlockOp, std::size_t>> queue_;  // op + charged bytes
  std::size_t outstanding_ = 0;
  std::size_t resident_ = 0;
  std::size_t peak_resident_ = 0;
  double busy_ = 0.0;
  std::uint64_t flops_ = 0;
  bool stop_ = false;
  std::exception_ptr error_;
  std::thread worker_;
};

/// A set of compute devices sharing one calibration of the reference CPU
/// worker rate. The pool always contains exactly one CPU device (added
/// implicitly when the configuration has none).
class DevicePool {
 public:
  explicit DevicePool(std::vector<DeviceDescriptor> descs = {},
                      kernels::KernelConfig cpu_cfg = {});

  std::size_t size() const { return devices_.size(); }
  Device& device(std::size_t i) { return *devices_[i]; }
  std::vector<Device*> accelerators();
  Device& cpu();
  const kernels::KernelConfig& cpu_config() const { return cpu_cfg_; }

  /// Real flops/s of one reference CPU worker, measured once (lazily) by
  /// timing a fixed gemm. Recorded in run reports for reproducibility.
  double calibrated_cpu_rate();
  void set_calibrated_cpu_rate(double rate);  // test hook / report replay

  /// Block until every enqueued op on every device has completed; rethrows
  /// the first execution error.
  void wait_all();

  std::vector<std::string> descriptions() const;

 private:
  std::vector<std::unique_ptr<Device>> devices_;
  kernels::KernelConfig cpu_cfg_;
  std::size_t cpu_index_ = 0;
  double calibrated_rate_ = 0.0;
  std::mutex calib_mutex_;
};

}  // namespace hsdla::device
