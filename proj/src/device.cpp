#include "hsdla/device.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>

namespace hsdla::device {

using kernels::detail::gemm_ctn;
using kernels::detail::hemm_left_lower;
using kernels::detail::her2k_ctn_lower;
using kernels::detail::herk_ctn_lower;
using kernels::detail::herkx_ctn_lower;

// ------------------------------ Descriptors --------------------------------

std::string DeviceDescriptor::summary() const {
  std::ostringstream os;
  os << (kind == DeviceKind::Cpu ? "cpu" : "sim");
  os << ":rate=" << rate_factor << ",queue=" << queue_depth;
  if (kind == DeviceKind::Cpu) {
    os << ",threads=" << threads;
  } else {
    os << ",mem=" << memory_capacity << ",xfer=" << transfer_cost
       << ",lat=" << latency;
  }
  if (!block.none()) {
    os << ",block" << block.divisor;
    if (block.forbidden) os << "not" << block.forbidden;
  }
  return os.str();
}

namespace {

std::size_t parse_bytes(const std::string& v) {
  std::size_t mult = 1;
  std::string num = v;
  if (!v.empty()) {
    switch (v.back()) {
      case 'K': case 'k': mult = 1ull << 10; num.pop_back(); break;
      case 'M': case 'm': mult = 1ull << 20; num.pop_back(); break;
      case 'G': case 'g': mult = 1ull << 30; num.pop_back(); break;
      default: break;
    }
  }
  return static_cast<std::size_t>(std::stod(num) * static_cast<double>(mult));
}

}  // namespace

DeviceDescriptor parse_device_spec(const std::string& spec) {
  DeviceDescriptor d;
  std::string kind = spec;
  std::string rest;
  if (auto colon = spec.find(':'); colon != std::string::npos) {
    kind = spec.substr(0, colon);
    rest = spec.substr(colon + 1);
  }
  if (kind == "cpu") {
    d.kind = DeviceKind::Cpu;
  } else if (kind == "sim") {
    d.kind = DeviceKind::SimulatedAccelerator;
    d.memory_capacity = std::size_t(4) << 30;
  } else {
    throw ConfigError("unknown device kind: " + kind);
  }
  std::stringstream ss(rest);
  std::string tok;
  try {
    while (std::getline(ss, tok, ',')) {
      if (tok.empty()) continue;
      if (tok.rfind("block", 0) == 0) {
        // block<d> or block<d>not<e>
        std::string body = tok.substr(5);
        const auto notpos = body.find("not");
        if (notpos == std::string::npos) {
          d.block.divisor = std::stoul(body);
        } else {
          d.block.divisor = std::stoul(body.substr(0, notpos));
          d.block.forbidden = std::stoul(body.substr(notpos + 3));
        }
        continue;
      }
      const auto eq = tok.find('=');
      if (eq == std::string::npos) throw ConfigError("bad device option: " + tok);
      const std::string key = tok.substr(0, eq);
      const std::string val = tok.substr(eq + 1);
      if (key == "rate") d.rate_factor = std::stod(val);
      else if (key == "mem") d.memory_capacity = parse_bytes(val);
      else if (key == "queue") d.queue_depth = std::stoul(val);
      else if (key == "xfer") d.transfer_cost = std::stod(val);
      else if (key == "lat") d.latency = std::stod(val);
      else if (key == "threads") d.threads = std::stoi(val);
      else throw ConfigError("unknown device option: " + key);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError("malformed device spec: " + spec);
  }
  if (d.rate_factor <= 0.0) throw ConfigError("device rate must be > 0");
  if (d.queue_depth < 1) throw ConfigError("queue depth must be >= 1");
  return d;
}

// ------------------------------- Block ops ---------------------------------

const char* op_kind_name(OpKind k) {
  switch (k) {
    case OpKind::Gemm: return "gemm";
    case OpKind::HerkTile: return "herk_tile";
    case OpKind::Her2kTile: return "her2k_tile";
    case OpKind::HerkxTile: return "herkx_tile";
    case OpKind::Hemm: return "hemm";
  }
  return "?";
}

namespace {

void check_region(const ComplexMatrix& m, const Region& r, const char* what) {
  if (r.row0 + r.rows > m.rows() || r.col0 + r.cols > m.cols()) {
    throw DimensionError(std::string("region out of bounds: ") + what);
  }
}

void validate(const BlockOp& op) {
  if (!op.c || op.terms.empty()) throw DimensionError("block op: missing operands");
  check_region(*op.c, op.cr, "dest");
  const std::size_t k = op.terms.front().ar.rows;
  for (const GemmTerm& t : op.terms) {
    if (!t.a || !t.b) throw DimensionError("block op: missing term operand");
    check_region(*t.a, t.ar, "term A");
    check_region(*t.b, t.br, "term B");
    if (op.kind == OpKind::Hemm) {
      if (t.ar.rows != t.ar.cols || t.ar.rows != op.cr.rows ||
          t.br.rows != t.ar.cols || t.br.cols != op.cr.cols) {
        throw DimensionError("block op: hemm dims");
      }
      continue;
    }
    if (t.ar.rows != k || t.br.rows != k) {
      throw DimensionError("block op: inner dims disagree");
    }
    if (op.kind == OpKind::Gemm) {
      if (t.ar.cols != op.cr.rows || t.br.cols != op.cr.cols) {
        throw DimensionError("block op: gemm dims");
      }
    } else {
      if (op.cr.rows != op.cr.cols || t.ar.cols != op.cr.rows ||
          t.br.cols != op.cr.cols) {
        throw DimensionError("block op: triangular tile dims");
      }
    }
  }
}

bool triangular(OpKind k) {
  return k == OpKind::HerkTile || k == OpKind::Her2kTile ||
         k == OpKind::HerkxTile;
}

std::size_t chunk_of(const BlockOp& op) {
  const std::size_t k = op.terms.front().ar.rows;
  if (op.kind == OpKind::Hemm || op.k_chunk == 0) return std::max<std::size_t>(k, 1);
  return std::min(std::max<std::size_t>(op.k_chunk, 1), std::max<std::size_t>(k, 1));
}

// Run one accumulation chunk. Pointers address the (k0-shifted) panels and
// the destination tile; identical arithmetic for the packed and the direct
// path, so results do not depend on the executing device.
void apply_chunk(const BlockOp& op, std::size_t kc, bool first,
                 const std::vector<std::pair<const cplx*, std::size_t>>& a,
                 const std::vector<std::pair<const cplx*, std::size_t>>& b,
                 cplx* c, std::size_t ldc) {
  const std::size_t m = op.cr.rows;
  const std::size_t n = op.cr.cols;
  switch (op.kind) {
    case OpKind::Gemm:
      for (std::size_t t = 0; t < op.terms.size(); ++t) {
        const cplx beta = (first && t == 0) ? op.beta_c : cplx(1.0);
        gemm_ctn(m, n, kc, op.terms[t].alpha, a[t].first, a[t].second,
                 b[t].first, b[t].second, beta, c, ldc);
      }
      break;
    case OpKind::HerkTile:
      herk_ctn_lower(n, kc, op.terms[0].alpha.real(), a[0].first, a[0].second,
                     first ? op.beta : 1.0, c, ldc);
      break;
    case OpKind::Her2kTile:
      her2k_ctn_lower(n, kc, op.terms[0].alpha, a[0].first, a[0].second,
                      b[0].first, b[0].second, first ? op.beta : 1.0, c, ldc);
      break;
    case OpKind::HerkxTile:
      herkx_ctn_lower(n, kc, op.terms[0].alpha, a[0].first, a[0].second,
                      b[0].first, b[0].second, first ? op.beta : 1.0, c, ldc);
      break;
    case OpKind::Hemm:
      hemm_left_lower(m, n, op.terms[0].alpha, a[0].first, a[0].second,
                      b[0].first, b[0].second, op.beta_c, c, ldc);
      break;
  }
}

const cplx* region_ptr(const ComplexMatrix& m, const Region& r,
                       std::size_t k0 = 0) {
  return m.data() + r.col0 * m.ld() + r.row0 + k0;
}

}  // namespace

std::uint64_t block_op_flops(const BlockOp& op) {
  const std::uint64_t m = op.cr.rows, n = op.cr.cols;
  switch (op.kind) {
    case OpKind::Gemm: {
      std::uint64_t f = 0;
      for (const GemmTerm& t : op.terms) f += 8ull * m * n * t.ar.rows;
      return f;
    }
    case OpKind::HerkTile:
    case OpKind::HerkxTile:
      return 8ull * op.terms[0].ar.rows * (n * (n + 1) / 2);
    case OpKind::Her2kTile:
      return 16ull * op.terms[0].ar.rows * (n * (n + 1) / 2);
    case OpKind::Hemm:
      return 8ull * m * m * n;
  }
  return 0;
}

std::size_t block_op_packed_bytes(const BlockOp& op) {
  const std::size_t chunk = chunk_of(op);
  // Destination tile, staging copy, and one pair of panel chunks per term.
  std::size_t elems = 2 * op.cr.rows * op.cr.cols;
  for (const GemmTerm& t : op.terms) {
    const std::size_t kc = std::min(chunk, t.ar.rows);
    elems += kc * t.ar.cols + kc * t.br.cols;
  }
  return elems * sizeof(cplx);
}

ComplexMatrix pack_block(const ComplexMatrix& m, const Region& r) {
  check_region(m, r, "pack_block");
  ComplexMatrix buf(r.rows, r.cols);
  for (std::size_t j = 0; j < r.cols; ++j) {
    const cplx* src = m.col(r.col0 + j) + r.row0;
    std::copy(src, src + r.rows, buf.col(j));
  }
  return buf;
}

void unpack_block(ComplexMatrix& dst, const Region& r, const ComplexMatrix& buf) {
  check_region(dst, r, "unpack_block");
  if (buf.rows() != r.rows || buf.cols() != r.cols) {
    throw DimensionError("unpack_block: buffer shape mismatch");
  }
  for (std::size_t j = 0; j < r.cols; ++j) {
    std::copy(buf.col(j), buf.col(j) + r.rows, dst.col(r.col0 + j) + r.row0);
  }
}

// ------------------------------ Dispatch log -------------------------------

DispatchLog::DispatchLog() : epoch_(std::chrono::steady_clock::now()) {}

void DispatchLog::append(DispatchRecord rec) {
  std::lock_guard<std::mutex> lock(mutex_);
  records_.push_back(std::move(rec));
}

std::vector<DispatchRecord> DispatchLog::snapshot() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return records_;
}

void DispatchLog::write(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open dispatch log for writing: " + path);
  for (const DispatchRecord& r : snapshot()) {
    os << r.op << ' ' << r.dest.row0 << ',' << r.dest.col0 << ',' << r.dest.rows
       << ',' << r.dest.cols << ' ' << r.device_id << ' ' << r.t_start << ' '
       << r.t_end << '\n';
  }
}

double DispatchLog::now() const {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       epoch_).count();
}

// --------------------------------- Device ----------------------------------

Device::Device(DeviceDescriptor desc, int id) : desc_(std::move(desc)), id_(id) {
  if (desc_.kind == DeviceKind::SimulatedAccelerator) {
    worker_ = std::thread([this] { worker_loop(); });
  }
}

Device::~Device() {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    stop_ = true;
  }
  cv_work_.notify_all();
  if (worker_.joinable()) worker_.join();
}

EnqueueResult Device::enqueue(BlockOp op) {
  validate(op);
  const std::size_t bytes = block_op_packed_bytes(op);
  if (bytes > desc_.memory_capacity) return EnqueueResult::TooLarge;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    if (outstanding_ >= desc_.queue_depth) return EnqueueResult::QueueFull;
    if (resident_ + bytes > desc_.memory_capacity) return EnqueueResult::QueueFull;
    queue_.emplace_back(std::move(op), bytes);
    ++outstanding_;
    resident_ += bytes;
    peak_resident_ = std::max(peak_resident_, resident_);
  }
  cv_work_.notify_one();
  return EnqueueResult::Accepted;
}

double Device::model_seconds(std::uint64_t flops, std::size_t bytes) const {
  double t = static_cast<double>(flops) / (desc_.rate_factor * calibrated_rate_);
  if (desc_.kind == DeviceKind::SimulatedAccelerator) {
    t += desc_.transfer_cost * static_cast<double>(bytes) + desc_.latency;
  }
  return t;
}

void Device::worker_loop() {
  for (;;) {
    std::pair<BlockOp, std::size_t> item;
    {
      std::unique_lock<std::mutex> lock(mutex_);
      cv_work_.wait(lock, [this] { return stop_ || !queue_.empty(); });
      if (queue_.empty()) return;  // stop requested, queue drained
      item = std::move(queue_.front());
      queue_.pop_front();
    }
    const BlockOp& op = item.first;
    const double t_start = op.log ? op.log->now() : 0.0;
    const auto wall0 = std::chrono::steady_clock::now();
    std::uint64_t flops = 0;
    try {
      execute_packed(op);
      flops = block_op_flops(op);
    } catch (...) {
      std::lock_guard<std::mutex> lock(mutex_);
      if (!error_) error_ = std::current_exception();
    }
    const double modeled = model_seconds(flops, item.second);
    const double elapsed = std::chrono::duration<double>(
                               std::chrono::steady_clock::now() - wall0).count();
    // Throttle the wall clock up to the modeled duration; math is unaffected.
    if (modeled > elapsed) {
      std::this_thread::sleep_for(std::chrono::duration<double>(modeled - elapsed));
    }
    if (op.log) {
      op.log->append({op_kind_name(op.kind), op.cr, id_, t_start, op.log->now(),
                      op.plan_index});
    }
    {
      std::lock_guard<std::mutex> lock(mutex_);
      busy_ += modeled;
      flops_ += flops;
      resident_ -= item.second;
      --outstanding_;
    }
    cv_done_.notify_all();
  }
}

void Device::execute_packed(const BlockOp& op) {
  const std::size_t m = op.cr.rows, n = op.cr.cols;
  const std::size_t k = op.terms.front().ar.rows;
  const std::size_t chunk = chunk_of(op);
  const bool tri = triangular(op.kind);
  const bool reads_dest = tri ? op.beta != 0.0 : op.beta_c != cplx(0.0);

  ComplexMatrix cbuf(m, n);  // zero-initialized; upper of diagonal tiles stays 0
  if (reads_dest) {
    if (tri) {
      for (std::size_t j = 0; j < n; ++j) {
        const cplx* src = op.c->col(op.cr.col0 + j) + op.cr.row0;
        for (std::size_t i = j; i < m; ++i) cbuf(i, j) = src[i];
      }
    } else {
      cbuf = pack_block(*op.c, op.cr);
    }
  }

  for (std::size_t k0 = 0; k0 < k; k0 += chunk) {
    const std::size_t kc = std::min(chunk, k - k0);
    std::vector<ComplexMatrix> abufs, bbufs;
    std::vector<std::pair<const cplx*, std::size_t>> ap, bp;
    for (const GemmTerm& t : op.terms) {
      const std::size_t ka = op.kind == OpKind::Hemm ? t.ar.rows : kc;
      const std::size_t kb = op.kind == OpKind::Hemm ? t.br.rows : kc;
      abufs.push_back(pack_block(*t.a, {t.ar.row0 + (op.kind == OpKind::Hemm ? 0 : k0),
                                        t.ar.col0, ka, t.ar.cols}));
      bbufs.push_back(pack_block(*t.b, {t.br.row0 + (op.kind == OpKind::Hemm ? 0 : k0),
                                        t.br.col0, kb, t.br.cols}));
    }
    for (std::size_t t = 0; t < op.terms.size(); ++t) {
      ap.emplace_back(abufs[t].data(), abufs[t].ld());
      bp.emplace_back(bbufs[t].data(), bbufs[t].ld());
    }
    apply_chunk(op, kc, k0 == 0, ap, bp, cbuf.data(), cbuf.ld());
    if (op.kind == OpKind::Hemm) break;
  }

  // Stream results back; never touch the upper triangle of diagonal tiles.
  if (tri) {
    for (std::size_t j = 0; j < n; ++j) {
      cplx* dst = op.c->col(op.cr.col0 + j) + op.cr.row0;
      for (std::size_t i = j; i < m; ++i) dst[i] = cbuf(i, j);
    }
  } else {
    unpack_block(*op.c, op.cr, cbuf);
  }
}

void Device::execute_inline(const BlockOp& op, const kernels::KernelConfig&) {
  validate(op);
  const double t_start = op.log ? op.log->now() : 0.0;
  const std::size_t k = op.terms.front().ar.rows;
  const std::size_t chunk = chunk_of(op);
  cplx* c = op.c->col(op.cr.col0) + op.cr.row0;
  const std::size_t ldc = op.c->ld();

  for (std::size_t k0 = 0; k0 < k; k0 += chunk) {
    const std::size_t kc = std::min(chunk, k - k0);
    std::vector<std::pair<const cplx*, std::size_t>> ap, bp;
    for (const GemmTerm& t : op.terms) {
      const std::size_t off = op.kind == OpKind::Hemm ? 0 : k0;
      ap.emplace_back(region_ptr(*t.a, t.ar, off), t.a->ld());
      bp.emplace_back(region_ptr(*t.b, t.br, off), t.b->ld());
    }
    apply_chunk(op, kc, k0 == 0, ap, bp, c, ldc);
    if (op.kind == OpKind::Hemm) break;
  }

  const std::uint64_t flops = block_op_flops(op);
  add_busy(model_seconds(flops, 0));
  {
    std::lock_guard<std::mutex> lock(mutex_);
    flops_ += flops;
  }
  if (op.log) {
    op.log->append({op_kind_name(op.kind), op.cr, id_, t_start, op.log->now(),
                    op.plan_index});
  }
}

double Device::busy_seconds() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return busy_;
}

void Device::add_busy(double seconds) {
  std::lock_guard<std::mutex> lock(mutex_);
  busy_ += seconds;
}

std::uint64_t Device::executed_flops() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return flops_;
}

std::size_t Device::resident_bytes() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return resident_;
}

std::size_t Device::peak_resident_bytes() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return peak_resident_;
}

std::size_t Device::outstanding() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return outstanding_;
}

// -------------------------------- DevicePool -------------------------------

DevicePool::DevicePool(std::vector<DeviceDescriptor> descs,
                       kernels::KernelConfig cpu_cfg)
    : cpu_cfg_(cpu_cfg) {
  bool has_cpu = false;
  for (const DeviceDescriptor& d : descs) {
    if (d.kind == DeviceKind::Cpu) has_cpu = true;
  }
  if (!has_cpu) descs.push_back(DeviceDescriptor{});
  for (std::size_t i = 0; i < descs.size(); ++i) {
    if (descs[i].kind == DeviceKind::Cpu) cpu_index_ = i;
    devices_.push_back(std::make_unique<Device>(descs[i], static_cast<int>(i)));
  }
}

std::vector<Device*> DevicePool::accelerators() {
  std::vector<Device*> out;
  for (auto& d : devices_) {
    if (d->descriptor().kind == DeviceKind::SimulatedAccelerator) {
      out.push_back(d.get());
    }
  }
  return out;
}

Device& DevicePool::cpu() { return *devices_[cpu_index_]; }

double DevicePool::calibrated_cpu_rate() {
  std::lock_guard<std::mutex> lock(calib_mutex_);
  if (calibrated_rate_ > 0.0) return calibrated_rate_;
  constexpr std::size_t n = 128;
  ComplexMatrix a(n, n), b(n, n), c(n, n);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a.data()[i] = cplx(0.5 + 1e-3 * static_cast<double>(i % 97), -0.25);
    b.data()[i] = cplx(-0.75, 0.5 - 1e-3 * static_cast<double>(i % 89));
  }
  double best = 1e300;
  for (int rep = 0; rep < 3; ++rep) {
    const auto t0 = std::chrono::steady_clock::now();
    gemm_ctn(n, n, n, cplx(1.0), a.data(), n, b.data(), n, cplx(0.0), c.data(), n);
    const double dt = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0).count();
    best = std::min(best, dt);
  }
  calibrated_rate_ = 8.0 * static_cast<double>(n) * n * n / std::max(best, 1e-9);
  for (auto& d : devices_) d->calibrated_rate_ = calibrated_rate_;
  return calibrated_rate_;
}

void DevicePool::set_calibrated_cpu_rate(double rate) {
  std::lock_guard<std::mutex> lock(calib_mutex_);
  calibrated_rate_ = rate;
  for (auto& d : devices_) d->calibrated_rate_ = rate;
}

void DevicePool::wait_all() {
  for (auto& d : devices_) {
    std::unique_lock<std::mutex> lock(d->mutex_);
    d->cv_done_.wait(lock, [&] { return d->outstanding_ == 0; });
  }
  for (auto& d : devices_) {
    std::lock_guard<std::mutex> lock(d->mutex_);
    if (d->error_) {
      std::exception_ptr e = d->error_;
      d->error_ = nullptr;
      std::rethrow_exception(e);
    }
  }
}

std::vector<std::string> DevicePool::descriptions() const {
  std::vector<std::string> out;
  for (const auto& d : devices_) out.push_back(d->descriptor().summary());
  return out;
}

}  // namespace hsdla::device
